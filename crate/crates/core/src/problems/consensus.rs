//! Scenarios II and III: dynamic average consensus with circularly shifting targets.

use super::drift::OptimalTrajectory;
use super::{check_index, check_len, AnalyticDrift, DynamicObjective, ProblemError};

/// `f_i^k(x) = ½(x − y_i^k)²` on `n = 2p + 1` agents.
///
/// Agent `i` (0-based) starts at `y_i^0 = (i + 1)m` and the targets rotate by
/// `T` places per step: `y_i^{k+1} = y_{⟨i−T⟩_n}^k`. A shift of `n` freezes the
/// targets and gives a static problem.
#[derive(Debug, Clone)]
pub struct ShiftingConsensus {
    p: usize,
    spacing: f64,
    shift: usize,
    trajectory: OptimalTrajectory,
    label: String,
}

impl ShiftingConsensus {
    pub fn new(p: usize, spacing_m: f64, shift: usize, horizon: usize) -> Result<Self, ProblemError> {
        if p == 0 {
            return Err(ProblemError::InvalidParameter("p must be positive".into()));
        }
        if !(spacing_m > 0.0 && spacing_m.is_finite()) {
            return Err(ProblemError::InvalidParameter(format!("spacing must be positive, got {spacing_m}")));
        }
        if shift == 0 {
            return Err(ProblemError::InvalidParameter("shift must be positive".into()));
        }
        let n = 2 * p + 1;
        let label = match shift % n {
            0 => "static".to_string(),
            s if s == p + 1 => "II".to_string(),
            1 => "III".to_string(),
            s => format!("shift-{s}"),
        };
        let optimum = (p + 1) as f64 * spacing_m;
        Ok(Self { p, spacing: spacing_m, shift, trajectory: OptimalTrajectory::constant(vec![optimum], horizon), label })
    }

    /// Scenario II: `T = p + 1`, the shift that maximizes gradient drift.
    pub fn scenario_ii(p: usize, spacing_m: f64, horizon: usize) -> Result<Self, ProblemError> {
        Self::new(p, spacing_m, p + 1, horizon)
    }

    /// Scenario III: `T = 1`, neighboring targets swap slowly.
    pub fn scenario_iii(p: usize, spacing_m: f64, horizon: usize) -> Result<Self, ProblemError> {
        Self::new(p, spacing_m, 1, horizon)
    }

    /// Time-invariant targets.
    pub fn static_targets(p: usize, spacing_m: f64, horizon: usize) -> Result<Self, ProblemError> {
        Self::new(p, spacing_m, 2 * p + 1, horizon)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn shift(&self) -> usize {
        self.shift
    }

    /// `y_i^k = (((i − kT) mod n) + 1)·m`.
    pub fn target(&self, agent: usize, k: usize) -> f64 {
        let n = (2 * self.p + 1) as u128;
        let moved = (k as u128 % n) * (self.shift as u128 % n) % n;
        let slot = (agent as u128 + n - moved) % n;
        (slot + 1) as f64 * self.spacing
    }
}

/// `x − y_i^k`.
pub fn consensus_gradient(sc: &ShiftingConsensus, agent: usize, k: usize, x: f64) -> Result<f64, ProblemError> {
    check_index(agent, sc.agents(), k, sc.horizon())?;
    Ok(x - sc.target(agent, k))
}

impl DynamicObjective for ShiftingConsensus {
    fn agents(&self) -> usize {
        2 * self.p + 1
    }

    fn dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        self.trajectory.horizon()
    }

    fn mu(&self) -> f64 {
        1.0
    }

    fn lipschitz(&self) -> f64 {
        1.0
    }

    fn gradient(&self, agent: usize, k: usize, x: &[f64], out: &mut [f64]) -> Result<(), ProblemError> {
        check_len(x, 1)?;
        check_len(out, 1)?;
        out[0] = consensus_gradient(self, agent, k, x[0])?;
        Ok(())
    }

    fn value(&self, agent: usize, k: usize, x: &[f64]) -> Result<f64, ProblemError> {
        check_len(x, 1)?;
        Ok(0.5 * consensus_gradient(self, agent, k, x[0])?.powi(2))
    }

    fn trajectory(&self) -> &OptimalTrajectory {
        &self.trajectory
    }

    /// `D = p(p+1)m/√n`; a shift by `T' = T mod n` moves the gradient vector
    /// by `2T'(n−T')m/√n` in scaled `ℓ¹`, giving `2D` at `T' = p+1` and
    /// `4pm/√n` at `T' = 1`.
    fn analytic_drift(&self) -> Option<AnalyticDrift> {
        let n = self.agents();
        let root_n = (n as f64).sqrt();
        let p = self.p as f64;
        let t = (self.shift % n) as f64;
        Some(AnalyticDrift {
            delta_x: 0.0,
            grad_bound: p * (p + 1.0) * self.spacing / root_n,
            grad_drift: 2.0 * t * (n as f64 - t) * self.spacing / root_n,
        })
    }

    fn scenario(&self) -> &str {
        &self.label
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hand_example() {
        let sc = ShiftingConsensus::new(1, 1.0, 2, 4).unwrap();
        // Second agent (index 1) starts at 2m.
        assert_eq!(sc.target(1, 0), 2.0);
        assert_eq!(consensus_gradient(&sc, 1, 0, 5.0).unwrap(), 3.0);
        assert_eq!(consensus_gradient(&sc, 1, 0, 2.0).unwrap(), 0.0);
        assert!(consensus_gradient(&sc, 3, 0, 0.0).is_err());
        assert!(consensus_gradient(&sc, 0, 5, 0.0).is_err());
    }

    #[test]
    fn targets_follow_the_shift_recursion() {
        for shift in [1, 3, 4, 7, 11] {
            let sc = ShiftingConsensus::new(3, 0.5, shift, 30).unwrap();
            let n = 7;
            for k in 0..30 {
                for i in 0..n {
                    let from = (i + n - shift % n) % n;
                    assert_eq!(sc.target(i, k + 1), sc.target(from, k));
                }
            }
        }
    }

    #[test]
    fn targets_stay_a_permutation() {
        let sc = ShiftingConsensus::scenario_ii(4, 2.0, 25).unwrap();
        for k in 0..=25 {
            let mut ys: Vec<f64> = (0..9).map(|i| sc.target(i, k)).collect();
            ys.sort_by(f64::total_cmp);
            let expected: Vec<f64> = (1..=9).map(|j| j as f64 * 2.0).collect();
            assert_eq!(ys, expected);
        }
    }

    #[test]
    fn average_gradient_vanishes_at_optimum() {
        let sc = ShiftingConsensus::scenario_iii(5, 1.0, 3).unwrap();
        assert_eq!(sc.optimum(2), &[6.0]);
        let total: f64 = (0..11).map(|i| consensus_gradient(&sc, i, 2, 6.0).unwrap()).sum();
        assert_eq!(total, 0.0);
    }

    #[test]
    fn scenario_labels() {
        assert_eq!(ShiftingConsensus::scenario_ii(3, 1.0, 5).unwrap().scenario(), "II");
        assert_eq!(ShiftingConsensus::scenario_iii(3, 1.0, 5).unwrap().scenario(), "III");
        let st = ShiftingConsensus::static_targets(3, 1.0, 5).unwrap();
        assert_eq!(st.scenario(), "static");
        assert_eq!(st.analytic_drift().unwrap().grad_drift, 0.0);
        assert_eq!(st.target(2, 4), st.target(2, 0));
    }

    #[test]
    fn closed_forms_at_paper_scale() {
        let ii = ShiftingConsensus::scenario_ii(1000, 1.0, 2).unwrap().analytic_drift().unwrap();
        assert_relative_eq!(ii.grad_bound, 1000.0 * 1001.0 / 2001f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(ii.grad_bound, 2.2379e4, max_relative = 1e-4);
        assert_relative_eq!(ii.grad_drift, 2.0 * ii.grad_bound, max_relative = 1e-15);
        let iii = ShiftingConsensus::scenario_iii(1000, 1.0, 2).unwrap().analytic_drift().unwrap();
        assert_relative_eq!(iii.grad_drift, 89.42, max_relative = 1e-4);
    }
}
