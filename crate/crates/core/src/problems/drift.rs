use super::{DynamicObjective, ProblemError};

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Optimal points `x̃^{k*}` for `k = 0..=M` and their largest step `Δx`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalTrajectory {
    pub points: Vec<Vec<f64>>,
    pub delta_x: f64,
}

impl OptimalTrajectory {
    pub fn from_points(points: Vec<Vec<f64>>) -> Self {
        let delta_x = points.windows(2).map(|w| distance(&w[0], &w[1])).fold(0.0, f64::max);
        Self { points, delta_x }
    }

    /// A trajectory that never moves.
    pub fn constant(point: Vec<f64>, horizon: usize) -> Self {
        Self { points: vec![point; horizon + 1], delta_x: 0.0 }
    }

    pub fn horizon(&self) -> usize {
        self.points.len() - 1
    }
}

/// Closed-form drift constants supplied by a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticDrift {
    pub delta_x: f64,
    pub grad_bound: f64,
    pub grad_drift: f64,
}

/// Measured `(Δx, D, Δg)` over a full horizon.
///
/// `D = max_k (1/√n) Σ_i ‖∇f_i^k(x̃^{k*})‖` and
/// `Δg = max_{k≥1} (1/√n) Σ_i ‖∇f_i^k(x̃^{k*}) − ∇f_i^{k−1}(x̃^{(k−1)*})‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftProfile {
    pub delta_x: f64,
    pub grad_bound: f64,
    pub grad_drift: f64,
    pub analytic: Option<AnalyticDrift>,
}

impl DriftProfile {
    /// Largest relative excess of a measured constant over its analytic value.
    /// Nonpositive when every measurement respects its formula.
    pub fn excess_over_analytic(&self) -> Option<f64> {
        let a = self.analytic?;
        let rel = |measured: f64, declared: f64| (measured - declared) / declared.abs().max(f64::MIN_POSITIVE);
        Some(
            rel(self.delta_x, a.delta_x)
                .max(rel(self.grad_bound, a.grad_bound))
                .max(rel(self.grad_drift, a.grad_drift)),
        )
    }
}

/// Evaluates every gradient at the optimum along the whole horizon.
pub fn drift_profile<O: DynamicObjective + ?Sized>(objective: &O) -> Result<DriftProfile, ProblemError> {
    let n = objective.agents();
    let d = objective.dim();
    let scale = 1.0 / (n as f64).sqrt();
    let mut prev = vec![0.0; n * d];
    let mut cur = vec![0.0; n * d];
    let mut grad_bound: f64 = 0.0;
    let mut grad_drift: f64 = 0.0;
    for k in 0..=objective.horizon() {
        let opt = objective.optimum(k);
        for (i, g) in cur.chunks_exact_mut(d).enumerate() {
            objective.gradient(i, k, opt, g)?;
        }
        let bound = scale * cur.chunks_exact(d).map(norm).sum::<f64>();
        grad_bound = grad_bound.max(bound);
        if k > 0 {
            let drift = scale * cur.chunks_exact(d).zip(prev.chunks_exact(d)).map(|(a, b)| distance(a, b)).sum::<f64>();
            grad_drift = grad_drift.max(drift);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(DriftProfile {
        delta_x: objective.trajectory().delta_x,
        grad_bound,
        grad_drift,
        analytic: objective.analytic_drift(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_x_is_largest_step() {
        let t = OptimalTrajectory::from_points(vec![vec![0.0, 0.0], vec![3.0, 4.0], vec![3.0, 5.0]]);
        assert_eq!(t.delta_x, 5.0);
        assert_eq!(t.horizon(), 2);
        assert_eq!(OptimalTrajectory::constant(vec![1.0], 4).delta_x, 0.0);
    }
}
