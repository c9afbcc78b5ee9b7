//! Scenario I: a decentralized least-squares problem whose solution circles the origin.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::drift::OptimalTrajectory;
use super::{check_index, check_len, AnalyticDrift, DynamicObjective, ProblemError};
use crate::seeds::derive_seed;

/// Fresh draws allowed per time step before giving up on a singular Hessian.
pub const MAX_RESAMPLES: u32 = 16;
const DIM: usize = 2;
const PD_FLOOR: f64 = 1e-10;

/// `x̃^{k*} = (cos(3πk/2M), sin(3πk/2M))` for `k = 0..=M`.
pub fn ls_trajectory(horizon: usize) -> Result<OptimalTrajectory, ProblemError> {
    if horizon < 2 {
        return Err(ProblemError::InvalidParameter(format!("horizon must be >= 2, got {horizon}")));
    }
    let points = (0..=horizon)
        .map(|k| {
            let theta = 3.0 * PI * k as f64 / (2.0 * horizon as f64);
            vec![theta.cos(), theta.sin()]
        })
        .collect();
    Ok(OptimalTrajectory::from_points(points))
}

/// Eigenvalues `(min, max)` of the symmetric matrix `[[a, b], [b, c]]`.
fn sym2_eigen(a: f64, b: f64, c: f64) -> (f64, f64) {
    let mean = 0.5 * (a + c);
    let rad = (0.5 * (a - c)).hypot(b);
    (mean - rad, mean + rad)
}

/// Per-agent data `f_i^k(x) = ½‖C_i^k x − r_i^k‖²` with `r_i^k = C_i^k x̃^{k*}`.
#[derive(Debug, Clone)]
pub struct LeastSquaresStream {
    n: usize,
    rows: usize,
    seed: u64,
    trajectory: OptimalTrajectory,
    /// Indexed `((k·n + i)·rows + r)·2 + l`.
    coeffs: Vec<f64>,
    /// Indexed `(k·n + i)·rows + r`.
    measurements: Vec<f64>,
    mu: f64,
    lipschitz: f64,
}

impl LeastSquaresStream {
    /// Draws standard-normal `C_i^k` (`rows_per_agent × 2`) for every agent and time.
    pub fn new(n: usize, rows_per_agent: usize, horizon: usize, seed: u64) -> Result<Self, ProblemError> {
        if n == 0 || rows_per_agent == 0 {
            return Err(ProblemError::InvalidParameter("need at least one agent and one row".into()));
        }
        let trajectory = ls_trajectory(horizon)?;
        let per_step = n * rows_per_agent * DIM;
        let mut coeffs = Vec::with_capacity(per_step * (horizon + 1));
        let mut measurements = Vec::with_capacity(n * rows_per_agent * (horizon + 1));
        let mut mu = f64::INFINITY;
        let mut lipschitz: f64 = 0.0;

        for k in 0..=horizon {
            let (block, lam_min) = Self::draw_step(n, rows_per_agent, seed, k)?;
            mu = mu.min(lam_min);
            let opt = &trajectory.points[k];
            for agent in block.chunks_exact(rows_per_agent * DIM) {
                let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
                for row in agent.chunks_exact(DIM) {
                    a += row[0] * row[0];
                    b += row[0] * row[1];
                    c += row[1] * row[1];
                    measurements.push(row[0] * opt[0] + row[1] * opt[1]);
                }
                lipschitz = lipschitz.max(sym2_eigen(a, b, c).1);
            }
            coeffs.extend_from_slice(&block);
        }
        Ok(Self { n, rows: rows_per_agent, seed, trajectory, coeffs, measurements, mu, lipschitz })
    }

    /// One time step of coefficients, redrawn under derived seeds until
    /// `(1/n) Σ_i C_iᵀC_i` is positive definite. Returns its smallest eigenvalue too.
    fn draw_step(n: usize, rows: usize, seed: u64, k: usize) -> Result<(Vec<f64>, f64), ProblemError> {
        for attempt in 0..MAX_RESAMPLES {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[k as u64, u64::from(attempt)]));
            let block: Vec<f64> = (0..n * rows * DIM).map(|_| StandardNormal.sample(&mut rng)).collect();
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for row in block.chunks_exact(DIM) {
                a += row[0] * row[0];
                b += row[0] * row[1];
                c += row[1] * row[1];
            }
            let inv = 1.0 / n as f64;
            let (lam_min, _) = sym2_eigen(a * inv, b * inv, c * inv);
            if lam_min > PD_FLOOR {
                return Ok((block, lam_min));
            }
        }
        Err(ProblemError::SingularHessian { k, attempts: MAX_RESAMPLES })
    }

    pub fn rows_per_agent(&self) -> usize {
        self.rows
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Row-major `C_i^k`.
    pub fn coefficients(&self, agent: usize, k: usize) -> &[f64] {
        let start = (k * self.n + agent) * self.rows * DIM;
        &self.coeffs[start..start + self.rows * DIM]
    }

    pub fn measurements(&self, agent: usize, k: usize) -> &[f64] {
        let start = (k * self.n + agent) * self.rows;
        &self.measurements[start..start + self.rows]
    }

    /// Plain-text dump, one line per `(k, agent, row)`: `k i r c0 c1 measurement`.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# k agent row c0 c1 measurement\n");
        for k in 0..=self.trajectory.horizon() {
            for i in 0..self.n {
                let c = self.coefficients(i, k);
                let r = self.measurements(i, k);
                for row in 0..self.rows {
                    let _ = writeln!(s, "{k} {i} {row} {} {} {}", c[row * DIM], c[row * DIM + 1], r[row]);
                }
            }
        }
        s
    }
}

/// `(C_i^k)ᵀ(C_i^k x − r_i^k)`.
pub fn ls_gradient(
    stream: &LeastSquaresStream,
    agent: usize,
    k: usize,
    x: &[f64],
    out: &mut [f64],
) -> Result<(), ProblemError> {
    check_index(agent, stream.n, k, stream.trajectory.horizon())?;
    check_len(x, DIM)?;
    check_len(out, DIM)?;
    out.fill(0.0);
    let c = stream.coefficients(agent, k);
    for (row, &r) in c.chunks_exact(DIM).zip(stream.measurements(agent, k)) {
        let residual = (row[0] * x[0] + row[1] * x[1]) - r;
        out[0] += row[0] * residual;
        out[1] += row[1] * residual;
    }
    Ok(())
}

impl DynamicObjective for LeastSquaresStream {
    fn agents(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        DIM
    }

    fn horizon(&self) -> usize {
        self.trajectory.horizon()
    }

    /// Smallest eigenvalue of the network-average Hessian over the horizon.
    /// Each local Hessian has rank at most `rows_per_agent`, so with one row
    /// per agent no individual `f_i^k` is strongly convex.
    fn mu(&self) -> f64 {
        self.mu
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn gradient(&self, agent: usize, k: usize, x: &[f64], out: &mut [f64]) -> Result<(), ProblemError> {
        ls_gradient(self, agent, k, x, out)
    }

    fn value(&self, agent: usize, k: usize, x: &[f64]) -> Result<f64, ProblemError> {
        check_index(agent, self.n, k, self.horizon())?;
        check_len(x, DIM)?;
        let c = self.coefficients(agent, k);
        Ok(c.chunks_exact(DIM)
            .zip(self.measurements(agent, k))
            .map(|(row, &r)| 0.5 * ((row[0] * x[0] + row[1] * x[1]) - r).powi(2))
            .sum())
    }

    fn trajectory(&self) -> &OptimalTrajectory {
        &self.trajectory
    }

    fn analytic_drift(&self) -> Option<AnalyticDrift> {
        let m = self.horizon() as f64;
        Some(AnalyticDrift { delta_x: 2.0 * (3.0 * PI / (4.0 * m)).sin(), grad_bound: 0.0, grad_drift: 0.0 })
    }

    fn scenario(&self) -> &str {
        "I"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn trajectory_starts_on_axis_and_stays_on_circle() {
        let t = ls_trajectory(5000).unwrap();
        assert_eq!(t.points[0], vec![1.0, 0.0]);
        for p in &t.points {
            assert_relative_eq!(p[0].hypot(p[1]), 1.0, epsilon = 1e-15);
        }
        assert_relative_eq!(t.delta_x, 2.0 * (3.0 * PI / 20000.0).sin(), max_relative = 1e-9);
        assert_relative_eq!(t.delta_x, 9.4248e-4, max_relative = 1e-4);
        assert!(ls_trajectory(1).is_err());
    }

    #[test]
    fn gradient_vanishes_at_optimum() {
        let s = LeastSquaresStream::new(7, 1, 50, 3).unwrap();
        let mut g = [0.0; 2];
        for k in 0..=50 {
            for i in 0..7 {
                s.gradient(i, k, s.optimum(k), &mut g).unwrap();
                assert_eq!(g, [0.0, 0.0]);
            }
        }
    }

    #[test]
    fn hand_evaluated_gradient() {
        // A single rank-one row cannot pass the definiteness check, so draw two and zero the second.
        let mut s = LeastSquaresStream::new(1, 2, 2, 0).unwrap();
        s.coeffs[..4].copy_from_slice(&[1.0, 0.0, 0.0, 0.0]);
        s.measurements[..2].fill(0.0);
        let mut g = [0.0; 2];
        ls_gradient(&s, 0, 0, &[2.0, 5.0], &mut g).unwrap();
        assert_eq!(g, [2.0, 0.0]);
    }

    #[test]
    fn constants_bracket_every_step() {
        let s = LeastSquaresStream::new(5, 1, 200, 11).unwrap();
        assert!(s.mu() > 0.0 && s.mu() <= s.lipschitz());
        for k in 0..=200 {
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for i in 0..5 {
                let row = s.coefficients(i, k);
                a += row[0] * row[0] / 5.0;
                b += row[0] * row[1] / 5.0;
                c += row[1] * row[1] / 5.0;
                assert!(row[0] * row[0] + row[1] * row[1] <= s.lipschitz() * (1.0 + 1e-12));
            }
            assert!(sym2_eigen(a, b, c).0 >= s.mu() * (1.0 - 1e-12));
        }
    }

    #[test]
    fn rejects_bad_indices() {
        let s = LeastSquaresStream::new(3, 2, 10, 1).unwrap();
        let mut g = [0.0; 2];
        assert!(matches!(s.gradient(3, 0, &[0.0, 0.0], &mut g), Err(ProblemError::AgentOutOfRange { .. })));
        assert!(matches!(s.gradient(0, 11, &[0.0, 0.0], &mut g), Err(ProblemError::TimeOutOfRange { .. })));
        assert!(s.gradient(0, 0, &[0.0], &mut g).is_err());
    }

    #[test]
    fn text_dump_lists_every_row() {
        let s = LeastSquaresStream::new(2, 2, 3, 9).unwrap();
        let text = s.to_text();
        assert_eq!(text.lines().count(), 1 + 4 * 2 * 2);
        let line = text.lines().nth(1).unwrap();
        let fields: Vec<f64> = line.split_whitespace().map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields[3], s.coefficients(0, 0)[0]);
        assert_eq!(fields[5], s.measurements(0, 0)[0]);
    }

    #[test]
    fn same_seed_same_data() {
        let a = LeastSquaresStream::new(4, 1, 20, 77).unwrap();
        let b = LeastSquaresStream::new(4, 1, 20, 77).unwrap();
        assert_eq!(a.coeffs, b.coeffs);
        let c = LeastSquaresStream::new(4, 1, 20, 78).unwrap();
        assert_ne!(a.coeffs, c.coeffs);
    }
}
