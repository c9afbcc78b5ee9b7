//! Second-largest eigenvalue magnitude of a doubly stochastic matrix.
//!
//! `β = |λ₂(W)|` is the spectral radius of the deflated matrix `W − 𝟙𝟙ᵀ/n`.
//! Power iteration runs on the square of the deflation so that a pair of
//! eigenvalues `±β` cannot make the iterate oscillate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::weights::{WeightMatrix, WeightRule};
use super::TopologyError;

pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITERS: usize = 100_000;
const START_SEED: u64 = 0x5EED_0B7A;

/// Closed form for uniform weights on an `n`-cycle:
/// `max_{j≥1} |(1 + 2 cos(2πj/n)) / 3|`.
pub fn cycle_uniform_beta(n: usize) -> f64 {
    (1..n)
        .map(|j| {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            ((1.0 + 2.0 * theta.cos()) / 3.0).abs()
        })
        .fold(0.0, f64::max)
}

/// β with the circulant shortcut for uniform cycles, power iteration otherwise.
pub fn spectral_gap(w: &WeightMatrix) -> Result<f64, TopologyError> {
    match w.rule() {
        WeightRule::UniformCycle => Ok(cycle_uniform_beta(w.agents())),
        _ => deflated_spectral_radius(w, POWER_TOL, POWER_MAX_ITERS),
    }
}

fn project_out_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Power iteration on `(W − 𝟙𝟙ᵀ/n)²` for symmetric `W`.
///
/// Stops once the residual `‖M²v − rv‖` falls below `tol`, where `r` is the
/// Rayleigh quotient; returns `√r`.
pub fn deflated_spectral_radius(w: &WeightMatrix, tol: f64, max_iters: usize) -> Result<f64, TopologyError> {
    let n = w.agents();
    if n == 1 {
        return Ok(0.0);
    }
    if !w.is_symmetric(1e-12) {
        return Err(TopologyError::NotSymmetric);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    project_out_mean(&mut v);
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut u = vec![0.0; n];
    let mut m2v = vec![0.0; n];
    for _ in 0..max_iters {
        w.mix(&v, 1, &mut u);
        project_out_mean(&mut u);
        w.mix(&u, 1, &mut m2v);
        project_out_mean(&mut m2v);
        let r = u.iter().map(|x| x * x).sum::<f64>();
        let scale = norm(&m2v);
        if scale == 0.0 {
            return Ok(0.0);
        }
        let residual = m2v.iter().zip(&v).map(|(a, b)| (a - r * b).powi(2)).sum::<f64>().sqrt();
        if residual <= tol {
            return Ok(r.sqrt());
        }
        for (vi, mi) in v.iter_mut().zip(&m2v) {
            *vi = mi / scale;
        }
    }
    Err(TopologyError::NotConverged { iterations: max_iters })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_complete, build_cycle, build_grid, metropolis_weights, uniform_neighbor_weights};
    use approx::assert_abs_diff_eq;

    #[test]
    fn closed_form_cycle_hundred() {
        let expected = (1.0 + 2.0 * (2.0 * std::f64::consts::PI / 100.0).cos()) / 3.0;
        assert_abs_diff_eq!(cycle_uniform_beta(100), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(cycle_uniform_beta(100), 0.99868, epsilon = 1e-5);
        // Triangle is the complete graph on three agents.
        assert_abs_diff_eq!(cycle_uniform_beta(3), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn power_iteration_agrees_with_circulant_formula() {
        for n in [4, 5, 9, 30, 100] {
            let w = uniform_neighbor_weights(&build_cycle(n).unwrap()).unwrap();
            let beta = deflated_spectral_radius(&w, POWER_TOL, POWER_MAX_ITERS).unwrap();
            assert_abs_diff_eq!(beta, cycle_uniform_beta(n), epsilon = 1e-9);
        }
    }

    #[test]
    fn averaging_matrix_has_zero_gap() {
        let w = uniform_neighbor_weights(&build_complete(7).unwrap()).unwrap();
        assert!(spectral_gap(&w).unwrap() < 1e-12);
    }

    #[test]
    fn identity_has_unit_gap() {
        let id: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| f64::from(u8::from(i == j))).collect()).collect();
        let w = WeightMatrix::from_dense(&id).unwrap();
        assert_abs_diff_eq!(spectral_gap(&w).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn reports_non_convergence() {
        let w = metropolis_weights(&build_grid(6, 7).unwrap()).unwrap();
        let err = deflated_spectral_radius(&w, 1e-14, 3).unwrap_err();
        assert!(matches!(err, TopologyError::NotConverged { iterations: 3 }));
    }
}
