//! Network graphs, doubly stochastic mixing matrices and their spectral gap.

mod graph;
mod spectral;
mod weights;

use thiserror::Error;

pub use graph::{
    build_complete, build_cycle, build_grid, build_line, build_random, Graph, TopologyKind, MAX_RANDOM_ATTEMPTS,
};
pub use spectral::{cycle_uniform_beta, deflated_spectral_radius, spectral_gap, POWER_MAX_ITERS, POWER_TOL};
pub use weights::{metropolis_weights, uniform_neighbor_weights, WeightMatrix, WeightRule, STOCHASTIC_TOL};

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("agent index {agent} out of range for {n} agents")]
    AgentOutOfRange { agent: usize, n: usize },
    #[error("edge probability must lie in (0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("no connected graph after {attempts} attempts at edge probability {edge_probability}")]
    RetriesExhausted { attempts: u32, edge_probability: f64 },
    #[error("graph is not connected")]
    Disconnected,
    #[error("uniform neighbor weights need a regular graph; use metropolis weights for irregular graphs")]
    NotRegular,
    #[error("row {row} has {len} entries, expected {n}")]
    NotSquare { row: usize, len: usize, n: usize },
    #[error("weight ({row}, {col}) = {value} is negative or not finite")]
    NegativeWeight { row: usize, col: usize, value: f64 },
    #[error("{axis} {index} sums to {sum}, not 1")]
    NotStochastic { axis: &'static str, index: usize, sum: f64 },
    #[error("spectral gap requires a symmetric weight matrix")]
    NotSymmetric,
    #[error("power iteration did not converge within {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error("could not reach beta {target} +/- {tolerance}; closest was {best} at edge probability {edge_probability}")]
    CalibrationFailed { target: f64, tolerance: f64, best: f64, edge_probability: f64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// A random graph whose Metropolis weights hit a requested β.
#[derive(Debug, Clone)]
pub struct Calibration {
    pub edge_probability: f64,
    pub graph: Graph,
    pub weights: WeightMatrix,
}

impl Calibration {
    pub fn beta(&self) -> f64 {
        self.weights.beta()
    }
}

const CALIBRATION_STEPS: usize = 40;

/// Bisects the edge probability of [`build_random`] until the Metropolis β lies
/// within `tolerance` of `target_beta`. β falls as the probability grows.
pub fn calibrate_beta(n: usize, target_beta: f64, tolerance: f64, seed: u64) -> Result<Calibration, TopologyError> {
    if !(0.0..1.0).contains(&target_beta) {
        return Err(TopologyError::InvalidSize(format!("target beta {target_beta} outside [0, 1)")));
    }
    let attempt = |p: f64| -> Result<Option<Calibration>, TopologyError> {
        match build_random(n, p, seed) {
            Ok(graph) => {
                let weights = metropolis_weights(&graph)?;
                Ok(Some(Calibration { edge_probability: p, graph, weights }))
            }
            Err(TopologyError::RetriesExhausted { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };

    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut best: Option<Calibration> = None;
    for _ in 0..CALIBRATION_STEPS {
        let p = 0.5 * (lo + hi);
        match attempt(p)? {
            None => lo = p,
            Some(cal) => {
                let beta = cal.beta();
                log::debug!("calibrate_beta: p = {p:.6}, beta = {beta:.6}");
                if beta > target_beta {
                    lo = p;
                } else {
                    hi = p;
                }
                let closer = best.as_ref().is_none_or(|b| (b.beta() - target_beta).abs() > (beta - target_beta).abs());
                if closer {
                    best = Some(cal);
                }
                if (beta - target_beta).abs() <= 0.25 * tolerance {
                    break;
                }
            }
        }
    }
    match best {
        Some(cal) if (cal.beta() - target_beta).abs() <= tolerance => {
            log::info!(
                "calibrated random graph: n = {n}, edge probability = {:.6}, beta = {:.6} (target {target_beta})",
                cal.edge_probability,
                cal.beta()
            );
            Ok(cal)
        }
        Some(cal) => Err(TopologyError::CalibrationFailed {
            target: target_beta,
            tolerance,
            best: cal.beta(),
            edge_probability: cal.edge_probability,
        }),
        None => Err(TopologyError::CalibrationFailed {
            target: target_beta,
            tolerance,
            best: f64::NAN,
            edge_probability: f64::NAN,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calibration_hits_target() {
        let cal = calibrate_beta(120, 0.85, 0.02, 4).unwrap();
        assert!((cal.beta() - 0.85).abs() <= 0.02);
        let again = calibrate_beta(120, 0.85, 0.02, 4).unwrap();
        assert_eq!(cal.graph.edges(), again.graph.edges());
    }
}
