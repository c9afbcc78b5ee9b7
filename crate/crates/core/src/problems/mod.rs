//! Time-varying objective families and their drift constants.

mod consensus;
mod drift;
mod least_squares;

use thiserror::Error;

pub use consensus::{consensus_gradient, ShiftingConsensus};
pub use drift::{drift_profile, AnalyticDrift, DriftProfile, OptimalTrajectory};
pub use least_squares::{ls_gradient, ls_trajectory, LeastSquaresStream, MAX_RESAMPLES};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("agent {agent} out of range for {n} agents")]
    AgentOutOfRange { agent: usize, n: usize },
    #[error("time {k} outside horizon 0..={horizon}")]
    TimeOutOfRange { k: usize, horizon: usize },
    #[error("expected a vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("aggregate Hessian at time {k} stayed singular after {attempts} draws")]
    SingularHessian { k: usize, attempts: u32 },
}

/// A family `{f_i^k}` of strongly convex local objectives indexed by agent and time.
///
/// Times run over `0..=horizon()`; an algorithm taking `M` steps observes
/// `f^1, …, f^M` after starting from data at `f^0`.
pub trait DynamicObjective: Sync {
    fn agents(&self) -> usize;
    fn dim(&self) -> usize;
    fn horizon(&self) -> usize;
    fn mu(&self) -> f64;
    fn lipschitz(&self) -> f64;

    /// Writes `∇f_i^k(x)` into `out`.
    fn gradient(&self, agent: usize, k: usize, x: &[f64], out: &mut [f64]) -> Result<(), ProblemError>;

    fn value(&self, agent: usize, k: usize, x: &[f64]) -> Result<f64, ProblemError>;

    fn trajectory(&self) -> &OptimalTrajectory;

    /// Minimizer `x̃^{k*}` of `Σ_i f_i^k`.
    fn optimum(&self, k: usize) -> &[f64] {
        &self.trajectory().points[k]
    }

    /// Closed-form `(Δx, D, Δg)` when the family has one.
    fn analytic_drift(&self) -> Option<AnalyticDrift> {
        None
    }

    /// Short label written to run metadata.
    fn scenario(&self) -> &str;

    /// Gradients of every agent at its own block of `x_stack`.
    fn stacked_gradient(&self, k: usize, x_stack: &[f64], out: &mut [f64]) -> Result<(), ProblemError> {
        let d = self.dim();
        let expected = self.agents() * d;
        if x_stack.len() != expected || out.len() != expected {
            return Err(ProblemError::DimensionMismatch { expected, got: x_stack.len().min(out.len()) });
        }
        for (i, (x, g)) in x_stack.chunks_exact(d).zip(out.chunks_exact_mut(d)).enumerate() {
            self.gradient(i, k, x, g)?;
        }
        Ok(())
    }
}

pub(crate) fn check_index(agent: usize, n: usize, k: usize, horizon: usize) -> Result<(), ProblemError> {
    if agent >= n {
        return Err(ProblemError::AgentOutOfRange { agent, n });
    }
    if k > horizon {
        return Err(ProblemError::TimeOutOfRange { k, horizon });
    }
    Ok(())
}

pub(crate) fn check_len(x: &[f64], d: usize) -> Result<(), ProblemError> {
    if x.len() != d {
        return Err(ProblemError::DimensionMismatch { expected: d, got: x.len() });
    }
    Ok(())
}
