//! One-step update engines on stacked agent states.
//!
//! Every stack is a dense vector of `n` blocks of length `d`. Mixing goes
//! through [`WeightMatrix::mix`], which only visits the sparse neighbor rows,
//! so an agent never reads state from outside `N_i`.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::problems::{drift_profile, DriftProfile, DynamicObjective, ProblemError};
use crate::record::{RecordRow, RunMeta, TrajectoryRecord};
use crate::topology::WeightMatrix;

/// Iterates beyond this magnitude count as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e150;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AlgorithmId {
    Diffusion,
    Dgt,
    Extra,
    ExactDiffusion,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 4] = [Self::Diffusion, Self::Dgt, Self::Extra, Self::ExactDiffusion];

    pub fn name(self) -> &'static str {
        match self {
            Self::Diffusion => "diffusion",
            Self::Dgt => "dgt",
            Self::Extra => "extra",
            Self::ExactDiffusion => "exact_diffusion",
        }
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmId {
    type Err = AlgorithmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "diffusion" => Ok(Self::Diffusion),
            "dgt" | "gradient_tracking" => Ok(Self::Dgt),
            "extra" => Ok(Self::Extra),
            "exact_diffusion" | "ed" | "e_diffusion" => Ok(Self::ExactDiffusion),
            _ => Err(AlgorithmError::UnknownAlgorithm(s.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum AlgorithmError {
    #[error("unknown algorithm {0:?}")]
    UnknownAlgorithm(String),
    #[error("{what}: expected length {expected}, got {got}")]
    Shape { what: &'static str, expected: usize, got: usize },
    #[error("state is missing its {0} stack")]
    MissingAuxiliary(&'static str),
    #[error("{0}")]
    Sequencing(String),
    #[error("step size must be positive and finite, got {0}")]
    InvalidStepSize(f64),
    #[error("run horizon {requested} exceeds the objective horizon {available}")]
    HorizonTooLong { requested: usize, available: usize },
    #[error("iterates diverged at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("step {iteration} failed: {source}")]
    StepFailed {
        iteration: usize,
        #[source]
        source: Box<AlgorithmError>,
    },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Stacked iterates plus whatever history the algorithm needs.
///
/// `k` is the time of the function the iterate `x` is measured against.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmState {
    pub x: Vec<f64>,
    /// DGT tracker `y^k`.
    pub y: Option<Vec<f64>>,
    /// DGT: `∇F^k(x^k)`. EXTRA and exact diffusion: `∇F^k(x^{k−1})`.
    pub prev_grad: Option<Vec<f64>>,
    /// EXTRA and exact diffusion: `x^{k−1}`.
    pub prev_x: Option<Vec<f64>>,
    pub k: usize,
    dim: usize,
}

impl AlgorithmState {
    /// Plain iterate with no history, as used by diffusion and by EXTRA or
    /// exact diffusion before their bootstrap step.
    pub fn new(x0: Vec<f64>, dim: usize) -> Self {
        Self { x: x0, y: None, prev_grad: None, prev_x: None, k: 0, dim }
    }

    /// DGT start: `y^0 = ∇F^0(x^0)`.
    pub fn new_dgt<O: DynamicObjective + ?Sized>(objective: &O, x0: Vec<f64>) -> Result<Self, AlgorithmError> {
        check_shape("x0", &x0, objective.agents() * objective.dim())?;
        let mut g = vec![0.0; x0.len()];
        objective.stacked_gradient(0, &x0, &mut g)?;
        Ok(Self { x: x0, y: Some(g.clone()), prev_grad: Some(g), prev_x: None, k: 0, dim: objective.dim() })
    }

    pub fn init<O: DynamicObjective + ?Sized>(id: AlgorithmId, objective: &O, x0: Vec<f64>) -> Result<Self, AlgorithmError> {
        match id {
            AlgorithmId::Dgt => Self::new_dgt(objective, x0),
            _ => {
                check_shape("x0", &x0, objective.agents() * objective.dim())?;
                Ok(Self::new(x0, objective.dim()))
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn agents(&self) -> usize {
        self.x.len() / self.dim
    }

    /// Network average of a stack.
    pub fn average(stack: &[f64], dim: usize) -> Vec<f64> {
        let n = stack.len() / dim;
        let mut avg = vec![0.0; dim];
        for block in stack.chunks_exact(dim) {
            for (a, v) in avg.iter_mut().zip(block) {
                *a += v;
            }
        }
        avg.iter_mut().for_each(|a| *a /= n as f64);
        avg
    }

    /// `‖ȳ − (1/n) Σ_i ∇f_i^k(x_i^k)‖` for a DGT state.
    pub fn tracking_residual(&self) -> Option<f64> {
        let y = Self::average(self.y.as_ref()?, self.dim);
        let g = Self::average(self.prev_grad.as_ref()?, self.dim);
        Some(y.iter().zip(&g).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
    }

    fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite() && v.abs() <= DIVERGENCE_LIMIT)
            && self.y.as_ref().is_none_or(|y| y.iter().all(|v| v.is_finite() && v.abs() <= DIVERGENCE_LIMIT))
    }
}

fn check_shape(what: &'static str, v: &[f64], expected: usize) -> Result<(), AlgorithmError> {
    if v.len() != expected {
        return Err(AlgorithmError::Shape { what, expected, got: v.len() });
    }
    Ok(())
}

fn check_common<O: DynamicObjective + ?Sized>(
    state: &AlgorithmState,
    objective: &O,
    w: &WeightMatrix,
    alpha: f64,
) -> Result<(), AlgorithmError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(AlgorithmError::InvalidStepSize(alpha));
    }
    let n = objective.agents();
    if w.agents() != n {
        return Err(AlgorithmError::Shape { what: "weight matrix", expected: n, got: w.agents() });
    }
    if state.dim != objective.dim() {
        return Err(AlgorithmError::Shape { what: "state dimension", expected: objective.dim(), got: state.dim });
    }
    check_shape("x", &state.x, n * objective.dim())
}

/// `W̄v = (v + Wv)/2`.
fn mix_half(w: &WeightMatrix, v: &[f64], dim: usize, out: &mut [f64]) {
    w.mix(v, dim, out);
    for (o, s) in out.iter_mut().zip(v) {
        *o = 0.5 * (*o + s);
    }
}

/// `x_i^{k+1} = Σ_j W_ij (x_j^k − α ∇f_j^{k+1}(x_j^k))`.
pub fn diffusion_step<O: DynamicObjective + ?Sized>(
    state: &AlgorithmState,
    objective: &O,
    w: &WeightMatrix,
    alpha: f64,
) -> Result<AlgorithmState, AlgorithmError> {
    check_common(state, objective, w, alpha)?;
    let mut phi = vec![0.0; state.x.len()];
    objective.stacked_gradient(state.k + 1, &state.x, &mut phi)?;
    for (p, x) in phi.iter_mut().zip(&state.x) {
        *p = x - alpha * *p;
    }
    let mut next = vec![0.0; phi.len()];
    w.mix(&phi, state.dim, &mut next);
    Ok(AlgorithmState { x: next, k: state.k + 1, ..state.clone() })
}

/// `x^{k+1} = W(x^k − α y^k)`, then
/// `y^{k+1} = W y^k + ∇F^{k+1}(x^{k+1}) − ∇F^k(x^k)`.
pub fn dgt_step<O: DynamicObjective + ?Sized>(
    state: &AlgorithmState,
    objective: &O,
    w: &WeightMatrix,
    alpha: f64,
) -> Result<AlgorithmState, AlgorithmError> {
    check_common(state, objective, w, alpha)?;
    let y = state.y.as_ref().ok_or(AlgorithmError::MissingAuxiliary("y"))?;
    let g_old = state.prev_grad.as_ref().ok_or(AlgorithmError::MissingAuxiliary("previous gradient"))?;
    check_shape("y", y, state.x.len())?;
    check_shape("previous gradient", g_old, state.x.len())?;
    let d = state.dim;

    let shifted: Vec<f64> = state.x.iter().zip(y).map(|(x, y)| x - alpha * y).collect();
    let mut x_next = vec![0.0; shifted.len()];
    w.mix(&shifted, d, &mut x_next);

    let mut g_new = vec![0.0; x_next.len()];
    objective.stacked_gradient(state.k + 1, &x_next, &mut g_new)?;
    let mut y_next = vec![0.0; y.len()];
    w.mix(y, d, &mut y_next);
    for ((yn, gn), go) in y_next.iter_mut().zip(&g_new).zip(g_old) {
        *yn += gn - go;
    }
    Ok(AlgorithmState { x: x_next, y: Some(y_next), prev_grad: Some(g_new), prev_x: None, k: state.k + 1, dim: d })
}

fn require_fresh(state: &AlgorithmState, name: &str) -> Result<(), AlgorithmError> {
    if state.k != 0 || state.prev_x.is_some() {
        return Err(AlgorithmError::Sequencing(format!("{name} bootstrap only applies at k = 0 with no history")));
    }
    Ok(())
}

fn require_history<'s>(state: &'s AlgorithmState, name: &str) -> Result<(&'s [f64], &'s [f64]), AlgorithmError> {
    match (&state.prev_x, &state.prev_grad) {
        (Some(px), Some(pg)) => {
            check_shape("previous iterate", px, state.x.len())?;
            check_shape("previous gradient", pg, state.x.len())?;
            Ok((px, pg))
        }
        _ => Err(AlgorithmError::Sequencing(format!(
            "{name} step at k = {} needs the previous iterate; run the bootstrap step first",
            state.k
        ))),
    }
}

/// First EXTRA step: `x^1 = W x^0 − α ∇F^1(x^0)`.
pub fn extra_bootstrap<O: DynamicObjective + ?Sized>(
    state: &AlgorithmState,
    objective: &O,
    w: &WeightMatrix,
    alpha: f64,
) -> Result<AlgorithmState, AlgorithmError> {
    check_common(state, objective, w, alpha)?;
    require_fresh(state, "EXTRA")?;
    let mut g = vec![0.0; state.x.len()];
    objective.stacked_gradient(1, &state.x, &mut g)?;
    let mut next = vec![0.0; g.len()];
    w.mix(&state.x, state.dim, &mut next);
    for (n, gi) in next.iter_mut().zip(&g) {
        *n -= alpha * gi;
    }
    Ok(AlgorithmState { x: next, y: None, prev_grad: Some(g), prev_x: Some(state.x.clone()), k: 1, dim: state.dim })
}

/// `x^{k+1} = x^k + W x^k − W̄ x^{k−1} − α(∇F^{k+1}(x^k) − ∇F^k(x^{k−1}))`, `W̄ = (I+W)/2`.
pub fn extra_step<O: DynamicObjective + ?Sized>(
    state: &AlgorithmState,
    objective: &O,
    w: &WeightMatrix,
    alpha: f64,
) -> Result<AlgorithmState, AlgorithmError> {
    check_common(state, objective, w, alpha)?;
    let (px, pg) = require_history(state, "EXTRA")?;
    let d = state.dim;
    let mut g = vec![0.0; state.x.len()];
    objective.stacked_gradient(state.k + 1, &state.x, &mut g)?;
    let mut wx = vec![0.0; g.len()];
    w.mix(&state.x, d, &mut wx);
    let mut wbar_px = vec![0.0; g.len()];
    mix_half(w, px, d, &mut wbar_px);
    let next: Vec<f64> = (0..g.len())
        .map(|j| state.x[j] + wx[j] - wbar_px[j] - alpha * (g[j] - pg[j]))
        .collect();
    Ok(AlgorithmState { x: next, y: None, prev_grad: Some(g), prev_x: Some(state.x.clone()), k: state.k + 1, dim: d })
}

/// First exact-diffusion step with `ψ^0 = x^0`: `x^1 = W̄(x^0 − α ∇F^1(x^0))`.
pub fn exact_diffusion_bootstrap<O: DynamicObjective + ?Sized>(
    state: &AlgorithmState,
    objective: &O,
    w: &WeightMatrix,
    alpha: f64,
) -> Result<AlgorithmState, AlgorithmError> {
    check_common(state, objective, w, alpha)?;
    require_fresh(state, "exact diffusion")?;
    let mut g = vec![0.0; state.x.len()];
    objective.stacked_gradient(1, &state.x, &mut g)?;
    let psi: Vec<f64> = state.x.iter().zip(&g).map(|(x, g)| x - alpha * g).collect();
    let mut next = vec![0.0; psi.len()];
    mix_half(w, &psi, state.dim, &mut next);
    Ok(AlgorithmState { x: next, y: None, prev_grad: Some(g), prev_x: Some(state.x.clone()), k: 1, dim: state.dim })
}

/// Adapt `ψ^{k+1} = x^k − α∇F^{k+1}(x^k)`, correct `φ = ψ^{k+1} + x^k − ψ^k`,
/// combine `x^{k+1} = W̄ φ`.
pub fn exact_diffusion_step<O: DynamicObjective + ?Sized>(
    state: &AlgorithmState,
    objective: &O,
    w: &WeightMatrix,
    alpha: f64,
) -> Result<AlgorithmState, AlgorithmError> {
    check_common(state, objective, w, alpha)?;
    let (px, pg) = require_history(state, "exact diffusion")?;
    let mut g = vec![0.0; state.x.len()];
    objective.stacked_gradient(state.k + 1, &state.x, &mut g)?;
    let phi: Vec<f64> = (0..g.len())
        .map(|j| {
            let psi_new = state.x[j] - alpha * g[j];
            let psi_old = px[j] - alpha * pg[j];
            psi_new + state.x[j] - psi_old
        })
        .collect();
    let mut next = vec![0.0; phi.len()];
    mix_half(w, &phi, state.dim, &mut next);
    Ok(AlgorithmState {
        x: next,
        y: None,
        prev_grad: Some(g),
        prev_x: Some(state.x.clone()),
        k: state.k + 1,
        dim: state.dim,
    })
}

/// Dispatches one step, running the EXTRA or exact-diffusion bootstrap when
/// the state has no history yet.
pub fn step<O: DynamicObjective + ?Sized>(
    id: AlgorithmId,
    state: &AlgorithmState,
    objective: &O,
    w: &WeightMatrix,
    alpha: f64,
) -> Result<AlgorithmState, AlgorithmError> {
    let fresh = state.k == 0 && state.prev_x.is_none();
    match id {
        AlgorithmId::Diffusion => diffusion_step(state, objective, w, alpha),
        AlgorithmId::Dgt => dgt_step(state, objective, w, alpha),
        AlgorithmId::Extra if fresh => extra_bootstrap(state, objective, w, alpha),
        AlgorithmId::Extra => extra_step(state, objective, w, alpha),
        AlgorithmId::ExactDiffusion if fresh => exact_diffusion_bootstrap(state, objective, w, alpha),
        AlgorithmId::ExactDiffusion => exact_diffusion_step(state, objective, w, alpha),
    }
}

/// Starting point `x^0` for every agent.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialIterate {
    #[default]
    Zero,
    /// Every agent starts at `x̃^{0*}`.
    Optimum,
    /// A full stack supplied by the caller.
    Explicit(Vec<f64>),
    /// Independent standard normal entries.
    Gaussian { seed: u64 },
}

impl InitialIterate {
    pub fn materialize<O: DynamicObjective + ?Sized>(&self, objective: &O) -> Result<Vec<f64>, AlgorithmError> {
        let n = objective.agents();
        let d = objective.dim();
        Ok(match self {
            Self::Zero => vec![0.0; n * d],
            Self::Optimum => objective.optimum(0).repeat(n),
            Self::Explicit(v) => {
                check_shape("initial iterate", v, n * d)?;
                v.clone()
            }
            Self::Gaussian { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..n * d).map(|_| StandardNormal.sample(&mut rng)).collect()
            }
        })
    }
}

/// Stepwise driver that owns the evolving state.
pub struct Runner<'a, O: DynamicObjective + ?Sized> {
    id: AlgorithmId,
    objective: &'a O,
    weights: &'a WeightMatrix,
    alpha: f64,
    state: AlgorithmState,
}

impl<'a, O: DynamicObjective + ?Sized> Runner<'a, O> {
    pub fn new(
        id: AlgorithmId,
        objective: &'a O,
        weights: &'a WeightMatrix,
        alpha: f64,
        x0: Vec<f64>,
    ) -> Result<Self, AlgorithmError> {
        let state = AlgorithmState::init(id, objective, x0)?;
        check_common(&state, objective, weights, alpha)?;
        Ok(Self { id, objective, weights, alpha, state })
    }

    pub fn state(&self) -> &AlgorithmState {
        &self.state
    }

    /// Moves from `k` to `k + 1`. Errors carry the iteration being computed.
    pub fn advance(&mut self) -> Result<(), AlgorithmError> {
        let iteration = self.state.k + 1;
        let next = step(self.id, &self.state, self.objective, self.weights, self.alpha)
            .map_err(|e| AlgorithmError::StepFailed { iteration, source: Box::new(e) })?;
        if !next.is_finite() {
            return Err(AlgorithmError::Diverged { iteration });
        }
        self.state = next;
        Ok(())
    }

    /// Per-iteration metrics of the current state.
    pub fn metrics(&self) -> RecordRow {
        state_metrics(&self.state, self.objective)
    }
}

/// Tracking error, consensus deviation, average error and tracker deviation at time `state.k`.
pub fn state_metrics<O: DynamicObjective + ?Sized>(state: &AlgorithmState, objective: &O) -> RecordRow {
    let d = state.dim;
    let n = state.agents() as f64;
    let opt = objective.optimum(state.k);
    let opt_sq: f64 = opt.iter().map(|v| v * v).sum();
    let mean = AlgorithmState::average(&state.x, d);

    let mut to_opt = 0.0;
    let mut spread = 0.0;
    for block in state.x.chunks_exact(d) {
        for l in 0..d {
            to_opt += (block[l] - opt[l]).powi(2);
            spread += (block[l] - mean[l]).powi(2);
        }
    }
    let avg_err: f64 = mean.iter().zip(opt).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let y_dev = state.y.as_ref().map(|y| {
        let ybar = AlgorithmState::average(y, d);
        let dev: f64 = y.chunks_exact(d).flat_map(|b| b.iter().zip(&ybar).map(|(v, m)| (v - m).powi(2))).sum();
        (dev / n).sqrt()
    });
    RecordRow {
        k: state.k,
        tracking_error: (to_opt / n).sqrt() / opt_sq,
        consensus_dev: (spread / n).sqrt(),
        avg_error: avg_err,
        y_dev,
    }
}

/// Runs `horizon` steps and records `horizon + 1` rows. Drift constants for the
/// metadata are measured over the whole objective horizon.
#[allow(clippy::too_many_arguments)]
pub fn run<O: DynamicObjective + ?Sized>(
    id: AlgorithmId,
    objective: &O,
    w: &WeightMatrix,
    alpha: f64,
    horizon: usize,
    init: &InitialIterate,
    seed: u64,
) -> Result<TrajectoryRecord, AlgorithmError> {
    let drift = drift_profile(objective)?;
    run_with_drift(id, objective, w, alpha, horizon, init, seed, &drift)
}

/// [`run`] with precomputed drift constants, for sweeps over many step sizes.
#[allow(clippy::too_many_arguments)]
pub fn run_with_drift<O: DynamicObjective + ?Sized>(
    id: AlgorithmId,
    objective: &O,
    w: &WeightMatrix,
    alpha: f64,
    horizon: usize,
    init: &InitialIterate,
    seed: u64,
    drift: &DriftProfile,
) -> Result<TrajectoryRecord, AlgorithmError> {
    if horizon > objective.horizon() {
        return Err(AlgorithmError::HorizonTooLong { requested: horizon, available: objective.horizon() });
    }
    let x0 = init.materialize(objective)?;
    let mut runner = Runner::new(id, objective, w, alpha, x0)?;
    let mut rows = Vec::with_capacity(horizon + 1);
    rows.push(runner.metrics());
    for _ in 0..horizon {
        runner.advance()?;
        rows.push(runner.metrics());
    }
    let opt = objective.optimum(0);
    let meta = RunMeta {
        algorithm: id,
        alpha,
        beta: w.beta(),
        n: objective.agents(),
        d: objective.dim(),
        mu: objective.mu(),
        lipschitz: objective.lipschitz(),
        delta_x: drift.delta_x,
        grad_bound: drift.grad_bound,
        grad_drift: drift.grad_drift,
        scenario: objective.scenario().to_string(),
        seed,
        x_norm_sq: opt.iter().map(|v| v * v).sum(),
    };
    Ok(TrajectoryRecord { meta, rows })
}
