//! Config-driven experiments: build a network and a problem, tune each
//! algorithm's step size, rerun at the tuned value, and persist the results.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

pub use config::{log_space, ExperimentConfig, Scenario, StepGrid, TopologySpec, WeightChoice, PAPER_SCALE_P};

use crate::algorithms::{run_with_drift, AlgorithmError, AlgorithmId, InitialIterate};
use crate::analysis::theory_bound;
use crate::problems::{drift_profile, DriftProfile, DynamicObjective, LeastSquaresStream, ProblemError, ShiftingConsensus};
use crate::record::{RecordError, TrajectoryRecord};
use crate::topology::{
    build_complete, build_cycle, build_grid, build_line, build_random, calibrate_beta, metropolis_weights,
    uniform_neighbor_weights, Graph, TopologyError, WeightMatrix,
};

/// Environment variable naming the directory relative output paths live under.
pub const OUTPUT_ROOT_ENV: &str = "DYNTRACK_OUTPUT_ROOT";
pub const SUMMARY_HEADER: &str = "algorithm,alpha,beta,n,steady_state_error,theory_bound";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("run diverged: first non-finite tracking error at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("tail window is empty")]
    EmptyTail,
    #[error("every step size diverged for {algorithm}; grid was {grid:?}")]
    TuningFailed { algorithm: AlgorithmId, grid: Vec<f64> },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Algorithm(#[from] AlgorithmError),
    #[error(transparent)]
    Record(#[from] RecordError),
}

fn tail_window(series: &[f64], tail_fraction: f64) -> Result<&[f64], ExperimentError> {
    if let Some(bad) = series.iter().position(|v| !v.is_finite()) {
        return Err(ExperimentError::Diverged { iteration: bad });
    }
    let horizon = series.len().saturating_sub(1);
    let len = ((tail_fraction * horizon as f64).ceil() as usize).min(series.len());
    if len == 0 {
        return Err(ExperimentError::EmptyTail);
    }
    Ok(&series[series.len() - len..])
}

/// Mean of the last `⌈tail_fraction·M⌉` entries of a series indexed `k = 0..=M`.
pub fn steady_state_error(series: &[f64], tail_fraction: f64) -> Result<f64, ExperimentError> {
    let tail = tail_window(series, tail_fraction)?;
    Ok(tail.iter().sum::<f64>() / tail.len() as f64)
}

/// Largest entry of the same tail window; shows oscillating plateaus.
pub fn tail_max(series: &[f64], tail_fraction: f64) -> Result<f64, ExperimentError> {
    Ok(tail_window(series, tail_fraction)?.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Everything a run needs besides the algorithm and step size.
pub struct Setup {
    pub objective: Box<dyn DynamicObjective>,
    pub graph: Graph,
    pub weights: WeightMatrix,
    pub drift: DriftProfile,
    pub horizon: usize,
    pub init: InitialIterate,
    pub seed: u64,
}

fn build_graph(config: &ExperimentConfig, n: usize) -> Result<(Graph, Option<WeightMatrix>), ExperimentError> {
    Ok(match config.topology {
        TopologySpec::Cycle => (build_cycle(n)?, None),
        TopologySpec::Line => (build_line(n)?, None),
        TopologySpec::Grid { rows, cols } => (build_grid(rows, cols)?, None),
        TopologySpec::Complete => (build_complete(n)?, None),
        TopologySpec::Random { edge_probability } => (build_random(n, edge_probability, config.seed)?, None),
        TopologySpec::RandomBeta { target_beta, tolerance } => {
            let cal = calibrate_beta(n, target_beta, tolerance, config.seed)?;
            (cal.graph, Some(cal.weights))
        }
    })
}

fn build_weights(graph: &Graph, choice: WeightChoice) -> Result<WeightMatrix, TopologyError> {
    match choice {
        WeightChoice::Uniform => uniform_neighbor_weights(graph),
        WeightChoice::Metropolis => metropolis_weights(graph),
        WeightChoice::Auto if graph.is_regular() => uniform_neighbor_weights(graph),
        WeightChoice::Auto => metropolis_weights(graph),
    }
}

impl Setup {
    pub fn from_config(config: &ExperimentConfig) -> Result<Self, ExperimentError> {
        config.validate()?;
        let n = config.agents()?;
        let (graph, calibrated) = build_graph(config, n)?;
        let weights = match (calibrated, config.weights) {
            (Some(w), WeightChoice::Auto | WeightChoice::Metropolis) => w,
            _ => build_weights(&graph, config.weights)?,
        };
        log::info!("network: {n} agents, {} edges, beta = {:.6}", graph.edges().len(), weights.beta());
        let m = config.horizon;
        let objective: Box<dyn DynamicObjective> = match config.scenario {
            Scenario::LeastSquares => Box::new(LeastSquaresStream::new(n, config.rows_per_agent, m, config.seed)?),
            Scenario::ShiftHalf => Box::new(ShiftingConsensus::scenario_ii(config.p, config.spacing_m, m)?),
            Scenario::ShiftOne => Box::new(ShiftingConsensus::scenario_iii(config.p, config.spacing_m, m)?),
            Scenario::Static => Box::new(ShiftingConsensus::static_targets(config.p, config.spacing_m, m)?),
        };
        Self::new(objective, graph, weights, m, config.init.clone(), config.seed)
    }

    pub fn new(
        objective: Box<dyn DynamicObjective>,
        graph: Graph,
        weights: WeightMatrix,
        horizon: usize,
        init: InitialIterate,
        seed: u64,
    ) -> Result<Self, ExperimentError> {
        let drift = drift_profile(objective.as_ref())?;
        log::info!(
            "scenario {}: mu = {:.6e}, L = {:.6e}, delta_x = {:.6e}, D = {:.6e}, delta_g = {:.6e}",
            objective.scenario(),
            objective.mu(),
            objective.lipschitz(),
            drift.delta_x,
            drift.grad_bound,
            drift.grad_drift
        );
        let x_norm_sq: f64 = objective.optimum(0).iter().map(|v| v * v).sum();
        log::info!(
            "tracking errors and bounds are divided by the squared optimum norm {x_norm_sq:.6e}, not the norm itself"
        );
        Ok(Self { objective, graph, weights, drift, horizon, init, seed })
    }

    pub fn run(&self, id: AlgorithmId, alpha: f64) -> Result<TrajectoryRecord, AlgorithmError> {
        run_with_drift(id, self.objective.as_ref(), &self.weights, alpha, self.horizon, &self.init, self.seed, &self.drift)
    }

    /// Theorem bound for a run, normalized like the tracking error; `None` outside the regime.
    pub fn normalized_bound(&self, record: &TrajectoryRecord) -> Option<f64> {
        let m = &record.meta;
        theory_bound(m.algorithm, m.alpha, m.mu, m.lipschitz, m.beta, m.delta_x, m.grad_bound, m.grad_drift)
            .map(|b| b / m.x_norm_sq)
    }
}

/// Tuned step size with its run and score.
#[derive(Debug, Clone)]
pub struct Tuned {
    pub alpha: f64,
    pub steady_state_error: f64,
    pub record: TrajectoryRecord,
    /// `(α, score)` for every grid point; divergent runs score `+∞`.
    pub scores: Vec<(f64, f64)>,
}

/// Runs every grid value in parallel and keeps the smallest steady-state
/// error, breaking ties toward the larger step.
pub fn tune_stepsize(setup: &Setup, id: AlgorithmId, grid: &[f64], tail_fraction: f64) -> Result<Tuned, ExperimentError> {
    if grid.is_empty() {
        return Err(ExperimentError::InvalidConfig("empty step-size grid".into()));
    }
    let runs: Vec<(f64, Option<TrajectoryRecord>, f64)> = grid
        .par_iter()
        .map(|&alpha| match setup.run(id, alpha) {
            Ok(rec) => {
                let score = steady_state_error(&rec.tracking_errors(), tail_fraction).unwrap_or(f64::INFINITY);
                Ok((alpha, Some(rec), score))
            }
            Err(AlgorithmError::Diverged { .. }) => Ok((alpha, None, f64::INFINITY)),
            Err(e) => Err(ExperimentError::from(e)),
        })
        .collect::<Result<_, _>>()?;

    let scores: Vec<(f64, f64)> = runs.iter().map(|(a, _, s)| (*a, *s)).collect();
    let best = runs
        .into_iter()
        .filter(|(_, rec, s)| rec.is_some() && s.is_finite())
        .min_by(|x, y| x.2.total_cmp(&y.2).then(y.0.total_cmp(&x.0)));
    match best {
        Some((alpha, Some(record), score)) => {
            log::info!("{id}: tuned alpha = {alpha:.6e}, steady-state error = {score:.6e}");
            Ok(Tuned { alpha, steady_state_error: score, record, scores })
        }
        _ => Err(ExperimentError::TuningFailed { algorithm: id, grid: grid.to_vec() }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algorithm: AlgorithmId,
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
    pub steady_state_error: f64,
    pub tail_max: f64,
    pub theory_bound: Option<f64>,
}

pub struct SuiteOutcome {
    pub records: Vec<TrajectoryRecord>,
    pub summary: Vec<SummaryRow>,
}

/// Tunes each requested algorithm and reruns it at the tuned step.
pub fn run_suite(config: &ExperimentConfig) -> Result<SuiteOutcome, ExperimentError> {
    let setup = Setup::from_config(config)?;
    run_suite_with(&setup, config)
}

pub fn run_suite_with(setup: &Setup, config: &ExperimentConfig) -> Result<SuiteOutcome, ExperimentError> {
    let grid = config.grid.values(setup.objective.mu(), setup.objective.lipschitz());
    let mut records = Vec::new();
    let mut summary = Vec::new();
    for &id in &config.algorithms {
        let tuned = tune_stepsize(setup, id, &grid, config.tail_fraction)?;
        let record = setup.run(id, tuned.alpha)?;
        let series = record.tracking_errors();
        summary.push(SummaryRow {
            algorithm: id,
            alpha: tuned.alpha,
            beta: record.meta.beta,
            n: record.meta.n,
            steady_state_error: steady_state_error(&series, config.tail_fraction)?,
            tail_max: tail_max(&series, config.tail_fraction)?,
            theory_bound: setup.normalized_bound(&record),
        });
        records.push(record);
    }
    Ok(SuiteOutcome { records, summary })
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        let _ = write!(s, "{},{},{},{},{},", r.algorithm, r.alpha, r.beta, r.n, r.steady_state_error);
        if let Some(b) = r.theory_bound {
            let _ = write!(s, "{b}");
        }
        s.push('\n');
    }
    s
}

/// Resolves a configured output directory against `$DYNTRACK_OUTPUT_ROOT`.
pub fn output_dir(config: &ExperimentConfig) -> PathBuf {
    if config.output_dir.is_absolute() {
        return config.output_dir.clone();
    }
    let root = std::env::var_os(OUTPUT_ROOT_ENV).map_or_else(|| PathBuf::from("output"), PathBuf::from);
    root.join(&config.output_dir)
}

/// Writes one CSV (plus sidecar) per algorithm and `summary.csv` into `dir`.
pub fn write_suite(outcome: &SuiteOutcome, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(dir).map_err(|source| ExperimentError::Io { path: dir.to_path_buf(), source })?;
    let mut written = Vec::new();
    for rec in &outcome.records {
        let path = dir.join(format!("{}.csv", rec.meta.algorithm));
        rec.write(&path)?;
        written.push(path);
    }
    let path = dir.join("summary.csv");
    fs::write(&path, summary_csv(&outcome.summary)).map_err(|source| ExperimentError::Io { path: path.clone(), source })?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn steady_state_examples() {
        assert_relative_eq!(steady_state_error(&[0.3; 51], 0.2).unwrap(), 0.3, max_relative = 1e-15);
        let series: Vec<f64> = (0..=1000).map(|k| if k == 0 { 1.0 } else { 1.0 / k as f64 }).collect();
        let expected: f64 = (801..=1000).map(|k| 1.0 / k as f64).sum::<f64>() / 200.0;
        let got = steady_state_error(&series, 0.2).unwrap();
        assert_relative_eq!(got, expected, max_relative = 1e-14);
        assert_relative_eq!(got, 1.11509e-3, max_relative = 1e-5);
        assert_eq!(tail_max(&series, 0.2).unwrap(), 1.0 / 801.0);
        let mut bad = vec![1.0; 20];
        bad[7] = f64::NAN;
        assert!(matches!(steady_state_error(&bad, 0.2), Err(ExperimentError::Diverged { iteration: 7 })));
    }

    fn single_agent_static() -> Setup {
        // One agent with target m = 1: f(x) = ½(x − 1)², mu = L = 1.
        let obj = ShiftingConsensus::static_targets(1, 1.0, 40).unwrap();
        let g = build_complete(3).unwrap();
        let w = uniform_neighbor_weights(&g).unwrap();
        Setup::new(Box::new(obj), g, w, 40, InitialIterate::Zero, 0).unwrap()
    }

    #[test]
    fn tuning_prefers_fast_contraction() {
        let setup = single_agent_static();
        let tuned = tune_stepsize(&setup, AlgorithmId::Dgt, &[0.1, 0.5, 1.0], 0.2).unwrap();
        assert_eq!(tuned.alpha, 1.0);
        let single = tune_stepsize(&setup, AlgorithmId::Dgt, &[0.3], 0.2).unwrap();
        assert_eq!(single.alpha, 0.3);
    }

    #[test]
    fn divergent_grid_points_score_infinity() {
        let setup = single_agent_static();
        let tuned = tune_stepsize(&setup, AlgorithmId::Diffusion, &[0.5, 1e6], 0.2).unwrap();
        assert_eq!(tuned.alpha, 0.5);
        assert_eq!(tuned.scores[1].1, f64::INFINITY);
        assert!(matches!(
            tune_stepsize(&setup, AlgorithmId::Diffusion, &[1e6], 0.2),
            Err(ExperimentError::TuningFailed { .. })
        ));
    }

    #[test]
    fn summary_leaves_missing_bounds_empty() {
        let rows = vec![SummaryRow {
            algorithm: AlgorithmId::Extra,
            alpha: 0.5,
            beta: 0.25,
            n: 3,
            steady_state_error: 1e-3,
            tail_max: 2e-3,
            theory_bound: None,
        }];
        assert_eq!(summary_csv(&rows), format!("{SUMMARY_HEADER}\nextra,0.5,0.25,3,0.001,\n"));
    }
}
