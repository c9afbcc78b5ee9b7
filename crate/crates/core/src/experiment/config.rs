//! `key = value` experiment configuration.

use std::path::PathBuf;
use std::str::FromStr;

use super::ExperimentError;
use crate::algorithms::{AlgorithmId, InitialIterate};

/// Agents per side of the consensus scenarios at paper scale (`n = 2001`).
pub const PAPER_SCALE_P: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Least squares with a circling optimum.
    LeastSquares,
    /// Consensus with shift `T = p + 1`.
    ShiftHalf,
    /// Consensus with shift `T = 1`.
    ShiftOne,
    /// Consensus with frozen targets.
    Static,
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "i" | "1" | "least_squares" => Ok(Self::LeastSquares),
            "ii" | "2" => Ok(Self::ShiftHalf),
            "iii" | "3" => Ok(Self::ShiftOne),
            "static" => Ok(Self::Static),
            other => Err(format!("unknown scenario {other:?} (expected I, II, III or static)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologySpec {
    Cycle,
    Line,
    Grid { rows: usize, cols: usize },
    Complete,
    Random { edge_probability: f64 },
    /// Random graph whose edge probability is bisected to hit `target_beta`.
    RandomBeta { target_beta: f64, tolerance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightChoice {
    /// Uniform on regular graphs, Metropolis otherwise.
    Auto,
    Uniform,
    Metropolis,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepGrid {
    /// `count` log-spaced multipliers of `2/(μ+L)` between `lo` and `hi`.
    RelativeLog { lo: f64, hi: f64, count: usize },
    /// Absolute step sizes, ascending.
    Values(Vec<f64>),
}

impl Default for StepGrid {
    fn default() -> Self {
        Self::RelativeLog { lo: 1e-4, hi: 1.0, count: 30 }
    }
}

impl StepGrid {
    /// Concrete step sizes for a problem with constants `(μ, L)`.
    pub fn values(&self, mu: f64, lipschitz: f64) -> Vec<f64> {
        match self {
            Self::Values(v) => v.clone(),
            Self::RelativeLog { lo, hi, count } => {
                let scale = 2.0 / (mu + lipschitz);
                log_space(*lo, *hi, *count).into_iter().map(|m| m * scale).collect()
            }
        }
    }
}

/// `count` points from `lo` to `hi`, equally spaced in `log10`.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![hi];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count).map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub topology: TopologySpec,
    /// Agent count; consensus scenarios default to `2p + 1`.
    pub n: Option<usize>,
    pub weights: WeightChoice,
    pub horizon: usize,
    pub grid: StepGrid,
    pub algorithms: Vec<AlgorithmId>,
    pub seed: u64,
    pub tail_fraction: f64,
    pub output_dir: PathBuf,
    pub p: usize,
    pub spacing_m: f64,
    pub rows_per_agent: usize,
    pub init: InitialIterate,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::LeastSquares,
            topology: TopologySpec::Cycle,
            n: None,
            weights: WeightChoice::Auto,
            horizon: 5000,
            grid: StepGrid::default(),
            algorithms: vec![AlgorithmId::Diffusion, AlgorithmId::Dgt],
            seed: 1,
            tail_fraction: 0.2,
            output_dir: PathBuf::from("run"),
            p: 100,
            spacing_m: 1.0,
            rows_per_agent: 1,
            init: InitialIterate::Zero,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str, line: usize) -> Result<T, ExperimentError>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e: T::Err| ExperimentError::Config { line, message: format!("{key}: {e}") })
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment. Unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let mut cfg = Self::default();
        let mut topology_kind = String::from("cycle");
        let mut rows = None;
        let mut cols = None;
        let mut edge_probability = None;
        let mut target_beta = None;
        let mut tolerance = 0.02;
        let mut paper_scale = false;
        let mut explicit_grid = None;
        let mut log_grid = None;
        let mut init_seed = None;
        let mut init_kind = String::from("zero");

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ExperimentError::Config { line, message: format!("expected key = value, got {content:?}") })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |message: String| ExperimentError::Config { line, message };
            match key {
                "scenario" => cfg.scenario = value.parse().map_err(bad)?,
                "topology" => topology_kind = value.to_ascii_lowercase(),
                "n" => cfg.n = Some(parse_num(key, value, line)?),
                "rows" => rows = Some(parse_num(key, value, line)?),
                "cols" => cols = Some(parse_num(key, value, line)?),
                "edge_probability" => edge_probability = Some(parse_num(key, value, line)?),
                "target_beta" => target_beta = Some(parse_num(key, value, line)?),
                "beta_tolerance" => tolerance = parse_num(key, value, line)?,
                "weights" => {
                    cfg.weights = match value.to_ascii_lowercase().as_str() {
                        "auto" => WeightChoice::Auto,
                        "uniform" => WeightChoice::Uniform,
                        "metropolis" => WeightChoice::Metropolis,
                        other => return Err(bad(format!("unknown weight rule {other:?}"))),
                    }
                }
                "horizon" => cfg.horizon = parse_num(key, value, line)?,
                "step_grid" => {
                    let parts: Vec<&str> = value.split_whitespace().collect();
                    match parts.as_slice() {
                        ["default"] => log_grid = Some(StepGrid::default()),
                        ["log", lo, hi, count] => {
                            log_grid = Some(StepGrid::RelativeLog {
                                lo: parse_num(key, lo, line)?,
                                hi: parse_num(key, hi, line)?,
                                count: parse_num(key, count, line)?,
                            })
                        }
                        _ => return Err(bad(format!("step_grid must be `default` or `log LO HI COUNT`, got {value:?}"))),
                    }
                }
                "step_values" => {
                    let v = value
                        .split(',')
                        .map(|s| parse_num::<f64>(key, s.trim(), line))
                        .collect::<Result<Vec<_>, _>>()?;
                    explicit_grid = Some(StepGrid::Values(v));
                }
                "algorithms" => {
                    cfg.algorithms = value
                        .split(',')
                        .map(|s| s.parse::<AlgorithmId>().map_err(|e| bad(e.to_string())))
                        .collect::<Result<_, _>>()?
                }
                "seed" => cfg.seed = parse_num(key, value, line)?,
                "tail_fraction" => cfg.tail_fraction = parse_num(key, value, line)?,
                "output_dir" => cfg.output_dir = PathBuf::from(value),
                "p" => cfg.p = parse_num(key, value, line)?,
                "spacing_m" => cfg.spacing_m = parse_num(key, value, line)?,
                "rows_per_agent" => cfg.rows_per_agent = parse_num(key, value, line)?,
                "paper_scale" => paper_scale = parse_num(key, value, line)?,
                "init" => init_kind = value.to_ascii_lowercase(),
                "init_seed" => init_seed = Some(parse_num(key, value, line)?),
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }

        if paper_scale {
            cfg.p = PAPER_SCALE_P;
        }
        cfg.grid = match (explicit_grid, log_grid) {
            (Some(_), Some(_)) => {
                return Err(ExperimentError::InvalidConfig("set step_grid or step_values, not both".into()))
            }
            (Some(g), None) | (None, Some(g)) => g,
            (None, None) => StepGrid::default(),
        };
        let missing = |what: &str| ExperimentError::InvalidConfig(format!("topology {topology_kind} needs {what}"));
        cfg.topology = match topology_kind.as_str() {
            "cycle" => TopologySpec::Cycle,
            "line" => TopologySpec::Line,
            "complete" => TopologySpec::Complete,
            "grid" => TopologySpec::Grid { rows: rows.ok_or_else(|| missing("rows"))?, cols: cols.ok_or_else(|| missing("cols"))? },
            "random" => match (edge_probability, target_beta) {
                (Some(p), None) => TopologySpec::Random { edge_probability: p },
                (None, Some(b)) => TopologySpec::RandomBeta { target_beta: b, tolerance },
                _ => return Err(missing("exactly one of edge_probability or target_beta")),
            },
            other => return Err(ExperimentError::InvalidConfig(format!("unknown topology {other:?}"))),
        };
        cfg.init = match init_kind.as_str() {
            "zero" => InitialIterate::Zero,
            "optimum" => InitialIterate::Optimum,
            "gaussian" => InitialIterate::Gaussian { seed: init_seed.unwrap_or(cfg.seed) },
            other => return Err(ExperimentError::InvalidConfig(format!("unknown init {other:?}"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let fail = |m: String| Err(ExperimentError::InvalidConfig(m));
        if self.horizon < 10 {
            return fail(format!("horizon must be >= 10, got {}", self.horizon));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 0.5) {
            return fail(format!("tail_fraction must lie in (0, 0.5], got {}", self.tail_fraction));
        }
        if self.algorithms.is_empty() {
            return fail("no algorithms requested".into());
        }
        match &self.grid {
            StepGrid::Values(v) => {
                if v.is_empty() || v.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
                    return fail(format!("step values must be positive, got {v:?}"));
                }
                if v.windows(2).any(|w| w[0] >= w[1]) {
                    return fail(format!("step values must be strictly ascending, got {v:?}"));
                }
            }
            StepGrid::RelativeLog { lo, hi, count } => {
                if !(*lo > 0.0 && lo <= hi && *count > 0) {
                    return fail(format!("log grid needs 0 < lo <= hi and count > 0, got {lo} {hi} {count}"));
                }
            }
        }
        if self.scenario != Scenario::LeastSquares {
            let n = 2 * self.p + 1;
            if let Some(m) = self.n.filter(|&m| m != n) {
                return fail(format!("consensus scenarios use n = 2p + 1 = {n}, but n = {m} was given"));
            }
        }
        Ok(())
    }

    /// Agent count implied by the scenario and topology.
    pub fn agents(&self) -> Result<usize, ExperimentError> {
        if let TopologySpec::Grid { rows, cols } = self.topology {
            let n = rows * cols;
            if self.n.is_some_and(|m| m != n) {
                return Err(ExperimentError::InvalidConfig(format!("grid {rows}x{cols} has {n} agents, not {:?}", self.n)));
            }
            if self.scenario != Scenario::LeastSquares && n != 2 * self.p + 1 {
                return Err(ExperimentError::InvalidConfig(format!("grid size {n} must equal 2p + 1")));
            }
            return Ok(n);
        }
        match self.scenario {
            Scenario::LeastSquares => self.n.ok_or_else(|| ExperimentError::InvalidConfig("scenario I needs n".into())),
            _ => Ok(2 * self.p + 1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_config() {
        let text = "\
# Scenario II at desk scale
scenario = II
topology = random
target_beta = 0.89   # calibrated
beta_tolerance = 0.03
horizon = 400
algorithms = diffusion, dgt, extra, exact_diffusion
seed = 9
step_grid = log 1e-3 1 12
tail_fraction = 0.25
output_dir = fig3
p = 20
init = gaussian
";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.scenario, Scenario::ShiftHalf);
        assert_eq!(cfg.topology, TopologySpec::RandomBeta { target_beta: 0.89, tolerance: 0.03 });
        assert_eq!(cfg.algorithms.len(), 4);
        assert_eq!(cfg.agents().unwrap(), 41);
        assert_eq!(cfg.init, InitialIterate::Gaussian { seed: 9 });
        assert_eq!(cfg.grid.values(1.0, 1.0).len(), 12);
    }

    #[test]
    fn defaults_and_grid() {
        let cfg = ExperimentConfig::parse("n = 5\n").unwrap();
        assert_eq!(cfg.tail_fraction, 0.2);
        let grid = cfg.grid.values(1.0, 3.0);
        assert_eq!(grid.len(), 30);
        assert!((grid[0] - 0.5e-4).abs() < 1e-18);
        assert!((grid[29] - 0.5).abs() < 1e-15);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
        let cfg = ExperimentConfig::parse("scenario = III\npaper_scale = true\n").unwrap();
        assert_eq!(cfg.agents().unwrap(), 2001);
    }

    #[test]
    fn rejects_invalid_configs() {
        assert!(ExperimentConfig::parse("horizon = 5\nn = 5\n").is_err());
        assert!(ExperimentConfig::parse("tail_fraction = 0.7\n").is_err());
        assert!(ExperimentConfig::parse("step_values = 0.2, 0.1\n").is_err());
        assert!(ExperimentConfig::parse("step_values = 0.1\nstep_grid = default\n").is_err());
        assert!(ExperimentConfig::parse("colour = blue\n").is_err());
        assert!(ExperimentConfig::parse("scenario = II\np = 3\nn = 8\n").is_err());
        assert!(ExperimentConfig::parse("topology = random\n").is_err());
        assert!(ExperimentConfig::parse("just words\n").is_err());
        assert!(ExperimentConfig::parse("scenario = I\n").unwrap().agents().is_err());
    }
}
