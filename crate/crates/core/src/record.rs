//! Per-run metric series and their CSV / metadata files.
//!
//! A record at `run.csv` is paired with a `run.meta` sidecar of `key = value`
//! lines. Floats are written with Rust's shortest round-trip formatting, so a
//! record read back is bit-identical to the one written.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::algorithms::AlgorithmId;

pub const CSV_HEADER: &str = "k,tracking_error,consensus_dev,avg_error,y_dev";

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{what} line {line}: {message}")]
    Parse { what: &'static str, line: usize, message: String },
    #[error("metadata is missing key {0:?}")]
    MissingKey(&'static str),
}

/// Metrics at one time step. `avg_error` and `consensus_dev` are per-agent
/// root-mean-square quantities: the stacked norms divided by `√n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordRow {
    pub k: usize,
    /// `(1/n Σ_i ‖x_i^k − x̃^{k*}‖²)^{1/2} / ‖x̃^{k*}‖²`.
    pub tracking_error: f64,
    /// `‖x^k − 𝟙⊗x̄^k‖/√n`.
    pub consensus_dev: f64,
    /// `‖x̄^k − x̃^{k*}‖`.
    pub avg_error: f64,
    /// `‖y^k − 𝟙⊗ȳ^k‖/√n`, DGT only.
    pub y_dev: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMeta {
    pub algorithm: AlgorithmId,
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
    pub d: usize,
    pub mu: f64,
    pub lipschitz: f64,
    pub delta_x: f64,
    pub grad_bound: f64,
    pub grad_drift: f64,
    pub scenario: String,
    pub seed: u64,
    /// `‖x̃^{0*}‖²`, the normalizer of the tracking error.
    pub x_norm_sq: f64,
}

impl RunMeta {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "algorithm = {}", self.algorithm);
        let _ = writeln!(s, "alpha = {}", self.alpha);
        let _ = writeln!(s, "beta = {}", self.beta);
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "d = {}", self.d);
        let _ = writeln!(s, "mu = {}", self.mu);
        let _ = writeln!(s, "L = {}", self.lipschitz);
        let _ = writeln!(s, "delta_x = {}", self.delta_x);
        let _ = writeln!(s, "D = {}", self.grad_bound);
        let _ = writeln!(s, "delta_g = {}", self.grad_drift);
        let _ = writeln!(s, "scenario = {}", self.scenario);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "x_norm_sq = {}", self.x_norm_sq);
        s
    }

    pub fn from_text(text: &str) -> Result<Self, RecordError> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| RecordError::Parse {
                what: "metadata",
                line: i + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            pairs.push((k.trim().to_string(), v.trim().to_string(), i + 1));
        }
        let raw = |key: &'static str| -> Result<(&str, usize), RecordError> {
            pairs
                .iter()
                .find(|(k, _, _)| k == key)
                .map(|(_, v, l)| (v.as_str(), *l))
                .ok_or(RecordError::MissingKey(key))
        };
        fn parsed<T: std::str::FromStr>(key: &'static str, (v, line): (&str, usize)) -> Result<T, RecordError>
        where
            T::Err: std::fmt::Display,
        {
            v.parse().map_err(|e: T::Err| RecordError::Parse { what: "metadata", line, message: format!("{key}: {e}") })
        }
        Ok(Self {
            algorithm: parsed("algorithm", raw("algorithm")?)?,
            alpha: parsed("alpha", raw("alpha")?)?,
            beta: parsed("beta", raw("beta")?)?,
            n: parsed("n", raw("n")?)?,
            d: parsed("d", raw("d")?)?,
            mu: parsed("mu", raw("mu")?)?,
            lipschitz: parsed("L", raw("L")?)?,
            delta_x: parsed("delta_x", raw("delta_x")?)?,
            grad_bound: parsed("D", raw("D")?)?,
            grad_drift: parsed("delta_g", raw("delta_g")?)?,
            scenario: raw("scenario")?.0.to_string(),
            seed: parsed("seed", raw("seed")?)?,
            x_norm_sq: parsed("x_norm_sq", raw("x_norm_sq")?)?,
        })
    }
}

/// A full run: metadata and `horizon + 1` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub meta: RunMeta,
    pub rows: Vec<RecordRow>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RecordError + '_ {
    move |source| RecordError::Io { path: path.to_path_buf(), source }
}

/// Sidecar path for a record CSV.
pub fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta")
}

impl TrajectoryRecord {
    pub fn tracking_errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.tracking_error).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * self.rows.len());
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "{},{},{},{},", r.k, r.tracking_error, r.consensus_dev, r.avg_error);
            if let Some(y) = r.y_dev {
                let _ = write!(s, "{y}");
            }
            s.push('\n');
        }
        s
    }

    pub fn rows_from_csv(text: &str) -> Result<Vec<RecordRow>, RecordError> {
        let mut lines = text.lines().enumerate();
        let err = |line: usize, message: String| RecordError::Parse { what: "csv", line, message };
        match lines.next() {
            Some((_, h)) if h.trim() == CSV_HEADER => {}
            other => return Err(err(1, format!("expected header {CSV_HEADER:?}, got {:?}", other.map(|o| o.1)))),
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(err(i + 1, format!("expected 5 fields, got {}", f.len())));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|e| err(i + 1, format!("{s:?}: {e}")));
            rows.push(RecordRow {
                k: f[0].trim().parse().map_err(|e| err(i + 1, format!("{:?}: {e}", f[0])))?,
                tracking_error: num(f[1])?,
                consensus_dev: num(f[2])?,
                avg_error: num(f[3])?,
                y_dev: if f[4].trim().is_empty() { None } else { Some(num(f[4])?) },
            });
        }
        Ok(rows)
    }

    /// Writes `path` and its `.meta` sidecar.
    pub fn write(&self, path: &Path) -> Result<(), RecordError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        fs::write(path, self.to_csv()).map_err(io_err(path))?;
        let meta = meta_path(path);
        fs::write(&meta, self.meta.to_text()).map_err(io_err(&meta))
    }

    pub fn read(path: &Path) -> Result<Self, RecordError> {
        let csv = fs::read_to_string(path).map_err(io_err(path))?;
        let meta_file = meta_path(path);
        let meta = fs::read_to_string(&meta_file).map_err(io_err(&meta_file))?;
        Ok(Self { meta: RunMeta::from_text(&meta)?, rows: Self::rows_from_csv(&csv)? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TrajectoryRecord {
        TrajectoryRecord {
            meta: RunMeta {
                algorithm: AlgorithmId::Dgt,
                alpha: 0.1 + 0.2,
                beta: 0.5393446629166316,
                n: 5,
                d: 2,
                mu: 0.0123,
                lipschitz: 21.5,
                delta_x: 9.42477e-4,
                grad_bound: 0.0,
                grad_drift: 0.0,
                scenario: "I".into(),
                seed: u64::MAX,
                x_norm_sq: 1.0,
            },
            rows: vec![
                RecordRow { k: 0, tracking_error: 1.0 / 3.0, consensus_dev: 0.0, avg_error: 1e-300, y_dev: Some(2.5) },
                RecordRow { k: 1, tracking_error: 0.25, consensus_dev: 1e-17, avg_error: 3.0, y_dev: Some(0.0) },
            ],
        }
    }

    #[test]
    fn csv_and_meta_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/run.csv");
        let rec = sample();
        rec.write(&path).unwrap();
        assert!(path.with_extension("meta").exists());
        assert_eq!(TrajectoryRecord::read(&path).unwrap(), rec);
    }

    #[test]
    fn non_tracking_rows_leave_y_dev_empty() {
        let mut rec = sample();
        rec.rows.iter_mut().for_each(|r| r.y_dev = None);
        let csv = rec.to_csv();
        assert!(csv.lines().nth(1).unwrap().ends_with(','));
        assert_eq!(TrajectoryRecord::rows_from_csv(&csv).unwrap(), rec.rows);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(TrajectoryRecord::rows_from_csv("k,x\n").is_err());
        assert!(TrajectoryRecord::rows_from_csv(&format!("{CSV_HEADER}\n0,1,2\n")).is_err());
        assert!(matches!(RunMeta::from_text("alpha = 1\n"), Err(RecordError::MissingKey(_))));
    }
}
