use std::fmt::Write as _;

use super::graph::{Graph, TopologyKind};
use super::spectral;
use super::TopologyError;

/// Tolerance on row and column sums.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Rule that produced a weight matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightRule {
    /// `1/|N_i|` on a ring; circulant, so β has a closed form.
    UniformCycle,
    /// `1/|N_i|` on any other regular graph.
    Uniform,
    /// Metropolis–Hastings: `1/(1 + max(deg_i, deg_j))` off the diagonal.
    Metropolis,
    /// Supplied directly by the caller.
    Explicit,
}

/// Doubly stochastic mixing matrix stored as sparse neighbor rows.
///
/// Row `i` holds `(j, W_ij)` for `j ∈ N_i` only, so every combine step reads
/// nothing outside an agent's neighborhood.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    rows: Vec<Vec<(usize, f64)>>,
    rule: WeightRule,
    beta: f64,
}

impl WeightMatrix {
    fn build(rows: Vec<Vec<(usize, f64)>>, rule: WeightRule) -> Result<Self, TopologyError> {
        let mut w = Self { rows, rule, beta: f64::NAN };
        w.check_doubly_stochastic()?;
        w.beta = spectral::spectral_gap(&w)?;
        Ok(w)
    }

    /// Validates a dense matrix and keeps only its nonzero entries.
    pub fn from_dense(entries: &[Vec<f64>]) -> Result<Self, TopologyError> {
        let n = entries.len();
        if n == 0 {
            return Err(TopologyError::InvalidSize("empty weight matrix".into()));
        }
        let mut rows = Vec::with_capacity(n);
        for (i, row) in entries.iter().enumerate() {
            if row.len() != n {
                return Err(TopologyError::NotSquare { row: i, len: row.len(), n });
            }
            let mut sparse = Vec::new();
            for (j, &v) in row.iter().enumerate() {
                if v < 0.0 || !v.is_finite() {
                    return Err(TopologyError::NegativeWeight { row: i, col: j, value: v });
                }
                if v != 0.0 || i == j {
                    sparse.push((j, v));
                }
            }
            rows.push(sparse);
        }
        Self::build(rows, WeightRule::Explicit)
    }

    pub fn agents(&self) -> usize {
        self.rows.len()
    }

    pub fn rule(&self) -> WeightRule {
        self.rule
    }

    /// `|λ₂(W)|`, the second-largest eigenvalue magnitude.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Nonzero entries of row `i` as `(column, weight)`.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i].iter().find(|&&(c, _)| c == j).map_or(0.0, |&(_, v)| v)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.agents();
        let mut out = vec![vec![0.0; n]; n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                out[i][j] = v;
            }
        }
        out
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows
            .iter()
            .enumerate()
            .all(|(i, row)| row.iter().all(|&(j, v)| (self.get(j, i) - v).abs() <= tol))
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|&(_, v)| v).sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.agents()];
        for row in &self.rows {
            for &(j, v) in row {
                sums[j] += v;
            }
        }
        sums
    }

    fn check_doubly_stochastic(&self) -> Result<(), TopologyError> {
        for (i, s) in self.row_sums().into_iter().enumerate() {
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(TopologyError::NotStochastic { axis: "row", index: i, sum: s });
            }
        }
        for (j, s) in self.column_sums().into_iter().enumerate() {
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(TopologyError::NotStochastic { axis: "column", index: j, sum: s });
            }
        }
        Ok(())
    }

    /// `dst_i = Σ_{j∈N_i} W_ij src_j` on a stack of `n` blocks of length `dim`.
    pub fn mix(&self, src: &[f64], dim: usize, dst: &mut [f64]) {
        debug_assert_eq!(src.len(), self.agents() * dim);
        debug_assert_eq!(dst.len(), src.len());
        for (i, row) in self.rows.iter().enumerate() {
            let out = &mut dst[i * dim..(i + 1) * dim];
            out.fill(0.0);
            for &(j, w) in row {
                let block = &src[j * dim..(j + 1) * dim];
                for (o, s) in out.iter_mut().zip(block) {
                    *o += w * s;
                }
            }
        }
    }

    /// One line per agent: index, then `neighbor:weight` pairs.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(s, "{i}");
            for (j, v) in row {
                let _ = write!(s, " {j}:{v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, TopologyError> {
        let mut dense: Vec<Vec<(usize, f64)>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| TopologyError::Parse { line: lineno + 1, message };
            let mut fields = line.split_whitespace();
            let agent: usize = fields
                .next()
                .expect("non-empty line")
                .parse()
                .map_err(|e| parse_err(format!("agent index: {e}")))?;
            if agent != dense.len() {
                return Err(parse_err(format!("expected agent {}, found {agent}", dense.len())));
            }
            let mut row = Vec::new();
            for f in fields {
                let (j, v) = f.split_once(':').ok_or_else(|| parse_err(format!("{f:?} is not j:w")))?;
                let j: usize = j.parse().map_err(|e| parse_err(format!("{j:?}: {e}")))?;
                let v: f64 = v.parse().map_err(|e| parse_err(format!("{v:?}: {e}")))?;
                row.push((j, v));
            }
            dense.push(row);
        }
        let n = dense.len();
        let mut full = vec![vec![0.0; n]; n];
        for (i, row) in dense.into_iter().enumerate() {
            for (j, v) in row {
                if j >= n {
                    return Err(TopologyError::AgentOutOfRange { agent: j, n });
                }
                full[i][j] = v;
            }
        }
        Self::from_dense(&full)
    }
}

/// `W_ij = 1/|N_i|` for `j ∈ N_i`. Only doubly stochastic on regular graphs.
pub fn uniform_neighbor_weights(g: &Graph) -> Result<WeightMatrix, TopologyError> {
    if !g.is_connected() {
        return Err(TopologyError::Disconnected);
    }
    if !g.is_regular() {
        return Err(TopologyError::NotRegular);
    }
    let rows = (0..g.agents())
        .map(|i| {
            let w = 1.0 / g.neighbors(i).len() as f64;
            g.neighbors(i).iter().map(|&j| (j, w)).collect()
        })
        .collect();
    let rule = if *g.kind() == TopologyKind::Cycle { WeightRule::UniformCycle } else { WeightRule::Uniform };
    WeightMatrix::build(rows, rule)
}

/// Metropolis–Hastings weights; symmetric, hence doubly stochastic on any graph.
pub fn metropolis_weights(g: &Graph) -> Result<WeightMatrix, TopologyError> {
    if !g.is_connected() {
        return Err(TopologyError::Disconnected);
    }
    let rows = (0..g.agents())
        .map(|i| {
            let mut row: Vec<(usize, f64)> = g
                .neighbors(i)
                .iter()
                .map(|&j| {
                    let w = if j == i { 0.0 } else { 1.0 / (1.0 + g.degree(i).max(g.degree(j)) as f64) };
                    (j, w)
                })
                .collect();
            let off: f64 = row.iter().map(|&(_, w)| w).sum();
            for entry in row.iter_mut().filter(|(j, _)| *j == i) {
                entry.1 = 1.0 - off;
            }
            row
        })
        .collect();
    WeightMatrix::build(rows, WeightRule::Metropolis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_complete, build_cycle, build_grid, build_line, build_random};
    use approx::assert_abs_diff_eq;

    #[test]
    fn uniform_cycle_five() {
        let w = uniform_neighbor_weights(&build_cycle(5).unwrap()).unwrap();
        assert_eq!(w.rule(), WeightRule::UniformCycle);
        assert_abs_diff_eq!(w.get(0, 1), 1.0 / 3.0);
        assert_abs_diff_eq!(w.get(0, 2), 0.0);
        let expected = (1.0 + 2.0 * (2.0 * std::f64::consts::PI / 5.0).cos()) / 3.0;
        assert_abs_diff_eq!(w.beta(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(w.beta(), 0.5393, epsilon = 1e-4);
    }

    #[test]
    fn uniform_cycle_fifty() {
        let w = uniform_neighbor_weights(&build_cycle(50).unwrap()).unwrap();
        assert_abs_diff_eq!(w.beta(), 0.9947, epsilon = 1e-4);
    }

    #[test]
    fn uniform_complete_is_averaging() {
        let w = uniform_neighbor_weights(&build_complete(6).unwrap()).unwrap();
        for row in w.to_dense() {
            for v in row {
                assert_abs_diff_eq!(v, 1.0 / 6.0, epsilon = 1e-15);
            }
        }
        assert!(w.beta() < 1e-9);
    }

    #[test]
    fn uniform_rejects_irregular() {
        let err = uniform_neighbor_weights(&build_line(4).unwrap()).unwrap_err();
        assert!(matches!(err, TopologyError::NotRegular));
        assert!(err.to_string().contains("metropolis"));
    }

    #[test]
    fn metropolis_small_cases() {
        let w = metropolis_weights(&build_complete(3).unwrap()).unwrap();
        for row in w.to_dense() {
            for v in row {
                assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
            }
        }
        // Path 0-1-2: degrees (1,2,1); every edge touches the middle agent.
        let w = metropolis_weights(&build_line(3).unwrap()).unwrap();
        assert_abs_diff_eq!(w.get(0, 1), 1.0 / 3.0);
        assert_abs_diff_eq!(w.get(1, 2), 1.0 / 3.0);
        assert_abs_diff_eq!(w.get(0, 0), 2.0 / 3.0);
        assert_abs_diff_eq!(w.get(1, 1), 1.0 / 3.0);
        assert_abs_diff_eq!(w.get(0, 2), 0.0);
        for s in w.row_sums() {
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn metropolis_irregular_graphs_are_doubly_stochastic() {
        for g in [build_grid(4, 5).unwrap(), build_random(40, 0.15, 3).unwrap(), build_line(7).unwrap()] {
            let w = metropolis_weights(&g).unwrap();
            assert!(w.is_symmetric(0.0));
            for s in w.column_sums().into_iter().chain(w.row_sums()) {
                assert!((s - 1.0).abs() <= STOCHASTIC_TOL);
            }
            assert!(w.beta() < 1.0);
            for i in 0..g.agents() {
                for &(j, v) in w.row(i) {
                    assert!(v >= 0.0);
                    assert!(g.neighbors(i).contains(&j));
                }
            }
        }
    }

    #[test]
    fn dense_validation() {
        assert!(WeightMatrix::from_dense(&[vec![0.5, 0.5], vec![0.2, 0.8]]).is_err());
        assert!(WeightMatrix::from_dense(&[vec![1.5, -0.5], vec![-0.5, 1.5]]).is_err());
        let id = WeightMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_abs_diff_eq!(id.beta(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let w = metropolis_weights(&build_random(25, 0.2, 5).unwrap()).unwrap();
        let back = WeightMatrix::from_text(&w.to_text()).unwrap();
        assert_eq!(back.to_dense(), w.to_dense());
    }

    #[test]
    fn mix_matches_dense_product() {
        let w = metropolis_weights(&build_grid(3, 4).unwrap()).unwrap();
        let dense = w.to_dense();
        let src: Vec<f64> = (0..24).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut dst = vec![0.0; 24];
        w.mix(&src, 2, &mut dst);
        for i in 0..12 {
            for c in 0..2 {
                let expected: f64 = (0..12).map(|j| dense[i][j] * src[j * 2 + c]).sum();
                assert_abs_diff_eq!(dst[i * 2 + c], expected, epsilon = 1e-14);
            }
        }
    }
}
