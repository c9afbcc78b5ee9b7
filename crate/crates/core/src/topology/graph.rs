use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TopologyError;
use crate::seeds::derive_seed;

/// Number of fresh draws `build_random` makes before giving up on connectivity.
pub const MAX_RANDOM_ATTEMPTS: u32 = 64;

/// How a graph was produced. Weight rules use this to pick closed forms.
#[derive(Debug, Clone, PartialEq)]
pub enum TopologyKind {
    Cycle,
    Line,
    Grid { rows: usize, cols: usize },
    Complete,
    Random { edge_probability: f64, seed: u64, attempt: u32 },
    Custom,
}

/// Undirected network of agents. Every neighbor set contains the agent itself.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    kind: TopologyKind,
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from an undirected edge list. Self-loops in the input are
    /// ignored (they are always present); duplicates collapse.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self, TopologyError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n == 0 {
            return Err(TopologyError::InvalidSize("graph needs at least one agent".into()));
        }
        let mut sets: Vec<BTreeSet<usize>> = (0..n).map(|i| BTreeSet::from([i])).collect();
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(TopologyError::AgentOutOfRange { agent: i.max(j), n });
            }
            sets[i].insert(j);
            sets[j].insert(i);
        }
        Ok(Self {
            kind: TopologyKind::Custom,
            neighbors: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    fn with_kind(mut self, kind: TopologyKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn agents(&self) -> usize {
        self.neighbors.len()
    }

    pub fn kind(&self) -> &TopologyKind {
        &self.kind
    }

    /// Neighbor set N_i, sorted, including `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Number of neighbors other than the agent itself.
    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len() - 1
    }

    /// Unordered edges `(i, j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, nbrs) in self.neighbors.iter().enumerate() {
            out.extend(nbrs.iter().filter(|&&j| j > i).map(|&j| (i, j)));
        }
        out
    }

    pub fn is_regular(&self) -> bool {
        let d = self.degree(0);
        (1..self.agents()).all(|i| self.degree(i) == d)
    }

    pub fn is_connected(&self) -> bool {
        let n = self.agents();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &self.neighbors[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == n
    }

    /// One line per agent: the index followed by its neighbor indices.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, nbrs) in self.neighbors.iter().enumerate() {
            let _ = write!(s, "{i}");
            for j in nbrs {
                let _ = write!(s, " {j}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, TopologyError> {
        let mut rows: Vec<(usize, Vec<usize>)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace().map(|f| {
                f.parse::<usize>().map_err(|e| TopologyError::Parse {
                    line: lineno + 1,
                    message: format!("{f:?}: {e}"),
                })
            });
            let agent = fields.next().expect("non-empty line")?;
            let nbrs = fields.collect::<Result<Vec<_>, _>>()?;
            rows.push((agent, nbrs));
        }
        let n = rows.len();
        let mut edges = Vec::new();
        for (expected, (agent, nbrs)) in rows.into_iter().enumerate() {
            if agent != expected {
                return Err(TopologyError::Parse {
                    line: expected + 1,
                    message: format!("expected agent {expected}, found {agent}"),
                });
            }
            edges.extend(nbrs.into_iter().map(|j| (agent, j)));
        }
        Self::from_edges(n, edges)
    }
}

/// Ring on `n >= 3` agents.
pub fn build_cycle(n: usize) -> Result<Graph, TopologyError> {
    if n < 3 {
        return Err(TopologyError::InvalidSize(format!("cycle needs n >= 3, got {n}")));
    }
    let g = Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n)))?;
    Ok(g.with_kind(TopologyKind::Cycle))
}

/// Path on `n >= 2` agents.
pub fn build_line(n: usize) -> Result<Graph, TopologyError> {
    if n < 2 {
        return Err(TopologyError::InvalidSize(format!("line needs n >= 2, got {n}")));
    }
    let g = Graph::from_edges(n, (0..n - 1).map(|i| (i, i + 1)))?;
    Ok(g.with_kind(TopologyKind::Line))
}

/// 4-neighbor lattice; agent `r * cols + c` sits at row `r`, column `c`.
pub fn build_grid(rows: usize, cols: usize) -> Result<Graph, TopologyError> {
    if rows == 0 || cols == 0 || rows * cols < 2 {
        return Err(TopologyError::InvalidSize(format!(
            "grid needs at least two agents, got {rows}x{cols}"
        )));
    }
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if c + 1 < cols {
                edges.push((i, i + 1));
            }
            if r + 1 < rows {
                edges.push((i, i + cols));
            }
        }
    }
    let g = Graph::from_edges(rows * cols, edges)?;
    Ok(g.with_kind(TopologyKind::Grid { rows, cols }))
}

pub fn build_complete(n: usize) -> Result<Graph, TopologyError> {
    if n == 0 {
        return Err(TopologyError::InvalidSize("complete graph needs n >= 1".into()));
    }
    let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
    let g = Graph::from_edges(n, edges)?;
    Ok(g.with_kind(TopologyKind::Complete))
}

/// Erdős–Rényi graph: each pair is linked independently with `edge_probability`.
///
/// Disconnected draws are discarded and redrawn under a seed derived from
/// `(seed, attempt)`, at most [`MAX_RANDOM_ATTEMPTS`] times.
pub fn build_random(n: usize, edge_probability: f64, seed: u64) -> Result<Graph, TopologyError> {
    if n == 0 {
        return Err(TopologyError::InvalidSize("random graph needs n >= 1".into()));
    }
    if !(edge_probability > 0.0 && edge_probability <= 1.0) {
        return Err(TopologyError::InvalidProbability(edge_probability));
    }
    for attempt in 0..MAX_RANDOM_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[u64::from(attempt)]));
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < edge_probability {
                    edges.push((i, j));
                }
            }
        }
        let g = Graph::from_edges(n, edges)?;
        if g.is_connected() {
            return Ok(g.with_kind(TopologyKind::Random { edge_probability, seed, attempt }));
        }
    }
    Err(TopologyError::RetriesExhausted { attempts: MAX_RANDOM_ATTEMPTS, edge_probability })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_neighbor_sets() {
        let g = build_cycle(3).unwrap();
        assert!((0..3).all(|i| g.neighbors(i).len() == 3));
        let g = build_cycle(5).unwrap();
        assert_eq!(g.neighbors(0), &[0, 1, 4]);
        assert!(g.is_regular());
        assert!(matches!(build_cycle(2), Err(TopologyError::InvalidSize(_))));
    }

    #[test]
    fn line_and_grid_degrees() {
        let g = build_line(4).unwrap();
        assert_eq!(g.neighbors(0).len(), 2);
        assert_eq!(g.neighbors(3).len(), 2);
        assert_eq!(g.neighbors(1).len(), 3);
        assert!(!g.is_regular());

        let g = build_grid(3, 3).unwrap();
        assert_eq!(g.agents(), 9);
        for corner in [0, 2, 6, 8] {
            assert_eq!(g.neighbors(corner).len(), 3);
        }
        assert_eq!(g.neighbors(4).len(), 5);
        assert!(build_grid(1, 1).is_err());
        assert!(build_line(1).is_err());
    }

    #[test]
    fn complete_links_all_pairs() {
        let g = build_complete(4).unwrap();
        assert_eq!(g.edges().len(), 6);
        assert!((0..4).all(|i| g.neighbors(i) == [0, 1, 2, 3]));
    }

    #[test]
    fn random_full_probability_is_complete() {
        let g = build_random(10, 1.0, 99).unwrap();
        assert_eq!(g.edges().len(), 45);
    }

    #[test]
    fn random_is_deterministic() {
        let a = build_random(60, 0.08, 7).unwrap();
        let b = build_random(60, 0.08, 7).unwrap();
        assert_eq!(a.edges(), b.edges());
        assert!(a.is_connected());
    }

    #[test]
    fn random_gives_up_when_too_sparse() {
        let err = build_random(200, 1e-4, 3).unwrap_err();
        assert!(matches!(err, TopologyError::RetriesExhausted { attempts: MAX_RANDOM_ATTEMPTS, .. }));
        assert!(build_random(5, 0.0, 1).is_err());
        assert!(build_random(5, 1.5, 1).is_err());
    }

    #[test]
    fn edges_are_symmetric_and_self_loops_present() {
        let g = build_random(30, 0.2, 11).unwrap();
        for i in 0..g.agents() {
            assert!(g.neighbors(i).contains(&i));
            for &j in g.neighbors(i) {
                assert!(g.neighbors(j).contains(&i));
            }
        }
    }

    #[test]
    fn text_round_trip() {
        let g = build_grid(2, 3).unwrap();
        let back = Graph::from_text(&g.to_text()).unwrap();
        assert_eq!(back.edges(), g.edges());
        assert!(Graph::from_text("0 1\n2 0\n").is_err());
    }
}
