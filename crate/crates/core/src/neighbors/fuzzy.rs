//! Smooth-kNN membership strengths and probabilistic t-conorm symmetrization.

use super::NeighborIndex;
use crate::{par, Error, Result};

pub const SIGMA_MAX_ITERS: usize = 64;
pub const SIGMA_TOLERANCE: f64 = 1e-5;
pub const SIGMA_FLOOR: f64 = 1e-8;

/// Symmetric sparse weighted graph; every unordered pair is stored once.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyGraph {
    n: usize,
    /// `(i, j, w)` with `i < j`, sorted by `(i, j)`.
    edges: Vec<(usize, usize, f64)>,
    /// Per node: `(neighbor, edge index)` sorted by neighbor.
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl FuzzyGraph {
    /// Builds a graph from undirected edges. Orientation is normalized to
    /// `i < j`; self-loops, duplicates and weights outside `(0, 1]` are rejected.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut edges: Vec<(usize, usize, f64)> = edges
            .into_iter()
            .map(|(i, j, w)| if i < j { (i, j, w) } else { (j, i, w) })
            .collect();
        edges.sort_by_key(|e| (e.0, e.1));
        for (idx, &(i, j, w)) in edges.iter().enumerate() {
            if i == j {
                return Err(Error::invalid(format!("self-loop at node {i}")));
            }
            if j >= n {
                return Err(Error::invalid(format!("edge ({i}, {j}) out of range for {n} nodes")));
            }
            if !(w > 0.0 && w <= 1.0) {
                return Err(Error::invalid(format!("edge ({i}, {j}) weight {w} outside (0, 1]")));
            }
            if idx > 0 && (edges[idx - 1].0, edges[idx - 1].1) == (i, j) {
                return Err(Error::invalid(format!("duplicate edge ({i}, {j})")));
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for (e, &(i, j, _)) in edges.iter().enumerate() {
            adjacency[i].push((j, e));
            adjacency[j].push((i, e));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Self { n, edges, adjacency })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// `(neighbor, edge index)` pairs of `node`, sorted by neighbor id.
    pub fn adjacent(&self, node: usize) -> &[(usize, usize)] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        let list = &self.adjacency[i];
        list.binary_search_by_key(&j, |&(v, _)| v).ok().map(|p| list[p].1)
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        self.edge_index(i, j).map(|e| self.edges[e].2)
    }

    /// Same topology with replaced weights, given in edge order.
    pub fn with_weights(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.edges.len() {
            return Err(Error::Shape(format!(
                "{} weights for {} edges",
                weights.len(),
                self.edges.len()
            )));
        }
        if let Some((e, w)) = weights.iter().enumerate().find(|(_, w)| !(**w > 0.0 && **w <= 1.0)) {
            return Err(Error::invalid(format!("weight {w} for edge {e} outside (0, 1]")));
        }
        let mut out = self.clone();
        for (edge, &w) in out.edges.iter_mut().zip(weights) {
            edge.2 = w;
        }
        Ok(out)
    }
}

/// Per-point smooth-kNN calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothKnn {
    pub rho: f64,
    pub sigma: f64,
}

fn membership_sum(dists: &[f64], rho: f64, sigma: f64) -> f64 {
    dists.iter().map(|&d| (-(d - rho).max(0.0) / sigma).exp()).sum()
}

/// Finds `rho_i` (nearest-neighbor distance) and `sigma_i` such that the
/// membership strengths of point `i` sum to `log2(k)`.
pub fn smooth_knn(index: &NeighborIndex) -> Vec<SmoothKnn> {
    let target = (index.k() as f64).log2();
    par::map_range(index.len(), |i| {
        let d = index.distances(i);
        let rho = d[0];
        let max_d = d[d.len() - 1];
        let mut lo = SIGMA_FLOOR;
        let mut hi = (max_d * index.k() as f64).max(2.0 * SIGMA_FLOOR);
        let mut sigma = hi;
        for _ in 0..SIGMA_MAX_ITERS {
            sigma = 0.5 * (lo + hi);
            let s = membership_sum(d, rho, sigma);
            if (s - target).abs() < SIGMA_TOLERANCE {
                break;
            }
            if s > target {
                hi = sigma;
            } else {
                lo = sigma;
            }
        }
        SmoothKnn { rho, sigma }
    })
}

/// UMAP fuzzy simplicial set: directed memberships
/// `a_ij = exp(-max(0, d_ij - rho_i) / sigma_i)` combined by `a + b - ab`.
pub fn fuzzy_weights(index: &NeighborIndex) -> Result<FuzzyGraph> {
    let calib = smooth_knn(index);
    let n = index.len();
    let mut directed: Vec<(usize, usize, f64)> = Vec::with_capacity(n * index.k());
    for (i, c) in calib.iter().enumerate() {
        for (&j, &d) in index.neighbors(i).iter().zip(index.distances(i)) {
            let a = (-(d - c.rho).max(0.0) / c.sigma).exp();
            let (lo, hi) = if i < j { (i, j) } else { (j, i) };
            directed.push((lo, hi, a));
        }
    }
    directed.sort_by_key(|e| (e.0, e.1));
    let mut edges = Vec::with_capacity(directed.len());
    let mut iter = directed.into_iter().peekable();
    while let Some((i, j, a)) = iter.next() {
        let w = match iter.peek() {
            Some(&(pi, pj, b)) if (pi, pj) == (i, j) => {
                iter.next();
                t_conorm(a, b)
            }
            _ => a,
        };
        // memberships that underflow carry no weight
        if w > 0.0 {
            edges.push((i, j, w.min(1.0)));
        }
    }
    FuzzyGraph::from_edges(n, edges)
}

/// `a + b - ab`, arranged so that `a == 1` yields exactly 1.
pub(crate) fn t_conorm(a: f64, b: f64) -> f64 {
    a + b * (1.0 - a)
}
