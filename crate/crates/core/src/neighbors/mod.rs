//! kNN search and the UMAP fuzzy simplicial graph.

mod approx;
mod exact;
mod fuzzy;

pub use approx::{knn_approx, ApproxParams, EXACT_FALLBACK_MAX_N};
pub use exact::knn_exact;
pub use fuzzy::{fuzzy_weights, smooth_knn, FuzzyGraph, SmoothKnn};

use crate::{Error, Result};

/// Per-point neighbor lists ordered by ascending Euclidean distance.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborIndex {
    k: usize,
    ids: Vec<usize>,
    dists: Vec<f64>,
}

impl NeighborIndex {
    /// Builds an index from flat row-major `N x k` arrays, checking invariants.
    pub fn from_parts(k: usize, ids: Vec<usize>, dists: Vec<f64>) -> Result<Self> {
        if k == 0 || ids.len() != dists.len() || !ids.len().is_multiple_of(k) {
            return Err(Error::Shape(format!(
                "neighbor arrays of length {}/{} do not tile k={k}",
                ids.len(),
                dists.len()
            )));
        }
        let n = ids.len() / k;
        for i in 0..n {
            let row_ids = &ids[i * k..(i + 1) * k];
            let row_d = &dists[i * k..(i + 1) * k];
            if row_ids.iter().any(|&j| j == i || j >= n) {
                return Err(Error::invalid(format!("row {i} has a self or out-of-range neighbor")));
            }
            if row_d.iter().any(|d| !d.is_finite() || *d < 0.0) || row_d.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::invalid(format!("row {i} distances are not sorted non-negative")));
            }
        }
        Ok(Self { k, ids, dists })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.ids.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.ids[i * self.k..(i + 1) * self.k]
    }

    pub fn distances(&self, i: usize) -> &[f64] {
        &self.dists[i * self.k..(i + 1) * self.k]
    }

    /// Fraction of exact neighbor ids recovered by `self`.
    pub fn recall_against(&self, exact: &NeighborIndex) -> f64 {
        assert_eq!(self.len(), exact.len());
        let mut hits = 0usize;
        for i in 0..self.len() {
            let mine = self.neighbors(i);
            hits += exact.neighbors(i).iter().filter(|j| mine.contains(j)).count();
        }
        hits as f64 / (exact.len() * exact.k()) as f64
    }
}

pub(crate) fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("k must satisfy 1 <= k < N, got k={k}, N={n}")));
    }
    Ok(())
}

/// Orders `(distance, id)` pairs by distance, then by id.
pub(crate) fn cmp_candidate(a: &(f64, usize), b: &(f64, usize)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}
