use crate::neighbors::FuzzyGraph;
use crate::{Error, Result};

/// Lazy random-walk measure around a node.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMeasure {
    pub center: usize,
    /// `(node, mass)`; the center comes first, then neighbors by id.
    pub support: Vec<(usize, f64)>,
    pub alpha: f64,
}

impl LocalMeasure {
    pub fn nodes(&self) -> Vec<usize> {
        self.support.iter().map(|&(v, _)| v).collect()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.support.iter().map(|&(_, m)| m).collect()
    }

    /// Drops zero-mass entries, e.g. the center when `alpha == 0`.
    pub fn positive(&self) -> LocalMeasure {
        LocalMeasure {
            center: self.center,
            support: self.support.iter().copied().filter(|&(_, m)| m > 0.0).collect(),
            alpha: self.alpha,
        }
    }
}

/// Mass `alpha` on `node`, the rest spread over its neighbors in proportion
/// to edge weight.
pub fn local_measure(graph: &FuzzyGraph, node: usize, alpha: f64) -> Result<LocalMeasure> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let adj = graph.adjacent(node);
    if adj.is_empty() {
        return Err(Error::IsolatedNode(node));
    }
    let edges = graph.edges();
    let total: f64 = adj.iter().map(|&(_, e)| edges[e].2).sum();
    let mut support = Vec::with_capacity(adj.len() + 1);
    support.push((node, alpha));
    support.extend(
        adj.iter()
            .map(|&(v, e)| (v, (1.0 - alpha) * edges[e].2 / total)),
    );
    Ok(LocalMeasure {
        center: node,
        support,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star() -> FuzzyGraph {
        FuzzyGraph::from_edges(3, [(0, 1, 0.2), (0, 2, 0.6)]).unwrap()
    }

    #[test]
    fn alpha_one_is_point_mass() {
        let m = local_measure(&star(), 0, 1.0).unwrap();
        assert_eq!(m.positive().support, vec![(0, 1.0)]);
    }

    #[test]
    fn alpha_zero_normalizes_weights() {
        let m = local_measure(&star(), 0, 0.0).unwrap();
        assert_eq!(m.support[0], (0, 0.0));
        assert!((m.support[1].1 - 0.25).abs() < 1e-15);
        assert!((m.support[2].1 - 0.75).abs() < 1e-15);
    }

    #[test]
    fn half_lazy_single_neighbor() {
        let m = local_measure(&star(), 1, 0.5).unwrap();
        assert_eq!(m.support, vec![(1, 0.5), (0, 0.5)]);
    }

    #[test]
    fn masses_sum_to_one() {
        let g = FuzzyGraph::from_edges(5, [(0, 1, 0.3), (0, 2, 0.9), (0, 3, 0.11), (0, 4, 1.0)]).unwrap();
        for alpha in [0.0, 0.3, 0.5, 1.0] {
            let m = local_measure(&g, 0, alpha).unwrap();
            assert!((m.masses().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert_eq!(m.support[0].1, alpha);
        }
    }

    #[test]
    fn errors() {
        let g = FuzzyGraph::from_edges(4, [(0, 1, 0.5)]).unwrap();
        assert!(matches!(local_measure(&g, 3, 0.5), Err(Error::IsolatedNode(3))));
        assert!(local_measure(&g, 0, 1.5).is_err());
    }
}
