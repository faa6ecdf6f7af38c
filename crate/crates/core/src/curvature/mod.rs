//! Ollivier-Ricci curvature of fuzzy-graph edges.
//!
//! For an edge `(i, j)` the curvature is `1 - W1(m_i, m_j) / |x_i - x_j|`,
//! where `m_i` is the lazy random-walk measure of `i` and `W1` is the optimal
//! transport cost under graph shortest-path ground distances.

mod ground;
mod measure;
mod sinkhorn;
mod transport;

pub use ground::{ground_costs, HOP_LIMIT};
pub use measure::{local_measure, LocalMeasure};
pub use sinkhorn::{sinkhorn, w1_sinkhorn, SinkhornOutcome};
pub use transport::{emd, w1_exact, MASS_TOLERANCE};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataio::PointCloud;
use crate::neighbors::FuzzyGraph;
use crate::{par, Error, Result};

/// Endpoints closer than this are treated as coincident.
pub const COINCIDENT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "lowercase")]
pub enum Solver {
    /// Entropic transport with `reg = reg_scale * median(ground cost)`.
    Sinkhorn {
        reg_scale: f64,
        max_iters: usize,
        tol: f64,
    },
    Exact,
}

impl Default for Solver {
    fn default() -> Self {
        Solver::Sinkhorn {
            reg_scale: 0.01,
            max_iters: 500,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureConfig {
    pub alpha: f64,
    pub solver: Solver,
}

impl Default for CurvatureConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            solver: Solver::default(),
        }
    }
}

/// Curvature record for one graph edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeCurvature {
    pub i: usize,
    pub j: usize,
    pub w1: f64,
    pub kappa: f64,
    /// Set by the rectifier.
    pub jaccard: Option<f64>,
    /// Endpoints coincide; `kappa` is pinned to 0.
    pub degenerate: bool,
    /// False only when Sinkhorn hit its iteration budget.
    pub converged: bool,
}

/// Median of the matrix entries, used to scale the entropic regularization.
pub(crate) fn median_cost(costs: &Array2<f64>) -> f64 {
    let mut v: Vec<f64> = costs.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Transport cost between the measures of `i` and `j` under the configured
/// solver. Returns `(w1, converged)`.
pub fn edge_transport(
    graph: &FuzzyGraph,
    cloud: &PointCloud,
    i: usize,
    j: usize,
    config: &CurvatureConfig,
) -> Result<(f64, bool)> {
    let mu = local_measure(graph, i, config.alpha)?.positive();
    let nu = local_measure(graph, j, config.alpha)?.positive();
    let costs = ground_costs(graph, cloud, (i, j), &mu.nodes(), &nu.nodes());
    match config.solver {
        Solver::Exact => Ok((w1_exact(&mu, &nu, &costs)?, true)),
        Solver::Sinkhorn {
            reg_scale,
            max_iters,
            tol,
        } => {
            let mut scale = median_cost(&costs);
            if scale <= 0.0 {
                scale = costs.iter().copied().fold(0.0, f64::max);
            }
            if scale <= 0.0 {
                // all ground costs vanish
                return Ok((0.0, true));
            }
            let out = w1_sinkhorn(&mu, &nu, &costs, reg_scale * scale, max_iters, tol)?;
            Ok((out.cost, out.converged))
        }
    }
}

/// Curvature of every edge, in graph edge order.
pub fn edge_curvatures(graph: &FuzzyGraph, cloud: &PointCloud, config: &CurvatureConfig) -> Result<Vec<EdgeCurvature>> {
    if graph.n() != cloud.len() {
        return Err(Error::Shape(format!(
            "graph has {} nodes but cloud has {} rows",
            graph.n(),
            cloud.len()
        )));
    }
    if graph.n_edges() == 0 {
        return Err(Error::Empty("graph has no edges".into()));
    }
    if !(0.0..=1.0).contains(&config.alpha) {
        return Err(Error::invalid(format!("alpha must lie in [0, 1], got {}", config.alpha)));
    }
    par::map_slice(graph.edges(), |&(i, j, _)| {
        let d = cloud.dist(i, j);
        if d < COINCIDENT_EPS {
            return Ok(EdgeCurvature {
                i,
                j,
                w1: 0.0,
                kappa: 0.0,
                jaccard: None,
                degenerate: true,
                converged: true,
            });
        }
        let (w1, converged) = edge_transport(graph, cloud, i, j, config)?;
        Ok(EdgeCurvature {
            i,
            j,
            w1,
            kappa: 1.0 - w1 / d,
            jaccard: None,
            degenerate: false,
            converged,
        })
    })
    .into_iter()
    .collect()
}
