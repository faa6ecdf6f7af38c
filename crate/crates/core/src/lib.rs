//! Curvature-rectified UMAP.
//!
//! The pipeline builds a UMAP fuzzy neighbor graph, measures Ollivier-Ricci
//! curvature on every edge through optimal transport between lazy random-walk
//! measures, gates negative-curvature edges by the Jaccard overlap of their
//! endpoints' kNN sets, and lays out the reweighted graph with the usual
//! cross-entropy SGD.
//!
//! Per-point and per-edge work is data-parallel. With the default `parallel`
//! feature the maps run on rayon; without it they run sequentially. Both
//! paths produce bit-identical results because every item is computed
//! independently and collected in input order.

pub mod curvature;
pub mod dataio;
pub mod embed;
mod error;
pub mod eval;
pub mod neighbors;
pub mod par;
pub mod pipeline;
pub mod rectify;

pub use curvature::{edge_curvatures, CurvatureConfig, EdgeCurvature, LocalMeasure, Solver};
pub use dataio::PointCloud;
pub use embed::{Embedding, LayoutConfig};
pub use error::{Error, Result};
pub use eval::MetricsReport;
pub use neighbors::{FuzzyGraph, NeighborIndex};
pub use rectify::{Branch, RectifierConfig};
