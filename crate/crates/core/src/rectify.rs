//! Curvature- and overlap-gated edge reweighting.
//!
//! Negative-curvature edges whose endpoints share enough kNN neighbors are
//! treated as manifold skeleton and boosted towards 1. Negative-curvature
//! edges with little overlap are treated as noise bridges and cut to a tiny
//! fraction of their weight. Non-negative curvature edges are damped in
//! proportion to how positively curved they are.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::curvature::EdgeCurvature;
use crate::neighbors::{FuzzyGraph, NeighborIndex};
use crate::{par, Error, Result};

pub const STRENGTH_MIN: f64 = 0.5;
pub const STRENGTH_MAX: f64 = 10.0;
pub const STRENGTH_BOOST: f64 = 1.5;
pub const STRENGTH_DAMP: f64 = 0.8;
/// Stabilizer in the dynamic-strength denominator.
pub const KAPPA_TYP_EPS: f64 = 1e-8;
/// Percentile of `|kappa|` over negative edges used as the typical curvature.
pub const KAPPA_TYP_PERCENTILE: f64 = 75.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectifierConfig {
    /// Jaccard threshold; negative edges with overlap `<= delta` are cut.
    pub delta: f64,
    /// Multiplier applied to cut (noise) edges.
    pub eps_floor: f64,
    /// Fixed strength, and the starting point of the dynamic estimate.
    pub s_base: f64,
    /// Damping of positive-curvature edges.
    pub beta: f64,
    pub dynamic_strength: bool,
    /// tanh value the typical negative curvature should reach.
    pub target_tanh: f64,
    /// Negative-edge ratios below/above which the estimate is boosted/damped.
    pub ratio_low: f64,
    pub ratio_high: f64,
}

impl Default for RectifierConfig {
    fn default() -> Self {
        Self {
            delta: 0.1,
            eps_floor: 1e-5,
            s_base: 2.0,
            beta: 0.9,
            dynamic_strength: false,
            target_tanh: 0.9,
            ratio_low: 0.05,
            ratio_high: 0.30,
        }
    }
}

impl RectifierConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(msg));
        if !(0.0..=1.0).contains(&self.delta) {
            return bad(format!("delta must lie in [0, 1], got {}", self.delta));
        }
        if !(self.eps_floor > 0.0 && self.eps_floor < 1.0) {
            return bad(format!("eps_floor must lie in (0, 1), got {}", self.eps_floor));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad(format!("beta must lie in [0, 1], got {}", self.beta));
        }
        if !(self.target_tanh > 0.0 && self.target_tanh < 1.0) {
            return bad(format!("target_tanh must lie in (0, 1), got {}", self.target_tanh));
        }
        if !(self.s_base >= 0.0 && self.s_base.is_finite()) {
            return bad(format!("strength must be finite and >= 0, got {}", self.s_base));
        }
        if self.ratio_low.is_nan() || self.ratio_high.is_nan() || self.ratio_low > self.ratio_high {
            return bad(format!("ratio_low {} exceeds ratio_high {}", self.ratio_low, self.ratio_high));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Negative curvature, high overlap: boosted.
    Skeleton,
    /// Non-negative curvature: damped.
    IntraCluster,
    /// Negative curvature, low overlap: cut.
    Noise,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Skeleton => "skeleton",
            Branch::IntraCluster => "intra_cluster",
            Branch::Noise => "noise",
        }
    }
}

/// `|N(i) ∩ N(j)| / |N(i) ∪ N(j)|` over the directed kNN sets.
pub fn jaccard(index: &NeighborIndex, i: usize, j: usize) -> f64 {
    let mut a = index.neighbors(i).to_vec();
    let mut b = index.neighbors(j).to_vec();
    a.sort_unstable();
    b.sort_unstable();
    set_jaccard(&a, &b)
}

/// Jaccard overlap of two sorted, duplicate-free id lists.
pub(crate) fn set_jaccard(a: &[usize], b: &[usize]) -> f64 {
    let (mut x, mut y, mut inter) = (0, 0, 0);
    while x < a.len() && y < b.len() {
        match a[x].cmp(&b[y]) {
            std::cmp::Ordering::Less => x += 1,
            std::cmp::Ordering::Greater => y += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                x += 1;
                y += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrengthEstimate {
    pub strength: f64,
    /// 75th percentile of `|kappa|` over negative edges, when any exist.
    pub kappa_typ: Option<f64>,
    /// Fraction of edges with negative curvature.
    pub negative_ratio: f64,
    /// No negative edges were found; `s_base` was used.
    pub fallback: bool,
}

/// Chooses `S` so that `tanh(S * kappa_typ) ≈ target_tanh`, clipped to
/// `[0.5, 10]`, then scaled by 1.5 when negative edges are rare
/// (`ratio < ratio_low`) or 0.8 when they are abundant (`ratio > ratio_high`)
/// and clipped again.
pub fn dynamic_strength(curvatures: &[EdgeCurvature], config: &RectifierConfig) -> StrengthEstimate {
    let neg: Vec<f64> = curvatures
        .iter()
        .filter(|c| c.kappa < 0.0)
        .map(|c| c.kappa.abs())
        .collect();
    let ratio = if curvatures.is_empty() {
        0.0
    } else {
        neg.len() as f64 / curvatures.len() as f64
    };
    if neg.is_empty() {
        return StrengthEstimate {
            strength: config.s_base,
            kappa_typ: None,
            negative_ratio: ratio,
            fallback: true,
        };
    }
    let kappa_typ = percentile(&neg, KAPPA_TYP_PERCENTILE);
    let raw = config.target_tanh.atanh() / (kappa_typ + KAPPA_TYP_EPS);
    let mut s = raw.clamp(STRENGTH_MIN, STRENGTH_MAX);
    if ratio < config.ratio_low {
        s *= STRENGTH_BOOST;
    } else if ratio > config.ratio_high {
        s *= STRENGTH_DAMP;
    }
    StrengthEstimate {
        strength: s.clamp(STRENGTH_MIN, STRENGTH_MAX),
        kappa_typ: Some(kappa_typ),
        negative_ratio: ratio,
        fallback: false,
    }
}

/// Strength actually used for reweighting under `config`.
pub fn resolve_strength(curvatures: &[EdgeCurvature], config: &RectifierConfig) -> StrengthEstimate {
    if config.dynamic_strength {
        dynamic_strength(curvatures, config)
    } else {
        let neg = curvatures.iter().filter(|c| c.kappa < 0.0).count();
        StrengthEstimate {
            strength: config.s_base,
            kappa_typ: None,
            negative_ratio: if curvatures.is_empty() {
                0.0
            } else {
                neg as f64 / curvatures.len() as f64
            },
            fallback: false,
        }
    }
}

/// Classifies one edge. Overlap exactly at `delta` counts as noise.
pub fn classify(kappa: f64, jaccard: f64, delta: f64) -> Branch {
    if kappa >= 0.0 {
        Branch::IntraCluster
    } else if jaccard > delta {
        Branch::Skeleton
    } else {
        Branch::Noise
    }
}

/// Rectified weight of a single edge.
pub fn rectify_weight(w: f64, kappa: f64, jaccard: f64, strength: f64, config: &RectifierConfig) -> (f64, Branch) {
    let branch = classify(kappa, jaccard, config.delta);
    let w_new = match branch {
        Branch::Skeleton => w + (1.0 - w) * (strength * kappa.abs()).tanh(),
        Branch::IntraCluster => w * (1.0 - (strength * kappa).tanh() * config.beta),
        Branch::Noise => w * config.eps_floor,
    };
    // beta = 1 with a saturated tanh would zero the edge
    (w_new.clamp(f64::MIN_POSITIVE, 1.0), branch)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub i: usize,
    pub j: usize,
    pub w: f64,
    pub kappa: f64,
    pub jaccard: f64,
    pub branch: Branch,
    pub w_new: f64,
}

#[derive(Debug, Clone)]
pub struct Rectification {
    pub graph: FuzzyGraph,
    pub records: Vec<EdgeRecord>,
    pub strength: StrengthEstimate,
}

impl Rectification {
    pub fn count(&self, branch: Branch) -> usize {
        self.records.iter().filter(|r| r.branch == branch).count()
    }

    /// Curvature list with the Jaccard overlaps filled in.
    pub fn curvatures_with_jaccard(&self, curvatures: &[EdgeCurvature]) -> Vec<EdgeCurvature> {
        curvatures
            .iter()
            .zip(&self.records)
            .map(|(c, r)| EdgeCurvature {
                jaccard: Some(r.jaccard),
                ..*c
            })
            .collect()
    }
}

/// Aligns curvature records with graph edges, in edge order.
fn align<'a>(graph: &FuzzyGraph, curvatures: &'a [EdgeCurvature]) -> Result<Vec<&'a EdgeCurvature>> {
    let in_order = curvatures.len() == graph.n_edges()
        && graph
            .edges()
            .iter()
            .zip(curvatures)
            .all(|(e, c)| (e.0, e.1) == (c.i.min(c.j), c.i.max(c.j)));
    if in_order {
        return Ok(curvatures.iter().collect());
    }
    let lookup: HashMap<(usize, usize), &EdgeCurvature> =
        curvatures.iter().map(|c| ((c.i.min(c.j), c.i.max(c.j)), c)).collect();
    graph
        .edges()
        .iter()
        .map(|&(i, j, _)| lookup.get(&(i, j)).copied().ok_or(Error::MissingCurvature(i, j)))
        .collect()
}

/// Reweights every edge of `graph`; the input graph is left untouched.
pub fn reweight(
    graph: &FuzzyGraph,
    curvatures: &[EdgeCurvature],
    index: &NeighborIndex,
    config: &RectifierConfig,
) -> Result<Rectification> {
    config.validate()?;
    if index.len() != graph.n() {
        return Err(Error::Shape(format!(
            "index has {} points, graph has {} nodes",
            index.len(),
            graph.n()
        )));
    }
    let aligned = align(graph, curvatures)?;
    let strength = resolve_strength(curvatures, config);
    let sorted_sets: Vec<Vec<usize>> = par::map_range(index.len(), |i| {
        let mut s = index.neighbors(i).to_vec();
        s.sort_unstable();
        s
    });
    let pairs: Vec<(&(usize, usize, f64), &EdgeCurvature)> = graph.edges().iter().zip(aligned).collect();
    let records = par::map_slice(&pairs, |&(&(i, j, w), c)| {
        let jac = set_jaccard(&sorted_sets[i], &sorted_sets[j]);
        let (w_new, branch) = rectify_weight(w, c.kappa, jac, strength.strength, config);
        EdgeRecord {
            i,
            j,
            w,
            kappa: c.kappa,
            jaccard: jac,
            branch,
            w_new,
        }
    });
    let weights: Vec<f64> = records.iter().map(|r| r.w_new).collect();
    Ok(Rectification {
        graph: graph.with_weights(&weights)?,
        records,
        strength,
    })
}
