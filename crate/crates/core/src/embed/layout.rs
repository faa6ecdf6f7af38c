//! Negative-sampling SGD on the fuzzy cross-entropy.
//!
//! Each edge is sampled once every `max_w / w` epochs. A sampled edge pulls
//! its endpoints together along the gradient of `-log psi(d)` and triggers
//! `negative_sample_rate` repulsive updates of the head from uniformly drawn
//! points along the gradient of `-log(1 - psi(d))`, where
//! `psi(d) = 1 / (1 + a d^{2b})`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{fit_ab, Embedding, LayoutConfig};
use crate::dataio::sq_euclidean;
use crate::neighbors::FuzzyGraph;
use crate::{Error, Result};

/// Per-coordinate bound on a single gradient step.
pub const CLIP: f64 = 4.0;
/// Squared distances below this are floored in repulsive updates.
const MIN_REPULSE_SQ: f64 = 1e-3;

/// `-log psi` for the pair `(yi, yj)`.
pub fn attractive_loss(yi: &[f64], yj: &[f64], a: f64, b: f64) -> f64 {
    (1.0 + a * sq_euclidean(yi, yj).powf(b)).ln()
}

/// `-log(1 - psi)` for the pair `(yi, yj)`.
pub fn repulsive_loss(yi: &[f64], yj: &[f64], a: f64, b: f64) -> f64 {
    let s = sq_euclidean(yi, yj);
    let p = a * s.powf(b);
    (1.0 + p).ln() - p.ln()
}

fn attractive_coeff(dist_sq: f64, a: f64, b: f64) -> f64 {
    if dist_sq <= 0.0 {
        return 0.0;
    }
    2.0 * a * b * dist_sq.powf(b - 1.0) / (1.0 + a * dist_sq.powf(b))
}

fn repulsive_coeff(dist_sq: f64, a: f64, b: f64) -> f64 {
    -2.0 * b / (dist_sq * (1.0 + a * dist_sq.powf(b)))
}

/// Gradient of [`attractive_loss`] with respect to `yi`.
pub fn attractive_gradient(yi: &[f64], yj: &[f64], a: f64, b: f64) -> Vec<f64> {
    let c = attractive_coeff(sq_euclidean(yi, yj), a, b);
    yi.iter().zip(yj).map(|(x, y)| c * (x - y)).collect()
}

/// Gradient of [`repulsive_loss`] with respect to `yi`.
pub fn repulsive_gradient(yi: &[f64], yj: &[f64], a: f64, b: f64) -> Vec<f64> {
    let c = repulsive_coeff(sq_euclidean(yi, yj), a, b);
    yi.iter().zip(yj).map(|(x, y)| c * (x - y)).collect()
}

/// Sampling period of each weight in epochs; `None` for weights too small
/// to be sampled within `n_epochs`.
pub fn epochs_per_sample(weights: &[f64], n_epochs: usize) -> Vec<Option<f64>> {
    let max_w = weights.iter().copied().fold(0.0f64, f64::max);
    weights
        .iter()
        .map(|&w| {
            if max_w <= 0.0 || w < max_w / n_epochs as f64 {
                None
            } else {
                Some(max_w / w)
            }
        })
        .collect()
}

fn step(coords: &mut [f64], d: usize, i: usize, j: usize, coeff: f64, lr: f64, move_other: bool) {
    for c in 0..d {
        let diff = coords[i * d + c] - coords[j * d + c];
        // descend: y_i -= lr * grad
        let g = (-coeff * diff).clamp(-CLIP, CLIP);
        coords[i * d + c] += g * lr;
        if move_other {
            coords[j * d + c] -= g * lr;
        }
    }
}

/// One attractive update of the pair `(head, tail)`; both endpoints move.
pub(crate) fn attract(coords: &mut [f64], d: usize, head: usize, tail: usize, a: f64, b: f64, lr: f64) {
    let s = sq_euclidean(&coords[head * d..(head + 1) * d], &coords[tail * d..(tail + 1) * d]);
    step(coords, d, head, tail, attractive_coeff(s, a, b), lr, true);
}

/// One repulsive update of `head` away from `other`.
pub(crate) fn repel(coords: &mut [f64], d: usize, head: usize, other: usize, a: f64, b: f64, lr: f64) {
    let s = sq_euclidean(&coords[head * d..(head + 1) * d], &coords[other * d..(other + 1) * d]);
    if s > 0.0 {
        step(coords, d, head, other, repulsive_coeff(s.max(MIN_REPULSE_SQ), a, b), lr, false);
    } else {
        for c in 0..d {
            coords[head * d + c] += CLIP * lr;
        }
    }
}

/// Deterministic edge sampler: an edge with period `p` fires at epochs
/// `p, 2p, ...`, counting epochs from 1.
#[derive(Debug, Clone)]
pub struct EdgeSchedule {
    period: Vec<Option<f64>>,
    next: Vec<f64>,
}

impl EdgeSchedule {
    pub fn new(weights: &[f64], n_epochs: usize) -> Self {
        let period = epochs_per_sample(weights, n_epochs);
        let next = period.iter().map(|p| p.unwrap_or(f64::INFINITY)).collect();
        Self { period, next }
    }

    /// Whether edge `e` is due at epoch `now`; advances its clock if so.
    pub fn fire(&mut self, e: usize, now: f64) -> bool {
        if self.next[e] > now {
            return false;
        }
        self.next[e] += self.period[e].expect("due edges have a period");
        true
    }
}

fn row_finite(coords: &[f64], d: usize, i: usize) -> bool {
    coords[i * d..(i + 1) * d].iter().all(|v| v.is_finite())
}

/// Runs the layout. Deterministic for a fixed `config.seed`.
pub fn optimize(graph: &FuzzyGraph, init: &Embedding, config: &LayoutConfig) -> Result<Embedding> {
    config.validate()?;
    if graph.n() != init.len() {
        return Err(Error::Shape(format!(
            "graph has {} nodes, initial embedding has {} rows",
            graph.n(),
            init.len()
        )));
    }
    let (a, b) = fit_ab(config.min_dist, config.spread);
    let n = graph.n();
    let d = init.dim();
    let mut coords: Vec<f64> = init.coords.iter().copied().collect();

    // both orientations of every undirected edge, as in a symmetric COO matrix
    let mut heads = Vec::with_capacity(2 * graph.n_edges());
    let mut tails = Vec::with_capacity(2 * graph.n_edges());
    let mut weights = Vec::with_capacity(2 * graph.n_edges());
    for &(i, j, w) in graph.edges() {
        heads.extend([i, j]);
        tails.extend([j, i]);
        weights.extend([w, w]);
    }
    let mut schedule = EdgeSchedule::new(&weights, config.n_epochs);
    let neg_rate = config.negative_sample_rate as f64;
    let neg_period: Vec<f64> = schedule
        .period
        .iter()
        .map(|p| match p {
            Some(p) if neg_rate > 0.0 => p / neg_rate,
            _ => f64::INFINITY,
        })
        .collect();
    let mut next_negative = neg_period.clone();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for epoch in 0..config.n_epochs {
        let lr = config.learning_rate * (1.0 - epoch as f64 / config.n_epochs as f64);
        let now = (epoch + 1) as f64;
        for e in 0..heads.len() {
            if !schedule.fire(e, now) {
                continue;
            }
            let (h, t) = (heads[e], tails[e]);
            attract(&mut coords, d, h, t, a, b, lr);
            if !row_finite(&coords, d, h) || !row_finite(&coords, d, t) {
                return Err(Error::NonFinite { epoch, head: h, tail: t });
            }

            if neg_period[e].is_finite() {
                let n_neg = ((now - next_negative[e]) / neg_period[e]).floor().max(0.0) as usize;
                for _ in 0..n_neg {
                    let other = rng.random_range(0..n);
                    if other == h {
                        continue;
                    }
                    repel(&mut coords, d, h, other, a, b, lr);
                    if !row_finite(&coords, d, h) {
                        return Err(Error::NonFinite { epoch, head: h, tail: other });
                    }
                }
                next_negative[e] += n_neg as f64 * neg_period[e];
            }
        }
    }
    let coords = ndarray::Array2::from_shape_vec((n, d), coords).expect("n x d");
    Ok(Embedding {
        coords,
        seed: config.seed,
        epochs_run: config.n_epochs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    #[test]
    fn pure_attraction_contracts() {
        let g = FuzzyGraph::from_edges(2, [(0, 1, 1.0)]).unwrap();
        let mut emb = Embedding::new(array![[0.0, 0.0], [10.0, 0.0]], 0).unwrap();
        let cfg = LayoutConfig {
            n_epochs: 1,
            negative_sample_rate: 0,
            ..Default::default()
        };
        let mut last = 10.0;
        for _ in 0..6 {
            emb = optimize(&g, &emb, &cfg).unwrap();
            let d = sq_euclidean(emb.row(0), emb.row(1)).sqrt();
            assert!(d < last, "{d} >= {last}");
            last = d;
        }
    }

    #[test]
    fn pure_repulsion_separates() {
        let (a, b) = fit_ab(0.1, 1.0);
        let mut coords = vec![0.0, 0.0, 0.5, 0.1];
        let mut last = sq_euclidean(&coords[0..2], &coords[2..4]);
        for _ in 0..50 {
            repel(&mut coords, 2, 0, 1, a, b, 0.5);
            repel(&mut coords, 2, 1, 0, a, b, 0.5);
            let now = sq_euclidean(&coords[0..2], &coords[2..4]);
            assert!(now >= last);
            last = now;
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (a, b) = fit_ab(0.1, 1.0);
        for _ in 0..100 {
            let yi: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
            let yj: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
            let ga = attractive_gradient(&yi, &yj, a, b);
            let gr = repulsive_gradient(&yi, &yj, a, b);
            for c in 0..2 {
                let h = 1e-6;
                let mut p = yi.clone();
                let mut m = yi.clone();
                p[c] += h;
                m[c] -= h;
                let fa = (attractive_loss(&p, &yj, a, b) - attractive_loss(&m, &yj, a, b)) / (2.0 * h);
                let fr = (repulsive_loss(&p, &yj, a, b) - repulsive_loss(&m, &yj, a, b)) / (2.0 * h);
                assert!((fa - ga[c]).abs() <= 1e-4 * fa.abs().max(1e-3));
                assert!((fr - gr[c]).abs() <= 1e-4 * fr.abs().max(1e-3));
            }
        }
    }

    #[test]
    fn gradients_are_translation_invariant() {
        let (a, b) = fit_ab(0.1, 1.0);
        let yi = [0.3, -1.2];
        let yj = [1.1, 0.4];
        let shift = [7.0, -3.0];
        let si: Vec<f64> = yi.iter().zip(&shift).map(|(x, s)| x + s).collect();
        let sj: Vec<f64> = yj.iter().zip(&shift).map(|(x, s)| x + s).collect();
        let g1 = attractive_gradient(&yi, &yj, a, b);
        let g2 = attractive_gradient(&si, &sj, a, b);
        for (x, y) in g1.iter().zip(&g2) {
            assert!((x - y).abs() < 1e-12);
        }
        let g1 = repulsive_gradient(&yi, &yj, a, b);
        let g2 = repulsive_gradient(&si, &sj, a, b);
        for (x, y) in g1.iter().zip(&g2) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_periods() {
        let p = epochs_per_sample(&[1.0, 0.5, 0.001], 200);
        assert_eq!(p, vec![Some(1.0), Some(2.0), None]);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let g = FuzzyGraph::from_edges(3, [(0, 1, 1.0)]).unwrap();
        let emb = Embedding::new(array![[0.0, 0.0], [1.0, 0.0]], 0).unwrap();
        assert!(optimize(&g, &emb, &LayoutConfig::default()).is_err());
    }
}
