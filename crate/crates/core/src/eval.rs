//! Embedding quality metrics.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::{sq_euclidean, PointCloud};
use crate::embed::Embedding;
use crate::neighbors::knn_exact;
use crate::{par, Error, Result};

/// Class counts above this switch the centroid metric to sampling.
pub const CTE_EXHAUSTIVE_MAX_CLASSES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    pub n_triplets: usize,
    pub repeats: usize,
    pub knn_k: usize,
    pub folds: usize,
    pub connectivity_k: usize,
    pub seed: u64,
}

impl MetricParams {
    /// Defaults for an `n`-point dataset.
    pub fn for_size(n: usize, seed: u64) -> Self {
        Self {
            n_triplets: 5 * n,
            repeats: 5,
            knn_k: 5,
            folds: 5,
            connectivity_k: 10,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rte: f64,
    pub rte_stddev: f64,
    pub cte: Option<f64>,
    pub knn_acc: Option<f64>,
    pub components: usize,
    pub largest_fraction: f64,
    pub params: MetricParams,
}

fn check_rows(cloud: &PointCloud, emb: &Embedding) -> Result<()> {
    if cloud.len() != emb.len() {
        return Err(Error::Shape(format!(
            "cloud has {} rows, embedding has {}",
            cloud.len(),
            emb.len()
        )));
    }
    Ok(())
}

/// Whether the pair orderings `(i,j)` vs `(i,k)` agree; exact ties agree.
fn agrees(hi_ij: f64, hi_ik: f64, lo_ij: f64, lo_ik: f64) -> bool {
    if hi_ij == hi_ik || lo_ij == lo_ik {
        return true;
    }
    (hi_ij < hi_ik) == (lo_ij < lo_ik)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Fraction of random triplets whose distance ordering survives the
/// embedding; mean and sample standard deviation over `repeats` draws.
pub fn random_triplet_accuracy(
    cloud: &PointCloud,
    emb: &Embedding,
    n_triplets: usize,
    repeats: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check_rows(cloud, emb)?;
    let n = cloud.len();
    if n < 3 {
        return Err(Error::invalid(format!("triplet accuracy needs N >= 3, got {n}")));
    }
    if n_triplets == 0 || repeats == 0 {
        return Err(Error::invalid("n_triplets and repeats must be >= 1"));
    }
    let scores = par::map_range(repeats, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let mut hits = 0usize;
        for _ in 0..n_triplets {
            let i = rng.random_range(0..n);
            let j = loop {
                let j = rng.random_range(0..n);
                if j != i {
                    break j;
                }
            };
            let k = loop {
                let k = rng.random_range(0..n);
                if k != i && k != j {
                    break k;
                }
            };
            let ok = agrees(
                sq_euclidean(cloud.row(i), cloud.row(j)),
                sq_euclidean(cloud.row(i), cloud.row(k)),
                sq_euclidean(emb.row(i), emb.row(j)),
                sq_euclidean(emb.row(i), emb.row(k)),
            );
            hits += usize::from(ok);
        }
        hits as f64 / n_triplets as f64
    });
    Ok(mean_std(&scores))
}

fn centroids(rows: impl Fn(usize) -> Vec<f64>, labels: &[i64], classes: &[i64]) -> Vec<Vec<f64>> {
    let slot: BTreeMap<i64, usize> = classes.iter().enumerate().map(|(s, &c)| (c, s)).collect();
    let mut sums: Vec<Vec<f64>> = Vec::new();
    let mut counts = vec![0usize; classes.len()];
    for (i, l) in labels.iter().enumerate() {
        let s = slot[l];
        let x = rows(i);
        if sums.is_empty() {
            sums = vec![vec![0.0; x.len()]; classes.len()];
        }
        for (acc, v) in sums[s].iter_mut().zip(&x) {
            *acc += v;
        }
        counts[s] += 1;
    }
    sums.into_iter()
        .zip(counts)
        .map(|(v, c)| v.into_iter().map(|x| x / c as f64).collect())
        .collect()
}

/// Distance-order agreement over triplets of class centroids. All ordered
/// triplets are scored when there are at most 30 classes, otherwise
/// `10 c^2` are sampled.
pub fn centroid_triplet_accuracy(cloud: &PointCloud, emb: &Embedding, seed: u64) -> Result<f64> {
    check_rows(cloud, emb)?;
    let labels = cloud
        .labels()
        .ok_or_else(|| Error::invalid("centroid triplet accuracy needs labels"))?;
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let c = classes.len();
    if c < 3 {
        return Err(Error::invalid(format!("centroid triplet accuracy needs >= 3 classes, got {c}")));
    }
    let hi = centroids(|i| cloud.row(i).to_vec(), labels, &classes);
    let lo = centroids(|i| emb.row(i).to_vec(), labels, &classes);
    let score = |a: usize, b: usize, x: usize| {
        agrees(
            sq_euclidean(&hi[a], &hi[b]),
            sq_euclidean(&hi[a], &hi[x]),
            sq_euclidean(&lo[a], &lo[b]),
            sq_euclidean(&lo[a], &lo[x]),
        )
    };
    let (mut hits, mut total) = (0usize, 0usize);
    if c <= CTE_EXHAUSTIVE_MAX_CLASSES {
        for a in 0..c {
            for b in 0..c {
                for x in 0..c {
                    if a != b && a != x && b != x {
                        hits += usize::from(score(a, b, x));
                        total += 1;
                    }
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..10 * c * c {
            let a = rng.random_range(0..c);
            let b = loop {
                let b = rng.random_range(0..c);
                if b != a {
                    break b;
                }
            };
            let x = loop {
                let x = rng.random_range(0..c);
                if x != a && x != b {
                    break x;
                }
            };
            hits += usize::from(score(a, b, x));
            total += 1;
        }
    }
    Ok(hits as f64 / total as f64)
}

/// Stratified `folds`-fold cross-validated majority-vote kNN accuracy in the
/// embedding. Vote ties go to the smallest label; `k` is capped at the
/// training-fold size.
pub fn knn_classifier_accuracy(emb: &Embedding, labels: &[i64], k: usize, folds: usize, seed: u64) -> Result<f64> {
    let n = emb.len();
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} points", labels.len())));
    }
    if k == 0 || folds < 2 {
        return Err(Error::invalid(format!("need k >= 1 and folds >= 2, got k={k}, folds={folds}")));
    }
    let mut by_class: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut fold_of = vec![0usize; n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (class, members) in by_class.iter_mut() {
        if members.len() < folds {
            return Err(Error::invalid(format!(
                "class {class} has {} members, fewer than {folds} folds",
                members.len()
            )));
        }
        rand::seq::SliceRandom::shuffle(members.as_mut_slice(), &mut rng);
        for (pos, &i) in members.iter().enumerate() {
            fold_of[i] = pos % folds;
        }
    }
    let correct = par::map_range(n, |i| {
        let mut cand: Vec<(f64, usize)> = (0..n)
            .filter(|&j| fold_of[j] != fold_of[i])
            .map(|j| (sq_euclidean(emb.row(i), emb.row(j)), j))
            .collect();
        let kk = k.min(cand.len());
        cand.sort_unstable_by(crate::neighbors::cmp_candidate);
        let mut votes: BTreeMap<i64, usize> = BTreeMap::new();
        for &(_, j) in &cand[..kk] {
            *votes.entry(labels[j]).or_default() += 1;
        }
        // first maximum in label order: ties go to the smallest label
        let mut best = (i64::MAX, 0usize);
        for (&label, &count) in &votes {
            if count > best.1 {
                best = (label, count);
            }
        }
        best.0 == labels[i]
    });
    Ok(correct.iter().filter(|&&c| c).count() as f64 / n as f64)
}

/// Component count and largest-component fraction of the union-symmetrized
/// kNN graph on the embedding coordinates.
pub fn connectivity_diagnostic(emb: &Embedding, k: usize) -> Result<(usize, f64)> {
    let n = emb.len();
    if k == 0 {
        return Err(Error::invalid("connectivity k must be >= 1"));
    }
    if n == 1 {
        return Ok((1, 1.0));
    }
    let cloud = PointCloud::new(emb.coords.clone(), None, "embedding")?;
    let index = knn_exact(&cloud, k.min(n - 1))?;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for &j in index.neighbors(i) {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for i in 0..n {
        *sizes.entry(find(&mut parent, i)).or_default() += 1;
    }
    let largest = sizes.values().copied().max().unwrap_or(0);
    Ok((sizes.len(), largest as f64 / n as f64))
}

/// Computes every applicable metric. Label-dependent metrics are `None`
/// when the cloud is unlabelled or has too few classes.
pub fn evaluate(cloud: &PointCloud, emb: &Embedding, params: MetricParams) -> Result<MetricsReport> {
    let (rte, rte_stddev) = random_triplet_accuracy(cloud, emb, params.n_triplets, params.repeats, params.seed)?;
    let (cte, knn_acc) = match cloud.labels() {
        Some(labels) => {
            let n_classes = {
                let mut c = labels.to_vec();
                c.sort_unstable();
                c.dedup();
                c.len()
            };
            let cte = if n_classes >= 3 {
                Some(centroid_triplet_accuracy(cloud, emb, params.seed)?)
            } else {
                None
            };
            let knn = knn_classifier_accuracy(emb, labels, params.knn_k, params.folds, params.seed).ok();
            (cte, knn)
        }
        None => (None, None),
    };
    let (components, largest_fraction) = connectivity_diagnostic(emb, params.connectivity_k)?;
    Ok(MetricsReport {
        rte,
        rte_stddev,
        cte,
        knn_acc,
        components,
        largest_fraction,
        params,
    })
}

/// Wraps raw coordinates for metric evaluation.
pub fn embedding_from(coords: Array2<f64>) -> Result<Embedding> {
    Embedding::new(coords, 0)
}
