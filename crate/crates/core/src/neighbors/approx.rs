//! Random-projection forest seeding followed by neighbor-descent refinement.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_k, cmp_candidate, knn_exact, NeighborIndex};
use crate::dataio::{sq_euclidean, PointCloud};
use crate::{par, Result};

/// Clouds at or below this size are searched exactly.
pub const EXACT_FALLBACK_MAX_N: usize = 512;

#[derive(Debug, Clone, Copy)]
pub struct ApproxParams {
    pub n_trees: usize,
    pub leaf_size: usize,
    pub max_iters: usize,
    /// Stop once fewer than `delta * N * k` list entries change in an iteration.
    pub delta: f64,
}

impl Default for ApproxParams {
    fn default() -> Self {
        Self {
            n_trees: 8,
            leaf_size: 32,
            max_iters: 10,
            delta: 0.001,
        }
    }
}

/// Approximate kNN. Deterministic for a fixed `seed`.
pub fn knn_approx(cloud: &PointCloud, k: usize, seed: u64) -> Result<NeighborIndex> {
    knn_approx_with(cloud, k, seed, ApproxParams::default())
}

pub fn knn_approx_with(cloud: &PointCloud, k: usize, seed: u64, params: ApproxParams) -> Result<NeighborIndex> {
    let n = cloud.len();
    check_k(n, k)?;
    if n <= EXACT_FALLBACK_MAX_N {
        return knn_exact(cloud, k);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let leaf_size = params.leaf_size.max(k + 1);

    let mut lists: Vec<Vec<(f64, usize)>> = vec![Vec::with_capacity(k + 1); n];
    for _ in 0..params.n_trees {
        let mut leaves = Vec::new();
        let all: Vec<usize> = (0..n).collect();
        split(cloud, all, leaf_size, &mut rng, &mut leaves);
        for leaf in &leaves {
            for &i in leaf {
                for &j in leaf {
                    if i != j {
                        insert(&mut lists[i], (sq_euclidean(cloud.row(i), cloud.row(j)), j), k);
                    }
                }
            }
        }
    }
    // a leaf can be smaller than k+1 when a split is lopsided; pad with random points
    for (i, list) in lists.iter_mut().enumerate() {
        while list.len() < k {
            let j = rng.random_range(0..n);
            if j != i {
                insert(list, (sq_euclidean(cloud.row(i), cloud.row(j)), j), k);
            }
        }
    }

    for _ in 0..params.max_iters {
        let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, list) in lists.iter().enumerate() {
            for &(_, j) in list {
                reverse[j].push(i);
            }
        }
        let snapshot = &lists;
        let updated: Vec<(Vec<(f64, usize)>, usize)> = par::map_range(n, |i| {
            let mut list = snapshot[i].clone();
            let mut changes = 0;
            let local: Vec<usize> = snapshot[i]
                .iter()
                .map(|&(_, j)| j)
                .chain(reverse[i].iter().copied())
                .collect();
            let mut cands: Vec<usize> = Vec::new();
            for &j in &local {
                cands.extend(snapshot[j].iter().map(|&(_, c)| c));
                cands.extend(reverse[j].iter().copied());
            }
            cands.sort_unstable();
            cands.dedup();
            for c in cands {
                if c != i && insert(&mut list, (sq_euclidean(cloud.row(i), cloud.row(c)), c), k) {
                    changes += 1;
                }
            }
            (list, changes)
        });
        let mut total = 0;
        lists = updated
            .into_iter()
            .map(|(l, c)| {
                total += c;
                l
            })
            .collect();
        if (total as f64) < params.delta * (n * k) as f64 {
            break;
        }
    }

    let mut ids = Vec::with_capacity(n * k);
    let mut dists = Vec::with_capacity(n * k);
    for list in lists {
        for (d2, j) in list {
            ids.push(j);
            dists.push(d2.sqrt());
        }
    }
    NeighborIndex::from_parts(k, ids, dists)
}

/// Inserts into a sorted bounded list. Returns whether the list changed.
fn insert(list: &mut Vec<(f64, usize)>, cand: (f64, usize), k: usize) -> bool {
    if list.iter().any(|&(_, j)| j == cand.1) {
        return false;
    }
    if list.len() == k && cmp_candidate(&cand, &list[k - 1]).is_ge() {
        return false;
    }
    let pos = list.partition_point(|e| cmp_candidate(e, &cand).is_lt());
    list.insert(pos, cand);
    list.truncate(k);
    true
}

fn split(cloud: &PointCloud, idx: Vec<usize>, leaf_size: usize, rng: &mut ChaCha8Rng, leaves: &mut Vec<Vec<usize>>) {
    if idx.len() <= leaf_size {
        leaves.push(idx);
        return;
    }
    let a = idx[rng.random_range(0..idx.len())];
    let mut b = idx[rng.random_range(0..idx.len())];
    for _ in 0..8 {
        if b != a {
            break;
        }
        b = idx[rng.random_range(0..idx.len())];
    }
    let (pa, pb) = (cloud.row(a), cloud.row(b));
    let normal: Vec<f64> = pa.iter().zip(pb).map(|(x, y)| x - y).collect();
    let offset: f64 = normal
        .iter()
        .zip(pa.iter().zip(pb))
        .map(|(nv, (x, y))| nv * 0.5 * (x + y))
        .sum();
    let (mut left, mut right): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| {
        let proj: f64 = cloud.row(i).iter().zip(&normal).map(|(x, nv)| x * nv).sum();
        proj < offset
    });
    if left.is_empty() || right.is_empty() {
        let mut all = idx;
        all.shuffle(rng);
        right = all.split_off(all.len() / 2);
        left = all;
    }
    split(cloud, left, leaf_size, rng, leaves);
    split(cloud, right, leaf_size, rng, leaves);
}
