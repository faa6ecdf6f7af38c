use super::{check_k, cmp_candidate, NeighborIndex};
use crate::dataio::{sq_euclidean, PointCloud};
use crate::{par, Result};

/// Brute-force Euclidean kNN. Ties are broken by the lower index.
pub fn knn_exact(cloud: &PointCloud, k: usize) -> Result<NeighborIndex> {
    let n = cloud.len();
    check_k(n, k)?;
    let rows = par::map_range(n, |i| {
        let xi = cloud.row(i);
        let mut cand: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (sq_euclidean(xi, cloud.row(j)), j))
            .collect();
        if k < cand.len() {
            cand.select_nth_unstable_by(k - 1, cmp_candidate);
            cand.truncate(k);
        }
        cand.sort_unstable_by(cmp_candidate);
        cand
    });
    let mut ids = Vec::with_capacity(n * k);
    let mut dists = Vec::with_capacity(n * k);
    for row in rows {
        for (d2, j) in row {
            ids.push(j);
            dists.push(d2.sqrt());
        }
    }
    NeighborIndex::from_parts(k, ids, dists)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(rows: &[&[f64]]) -> PointCloud {
        let d = rows[0].len();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        PointCloud::new(Array2::from_shape_vec((rows.len(), d), flat).unwrap(), None, "t").unwrap()
    }

    #[test]
    fn collinear() {
        let pc = cloud(&[&[0.0], &[1.0], &[3.0]]);
        let idx = knn_exact(&pc, 1).unwrap();
        assert_eq!(
            (0..3).map(|i| idx.neighbors(i)[0]).collect::<Vec<_>>(),
            vec![1, 0, 1]
        );
    }

    #[test]
    fn k_two_of_three() {
        let pc = cloud(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 2.0]]);
        let idx = knn_exact(&pc, 2).unwrap();
        for i in 0..3 {
            let mut s = idx.neighbors(i).to_vec();
            s.sort();
            let want: Vec<usize> = (0..3).filter(|&j| j != i).collect();
            assert_eq!(s, want);
        }
    }

    #[test]
    fn rejects_k_ge_n() {
        let pc = cloud(&[&[0.0], &[1.0], &[3.0]]);
        assert!(knn_exact(&pc, 3).is_err());
        assert!(knn_exact(&pc, 0).is_err());
    }

    #[test]
    fn ties_break_by_index() {
        let pc = cloud(&[&[0.0], &[1.0], &[-1.0], &[2.0]]);
        let idx = knn_exact(&pc, 2).unwrap();
        assert_eq!(idx.neighbors(0), &[1, 2]);
    }

    #[test]
    fn matches_full_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100;
        let flat: Vec<f64> = (0..n * 5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let pc = PointCloud::new(Array2::from_shape_vec((n, 5), flat).unwrap(), None, "r").unwrap();
        let idx = knn_exact(&pc, 10).unwrap();
        for i in 0..n {
            // oracle: full O(N^2) scan, stable sort on distance
            let mut all: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (pc.dist(i, j), j))
                .collect();
            all.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let want: Vec<usize> = all[..10].iter().map(|p| p.1).collect();
            assert_eq!(idx.neighbors(i), &want[..]);
            for (d, (wd, _)) in idx.distances(i).iter().zip(&all[..10]) {
                assert!((d - wd).abs() < 1e-12);
            }
        }
    }
}
