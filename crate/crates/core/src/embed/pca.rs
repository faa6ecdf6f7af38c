use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Embedding;
use crate::dataio::PointCloud;
use crate::{Error, Result};

/// Largest absolute coordinate after initialization.
pub const PCA_SCALE: f64 = 10.0;
const JITTER_SD: f64 = 1e-4;
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct PcaProjection {
    /// Centered data projected on the top components, unscaled.
    pub scores: Array2<f64>,
    /// Covariance eigenvalues, descending, one per requested component.
    pub eigenvalues: Vec<f64>,
    /// Unit component vectors as rows (`d x D`).
    pub components: Array2<f64>,
    /// Components whose eigenvalue is numerically zero.
    pub deficient: Vec<bool>,
}

/// Projects centered data on the `d` leading covariance eigenvectors. Each
/// component is signed so its largest-magnitude loading is positive.
pub fn pca_project(cloud: &PointCloud, d: usize) -> Result<PcaProjection> {
    let (n, dim) = (cloud.len(), cloud.dim());
    if d == 0 || d > dim || n < d {
        return Err(Error::invalid(format!("cannot take {d} components of a {n}x{dim} cloud")));
    }
    let mean: Vec<f64> = (0..dim)
        .map(|c| cloud.points().column(c).sum() / n as f64)
        .collect();
    let centered = DMatrix::from_fn(n, dim, |r, c| cloud.points()[[r, c]] - mean[c]);
    let cov = centered.transpose() * &centered / n as f64;
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]).then(x.cmp(&y)));
    let top = eig.eigenvalues[order[0]].max(0.0);

    let mut components = Array2::zeros((d, dim));
    let mut eigenvalues = Vec::with_capacity(d);
    let mut deficient = Vec::with_capacity(d);
    for (slot, &col) in order.iter().take(d).enumerate() {
        let v = eig.eigenvectors.column(col);
        let pivot = (0..dim)
            .max_by(|&x, &y| v[x].abs().total_cmp(&v[y].abs()).then(y.cmp(&x)))
            .expect("dim >= 1");
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for c in 0..dim {
            components[[slot, c]] = sign * v[c];
        }
        let lambda = eig.eigenvalues[col].max(0.0);
        eigenvalues.push(lambda);
        deficient.push(top <= 0.0 || lambda <= RANK_TOL * top);
    }
    let scores = Array2::from_shape_fn((n, d), |(r, s)| {
        (0..dim).map(|c| centered[(r, c)] * components[[s, c]]).sum()
    });
    Ok(PcaProjection {
        scores,
        eigenvalues,
        components,
        deficient,
    })
}

/// PCA scores rescaled so the largest absolute coordinate is [`PCA_SCALE`].
/// Numerically rank-deficient directions are zero plus small seeded jitter.
pub fn pca_init(cloud: &PointCloud, d: usize, seed: u64) -> Result<Embedding> {
    let proj = pca_project(cloud, d)?;
    let mut coords = proj.scores;
    for (s, &def) in proj.deficient.iter().enumerate() {
        if def {
            coords.column_mut(s).fill(0.0);
        }
    }
    let max_abs = coords.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_abs > 0.0 {
        coords.mapv_inplace(|v| v * PCA_SCALE / max_abs);
    }
    if proj.deficient.iter().any(|&x| x) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (s, &def) in proj.deficient.iter().enumerate() {
            if def {
                for r in 0..coords.nrows() {
                    let z: f64 = rng.sample(StandardNormal);
                    coords[[r, s]] = JITTER_SD * z;
                }
            }
        }
    }
    Embedding::new(coords, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::gen_swiss_roll;
    use ndarray::array;

    /// Cyclic Jacobi eigenvalue iteration, used as an independent oracle.
    fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
        let n = a.len();
        for _ in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i][j] * a[i][j])
                .sum();
            if off < 1e-24 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
        ev.sort_by(|x, y| y.total_cmp(x));
        ev
    }

    fn covariance(cloud: &PointCloud) -> Vec<Vec<f64>> {
        let (n, d) = (cloud.len(), cloud.dim());
        let mean: Vec<f64> = (0..d).map(|c| (0..n).map(|r| cloud.row(r)[c]).sum::<f64>() / n as f64).collect();
        let mut cov = vec![vec![0.0; d]; d];
        for r in 0..n {
            let x = cloud.row(r);
            for i in 0..d {
                for j in 0..d {
                    cov[i][j] += (x[i] - mean[i]) * (x[j] - mean[j]) / n as f64;
                }
            }
        }
        cov
    }

    #[test]
    fn axis_aligned_recovered() {
        let pts = array![[-3.0, 0.0], [3.0, 0.0], [0.0, -1.0], [0.0, 1.0]];
        let pc = PointCloud::new(pts.clone(), None, "axes").unwrap();
        let emb = pca_init(&pc, 2, 0).unwrap();
        for r in 0..4 {
            for c in 0..2 {
                let want = pts[[r, c]] * PCA_SCALE / 3.0;
                assert!((emb.coords[[r, c]].abs() - want.abs()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn projected_variance_matches_eigenvalues() {
        let pc = gen_swiss_roll(800, 0.3, 5).unwrap();
        let proj = pca_project(&pc, 2).unwrap();
        let oracle = jacobi_eigenvalues(covariance(&pc));
        let n = pc.len() as f64;
        let projected: f64 = proj.scores.iter().map(|v| v * v).sum::<f64>() / n;
        let top2: f64 = oracle[..2].iter().sum();
        assert!((projected - top2).abs() < 1e-8 * top2.max(1.0), "{projected} vs {top2}");
        let total: f64 = oracle.iter().sum();
        assert!(projected / total < 1.0);
    }

    #[test]
    fn sign_and_scale_conventions() {
        let pc = gen_swiss_roll(300, 0.0, 1).unwrap();
        let proj = pca_project(&pc, 2).unwrap();
        for s in 0..2 {
            let row = proj.components.row(s);
            let pivot = row.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            assert!(pivot > 0.0);
        }
        let emb = pca_init(&pc, 2, 1).unwrap();
        let max_abs = emb.coords.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((max_abs - PCA_SCALE).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_gets_jitter() {
        let pts = array![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]];
        let pc = PointCloud::new(pts, None, "line").unwrap();
        let a = pca_init(&pc, 2, 3).unwrap();
        let b = pca_init(&pc, 2, 3).unwrap();
        assert_eq!(a, b);
        let col: Vec<f64> = a.coords.column(1).to_vec();
        assert!(col.iter().all(|v| v.abs() < 1e-2));
        assert!(col.iter().any(|v| *v != 0.0));
    }

    #[test]
    fn preconditions() {
        let pc = gen_swiss_roll(10, 0.0, 1).unwrap();
        assert!(pca_init(&pc, 4, 0).is_err());
        assert!(pca_init(&pc, 0, 0).is_err());
    }
}
