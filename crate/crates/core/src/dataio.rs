//! Point-cloud ingestion, synthetic manifold generators and CSV export.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Number of color bins used when a generator labels points by parameter.
pub const PARAM_LABEL_BINS: usize = 10;

/// Label assigned to planted bridge points by [`gen_three_rings`].
pub const BRIDGE_LABEL: i64 = 3;

/// An `N x D` sample matrix with optional integer class ids.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Array2<f64>,
    labels: Option<Vec<i64>>,
    name: String,
}

impl PointCloud {
    pub fn new(points: Array2<f64>, labels: Option<Vec<i64>>, name: impl Into<String>) -> Result<Self> {
        let (n, d) = points.dim();
        if n == 0 || d == 0 {
            return Err(Error::Empty(format!("point cloud is {n}x{d}")));
        }
        if let Some((idx, _)) = points.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite entry at row {}, column {}",
                idx / d,
                idx % d
            )));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::Shape(format!("{} labels for {n} points", l.len())));
            }
        }
        Ok(Self {
            points,
            labels,
            name: name.into(),
        })
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn labels(&self) -> Option<&[i64]> {
        self.labels.as_deref()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.points.as_slice().expect("standard layout")[i * d..(i + 1) * d]
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        euclidean(self.row(i), self.row(j))
    }

    /// Writes the cloud as CSV with columns `x0..x{D-1}[,label]`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let header: Vec<String> = (0..self.dim()).map(|c| format!("x{c}")).collect();
        write_matrix_csv(path, &header, &self.points, self.labels())
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    sq_euclidean(a, b).sqrt()
}

pub(crate) fn sq_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Writes a row-major matrix with an optional trailing `label` column.
pub(crate) fn write_matrix_csv(
    path: &Path,
    header: &[String],
    data: &Array2<f64>,
    labels: Option<&[i64]>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut line = header.join(",");
    if labels.is_some() {
        line.push_str(",label");
    }
    writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    for (i, row) in data.rows().into_iter().enumerate() {
        line.clear();
        for (c, v) in row.iter().enumerate() {
            if c > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        if let Some(l) = labels {
            line.push(',');
            line.push_str(&l[i].to_string());
        }
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Loads a comma-separated point cloud.
///
/// A first row containing any non-numeric cell is treated as a header. When
/// `label_column` is given the file must have a header and the named column
/// is parsed as integer class ids.
pub fn load_csv(path: &Path, label_column: Option<&str>) -> Result<PointCloud> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let records: Vec<csv::StringRecord> = reader
        .records()
        .filter(|r| !matches!(r, Ok(rec) if rec.len() == 1 && rec[0].is_empty()))
        .collect::<Result<_, _>>()?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_records(&records, label_column, name)
}

fn parse_records(records: &[csv::StringRecord], label_column: Option<&str>, name: String) -> Result<PointCloud> {
    let Some(first) = records.first() else {
        return Err(Error::Empty("csv file has no rows".into()));
    };
    let has_header = first.iter().any(|cell| cell.parse::<f64>().is_err());
    let label_idx = match label_column {
        Some(col) => {
            if !has_header {
                return Err(Error::invalid(format!("label column {col:?} requested but file has no header")));
            }
            Some(
                first
                    .iter()
                    .position(|h| h == col)
                    .ok_or_else(|| Error::invalid(format!("no column named {col:?}")))?,
            )
        }
        None => None,
    };
    let width = first.len();
    let body = if has_header { &records[1..] } else { records };
    if body.is_empty() {
        return Err(Error::Empty("csv file has no data rows".into()));
    }
    let n_features = width - usize::from(label_idx.is_some());
    if n_features == 0 {
        return Err(Error::Empty("csv file has no feature columns".into()));
    }

    let mut data = Vec::with_capacity(body.len() * n_features);
    let mut labels = label_idx.map(|_| Vec::with_capacity(body.len()));
    for (r, rec) in body.iter().enumerate() {
        let row = r + usize::from(has_header) + 1;
        if rec.len() != width {
            return Err(Error::Ragged {
                row,
                expected: width,
                found: rec.len(),
            });
        }
        for (c, cell) in rec.iter().enumerate() {
            let bad = || Error::BadCell {
                row,
                column: c + 1,
                value: cell.to_string(),
            };
            let value: f64 = cell.parse().map_err(|_| bad())?;
            if !value.is_finite() {
                return Err(bad());
            }
            if Some(c) == label_idx {
                if value.fract() != 0.0 {
                    return Err(bad());
                }
                labels.as_mut().expect("label column").push(value as i64);
            } else {
                data.push(value);
            }
        }
    }
    let points = Array2::from_shape_vec((body.len(), n_features), data).expect("row-major fill");
    PointCloud::new(points, labels, name)
}

fn check_count(n: usize, min: usize, what: &str) -> Result<()> {
    if n < min {
        return Err(Error::invalid(format!("{what} must be at least {min}, got {n}")));
    }
    Ok(())
}

fn check_noise(noise_sd: f64) -> Result<()> {
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::invalid(format!("noise_sd must be finite and >= 0, got {noise_sd}")));
    }
    Ok(())
}

fn quantize(t: f64, lo: f64, hi: f64) -> i64 {
    let bin = ((t - lo) / (hi - lo) * PARAM_LABEL_BINS as f64).floor() as i64;
    bin.clamp(0, PARAM_LABEL_BINS as i64 - 1)
}

fn add_noise(rng: &mut ChaCha8Rng, p: &mut [f64; 3], noise_sd: f64) {
    if noise_sd > 0.0 {
        for v in p.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += noise_sd * z;
        }
    }
}

fn build_3d(rows: Vec<[f64; 3]>, labels: Vec<i64>, name: &str) -> Result<PointCloud> {
    let n = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    PointCloud::new(
        Array2::from_shape_vec((n, 3), flat).expect("n x 3"),
        Some(labels),
        name,
    )
}

pub const SWISS_ROLL_T: (f64, f64) = (1.5 * PI, 4.5 * PI);
pub const SWISS_ROLL_HEIGHT: f64 = 21.0;

pub fn swiss_roll_point(t: f64, h: f64) -> [f64; 3] {
    [t * t.cos(), h, t * t.sin()]
}

/// Swiss roll `(t cos t, h, t sin t)`, `t ~ U[1.5pi, 4.5pi]`, `h ~ U[0, 21]`.
pub fn gen_swiss_roll(n: usize, noise_sd: f64, seed: u64) -> Result<PointCloud> {
    check_count(n, 4, "n")?;
    check_noise(noise_sd)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = SWISS_ROLL_T;
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let t = rng.random_range(lo..=hi);
        let h = rng.random_range(0.0..=SWISS_ROLL_HEIGHT);
        let mut p = swiss_roll_point(t, h);
        add_noise(&mut rng, &mut p, noise_sd);
        rows.push(p);
        labels.push(quantize(t, lo, hi));
    }
    build_3d(rows, labels, "swiss_roll")
}

pub const S_CURVE_T: (f64, f64) = (-1.5 * PI, 1.5 * PI);
pub const S_CURVE_HEIGHT: f64 = 2.0;

pub fn s_curve_point(t: f64, h: f64) -> [f64; 3] {
    [t.sin(), h, t.signum() * (t.cos() - 1.0)]
}

/// Inverse of the S-curve parametrization: recovers `t` from `(x, z)`.
pub fn s_curve_param(x: f64, z: f64) -> f64 {
    if z <= 0.0 {
        // t >= 0 branch: (x, z + 1) = (sin t, cos t)
        let t = x.atan2(z + 1.0);
        if t < 0.0 {
            t + 2.0 * PI
        } else {
            t
        }
    } else {
        // t < 0 branch: (x, 1 - z) = (sin t, cos t)
        let t = x.atan2(1.0 - z);
        if t > 0.0 {
            t - 2.0 * PI
        } else {
            t
        }
    }
}

/// S-curve `(sin t, h, sign(t)(cos t - 1))`, `t ~ U[-1.5pi, 1.5pi]`, `h ~ U[0, 2]`.
pub fn gen_s_curve(n: usize, noise_sd: f64, seed: u64) -> Result<PointCloud> {
    check_count(n, 4, "n")?;
    check_noise(noise_sd)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = S_CURVE_T;
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let t = rng.random_range(lo..=hi);
        let h = rng.random_range(0.0..=S_CURVE_HEIGHT);
        let mut p = s_curve_point(t, h);
        add_noise(&mut rng, &mut p, noise_sd);
        rows.push(p);
        labels.push(quantize(t, lo, hi));
    }
    build_3d(rows, labels, "s_curve")
}

pub fn trefoil_point(t: f64) -> [f64; 3] {
    [
        t.sin() + 2.0 * (2.0 * t).sin(),
        t.cos() - 2.0 * (2.0 * t).cos(),
        -(3.0 * t).sin(),
    ]
}

/// Trefoil knot `(sin t + 2 sin 2t, cos t - 2 cos 2t, -sin 3t)`, `t ~ U[0, 2pi)`.
pub fn gen_trefoil(n: usize, noise_sd: f64, seed: u64) -> Result<PointCloud> {
    check_count(n, 8, "n")?;
    check_noise(noise_sd)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let t = rng.random_range(0.0..2.0 * PI);
        let mut p = trefoil_point(t);
        add_noise(&mut rng, &mut p, noise_sd);
        rows.push(p);
        labels.push(quantize(t, 0.0, 2.0 * PI));
    }
    build_3d(rows, labels, "trefoil")
}

pub const RING_RADII: [f64; 3] = [1.0, 2.0, 3.0];

/// Angles of the radial bridges crossing the inner and outer gap.
pub const BRIDGE_ANGLES: [f64; 2] = [0.0, PI];

/// Three concentric planar rings joined by two noisy radial bridges.
///
/// Ring `r` holds `n_per_ring` evenly spaced points labelled `r`. Each of the
/// two gaps gets `n_bridge` points spread along a radial segment with
/// Gaussian jitter, labelled [`BRIDGE_LABEL`]. Jittered bridge points are
/// redrawn until their radius lies strictly inside the gap.
pub fn gen_three_rings(n_per_ring: usize, n_bridge: usize, bridge_noise_sd: f64, seed: u64) -> Result<PointCloud> {
    check_count(n_per_ring, 16, "n_per_ring")?;
    check_noise(bridge_noise_sd)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 3 * n_per_ring + 2 * n_bridge;
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for (ring, &r) in RING_RADII.iter().enumerate() {
        for m in 0..n_per_ring {
            let theta = 2.0 * PI * m as f64 / n_per_ring as f64;
            data.extend([r * theta.cos(), r * theta.sin()]);
            labels.push(ring as i64);
        }
    }
    for (gap, &angle) in BRIDGE_ANGLES.iter().enumerate() {
        let (r_in, r_out) = (RING_RADII[gap], RING_RADII[gap + 1]);
        let (c, s) = (angle.cos(), angle.sin());
        for m in 0..n_bridge {
            let base = r_in + (r_out - r_in) * (m as f64 + 0.5) / n_bridge as f64;
            loop {
                let (jr, jt): (f64, f64) = if bridge_noise_sd > 0.0 {
                    (
                        bridge_noise_sd * rng.sample::<f64, _>(StandardNormal),
                        bridge_noise_sd * rng.sample::<f64, _>(StandardNormal),
                    )
                } else {
                    (0.0, 0.0)
                };
                let radial = base + jr;
                let x = radial * c - jt * s;
                let y = radial * s + jt * c;
                let rad = x.hypot(y);
                if rad > r_in && rad < r_out {
                    data.extend([x, y]);
                    labels.push(BRIDGE_LABEL);
                    break;
                }
            }
        }
    }
    let points = Array2::from_shape_vec((n, 2), data).expect("n x 2");
    PointCloud::new(points, Some(labels), "three_rings")
}
