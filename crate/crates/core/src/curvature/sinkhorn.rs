//! Entropic optimal transport with log-domain Sinkhorn iterations.

use ndarray::Array2;

use super::transport::check_axes;
use super::LocalMeasure;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornOutcome {
    /// Transport cost `<plan, C>` of the rounded entropic plan (entropy term excluded).
    pub cost: f64,
    pub iterations: usize,
    /// L1 violation of the row marginal at exit.
    pub marginal_error: f64,
    pub converged: bool,
}

pub fn w1_sinkhorn(
    mu: &LocalMeasure,
    nu: &LocalMeasure,
    costs: &Array2<f64>,
    reg: f64,
    max_iters: usize,
    tol: f64,
) -> Result<SinkhornOutcome> {
    check_axes(mu, nu, costs)?;
    sinkhorn(&mu.masses(), &nu.masses(), costs, reg, max_iters, tol)
}

/// Ratio between consecutive regularizations of the warm-start schedule.
const EPS_SCALING_FACTOR: f64 = 0.5;
/// Relaxation weight of the potential updates; 1 is plain Sinkhorn.
const OVER_RELAXATION: f64 = 1.5;
/// A relaxed step may raise the marginal error at most this much.
const GROWTH_LIMIT: f64 = 10.0;
/// Iteration cap and marginal tolerance of each warm-start stage.
const WARM_ITERS: usize = 20;
const WARM_TOL: f64 = 1e-4;

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log-domain Sinkhorn on histograms `a`, `b`. Zero-mass entries are
/// skipped; they carry no plan mass.
pub fn sinkhorn(a: &[f64], b: &[f64], costs: &Array2<f64>, reg: f64, max_iters: usize, tol: f64) -> Result<SinkhornOutcome> {
    if !(reg > 0.0 && reg.is_finite()) {
        return Err(Error::invalid(format!("regularization must be positive, got {reg}")));
    }
    if costs.dim() != (a.len(), b.len()) {
        return Err(Error::Shape(format!("cost matrix {:?} vs marginals {}x{}", costs.dim(), a.len(), b.len())));
    }
    let rows: Vec<usize> = (0..a.len()).filter(|&i| a[i] > 0.0).collect();
    let cols: Vec<usize> = (0..b.len()).filter(|&j| b[j] > 0.0).collect();
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::invalid("marginals carry no mass"));
    }
    let log_a: Vec<f64> = rows.iter().map(|&i| a[i].ln()).collect();
    let log_b: Vec<f64> = cols.iter().map(|&j| b[j].ln()).collect();
    let c = |r: usize, s: usize| costs[[rows[r], cols[s]]];

    let (m, n) = (rows.len(), cols.len());
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; n];
    let sweep = |f: &mut [f64], g: &mut [f64], eps: f64, omega: f64| {
        for r in 0..m {
            let new = eps * log_a[r] - eps * log_sum_exp((0..n).map(|s| (g[s] - c(r, s)) / eps));
            f[r] = (1.0 - omega) * f[r] + omega * new;
        }
        for s in 0..n {
            let new = eps * log_b[s] - eps * log_sum_exp((0..m).map(|r| (f[r] - c(r, s)) / eps));
            g[s] = (1.0 - omega) * g[s] + omega * new;
        }
        // the row violation; columns are near-exact after the g update
        let rows_err: f64 = (0..m)
            .map(|r| {
                let row: f64 = (0..n).map(|s| ((f[r] + g[s] - c(r, s)) / eps).exp()).sum();
                (row - a[rows[r]]).abs()
            })
            .sum();
        if omega == 1.0 {
            return rows_err;
        }
        let cols_err: f64 = (0..n)
            .map(|s| {
                let col: f64 = (0..m).map(|r| ((f[r] + g[s] - c(r, s)) / eps).exp()).sum();
                (col - b[cols[s]]).abs()
            })
            .sum();
        rows_err + cols_err
    };
    // over-relaxed step, falling back to a plain one when it does not help
    let mut last_err = f64::INFINITY;
    let mut step = |f: &mut Vec<f64>, g: &mut Vec<f64>, eps: f64| {
        let (f0, g0) = (f.clone(), g.clone());
        let err = sweep(f, g, eps, OVER_RELAXATION);
        if err.is_finite() && err <= GROWTH_LIMIT * last_err {
            last_err = err;
            return err;
        }
        f.copy_from_slice(&f0);
        g.copy_from_slice(&g0);
        last_err = sweep(f, g, eps, 1.0);
        last_err
    };

    // epsilon scaling: warm-start the potentials on a geometric schedule from
    // the largest cost down to `reg`; small `reg` alone converges slowly
    let c_max = (0..m).flat_map(|r| (0..n).map(move |s| (r, s))).map(|(r, s)| c(r, s)).fold(0.0, f64::max);
    let mut schedule = Vec::new();
    let mut eps = c_max;
    while eps > reg * EPS_SCALING_FACTOR.recip() {
        schedule.push(eps);
        eps *= EPS_SCALING_FACTOR;
    }
    let mut iterations = 0;
    for &eps in &schedule {
        for _ in 0..WARM_ITERS {
            if iterations + 1 >= max_iters {
                break;
            }
            iterations += 1;
            if step(&mut f, &mut g, eps) < WARM_TOL.max(tol) {
                break;
            }
        }
    }
    let mut err = f64::INFINITY;
    while iterations < max_iters {
        iterations += 1;
        err = step(&mut f, &mut g, reg);
        if err < tol {
            break;
        }
    }
    let plan = round_plan(
        Array2::from_shape_fn((m, n), |(r, s)| ((f[r] + g[s] - c(r, s)) / reg).exp()),
        &rows.iter().map(|&i| a[i]).collect::<Vec<_>>(),
        &cols.iter().map(|&j| b[j]).collect::<Vec<_>>(),
    );
    let cost = plan.indexed_iter().map(|((r, s), p)| p * c(r, s)).sum();
    Ok(SinkhornOutcome {
        cost,
        iterations,
        marginal_error: err,
        converged: err < tol,
    })
}

/// Projects a near-feasible plan onto the transport polytope: rows and
/// columns are scaled down to their marginals, then the missing mass is
/// restored as a rank-one correction. Costs read off an early-stopped plan
/// stay those of a genuine coupling.
fn round_plan(mut plan: Array2<f64>, a: &[f64], b: &[f64]) -> Array2<f64> {
    for (mut row, &target) in plan.rows_mut().into_iter().zip(a) {
        let sum = row.sum();
        if sum > target {
            row *= target / sum;
        }
    }
    for (mut col, &target) in plan.columns_mut().into_iter().zip(b) {
        let sum = col.sum();
        if sum > target {
            col *= target / sum;
        }
    }
    let row_gap: Vec<f64> = plan.rows().into_iter().zip(a).map(|(row, &t)| (t - row.sum()).max(0.0)).collect();
    let col_gap: Vec<f64> = plan.columns().into_iter().zip(b).map(|(col, &t)| (t - col.sum()).max(0.0)).collect();
    let missing: f64 = row_gap.iter().sum();
    if missing > 0.0 {
        for ((r, s), p) in plan.indexed_iter_mut() {
            *p += row_gap[r] * col_gap[s] / missing;
        }
    }
    plan
}
