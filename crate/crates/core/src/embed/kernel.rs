//! Calibration of the low-dimensional similarity kernel `1 / (1 + a x^{2b})`.

pub const FIT_GRID_POINTS: usize = 300;

pub fn kernel(x: f64, a: f64, b: f64) -> f64 {
    1.0 / (1.0 + a * x.powf(2.0 * b))
}

fn target(x: f64, min_dist: f64, spread: f64) -> f64 {
    if x <= min_dist {
        1.0
    } else {
        (-(x - min_dist) / spread).exp()
    }
}

fn sse(xs: &[f64], ys: &[f64], a: f64, b: f64) -> f64 {
    xs.iter().zip(ys).map(|(&x, &y)| (kernel(x, a, b) - y).powi(2)).sum()
}

/// Least-squares fit of `(a, b)` to the offset-exponential target on
/// `FIT_GRID_POINTS` evenly spaced points of `[0, 3 * spread]`
/// (Levenberg-Marquardt from `(1, 1)`).
pub fn fit_ab(min_dist: f64, spread: f64) -> (f64, f64) {
    let hi = 3.0 * spread;
    let xs: Vec<f64> = (0..FIT_GRID_POINTS)
        .map(|k| hi * k as f64 / (FIT_GRID_POINTS - 1) as f64)
        .collect();
    let ys: Vec<f64> = xs.iter().map(|&x| target(x, min_dist, spread)).collect();

    let (mut a, mut b) = (1.0f64, 1.0f64);
    let mut lambda = 1e-3;
    let mut cost = sse(&xs, &ys, a, b);
    for _ in 0..500 {
        // normal equations J^T J and J^T r for the two parameters
        let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&x, &y) in xs.iter().zip(&ys) {
            if x == 0.0 {
                // kernel(0) = 1 regardless of (a, b)
                continue;
            }
            let p = x.powf(2.0 * b);
            let den = 1.0 + a * p;
            let r = 1.0 / den - y;
            let da = -p / (den * den);
            let db = -a * p * 2.0 * x.ln() / (den * den);
            jaa += da * da;
            jab += da * db;
            jbb += db * db;
            ga += da * r;
            gb += db * r;
        }
        let mut improved = false;
        for _ in 0..30 {
            let (m11, m22) = (jaa * (1.0 + lambda), jbb * (1.0 + lambda));
            let det = m11 * m22 - jab * jab;
            if det.abs() < 1e-300 {
                lambda *= 10.0;
                continue;
            }
            let step_a = -(m22 * ga - jab * gb) / det;
            let step_b = -(m11 * gb - jab * ga) / det;
            let (na, nb) = (a + step_a, b + step_b);
            if na > 0.0 && nb > 0.0 {
                let nc = sse(&xs, &ys, na, nb);
                if nc < cost {
                    let rel = (cost - nc) / cost.max(1e-300);
                    a = na;
                    b = nb;
                    cost = nc;
                    lambda = (lambda * 0.1).max(1e-12);
                    improved = rel > 1e-15;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (a, b)
}
