//! Exact discrete optimal transport.
//!
//! The transportation LP is solved as a min-cost flow on the complete
//! bipartite graph by successive shortest augmenting paths with Johnson
//! potentials. Dijkstra runs in dense `O(V^2)` form since every source is
//! adjacent to every sink.

use ndarray::Array2;

use super::LocalMeasure;
use crate::{Error, Result};

/// Marginals whose totals differ by more than this are rejected.
pub const MASS_TOLERANCE: f64 = 1e-9;

const FLOW_EPS: f64 = 1e-15;

/// Optimal transport cost between two measures over `costs`
/// (rows follow `mu.support`, columns follow `nu.support`).
pub fn w1_exact(mu: &LocalMeasure, nu: &LocalMeasure, costs: &Array2<f64>) -> Result<f64> {
    check_axes(mu, nu, costs)?;
    emd(&mu.masses(), &nu.masses(), costs)
}

pub(crate) fn check_axes(mu: &LocalMeasure, nu: &LocalMeasure, costs: &Array2<f64>) -> Result<()> {
    if costs.dim() != (mu.support.len(), nu.support.len()) {
        return Err(Error::Shape(format!(
            "cost matrix {:?} does not match supports {}x{}",
            costs.dim(),
            mu.support.len(),
            nu.support.len()
        )));
    }
    Ok(())
}

/// Earth mover's cost between histograms `a` and `b`.
pub fn emd(a: &[f64], b: &[f64], costs: &Array2<f64>) -> Result<f64> {
    let (m, n) = (a.len(), b.len());
    if costs.dim() != (m, n) {
        return Err(Error::Shape(format!("cost matrix {:?} vs marginals {m}x{n}", costs.dim())));
    }
    if a.iter().chain(b).any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::invalid("marginals must be finite and non-negative"));
    }
    let gap = (a.iter().sum::<f64>() - b.iter().sum::<f64>()).abs();
    if gap > MASS_TOLERANCE {
        return Err(Error::Infeasible(gap));
    }

    let mut supply = a.to_vec();
    let mut demand = b.to_vec();
    let mut flow = vec![0.0; m * n];
    // potentials: sources 0..m, sinks m..m+n
    let mut pot = vec![0.0; m + n];
    let v = m + n;
    let mut dist = vec![0.0; v];
    let mut prev = vec![usize::MAX; v];
    let mut done = vec![false; v];

    // each augmentation exhausts a supply, a demand or a reverse arc
    let max_rounds = 4 * (m + n) * (m + n) + 16;
    for _ in 0..max_rounds {
        if supply.iter().all(|&s| s <= FLOW_EPS) || demand.iter().all(|&d| d <= FLOW_EPS) {
            break;
        }
        dist.fill(f64::INFINITY);
        prev.fill(usize::MAX);
        done.fill(false);
        for i in 0..m {
            if supply[i] > FLOW_EPS {
                dist[i] = 0.0;
            }
        }
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for x in 0..v {
                if !done[x] && dist[x] < best {
                    best = dist[x];
                    u = x;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u < m {
                for j in 0..n {
                    let t = m + j;
                    let rc = (costs[[u, j]] + pot[u] - pot[t]).max(0.0);
                    if dist[u] + rc < dist[t] {
                        dist[t] = dist[u] + rc;
                        prev[t] = u;
                    }
                }
            } else {
                let j = u - m;
                for i in 0..m {
                    if flow[i * n + j] > FLOW_EPS {
                        let rc = (-costs[[i, j]] + pot[u] - pot[i]).max(0.0);
                        if dist[u] + rc < dist[i] {
                            dist[i] = dist[u] + rc;
                            prev[i] = u;
                        }
                    }
                }
            }
        }
        let target = (0..n)
            .filter(|&j| demand[j] > FLOW_EPS && dist[m + j].is_finite())
            .min_by(|&x, &y| dist[m + x].total_cmp(&dist[m + y]));
        let Some(tj) = target else { break };
        let limit = dist[m + tj];
        for x in 0..v {
            pot[x] += dist[x].min(limit);
        }

        // bottleneck along the path
        let mut delta = demand[tj];
        let mut node = m + tj;
        while prev[node] != usize::MAX {
            let p = prev[node];
            if node < m {
                // reverse arc sink p -> source node
                delta = delta.min(flow[node * n + (p - m)]);
            }
            node = p;
        }
        delta = delta.min(supply[node]);

        let source = node;
        let mut node = m + tj;
        while prev[node] != usize::MAX {
            let p = prev[node];
            if node >= m {
                flow[p * n + (node - m)] += delta;
            } else {
                flow[node * n + (p - m)] -= delta;
            }
            node = p;
        }
        supply[source] -= delta;
        demand[tj] -= delta;
    }

    let mut total = 0.0;
    for i in 0..m {
        for j in 0..n {
            let f = flow[i * n + j];
            if f > 0.0 {
                total += f * costs[[i, j]];
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identical_measures_cost_zero() {
        let c = array![[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]];
        let a = [0.2, 0.5, 0.3];
        assert!(emd(&a, &a, &c).unwrap().abs() < 1e-15);
    }

    #[test]
    fn point_masses() {
        let c = array![[2.5]];
        assert_eq!(emd(&[1.0], &[1.0], &c).unwrap(), 2.5);
    }

    #[test]
    fn path_graph_interleaved() {
        // path a-b-c-d, mu on {a, c}, nu on {b, d}
        let c = array![[1.0, 3.0], [1.0, 1.0]];
        assert!((emd(&[0.5, 0.5], &[0.5, 0.5], &c).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn needs_reverse_arcs() {
        // greedy nearest assignment is suboptimal here
        let c = array![[1.0, 2.0], [1.0, 10.0]];
        let got = emd(&[0.5, 0.5], &[0.5, 0.5], &c).unwrap();
        assert!((got - 1.5).abs() < 1e-12, "{got}");
    }

    #[test]
    fn rejects_mass_mismatch() {
        let c = array![[1.0]];
        assert!(matches!(emd(&[1.0], &[0.9], &c), Err(Error::Infeasible(_))));
    }

    #[test]
    fn matches_vertex_enumeration_on_2x2() {
        // the 2x2 transport polytope is a segment; the optimum sits at an end
        let c = array![[0.3, 1.7], [2.2, 0.4]];
        let a: [f64; 2] = [0.35, 0.65];
        let b: [f64; 2] = [0.6, 0.4];
        let lo = (a[0] - b[1]).max(0.0);
        let hi = a[0].min(b[0]);
        let cost = |x: f64| {
            x * c[[0, 0]] + (a[0] - x) * c[[0, 1]] + (b[0] - x) * c[[1, 0]] + (a[1] - b[0] + x) * c[[1, 1]]
        };
        let want = cost(lo).min(cost(hi));
        assert!((emd(&a, &b, &c).unwrap() - want).abs() < 1e-12);
    }
}
