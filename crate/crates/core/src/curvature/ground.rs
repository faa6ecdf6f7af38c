//! Shortest-path ground costs on a hop-bounded neighborhood of an edge.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use ndarray::Array2;

use crate::dataio::PointCloud;
use crate::neighbors::FuzzyGraph;

/// Paths are confined to nodes within this many hops of either edge endpoint.
pub const HOP_LIMIT: usize = 3;

#[derive(Debug, Clone, Copy)]
struct Dist(f64);

impl PartialEq for Dist {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Pairwise costs between `supp_a` and `supp_b` (rows x cols).
///
/// Edge lengths are the Euclidean distances between endpoints. Only nodes
/// within [`HOP_LIMIT`] hops of `centers.0` or `centers.1` are traversed;
/// pairs with no path in that subgraph fall back to the direct Euclidean
/// distance.
pub fn ground_costs(
    graph: &FuzzyGraph,
    cloud: &PointCloud,
    centers: (usize, usize),
    supp_a: &[usize],
    supp_b: &[usize],
) -> Array2<f64> {
    let local = hop_ball(graph, &[centers.0, centers.1], HOP_LIMIT);
    let mut costs = Array2::zeros((supp_a.len(), supp_b.len()));
    for (r, &u) in supp_a.iter().enumerate() {
        let dist = bounded_dijkstra(graph, cloud, &local, u, supp_b);
        for (c, &v) in supp_b.iter().enumerate() {
            costs[[r, c]] = match local.get(&v).and_then(|&lv| dist.get(lv).copied()) {
                Some(d) if d.is_finite() => d,
                _ => cloud.dist(u, v),
            };
        }
    }
    costs
}

/// Nodes reachable within `hops` steps of any seed, mapped to local ids.
fn hop_ball(graph: &FuzzyGraph, seeds: &[usize], hops: usize) -> HashMap<usize, usize> {
    let mut local = HashMap::new();
    let mut frontier = Vec::new();
    for &s in seeds {
        if !local.contains_key(&s) {
            local.insert(s, local.len());
            frontier.push(s);
        }
    }
    for _ in 0..hops {
        let mut next = Vec::new();
        for &u in &frontier {
            for &(v, _) in graph.adjacent(u) {
                if !local.contains_key(&v) {
                    local.insert(v, local.len());
                    next.push(v);
                }
            }
        }
        frontier = next;
    }
    local
}

/// Distances from `source` over the local subgraph; stops once every target
/// is settled. Entries are indexed by local id.
fn bounded_dijkstra(
    graph: &FuzzyGraph,
    cloud: &PointCloud,
    local: &HashMap<usize, usize>,
    source: usize,
    targets: &[usize],
) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; local.len()];
    let Some(&src) = local.get(&source) else {
        return dist;
    };
    let mut remaining = targets.iter().filter(|t| local.contains_key(t)).count();
    let mut settled = vec![false; local.len()];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(Reverse((Dist(0.0), source)));
    while let Some(Reverse((Dist(d), u))) = heap.pop() {
        let lu = local[&u];
        if settled[lu] {
            continue;
        }
        settled[lu] = true;
        if targets.contains(&u) {
            remaining -= 1;
            if remaining == 0 {
                break;
            }
        }
        for &(v, _) in graph.adjacent(u) {
            let Some(&lv) = local.get(&v) else { continue };
            let nd = d + cloud.dist(u, v);
            if nd < dist[lv] {
                dist[lv] = nd;
                heap.push(Reverse((Dist(nd), v)));
            }
        }
    }
    dist
}
