//! Synthetic graph generators.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EdgeList, GraphError, NodeId};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    /// G(n, p); `param` is the edge probability.
    ErdosRenyi,
    /// Uniform random `param`-regular simple graph.
    Regular,
    /// Two cliques of `n / 2` nodes joined by one bridge edge; `param` unused.
    Barbell,
}

#[derive(Debug, Clone)]
pub struct GeneratedGraph {
    pub edges: EdgeList,
    pub components: usize,
}

impl GeneratedGraph {
    pub fn is_connected(&self) -> bool {
        self.components == 1
    }
}

/// Five-node example graph: a hub `1` with leaves `0`, `2` and a triangle `1, 3, 4`.
pub fn toy_graph() -> EdgeList {
    EdgeList::undirected(5, &[(0, 1), (1, 2), (1, 3), (1, 4), (3, 4)])
}

pub fn generate_graph(
    kind: GraphKind,
    n: usize,
    param: f64,
    seed: u64,
) -> Result<GeneratedGraph, GraphError> {
    if n == 0 {
        return Err(GraphError::Empty);
    }
    let mut rng = RngStream::new(seed).generator();
    let pairs = match kind {
        GraphKind::ErdosRenyi => {
            if !(0.0..=1.0).contains(&param) {
                return Err(GraphError::Infeasible(format!("edge probability {param} not in [0, 1]")));
            }
            erdos_renyi(n, param, &mut rng)
        }
        GraphKind::Regular => {
            if param < 0.0 || param.fract() != 0.0 {
                return Err(GraphError::Infeasible(format!("degree {param} is not a whole number")));
            }
            regular(n, param as usize, &mut rng)?
        }
        GraphKind::Barbell => barbell(n)?,
    };
    let components = connected_components(n, &pairs);
    Ok(GeneratedGraph { edges: EdgeList::undirected(n, &pairs), components })
}

/// Geometric edge skipping: O(n + m) expected time.
fn erdos_renyi(n: usize, p: f64, rng: &mut impl Rng) -> Vec<(NodeId, NodeId)> {
    let mut edges = Vec::new();
    if p <= 0.0 || n < 2 {
        return edges;
    }
    if p >= 1.0 {
        for v in 1..n {
            for w in 0..v {
                edges.push((w, v));
            }
        }
        return edges;
    }
    let log_q = (1.0 - p).ln();
    let (mut v, mut w): (usize, i64) = (1, -1);
    while v < n {
        let r: f64 = rng.gen();
        w += 1 + ((1.0 - r).ln() / log_q).floor() as i64;
        while w >= v as i64 && v < n {
            w -= v as i64;
            v += 1;
        }
        if v < n {
            edges.push((w as usize, v));
        }
    }
    edges
}

/// Random pairing with incremental rejection of loops and multi-edges,
/// restarting when the remaining points admit no valid pair.
fn regular(n: usize, degree: usize, rng: &mut impl Rng) -> Result<Vec<(NodeId, NodeId)>, GraphError> {
    if degree >= n || (n * degree) % 2 != 0 {
        return Err(GraphError::Infeasible(format!(
            "a {degree}-regular graph on {n} nodes needs degree < n and n * degree even"
        )));
    }
    const RESTARTS: usize = 200;
    'restart: for _ in 0..RESTARTS {
        let mut points: Vec<NodeId> = (0..n).flat_map(|u| std::iter::repeat_n(u, degree)).collect();
        let mut seen: HashSet<(NodeId, NodeId)> = HashSet::new();
        let mut edges = Vec::with_capacity(n * degree / 2);
        while !points.is_empty() {
            let mut placed = false;
            for _ in 0..64 {
                let i = rng.gen_range(0..points.len());
                let j = rng.gen_range(0..points.len());
                let (a, b) = (points[i], points[j]);
                let key = (a.min(b), a.max(b));
                if i != j && a != b && !seen.contains(&key) {
                    seen.insert(key);
                    edges.push(key);
                    let (hi, lo) = (i.max(j), i.min(j));
                    points.swap_remove(hi);
                    points.swap_remove(lo);
                    placed = true;
                    break;
                }
            }
            if !placed {
                let stuck = points.iter().enumerate().all(|(i, &a)| {
                    points[i + 1..].iter().all(|&b| a == b || seen.contains(&(a.min(b), a.max(b))))
                });
                if stuck {
                    continue 'restart;
                }
            }
        }
        edges.sort_unstable();
        return Ok(edges);
    }
    Err(GraphError::Infeasible(format!(
        "no {degree}-regular pairing found on {n} nodes after {RESTARTS} attempts"
    )))
}

fn barbell(n: usize) -> Result<Vec<(NodeId, NodeId)>, GraphError> {
    if n < 2 || n % 2 != 0 {
        return Err(GraphError::Infeasible(format!("barbell needs an even node count, got {n}")));
    }
    let half = n / 2;
    let mut edges = Vec::new();
    for base in [0, half] {
        for a in base..base + half {
            for b in a + 1..base + half {
                edges.push((a, b));
            }
        }
    }
    edges.push((half - 1, half));
    Ok(edges)
}

/// Number of connected components of the undirected graph on `0..n`.
pub fn connected_components(n: usize, edges: &[(NodeId, NodeId)]) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut components = n;
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            components -= 1;
        }
    }
    components
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_store::build_compact_adj;

    #[test]
    fn regular_graph_has_uniform_degree() {
        let g = generate_graph(GraphKind::Regular, 6, 3.0, 7).unwrap();
        let (adj, stats) = build_compact_adj(&g.edges, true).unwrap();
        assert!(adj.degrees().iter().all(|&d| d == 3));
        assert_eq!(stats.duplicates_removed, 0);
        assert_eq!(g.edges.len(), 9);
    }

    #[test]
    fn larger_regular_graph() {
        let g = generate_graph(GraphKind::Regular, 200, 8.0, 3).unwrap();
        let (adj, _) = build_compact_adj(&g.edges, true).unwrap();
        assert!(adj.degrees().iter().all(|&d| d == 8));
        assert!(adj.edges().all(|(u, v)| u != v));
    }

    #[test]
    fn infeasible_regular_is_an_error() {
        assert!(generate_graph(GraphKind::Regular, 5, 3.0, 1).is_err());
        assert!(generate_graph(GraphKind::Regular, 4, 4.0, 1).is_err());
    }

    #[test]
    fn erdos_renyi_edge_count_is_plausible() {
        let g = generate_graph(GraphKind::ErdosRenyi, 1000, 0.01, 11).unwrap();
        let (adj, _) = build_compact_adj(&g.edges, true).unwrap();
        // Directed count expectation n(n-1)p = 9990, sd about 140.
        let m = adj.m() as f64;
        assert!((m - 9990.0).abs() < 1000.0, "m = {m}");
        let mut seen = HashSet::new();
        assert!(g.edges.edges.iter().all(|e| e.src < e.dst && seen.insert((e.src, e.dst))));
    }

    #[test]
    fn barbell_shape() {
        let g = generate_graph(GraphKind::Barbell, 8, 0.0, 0).unwrap();
        assert_eq!(g.edges.len(), 2 * 6 + 1);
        assert!(g.is_connected());
        let (adj, _) = build_compact_adj(&g.edges, true).unwrap();
        assert_eq!(adj.degrees(), &[3, 3, 3, 4, 4, 3, 3, 3]);
        assert!(adj.has_edge(3, 4));
    }

    #[test]
    fn components_counted() {
        assert_eq!(connected_components(4, &[(0, 1), (2, 3)]), 2);
        assert_eq!(connected_components(3, &[]), 3);
    }
}
