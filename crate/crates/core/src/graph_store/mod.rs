//! Compact adjacency storage.
//!
//! [`CompactAdj`] keeps a dense out-degree vector next to one contiguous
//! neighbor pool. Row `u` is the left-aligned slice of `degree(u)` neighbor ids,
//! so a uniform neighbor draw is `pool[offset(u) + floor(r * degree(u))]`.

mod generate;
mod io;
mod storage;

pub use generate::{connected_components, generate_graph, toy_graph, GeneratedGraph, GraphKind};
pub use storage::{storage_fit, StorageReport};
pub use io::{
    load_edge_list, parse_edge_list, read_snapshot, write_id_map, write_snapshot, LoadOptions,
    SNAPSHOT_MAGIC,
};

use serde::Serialize;
use thiserror::Error;

/// Zero-based node index into the owning graph.
pub type NodeId = usize;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph must contain at least one node")]
    Empty,
    #[error("node id {id} out of range for a graph with {n} nodes")]
    NodeOutOfRange { id: NodeId, n: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: non-integer node id {token:?} (enable id mapping to accept string ids)")]
    NonIntegerId { line: usize, token: String },
    #[error("infeasible generator configuration: {0}")]
    Infeasible(String),
    #[error("malformed snapshot: {0}")]
    Snapshot(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One input edge. Weights are carried through loading but ignored by the
/// unweighted build.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub weight: Option<f64>,
}

impl Edge {
    pub fn new(src: NodeId, dst: NodeId) -> Self {
        Self { src, dst, weight: None }
    }
}

/// Edge list over dense node ids `0..n`.
#[derive(Debug, Clone, Default)]
pub struct EdgeList {
    pub n: usize,
    pub edges: Vec<Edge>,
    pub directed: bool,
    /// Original identifier of each dense id, when ids were remapped at load time.
    pub id_map: Option<Vec<String>>,
    /// Self-loop lines dropped by the loader.
    pub dropped_self_loops: usize,
}

impl EdgeList {
    pub fn undirected(n: usize, pairs: &[(NodeId, NodeId)]) -> Self {
        Self {
            n,
            edges: pairs.iter().map(|&(s, d)| Edge::new(s, d)).collect(),
            ..Default::default()
        }
    }

    pub fn directed(n: usize, pairs: &[(NodeId, NodeId)]) -> Self {
        Self { directed: true, ..Self::undirected(n, pairs) }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Counters reported by [`build_compact_adj`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BuildStats {
    pub duplicates_removed: usize,
    pub self_loops_added: usize,
}

/// Degree vector plus left-aligned neighbor rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompactAdj {
    degrees: Vec<usize>,
    offsets: Vec<usize>,
    pool: Vec<NodeId>,
}

/// Build the compact adjacency of `edges`.
///
/// With `symmetrize`, every edge is stored in both endpoint rows. Rows are
/// sorted ascending and deduplicated, and nodes left without neighbors get a
/// self-loop so every degree is at least one.
pub fn build_compact_adj(
    edges: &EdgeList,
    symmetrize: bool,
) -> Result<(CompactAdj, BuildStats), GraphError> {
    let n = edges.n;
    if n == 0 {
        return Err(GraphError::Empty);
    }
    let mut rows: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for e in &edges.edges {
        for id in [e.src, e.dst] {
            if id >= n {
                return Err(GraphError::NodeOutOfRange { id, n });
            }
        }
        rows[e.src].push(e.dst);
        if symmetrize && e.src != e.dst {
            rows[e.dst].push(e.src);
        }
    }
    let mut stats = BuildStats::default();
    for (u, row) in rows.iter_mut().enumerate() {
        row.sort_unstable();
        let before = row.len();
        row.dedup();
        stats.duplicates_removed += before - row.len();
        if row.is_empty() {
            row.push(u);
            stats.self_loops_added += 1;
        }
    }
    Ok((CompactAdj::from_sorted_rows(rows), stats))
}

impl CompactAdj {
    fn from_sorted_rows(rows: Vec<Vec<NodeId>>) -> Self {
        let degrees: Vec<usize> = rows.iter().map(Vec::len).collect();
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        offsets.push(0);
        let mut acc = 0;
        for d in &degrees {
            acc += d;
            offsets.push(acc);
        }
        let pool = rows.into_iter().flatten().collect();
        Self { degrees, offsets, pool }
    }

    /// Assemble from explicit rows. Rows are sorted and deduplicated; empty rows
    /// receive a self-loop exactly as in [`build_compact_adj`].
    pub fn from_rows(rows: Vec<Vec<NodeId>>) -> Result<Self, GraphError> {
        let n = rows.len();
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut rows = rows;
        for (u, row) in rows.iter_mut().enumerate() {
            if let Some(&id) = row.iter().find(|&&v| v >= n) {
                return Err(GraphError::NodeOutOfRange { id, n });
            }
            row.sort_unstable();
            row.dedup();
            if row.is_empty() {
                row.push(u);
            }
        }
        Ok(Self::from_sorted_rows(rows))
    }

    /// Parts are taken as-is; callers must uphold the row invariants.
    pub(crate) fn from_parts_unchecked(degrees: Vec<usize>, pool: Vec<NodeId>) -> Self {
        let mut offsets = Vec::with_capacity(degrees.len() + 1);
        offsets.push(0);
        let mut acc = 0;
        for d in &degrees {
            acc += d;
            offsets.push(acc);
        }
        Self { degrees, offsets, pool }
    }

    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    /// Directed edge count (sum of degrees).
    pub fn m(&self) -> usize {
        self.pool.len()
    }

    pub fn degree(&self, u: NodeId) -> usize {
        self.degrees[u]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn max_degree(&self) -> usize {
        self.degrees.iter().copied().max().unwrap_or(0)
    }

    #[inline]
    pub fn neighbors(&self, u: NodeId) -> &[NodeId] {
        &self.pool[self.offsets[u]..self.offsets[u + 1]]
    }

    /// Read the first entry of each row so the cache misses of a whole level
    /// overlap instead of being paid one expansion at a time.
    #[inline]
    pub fn touch_rows(&self, nodes: impl IntoIterator<Item = NodeId>) {
        let mut acc = 0;
        for u in nodes {
            acc ^= self.pool.get(self.offsets[u]).copied().unwrap_or(0);
        }
        std::hint::black_box(acc);
    }

    pub fn neighbor_pool(&self) -> &[NodeId] {
        &self.pool
    }

    pub fn contains(&self, u: NodeId) -> bool {
        u < self.n()
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Number of common entries of rows `a` and `b` (sorted-row intersection).
    pub fn mutual_neighbors(&self, a: NodeId, b: NodeId) -> usize {
        let (mut x, mut y) = (self.neighbors(a), self.neighbors(b));
        let mut count = 0;
        while let (Some(&p), Some(&q)) = (x.first(), y.first()) {
            match p.cmp(&q) {
                std::cmp::Ordering::Less => x = &x[1..],
                std::cmp::Ordering::Greater => y = &y[1..],
                std::cmp::Ordering::Equal => {
                    count += 1;
                    x = &x[1..];
                    y = &y[1..];
                }
            }
        }
        count
    }

    /// All stored directed edges `(u, v)` in row order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (0..self.n()).flat_map(move |u| self.neighbors(u).iter().map(move |&v| (u, v)))
    }

    /// Undirected edges `u < v` (self-loops excluded), for symmetric graphs.
    pub fn undirected_edges(&self) -> Vec<(NodeId, NodeId)> {
        self.edges().filter(|&(u, v)| u < v).collect()
    }

    /// Copy of this graph with a self-loop on every node (`A' = A + I`).
    pub fn with_self_loops(&self) -> CompactAdj {
        let rows = (0..self.n())
            .map(|u| {
                let mut row = self.neighbors(u).to_vec();
                if let Err(pos) = row.binary_search(&u) {
                    row.insert(pos, u);
                }
                row
            })
            .collect();
        Self::from_sorted_rows(rows)
    }

    /// Bytes owned by the structure: `(2n + 1 + m)` words plus the fixed header.
    pub fn heap_bytes(&self) -> usize {
        let word = std::mem::size_of::<usize>();
        std::mem::size_of::<Self>()
            + word * (self.degrees.len() + self.offsets.len())
            + std::mem::size_of::<NodeId>() * self.pool.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn toy() -> CompactAdj {
        let el = EdgeList::undirected(5, &[(0, 1), (1, 2), (1, 3), (1, 4), (3, 4)]);
        build_compact_adj(&el, true).unwrap().0
    }

    #[test]
    fn toy_graph_layout() {
        let adj = toy();
        assert_eq!(adj.degrees(), &[1, 4, 1, 2, 2]);
        let rows: Vec<Vec<NodeId>> = (0..5).map(|u| adj.neighbors(u).to_vec()).collect();
        assert_eq!(rows, vec![vec![1], vec![0, 2, 3, 4], vec![1], vec![1, 4], vec![1, 3]]);
        assert_eq!(adj.m(), 10);
    }

    #[test]
    fn single_node_gets_self_loop() {
        let (adj, stats) = build_compact_adj(&EdgeList::undirected(1, &[]), true).unwrap();
        assert_eq!(adj.degrees(), &[1]);
        assert_eq!(adj.neighbors(0), &[0]);
        assert_eq!(stats.self_loops_added, 1);
    }

    #[test]
    fn directed_chain_keeps_orientation() {
        let el = EdgeList::directed(3, &[(0, 1), (1, 2)]);
        let (adj, _) = build_compact_adj(&el, false).unwrap();
        assert_eq!(adj.degrees(), &[1, 1, 1]);
        assert_eq!(adj.neighbors(0), &[1]);
        assert_eq!(adj.neighbors(1), &[2]);
        assert_eq!(adj.neighbors(2), &[2]);
    }

    #[test]
    fn out_of_range_id_is_rejected() {
        let el = EdgeList::undirected(2, &[(0, 2)]);
        assert!(matches!(
            build_compact_adj(&el, true),
            Err(GraphError::NodeOutOfRange { id: 2, n: 2 })
        ));
    }

    #[test]
    fn duplicates_are_counted() {
        let el = EdgeList::undirected(3, &[(0, 1), (1, 0), (0, 1), (1, 2)]);
        let (adj, stats) = build_compact_adj(&el, true).unwrap();
        assert_eq!(adj.neighbors(0), &[1]);
        assert_eq!(adj.neighbors(1), &[0, 2]);
        // (0,1) appears three times in each of two rows.
        assert_eq!(stats.duplicates_removed, 4);
    }

    #[test]
    fn neighbors_match_figure() {
        let adj = toy();
        assert_eq!(adj.neighbors(1), &[0, 2, 3, 4]);
        assert_eq!(adj.neighbors(0), &[1]);
    }

    #[test]
    fn mutual_neighbors_and_self_loops() {
        let adj = toy();
        assert_eq!(adj.mutual_neighbors(3, 4), 1);
        assert_eq!(adj.mutual_neighbors(0, 2), 1);
        assert_eq!(adj.mutual_neighbors(0, 1), 0);
        let aug = adj.with_self_loops();
        assert_eq!(aug.degrees(), &[2, 5, 2, 3, 3]);
        assert_eq!(aug.neighbors(3), &[1, 3, 4]);
    }

    #[test]
    fn heap_bytes_is_linear() {
        let a = toy();
        let word = std::mem::size_of::<usize>();
        assert_eq!(a.heap_bytes(), std::mem::size_of::<CompactAdj>() + word * (5 + 6 + 10));
    }
}
