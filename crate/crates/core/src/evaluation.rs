//! Held-out edge splits, ROC-AUC and mean rank over dot-product scores.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::graph_store::{build_compact_adj, connected_components, CompactAdj, EdgeList, GraphError, NodeId};
use crate::learning::Table;
use crate::rng::RngStream;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("split fraction must lie in (0, 1), got {0}")]
    Fraction(f64),
    #[error("{edges} edges cannot be split at fraction {fraction} with both sides nonempty")]
    TooSmall { edges: usize, fraction: f64 },
    #[error("graph has no non-edges to sample negatives from")]
    NoNonEdges,
    #[error("needed {requested} distinct negative pairs but only {found} found within {attempts} attempts")]
    NegativeSampling { requested: usize, found: usize, attempts: usize },
    #[error("scores need at least one positive and one negative")]
    SingleClass,
    #[error("empty ranking group")]
    EmptyGroup,
    #[error("non-finite score")]
    NonFinite,
    #[error("embeddings have {rows} rows but the graph has {n} nodes")]
    Shape { rows: usize, n: usize },
}

fn key(u: NodeId, v: NodeId) -> (NodeId, NodeId) {
    (u.min(v), u.max(v))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkSplit {
    pub n: usize,
    pub train: Vec<(NodeId, NodeId)>,
    pub test: Vec<(NodeId, NodeId)>,
    /// Non-edges of the full graph, `negatives_per_edge` per test edge in test order.
    pub negatives: Vec<(NodeId, NodeId)>,
    pub fraction: f64,
    pub negatives_per_edge: usize,
    pub seed: u64,
    pub full_components: usize,
    pub train_components: usize,
}

impl LinkSplit {
    /// True when holding out the test edges split a connected component.
    pub fn disconnects(&self) -> bool {
        self.train_components > self.full_components
    }

    /// Training graph; nodes left without edges get a self-loop.
    pub fn train_adjacency(&self) -> Result<CompactAdj, GraphError> {
        Ok(build_compact_adj(&EdgeList::undirected(self.n, &self.train), true)?.0)
    }
}

/// Hold out `round(fraction · m)` of the undirected, self-loop free `edges`
/// and draw `negatives_per_edge` uniform non-edges per held-out edge.
pub fn make_split(
    n: usize,
    edges: &[(NodeId, NodeId)],
    fraction: f64,
    negatives_per_edge: usize,
    seed: u64,
) -> Result<LinkSplit, EvalError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(EvalError::Fraction(fraction));
    }
    let mut unique: Vec<(NodeId, NodeId)> =
        edges.iter().filter(|(u, v)| u != v).map(|&(u, v)| key(u, v)).collect();
    unique.sort_unstable();
    unique.dedup();
    let m = unique.len();
    let held = (fraction * m as f64).round() as usize;
    if held == 0 || held >= m {
        return Err(EvalError::TooSmall { edges: m, fraction });
    }
    let stream = RngStream::new(seed);
    let mut shuffled = unique.clone();
    shuffled.shuffle(&mut stream.substream(0).generator());
    let mut test = shuffled[..held].to_vec();
    let mut train = shuffled[held..].to_vec();
    test.sort_unstable();
    train.sort_unstable();

    let requested = held * negatives_per_edge;
    let edge_set: HashSet<(NodeId, NodeId)> = unique.iter().copied().collect();
    let pool = n * n.saturating_sub(1) / 2 - m;
    if requested > 0 && pool == 0 {
        return Err(EvalError::NoNonEdges);
    }
    let negatives = sample_non_edges(n, &edge_set, requested, &mut stream.substream(1).generator())?;

    Ok(LinkSplit {
        n,
        full_components: connected_components(n, &unique),
        train_components: connected_components(n, &train),
        train,
        test,
        negatives,
        fraction,
        negatives_per_edge,
        seed,
    })
}

fn sample_non_edges(
    n: usize,
    edges: &HashSet<(NodeId, NodeId)>,
    requested: usize,
    rng: &mut impl Rng,
) -> Result<Vec<(NodeId, NodeId)>, EvalError> {
    let attempts = 100 * requested;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(requested);
    for _ in 0..attempts {
        if out.len() == requested {
            break;
        }
        let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let k = key(u, v);
        if u != v && !edges.contains(&k) && seen.insert(k) {
            out.push(k);
        }
    }
    if out.len() < requested {
        return Err(EvalError::NegativeSampling { requested, found: out.len(), attempts });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoredPair {
    pub u: NodeId,
    pub v: NodeId,
    pub score: f64,
    pub positive: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ScoredPairs(pub Vec<ScoredPair>);

impl ScoredPairs {
    /// Test edges then negatives, scored by `⟨Z_u, Z_v⟩`.
    pub fn from_split(z: &Table, split: &LinkSplit) -> Result<Self, EvalError> {
        if z.rows() != split.n {
            return Err(EvalError::Shape { rows: z.rows(), n: split.n });
        }
        let score = |&(u, v): &(NodeId, NodeId), positive| ScoredPair { u, v, score: z.dot_rows(u, v), positive };
        let pairs: Vec<_> = split
            .test
            .iter()
            .map(|p| score(p, true))
            .chain(split.negatives.iter().map(|p| score(p, false)))
            .collect();
        if pairs.iter().any(|p| !p.score.is_finite()) {
            return Err(EvalError::NonFinite);
        }
        Ok(Self(pairs))
    }

    pub fn from_scores(positives: &[f64], negatives: &[f64]) -> Self {
        let mk = |&score, positive| ScoredPair { u: 0, v: 0, score, positive };
        Self(positives.iter().map(|s| mk(s, true)).chain(negatives.iter().map(|s| mk(s, false))).collect())
    }
}

/// Probability a random positive outranks a random negative, ties counting ½,
/// via the rank-sum formula with average ranks.
pub fn roc_auc(pairs: &ScoredPairs) -> Result<f64, EvalError> {
    if pairs.0.iter().any(|p| !p.score.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    let pos = pairs.0.iter().filter(|p| p.positive).count();
    let neg = pairs.0.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut sorted: Vec<&ScoredPair> = pairs.0.iter().collect();
    sorted.sort_by(|a, b| a.score.total_cmp(&b.score));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].score == sorted[i].score {
            j += 1;
        }
        let avg = (i + 1 + j) as f64 / 2.0;
        rank_sum += avg * sorted[i..j].iter().filter(|p| p.positive).count() as f64;
        i = j;
    }
    let (p, q) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

/// Average 1-based rank of each group's positive among its negatives; ties
/// take the average rank.
pub fn mean_rank(groups: &[(f64, Vec<f64>)]) -> Result<f64, EvalError> {
    if groups.is_empty() {
        return Err(EvalError::EmptyGroup);
    }
    let mut total = 0.0;
    for (pos, negs) in groups {
        if negs.is_empty() {
            return Err(EvalError::EmptyGroup);
        }
        if !pos.is_finite() || negs.iter().any(|s| !s.is_finite()) {
            return Err(EvalError::NonFinite);
        }
        let above = negs.iter().filter(|&&s| s > *pos).count() as f64;
        let tied = negs.iter().filter(|&&s| s == *pos).count() as f64;
        total += 1.0 + above + tied / 2.0;
    }
    Ok(total / groups.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkMetrics {
    pub roc_auc: f64,
    pub mean_rank: f64,
    pub n_test: usize,
    pub n_negatives: usize,
}

impl LinkMetrics {
    pub fn to_kv(&self) -> String {
        format!(
            "roc_auc={:.6}\nmean_rank={:.6}\nn_test={}\nn_negatives={}\n",
            self.roc_auc, self.mean_rank, self.n_test, self.n_negatives
        )
    }
}

/// ROC-AUC over all test/negative pairs, mean rank with each test edge
/// grouped with its own `negatives_per_edge` negatives.
pub fn evaluate_link_prediction(z: &Table, split: &LinkSplit) -> Result<LinkMetrics, EvalError> {
    let scored = ScoredPairs::from_split(z, split)?;
    let auc = roc_auc(&scored)?;
    let (pos, neg) = scored.0.split_at(split.test.len());
    let groups: Vec<(f64, Vec<f64>)> = pos
        .iter()
        .zip(neg.chunks(split.negatives_per_edge.max(1)))
        .map(|(p, ns)| (p.score, ns.iter().map(|x| x.score).collect()))
        .collect();
    Ok(LinkMetrics {
        roc_auc: auc,
        mean_rank: mean_rank(&groups)?,
        n_test: split.test.len(),
        n_negatives: split.negatives.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(pos: &[f64], neg: &[f64]) -> f64 {
        let mut won = 0.0;
        for p in pos {
            for q in neg {
                won += if p > q { 1.0 } else if p == q { 0.5 } else { 0.0 };
            }
        }
        won / (pos.len() * neg.len()) as f64
    }

    fn path(n: usize) -> Vec<(NodeId, NodeId)> {
        (0..n - 1).map(|i| (i, i + 1)).collect()
    }

    #[test]
    fn split_sizes() {
        let s = make_split(11, &path(11), 0.2, 1, 7).unwrap();
        assert_eq!((s.test.len(), s.train.len()), (2, 8));
        assert_eq!(s.negatives.len(), s.test.len());
        let s3 = make_split(11, &path(11), 0.2, 3, 7).unwrap();
        assert_eq!(s3.negatives.len(), 6);
    }

    #[test]
    fn split_invariants_and_determinism() {
        let edges = path(30);
        let a = make_split(30, &edges, 0.3, 2, 1).unwrap();
        assert_eq!(a, make_split(30, &edges, 0.3, 2, 1).unwrap());
        assert_ne!(a.test, make_split(30, &edges, 0.3, 2, 2).unwrap().test);
        let train: HashSet<_> = a.train.iter().collect();
        assert!(a.test.iter().all(|e| !train.contains(e)));
        let full: HashSet<_> = edges.iter().copied().collect();
        assert!(a.negatives.iter().all(|e| !full.contains(e) && e.0 != e.1));
        assert!(a.disconnects());
        let adj = a.train_adjacency().unwrap();
        assert!(adj.degrees().iter().all(|&d| d >= 1));
    }

    #[test]
    fn split_errors() {
        assert_eq!(make_split(3, &[(0, 1)], 0.2, 1, 0), Err(EvalError::TooSmall { edges: 1, fraction: 0.2 }));
        assert!(matches!(make_split(3, &path(3), 1.0, 1, 0), Err(EvalError::Fraction(_))));
        let k4: Vec<_> = (0..4).flat_map(|a| (a + 1..4).map(move |b| (a, b))).collect();
        assert_eq!(make_split(4, &k4, 0.5, 1, 0), Err(EvalError::NoNonEdges));
        // K4 minus one edge has a single non-edge, so two distinct negatives cannot exist.
        assert!(matches!(
            make_split(4, &k4[1..], 0.4, 1, 0),
            Err(EvalError::NegativeSampling { requested: 2, found: 1, .. })
        ));
    }

    #[test]
    fn auc_examples() {
        let perfect = ScoredPairs::from_scores(&[3.0, 2.0], &[1.0, 0.0]);
        assert_eq!(roc_auc(&perfect).unwrap(), 1.0);
        let ties = ScoredPairs::from_scores(&[1.0; 3], &[1.0; 4]);
        assert_eq!(roc_auc(&ties).unwrap(), 0.5);
        let mixed = ScoredPairs::from_scores(&[0.9, 0.4], &[0.6, 0.1]);
        assert_eq!(roc_auc(&mixed).unwrap(), 0.75);
        assert_eq!(roc_auc(&ScoredPairs::from_scores(&[1.0], &[])), Err(EvalError::SingleClass));
    }

    #[test]
    fn auc_matches_brute_force_with_ties() {
        let pos = [0.5, 0.5, 0.2, 0.9, 0.1];
        let neg = [0.5, 0.1, 0.3, 0.3];
        let auc = roc_auc(&ScoredPairs::from_scores(&pos, &neg)).unwrap();
        assert!((auc - brute_force(&pos, &neg)).abs() < 1e-12);
    }

    #[test]
    fn mean_rank_examples() {
        assert_eq!(mean_rank(&[(1.0, vec![0.0, 0.5])]).unwrap(), 1.0);
        assert_eq!(mean_rank(&[(0.0, vec![1.0, 2.0, -1.0])]).unwrap(), 3.0);
        assert_eq!(mean_rank(&[(5.0, vec![1.0]), (0.0, vec![1.0, 2.0, -1.0])]).unwrap(), 2.0);
        assert_eq!(mean_rank(&[(1.0, vec![1.0])]).unwrap(), 1.5);
        assert_eq!(mean_rank(&[(1.0, vec![])]), Err(EvalError::EmptyGroup));
    }

    #[test]
    fn metrics_from_embeddings() {
        // Nodes 0..3 share a direction, 4..7 the opposite one.
        let z = Table::from_vec(8, 1, vec![1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0]);
        let split = LinkSplit {
            n: 8,
            train: vec![],
            test: vec![(0, 1), (4, 5)],
            negatives: vec![(0, 4), (1, 5), (2, 6), (3, 7)],
            fraction: 0.5,
            negatives_per_edge: 2,
            seed: 0,
            full_components: 1,
            train_components: 1,
        };
        let m = evaluate_link_prediction(&z, &split).unwrap();
        assert_eq!((m.roc_auc, m.mean_rank, m.n_test), (1.0, 1.0, 2));
        assert!(m.to_kv().starts_with("roc_auc=1.000000\nmean_rank=1.000000\nn_test=2\n"));
    }
}
