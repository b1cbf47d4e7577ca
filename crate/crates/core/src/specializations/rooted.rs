//! Rooted adjacency accumulation, the no-revisit bias, and the degree
//! renormalization that turns a sampled adjacency into a message-passing operator.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::graph_store::{CompactAdj, NodeId};
use crate::rng::RngStream;
use crate::traversal::{
    traverse, AccumulateFn, Bias, BiasFn, BiasQuery, FanoutSpec, TraversalError, TraverseOptions, Visit,
};

/// Reversed traversal steps `(child, parent)` gathered over one batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootedAdjacency {
    n: usize,
    entries: BTreeSet<(NodeId, NodeId)>,
    expanded: Vec<bool>,
    reached: BTreeSet<NodeId>,
}

impl RootedAdjacency {
    /// Empty state over an `n`-node graph; batch nodes count as reached.
    pub fn new(n: usize, batch: &[NodeId]) -> Self {
        Self { n, entries: BTreeSet::new(), expanded: vec![false; n], reached: batch.iter().copied().collect() }
    }

    /// Record the step `T[-1] -> u`.
    pub fn accumulate_step(&mut self, path: &[NodeId], u: NodeId) -> Result<(), TraversalError> {
        let &parent = path
            .last()
            .ok_or_else(|| TraversalError::Callback("rooted accumulation needs a parent".into()))?;
        self.entries.insert((u, parent));
        self.expanded[parent] = true;
        self.reached.insert(u);
        Ok(())
    }

    /// Stored `(child, parent)` pairs.
    pub fn entries(&self) -> &BTreeSet<(NodeId, NodeId)> {
        &self.entries
    }

    pub fn contains(&self, child: NodeId, parent: NodeId) -> bool {
        self.entries.contains(&(child, parent))
    }

    /// Has `u` been expanded, i.e. does it have sampled children?
    pub fn is_expanded(&self, u: NodeId) -> bool {
        self.expanded[u]
    }

    pub fn reached(&self) -> &BTreeSet<NodeId> {
        &self.reached
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Union with another worker's state.
    pub fn merge(&mut self, other: &RootedAdjacency) {
        self.entries.extend(other.entries.iter().copied());
        self.reached.extend(other.reached.iter().copied());
        for (a, b) in self.expanded.iter_mut().zip(&other.expanded) {
            *a |= *b;
        }
    }
}

impl AccumulateFn for RootedAdjacency {
    fn accumulate(&mut self, visit: &Visit<'_>) -> Result<(), TraversalError> {
        self.accumulate_step(visit.path, visit.node)
    }
}

/// Uniform mass over the neighbors of a node that has not been expanded yet,
/// zero mass otherwise.
pub fn no_revisit_bias(state: &RootedAdjacency, u: NodeId, degree: usize) -> Vec<f64> {
    let w = if state.is_expanded(u) { 0.0 } else { 1.0 / degree as f64 };
    vec![w; degree]
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoRevisitBias;

impl BiasFn<RootedAdjacency> for NoRevisitBias {
    fn bias(
        &mut self,
        acc: &RootedAdjacency,
        query: &BiasQuery<'_>,
        _: &mut Vec<f64>,
    ) -> Result<Bias, TraversalError> {
        Ok(if acc.is_expanded(query.node) { Bias::Prune } else { Bias::Uniform })
    }
}

/// Where the self-loops of `Ã′` come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SelfLoops {
    /// `Ã′ = I + Ã`.
    Identity,
    /// The traversed graph already carries self-loops, so expanded rows keep
    /// exactly their sampled entries; rows never expanded get `I`.
    Sampled,
}

/// `Å = D′^{1/2} D̃′^{-1} Ã′ D′^{-1/2}` over the reached nodes.
///
/// Rows are parents and columns their sampled children.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    /// Reached nodes, ascending; row/column `i` is node `nodes[i]`.
    pub nodes: Vec<NodeId>,
    pub matrix: DMatrix<f64>,
    pub true_degrees: Vec<f64>,
    pub sampled_degrees: Vec<f64>,
}

impl NormalizedAdjacency {
    pub fn index_of(&self, u: NodeId) -> Option<usize> {
        self.nodes.binary_search(&u).ok()
    }

    /// Entry for graph nodes `(u, v)`; zero when either was not reached.
    pub fn get(&self, u: NodeId, v: NodeId) -> f64 {
        match (self.index_of(u), self.index_of(v)) {
            (Some(i), Some(j)) => self.matrix[(i, j)],
            _ => 0.0,
        }
    }

    /// Embed into an `n x n` matrix with zeros for unreached nodes.
    pub fn to_full(&self, n: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(n, n);
        for (i, &u) in self.nodes.iter().enumerate() {
            for (j, &v) in self.nodes.iter().enumerate() {
                out[(u, v)] = self.matrix[(i, j)];
            }
        }
        out
    }
}

/// Renormalize a rooted adjacency with the true degrees `δ′` of the full
/// self-loop-augmented graph.
pub fn renormalize(
    state: &RootedAdjacency,
    full_degrees: &[usize],
    self_loops: SelfLoops,
) -> Result<NormalizedAdjacency, TraversalError> {
    if state.reached.is_empty() {
        return Err(TraversalError::Callback("no reached nodes to renormalize".into()));
    }
    let nodes: Vec<NodeId> = state.reached.iter().copied().collect();
    let index: BTreeMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let r = nodes.len();
    let mut a = DMatrix::<f64>::zeros(r, r);
    for &(child, parent) in &state.entries {
        a[(index[&parent], index[&child])] = 1.0;
    }
    for (i, &u) in nodes.iter().enumerate() {
        if self_loops == SelfLoops::Identity || !state.is_expanded(u) {
            a[(i, i)] = 1.0;
        }
    }
    let sampled: Vec<f64> = a.row_iter().map(|row| row.sum()).collect();
    let true_degrees: Vec<f64> = nodes.iter().map(|&u| full_degrees[u] as f64).collect();
    for i in 0..r {
        for j in 0..r {
            if a[(i, j)] != 0.0 {
                a[(i, j)] *= true_degrees[i].sqrt() / sampled[i] / true_degrees[j].sqrt();
            }
        }
    }
    Ok(NormalizedAdjacency { nodes, matrix: a, true_degrees, sampled_degrees: sampled })
}

/// `D^{-1/2} A D^{-1/2}` of a stored graph, densely.
pub fn symmetric_normalized(adj: &CompactAdj) -> DMatrix<f64> {
    let n = adj.n();
    let mut out = DMatrix::zeros(n, n);
    for u in 0..n {
        for &v in adj.neighbors(u) {
            out[(u, v)] = 1.0 / ((adj.degree(u) * adj.degree(v)) as f64).sqrt();
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MessagePassingAuditConfig {
    pub fanout: usize,
    pub runs: usize,
    /// Traverse `A + I` rather than `A`.
    pub augmented: bool,
    pub replacement: bool,
}

impl MessagePassingAuditConfig {
    /// Self-loop-augmented traversal without replacement: each expanded row
    /// draws `min(f, δ′)` distinct entries, so `E[Å] = D′^{-1/2} A′ D′^{-1/2}`.
    pub fn unbiased(fanout: usize, runs: usize) -> Self {
        Self { fanout, runs, augmented: true, replacement: false }
    }

    /// The default traversal on the raw graph with `Ã′ = I + Ã`.
    pub fn literal(fanout: usize, runs: usize) -> Self {
        Self { fanout, runs, augmented: false, replacement: true }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MessagePassingReport {
    pub config: MessagePassingAuditConfig,
    pub n: usize,
    pub max_abs_error: f64,
    pub max_z_score: f64,
    pub violations: usize,
    pub pass: bool,
    /// `(u, v, oracle, mean, standard_error)` for every entry.
    pub entries: Vec<(NodeId, NodeId, f64, f64, f64)>,
}

impl MessagePassingReport {
    pub fn to_kv(&self) -> String {
        format!(
            "audit=message_passing\nfanout={}\nruns={}\naugmented={}\nreplacement={}\nmax_abs_error={:.6}\nmax_z_score={:.3}\nviolations={}\npass={}\n",
            self.config.fanout, self.config.runs, self.config.augmented, self.config.replacement,
            self.max_abs_error, self.max_z_score, self.violations, self.pass
        )
    }
}

/// Mean of `Å` over independent one-level traversals seeded at every node,
/// against `D′^{-1/2} A′ D′^{-1/2}` entrywise within five standard errors.
pub fn audit_message_passing(
    adj: &CompactAdj,
    config: MessagePassingAuditConfig,
    rng: &RngStream,
) -> Result<MessagePassingReport, TraversalError> {
    let augmented = adj.with_self_loops();
    let traversed = if config.augmented { &augmented } else { adj };
    let n = adj.n();
    let oracle = symmetric_normalized(&augmented);
    let batch: Vec<NodeId> = (0..n).collect();
    let fanouts = FanoutSpec::new(vec![config.fanout])?;
    let opts = TraverseOptions { replacement: config.replacement, workers: 1 };
    let self_loops = if config.augmented { SelfLoops::Sampled } else { SelfLoops::Identity };
    let mut sum = DMatrix::<f64>::zeros(n, n);
    let mut sumsq = DMatrix::<f64>::zeros(n, n);
    for run in 0..config.runs {
        let mut state = RootedAdjacency::new(n, &batch);
        traverse(traversed, &batch, &fanouts, &mut state, &mut NoRevisitBias, &rng.substream(run as u64), &opts)?;
        let a = renormalize(&state, augmented.degrees(), self_loops)?.to_full(n);
        sum += &a;
        sumsq += a.component_mul(&a);
    }
    let r = config.runs as f64;
    let mut entries = Vec::with_capacity(n * n);
    let (mut max_err, mut max_z, mut violations) = (0.0f64, 0.0f64, 0);
    for u in 0..n {
        for v in 0..n {
            let mean = sum[(u, v)] / r;
            let var = if config.runs > 1 { ((sumsq[(u, v)] / r - mean * mean) * r / (r - 1.0)).max(0.0) } else { 0.0 };
            let se = (var / r).sqrt();
            let err = (mean - oracle[(u, v)]).abs();
            max_err = max_err.max(err);
            let z = if se > 0.0 { err / se } else if err > 1e-12 { f64::INFINITY } else { 0.0 };
            max_z = max_z.max(z);
            if z > 5.0 {
                violations += 1;
            }
            entries.push((u, v, oracle[(u, v)], mean, se));
        }
    }
    Ok(MessagePassingReport {
        config,
        n,
        max_abs_error: max_err,
        max_z_score: max_z,
        violations,
        pass: violations == 0,
        entries,
    })
}
