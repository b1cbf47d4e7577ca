//! Stochastic traversal functional.
//!
//! [`traverse`] grows one f-ary sampling tree per batch node. At every forest
//! node a [`BiasFn`] proposes transition mass over the node's neighbors, `f`
//! children are drawn from it, and an [`AccumulateFn`] is called once for each
//! child. Trees are expanded breadth-first, one tree after another, and every
//! expansion draws from a generator keyed by `(seed, tree, depth, slot)`.

use std::fmt::Write as _;
use std::ops::Range;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph_store::{CompactAdj, NodeId};
use crate::rng::RngStream;

/// Allowed deviation of a normalized weight vector from unit mass.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraversalError {
    #[error("batch is empty")]
    EmptyBatch,
    #[error("node id {id} out of range for a graph with {n} nodes")]
    NodeOutOfRange { id: NodeId, n: usize },
    #[error("fanout values must be positive")]
    ZeroFanout,
    #[error("candidate list is empty")]
    NoCandidates,
    #[error("bias returned {got} weights for a node with {expected} neighbors")]
    BiasLength { expected: usize, got: usize },
    #[error("bias weight {0} is negative or not finite")]
    InvalidWeight(f64),
    #[error("weights sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("node {0} is not a seed of this forest")]
    NotASeed(NodeId),
    #[error("depth {depth} exceeds forest depth {max}")]
    DepthOutOfRange { depth: usize, max: usize },
    #[error("callback failed: {0}")]
    Callback(String),
}

/// Per-level fanouts `F`; the traversal depth is `F.len()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FanoutSpec(Vec<usize>);

impl FanoutSpec {
    pub fn new(fanouts: Vec<usize>) -> Result<Self, TraversalError> {
        if fanouts.contains(&0) {
            return Err(TraversalError::ZeroFanout);
        }
        Ok(Self(fanouts))
    }

    /// `f` repeated `depth` times.
    pub fn constant(f: usize, depth: usize) -> Result<Self, TraversalError> {
        Self::new(vec![f; depth])
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Upper bound on the number of nodes at `depth` in one tree.
    pub fn level_capacity(&self, depth: usize) -> usize {
        self.0[..depth].iter().product()
    }
}

/// What a [`BiasFn`] decided for the node being expanded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bias {
    /// Equal mass on every neighbor; the weight buffer is ignored.
    Uniform,
    /// The weight buffer holds one unnormalized mass per neighbor.
    Weighted,
    /// Zero total mass: the node gets no children.
    Prune,
}

/// Context handed to a [`BiasFn`].
#[derive(Debug, Clone, Copy)]
pub struct BiasQuery<'a> {
    /// Graph nodes from the seed up to, but excluding, `node`.
    pub path: &'a [NodeId],
    pub node: NodeId,
    pub neighbors: &'a [NodeId],
    pub tree: usize,
    pub depth: usize,
}

pub trait BiasFn<A: ?Sized>: Send {
    /// Fill `weights` (cleared by the caller) with one mass per neighbor and
    /// return [`Bias::Weighted`], or return one of the other variants.
    fn bias(
        &mut self,
        acc: &A,
        query: &BiasQuery<'_>,
        weights: &mut Vec<f64>,
    ) -> Result<Bias, TraversalError>;

    /// An independent copy for a worker thread. Returning `Some` asserts that
    /// the bias never reads the accumulator, so trees may be grown in parallel
    /// before any accumulation happens.
    fn fork(&self) -> Option<Self>
    where
        Self: Sized,
    {
        None
    }
}

/// The default bias: uniform over neighbors.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformBias;

impl<A: ?Sized> BiasFn<A> for UniformBias {
    fn bias(&mut self, _: &A, _: &BiasQuery<'_>, _: &mut Vec<f64>) -> Result<Bias, TraversalError> {
        Ok(Bias::Uniform)
    }

    fn fork(&self) -> Option<Self> {
        Some(*self)
    }
}

/// One non-root forest node, as seen by an [`AccumulateFn`].
#[derive(Debug, Clone, Copy)]
pub struct Visit<'a> {
    /// Graph nodes from the seed to the parent of `node`.
    pub path: &'a [NodeId],
    /// Forest ids aligned with `path`.
    pub path_ids: &'a [usize],
    pub node: NodeId,
    pub id: usize,
    pub tree: usize,
    pub depth: usize,
    pub slot: usize,
    /// Fanout used when the parent was expanded.
    pub fanout: usize,
}

pub trait AccumulateFn {
    fn accumulate(&mut self, visit: &Visit<'_>) -> Result<(), TraversalError>;
}

impl<F> AccumulateFn for F
where
    F: FnMut(&Visit<'_>) -> Result<(), TraversalError>,
{
    fn accumulate(&mut self, visit: &Visit<'_>) -> Result<(), TraversalError> {
        self(visit)
    }
}

/// Accumulator that records nothing.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoAccumulate;

impl AccumulateFn for NoAccumulate {
    fn accumulate(&mut self, _: &Visit<'_>) -> Result<(), TraversalError> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TraverseOptions {
    /// Draw children with replacement (the default) or without.
    pub replacement: bool,
    /// Upper bound on worker threads. Only forkable biases run in parallel.
    pub workers: usize,
}

impl Default for TraverseOptions {
    fn default() -> Self {
        Self { replacement: true, workers: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForestNode {
    pub node: NodeId,
    /// Forest id of the parent; `None` for roots.
    pub parent: Option<usize>,
    pub tree: usize,
    pub depth: usize,
    /// Position within the node's level of its tree.
    pub slot: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct TreeIndex {
    seed: NodeId,
    /// Forest-id boundaries of each level; level `d` is `levels[d]..levels[d + 1]`.
    levels: Vec<usize>,
}

/// The union of sampling trees produced by one traversal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkForest {
    fanouts: Vec<usize>,
    nodes: Vec<ForestNode>,
    trees: Vec<TreeIndex>,
}

impl WalkForest {
    pub fn fanouts(&self) -> &[usize] {
        &self.fanouts
    }

    pub fn depth(&self) -> usize {
        self.fanouts.len()
    }

    pub fn nodes(&self) -> &[ForestNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn seeds(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.trees.iter().map(|t| t.seed)
    }

    pub fn seed(&self, tree: usize) -> NodeId {
        self.trees[tree].seed
    }

    /// Forest ids of the nodes at `depth` of `tree`.
    pub fn level_range(&self, tree: usize, depth: usize) -> Range<usize> {
        let levels = &self.trees[tree].levels;
        levels[depth]..levels[depth + 1]
    }

    pub fn level(&self, tree: usize, depth: usize) -> &[ForestNode] {
        &self.nodes[self.level_range(tree, depth)]
    }

    /// The `i`-th node at depth `k` of the tree rooted at batch position `tree`.
    pub fn omega(&self, tree: usize, k: usize, i: usize) -> Option<NodeId> {
        self.level(tree, k).get(i).map(|r| r.node)
    }

    /// Number of non-root forest nodes.
    pub fn non_root_count(&self) -> usize {
        self.nodes.len() - self.trees.len()
    }

    /// Graph nodes from the root of `id`'s tree down to `id`, inclusive.
    pub fn path_to(&self, id: usize) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut cur = Some(id);
        while let Some(i) = cur {
            out.push(self.nodes[i].node);
            cur = self.nodes[i].parent;
        }
        out.reverse();
        out
    }

    /// Number of depth-`k` nodes equal to `v` in the first tree seeded at `u`.
    pub fn counts(&self, u: NodeId, k: usize, v: NodeId) -> Result<usize, TraversalError> {
        let tree = self
            .trees
            .iter()
            .position(|t| t.seed == u)
            .ok_or(TraversalError::NotASeed(u))?;
        if k > self.depth() {
            return Err(TraversalError::DepthOutOfRange { depth: k, max: self.depth() });
        }
        Ok(self.level(tree, k).iter().filter(|r| r.node == v).count())
    }

    /// Lines `tree<TAB>depth<TAB>slot<TAB>node<TAB>parent_slot`; roots print `-`.
    pub fn debug_dump(&self) -> String {
        let mut out = String::new();
        for r in &self.nodes {
            let parent = match r.parent {
                Some(p) => self.nodes[p].slot.to_string(),
                None => "-".to_string(),
            };
            let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", r.tree, r.depth, r.slot, r.node, parent);
        }
        out
    }
}

/// Locate `draw` in a cumulative mass vector: the first index whose cumulative
/// value exceeds the draw. A draw landing exactly on a boundary maps to the
/// higher index, so zero-mass entries can never be selected.
pub fn locate(cumulative: &[f64], draw: f64) -> usize {
    let idx = cumulative.partition_point(|&c| c <= draw);
    if idx < cumulative.len() {
        return idx;
    }
    // Rounding left the total a hair below the draw: take the last entry with mass.
    let mut last = cumulative.len() - 1;
    while last > 0 && cumulative[last] <= cumulative[last - 1] {
        last -= 1;
    }
    last
}

pub fn cumulative_sum(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

/// Draw `f` candidates i.i.d. from normalized `weights` by cumulative sum and
/// binary search.
pub fn sample(
    candidates: &[NodeId],
    weights: &[f64],
    f: usize,
    rng: &mut impl Rng,
) -> Result<Vec<NodeId>, TraversalError> {
    if candidates.is_empty() {
        return Err(TraversalError::NoCandidates);
    }
    if weights.len() != candidates.len() {
        return Err(TraversalError::BiasLength { expected: candidates.len(), got: weights.len() });
    }
    if let Some(&w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(TraversalError::InvalidWeight(w));
    }
    let cumulative = cumulative_sum(weights);
    let total = *cumulative.last().unwrap();
    if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(TraversalError::NotNormalized(total));
    }
    Ok((0..f).map(|_| candidates[locate(&cumulative, rng.gen::<f64>())]).collect())
}

/// Draw up to `f` distinct indices proportionally to `weights`, removing each
/// pick before the next draw.
fn sample_without_replacement(weights: &[f64], f: usize, rng: &mut impl Rng, out: &mut Vec<usize>) {
    let mut remaining = weights.to_vec();
    let available = remaining.iter().filter(|&&w| w > 0.0).count();
    for _ in 0..f.min(available) {
        let cumulative = cumulative_sum(&remaining);
        let total = *cumulative.last().unwrap();
        let idx = locate(&cumulative, rng.gen::<f64>() * total);
        out.push(idx);
        remaining[idx] = 0.0;
    }
}

fn validate(adj: &CompactAdj, batch: &[NodeId]) -> Result<(), TraversalError> {
    if batch.is_empty() {
        return Err(TraversalError::EmptyBatch);
    }
    if let Some(&id) = batch.iter().find(|&&u| u >= adj.n()) {
        return Err(TraversalError::NodeOutOfRange { id, n: adj.n() });
    }
    Ok(())
}

/// One tree, with forest ids local to the tree.
struct TreeBuild {
    nodes: Vec<ForestNode>,
    levels: Vec<usize>,
}

struct Expander<'g> {
    adj: &'g CompactAdj,
    fanouts: &'g [usize],
    rng: &'g RngStream,
    replacement: bool,
    weights: Vec<f64>,
    picks: Vec<usize>,
    path: Vec<NodeId>,
    path_ids: Vec<usize>,
}

impl<'g> Expander<'g> {
    fn new(adj: &'g CompactAdj, fanouts: &'g [usize], rng: &'g RngStream, replacement: bool) -> Self {
        Self {
            adj,
            fanouts,
            rng,
            replacement,
            weights: Vec::new(),
            picks: Vec::new(),
            path: Vec::new(),
            path_ids: Vec::new(),
        }
    }

    fn load_path(&mut self, nodes: &[ForestNode], local: usize, offset: usize) {
        self.path.clear();
        self.path_ids.clear();
        let mut cur = Some(local);
        while let Some(i) = cur {
            self.path.push(nodes[i].node);
            self.path_ids.push(offset + i);
            cur = nodes[i].parent.map(|p| p - offset);
        }
        self.path.reverse();
        self.path_ids.reverse();
    }

    /// Grow the tree rooted at `seed` breadth-first. `visit` is called with the
    /// tree under construction and the local id of each new child.
    fn grow<A: ?Sized, B: BiasFn<A>>(
        &mut self,
        tree: usize,
        seed: NodeId,
        offset: usize,
        acc: &mut dyn AccView<A>,
        bias: &mut B,
    ) -> Result<TreeBuild, TraversalError> {
        let mut nodes = vec![ForestNode { node: seed, parent: None, tree, depth: 0, slot: 0 }];
        let mut levels = vec![0, 1];
        for (depth, &f) in self.fanouts.iter().enumerate() {
            let (start, end) = (levels[depth], levels[depth + 1]);
            self.adj.touch_rows(nodes[start..end].iter().map(|x| x.node));
            for local in start..end {
                let u = nodes[local].node;
                self.load_path(&nodes, local, offset);
                let neighbors = self.adj.neighbors(u);
                self.weights.clear();
                let query = BiasQuery {
                    path: &self.path[..self.path.len() - 1],
                    node: u,
                    neighbors,
                    tree,
                    depth,
                };
                let decision = bias.bias(acc.view(), &query, &mut self.weights)?;
                self.picks.clear();
                let mut gen = self.rng.walker(tree as u64, depth as u64, (local - start) as u64);
                match decision {
                    Bias::Prune => continue,
                    Bias::Uniform => {
                        if self.replacement {
                            let d = neighbors.len();
                            self.picks.extend((0..f).map(|_| gen.gen_range(0..d)));
                        } else {
                            self.weights.resize(neighbors.len(), 1.0);
                            sample_without_replacement(&self.weights, f, &mut gen, &mut self.picks);
                        }
                    }
                    Bias::Weighted => {
                        if !self.draw_weighted(neighbors.len(), f, &mut gen)? {
                            continue;
                        }
                    }
                }
                for &idx in &self.picks {
                    let child = neighbors[idx];
                    let slot = nodes.len() - end;
                    nodes.push(ForestNode {
                        node: child,
                        parent: Some(offset + local),
                        tree,
                        depth: depth + 1,
                        slot,
                    });
                    let visit = Visit {
                        path: &self.path,
                        path_ids: &self.path_ids,
                        node: child,
                        id: offset + nodes.len() - 1,
                        tree,
                        depth: depth + 1,
                        slot,
                        fanout: f,
                    };
                    acc.visit(&visit)?;
                }
            }
            levels.push(nodes.len());
        }
        Ok(TreeBuild { nodes, levels })
    }

    /// Normalize the bias buffer and draw; `false` means zero mass (prune).
    fn draw_weighted(&mut self, degree: usize, f: usize, gen: &mut ChaCha8Rng) -> Result<bool, TraversalError> {
        if self.weights.len() != degree {
            return Err(TraversalError::BiasLength { expected: degree, got: self.weights.len() });
        }
        if let Some(&w) = self.weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(TraversalError::InvalidWeight(w));
        }
        let total: f64 = self.weights.iter().sum();
        if total <= 0.0 {
            return Ok(false);
        }
        if !self.replacement {
            sample_without_replacement(&self.weights, f, gen, &mut self.picks);
            return Ok(true);
        }
        for w in self.weights.iter_mut() {
            *w /= total;
        }
        let cumulative = cumulative_sum(&self.weights);
        let mass = *cumulative.last().unwrap();
        if (mass - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(TraversalError::NotNormalized(mass));
        }
        self.picks.extend((0..f).map(|_| locate(&cumulative, gen.gen::<f64>())));
        Ok(true)
    }
}

/// Accumulator access during tree growth: the bias reads it, and in
/// sequential mode each new child is forwarded to it immediately.
trait AccView<A: ?Sized> {
    fn view(&self) -> &A;
    fn visit(&mut self, visit: &Visit<'_>) -> Result<(), TraversalError>;
}

struct Live<'a, A>(&'a mut A);

impl<A: AccumulateFn> AccView<A> for Live<'_, A> {
    fn view(&self) -> &A {
        self.0
    }
    fn visit(&mut self, visit: &Visit<'_>) -> Result<(), TraversalError> {
        self.0.accumulate(visit)
    }
}

struct Frozen<'a, A>(&'a A);

impl<A> AccView<A> for Frozen<'_, A> {
    fn view(&self) -> &A {
        self.0
    }
    fn visit(&mut self, _: &Visit<'_>) -> Result<(), TraversalError> {
        Ok(())
    }
}

/// Run the traversal functional over `batch`.
///
/// `accumulate` is invoked once per non-root forest node in canonical
/// `(tree, depth, slot)` order whatever the worker count.
pub fn traverse<A, B>(
    adj: &CompactAdj,
    batch: &[NodeId],
    fanouts: &FanoutSpec,
    accumulate: &mut A,
    bias: &mut B,
    rng: &RngStream,
    opts: &TraverseOptions,
) -> Result<WalkForest, TraversalError>
where
    A: AccumulateFn + Sync,
    B: BiasFn<A>,
{
    validate(adj, batch)?;
    let workers = opts.workers.max(1).min(batch.len());
    if workers > 1 {
        if let Some(first) = bias.fork() {
            return traverse_parallel(adj, batch, fanouts, accumulate, bias, first, rng, opts, workers);
        }
    }
    let mut expander = Expander::new(adj, fanouts.as_slice(), rng, opts.replacement);
    let mut forest = WalkForest { fanouts: fanouts.as_slice().to_vec(), nodes: Vec::new(), trees: Vec::new() };
    adj.touch_rows(batch.iter().copied());
    for (tree, &seed) in batch.iter().enumerate() {
        let offset = forest.nodes.len();
        let built = expander.grow(tree, seed, offset, &mut Live(accumulate), bias)?;
        push_tree(&mut forest, seed, offset, built);
    }
    Ok(forest)
}

fn push_tree(forest: &mut WalkForest, seed: NodeId, offset: usize, built: TreeBuild) {
    forest.trees.push(TreeIndex { seed, levels: built.levels.iter().map(|l| l + offset).collect() });
    forest.nodes.extend(built.nodes);
}

#[allow(clippy::too_many_arguments)]
fn traverse_parallel<A, B>(
    adj: &CompactAdj,
    batch: &[NodeId],
    fanouts: &FanoutSpec,
    accumulate: &mut A,
    bias: &B,
    first: B,
    rng: &RngStream,
    opts: &TraverseOptions,
    workers: usize,
) -> Result<WalkForest, TraversalError>
where
    A: AccumulateFn + Sync,
    B: BiasFn<A>,
{
    let chunk = batch.len().div_ceil(workers);
    let mut forks = vec![first];
    while forks.len() < workers {
        forks.push(bias.fork().expect("fork succeeded once"));
    }
    let snapshot: &A = accumulate;
    let results: Vec<Result<Vec<TreeBuild>, TraversalError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = batch
            .chunks(chunk)
            .zip(forks)
            .enumerate()
            .map(|(c, (seeds, mut b))| {
                scope.spawn(move || {
                    let mut expander = Expander::new(adj, fanouts.as_slice(), rng, opts.replacement);
                    adj.touch_rows(seeds.iter().copied());
                    seeds
                        .iter()
                        .enumerate()
                        .map(|(i, &seed)| {
                            // Offsets are fixed up at merge time; ids are local here.
                            expander.grow(c * chunk + i, seed, 0, &mut Frozen(snapshot), &mut b)
                        })
                        .collect()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("traversal worker panicked")).collect()
    });

    let mut forest = WalkForest { fanouts: fanouts.as_slice().to_vec(), nodes: Vec::new(), trees: Vec::new() };
    let mut seeds = batch.iter();
    for chunk_result in results {
        for mut built in chunk_result? {
            let offset = forest.nodes.len();
            for r in &mut built.nodes {
                r.parent = r.parent.map(|p| p + offset);
            }
            push_tree(&mut forest, *seeds.next().unwrap(), offset, built);
        }
    }
    replay(&forest, accumulate)?;
    Ok(forest)
}

/// Feed every non-root node of `forest` to `accumulate` in canonical order.
pub fn replay<A: AccumulateFn + ?Sized>(forest: &WalkForest, accumulate: &mut A) -> Result<(), TraversalError> {
    let mut path = Vec::new();
    let mut path_ids = Vec::new();
    for (id, r) in forest.nodes.iter().enumerate() {
        let Some(parent) = r.parent else { continue };
        path.clear();
        path_ids.clear();
        let mut cur = Some(parent);
        while let Some(i) = cur {
            path.push(forest.nodes[i].node);
            path_ids.push(i);
            cur = forest.nodes[i].parent;
        }
        path.reverse();
        path_ids.reverse();
        accumulate.accumulate(&Visit {
            path: &path,
            path_ids: &path_ids,
            node: r.node,
            id,
            tree: r.tree,
            depth: r.depth,
            slot: r.slot,
            fanout: forest.fanouts[r.depth - 1],
        })?;
    }
    Ok(())
}
