use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::table::Table;
use super::{sgd_step, sgd_step_dense, LearningError};
use crate::graph_store::{CompactAdj, NodeId};
use crate::rng::RngStream;
use crate::specializations::{Contrastive, DeepWalkAcc, N2vBias, WysAcc};
use crate::traversal::{traverse, FanoutSpec, TraverseOptions, UniformBias};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    DeepWalk,
    Node2Vec { p: f64, q: f64 },
    Wys,
}

/// Step decay: `initial * factor^(floor(round / interval))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub initial: f64,
    pub factor: f64,
    pub interval: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { initial: 0.5, factor: 0.2, interval: 50 }
    }
}

impl Schedule {
    pub fn rate(&self, round: usize) -> f64 {
        self.initial * self.factor.powi((round / self.interval.max(1)) as i32)
    }
}

/// Constant each round's loss and gradient are multiplied by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum LossScale {
    /// The literal summed loss.
    Sum,
    /// `1 / |B|`.
    Batch,
    /// `1 / W` with `W` the round's total loss-term weight.
    Positive,
    /// `|B| / W`: each seed's loss terms carry unit total weight.
    PerSeed,
}

impl LossScale {
    fn factor(self, weight: f64, batch: usize) -> f64 {
        let b = batch as f64;
        match self {
            LossScale::Sum => 1.0,
            LossScale::Batch => 1.0 / b,
            LossScale::Positive if weight > 0.0 => 1.0 / weight,
            LossScale::PerSeed if weight > 0.0 => b / weight,
            LossScale::Positive | LossScale::PerSeed => 1.0 / b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Nodes per round; values at or above `n` use every node.
    pub batch_size: usize,
    pub fanouts: Vec<usize>,
    pub window: usize,
    pub negatives: usize,
    pub schedule: Schedule,
    pub rounds: usize,
    pub objective: Contrastive,
    pub loss_scale: LossScale,
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: usize::MAX,
            fanouts: vec![3; 3],
            window: 5,
            negatives: 10,
            schedule: Schedule::default(),
            rounds: 200,
            objective: Contrastive::NegativeSampling,
            loss_scale: LossScale::PerSeed,
            workers: 1,
        }
    }
}

impl TrainConfig {
    fn validate(&self, method: &Method) -> Result<(), LearningError> {
        let bad = |m: &str| Err(LearningError::Config(m.to_string()));
        if self.batch_size == 0 || self.window == 0 || self.rounds == 0 {
            return bad("batch size, window and rounds must be positive");
        }
        if self.fanouts.is_empty() || self.fanouts.contains(&0) {
            return bad("fanouts must be a nonempty list of positive values");
        }
        if !(self.schedule.factor > 0.0 && self.schedule.factor <= 1.0) || self.schedule.initial < 0.0 {
            return bad("decay factor must lie in (0, 1] and the initial rate be non-negative");
        }
        if let Method::Node2Vec { p, q } = method {
            if !(*p > 0.0 && *q > 0.0) {
                return bad("node2vec needs p, q > 0");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingModel {
    /// One table `Z` (DeepWalk, node2vec).
    Single(Table),
    /// `Z_u = [L_u | R_u]` with context coefficients `Q` (WYS).
    Split { l: Table, r: Table, q: Vec<f64> },
}

impl EmbeddingModel {
    /// The `n x d` embedding used for scoring.
    pub fn embeddings(&self) -> Table {
        match self {
            EmbeddingModel::Single(z) => z.clone(),
            EmbeddingModel::Split { l, r, .. } => l.hconcat(r),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            EmbeddingModel::Single(z) => z.is_finite(),
            EmbeddingModel::Split { l, r, q } => l.is_finite() && r.is_finite() && q.iter().all(|x| x.is_finite()),
        }
    }
}

/// Entries uniform in `[-0.5/d, 0.5/d]`. WYS splits `d` into two halves and
/// starts with `Q = 1` over `window` positions.
pub fn init_model(n: usize, d: usize, method: &Method, window: usize, rng: &RngStream) -> Result<EmbeddingModel, LearningError> {
    let mut gen = rng.generator();
    let scale = 0.5 / d as f64;
    match method {
        Method::Wys => {
            if d % 2 != 0 {
                return Err(LearningError::Config(format!("WYS needs an even dimension, got {d}")));
            }
            let l = Table::uniform(n, d / 2, scale, &mut gen);
            let r = Table::uniform(n, d / 2, scale, &mut gen);
            Ok(EmbeddingModel::Split { l, r, q: vec![1.0; window] })
        }
        _ => Ok(EmbeddingModel::Single(Table::uniform(n, d, scale, &mut gen))),
    }
}

/// Negative distribution `P_n(v) ∝ δ_v^{3/4}`.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    dist: WeightedIndex<f64>,
}

impl NegativeSampler {
    pub fn new(adj: &CompactAdj) -> Self {
        let weights: Vec<f64> = adj.degrees().iter().map(|&d| (d as f64).powf(0.75)).collect();
        Self { dist: WeightedIndex::new(weights).expect("degrees are positive") }
    }

    pub fn draw(&self, count: usize, rng: &mut impl Rng) -> Vec<NodeId> {
        (0..count).map(|_| self.dist.sample(rng)).collect()
    }

    pub fn fill(&self, out: &mut [NodeId], rng: &mut impl Rng) {
        for slot in out {
            *slot = self.dist.sample(rng);
        }
    }
}

/// Distinct batch nodes in ascending order.
fn sample_batch(n: usize, b: usize, rng: &mut impl Rng) -> Vec<NodeId> {
    if b >= n {
        return (0..n).collect();
    }
    let mut batch = sample_indices(rng, n, b).into_vec();
    batch.sort_unstable();
    batch
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: EmbeddingModel,
    /// Per-round loss after [`LossScale`].
    pub losses: Vec<f64>,
    /// WYS context coefficients after each round.
    pub q_trace: Vec<Vec<f64>>,
}

/// Rounds of: sample a batch, traverse with the method's callbacks, take one
/// SGD step on the scaled loss. Negative sampling draws fresh negatives for
/// every pair.
pub fn train_embeddings(
    adj: &CompactAdj,
    model: EmbeddingModel,
    method: &Method,
    config: &TrainConfig,
    rng: &RngStream,
) -> Result<TrainOutput, LearningError> {
    config.validate(method)?;
    let mut model = model;
    let n = adj.n();
    let sampler = NegativeSampler::new(adj);
    let opts = TraverseOptions { workers: config.workers, ..Default::default() };
    let mut losses = Vec::with_capacity(config.rounds);
    let mut q_trace = Vec::new();

    for round in 0..config.rounds {
        let stream = rng.substream(round as u64);
        let batch = sample_batch(n, config.batch_size, &mut stream.substream(0).generator());
        let negatives = sampler.draw(config.negatives, &mut stream.substream(1).generator());
        let walk_rng = stream.substream(2);
        let rate = config.schedule.rate(round);

        let loss = match (&mut model, method) {
            (EmbeddingModel::Single(z), Method::DeepWalk | Method::Node2Vec { .. }) => {
                let fanouts = FanoutSpec::new(config.fanouts.clone())?;
                let (loss, mut grad, weight) = {
                    let mut acc = DeepWalkAcc::new(z, config.window, &batch, negatives, config.objective);
                    if config.objective == Contrastive::NegativeSampling {
                        acc = acc.with_fresh_negatives(&sampler, stream.substream(3).generator());
                    }
                    match method {
                        Method::Node2Vec { p, q } => {
                            traverse(adj, &batch, &fanouts, &mut acc, &mut N2vBias::new(adj, *p, *q)?, &walk_rng, &opts)?;
                        }
                        _ => {
                            traverse(adj, &batch, &fanouts, &mut acc, &mut UniformBias, &walk_rng, &opts)?;
                        }
                    }
                    (acc.loss, acc.grad, acc.terms)
                };
                let scale = config.loss_scale.factor(weight, batch.len());
                grad.scale(scale);
                check_loss(loss, round, rate)?;
                sgd_step(z, &grad, rate)?;
                loss * scale
            }
            (EmbeddingModel::Split { l, r, q }, Method::Wys) => {
                let fanouts = FanoutSpec::constant(config.fanouts[0], q.len())?;
                let (loss, mut gl, mut gr, gq, positives) = {
                    let mut acc = WysAcc::new(l, r, q, &batch);
                    traverse(adj, &batch, &fanouts, &mut acc, &mut UniformBias, &walk_rng, &opts)?;
                    (acc.loss, acc.grad_l, acc.grad_r, acc.grad_q, acc.positives)
                };
                let scale = config.loss_scale.factor((positives + batch.len()) as f64, batch.len());
                check_loss(loss, round, rate)?;
                gl.as_mut_slice().iter_mut().for_each(|x| *x *= scale);
                gr.as_mut_slice().iter_mut().for_each(|x| *x *= scale);
                sgd_step_dense(l, &gl, rate)?;
                sgd_step_dense(r, &gr, rate)?;
                for (qj, g) in q.iter_mut().zip(&gq) {
                    *qj -= rate * g * scale;
                }
                q_trace.push(q.clone());
                loss * scale
            }
            _ => return Err(LearningError::Config("model layout does not match the method".into())),
        };
        losses.push(loss);
        if !model.is_finite() {
            return Err(LearningError::Diverged { round, rate, loss: f64::NAN });
        }
    }
    Ok(TrainOutput { model, losses, q_trace })
}

fn check_loss(loss: f64, round: usize, rate: f64) -> Result<(), LearningError> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(LearningError::Diverged { round, rate, loss })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_store::{build_compact_adj, EdgeList};

    fn toy() -> CompactAdj {
        let el = EdgeList::undirected(5, &[(0, 1), (1, 2), (1, 3), (1, 4), (3, 4)]);
        build_compact_adj(&el, true).unwrap().0
    }

    fn two_cliques(k: usize) -> CompactAdj {
        let mut pairs = Vec::new();
        for base in [0, k] {
            for a in base..base + k {
                for b in a + 1..base + k {
                    pairs.push((a, b));
                }
            }
        }
        build_compact_adj(&EdgeList::undirected(2 * k, &pairs), true).unwrap().0
    }

    #[test]
    fn schedule_steps() {
        let s = Schedule::default();
        assert_eq!(s.rate(0), 0.5);
        assert_eq!(s.rate(49), 0.5);
        assert!((s.rate(50) - 0.1).abs() < 1e-15);
        assert!((s.rate(199) - 0.5 * 0.2f64.powi(3)).abs() < 1e-15);
    }

    #[test]
    fn zero_rate_leaves_tables_unchanged() {
        let adj = toy();
        let rng = RngStream::new(1);
        for method in [Method::DeepWalk, Method::Node2Vec { p: 2.0, q: 0.5 }, Method::Wys] {
            let model = init_model(5, 4, &method, 2, &rng).unwrap();
            let cfg = TrainConfig {
                schedule: Schedule { initial: 0.0, ..Default::default() },
                rounds: 5,
                fanouts: vec![2, 2],
                ..Default::default()
            };
            let out = train_embeddings(&adj, model.clone(), &method, &cfg, &rng).unwrap();
            assert_eq!(out.model, model);
        }
    }

    #[test]
    fn loss_trend_decreases() {
        let adj = toy();
        let rng = RngStream::new(2);
        let cfg = TrainConfig { window: 2, fanouts: vec![3, 3], ..Default::default() };
        let model = init_model(5, 2, &Method::DeepWalk, 2, &rng).unwrap();
        let out = train_embeddings(&adj, model, &Method::DeepWalk, &cfg, &rng).unwrap();
        let smooth: Vec<f64> = out.losses.chunks(20).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        assert!(smooth.last().unwrap() < smooth.first().unwrap(), "{smooth:?}");
        for w in smooth.windows(2) {
            assert!(w[1] <= w[0] * 1.05, "{smooth:?}");
        }
    }

    #[test]
    fn cliques_separate() {
        let adj = two_cliques(5);
        let rng = RngStream::new(3);
        let model = init_model(10, 8, &Method::DeepWalk, 5, &rng).unwrap();
        let out = train_embeddings(&adj, model, &Method::DeepWalk, &TrainConfig::default(), &rng).unwrap();
        let z = out.model.embeddings();
        let (mut intra, mut inter, mut ni, mut ne) = (0.0, 0.0, 0, 0);
        for a in 0..10 {
            for b in a + 1..10 {
                if (a < 5) == (b < 5) {
                    intra += z.dot_rows(a, b);
                    ni += 1;
                } else {
                    inter += z.dot_rows(a, b);
                    ne += 1;
                }
            }
        }
        assert!(intra / ni as f64 > inter / ne as f64);
    }

    #[test]
    fn training_is_deterministic_across_workers() {
        let adj = two_cliques(4);
        let rng = RngStream::new(4);
        let method = Method::Node2Vec { p: 2.0, q: 0.5 };
        let model = init_model(8, 4, &method, 5, &rng).unwrap();
        let run = |workers| {
            let cfg = TrainConfig { rounds: 10, workers, ..Default::default() };
            train_embeddings(&adj, model.clone(), &method, &cfg, &rng).unwrap().model
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn wys_records_q() {
        let adj = two_cliques(4);
        let rng = RngStream::new(5);
        let model = init_model(8, 4, &Method::Wys, 3, &rng).unwrap();
        let cfg = TrainConfig { rounds: 4, window: 3, ..Default::default() };
        let out = train_embeddings(&adj, model, &Method::Wys, &cfg, &rng).unwrap();
        assert_eq!(out.q_trace.len(), 4);
        assert_eq!(out.q_trace[0].len(), 3);
        assert!(init_model(8, 3, &Method::Wys, 3, &rng).is_err());
    }

    #[test]
    fn runaway_rate_reports_divergence() {
        let adj = two_cliques(4);
        let rng = RngStream::new(6);
        let model = init_model(8, 4, &Method::DeepWalk, 5, &rng).unwrap();
        let cfg = TrainConfig {
            objective: Contrastive::Softmax,
            negatives: 0,
            schedule: Schedule { initial: 1e6, factor: 1.0, interval: 1 },
            ..Default::default()
        };
        assert!(matches!(
            train_embeddings(&adj, model, &Method::DeepWalk, &cfg, &rng),
            Err(LearningError::Diverged { .. })
        ));
    }
}
