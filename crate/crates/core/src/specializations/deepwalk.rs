use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph_store::NodeId;
use crate::learning::table::{dot, SparseGrad, Table};
use crate::learning::NegativeSampler;
use crate::traversal::{AccumulateFn, TraversalError, Visit};

/// `ln σ(x)` without overflow.
pub fn log_sigmoid(x: f64) -> f64 {
    -softplus(-x)
}

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// How the contrastive part of the embedding loss is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Contrastive {
    /// `Σ_{u∈B} log E_{v~Pn} exp⟨Z_u, Z_v⟩` once per batch node, with a
    /// linear positive term `-⟨Z_u, Z_v⟩` per context pair.
    Softmax,
    /// Logistic loss per context pair with the negative expectation taken
    /// over the `K` drawn negatives: `-log σ⟨Z_u, Z_v⟩ - (1/K) Σ_j log σ(-⟨Z_u, Z_{n_j}⟩)`.
    NegativeSampling,
}

/// Windowed skip-gram accumulator with per-walker `η` correction.
#[derive(Debug, Clone)]
pub struct DeepWalkAcc<'z> {
    z: &'z Table,
    window: usize,
    negatives: Vec<NodeId>,
    /// Redraw `negatives` before every pair.
    redraw: Option<(&'z NegativeSampler, ChaCha8Rng)>,
    objective: Contrastive,
    /// `η` per forest id; roots (never written) read as 1.
    eta: Vec<f64>,
    pub loss: f64,
    pub grad: SparseGrad,
    pub pairs: usize,
    /// Sum of pair weights `η·(C−k+1)/C`.
    pub weight: f64,
    /// Total weight of all loss terms: twice the pair weight under negative
    /// sampling; pair weight plus one per batch node under softmax.
    pub terms: f64,
}

impl<'z> DeepWalkAcc<'z> {
    /// Accumulator whose loss starts at the batch contrastive term.
    pub fn softmax(z: &'z Table, window: usize, batch: &[NodeId], negatives: Vec<NodeId>) -> Self {
        let mut acc = Self::empty(z, window, negatives, Contrastive::Softmax);
        acc.terms = batch.len() as f64;
        if acc.negatives.is_empty() {
            return acc;
        }
        let mut logits = vec![0.0; acc.negatives.len()];
        for &u in batch {
            for (l, &v) in logits.iter_mut().zip(&acc.negatives) {
                *l = z.dot_rows(u, v);
            }
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = logits.iter().map(|l| (l - max).exp()).sum();
            acc.loss += max + total.ln() - (logits.len() as f64).ln();
            for (j, &v) in acc.negatives.iter().enumerate() {
                let p = (logits[j] - max).exp() / total;
                acc.grad.add(u, p, z.row(v));
                acc.grad.add(v, p, z.row(u));
            }
        }
        acc
    }

    /// Accumulator with per-pair logistic negatives.
    pub fn negative_sampling(z: &'z Table, window: usize, negatives: Vec<NodeId>) -> Self {
        Self::empty(z, window, negatives, Contrastive::NegativeSampling)
    }

    pub fn new(
        z: &'z Table,
        window: usize,
        batch: &[NodeId],
        negatives: Vec<NodeId>,
        objective: Contrastive,
    ) -> Self {
        match objective {
            Contrastive::Softmax => Self::softmax(z, window, batch, negatives),
            Contrastive::NegativeSampling => Self::negative_sampling(z, window, negatives),
        }
    }

    fn empty(z: &'z Table, window: usize, negatives: Vec<NodeId>, objective: Contrastive) -> Self {
        Self {
            z,
            window,
            negatives,
            redraw: None,
            objective,
            eta: Vec::new(),
            loss: 0.0,
            grad: SparseGrad::new(z.cols()),
            pairs: 0,
            weight: 0.0,
            terms: 0.0,
        }
    }

    /// Draw a fresh set of `negatives().len()` negatives for every pair
    /// (negative sampling only).
    pub fn with_fresh_negatives(mut self, sampler: &'z NegativeSampler, rng: ChaCha8Rng) -> Self {
        self.redraw = Some((sampler, rng));
        self
    }

    pub fn eta(&self, id: usize) -> f64 {
        self.eta.get(id).copied().unwrap_or(1.0)
    }

    pub fn negatives(&self) -> &[NodeId] {
        &self.negatives
    }

    fn pair(&mut self, u: NodeId, v: NodeId, w: f64) {
        let z = self.z;
        self.pairs += 1;
        self.weight += w;
        self.terms += match self.objective {
            Contrastive::Softmax => w,
            Contrastive::NegativeSampling if !self.negatives.is_empty() => 2.0 * w,
            Contrastive::NegativeSampling => w,
        };
        match self.objective {
            Contrastive::Softmax => {
                self.loss -= w * z.dot_rows(u, v);
                self.grad.add(u, -w, z.row(v));
                self.grad.add(v, -w, z.row(u));
            }
            Contrastive::NegativeSampling => {
                if let Some((sampler, rng)) = &mut self.redraw {
                    sampler.fill(&mut self.negatives, rng);
                }
                let s = z.dot_rows(u, v);
                self.loss -= w * log_sigmoid(s);
                let g = -w * sigmoid(-s);
                self.grad.add(u, g, z.row(v));
                self.grad.add(v, g, z.row(u));
                let wn = w / self.negatives.len().max(1) as f64;
                for j in 0..self.negatives.len() {
                    let n = self.negatives[j];
                    let s = dot(z.row(u), z.row(n));
                    self.loss -= wn * log_sigmoid(-s);
                    let g = wn * sigmoid(s);
                    self.grad.add(u, g, z.row(n));
                    self.grad.add(n, g, z.row(u));
                }
            }
        }
    }
}

impl AccumulateFn for DeepWalkAcc<'_> {
    fn accumulate(&mut self, visit: &Visit<'_>) -> Result<(), TraversalError> {
        let depth = visit.path.len();
        let parent_id = *visit.path_ids.last().ok_or_else(|| {
            TraversalError::Callback("deepwalk accumulation needs a parent".into())
        })?;
        let eta_u = self.eta(parent_id) / visit.fanout as f64;
        if self.eta.len() <= visit.id {
            self.eta.resize(visit.id + 1, 1.0);
        }
        self.eta[visit.id] = eta_u;
        let c = self.window as f64;
        for k in 1..=self.window.min(depth) {
            let v = visit.path[depth - k];
            let w = self.eta(visit.path_ids[depth - k]) * (c - k as f64 + 1.0) / c;
            self.pair(visit.node, v, w);
        }
        Ok(())
    }
}
