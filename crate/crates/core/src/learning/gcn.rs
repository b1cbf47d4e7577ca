//! One-layer linear GCN and the exhaustive ensemble-equivalence check.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::LearningError;
use crate::graph_store::{build_compact_adj, generate_graph, CompactAdj, GraphKind, NodeId};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// True-degree / sampled-degree mix of a rooted adjacency.
    Eq4,
    /// `D′^{-1/2} A′ D′^{-1/2}` with `A′ = max(A, Aᵀ) + I`.
    Symmetric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearGcnModel {
    pub w: DMatrix<f64>,
    pub normalization: Normalization,
}

impl LinearGcnModel {
    pub fn forward(&self, a: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>, LearningError> {
        linear_gcn_forward(self, a, x)
    }
}

/// `H = Å X W`.
pub fn linear_gcn_forward(model: &LinearGcnModel, a: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>, LearningError> {
    if a.ncols() != x.nrows() || x.ncols() != model.w.nrows() {
        return Err(LearningError::Shape(format!(
            "Å {:?} · X {:?} · W {:?}",
            a.shape(),
            x.shape(),
            model.w.shape()
        )));
    }
    Ok(a * (x * &model.w))
}

/// `D′^{-1/2} (max(A, Aᵀ) + I) D′^{-1/2}` of a dense 0/1 matrix.
pub fn symmetric_renormalize(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut s = DMatrix::from_fn(n, n, |i, j| a[(i, j)].max(a[(j, i)]));
    for i in 0..n {
        s[(i, i)] = 1.0;
    }
    let d: Vec<f64> = s.row_iter().map(|r| r.sum().sqrt()).collect();
    DMatrix::from_fn(n, n, |i, j| s[(i, j)] / (d[i] * d[j]))
}

/// An `n x d` matrix with orthonormal columns, so `XᵀX = I`.
pub fn whitened_features(n: usize, d: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let raw = DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    raw.qr().q()
}

/// Ridge-stabilized least squares `(MᵀM + λI)^{-1} MᵀY`.
fn least_squares(m: &DMatrix<f64>, y: &DMatrix<f64>, ridge: f64) -> DMatrix<f64> {
    let d = m.ncols();
    let gram = m.transpose() * m + DMatrix::<f64>::identity(d, d) * ridge;
    let rhs = m.transpose() * y;
    gram.cholesky().expect("ridge keeps the Gram matrix positive definite").solve(&rhs)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn combinations(items: &[NodeId], k: usize) -> Vec<Vec<NodeId>> {
    fn rec(items: &[NodeId], k: usize, start: usize, cur: &mut Vec<NodeId>, out: &mut Vec<Vec<NodeId>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            cur.push(items[i]);
            rec(items, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(items, k, 0, &mut Vec::new(), &mut out);
    out
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnsembleConfig {
    pub alpha: usize,
    pub n: usize,
    pub f: usize,
    pub seed: u64,
    pub feature_dim: usize,
    pub target_dim: usize,
    pub baseline_samples: usize,
    pub limit: usize,
    pub ridge: f64,
    pub threshold: f64,
}

impl EnsembleConfig {
    pub fn new(alpha: usize, n: usize, f: usize, seed: u64) -> Self {
        Self {
            alpha,
            n,
            f,
            seed,
            feature_dim: 2,
            target_dim: 1,
            baseline_samples: 32,
            limit: 1_000_000,
            ridge: 1e-10,
            threshold: 0.2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleReport {
    pub config: EnsembleConfig,
    pub components: usize,
    pub enumerated: usize,
    /// `C(alpha, f)^n`, independent per-node choices.
    pub count_per_node_product: f64,
    /// `n^C(alpha, f)` as stated alongside the original argument.
    pub count_stated: f64,
    pub whitening_error: f64,
    pub grad_norm_ensemble: f64,
    pub grad_norm_baseline: f64,
    pub ratio: f64,
    pub pass: bool,
}

impl EnsembleReport {
    pub fn to_kv(&self) -> String {
        format!(
            "audit=ensemble_equivalence\nalpha={}\nn={}\nf={}\nseed={}\nfeature_dim={}\ncomponents={}\nenumerated={}\ncount_per_node_product={}\ncount_stated={}\nwhitening_error={:.3e}\ngrad_norm_ensemble={:.6e}\ngrad_norm_baseline={:.6e}\nratio={:.6e}\nthreshold={}\npass={}\n",
            self.config.alpha, self.config.n, self.config.f, self.config.seed, self.config.feature_dim,
            self.components, self.enumerated, self.count_per_node_product, self.count_stated,
            self.whitening_error, self.grad_norm_ensemble, self.grad_norm_baseline, self.ratio,
            self.config.threshold, self.pass
        )
    }
}

/// Enumerate every depth-1 sampled adjacency of a random `alpha`-regular graph
/// (each node keeps `f` of its `alpha` edges), fit the per-adjacency least
/// squares models, and measure the expected-loss gradient at their average.
pub fn ensemble_equivalence_check(config: EnsembleConfig) -> Result<EnsembleReport, LearningError> {
    let EnsembleConfig { alpha, n, f, .. } = config;
    if f == 0 || f > alpha {
        return Err(LearningError::Config(format!("need 1 <= f <= alpha, got f={f}, alpha={alpha}")));
    }
    let per_node = binomial(alpha, f);
    let total = per_node.powi(n as i32);
    if total > config.limit as f64 {
        return Err(LearningError::EnumerationGuard { count: total, limit: config.limit });
    }
    let stream = RngStream::new(config.seed);
    let generated = generate_graph(GraphKind::Regular, n, alpha as f64, config.seed)
        .map_err(|e| LearningError::Config(e.to_string()))?;
    let (adj, _) = build_compact_adj(&generated.edges, true).map_err(|e| LearningError::Config(e.to_string()))?;

    let mut rng = stream.substream(1).generator();
    let x = whitened_features(n, config.feature_dim, &mut rng);
    let y = DMatrix::from_fn(n, config.target_dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let whitening_error = (x.transpose() * &x - DMatrix::<f64>::identity(config.feature_dim, config.feature_dim)).abs().max();

    let choices: Vec<Vec<Vec<NodeId>>> = (0..n).map(|u| combinations(adj.neighbors(u), f)).collect();
    let d = config.feature_dim;
    let mut gram_mean = DMatrix::<f64>::zeros(d, d);
    let mut cross_mean = DMatrix::<f64>::zeros(d, config.target_dim);
    let mut w_mean = DMatrix::<f64>::zeros(d, config.target_dim);
    let mut digits = vec![0usize; n];
    let mut enumerated = 0usize;
    loop {
        let a = sampled_adjacency(&adj, &choices, &digits);
        let m = symmetric_renormalize(&a) * &x;
        gram_mean += m.transpose() * &m;
        cross_mean += m.transpose() * &y;
        w_mean += least_squares(&m, &y, config.ridge);
        enumerated += 1;
        if !advance(&mut digits, &choices) {
            break;
        }
    }
    let scale = 1.0 / enumerated as f64;
    gram_mean *= scale;
    cross_mean *= scale;
    w_mean *= scale;

    let gradient = |w: &DMatrix<f64>| &gram_mean * w - &cross_mean;
    let grad_norm_ensemble = gradient(&w_mean).norm();
    let mut brng = stream.substream(2).generator();
    let grad_norm_baseline = (0..config.baseline_samples)
        .map(|_| {
            let w = DMatrix::from_fn(d, config.target_dim, |_, _| brng.sample::<f64, _>(StandardNormal));
            gradient(&w).norm()
        })
        .sum::<f64>()
        / config.baseline_samples as f64;
    let ratio = grad_norm_ensemble / grad_norm_baseline;
    Ok(EnsembleReport {
        config,
        components: generated.components,
        enumerated,
        count_per_node_product: total,
        count_stated: (n as f64).powf(per_node),
        whitening_error,
        grad_norm_ensemble,
        grad_norm_baseline,
        ratio,
        pass: ratio <= config.threshold,
    })
}

fn sampled_adjacency(adj: &CompactAdj, choices: &[Vec<Vec<NodeId>>], digits: &[usize]) -> DMatrix<f64> {
    let n = adj.n();
    let mut a = DMatrix::zeros(n, n);
    for u in 0..n {
        for &v in &choices[u][digits[u]] {
            a[(u, v)] = 1.0;
        }
    }
    a
}

/// Mixed-radix increment; `false` once every combination has been visited.
fn advance(digits: &mut [usize], choices: &[Vec<Vec<NodeId>>]) -> bool {
    for (d, c) in digits.iter_mut().zip(choices) {
        *d += 1;
        if *d < c.len() {
            return true;
        }
        *d = 0;
    }
    false
}
