use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::factorization::factorization_gradient;
use super::table::Table;
use super::train::NegativeSampler;
use super::LearningError;
use crate::estimators::{exact_tk, DenseTransition};
use crate::graph_store::{CompactAdj, NodeId};
use crate::rng::RngStream;
use crate::specializations::DeepWalkAcc;
use crate::traversal::{traverse, FanoutSpec, NoAccumulate, TraverseOptions, UniformBias};

/// Shared harness settings for both gradient audits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientAuditConfig {
    pub dim: usize,
    pub fanouts: Vec<usize>,
    pub window: usize,
    pub negatives: usize,
    pub coefficients: Vec<f64>,
    pub runs: usize,
    pub workers: usize,
    pub deepwalk_tolerance: f64,
    pub factorization_tolerance: f64,
}

impl Default for GradientAuditConfig {
    fn default() -> Self {
        Self {
            dim: 8,
            fanouts: vec![3, 3],
            window: 5,
            negatives: 10,
            coefficients: vec![1.0, 0.5],
            runs: 10_000,
            workers: 1,
            deepwalk_tolerance: 0.05,
            factorization_tolerance: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientAuditReport {
    pub name: String,
    pub runs: usize,
    pub tolerance: f64,
    /// `‖mean_row − oracle_row‖ / ‖oracle_row‖` per row.
    pub row_errors: Vec<f64>,
    pub max_row_error: f64,
    pub pass: bool,
}

impl GradientAuditReport {
    fn new(name: &str, runs: usize, tolerance: f64, mean: &[DMatrix<f64>], oracle: &[DMatrix<f64>]) -> Self {
        let rows = oracle[0].nrows();
        let row_errors: Vec<f64> = (0..rows)
            .map(|i| {
                let (mut diff, mut norm) = (0.0, 0.0);
                for (m, o) in mean.iter().zip(oracle) {
                    diff += (m.row(i) - o.row(i)).norm_squared();
                    norm += o.row(i).norm_squared();
                }
                diff.sqrt() / norm.sqrt().max(1e-12)
            })
            .collect();
        let max_row_error = row_errors.iter().copied().fold(0.0, f64::max);
        Self { name: name.into(), runs, tolerance, row_errors, max_row_error, pass: max_row_error <= tolerance }
    }

    pub fn to_kv(&self) -> String {
        format!(
            "audit={}\nruns={}\ntolerance={}\nmax_row_error={:.6}\npass={}\n",
            self.name, self.runs, self.tolerance, self.max_row_error, self.pass
        )
    }
}

fn table_to_matrix(t: &Table) -> DMatrix<f64> {
    DMatrix::from_row_slice(t.rows(), t.cols(), t.as_slice())
}

fn uniform_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..=1.0))
}

/// Expected positive-pair weights `G[y, b]` of the η-corrected DeepWalk loss
/// with `B = V`.
fn expected_pair_weights(powers: &[DMatrix<f64>], fanouts: &[usize], window: usize) -> DMatrix<f64> {
    let n = powers[0].nrows();
    let c = window as f64;
    let mut g = DMatrix::zeros(n, n);
    for d in 1..=fanouts.len() {
        for k in 1..=window.min(d) {
            let replicas: f64 = fanouts[d - k..d].iter().map(|&f| f as f64).product();
            let w = (c - k as f64 + 1.0) / c * replicas;
            let reach = powers[d - k].row_sum();
            for y in 0..n {
                for b in 0..n {
                    g[(y, b)] += w * reach[y] * powers[k][(y, b)];
                }
            }
        }
    }
    g
}

/// Gradient of `Σ_u log mean_j exp⟨Z_u, Z_{n_j}⟩` over all `u`.
fn contrastive_gradient(z: &DMatrix<f64>, negatives: &[NodeId]) -> DMatrix<f64> {
    let mut grad = DMatrix::zeros(z.nrows(), z.ncols());
    if negatives.is_empty() {
        return grad;
    }
    for u in 0..z.nrows() {
        let logits: Vec<f64> = negatives.iter().map(|&v| z.row(u).dot(&z.row(v))).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = logits.iter().map(|l| (l - max).exp()).sum();
        for (&v, l) in negatives.iter().zip(&logits) {
            let p = (l - max).exp() / total;
            let (zu, zv) = (z.row(u).clone_owned(), z.row(v).clone_owned());
            let mut gu = grad.row_mut(u);
            gu += zv * p;
            let mut gv = grad.row_mut(v);
            gv += zu * p;
        }
    }
    grad
}

/// Mean traversal-accumulated DeepWalk gradient (softmax objective, fixed `Z`
/// and negatives, `B = V`) against the exact transition-power decomposition.
pub fn audit_deepwalk_gradient(
    adj: &CompactAdj,
    config: &GradientAuditConfig,
    rng: &RngStream,
) -> Result<GradientAuditReport, LearningError> {
    let n = adj.n();
    let batch: Vec<NodeId> = (0..n).collect();
    let fanouts = FanoutSpec::new(config.fanouts.clone())?;
    let z = Table::uniform(n, config.dim, 0.5, &mut rng.substream(0).generator());
    let negatives = NegativeSampler::new(adj).draw(config.negatives, &mut rng.substream(1).generator());
    let opts = TraverseOptions { workers: config.workers, ..Default::default() };

    let mut sum = DMatrix::zeros(n, config.dim);
    let walks = rng.substream(2);
    for run in 0..config.runs {
        let mut acc = DeepWalkAcc::softmax(&z, config.window, &batch, negatives.clone());
        traverse(adj, &batch, &fanouts, &mut acc, &mut UniformBias, &walks.substream(run as u64), &opts)?;
        sum += table_to_matrix(&acc.grad.to_table(n));
    }
    let mean = sum / config.runs.max(1) as f64;

    let dense = DenseTransition::from_adj(adj)?;
    let powers = (0..=fanouts.depth()).map(|k| exact_tk(&dense, k).map(|t| t.0)).collect::<Result<Vec<_>, _>>()?;
    let g = expected_pair_weights(&powers, fanouts.as_slice(), config.window);
    let zm = table_to_matrix(&z);
    let oracle = contrastive_gradient(&zm, &negatives) - (&g + g.transpose()) * &zm;
    Ok(GradientAuditReport::new("deepwalk_gradient", config.runs, config.deepwalk_tolerance, &[mean], &[oracle]))
}

/// Mean factorization gradient with `T̂^1 .. T̂^K` read from one forest per run
/// (`F = [f; K]`, `B = V`) against the gradient at the exact powers.
pub fn audit_factorization_gradient(
    adj: &CompactAdj,
    config: &GradientAuditConfig,
    rng: &RngStream,
) -> Result<GradientAuditReport, LearningError> {
    let n = adj.n();
    let depth = config.coefficients.len();
    let f = config.fanouts.first().copied().unwrap_or(0);
    let fanouts = FanoutSpec::constant(f, depth)?;
    let batch: Vec<NodeId> = (0..n).collect();
    let mut gen = rng.substream(0).generator();
    let l = uniform_matrix(n, config.dim, &mut gen);
    let r = uniform_matrix(n, config.dim, &mut gen);
    let opts = TraverseOptions { workers: config.workers, ..Default::default() };

    let (mut sum_l, mut sum_r) = (DMatrix::zeros(n, config.dim), DMatrix::zeros(n, config.dim));
    let walks = rng.substream(1);
    for run in 0..config.runs {
        let forest = traverse(adj, &batch, &fanouts, &mut NoAccumulate, &mut UniformBias, &walks.substream(run as u64), &opts)?;
        let mut estimates = vec![DMatrix::zeros(n, n); depth];
        for node in forest.nodes().iter().filter(|x| x.depth > 0) {
            estimates[node.depth - 1][(batch[node.tree], node.node)] += 1.0;
        }
        for (k, e) in estimates.iter_mut().enumerate() {
            *e /= (f as f64).powi(k as i32 + 1);
        }
        let (gl, gr) = factorization_gradient(&l, &r, &config.coefficients, &estimates)?;
        sum_l += gl;
        sum_r += gr;
    }
    let runs = config.runs.max(1) as f64;

    let dense = DenseTransition::from_adj(adj)?;
    let powers = (1..=depth).map(|k| exact_tk(&dense, k).map(|t| t.0)).collect::<Result<Vec<_>, _>>()?;
    let (ol, or) = factorization_gradient(&l, &r, &config.coefficients, &powers)?;
    Ok(GradientAuditReport::new(
        "factorization_gradient",
        config.runs,
        config.factorization_tolerance,
        &[sum_l / runs, sum_r / runs],
        &[ol, or],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_store::{build_compact_adj, EdgeList};

    fn toy() -> CompactAdj {
        let el = EdgeList::undirected(5, &[(0, 1), (1, 2), (1, 3), (1, 4), (3, 4)]);
        build_compact_adj(&el, true).unwrap().0
    }

    #[test]
    fn pair_weights_on_a_single_edge() {
        // Two nodes joined by one edge alternate deterministically.
        let adj = build_compact_adj(&EdgeList::undirected(2, &[(0, 1)]), true).unwrap().0;
        let dense = DenseTransition::from_adj(&adj).unwrap();
        let powers: Vec<_> = (0..=2).map(|k| exact_tk(&dense, k).unwrap().0).collect();
        let g = expected_pair_weights(&powers, &[2, 3], 2);
        // depth 1, k=1: w=1·2; depth 2, k=1: w=1·3; depth 2, k=2: w=½·6 on the diagonal.
        assert!((g[(0, 1)] - 5.0).abs() < 1e-12);
        assert!((g[(0, 0)] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_graph_matches_exactly() {
        // On a 2-cycle every walk is forced, so one run equals the expectation.
        let adj = build_compact_adj(&EdgeList::undirected(2, &[(0, 1)]), true).unwrap().0;
        let cfg = GradientAuditConfig { runs: 1, dim: 3, ..Default::default() };
        let report = audit_deepwalk_gradient(&adj, &cfg, &RngStream::new(1)).unwrap();
        assert!(report.max_row_error < 1e-12, "{report:?}");
    }

    #[test]
    fn deepwalk_audit_converges_on_toy() {
        let cfg = GradientAuditConfig { runs: 2000, ..Default::default() };
        let report = audit_deepwalk_gradient(&toy(), &cfg, &RngStream::new(2)).unwrap();
        assert!(report.max_row_error < 0.1, "{report:?}");
    }

    #[test]
    fn factorization_audit_converges_on_toy() {
        let cfg = GradientAuditConfig { runs: 2000, ..Default::default() };
        let report = audit_factorization_gradient(&toy(), &cfg, &RngStream::new(3)).unwrap();
        assert!(report.max_row_error < 0.05, "{report:?}");
        assert_eq!(report.row_errors.len(), 5);
    }

    #[test]
    fn contrastive_gradient_matches_accumulator() {
        let adj = toy();
        let z = Table::uniform(5, 3, 0.5, &mut RngStream::new(4).generator());
        let negs = vec![0, 3, 3, 4];
        let acc = DeepWalkAcc::softmax(&z, 2, &[0, 1, 2, 3, 4], negs.clone());
        let diff = table_to_matrix(&acc.grad.to_table(adj.n())) - contrastive_gradient(&table_to_matrix(&z), &negs);
        assert!(diff.norm() < 1e-12);
    }
}
