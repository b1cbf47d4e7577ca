//! Transition-matrix power estimation and the dense oracles the audits trust.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::graph_store::{CompactAdj, NodeId};
use crate::rng::RngStream;
use crate::traversal::{traverse, FanoutSpec, NoAccumulate, TraversalError, TraverseOptions, UniformBias};

/// Largest graph the dense oracle accepts.
pub const ORACLE_MAX_NODES: usize = 10_000;
/// Standard errors allowed between a Monte-Carlo mean and its exact value.
pub const SIGMA_TOLERANCE: f64 = 5.0;
/// Relative slack on the variance bound.
pub const VARIANCE_SLACK: f64 = 0.15;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error(transparent)]
    Traversal(#[from] TraversalError),
    #[error("dense oracle refuses graphs with more than {ORACLE_MAX_NODES} nodes (got {0})")]
    TooLarge(usize),
    #[error("k and f must be at least 1")]
    BadShape,
    #[error("runs must be at least 1")]
    NoRuns,
}

/// Sparse estimate of `T^k` over the rows of a node batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionEstimate {
    pub batch: Vec<NodeId>,
    pub k: usize,
    pub f: usize,
    /// `rows[i][v]` estimates `T^k[batch[i], v]`.
    pub rows: Vec<BTreeMap<NodeId, f64>>,
}

impl TransitionEstimate {
    pub fn get(&self, row: usize, v: NodeId) -> f64 {
        self.rows[row].get(&v).copied().unwrap_or(0.0)
    }

    pub fn row_sum(&self, row: usize) -> f64 {
        self.rows[row].values().sum()
    }

    /// `u<TAB>v<TAB>value` lines in batch order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (i, row) in self.rows.iter().enumerate() {
            for (v, x) in row {
                let _ = writeln!(out, "{}\t{}\t{}", self.batch[i], v, x);
            }
        }
        out
    }

    /// Dense `|batch| x n` form.
    pub fn to_dense(&self, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows.len(), n);
        for (i, row) in self.rows.iter().enumerate() {
            for (&v, &x) in row {
                m[(i, v)] = x;
            }
        }
        m
    }
}

/// Depth-k visit counts per batch row.
fn depth_counts(
    adj: &CompactAdj,
    batch: &[NodeId],
    k: usize,
    f: usize,
    rng: &RngStream,
    workers: usize,
) -> Result<Vec<BTreeMap<NodeId, u64>>, EstimatorError> {
    if k == 0 || f == 0 {
        return Err(EstimatorError::BadShape);
    }
    let fanouts = FanoutSpec::constant(f, k)?;
    let opts = TraverseOptions { workers, ..Default::default() };
    let forest = traverse(adj, batch, &fanouts, &mut NoAccumulate, &mut UniformBias, rng, &opts)?;
    Ok((0..batch.len())
        .map(|t| {
            let mut row = BTreeMap::new();
            for r in forest.level(t, k) {
                *row.entry(r.node).or_insert(0) += 1;
            }
            row
        })
        .collect())
}

/// `T̂^k[u, v] = count(u, k, v) / f^k` from one uniform traversal.
pub fn estimate_tk(
    adj: &CompactAdj,
    batch: &[NodeId],
    k: usize,
    f: usize,
    rng: &RngStream,
    workers: usize,
) -> Result<TransitionEstimate, EstimatorError> {
    let counts = depth_counts(adj, batch, k, f, rng, workers)?;
    let scale = (f as f64).powi(k as i32);
    Ok(TransitionEstimate {
        batch: batch.to_vec(),
        k,
        f,
        rows: counts
            .into_iter()
            .map(|row| row.into_iter().map(|(v, c)| (v, c as f64 / scale)).collect())
            .collect(),
    })
}

/// Row-stochastic `n x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTransition(pub DMatrix<f64>);

impl DenseTransition {
    /// `T = D^{-1} A` of the stored graph.
    pub fn from_adj(adj: &CompactAdj) -> Result<Self, EstimatorError> {
        let n = adj.n();
        if n > ORACLE_MAX_NODES {
            return Err(EstimatorError::TooLarge(n));
        }
        let mut t = DMatrix::zeros(n, n);
        for u in 0..n {
            let p = 1.0 / adj.degree(u) as f64;
            for &v in adj.neighbors(u) {
                t[(u, v)] += p;
            }
        }
        Ok(Self(t))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, u: NodeId, v: NodeId) -> f64 {
        self.0[(u, v)]
    }

    pub fn max_row_sum_error(&self) -> f64 {
        self.0.row_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Exact `T^k` by repeated dense multiplication.
pub fn exact_tk(dense: &DenseTransition, k: usize) -> Result<DenseTransition, EstimatorError> {
    let n = dense.n();
    if n > ORACLE_MAX_NODES {
        return Err(EstimatorError::TooLarge(n));
    }
    let mut out = DMatrix::identity(n, n);
    for _ in 0..k {
        out = &out * &dense.0;
    }
    Ok(DenseTransition(out))
}

/// Exact variance of `T̂^k` accounting for siblings sharing ancestors.
///
/// With `M1_d`, `M2_d` the first and second moments of per-tree depth-`d`
/// counts, `M1_d = f T M1_{d-1}` and
/// `M2_d = f T M2_{d-1} + f (f - 1) (T M1_{d-1})∘²`.
pub fn exact_tree_variance(dense: &DenseTransition, k: usize, f: usize) -> DMatrix<f64> {
    let n = dense.n();
    let t = &dense.0;
    let ff = f as f64;
    let mut m1 = DMatrix::<f64>::identity(n, n);
    let mut m2 = DMatrix::<f64>::identity(n, n);
    for _ in 0..k {
        let tm1 = t * &m1;
        m2 = (t * &m2) * ff + tm1.component_mul(&tm1) * (ff * (ff - 1.0));
        m1 = tm1 * ff;
    }
    let scale = ff.powi(2 * k as i32);
    (m2 - m1.component_mul(&m1)) / scale
}

/// Variance as if the `f^k` depth-k walkers were independent: `T^k (1 - T^k) / f^k`.
pub fn independent_variance(tk: &DenseTransition, k: usize, f: usize) -> DMatrix<f64> {
    let p = &tk.0;
    p.map(|x| x * (1.0 - x)) / (f as f64).powi(k as i32)
}

/// Prop-2 style bound `1 / (4 f^k)`.
pub fn variance_bound(k: usize, f: usize) -> f64 {
    1.0 / (4.0 * (f as f64).powi(k as i32))
}

/// Integer power sums of depth counts over independent runs.
///
/// Counts are summed exactly, so the reduction order (and the worker count)
/// cannot perturb any statistic.
struct CountMoments {
    runs: u64,
    scale: f64,
    /// `sums[i][v] = [Σc, Σc², Σc³, Σc⁴]`.
    sums: Vec<Vec<[u128; 4]>>,
}

impl CountMoments {
    fn collect(
        adj: &CompactAdj,
        batch: &[NodeId],
        k: usize,
        f: usize,
        runs: usize,
        rng: &RngStream,
        workers: usize,
    ) -> Result<Self, EstimatorError> {
        if runs == 0 {
            return Err(EstimatorError::NoRuns);
        }
        let n = adj.n();
        let mut sums = vec![vec![[0u128; 4]; n]; batch.len()];
        for run in 0..runs {
            let counts = depth_counts(adj, batch, k, f, &rng.substream(run as u64), workers)?;
            for (i, row) in counts.into_iter().enumerate() {
                for (v, c) in row {
                    let c = c as u128;
                    let s = &mut sums[i][v];
                    s[0] += c;
                    s[1] += c * c;
                    s[2] += c * c * c;
                    s[3] += c * c * c * c;
                }
            }
        }
        Ok(Self { runs: runs as u64, scale: (f as f64).powi(k as i32), sums })
    }

    fn mean(&self, i: usize, v: NodeId) -> f64 {
        self.sums[i][v][0] as f64 / self.runs as f64 / self.scale
    }

    /// Unbiased sample variance of the estimator and the standard error of
    /// that variance estimate.
    fn variance(&self, i: usize, v: NodeId) -> (f64, f64) {
        let r = self.runs as f64;
        if self.runs < 2 {
            return (0.0, f64::INFINITY);
        }
        let s = self.sums[i][v].map(|x| x as f64);
        let m = s[0] / r;
        let cm2 = s[1] / r - m * m;
        let cm4 = s[3] / r - 4.0 * m * s[2] / r + 6.0 * m * m * s[1] / r - 3.0 * m.powi(4);
        let var = cm2 * r / (r - 1.0);
        let var_of_var = ((cm4 - cm2 * cm2 * (r - 3.0) / (r - 1.0)) / r).max(0.0);
        let scale2 = self.scale * self.scale;
        (var / scale2, var_of_var.sqrt() / scale2)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MeanEntry {
    pub u: NodeId,
    pub v: NodeId,
    pub exact: f64,
    pub mean: f64,
    pub standard_error: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct UnbiasednessReport {
    pub k: usize,
    pub f: usize,
    pub runs: usize,
    pub tolerance: f64,
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
    pub phantom_transitions: usize,
    pub pass: bool,
    pub entries: Vec<MeanEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VarianceEntry {
    pub u: NodeId,
    pub v: NodeId,
    pub exact_tk: f64,
    pub empirical: f64,
    pub standard_error: f64,
    pub independent_formula: f64,
    pub tree_exact: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VarianceReport {
    pub k: usize,
    pub f: usize,
    pub runs: usize,
    pub bound: f64,
    pub slack: f64,
    pub max_empirical: f64,
    pub bound_violations: usize,
    pub formula_mismatches: usize,
    pub pass_bound: bool,
    pub pass_formula: bool,
    pub pass: bool,
    pub entries: Vec<VarianceEntry>,
}

fn check_oracle(adj: &CompactAdj) -> Result<DenseTransition, EstimatorError> {
    if adj.n() > ORACLE_MAX_NODES {
        return Err(EstimatorError::TooLarge(adj.n()));
    }
    DenseTransition::from_adj(adj)
}

/// Monte-Carlo mean of `T̂^k` against the exact power. Passes when every
/// entry is within `5 sqrt(1 / (4 f^k runs))`.
pub fn audit_unbiasedness(
    adj: &CompactAdj,
    batch: &[NodeId],
    k: usize,
    f: usize,
    runs: usize,
    rng: &RngStream,
    workers: usize,
) -> Result<UnbiasednessReport, EstimatorError> {
    let tk = exact_tk(&check_oracle(adj)?, k)?;
    let moments = CountMoments::collect(adj, batch, k, f, runs, rng, workers)?;
    Ok(unbiasedness_from(&moments, &tk, batch, k, f, runs))
}

fn unbiasedness_from(
    moments: &CountMoments,
    tk: &DenseTransition,
    batch: &[NodeId],
    k: usize,
    f: usize,
    runs: usize,
) -> UnbiasednessReport {
    let tolerance = SIGMA_TOLERANCE * (variance_bound(k, f) / runs as f64).sqrt();
    let mut entries = Vec::new();
    let mut phantom = 0;
    for (i, &u) in batch.iter().enumerate() {
        for v in 0..tk.n() {
            let mean = moments.mean(i, v);
            let exact = tk.get(u, v);
            if mean > 0.0 && exact == 0.0 {
                phantom += 1;
            }
            let (var, _) = moments.variance(i, v);
            entries.push(MeanEntry {
                u,
                v,
                exact,
                mean,
                standard_error: (var / runs as f64).sqrt(),
                abs_error: (mean - exact).abs(),
            });
        }
    }
    let max_abs_error = entries.iter().map(|e| e.abs_error).fold(0.0, f64::max);
    let mean_abs_error = entries.iter().map(|e| e.abs_error).sum::<f64>() / entries.len() as f64;
    UnbiasednessReport {
        k,
        f,
        runs,
        tolerance,
        max_abs_error,
        mean_abs_error,
        phantom_transitions: phantom,
        pass: max_abs_error <= tolerance && phantom == 0,
        entries,
    }
}

/// Empirical variance of `T̂^k` against `1 / (4 f^k)` (with 15% slack) and
/// against the independent-walker form `T^k (1 - T^k) / f^k`.
pub fn audit_variance(
    adj: &CompactAdj,
    batch: &[NodeId],
    k: usize,
    f: usize,
    runs: usize,
    rng: &RngStream,
    workers: usize,
) -> Result<VarianceReport, EstimatorError> {
    let dense = check_oracle(adj)?;
    let tk = exact_tk(&dense, k)?;
    let moments = CountMoments::collect(adj, batch, k, f, runs, rng, workers)?;
    Ok(variance_from(&moments, &dense, &tk, batch, k, f, runs))
}

fn variance_from(
    moments: &CountMoments,
    dense: &DenseTransition,
    tk: &DenseTransition,
    batch: &[NodeId],
    k: usize,
    f: usize,
    runs: usize,
) -> VarianceReport {
    let bound = variance_bound(k, f);
    let independent = independent_variance(tk, k, f);
    let tree = exact_tree_variance(dense, k, f);
    let mut entries = Vec::new();
    let (mut violations, mut mismatches) = (0, 0);
    for (i, &u) in batch.iter().enumerate() {
        for v in 0..tk.n() {
            let (empirical, se) = moments.variance(i, v);
            let formula = independent[(u, v)];
            if empirical > bound * (1.0 + VARIANCE_SLACK) {
                violations += 1;
            }
            // A degenerate entry has zero variance and zero standard error.
            let gap = (empirical - formula).abs();
            if gap > SIGMA_TOLERANCE * se && gap > 1e-12 {
                mismatches += 1;
            }
            entries.push(VarianceEntry {
                u,
                v,
                exact_tk: tk.get(u, v),
                empirical,
                standard_error: se,
                independent_formula: formula,
                tree_exact: tree[(u, v)],
            });
        }
    }
    let max_empirical = entries.iter().map(|e| e.empirical).fold(0.0, f64::max);
    let pass_bound = violations == 0;
    let pass_formula = mismatches == 0;
    VarianceReport {
        k,
        f,
        runs,
        bound,
        slack: VARIANCE_SLACK,
        max_empirical,
        bound_violations: violations,
        formula_mismatches: mismatches,
        pass_bound,
        pass_formula,
        pass: pass_bound && pass_formula,
        entries,
    }
}

/// Both audits from one shared set of Monte-Carlo runs.
pub fn audit_estimator(
    adj: &CompactAdj,
    batch: &[NodeId],
    k: usize,
    f: usize,
    runs: usize,
    rng: &RngStream,
    workers: usize,
) -> Result<(UnbiasednessReport, VarianceReport), EstimatorError> {
    let dense = check_oracle(adj)?;
    let tk = exact_tk(&dense, k)?;
    let moments = CountMoments::collect(adj, batch, k, f, runs, rng, workers)?;
    Ok((
        unbiasedness_from(&moments, &tk, batch, k, f, runs),
        variance_from(&moments, &dense, &tk, batch, k, f, runs),
    ))
}

impl UnbiasednessReport {
    pub fn to_kv(&self) -> String {
        format!(
            "audit=unbiasedness\nk={}\nf={}\nruns={}\ntolerance={:.6}\nmax_abs_error={:.6}\nmean_abs_error={:.6}\nphantom_transitions={}\nthreshold_rule=5_standard_errors_of_bound\npass={}\n",
            self.k, self.f, self.runs, self.tolerance, self.max_abs_error, self.mean_abs_error,
            self.phantom_transitions, self.pass
        )
    }

    pub fn entries_tsv(&self) -> String {
        let mut out = String::from("u\tv\texact\tmean\tstandard_error\tabs_error\n");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{}\t{}\t{:.8}\t{:.8}\t{:.8}\t{:.8}",
                e.u, e.v, e.exact, e.mean, e.standard_error, e.abs_error
            );
        }
        out
    }
}

impl VarianceReport {
    pub fn to_kv(&self) -> String {
        let worst = self
            .entries
            .iter()
            .max_by(|a, b| a.empirical.total_cmp(&b.empirical))
            .map(|e| format!("{},{}", e.u, e.v))
            .unwrap_or_default();
        format!(
            "audit=variance\nk={}\nf={}\nruns={}\nbound={:.6}\nslack={}\nmax_empirical={:.6}\nmax_entry={}\nbound_violations={}\nformula_mismatches={}\npass_bound={}\npass_formula={}\npass={}\n",
            self.k, self.f, self.runs, self.bound, self.slack, self.max_empirical, worst,
            self.bound_violations, self.formula_mismatches, self.pass_bound, self.pass_formula, self.pass
        )
    }

    pub fn entries_tsv(&self) -> String {
        let mut out = String::from("u\tv\texact_tk\tempirical\tstandard_error\tindependent_formula\ttree_exact\n");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{}\t{}\t{:.8}\t{:.8}\t{:.8}\t{:.8}\t{:.8}",
                e.u, e.v, e.exact_tk, e.empirical, e.standard_error, e.independent_formula, e.tree_exact
            );
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChiSquareReport {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub observed: Vec<u64>,
    pub expected: Vec<f64>,
}

/// Goodness of fit of `observed` counts to probabilities `probs`.
/// Zero-probability cells are dropped; a count in one makes `p = 0`.
pub fn chi_square_test(observed: &[u64], probs: &[f64]) -> ChiSquareReport {
    let total: u64 = observed.iter().sum();
    let expected: Vec<f64> = probs.iter().map(|p| p * total as f64).collect();
    let mut statistic = 0.0;
    let mut cells = 0usize;
    let mut impossible = false;
    for (&o, &e) in observed.iter().zip(&expected) {
        if e <= 0.0 {
            impossible |= o > 0;
            continue;
        }
        cells += 1;
        statistic += (o as f64 - e).powi(2) / e;
    }
    let dof = cells.saturating_sub(1);
    let p_value = if impossible {
        0.0
    } else if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64).map(|d| 1.0 - d.cdf(statistic)).unwrap_or(0.0)
    };
    ChiSquareReport { statistic, dof, p_value, observed: observed.to_vec(), expected }
}

/// Endpoints of `runs` single-walker (fanout 1) walks of length `k` from `seed`,
/// tested against row `seed` of the exact `T^k`.
pub fn fanout_one_endpoint_test(
    adj: &CompactAdj,
    seed: NodeId,
    k: usize,
    runs: usize,
    rng: &RngStream,
    workers: usize,
) -> Result<ChiSquareReport, EstimatorError> {
    let tk = exact_tk(&check_oracle(adj)?, k)?;
    let fanouts = FanoutSpec::constant(1, k)?;
    let opts = TraverseOptions { workers, ..Default::default() };
    // One traversal with the seed repeated is `runs` independent single walkers.
    let batch = vec![seed; runs];
    let forest = traverse(adj, &batch, &fanouts, &mut NoAccumulate, &mut UniformBias, rng, &opts)?;
    let mut observed = vec![0u64; adj.n()];
    for t in 0..runs {
        for r in forest.level(t, k) {
            observed[r.node] += 1;
        }
    }
    let probs: Vec<f64> = (0..adj.n()).map(|v| tk.get(seed, v)).collect();
    Ok(chi_square_test(&observed, &probs))
}
