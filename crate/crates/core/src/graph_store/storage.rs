use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{build_compact_adj, generate_graph, GraphError, GraphKind};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StorageReport {
    /// `(n, m, bytes)` per grid point; `m` counts stored directed entries.
    pub points: Vec<(usize, usize, usize)>,
    /// Fitted `bytes ≈ c0 + c1 n + c2 m`.
    pub coefficients: [f64; 3],
    pub r_squared: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl StorageReport {
    pub fn to_kv(&self) -> String {
        format!(
            "audit=storage\npoints={}\nc0={:.3}\nc_n={:.6}\nc_m={:.6}\nr_squared={:.9}\nthreshold={}\npass={}\n",
            self.points.len(),
            self.coefficients[0],
            self.coefficients[1],
            self.coefficients[2],
            self.r_squared,
            self.threshold,
            self.pass
        )
    }
}

/// Least-squares fit of [`super::CompactAdj::heap_bytes`] against `(1, n, m)`
/// over Erdős–Rényi graphs at every `(n, average degree)` pair.
pub fn storage_fit(sizes: &[usize], degrees: &[f64], seed: u64) -> Result<StorageReport, GraphError> {
    let mut points = Vec::new();
    for (i, &n) in sizes.iter().enumerate() {
        for (j, &d) in degrees.iter().enumerate() {
            let p = (d / (n.max(2) - 1) as f64).min(1.0);
            let g = generate_graph(GraphKind::ErdosRenyi, n, p, seed ^ ((i as u64) << 32 | j as u64))?;
            let adj = build_compact_adj(&g.edges, true)?.0;
            points.push((adj.n(), adj.m(), adj.heap_bytes()));
        }
    }
    let x = DMatrix::from_fn(points.len(), 3, |r, c| match c {
        0 => 1.0,
        1 => points[r].0 as f64,
        _ => points[r].1 as f64,
    });
    let y = DVector::from_iterator(points.len(), points.iter().map(|p| p.2 as f64));
    let beta = x
        .clone()
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| GraphError::Infeasible(format!("storage fit failed: {e}")))?;
    let fitted = &x * &beta;
    let mean = y.mean();
    let ss_res = (&y - fitted).norm_squared();
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let threshold = 0.999;
    Ok(StorageReport {
        points,
        coefficients: [beta[0], beta[1], beta[2]],
        r_squared,
        threshold,
        pass: r_squared >= threshold,
    })
}
