use std::fmt::Write as _;
use std::time::Instant;

use anyhow::Result;
use rand::Rng;
use serde::Serialize;

use crate::graph_store::{build_compact_adj, generate_graph, GraphKind, NodeId};
use crate::rng::RngStream;
use crate::traversal::{traverse, FanoutSpec, NoAccumulate, TraverseOptions, UniformBias};

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub m: usize,
    pub mean_seconds: f64,
    pub std_seconds: f64,
    pub visited: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub ratio: Option<f64>,
    pub span: f64,
    pub pass: Option<bool>,
}

impl BenchReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("n\tm\tvisited\tmean_seconds\tstd_seconds\n");
        for r in &self.rows {
            let _ = writeln!(out, "{}\t{}\t{}\t{:.9}\t{:.9}", r.n, r.m, r.visited, r.mean_seconds, r.std_seconds);
        }
        out
    }

    pub fn to_kv(&self) -> String {
        match (self.ratio, self.pass) {
            (Some(ratio), Some(pass)) => {
                format!("audit=traversal_scaling\nsize_span={}\nmean_ratio={ratio:.4}\nthreshold=2\npass={pass}\n", self.span)
            }
            _ => "audit=traversal_scaling\nsizes=1\n".to_string(),
        }
    }
}

/// Time uniform traversals of `batch` random seeds on Erdős–Rényi graphs of
/// each size with the same average degree.
pub fn bench_traverse(
    sizes: &[usize],
    batch: usize,
    fanouts: &[usize],
    repeats: usize,
    degree: f64,
    seed: u64,
    workers: usize,
) -> Result<BenchReport> {
    let spec = FanoutSpec::new(fanouts.to_vec())?;
    let stream = RngStream::new(seed);
    let opts = TraverseOptions { workers, ..Default::default() };
    let mut rows = Vec::new();
    for (i, &n) in sizes.iter().enumerate() {
        let p = (degree / (n.max(2) - 1) as f64).min(1.0);
        let g = generate_graph(GraphKind::ErdosRenyi, n, p, stream.substream(i as u64).seed())?;
        let adj = build_compact_adj(&g.edges, true)?.0;
        let mut gen = stream.substream(1000 + i as u64).generator();
        let mut times = Vec::with_capacity(repeats);
        let mut visited = 0;
        for r in 0..repeats.max(1) + 1 {
            let seeds: Vec<NodeId> = (0..batch).map(|_| gen.gen_range(0..n)).collect();
            let rng = stream.substream(((i as u64) << 32) | r as u64);
            let start = Instant::now();
            let forest = traverse(&adj, &seeds, &spec, &mut NoAccumulate, &mut UniformBias, &rng, &opts)?;
            let t = start.elapsed().as_secs_f64();
            visited = forest.len();
            // The first repetition only warms caches and the allocator.
            if r > 0 {
                times.push(t);
            }
        }
        let mean = times.iter().sum::<f64>() / times.len() as f64;
        let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (times.len().max(2) - 1) as f64;
        rows.push(BenchRow { n: adj.n(), m: adj.m(), mean_seconds: mean, std_seconds: var.sqrt(), visited });
    }
    let span = match (sizes.iter().min(), sizes.iter().max()) {
        (Some(&lo), Some(&hi)) if lo > 0 => hi as f64 / lo as f64,
        _ => 1.0,
    };
    let (ratio, pass) = if rows.len() > 1 {
        let max = rows.iter().map(|r| r.mean_seconds).fold(f64::MIN, f64::max);
        let min = rows.iter().map(|r| r.mean_seconds).fold(f64::MAX, f64::min);
        let ratio = max / min;
        (Some(ratio), Some(ratio <= 2.0 && span >= 100.0))
    } else {
        (None, None)
    };
    Ok(BenchReport { rows, ratio, span, pass })
}
