use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::graph_store::CompactAdj;
use crate::learning::Table;

#[derive(Debug, Clone, Serialize)]
pub struct GraphStats {
    pub n: usize,
    pub m: usize,
}

impl GraphStats {
    pub fn of(adj: &CompactAdj) -> Self {
        Self { n: adj.n(), m: adj.m() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Phase {
    pub name: String,
    pub seconds: f64,
}

/// One per run, written last as `manifest.json`.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub flags: serde_json::Value,
    pub seed: u64,
    pub graph: Option<GraphStats>,
    pub phases: Vec<Phase>,
    pub outputs: Vec<PathBuf>,
    #[serde(skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

/// Collects outputs and phase timings under one output directory.
pub struct Run {
    dir: Option<PathBuf>,
    manifest: RunManifest,
}

impl Run {
    pub fn new(command: &str, flags: &impl Serialize, seed: u64, dir: Option<PathBuf>) -> Result<Self> {
        if let Some(d) = &dir {
            fs::create_dir_all(d).with_context(|| format!("cannot create output directory {}", d.display()))?;
        }
        Ok(Self {
            dir,
            manifest: RunManifest {
                command: command.to_string(),
                flags: serde_json::to_value(flags)?,
                seed,
                graph: None,
                phases: Vec::new(),
                outputs: Vec::new(),
                extra: Default::default(),
            },
        })
    }

    pub fn set_graph(&mut self, adj: &CompactAdj) {
        self.manifest.graph = Some(GraphStats::of(adj));
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        if let Ok(v) = serde_json::to_value(value) {
            self.manifest.extra.insert(key.to_string(), v);
        }
    }

    pub fn phase<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.manifest.phases.push(Phase { name: name.to_string(), seconds: start.elapsed().as_secs_f64() });
        out
    }

    /// Write `contents` to `name` inside the output directory, if any.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        if let Some(d) = &self.dir {
            let path = d.join(name);
            fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
            self.manifest.outputs.push(path);
        }
        Ok(())
    }

    pub fn finish(self) -> Result<()> {
        if let Some(d) = &self.dir {
            let path = d.join("manifest.json");
            let json = serde_json::to_string_pretty(&self.manifest)?;
            fs::write(&path, json + "\n").with_context(|| format!("cannot write {}", path.display()))?;
        }
        Ok(())
    }
}

/// `n d` header, then one row per node.
pub fn format_embeddings(z: &Table) -> String {
    let mut out = format!("{} {}\n", z.rows(), z.cols());
    for r in 0..z.rows() {
        let row: Vec<String> = z.row(r).iter().map(|x| x.to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_embeddings(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read embeddings {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("embeddings file is empty")?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad embeddings header {header:?}"))?;
    anyhow::ensure!(dims.len() == 2, "embeddings header must be `n d`, got {header:?}");
    let (n, d) = (dims[0], dims[1]);
    let mut data = Vec::with_capacity(n * d);
    for (i, line) in lines.take(n).enumerate() {
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<Result<_, _>>()
            .with_context(|| format!("bad number on embeddings row {i}"))?;
        anyhow::ensure!(row.len() == d, "embeddings row {i} has {} values, expected {d}", row.len());
        data.extend(row);
    }
    anyhow::ensure!(data.len() == n * d, "embeddings file has fewer than {n} rows");
    Ok(Table::from_vec(n, d, data))
}

pub fn format_losses(losses: &[f64]) -> String {
    let mut out = String::from("round,loss\n");
    for (i, l) in losses.iter().enumerate() {
        let _ = writeln!(out, "{i},{l}");
    }
    out
}

pub fn format_q_trace(trace: &[Vec<f64>]) -> String {
    let width = trace.first().map_or(0, Vec::len);
    let mut out = String::from("round");
    for j in 0..width {
        let _ = write!(out, ",q{}", j + 1);
    }
    out.push('\n');
    for (i, q) in trace.iter().enumerate() {
        let _ = write!(out, "{i}");
        for x in q {
            let _ = write!(out, ",{x}");
        }
        out.push('\n');
    }
    out
}

pub fn format_edges(edges: &[(usize, usize)]) -> String {
    let mut out = String::new();
    for (u, v) in edges {
        let _ = writeln!(out, "{u}\t{v}");
    }
    out
}
