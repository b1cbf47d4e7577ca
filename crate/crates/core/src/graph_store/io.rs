use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{CompactAdj, Edge, EdgeList, GraphError, NodeId};

pub const SNAPSHOT_MAGIC: &[u8; 5] = b"GTTF1";

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Remap arbitrary string ids densely in first-seen order.
    pub map_ids: bool,
    /// Keep `u u` lines instead of dropping them.
    pub allow_self_loops: bool,
    pub directed: bool,
}

fn io_err(path: &Path, source: std::io::Error) -> GraphError {
    GraphError::Io { path: path.display().to_string(), source }
}

/// Read a `src<TAB>dst[<TAB>weight]` edge list. Lines starting with `#` are skipped.
pub fn load_edge_list(path: impl AsRef<Path>, opts: LoadOptions) -> Result<EdgeList, GraphError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    parse_edge_list(BufReader::new(file), opts).map_err(|e| match e {
        GraphError::Io { source, .. } => io_err(path, source),
        other => other,
    })
}

pub fn parse_edge_list(reader: impl BufRead, opts: LoadOptions) -> Result<EdgeList, GraphError> {
    let mut ids: HashMap<String, NodeId> = HashMap::new();
    let mut names: Vec<String> = Vec::new();
    let mut max_id: Option<NodeId> = None;
    let mut out = EdgeList { directed: opts.directed, ..Default::default() };

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|source| GraphError::Io { path: String::new(), source })?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(GraphError::Parse {
                line: lineno,
                message: format!("expected 2 or 3 fields, found {}", fields.len()),
            });
        }
        let mut resolve = |token: &str| -> Result<NodeId, GraphError> {
            if opts.map_ids {
                let next = names.len();
                Ok(*ids.entry(token.to_string()).or_insert_with(|| {
                    names.push(token.to_string());
                    next
                }))
            } else {
                token.parse::<NodeId>().map_err(|_| GraphError::NonIntegerId {
                    line: lineno,
                    token: token.to_string(),
                })
            }
        };
        let src = resolve(fields[0])?;
        let dst = resolve(fields[1])?;
        let weight = match fields.get(2) {
            Some(tok) => match tok.parse::<f64>() {
                Ok(w) if w > 0.0 && w.is_finite() => Some(w),
                _ => {
                    return Err(GraphError::Parse {
                        line: lineno,
                        message: format!("weight {tok:?} is not a positive number"),
                    })
                }
            },
            None => None,
        };
        max_id = Some(max_id.map_or(src.max(dst), |m| m.max(src).max(dst)));
        if src == dst && !opts.allow_self_loops {
            out.dropped_self_loops += 1;
            continue;
        }
        out.edges.push(Edge { src, dst, weight });
    }

    if opts.map_ids {
        out.n = names.len();
        out.id_map = Some(names);
    } else {
        out.n = max_id.map_or(0, |m| m + 1);
    }
    Ok(out)
}

/// Persist the dense-id translation table as `dense<TAB>original` lines.
pub fn write_id_map(path: impl AsRef<Path>, names: &[String]) -> Result<(), GraphError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for (i, name) in names.iter().enumerate() {
        writeln!(w, "{i}\t{name}").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Binary snapshot: magic, `n`, `m`, degrees, neighbor pool; all integers u64 LE.
pub fn write_snapshot(adj: &CompactAdj, mut w: impl Write) -> std::io::Result<()> {
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&(adj.n() as u64).to_le_bytes())?;
    w.write_all(&(adj.m() as u64).to_le_bytes())?;
    for &d in adj.degrees() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for &v in adj.neighbor_pool() {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    w.flush()
}

pub fn read_snapshot(mut r: impl Read) -> Result<CompactAdj, GraphError> {
    let snap = |e: std::io::Error| GraphError::Snapshot(e.to_string());
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic).map_err(snap)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(GraphError::Snapshot("bad magic".into()));
    }
    let mut word = [0u8; 8];
    let mut next = |r: &mut dyn Read| -> Result<u64, GraphError> {
        r.read_exact(&mut word).map_err(snap)?;
        Ok(u64::from_le_bytes(word))
    };
    let n = next(&mut r)? as usize;
    let m = next(&mut r)? as usize;
    if n == 0 {
        return Err(GraphError::Empty);
    }
    let mut degrees = Vec::with_capacity(n);
    for _ in 0..n {
        let d = next(&mut r)? as usize;
        if d == 0 {
            return Err(GraphError::Snapshot("zero degree".into()));
        }
        degrees.push(d);
    }
    if degrees.iter().sum::<usize>() != m {
        return Err(GraphError::Snapshot("degree sum does not match m".into()));
    }
    let mut pool = Vec::with_capacity(m);
    for _ in 0..m {
        let v = next(&mut r)? as usize;
        if v >= n {
            return Err(GraphError::NodeOutOfRange { id: v, n });
        }
        pool.push(v);
    }
    Ok(CompactAdj::from_parts_unchecked(degrees, pool))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_store::build_compact_adj;

    fn parse(s: &str, opts: LoadOptions) -> Result<EdgeList, GraphError> {
        parse_edge_list(s.as_bytes(), opts)
    }

    #[test]
    fn two_edges_three_nodes() {
        let el = parse("0\t1\n1\t2\n", LoadOptions::default()).unwrap();
        assert_eq!(el.len(), 2);
        assert_eq!(el.n, 3);
    }

    #[test]
    fn comments_are_skipped() {
        let el = parse("# comment\n0\t1\n", LoadOptions::default()).unwrap();
        assert_eq!(el.len(), 1);
        assert_eq!(el.n, 2);
    }

    #[test]
    fn string_ids_mapped_in_first_seen_order() {
        let opts = LoadOptions { map_ids: true, ..Default::default() };
        let el = parse("b\ta\na\tc\n", opts).unwrap();
        assert_eq!(el.n, 3);
        assert_eq!(el.id_map.as_deref().unwrap(), ["b", "a", "c"]);
        assert_eq!((el.edges[0].src, el.edges[0].dst), (0, 1));
        assert_eq!((el.edges[1].src, el.edges[1].dst), (1, 2));
    }

    #[test]
    fn string_ids_without_mapping_fail_with_line() {
        let err = parse("0\t1\n\nx\t2\n", LoadOptions::default()).unwrap_err();
        assert!(matches!(err, GraphError::NonIntegerId { line: 3, .. }), "{err}");
    }

    #[test]
    fn bad_weight_and_field_count() {
        assert!(matches!(
            parse("0\t1\t-2\n", LoadOptions::default()),
            Err(GraphError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse("0\n", LoadOptions::default()),
            Err(GraphError::Parse { line: 1, .. })
        ));
        let el = parse("0\t1\t2.5\n", LoadOptions::default()).unwrap();
        assert_eq!(el.edges[0].weight, Some(2.5));
    }

    #[test]
    fn self_loops_dropped_unless_allowed() {
        let el = parse("0\t0\n0\t1\n", LoadOptions::default()).unwrap();
        assert_eq!(el.len(), 1);
        assert_eq!(el.dropped_self_loops, 1);
        let opts = LoadOptions { allow_self_loops: true, ..Default::default() };
        assert_eq!(parse("0\t0\n0\t1\n", opts).unwrap().len(), 2);
    }

    #[test]
    fn snapshot_layout_and_roundtrip() {
        let el = EdgeList::undirected(3, &[(0, 1), (1, 2)]);
        let (adj, _) = build_compact_adj(&el, true).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&adj, &mut buf).unwrap();
        assert_eq!(&buf[..5], b"GTTF1");
        assert_eq!(u64::from_le_bytes(buf[5..13].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(buf[13..21].try_into().unwrap()), 4);
        assert_eq!(buf.len(), 5 + 16 + 8 * (3 + 4));
        assert_eq!(read_snapshot(buf.as_slice()).unwrap(), adj);
    }

    #[test]
    fn snapshot_rejects_corruption() {
        let el = EdgeList::undirected(2, &[(0, 1)]);
        let (adj, _) = build_compact_adj(&el, true).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&adj, &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_snapshot(bad.as_slice()).is_err());
        let last = buf.len() - 8;
        buf[last] = 9;
        assert!(matches!(read_snapshot(buf.as_slice()), Err(GraphError::NodeOutOfRange { .. })));
    }
}
