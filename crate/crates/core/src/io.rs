//! File formats.
//!
//! Binary feature files are little-endian:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "DMC1"
//!      4     4  u32 version (1)
//!      8     8  u64 n
//!     16     4  u32 d
//!     20     1  u8 flags, bit 0: per-node alpha present
//!     21  4nd   f32 features, row-major
//!      …    4n  f32 alphas (only with bit 0)
//! ```
//!
//! Text feature files hold one comma-separated row per node. Sparse graphs
//! are text lines `u v cost`. Labels are written as `node<TAB>cluster`
//! lines; ground truth is read as one integer per line.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{AlphaSign, FeatureMatrix};
use crate::graph::SparseWeightedGraph;
use crate::solvers::Merge;

pub const MAGIC: &[u8; 4] = b"DMC1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 21;
const FLAG_ALPHA: u8 = 1;

/// Serializes a feature matrix in the binary layout. Alphas are written
/// when any node carries a nonzero value.
pub fn encode_features(fm: &FeatureMatrix) -> Vec<u8> {
    let with_alpha = fm.has_alpha();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * fm.data().len() + 4 * fm.n());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(fm.n() as u64).to_le_bytes());
    out.extend_from_slice(&(fm.d() as u32).to_le_bytes());
    out.push(if with_alpha { FLAG_ALPHA } else { 0 });
    for v in fm.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    if with_alpha {
        for a in fm.alphas() {
            out.extend_from_slice(&a.to_le_bytes());
        }
    }
    out
}

/// Parses the binary layout. Stored alphas come back with the sign `Off`;
/// callers pick the sign.
pub fn decode_features(bytes: &[u8]) -> Result<FeatureMatrix> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(
            bytes.len() as u64,
            format!("header needs {HEADER_LEN} bytes, file has {}", bytes.len()),
        ));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::format(0, "bad magic, expected \"DMC1\""));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let d = u32::from_le_bytes(bytes[16..20].try_into().expect("4 bytes")) as u64;
    let flags = bytes[20];
    if flags & !FLAG_ALPHA != 0 {
        return Err(Error::format(20, format!("unknown flag bits {flags:#04x}")));
    }
    if n == 0 || d == 0 {
        return Err(Error::format(8, format!("empty matrix {n} x {d}")));
    }
    let with_alpha = flags & FLAG_ALPHA != 0;
    let values = n
        .checked_mul(d)
        .and_then(|nd| nd.checked_add(if with_alpha { n } else { 0 }))
        .ok_or_else(|| Error::format(8, "declared size overflows"))?;
    let expected = (HEADER_LEN as u64)
        .checked_add(
            values
                .checked_mul(4)
                .ok_or_else(|| Error::format(8, "declared size overflows"))?,
        )
        .ok_or_else(|| Error::format(8, "declared size overflows"))?;
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(Error::format(
            actual,
            format!("payload truncated: expected {expected} bytes, found {actual}"),
        ));
    }
    if actual > expected {
        return Err(Error::format(
            expected,
            format!("{} trailing bytes after payload", actual - expected),
        ));
    }
    let (n, d) = (n as usize, d as usize);
    let floats = |start: usize, count: usize| -> Vec<f32> {
        bytes[start..start + 4 * count]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect()
    };
    let data = floats(HEADER_LEN, n * d);
    if let Some(p) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::format(
            (HEADER_LEN + 4 * p) as u64,
            format!("non-finite value in row {} column {}", p / d, p % d),
        ));
    }
    let alpha = if with_alpha {
        floats(HEADER_LEN + 4 * n * d, n)
    } else {
        vec![0.0; n]
    };
    FeatureMatrix::with_alpha(n, d, data, alpha, AlphaSign::Off)
}

/// Parses comma-separated rows. Blank lines are skipped.
pub fn parse_features_csv(text: &str) -> Result<FeatureMatrix> {
    let mut data = Vec::new();
    let mut d = None;
    let mut n = 0usize;
    let mut offset = 0u64;
    for line in text.split_inclusive('\n') {
        let start = offset;
        offset += line.len() as u64;
        let row = line.trim();
        if row.is_empty() {
            continue;
        }
        let mut count = 0usize;
        for field in row.split(',') {
            let v: f32 = field
                .trim()
                .parse()
                .map_err(|_| Error::format(start, format!("row {n}: cannot parse {:?} as a number", field.trim())))?;
            if !v.is_finite() {
                return Err(Error::format(start, format!("row {n}: non-finite value")));
            }
            data.push(v);
            count += 1;
        }
        match d {
            None => d = Some(count),
            Some(d) if d != count => {
                return Err(Error::format(
                    start,
                    format!("row {n} has {count} columns, expected {d}"),
                ));
            }
            _ => {}
        }
        n += 1;
    }
    let d = d.ok_or_else(|| Error::format(0, "no rows"))?;
    FeatureMatrix::new(n, d, data)
}

pub fn features_to_csv(fm: &FeatureMatrix) -> String {
    let mut out = String::new();
    for i in 0..fm.n() {
        let row: Vec<String> = fm.row(i).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Reads a binary or CSV feature file, telling them apart by the magic.
/// With `normalize` every row is scaled to unit L2 norm.
pub fn read_features(path: impl AsRef<Path>, normalize: bool) -> Result<FeatureMatrix> {
    let bytes = fs::read(path)?;
    let mut fm = if bytes.starts_with(MAGIC) {
        decode_features(&bytes)?
    } else {
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| Error::format(e.valid_up_to() as u64, "feature file is neither DMC1 nor UTF-8 text"))?;
        parse_features_csv(text)?
    };
    if normalize {
        fm.normalize_rows()?;
    }
    Ok(fm)
}

pub fn write_features(path: impl AsRef<Path>, fm: &FeatureMatrix) -> Result<()> {
    fs::write(path, encode_features(fm))?;
    Ok(())
}

pub fn write_features_csv(path: impl AsRef<Path>, fm: &FeatureMatrix) -> Result<()> {
    fs::write(path, features_to_csv(fm))?;
    Ok(())
}

/// Parses `u v cost` lines. Blank lines and lines starting with `#` are
/// ignored; the node count is one past the largest id.
pub fn parse_sparse_graph(text: &str) -> Result<SparseWeightedGraph> {
    let mut edges = Vec::new();
    let mut n = 0usize;
    let mut seen = std::collections::HashSet::new();
    let mut offset = 0u64;
    for (lineno, line) in text.split_inclusive('\n').enumerate() {
        let start = offset;
        offset += line.len() as u64;
        let l = line.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = l.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::format(
                start,
                format!("line {}: expected \"u v cost\"", lineno + 1),
            ));
        }
        let bad = |what: &str| Error::format(start, format!("line {}: invalid {what}", lineno + 1));
        let u: usize = fields[0].parse().map_err(|_| bad("node id"))?;
        let v: usize = fields[1].parse().map_err(|_| bad("node id"))?;
        let c: f64 = fields[2].parse().map_err(|_| bad("cost"))?;
        if !c.is_finite() {
            return Err(bad("cost"));
        }
        if u == v {
            return Err(Error::format(
                start,
                format!("line {}: self-loop on node {u}", lineno + 1),
            ));
        }
        if !seen.insert((u.min(v), u.max(v))) {
            return Err(Error::format(
                start,
                format!("line {}: duplicate edge ({}, {})", lineno + 1, u.min(v), u.max(v)),
            ));
        }
        n = n.max(u + 1).max(v + 1);
        edges.push((u, v, c));
    }
    if n == 0 {
        return Err(Error::format(0, "graph file has no edges"));
    }
    SparseWeightedGraph::new(n, edges)
}

pub fn read_sparse_graph(path: impl AsRef<Path>) -> Result<SparseWeightedGraph> {
    parse_sparse_graph(&fs::read_to_string(path)?)
}

pub fn sparse_graph_to_text(g: &SparseWeightedGraph) -> String {
    g.edges().iter().map(|(u, v, c)| format!("{u} {v} {c}\n")).collect()
}

/// `node<TAB>cluster` per line.
pub fn labels_to_text(labels: &[usize]) -> String {
    let mut out = String::with_capacity(labels.len() * 8);
    for (i, l) in labels.iter().enumerate() {
        out.push_str(&format!("{i}\t{l}\n"));
    }
    out
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(labels_to_text(labels).as_bytes())?;
    w.flush()?;
    Ok(())
}

/// Reads a labels file written by [`write_labels`]; node ids must be
/// `0..n` in order.
pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    let mut offset = 0u64;
    for line in text.split_inclusive('\n') {
        let start = offset;
        offset += line.len() as u64;
        let l = line.trim();
        if l.is_empty() {
            continue;
        }
        let mut it = l.split('\t');
        let (Some(node), Some(label), None) = (it.next(), it.next(), it.next()) else {
            return Err(Error::format(start, "expected node<TAB>cluster"));
        };
        let node: usize = node
            .trim()
            .parse()
            .map_err(|_| Error::format(start, "invalid node id"))?;
        let label: usize = label
            .trim()
            .parse()
            .map_err(|_| Error::format(start, "invalid cluster id"))?;
        if node != out.len() {
            return Err(Error::format(
                start,
                format!("expected node {}, found {node}", out.len()),
            ));
        }
        out.push(label);
    }
    Ok(out)
}

/// One nonnegative integer per line, in node order.
pub fn parse_ground_truth(text: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    let mut offset = 0u64;
    for line in text.split_inclusive('\n') {
        let start = offset;
        offset += line.len() as u64;
        let l = line.trim();
        if l.is_empty() {
            continue;
        }
        out.push(
            l.parse()
                .map_err(|_| Error::format(start, format!("invalid label {l:?}")))?,
        );
    }
    Ok(out)
}

pub fn read_ground_truth(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    parse_ground_truth(&fs::read_to_string(path)?)
}

pub fn write_ground_truth(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
    fs::write(path, text)?;
    Ok(())
}

/// `i<TAB>j<TAB>m<TAB>similarity` per contraction.
pub fn trace_to_text(trace: &[Merge]) -> String {
    trace
        .iter()
        .map(|t| format!("{}\t{}\t{}\t{:e}\n", t.i, t.j, t.m, t.similarity))
        .collect()
}

pub fn write_trace(path: impl AsRef<Path>, trace: &[Merge]) -> Result<()> {
    fs::write(path, trace_to_text(trace))?;
    Ok(())
}

/// Machine-readable summary of one solver run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: String,
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub alpha: f64,
    pub alpha_sign: AlphaSign,
    pub objective: f64,
    pub n_clusters: usize,
    pub wall_time_ms: f64,
    pub n_contractions: usize,
    pub n_exhaustive_searches: u64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nmi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ami: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub optimal_objective: Option<f64>,
}

impl RunSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::format(0, e.to_string()))
    }
}

pub fn write_summary(path: impl AsRef<Path>, summary: &RunSummary) -> Result<()> {
    let mut text = summary.to_json();
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FeatureMatrix {
        FeatureMatrix::with_alpha(
            3,
            2,
            vec![0.1, -2.5, 3.25, 1e-7, -0.0, 7.0],
            vec![0.4, 0.0, 1.5],
            AlphaSign::Off,
        )
        .unwrap()
    }

    #[test]
    fn binary_header_layout() {
        let bytes = encode_features(&sample());
        assert_eq!(&bytes[..4], b"DMC1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 2);
        assert_eq!(bytes[20], 1);
        assert_eq!(bytes.len(), HEADER_LEN + 4 * 6 + 4 * 3);
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let fm = sample();
        let back = decode_features(&encode_features(&fm)).unwrap();
        assert_eq!(
            back.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            fm.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(back.alphas(), fm.alphas());
    }

    #[test]
    fn truncated_payload_names_offset() {
        let bytes = encode_features(&sample());
        let cut = &bytes[..bytes.len() - 3];
        match decode_features(cut) {
            Err(Error::Format { offset, message }) => {
                assert_eq!(offset, cut.len() as u64);
                assert!(message.contains("truncated"), "{message}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
        assert!(matches!(decode_features(&bytes[..10]), Err(Error::Format { .. })));
    }

    #[test]
    fn bad_magic_and_trailing_bytes() {
        let mut bytes = encode_features(&sample());
        bytes.push(0);
        assert!(matches!(decode_features(&bytes), Err(Error::Format { .. })));
        bytes[0] = b'X';
        assert!(matches!(decode_features(&bytes), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn csv_parsing() {
        let fm = parse_features_csv("1,2\n3.5, -4\n\n").unwrap();
        assert_eq!((fm.n(), fm.d()), (2, 2));
        assert_eq!(fm.row(1), &[3.5, -4.0]);
        assert!(matches!(
            parse_features_csv("1,2\n3\n"),
            Err(Error::Format { offset: 4, .. })
        ));
        assert!(parse_features_csv("1,x\n").is_err());
        let back = parse_features_csv(&features_to_csv(&fm)).unwrap();
        assert_eq!(back, fm);
    }

    #[test]
    fn sparse_graph_lines() {
        let g = parse_sparse_graph("0 1 1.0\n").unwrap();
        assert_eq!((g.n(), g.edge_count()), (2, 1));
        assert!(matches!(parse_sparse_graph("0 0 1.0\n"), Err(Error::Format { .. })));
        assert!(matches!(
            parse_sparse_graph("0 1 1\n1 0 2\n"),
            Err(Error::Format { .. })
        ));
        let text: String = (0..10).map(|i| format!("{i} {} -0.5\n", i + 1)).collect();
        assert_eq!(parse_sparse_graph(&text).unwrap().edge_count(), 10);
        let g = parse_sparse_graph("# comment\n2 0 -1.5\n").unwrap();
        assert_eq!(parse_sparse_graph(&sparse_graph_to_text(&g)).unwrap(), g);
    }

    #[test]
    fn labels_and_ground_truth() {
        assert_eq!(labels_to_text(&[0, 0, 1]), "0\t0\n1\t0\n2\t1\n");
        assert_eq!(parse_ground_truth("3\n1\n\n2\n").unwrap(), vec![3, 1, 2]);
        assert!(parse_ground_truth("a\n").is_err());
    }

    #[test]
    fn summary_json_round_trip() {
        let s = RunSummary {
            algorithm: "dgaec-inc".into(),
            n: 10,
            d: 2,
            k: 5,
            alpha: 0.4,
            alpha_sign: AlphaSign::Minus,
            objective: -1.5,
            n_clusters: 3,
            wall_time_ms: 1.25,
            n_contractions: 7,
            n_exhaustive_searches: 12,
            seed: 1,
            nmi: Some(0.9),
            ami: None,
            optimal_objective: None,
        };
        let json = s.to_json();
        assert!(json.contains("\"alpha_sign\": \"minus\""));
        assert!(!json.contains("\"ami\""));
        assert_eq!(RunSummary::from_json(&json).unwrap(), s);
    }
}
