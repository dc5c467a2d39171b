//! Synthetic generators and the `.graphs.jsonl` dataset format.
//!
//! One JSON object per line:
//!
//! ```text
//! {"version":1,"id":"g0","n":3,"edges":[[0,1,1],[1,2,2]],
//!  "features":[[…],…],                       // optional, n rows
//!  "eigenbasis":{"values":[…],"vectors":[[…],…]}}   // optional, n×n, columns are eigenvectors
//! ```
//!
//! Edge weights are non-zero integers. Edges are written with `i < j` in
//! row-major order; loading accepts either orientation but rejects
//! duplicates, self loops and out-of-range indices.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{masked_spectrum, Graph, SpectralState};
use crate::{par, rng, Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct GraphRecord {
    pub id: String,
    pub graph: Graph,
    pub eigenbasis: Option<SpectralState>,
}

impl GraphRecord {
    pub fn new(id: impl Into<String>, graph: Graph) -> Self {
        Self { id: id.into(), graph, eigenbasis: None }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEigen {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    version: u32,
    id: String,
    n: usize,
    edges: Vec<(usize, usize, i64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eigenbasis: Option<RawEigen>,
}

fn rows_to_matrix(rows: &[Vec<f64>], n: usize, what: &str) -> std::result::Result<Array2<f64>, String> {
    if rows.len() != n {
        return Err(format!("{what} has {} rows, expected {n}", rows.len()));
    }
    let width = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != width) {
        return Err(format!("{what} rows have unequal lengths"));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Array2::from_shape_vec((n, width), flat).expect("sized"))
}

fn record_from_raw(raw: RawRecord) -> std::result::Result<GraphRecord, String> {
    if raw.version != FORMAT_VERSION {
        return Err(format!("unsupported version {}", raw.version));
    }
    let n = raw.n;
    let mut adj = Array2::zeros((n, n));
    for &(a, b, w) in &raw.edges {
        if a >= n || b >= n {
            return Err(format!("edge ({a}, {b}) out of range for n = {n}"));
        }
        if a == b {
            return Err(format!("self loop at {a}"));
        }
        if w == 0 {
            return Err(format!("edge ({a}, {b}) has zero weight"));
        }
        if adj[[a, b]] != 0.0 {
            return Err(format!("duplicate edge ({}, {})", a.min(b), a.max(b)));
        }
        adj[[a, b]] = w as f64;
        adj[[b, a]] = w as f64;
    }
    let features = match &raw.features {
        Some(rows) => rows_to_matrix(rows, n, "features")?,
        None => Array2::zeros((n, 0)),
    };
    let graph = Graph::new(features, adj, vec![true; n]).map_err(|e| e.to_string())?;
    let eigenbasis = match raw.eigenbasis {
        Some(e) => {
            let vectors = rows_to_matrix(&e.vectors, n, "eigenbasis")?;
            if vectors.ncols() != n || e.values.len() != n {
                return Err(format!("eigenbasis must be {n}×{n} with {n} values"));
            }
            Some(SpectralState { vectors, values: Array1::from(e.values) })
        }
        None => None,
    };
    Ok(GraphRecord { id: raw.id, graph, eigenbasis })
}

fn record_to_raw(rec: &GraphRecord) -> Result<RawRecord> {
    let g = rec.graph.compact();
    let n = g.n_max();
    let mut edges = Vec::new();
    for (i, j, w) in g.edges() {
        if w.fract() != 0.0 || w.abs() > i64::MAX as f64 {
            return Err(Error::InvalidArgument(format!("graph '{}' has non-integer weight {w}", rec.id)));
        }
        edges.push((i, j, w as i64));
    }
    let features = (g.feature_dim() > 0).then(|| g.features().rows().into_iter().map(|r| r.to_vec()).collect());
    let eigenbasis = rec.eigenbasis.as_ref().map(|e| RawEigen {
        values: e.values.to_vec(),
        vectors: e.vectors.rows().into_iter().map(|r| r.to_vec()).collect(),
    });
    Ok(RawRecord { version: FORMAT_VERSION, id: rec.id.clone(), n, edges, features, eigenbasis })
}

/// Parse records, reporting 1-based line numbers. Blank lines are skipped.
pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<GraphRecord>> {
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord =
            serde_json::from_str(&line).map_err(|e| Error::Parse { line: k + 1, msg: e.to_string() })?;
        out.push(record_from_raw(raw).map_err(|msg| Error::Validation { line: k + 1, msg })?);
    }
    Ok(out)
}

/// Write records in canonical form. Padding nodes are dropped.
pub fn write_records<W: Write>(records: &[GraphRecord], mut writer: W) -> Result<()> {
    for rec in records {
        serde_json::to_writer(&mut writer, &record_to_raw(rec)?)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Vec<GraphRecord>> {
    read_records(BufReader::new(std::fs::File::open(path)?))
}

pub fn save(records: &[GraphRecord], path: &Path) -> Result<()> {
    write_records(records, BufWriter::new(std::fs::File::create(path)?))
}

pub const COMMUNITY_SMALL_MIN_NODES: usize = 12;
pub const COMMUNITY_SMALL_MAX_NODES: usize = 20;
pub const COMMUNITY_SMALL_P_INTRA: f64 = 0.7;
pub const COMMUNITY_SMALL_INTER_FRACTION: f64 = 0.05;

/// One two-community graph. Community 0 is nodes `0..⌈n/2⌉`.
pub fn community_small_graph<R: Rng + ?Sized>(rng: &mut R) -> Graph {
    let n = rng.random_range(COMMUNITY_SMALL_MIN_NODES..=COMMUNITY_SMALL_MAX_NODES);
    let a = n.div_ceil(2);
    let b = n - a;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if (i < a) == (j < a) && rng.random_bool(COMMUNITY_SMALL_P_INTRA) {
                edges.push((i, j));
            }
        }
    }
    let inter = (COMMUNITY_SMALL_INTER_FRACTION * n as f64).ceil() as usize;
    for k in sample(rng, a * b, inter.min(a * b)).into_iter() {
        edges.push((k / b, a + k % b));
    }
    Graph::simple(n, &edges).expect("valid by construction")
}

pub fn gen_community_small(count: usize, seed: u64) -> Vec<GraphRecord> {
    par::map_range(count, |i| {
        let mut r = rng::stream(seed, &[i as u64]);
        GraphRecord::new(format!("community_small-{i}"), community_small_graph(&mut r))
    })
}

pub const SBM_MIN_BLOCKS: usize = 2;
pub const SBM_MAX_BLOCKS: usize = 5;
pub const SBM_MIN_BLOCK_SIZE: usize = 20;
pub const SBM_MAX_BLOCK_SIZE: usize = 40;
pub const SBM_P_IN: f64 = 0.3;
pub const SBM_P_OUT: f64 = 0.05;

/// One stochastic-block-model graph with contiguous blocks; returns the block sizes.
pub fn sbm_graph<R: Rng + ?Sized>(rng: &mut R) -> (Graph, Vec<usize>) {
    let k = rng.random_range(SBM_MIN_BLOCKS..=SBM_MAX_BLOCKS);
    let sizes: Vec<usize> = (0..k).map(|_| rng.random_range(SBM_MIN_BLOCK_SIZE..=SBM_MAX_BLOCK_SIZE)).collect();
    let block: Vec<usize> = sizes.iter().enumerate().flat_map(|(b, &s)| std::iter::repeat_n(b, s)).collect();
    let n = block.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if block[i] == block[j] { SBM_P_IN } else { SBM_P_OUT };
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    (Graph::simple(n, &edges).expect("valid by construction"), sizes)
}

pub fn gen_sbm(count: usize, seed: u64) -> Vec<GraphRecord> {
    par::map_range(count, |i| {
        let mut r = rng::stream(seed, &[i as u64]);
        GraphRecord::new(format!("sbm-{i}"), sbm_graph(&mut r).0)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    DegreeOnehot,
    DegreePlusSpectral,
}

/// Degree one-hot (degrees ≥ `cap − 1` share the last slot), optionally
/// followed by the first `k` Laplacian eigenvector entries of each node.
pub fn default_features(g: &Graph, mode: FeatureMode, cap: usize, k: usize) -> Result<Array2<f64>> {
    if cap == 0 {
        return Err(Error::InvalidArgument("degree cap must be positive".into()));
    }
    let n = g.n_max();
    let extra = if mode == FeatureMode::DegreePlusSpectral { k } else { 0 };
    let mut out = Array2::zeros((n, cap + extra));
    for (i, d) in g.degrees().into_iter().enumerate() {
        if g.mask()[i] {
            out[[i, d.min(cap - 1)]] = 1.0;
        }
    }
    if extra > 0 {
        let spec = masked_spectrum(g)?;
        for i in (0..n).filter(|&i| g.mask()[i]) {
            for c in 0..k.min(g.n_active()) {
                out[[i, cap + c]] = spec.vectors[[i, c]];
            }
        }
    }
    Ok(out)
}
