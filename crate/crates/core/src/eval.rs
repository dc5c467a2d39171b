//! Graph statistics and MMD between sample sets.
//!
//! Each statistic turns one graph into a normalised histogram; the MMD
//! compares two sets of histograms through a Gaussian kernel on a histogram
//! distance (1-D earth mover's or total variation).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::{masked_spectrum, Graph};
use crate::{par, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatHistogram {
    /// Ascending bin edges, one more than the number of bins.
    pub edges: Vec<f64>,
    /// Non-negative weights summing to 1.
    pub weights: Vec<f64>,
}

impl StatHistogram {
    /// Normalised counts of `values`; values outside the edges fall into the
    /// first or last bin. With no values all mass sits in bin 0.
    pub fn from_values(values: &[f64], edges: Vec<f64>) -> Self {
        let bins = edges.len() - 1;
        let mut weights = vec![0.0; bins];
        if values.is_empty() {
            weights[0] = 1.0;
            return Self { edges, weights };
        }
        for &v in values {
            let k = edges[1..bins].partition_point(|&e| e <= v);
            weights[k] += 1.0;
        }
        let total = values.len() as f64;
        weights.iter_mut().for_each(|w| *w /= total);
        Self { edges, weights }
    }

    /// Normalise arbitrary non-negative masses; zero total puts all mass in bin 0.
    pub fn from_masses(masses: Vec<f64>, edges: Vec<f64>) -> Self {
        let total: f64 = masses.iter().sum();
        let mut weights = masses;
        if total > 0.0 {
            weights.iter_mut().for_each(|w| *w /= total);
        } else {
            weights.iter_mut().for_each(|w| *w = 0.0);
            weights[0] = 1.0;
        }
        Self { edges, weights }
    }

    pub fn bins(&self) -> usize {
        self.weights.len()
    }

    fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1]))
    }
}

pub fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let w = (hi - lo) / bins as f64;
    (0..=bins).map(|k| if k == bins { hi } else { lo + k as f64 * w }).collect()
}

/// Unit bins centred on `0, 1, …, bins − 1`.
pub fn integer_edges(bins: usize) -> Vec<f64> {
    (0..=bins).map(|k| k as f64 - 0.5).collect()
}

fn active(g: &Graph) -> impl Iterator<Item = usize> + '_ {
    (0..g.n_max()).filter(|&i| g.mask()[i])
}

/// Degrees of active nodes in integer bins `0..n_max−1`.
pub fn degree_hist(g: &Graph) -> StatHistogram {
    degree_hist_bins(g, g.n_max().max(1))
}

pub fn degree_hist_bins(g: &Graph, bins: usize) -> StatHistogram {
    let deg = g.degrees();
    let values: Vec<f64> = active(g).map(|i| deg[i] as f64).collect();
    StatHistogram::from_values(&values, integer_edges(bins))
}

/// Local clustering coefficient of each active node (0 when degree < 2).
pub fn clustering_coefficients(g: &Graph) -> Vec<f64> {
    let nb = g.neighbors();
    active(g)
        .map(|i| {
            let d = nb[i].len();
            if d < 2 {
                return 0.0;
            }
            let mut tri = 0usize;
            for (a, &u) in nb[i].iter().enumerate() {
                for &v in &nb[i][a + 1..] {
                    if g.has_edge(u, v) {
                        tri += 1;
                    }
                }
            }
            tri as f64 / (d * (d - 1) / 2) as f64
        })
        .collect()
}

pub fn clustering_hist(g: &Graph, bins: usize) -> StatHistogram {
    StatHistogram::from_values(&clustering_coefficients(g), uniform_edges(0.0, 1.0, bins))
}

pub const NUM_ORBITS: usize = 11;

/// Names of the connected 4-node orbits, in count-vector order.
pub const ORBIT_NAMES: [&str; NUM_ORBITS] = [
    "path_end",
    "path_middle",
    "star_leaf",
    "star_center",
    "cycle",
    "paw_tail",
    "paw_side",
    "paw_center",
    "diamond_side",
    "diamond_center",
    "clique",
];

/// Orbit of each member of a 4-node induced subgraph given its edge count and
/// member degrees, or `None` when the subgraph is disconnected.
fn classify(edges: usize, deg: [usize; 4]) -> Option<[usize; 4]> {
    let max = *deg.iter().max().expect("four entries");
    let orbit_of = |f: &dyn Fn(usize) -> usize| -> [usize; 4] { deg.map(f) };
    match edges {
        3 if deg.contains(&0) => None,
        3 if max == 3 => Some(orbit_of(&|d| if d == 3 { 3 } else { 2 })),
        3 => Some(orbit_of(&|d| if d == 1 { 0 } else { 1 })),
        4 if max == 2 => Some([4; 4]),
        4 => Some(orbit_of(&|d| match d {
            1 => 5,
            2 => 6,
            _ => 7,
        })),
        5 => Some(orbit_of(&|d| if d == 2 { 8 } else { 9 })),
        6 => Some([10; 4]),
        _ => None,
    }
}

/// Per-node counts of each orbit over all connected induced 4-node subgraphs,
/// by enumerating every 4-subset of active nodes.
pub fn orbit_counts(g: &Graph) -> Vec<[u64; NUM_ORBITS]> {
    let n = g.n_max();
    let idx: Vec<usize> = active(g).collect();
    let adj = |a: usize, b: usize| g.has_edge(a, b) as usize;
    let mut counts = vec![[0u64; NUM_ORBITS]; n];
    let m = idx.len();
    for a in 0..m {
        for b in a + 1..m {
            let ab = adj(idx[a], idx[b]);
            for c in b + 1..m {
                let ac = adj(idx[a], idx[c]);
                let bc = adj(idx[b], idx[c]);
                for d in c + 1..m {
                    let ad = adj(idx[a], idx[d]);
                    let bd = adj(idx[b], idx[d]);
                    let cd = adj(idx[c], idx[d]);
                    let e = ab + ac + bc + ad + bd + cd;
                    if e < 3 {
                        continue;
                    }
                    let deg = [ab + ac + ad, ab + bc + bd, ac + bc + cd, ad + bd + cd];
                    if let Some(orb) = classify(e, deg) {
                        for (k, &node) in [idx[a], idx[b], idx[c], idx[d]].iter().enumerate() {
                            counts[node][orb[k]] += 1;
                        }
                    }
                }
            }
        }
    }
    counts
}

/// Total orbit counts of the graph, normalised over orbit types.
pub fn orbit_hist(g: &Graph) -> StatHistogram {
    let mut totals = vec![0.0; NUM_ORBITS];
    for row in orbit_counts(g) {
        for (t, c) in totals.iter_mut().zip(row) {
            *t += c as f64;
        }
    }
    StatHistogram::from_masses(totals, integer_edges(NUM_ORBITS))
}

/// Laplacian eigenvalues of the active block in `bins` uniform bins on `[0, upper]`.
pub fn spectral_hist_range(g: &Graph, bins: usize, upper: f64) -> Result<StatHistogram> {
    let spec = masked_spectrum(g)?;
    let values: Vec<f64> = spec.values.iter().take(g.n_active()).copied().collect();
    Ok(StatHistogram::from_values(&values, uniform_edges(0.0, upper, bins)))
}

pub fn spectral_hist(g: &Graph, bins: usize) -> Result<StatHistogram> {
    spectral_hist_range(g, bins, g.n_max().max(1) as f64)
}

fn check_same_bins(a: &StatHistogram, b: &StatHistogram) -> Result<()> {
    if a.edges != b.edges {
        return Err(Error::InvalidArgument("histograms have different bin edges".into()));
    }
    Ok(())
}

/// 1-D Wasserstein-1 distance with mass at bin centres.
pub fn emd_1d(a: &StatHistogram, b: &StatHistogram) -> Result<f64> {
    check_same_bins(a, b)?;
    let centers: Vec<f64> = a.centers().collect();
    let mut cum = 0.0;
    let mut total = 0.0;
    for k in 0..a.bins() - 1 {
        cum += a.weights[k] - b.weights[k];
        total += cum.abs() * (centers[k + 1] - centers[k]);
    }
    Ok(total)
}

/// Half the L1 distance between weight vectors.
pub fn tv_distance(a: &StatHistogram, b: &StatHistogram) -> Result<f64> {
    check_same_bins(a, b)?;
    Ok(0.5 * a.weights.iter().zip(&b.weights).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    GaussianEmd,
    GaussianTv,
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::GaussianEmd => "gaussian_emd",
            KernelKind::GaussianTv => "gaussian_tv",
        })
    }
}

pub fn kernel(a: &StatHistogram, b: &StatHistogram, kind: KernelKind, sigma: f64) -> Result<f64> {
    let d = match kind {
        KernelKind::GaussianEmd => emd_1d(a, b)?,
        KernelKind::GaussianTv => tv_distance(a, b)?,
    };
    Ok((-d * d / (2.0 * sigma * sigma)).exp())
}

fn mean_kernel(a: &[StatHistogram], b: &[StatHistogram], kind: KernelKind, sigma: f64) -> Result<f64> {
    let rows = par::map_range(a.len(), |i| -> Result<f64> {
        let mut s = 0.0;
        for y in b {
            s += kernel(&a[i], y, kind, sigma)?;
        }
        Ok(s)
    });
    let mut total = 0.0;
    for r in rows {
        total += r?;
    }
    Ok(total / (a.len() * b.len()) as f64)
}

/// Biased (V-statistic) squared MMD.
pub fn mmd_squared(a: &[StatHistogram], b: &[StatHistogram], kind: KernelKind, sigma: f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("MMD needs non-empty sets".into()));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("kernel bandwidth must be positive, got {sigma}")));
    }
    let kaa = mean_kernel(a, a, kind, sigma)?;
    let kbb = mean_kernel(b, b, kind, sigma)?;
    let kab = mean_kernel(a, b, kind, sigma)?;
    let kba = mean_kernel(b, a, kind, sigma)?;
    Ok(kaa + kbb - kab - kba)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub kernel: KernelKind,
    pub orbit_kernel: KernelKind,
    pub sigma: f64,
    pub clustering_bins: usize,
    pub spectral_bins: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            kernel: KernelKind::GaussianEmd,
            orbit_kernel: KernelKind::GaussianTv,
            sigma: 1.0,
            clustering_bins: 100,
            spectral_bins: 200,
        }
    }
}

/// MMD² per statistic. Values are reported clipped at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmdReport {
    pub degree: f64,
    pub clustering: f64,
    pub orbit: f64,
    pub spectral: f64,
    pub average: f64,
    pub kernel: KernelKind,
    pub orbit_kernel: KernelKind,
    pub sigma: f64,
    pub n_generated: usize,
    pub n_reference: usize,
}

impl MmdReport {
    pub const COLUMNS: [&'static str; 5] = ["Deg.", "Clus.", "Orbit", "Spec.", "Avg."];

    pub fn values(&self) -> [f64; 5] {
        [self.degree, self.clustering, self.orbit, self.spectral, self.average]
    }
}

impl fmt::Display for MmdReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in Self::COLUMNS {
            write!(f, "{c:>10}")?;
        }
        writeln!(f)?;
        for v in self.values() {
            write!(f, "{v:>10.6}")?;
        }
        writeln!(f)?;
        write!(
            f,
            "kernel={} orbit_kernel={} sigma={} generated={} reference={}",
            self.kernel, self.orbit_kernel, self.sigma, self.n_generated, self.n_reference
        )
    }
}

struct GraphStats {
    degree: StatHistogram,
    clustering: StatHistogram,
    orbit: StatHistogram,
    spectral: StatHistogram,
}

fn stats(gs: &[Graph], n_bins: usize, cfg: &EvalConfig) -> Result<Vec<GraphStats>> {
    par::map_slice(gs, |g| {
        let g = g.compact();
        Ok(GraphStats {
            degree: degree_hist_bins(&g, n_bins),
            clustering: clustering_hist(&g, cfg.clustering_bins),
            orbit: orbit_hist(&g),
            spectral: spectral_hist_range(&g, cfg.spectral_bins, n_bins as f64)?,
        })
    })
    .into_iter()
    .collect()
}

/// Compare generated graphs against a reference set. Degree and spectral
/// histograms use a common range set by the largest graph in either set.
pub fn eval_report(generated: &[Graph], reference: &[Graph], cfg: &EvalConfig) -> Result<MmdReport> {
    if generated.is_empty() || reference.is_empty() {
        return Err(Error::InvalidArgument("evaluation needs non-empty generated and reference sets".into()));
    }
    let n_bins = generated.iter().chain(reference).map(|g| g.n_active()).max().unwrap_or(1).max(1);
    let sa = stats(generated, n_bins, cfg)?;
    let sb = stats(reference, n_bins, cfg)?;
    let pick = |s: &[GraphStats], f: fn(&GraphStats) -> &StatHistogram| s.iter().map(f).cloned().collect::<Vec<_>>();
    let mmd = |f: fn(&GraphStats) -> &StatHistogram, kind| -> Result<f64> {
        Ok(mmd_squared(&pick(&sa, f), &pick(&sb, f), kind, cfg.sigma)?.max(0.0))
    };
    let degree = mmd(|s| &s.degree, cfg.kernel)?;
    let clustering = mmd(|s| &s.clustering, cfg.kernel)?;
    let orbit = mmd(|s| &s.orbit, cfg.orbit_kernel)?;
    let spectral = mmd(|s| &s.spectral, cfg.kernel)?;
    Ok(MmdReport {
        degree,
        clustering,
        orbit,
        spectral,
        average: (degree + clustering + orbit + spectral) / 4.0,
        kernel: cfg.kernel,
        orbit_kernel: cfg.orbit_kernel,
        sigma: cfg.sigma,
        n_generated: generated.len(),
        n_reference: reference.len(),
    })
}
