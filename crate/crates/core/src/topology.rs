//! Higher-order skeleton extraction.
//!
//! Filters return keep-masks over the fixed padded node set instead of
//! re-indexed subgraphs, so a filtered graph has the same shape as its base.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::graph::Graph;
use crate::{par, Error, Result};

pub const DEFAULT_L_MAX: usize = 8;
pub const DEFAULT_SIMPLEX_P: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    /// Keep edges lying on a cycle of length ≤ `l_max` (2-cell closure).
    Cell,
    /// Keep nodes and edges inside some `(p+1)`-clique.
    Simplex,
    /// Complement, within the edge set, of the `periphery_of` filter.
    Periphery,
    /// Identity.
    None,
    /// No skeleton: the intermediate state is a standard-normal draw.
    Noise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseFilter {
    Cell,
    Simplex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub kind: FilterKind,
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "default_l_max")]
    pub l_max: usize,
    #[serde(default = "default_base")]
    pub periphery_of: BaseFilter,
}

fn default_p() -> usize {
    DEFAULT_SIMPLEX_P
}
fn default_l_max() -> usize {
    DEFAULT_L_MAX
}
fn default_base() -> BaseFilter {
    BaseFilter::Cell
}

impl FilterSpec {
    pub fn new(kind: FilterKind) -> Self {
        Self { kind, p: DEFAULT_SIMPLEX_P, l_max: DEFAULT_L_MAX, periphery_of: BaseFilter::Cell }
    }

    pub fn cell(l_max: usize) -> Self {
        Self { l_max, ..Self::new(FilterKind::Cell) }
    }

    pub fn simplex(p: usize) -> Self {
        Self { p, ..Self::new(FilterKind::Simplex) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.l_max < 3 {
            return Err(Error::InvalidArgument(format!("l_max must be >= 3, got {}", self.l_max)));
        }
        if self.p < 2 {
            return Err(Error::InvalidArgument(format!("p must be >= 2, got {}", self.p)));
        }
        Ok(())
    }
}

/// A base graph together with the nodes and edges a filter kept.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredGraph {
    pub base: Graph,
    pub edge_keep: Array2<bool>,
    pub node_keep: Vec<bool>,
}

impl FilteredGraph {
    fn from_edge_keep(g: &Graph, edge_keep: Array2<bool>) -> Self {
        let n = g.n_max();
        let node_keep = (0..n).map(|i| (0..n).any(|j| edge_keep[[i, j]])).collect();
        Self { base: g.clone(), edge_keep, node_keep }
    }

    /// The kept structure as a graph over the same padded node set. Dropped
    /// edges are zeroed and so are the feature rows of dropped nodes; the
    /// padding mask is unchanged.
    pub fn view(&self) -> Graph {
        let n = self.base.n_max();
        let mut a = self.base.adjacency().clone();
        let mut x = self.base.features().clone();
        for i in 0..n {
            for j in 0..n {
                if !self.edge_keep[[i, j]] {
                    a[[i, j]] = 0.0;
                }
            }
            if !self.node_keep[i] {
                x.row_mut(i).fill(0.0);
            }
        }
        Graph::new(x, a, self.base.mask().to_vec()).expect("filtered view of a valid graph is valid")
    }

    pub fn kept_edges(&self) -> usize {
        let n = self.base.n_max();
        (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).filter(|&(i, j)| self.edge_keep[[i, j]]).count()
    }
}

fn require_edge(g: &Graph, i: usize, j: usize) -> Result<()> {
    let n = g.n_max();
    if i >= n || j >= n || i == j || !g.has_edge(i, j) {
        return Err(Error::InvalidArgument(format!("({i}, {j}) is not an edge")));
    }
    Ok(())
}

/// Whether edge `(i, j)` lies on a cycle of length ≤ `l_max`: with the edge
/// removed, a depth-limited DFS from `i` looks for `j` within `l_max − 1` hops.
pub fn edge_in_cycle(g: &Graph, i: usize, j: usize, l_max: usize) -> Result<bool> {
    require_edge(g, i, j)?;
    Ok(edge_in_cycle_with(&g.neighbors(), i, j, l_max))
}

fn edge_in_cycle_with(nbrs: &[Vec<usize>], i: usize, j: usize, l_max: usize) -> bool {
    if l_max < 3 {
        return false;
    }
    let limit = l_max - 1;
    // best[v]: fewest hops at which v has been reached; revisiting at equal or
    // greater depth cannot find a shorter continuation.
    let mut best = vec![usize::MAX; nbrs.len()];
    let mut stack = vec![(i, 0usize)];
    best[i] = 0;
    while let Some((u, d)) = stack.pop() {
        if d == limit {
            continue;
        }
        for &w in &nbrs[u] {
            if u == i && w == j {
                continue;
            }
            if w == j {
                return true;
            }
            if d + 1 < best[w] {
                best[w] = d + 1;
                stack.push((w, d + 1));
            }
        }
    }
    false
}

/// Matrix-power version of [`edge_in_cycle`]: with the edge removed from the
/// binarised adjacency `Ā`, test `(Ā^m)_{ij} > 0` for some `m ≤ l_max − 1`.
pub fn edge_in_cycle_oracle(g: &Graph, i: usize, j: usize, l_max: usize) -> Result<bool> {
    require_edge(g, i, j)?;
    let mut a = g.adjacency().mapv(|x| if x != 0.0 { 1.0 } else { 0.0 });
    a[[i, j]] = 0.0;
    a[[j, i]] = 0.0;
    let mut power = a.clone();
    for _ in 1..l_max.saturating_sub(1) {
        if power[[i, j]] > 0.0 {
            return Ok(true);
        }
        // keep entries as 0/1 reachability so walk counts cannot overflow
        power = power.dot(&a).mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
    }
    Ok(l_max >= 3 && power[[i, j]] > 0.0)
}

/// 2-cell filtering: keep every edge on a cycle of length ≤ `l_max`.
pub fn cell_filter(g: &Graph, l_max: usize) -> FilteredGraph {
    let n = g.n_max();
    let nbrs = g.neighbors();
    let mut keep = Array2::from_elem((n, n), false);
    for (i, j, _) in g.edges() {
        if edge_in_cycle_with(&nbrs, i, j, l_max) {
            keep[[i, j]] = true;
            keep[[j, i]] = true;
        }
    }
    FilteredGraph::from_edge_keep(g, keep)
}

/// All `(p+1)`-cliques as ascending node tuples, in lexicographic order.
pub fn enumerate_simplices(g: &Graph, p: usize) -> Vec<Vec<usize>> {
    let size = p + 1;
    let nbrs = g.neighbors();
    let higher: Vec<Vec<usize>> = nbrs
        .iter()
        .enumerate()
        .map(|(v, ns)| ns.iter().copied().filter(|&u| u > v).collect())
        .collect();
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(size);
    for v in 0..g.n_max() {
        current.push(v);
        extend_clique(&higher, &higher[v], size, &mut current, &mut out);
        current.pop();
    }
    out
}

fn extend_clique(
    higher: &[Vec<usize>],
    candidates: &[usize],
    size: usize,
    current: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if current.len() == size {
        out.push(current.clone());
        return;
    }
    for (k, &v) in candidates.iter().enumerate() {
        if current.len() + (candidates.len() - k) < size {
            break;
        }
        let next: Vec<usize> = candidates[k + 1..].iter().copied().filter(|u| higher[v].contains(u)).collect();
        current.push(v);
        extend_clique(higher, &next, size, current, out);
        current.pop();
    }
}

/// p-simplex filtering: keep nodes and edges contained in a `(p+1)`-clique.
pub fn simplex_filter(g: &Graph, p: usize) -> FilteredGraph {
    let n = g.n_max();
    let mut keep = Array2::from_elem((n, n), false);
    for clique in enumerate_simplices(g, p) {
        for (a, &u) in clique.iter().enumerate() {
            for &v in &clique[a + 1..] {
                keep[[u, v]] = true;
                keep[[v, u]] = true;
            }
        }
    }
    FilteredGraph::from_edge_keep(g, keep)
}

/// Peripheral structure: the edges the base filter dropped.
pub fn periphery_filter(g: &Graph, spec: &FilterSpec) -> Result<FilteredGraph> {
    let core = match spec.periphery_of {
        BaseFilter::Cell => cell_filter(g, spec.l_max),
        BaseFilter::Simplex => simplex_filter(g, spec.p),
    };
    let n = g.n_max();
    let mut keep = Array2::from_elem((n, n), false);
    for (i, j, _) in g.edges() {
        if !core.edge_keep[[i, j]] {
            keep[[i, j]] = true;
            keep[[j, i]] = true;
        }
    }
    Ok(FilteredGraph::from_edge_keep(g, keep))
}

/// Dispatch on `spec.kind`. `Noise` has no topological meaning and is rejected.
pub fn apply_filter(g: &Graph, spec: &FilterSpec) -> Result<FilteredGraph> {
    spec.validate()?;
    match spec.kind {
        FilterKind::Cell => Ok(cell_filter(g, spec.l_max)),
        FilterKind::Simplex => Ok(simplex_filter(g, spec.p)),
        FilterKind::Periphery => periphery_filter(g, spec),
        FilterKind::None => {
            let n = g.n_max();
            let keep = Array2::from_shape_fn((n, n), |(i, j)| g.has_edge(i, j));
            let mut fg = FilteredGraph::from_edge_keep(g, keep);
            // identity keeps isolated active nodes too
            fg.node_keep = g.mask().to_vec();
            Ok(fg)
        }
        FilterKind::Noise => Err(Error::InvalidArgument("noise is not a topological filter".into())),
    }
}

/// Chordless cycles of length `3..=l_max`, each reported once as a node list
/// starting at its smallest node.
pub fn chordless_cycles(g: &Graph, l_max: usize) -> Vec<Vec<usize>> {
    let nbrs = g.neighbors();
    let n = g.n_max();
    let adj = |u: usize, v: usize| g.has_edge(u, v);
    let mut out = Vec::new();
    for s in 0..n {
        for &second in nbrs[s].iter().filter(|&&v| v > s) {
            let mut path = vec![s, second];
            grow_cycle(&nbrs, &adj, l_max, &mut path, &mut out);
        }
    }
    out
}

fn grow_cycle(
    nbrs: &[Vec<usize>],
    adj: &dyn Fn(usize, usize) -> bool,
    l_max: usize,
    path: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    let s = path[0];
    let last = *path.last().unwrap();
    for &v in &nbrs[last] {
        if v <= s || path.contains(&v) {
            continue;
        }
        // v may touch only `last` among interior path nodes
        if path[1..path.len() - 1].iter().any(|&u| adj(u, v)) {
            continue;
        }
        if adj(v, s) {
            // closing edge; orientation fixed by second < last
            if path.len() + 1 >= 3 && path[1] < v {
                let mut cyc = path.clone();
                cyc.push(v);
                out.push(cyc);
            }
            continue;
        }
        if path.len() + 1 < l_max {
            path.push(v);
            grow_cycle(nbrs, adj, l_max, path, out);
            path.pop();
        }
    }
}

/// Dataset-average higher-order structure counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoStatistics {
    pub graphs: usize,
    /// `(p, average number of p-simplices)` for `p = 2..=max_p`.
    pub simplices: Vec<(usize, f64)>,
    /// Average number of chordless cycles of length ≤ `l_max`.
    pub cells: f64,
    pub l_max: usize,
}

pub fn ho_statistics(dataset: &[Graph], max_simplex_p: usize, l_max: usize) -> Result<HoStatistics> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    if max_simplex_p < 2 {
        return Err(Error::InvalidArgument("max_simplex_p must be >= 2".into()));
    }
    let per_graph = par::map_slice(dataset, |g| {
        let simplices: Vec<usize> = (2..=max_simplex_p).map(|p| enumerate_simplices(g, p).len()).collect();
        (simplices, chordless_cycles(g, l_max).len())
    });
    let count = dataset.len() as f64;
    let simplices = (2..=max_simplex_p)
        .enumerate()
        .map(|(k, p)| (p, per_graph.iter().map(|(s, _)| s[k] as f64).sum::<f64>() / count))
        .collect();
    let cells = per_graph.iter().map(|(_, c)| *c as f64).sum::<f64>() / count;
    Ok(HoStatistics { graphs: dataset.len(), simplices, cells, l_max })
}
