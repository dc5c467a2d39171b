//! Padded graphs and their spectral representation.
//!
//! Every graph in a dataset shares one padded node count `n_max`. Inactive
//! (padding) nodes carry zero feature rows and zero adjacency rows and
//! columns, so diffusion states at every stage have the same shape.

mod eigen;

use ndarray::{s, Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

pub use eigen::{MAX_SWEEPS, OFF_DIAGONAL_TOL};

use crate::{Error, Result};

/// Symmetry tolerance accepted by [`eigendecompose`].
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    mask: Vec<bool>,
    features: Array2<f64>,
    adjacency: Array2<f64>,
}

impl Graph {
    /// Build a graph, checking symmetry, zero diagonal, masking and finiteness.
    pub fn new(features: Array2<f64>, adjacency: Array2<f64>, mask: Vec<bool>) -> Result<Self> {
        let n = mask.len();
        if adjacency.dim() != (n, n) {
            return Err(Error::InvalidGraph(format!(
                "adjacency is {:?}, expected ({n}, {n})",
                adjacency.dim()
            )));
        }
        if features.nrows() != n {
            return Err(Error::InvalidGraph(format!(
                "features have {} rows, expected {n}",
                features.nrows()
            )));
        }
        for i in 0..n {
            if adjacency[[i, i]] != 0.0 {
                return Err(Error::InvalidGraph(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let a = adjacency[[i, j]];
                if !a.is_finite() {
                    return Err(Error::InvalidGraph(format!("non-finite entry at ({i}, {j})")));
                }
                if a != adjacency[[j, i]] {
                    return Err(Error::InvalidGraph(format!("asymmetric at ({i}, {j})")));
                }
                if a != 0.0 && !(mask[i] && mask[j]) {
                    return Err(Error::InvalidGraph(format!("edge ({i}, {j}) touches a masked node")));
                }
            }
            if !mask[i] && features.row(i).iter().any(|&x| x != 0.0) {
                return Err(Error::InvalidGraph(format!("masked node {i} has features")));
            }
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidGraph("non-finite feature".into()));
        }
        Ok(Self { mask, features, adjacency })
    }

    /// A graph on the first `n_active` of `n_max` nodes with the given weighted edges
    /// and an empty (zero-width) feature matrix.
    pub fn from_edges(n_active: usize, n_max: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n_active > n_max {
            return Err(Error::InvalidGraph(format!("{n_active} active nodes exceed n_max {n_max}")));
        }
        let mut adj = Array2::zeros((n_max, n_max));
        for &(i, j, w) in edges {
            if i >= n_active || j >= n_active {
                return Err(Error::InvalidGraph(format!("edge ({i}, {j}) out of range")));
            }
            if i == j {
                return Err(Error::InvalidGraph(format!("self loop at {i}")));
            }
            adj[[i, j]] = w;
            adj[[j, i]] = w;
        }
        let mask = (0..n_max).map(|i| i < n_active).collect();
        Self::new(Array2::zeros((n_max, 0)), adj, mask)
    }

    /// Unweighted graph on `n` nodes, no padding.
    pub fn simple(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let e: Vec<_> = edges.iter().map(|&(i, j)| (i, j, 1.0)).collect();
        Self::from_edges(n, n, &e)
    }

    pub fn with_features(self, features: Array2<f64>) -> Result<Self> {
        Self::new(features, self.adjacency, self.mask)
    }

    /// The same graph with inactive nodes appended up to `n_max` total.
    pub fn padded(&self, n_max: usize) -> Result<Self> {
        let n = self.n_max();
        if n_max < n {
            return Err(Error::InvalidGraph(format!("cannot pad {n} nodes down to {n_max}")));
        }
        let mut features = Array2::zeros((n_max, self.feature_dim()));
        features.slice_mut(s![..n, ..]).assign(&self.features);
        let mut mask = self.mask.clone();
        mask.resize(n_max, false);
        Self::new(features, pad_square(&self.adjacency, n_max), mask)
    }

    /// Drop inactive nodes, keeping the active ones in index order.
    pub fn compact(&self) -> Self {
        let idx: Vec<usize> = (0..self.n_max()).filter(|&i| self.mask[i]).collect();
        let adjacency = Array2::from_shape_fn((idx.len(), idx.len()), |(a, b)| self.adjacency[[idx[a], idx[b]]]);
        let features = self.features.select(Axis(0), &idx);
        Self { mask: vec![true; idx.len()], features, adjacency }
    }

    pub fn n_max(&self) -> usize {
        self.mask.len()
    }

    pub fn n_active(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn adjacency(&self) -> &Array2<f64> {
        &self.adjacency
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[[i, j]] != 0.0
    }

    /// Undirected edges `(i, j, weight)` with `i < j`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n_max();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let w = self.adjacency[[i, j]];
                if w != 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    pub fn num_edges(&self) -> usize {
        self.edges().len()
    }

    /// Neighbour lists of the binarised adjacency.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let n = self.n_max();
        (0..n)
            .map(|i| (0..n).filter(|&j| self.adjacency[[i, j]] != 0.0).collect())
            .collect()
    }

    /// Unweighted degrees (edge counts).
    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency
            .rows()
            .into_iter()
            .map(|r| r.iter().filter(|&&a| a != 0.0).count())
            .collect()
    }
}

/// Eigenpairs of a symmetric matrix; `vectors` holds eigenvectors as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub vectors: Array2<f64>,
    pub values: Array1<f64>,
}

/// `L = D - A` with `D` the diagonal of weighted row sums.
pub fn laplacian(g: &Graph) -> Array2<f64> {
    laplacian_of(g.adjacency())
}

pub(crate) fn laplacian_of(adj: &Array2<f64>) -> Array2<f64> {
    let mut l = adj.mapv(|a| -a);
    for (i, d) in adj.sum_axis(Axis(1)).iter().enumerate() {
        l[[i, i]] = *d;
    }
    l
}

/// Laplacian of a raw adjacency, validating symmetry and finiteness first.
pub fn checked_laplacian(adj: &Array2<f64>) -> Result<Array2<f64>> {
    let n = adj.nrows();
    if adj.ncols() != n {
        return Err(Error::InvalidGraph("adjacency is not square".into()));
    }
    for i in 0..n {
        for j in 0..n {
            let a = adj[[i, j]];
            if !a.is_finite() {
                return Err(Error::InvalidGraph(format!("non-finite entry at ({i}, {j})")));
            }
            if a != adj[[j, i]] {
                return Err(Error::InvalidGraph(format!("asymmetric at ({i}, {j})")));
            }
        }
    }
    Ok(laplacian_of(adj))
}

/// Symmetric eigendecomposition with ascending eigenvalues.
///
/// Each eigenvector is flipped so that its largest-magnitude entry is
/// non-negative (ties resolved towards the lowest index).
pub fn eigendecompose(l: &Array2<f64>) -> Result<SpectralState> {
    let n = l.nrows();
    if l.ncols() != n {
        return Err(Error::InvalidArgument("matrix is not square".into()));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (l[[i, j]] - l[[j, i]]).abs() > SYMMETRY_TOL {
                return Err(Error::InvalidArgument(format!("matrix not symmetric at ({i}, {j})")));
            }
        }
    }
    if l.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let sym = (l + &l.t()) * 0.5;
    let (values, vectors) = eigen::jacobi(sym)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut out_vals = Array1::zeros(n);
    let mut out_vecs = Array2::zeros((n, n));
    for (k, &src) in order.iter().enumerate() {
        out_vals[k] = values[src];
        let mut col = vectors.column(src).to_owned();
        let mut best = 0;
        for i in 0..n {
            if col[i].abs() > col[best].abs() + 1e-12 {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.mapv_inplace(|x| -x);
        }
        out_vecs.column_mut(k).assign(&col);
    }
    Ok(SpectralState { vectors: out_vecs, values: out_vals })
}

/// Spectrum of a padded graph laid out for diffusion.
///
/// The active block is decomposed on its own. Columns `0..n_active` hold the
/// active eigenvectors (ascending eigenvalues) embedded on the active node
/// indices; the remaining columns are unit vectors on the padding nodes with
/// eigenvalue 0. Reconstruction from this basis never leaks weight onto
/// padding rows.
pub fn masked_spectrum(g: &Graph) -> Result<SpectralState> {
    masked_spectrum_of(g.adjacency(), g.mask())
}

pub(crate) fn masked_spectrum_of(adj: &Array2<f64>, mask: &[bool]) -> Result<SpectralState> {
    let n = mask.len();
    let active: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
    let inactive: Vec<usize> = (0..n).filter(|&i| !mask[i]).collect();
    let na = active.len();
    let full = laplacian_of(adj);
    let mut block = Array2::zeros((na, na));
    for (a, &i) in active.iter().enumerate() {
        for (b, &j) in active.iter().enumerate() {
            block[[a, b]] = full[[i, j]];
        }
    }
    let inner = eigendecompose(&block)?;
    let mut vectors = Array2::zeros((n, n));
    let mut values = Array1::zeros(n);
    for k in 0..na {
        values[k] = inner.values[k];
        for (a, &i) in active.iter().enumerate() {
            vectors[[i, k]] = inner.vectors[[a, k]];
        }
    }
    for (off, &i) in inactive.iter().enumerate() {
        vectors[[i, na + off]] = 1.0;
    }
    Ok(SpectralState { vectors, values })
}

/// `L̂ = U diag(Λ) Uᵀ`, evaluated on the upper triangle and mirrored.
pub fn reconstruct_laplacian(vectors: &Array2<f64>, values: &Array1<f64>) -> Array2<f64> {
    let n = vectors.nrows();
    let scaled = vectors * &values.view().insert_axis(Axis(0));
    let mut l = Array2::zeros((n, n));
    for i in 0..n {
        let ri = scaled.row(i);
        for j in i..n {
            let v = ri.dot(&vectors.row(j));
            l[[i, j]] = v;
            l[[j, i]] = v;
        }
    }
    l
}

/// `Â = diag(L̂) − L̂`: symmetric with an exactly zero diagonal.
pub fn reconstruct_adjacency(s: &SpectralState) -> Array2<f64> {
    adjacency_from_spectrum(&s.vectors, &s.values)
}

pub fn adjacency_from_spectrum(vectors: &Array2<f64>, values: &Array1<f64>) -> Array2<f64> {
    let mut a = reconstruct_laplacian(vectors, values).mapv(|x| -x);
    a.diag_mut().fill(0.0);
    a
}

/// Entry-wise bucketing of a real matrix into integer levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizationRule {
    thresholds: Vec<f64>,
    levels: Vec<i64>,
}

impl QuantizationRule {
    pub fn new(thresholds: Vec<f64>, levels: Vec<i64>) -> Result<Self> {
        if levels.len() != thresholds.len() + 1 {
            return Err(Error::InvalidArgument("need exactly one more level than thresholds".into()));
        }
        if thresholds.windows(2).any(|w| !(w[0] < w[1])) || thresholds.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("thresholds must be finite and strictly ascending".into()));
        }
        let mut sorted = levels.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != levels.len() {
            return Err(Error::InvalidArgument("levels must be distinct".into()));
        }
        Ok(Self { thresholds, levels })
    }

    /// `(−∞,0.5)→0`, `[0.5,∞)→1`.
    pub fn binary() -> Self {
        Self { thresholds: vec![0.5], levels: vec![0, 1] }
    }

    /// Bond levels: `(−∞,0.5)→0`, `[0.5,1.5)→1`, `[1.5,2.5)→2`, `[2.5,∞)→3`.
    pub fn molecular() -> Self {
        Self { thresholds: vec![0.5, 1.5, 2.5], levels: vec![0, 1, 2, 3] }
    }

    pub fn level(&self, x: f64) -> i64 {
        let bucket = self.thresholds.iter().take_while(|&&t| x >= t).count();
        self.levels[bucket]
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn levels(&self) -> &[i64] {
        &self.levels
    }
}

/// Quantise every entry; the diagonal is forced to 0.
pub fn quantize(a: &Array2<f64>, rule: &QuantizationRule) -> Array2<i64> {
    let mut q = a.mapv(|x| rule.level(x));
    let n = q.nrows().min(q.ncols());
    for i in 0..n {
        q[[i, i]] = 0;
    }
    q
}

/// Apply a node permutation: old node `i` moves to position `perm[i]`.
pub fn permute(g: &Graph, perm: &[usize]) -> Result<Graph> {
    let n = g.n_max();
    check_permutation(perm, n)?;
    let mut x = Array2::zeros(g.features.dim());
    let mut a = Array2::zeros((n, n));
    let mut mask = vec![false; n];
    for i in 0..n {
        x.row_mut(perm[i]).assign(&g.features.row(i));
        mask[perm[i]] = g.mask[i];
        for j in 0..n {
            a[[perm[i], perm[j]]] = g.adjacency[[i, j]];
        }
    }
    Graph::new(x, a, mask)
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::InvalidArgument(format!("permutation has length {}, expected {n}", perm.len())));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::InvalidArgument("not a bijection".into()));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Frobenius norm.
pub fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Pad the leading `k×k` block into an `n×n` zero matrix.
pub(crate) fn pad_square(a: &Array2<f64>, n: usize) -> Array2<f64> {
    let k = a.nrows();
    let mut out = Array2::zeros((n, n));
    out.slice_mut(s![..k, ..k]).assign(a);
    out
}
