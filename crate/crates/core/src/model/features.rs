use std::collections::VecDeque;

use ndarray::{Array1, Array2};

use crate::graph::Graph;

/// Entries of a continuous adjacency above this value count as edges when
/// deriving random-walk and shortest-path features.
pub const BINARIZE_THRESHOLD: f64 = 0.5;

/// Interleaved `[sin(ω₀s), cos(ω₀s), sin(ω₁s), cos(ω₁s), …]` with
/// `s = 1000·t` and geometric frequencies `ω_k = 10000^{−k/(dim/2)}`.
pub fn time_embed(t: f64, dim: usize) -> Array1<f64> {
    let half = dim / 2;
    let mut out = Array1::zeros(dim);
    let s = 1000.0 * t;
    for k in 0..half {
        let freq = (-(10000f64).ln() * k as f64 / half as f64).exp();
        out[2 * k] = (s * freq).sin();
        out[2 * k + 1] = (s * freq).cos();
    }
    out
}

/// Structural features derived from a binarised adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct EnrichedFeatures {
    /// `n × rw_steps`: return probability `(P^m)_{ii}` for `m = 1..=rw_steps`.
    pub node: Array2<f64>,
    /// `P^m` for `m = 1..=rw_steps`; row `i` is the arrival distribution of an
    /// `m`-step walk started at `i`.
    pub walks: Vec<Array2<f64>>,
    /// One-hot shortest-path distance, channel `c < cutoff` for distance `c`,
    /// channel `cutoff` for distance ≥ cutoff or unreachable.
    pub shortest_path: Vec<Array2<f64>>,
}

pub fn enrich_features(g: &Graph, rw_steps: usize, sp_cutoff: usize) -> EnrichedFeatures {
    enrich_adjacency(g.adjacency(), g.mask(), rw_steps, sp_cutoff)
}

/// As [`enrich_features`] on a raw (possibly continuous) adjacency. Isolated
/// active nodes stay put with probability 1; padding rows are all zero.
pub fn enrich_adjacency(adj: &Array2<f64>, mask: &[bool], rw_steps: usize, sp_cutoff: usize) -> EnrichedFeatures {
    let n = mask.len();
    let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        if !mask[i] {
            continue;
        }
        for j in 0..n {
            if i != j && mask[j] && adj[[i, j]] > BINARIZE_THRESHOLD {
                nbrs[i].push(j);
            }
        }
    }
    let mut step = Array2::zeros((n, n));
    for i in 0..n {
        if !mask[i] {
            continue;
        }
        if nbrs[i].is_empty() {
            step[[i, i]] = 1.0;
        } else {
            let p = 1.0 / nbrs[i].len() as f64;
            for &j in &nbrs[i] {
                step[[i, j]] = p;
            }
        }
    }
    let mut walks = Vec::with_capacity(rw_steps);
    let mut node = Array2::zeros((n, rw_steps));
    let mut power = step.clone();
    for m in 0..rw_steps {
        if m > 0 {
            power = power.dot(&step);
        }
        for i in 0..n {
            node[[i, m]] = power[[i, i]];
        }
        walks.push(power.clone());
    }

    let mut shortest_path = vec![Array2::zeros((n, n)); sp_cutoff + 1];
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for src in 0..n {
        if !mask[src] {
            continue;
        }
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[src] = 0;
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            for &w in &nbrs[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        for dst in 0..n {
            if mask[dst] {
                let c = dist[dst].min(sp_cutoff);
                shortest_path[c][[src, dst]] = 1.0;
            }
        }
    }
    EnrichedFeatures { node, walks, shortest_path }
}
