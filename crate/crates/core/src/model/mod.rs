//! Permutation-equivariant score network.
//!
//! One GCN branch (local aggregation) and one dot-product attention branch
//! (global mixing, biased by random-walk, shortest-path and adjacency edge
//! channels) are FiLM-modulated by a sinusoidal time embedding and
//! concatenated. A per-node MLP produces the node-feature score and a
//! per-eigenvalue MLP over `[λ_i, endpoint λ_i, spectral position, time,
//! pooled graph embedding]` produces the spectrum score.
//!
//! Gradients are hand-derived for this fixed architecture; see
//! [`network::loss_grad`].

mod adam;
pub mod checkpoint;
mod features;
mod network;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use adam::{clip_grad_norm, Adam};
pub use features::{enrich_adjacency, enrich_features, time_embed, EnrichedFeatures, BINARIZE_THRESHOLD};
pub use network::{forward, loss, loss_grad, LossContext, ScoreInput, ScoreOutput, TrainingExample};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Silu,
}

impl Activation {
    pub(crate) fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Silu => x / (1.0 + (-x).exp()),
        }
    }

    pub(crate) fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-x).exp());
                s * (1.0 + x * (1.0 - s))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreNetConfig {
    /// Node feature width `d` of the diffused state.
    pub node_dim: usize,
    pub hidden_dim: usize,
    pub n_gcn_layers: usize,
    pub n_attn_layers: usize,
    pub time_dim: usize,
    pub rw_steps: usize,
    pub sp_cutoff: usize,
    pub activation: Activation,
    /// Feed each eigenvalue's relative position and the active-node fraction
    /// to the spectrum head.
    #[serde(default = "yes")]
    pub eig_position: bool,
}

fn yes() -> bool {
    true
}

impl ScoreNetConfig {
    pub fn with_node_dim(node_dim: usize) -> Self {
        Self {
            node_dim,
            hidden_dim: 32,
            n_gcn_layers: 2,
            n_attn_layers: 1,
            time_dim: 16,
            rw_steps: 4,
            sp_cutoff: 5,
            activation: Activation::Silu,
            eig_position: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.node_dim,
            self.hidden_dim,
            self.n_gcn_layers,
            self.n_attn_layers,
            self.time_dim,
            self.rw_steps,
            self.sp_cutoff,
        ];
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Config("score network dimensions must be positive".into()));
        }
        if self.time_dim % 2 != 0 {
            return Err(Error::Config(format!("time_dim must be even, got {}", self.time_dim)));
        }
        Ok(())
    }

    pub(crate) fn input_dim(&self) -> usize {
        2 * self.node_dim + self.rw_steps
    }

    /// Random-walk powers, shortest-path one-hot, endpoint and current adjacency.
    pub(crate) fn edge_channels(&self) -> usize {
        self.rw_steps + self.sp_cutoff + 1 + 2
    }

    pub(crate) fn eig_input_dim(&self) -> usize {
        2 + if self.eig_position { 2 } else { 0 } + self.time_dim + 2 * self.hidden_dim
    }
}

/// Tensor indices into the parameter list, in registry order.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub input_w: usize,
    pub input_b: usize,
    pub gcn_w: Vec<usize>,
    pub gcn_b: Vec<usize>,
    pub gcn_film_w: usize,
    pub gcn_film_b: usize,
    pub attn_q: Vec<usize>,
    pub attn_k: Vec<usize>,
    pub attn_v: Vec<usize>,
    pub attn_edge: Vec<usize>,
    pub attn_out_w: Vec<usize>,
    pub attn_out_b: Vec<usize>,
    pub attn_film_w: usize,
    pub attn_film_b: usize,
    pub node_w1: usize,
    pub node_b1: usize,
    pub node_w2: usize,
    pub node_b2: usize,
    pub eig_w1: usize,
    pub eig_b1: usize,
    pub eig_w2: usize,
    pub eig_b2: usize,
}

/// Deterministic name → shape registry for a configuration.
pub fn registry(cfg: &ScoreNetConfig) -> Vec<(String, [usize; 2])> {
    registry_with_layout(cfg).0
}

pub(crate) fn registry_with_layout(cfg: &ScoreNetConfig) -> (Vec<(String, [usize; 2])>, Layout) {
    let h = cfg.hidden_dim;
    let mut reg: Vec<(String, [usize; 2])> = Vec::new();
    let mut push = |name: String, shape: [usize; 2]| {
        reg.push((name, shape));
        reg.len() - 1
    };
    let input_w = push("input.weight".into(), [cfg.input_dim(), h]);
    let input_b = push("input.bias".into(), [1, h]);
    let mut gcn_w = Vec::new();
    let mut gcn_b = Vec::new();
    for l in 0..cfg.n_gcn_layers {
        gcn_w.push(push(format!("gcn.{l}.weight"), [h, h]));
        gcn_b.push(push(format!("gcn.{l}.bias"), [1, h]));
    }
    let gcn_film_w = push("gcn.film.weight".into(), [cfg.time_dim, 2 * h]);
    let gcn_film_b = push("gcn.film.bias".into(), [1, 2 * h]);
    let (mut attn_q, mut attn_k, mut attn_v, mut attn_edge, mut attn_out_w, mut attn_out_b) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for l in 0..cfg.n_attn_layers {
        attn_q.push(push(format!("attn.{l}.query"), [h, h]));
        attn_k.push(push(format!("attn.{l}.key"), [h, h]));
        attn_v.push(push(format!("attn.{l}.value"), [h, h]));
        attn_edge.push(push(format!("attn.{l}.edge"), [cfg.edge_channels(), 1]));
        attn_out_w.push(push(format!("attn.{l}.out.weight"), [h, h]));
        attn_out_b.push(push(format!("attn.{l}.out.bias"), [1, h]));
    }
    let attn_film_w = push("attn.film.weight".into(), [cfg.time_dim, 2 * h]);
    let attn_film_b = push("attn.film.bias".into(), [1, 2 * h]);
    let node_w1 = push("node_head.0.weight".into(), [2 * h, h]);
    let node_b1 = push("node_head.0.bias".into(), [1, h]);
    let node_w2 = push("node_head.1.weight".into(), [h, cfg.node_dim]);
    let node_b2 = push("node_head.1.bias".into(), [1, cfg.node_dim]);
    let eig_w1 = push("eig_head.0.weight".into(), [cfg.eig_input_dim(), h]);
    let eig_b1 = push("eig_head.0.bias".into(), [1, h]);
    let eig_w2 = push("eig_head.1.weight".into(), [h, 1]);
    let eig_b2 = push("eig_head.1.bias".into(), [1, 1]);
    let layout = Layout {
        input_w,
        input_b,
        gcn_w,
        gcn_b,
        gcn_film_w,
        gcn_film_b,
        attn_q,
        attn_k,
        attn_v,
        attn_edge,
        attn_out_w,
        attn_out_b,
        attn_film_w,
        attn_film_b,
        node_w1,
        node_b1,
        node_w2,
        node_b2,
        eig_w1,
        eig_b1,
        eig_w2,
        eig_b2,
    };
    (reg, layout)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreNetParams {
    config: ScoreNetConfig,
    names: Vec<String>,
    tensors: Vec<Array2<f64>>,
    layout: LayoutHolder,
}

// Layout is derived from the config; excluded from equality.
#[derive(Debug, Clone)]
struct LayoutHolder(Layout);

impl PartialEq for LayoutHolder {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl ScoreNetParams {
    /// All-zero parameters of the registry shapes.
    pub fn zeros(config: &ScoreNetConfig) -> Result<Self> {
        config.validate()?;
        let (reg, layout) = registry_with_layout(config);
        let names = reg.iter().map(|(n, _)| n.clone()).collect();
        let tensors = reg.iter().map(|(_, s)| Array2::zeros((s[0], s[1]))).collect();
        Ok(Self { config: config.clone(), names, tensors, layout: LayoutHolder(layout) })
    }

    /// Build from named tensors, checking them against the registry.
    pub fn from_tensors(config: &ScoreNetConfig, named: Vec<(String, Array2<f64>)>) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        if named.len() != p.names.len() {
            return Err(Error::Checkpoint(format!("expected {} tensors, found {}", p.names.len(), named.len())));
        }
        for (k, (name, t)) in named.into_iter().enumerate() {
            if name != p.names[k] {
                return Err(Error::Checkpoint(format!("tensor {k} is '{name}', expected '{}'", p.names[k])));
            }
            if t.dim() != p.tensors[k].dim() {
                return Err(Error::Checkpoint(format!("tensor '{name}' has shape {:?}, expected {:?}", t.dim(), p.tensors[k].dim())));
            }
            if t.iter().any(|x| !x.is_finite()) {
                return Err(Error::Checkpoint(format!("tensor '{name}' has non-finite values")));
            }
            p.tensors[k] = t;
        }
        Ok(p)
    }

    pub fn config(&self) -> &ScoreNetConfig {
        &self.config
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Array2<f64>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Array2<f64>> {
        self.names.iter().position(|n| n == name).map(|k| &self.tensors[k])
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub(crate) fn layout(&self) -> &Layout {
        &self.layout.0
    }

    pub(crate) fn t(&self, k: usize) -> &Array2<f64> {
        &self.tensors[k]
    }
}

/// Fan-in scaled uniform initialisation. Biases start at zero and both output
/// layers are zero so the initial score is identically 0.
pub fn init_params<R: Rng + ?Sized>(config: &ScoreNetConfig, rng: &mut R) -> Result<ScoreNetParams> {
    let mut p = ScoreNetParams::zeros(config)?;
    let lay = p.layout().clone();
    let zero_init = [lay.node_w2, lay.node_b2, lay.eig_w2, lay.eig_b2];
    for k in 0..p.tensors.len() {
        let is_bias = p.names[k].ends_with("bias");
        if is_bias || zero_init.contains(&k) {
            continue;
        }
        let fan_in = p.tensors[k].nrows() as f64;
        let bound = 1.0 / fan_in.sqrt();
        p.tensors[k].mapv_inplace(|_| rng.random_range(-bound..bound));
    }
    Ok(p)
}

/// Gradient tensors in registry order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Array2<f64>>,
}

impl Gradients {
    pub fn zeros_like(p: &ScoreNetParams) -> Self {
        Self { tensors: p.tensors.iter().map(|t| Array2::zeros(t.dim())).collect() }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in &mut self.tensors {
            t.mapv_inplace(|x| x * s);
        }
    }

    pub fn norm(&self) -> f64 {
        self.tensors.iter().flat_map(|t| t.iter()).map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn init_is_seeded_and_matches_registry() {
        let cfg = ScoreNetConfig::with_node_dim(3);
        let a = init_params(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = init_params(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
        let declared: usize = registry(&cfg).iter().map(|(_, s)| s[0] * s[1]).sum();
        assert_eq!(a.num_parameters(), declared);
        assert!(a.get("node_head.1.weight").unwrap().iter().all(|&x| x == 0.0));
        assert!(a.get("input.weight").unwrap().iter().any(|&x| x != 0.0));
    }

    #[test]
    fn config_validation() {
        let mut cfg = ScoreNetConfig::with_node_dim(2);
        cfg.time_dim = 7;
        assert!(cfg.validate().is_err());
        cfg.time_dim = 8;
        cfg.hidden_dim = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn from_tensors_checks_shapes() {
        let cfg = ScoreNetConfig::with_node_dim(2);
        let p = ScoreNetParams::zeros(&cfg).unwrap();
        let mut named: Vec<_> = p.names().iter().cloned().zip(p.tensors().iter().cloned()).collect();
        assert!(ScoreNetParams::from_tensors(&cfg, named.clone()).is_ok());
        named[0].1 = Array2::zeros((1, 1));
        assert!(ScoreNetParams::from_tensors(&cfg, named).is_err());
    }

    #[test]
    fn silu_derivative_matches_difference() {
        for x in [-3.0, -0.2, 0.0, 0.7, 4.0] {
            let h = 1e-6;
            let fd = (Activation::Silu.apply(x + h) - Activation::Silu.apply(x - h)) / (2.0 * h);
            assert!((fd - Activation::Silu.derivative(x)).abs() < 1e-8);
        }
    }
}
