//! Property checks runnable from the command line.
//!
//! Each check reports a measured value against its tolerance. Checks are
//! deterministic: all randomness comes from fixed seeds.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::graph::Graph;
use crate::model::{checkpoint, forward, init_params, loss, loss_grad, Activation, LossContext, ScoreInput, ScoreNetConfig, TrainingExample};
use crate::sde::{bridge_conditional, bridge_drift, h_function, simulate_bridge_forward, BridgeSegment, GouSchedule};
use crate::topology::{cell_filter, edge_in_cycle_oracle, periphery_filter, simplex_filter, FilterSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Sde,
    Topology,
    Model,
    All,
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sde" => Ok(Suite::Sde),
            "topology" => Ok(Suite::Topology),
            "model" => Ok(Suite::Model),
            "all" => Ok(Suite::All),
            other => Err(Error::InvalidArgument(format!("unknown suite '{other}'"))),
        }
    }
}

/// Deliberate defects used to confirm that the checks can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Flip the sign of the bridge drift before comparing identities.
    DriftSign,
}

impl FromStr for Fault {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "drift-sign" => Ok(Fault::DriftSign),
            other => Err(Error::InvalidArgument(format!("unknown fault '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<32} value {:.3e}  tolerance {:.3e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.tolerance
        )
    }
}

fn check(name: &str, value: f64, tolerance: f64) -> CheckResult {
    CheckResult { name: name.into(), passed: value.is_finite() && value <= tolerance, value, tolerance }
}

fn failed(name: &str, e: Error) -> CheckResult {
    log::error!("{name}: {e}");
    CheckResult { name: name.into(), passed: false, value: f64::NAN, tolerance: 0.0 }
}

fn guarded(name: &str, f: impl FnOnce() -> Result<CheckResult>) -> CheckResult {
    f().unwrap_or_else(|e| failed(name, e))
}

pub fn run_suite(suite: Suite, fault: Option<Fault>) -> Vec<CheckResult> {
    let mut out = Vec::new();
    if matches!(suite, Suite::Sde | Suite::All) {
        out.extend(sde_checks(fault));
    }
    if matches!(suite, Suite::Topology | Suite::All) {
        out.extend(topology_checks());
    }
    if matches!(suite, Suite::Model | Suite::All) {
        out.extend(model_checks());
    }
    out
}

fn random_schedule(rng: &mut ChaCha8Rng) -> GouSchedule {
    let a = rng.random_range(0.05..3.0);
    let b = rng.random_range(0.05..3.0);
    GouSchedule { theta_min: a, theta_max: b, sigma2: rng.random_range(0.3..2.0), horizon: 1.0 }
}

fn sde_checks(fault: Option<Fault>) -> Vec<CheckResult> {
    let mut out = Vec::new();
    out.push(guarded("sde.drift_identity", || {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let sch = random_schedule(&mut rng);
            let t = rng.random_range(0.0..0.95);
            let end = rng.random_range(t + 0.02..1.0);
            let x = Array1::from_shape_fn(3, |_| rng.random_range(-3.0..3.0));
            let xe = Array1::from_shape_fn(3, |_| rng.random_range(-3.0..3.0));
            let seg = BridgeSegment::pinned_end(0.0, end, xe.clone(), sch)?;
            let mut drift = bridge_drift(&x, t, &seg)?;
            if fault == Some(Fault::DriftSign) {
                drift.mapv_inplace(|v| -v);
            }
            let reference = (&xe - &x) * sch.theta(t);
            let composed = reference + h_function(&x, t, &xe, end, &sch)? * sch.g2(t);
            worst = worst.max((&composed - &drift).iter().fold(0.0, |m, v| m.max(v.abs())));
        }
        Ok(check("sde.drift_identity", worst, 1e-12))
    }));
    out.push(guarded("sde.h_gradient", || {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let sch = random_schedule(&mut rng);
            let t = rng.random_range(0.0..0.8);
            let end = rng.random_range(t + 0.1..1.0);
            let x: f64 = rng.random_range(-2.0..2.0);
            let xe: f64 = rng.random_range(-2.0..2.0);
            let decay = (-sch.theta_bar(t, end)).exp();
            let var = sch.v2(t, end);
            let log_p = |xt: f64| {
                let mean = xe + (xt - xe) * decay;
                -(xe - mean).powi(2) / (2.0 * var)
            };
            let h = 1e-5;
            let numeric = (log_p(x + h) - log_p(x - h)) / (2.0 * h);
            let analytic = h_function(&Array1::from(vec![x]), t, &Array1::from(vec![xe]), end, &sch)?[0];
            worst = worst.max((numeric - analytic).abs());
        }
        Ok(check("sde.h_gradient", worst, 1e-6))
    }));
    out.push(guarded("sde.brownian_limit", || {
        let sch = GouSchedule { theta_min: 1e-5, theta_max: 1e-5, sigma2: 1.0, horizon: 1.0 };
        let seg = BridgeSegment::pinned_end(0.0, 1.0, Array1::from(vec![2.0]), sch)?;
        let x = Array1::from(vec![-0.5]);
        let mut worst: f64 = 0.0;
        for i in 0..99 {
            let t = i as f64 / 100.0;
            let d = bridge_drift(&x, t, &seg)?[0];
            worst = worst.max((d * (1.0 - t) / 2.5 - 1.0).abs());
        }
        Ok(check("sde.brownian_limit", worst, 1e-3))
    }));
    out.push(guarded("sde.bridge_monte_carlo", || {
        let sch = GouSchedule { theta_min: 1.0, theta_max: 1.0, sigma2: 1.0, horizon: 1.0 };
        let paths = 100_000;
        let seg = BridgeSegment::new(0.0, 1.0, Array1::zeros(paths), Array1::from_elem(paths, 2.0), sch)?;
        let x = simulate_bridge_forward(&seg, &Array1::zeros(paths), 1e-3, 500, &mut ChaCha8Rng::seed_from_u64(13))?;
        let exact = bridge_conditional(&seg, 0.5)?;
        let mean = x.mean().expect("non-empty");
        let var = x.mapv(|v| (v - mean).powi(2)).sum() / (paths - 1) as f64;
        let rel = ((mean - exact.mean[0]) / exact.mean[0]).abs().max(((var - exact.var) / exact.var).abs());
        Ok(check("sde.bridge_monte_carlo", rel, 0.02))
    }));
    out
}

fn er(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    Graph::simple(n, &edges).expect("valid")
}

/// Every `(p+1)`-subset of nodes, kept when all pairs are adjacent.
fn simplex_keep_by_subsets(g: &Graph, p: usize) -> Array2<bool> {
    let n = g.n_max();
    let mut keep = Array2::from_elem((n, n), false);
    let size = p + 1;
    let mut stack: Vec<usize> = Vec::new();
    fn rec(g: &Graph, start: usize, size: usize, stack: &mut Vec<usize>, keep: &mut Array2<bool>) {
        if stack.len() == size {
            let clique = stack.iter().enumerate().all(|(a, &u)| stack[a + 1..].iter().all(|&v| g.has_edge(u, v)));
            if clique {
                for (a, &u) in stack.iter().enumerate() {
                    for &v in &stack[a + 1..] {
                        keep[[u, v]] = true;
                        keep[[v, u]] = true;
                    }
                }
            }
            return;
        }
        for v in start..g.n_max() {
            stack.push(v);
            rec(g, v + 1, size, stack, keep);
            stack.pop();
        }
    }
    rec(g, 0, size, &mut stack, &mut keep);
    keep
}

fn topology_checks() -> Vec<CheckResult> {
    let mut out = Vec::new();
    out.push(guarded("topology.cell_oracle", || {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut mismatches = 0usize;
        for _ in 0..100 {
            let g = er(10, 0.3, &mut rng);
            let f = cell_filter(&g, 8);
            for (i, j, _) in g.edges() {
                if f.edge_keep[[i, j]] != edge_in_cycle_oracle(&g, i, j, 8)? {
                    mismatches += 1;
                }
            }
        }
        Ok(check("topology.cell_oracle", mismatches as f64, 0.0))
    }));
    out.push(guarded("topology.simplex_oracle", || {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let mut mismatches = 0usize;
        for _ in 0..50 {
            let g = er(12, 0.5, &mut rng);
            for p in [2, 3] {
                let f = simplex_filter(&g, p);
                let oracle = simplex_keep_by_subsets(&g, p);
                mismatches += f.edge_keep.iter().zip(oracle.iter()).filter(|(a, b)| a != b).count();
            }
        }
        Ok(check("topology.simplex_oracle", mismatches as f64, 0.0))
    }));
    out.push(guarded("topology.periphery_complement", || {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut mismatches = 0usize;
        for _ in 0..50 {
            let g = er(12, 0.25, &mut rng);
            let core = cell_filter(&g, 8);
            let peri = periphery_filter(&g, &FilterSpec::new(crate::topology::FilterKind::Periphery))?;
            for (i, j, _) in g.edges() {
                if core.edge_keep[[i, j]] == peri.edge_keep[[i, j]] {
                    mismatches += 1;
                }
            }
        }
        Ok(check("topology.periphery_complement", mismatches as f64, 0.0))
    }));
    out
}

fn verify_net_config() -> ScoreNetConfig {
    ScoreNetConfig {
        node_dim: 2,
        hidden_dim: 6,
        n_gcn_layers: 2,
        n_attn_layers: 1,
        time_dim: 4,
        rw_steps: 3,
        sp_cutoff: 3,
        activation: Activation::Silu,
        eig_position: true,
    }
}

fn random_input(n: usize, n_active: usize, d: usize, rng: &mut ChaCha8Rng) -> ScoreInput {
    let mask: Vec<bool> = (0..n).map(|i| i < n_active).collect();
    let mut sym = || {
        let mut a = Array2::<f64>::zeros((n, n));
        for i in 0..n_active {
            for j in i + 1..n_active {
                let v = if rng.random_bool(0.4) { rng.random_range(0.6..1.4) } else { rng.random_range(-0.3..0.3) };
                a[[i, j]] = v;
                a[[j, i]] = v;
            }
        }
        a
    };
    let adjacency = sym();
    let endpoint_adjacency = sym();
    let rows = |rng: &mut ChaCha8Rng| Array2::from_shape_fn((n, d), |(i, _)| if i < n_active { rng.random_range(-1.0..1.0) } else { 0.0 });
    let vec = |rng: &mut ChaCha8Rng| Array1::from_shape_fn(n, |i| if i < n_active { rng.random_range(0.0..5.0) } else { 0.0 });
    ScoreInput {
        x: rows(rng),
        endpoint_x: rows(rng),
        adjacency,
        endpoint_adjacency,
        lambda: vec(rng),
        endpoint_lambda: vec(rng),
        t: rng.random_range(0.0..1.0),
        eig_mask: mask.clone(),
        mask,
        score_scale: rng.random_range(0.5..2.0),
    }
}

fn randomized_params(cfg: &ScoreNetConfig, seed: u64) -> Result<crate::model::ScoreNetParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = init_params(cfg, &mut rng)?;
    for t in p.tensors_mut() {
        t.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    }
    Ok(p)
}

fn permuted(inp: &ScoreInput, perm: &[usize]) -> ScoreInput {
    let mut q = inp.clone();
    let n = perm.len();
    for i in 0..n {
        q.x.row_mut(perm[i]).assign(&inp.x.row(i));
        q.endpoint_x.row_mut(perm[i]).assign(&inp.endpoint_x.row(i));
        q.mask[perm[i]] = inp.mask[i];
        for j in 0..n {
            q.adjacency[[perm[i], perm[j]]] = inp.adjacency[[i, j]];
            q.endpoint_adjacency[[perm[i], perm[j]]] = inp.endpoint_adjacency[[i, j]];
        }
    }
    q
}

fn model_checks() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let cfg = verify_net_config();
    out.push(guarded("model.equivariance", || {
        let p = randomized_params(&cfg, 31)?;
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let inp = random_input(7, 7, cfg.node_dim, &mut rng);
        let base = forward(&p, &inp)?;
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let mut perm: Vec<usize> = (0..7).collect();
            perm.shuffle(&mut rng);
            let o = forward(&p, &permuted(&inp, &perm))?;
            for i in 0..7 {
                for f in 0..cfg.node_dim {
                    worst = worst.max((base.x[[i, f]] - o.x[[perm[i], f]]).abs());
                }
            }
            worst = worst.max((&base.lambda - &o.lambda).iter().fold(0.0, |m, v| m.max(v.abs())));
        }
        Ok(check("model.equivariance", worst, 1e-5))
    }));
    out.push(guarded("model.gradient_check", || {
        let p = randomized_params(&cfg, 33)?;
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let batch: Vec<TrainingExample> = (0..2)
            .map(|k| {
                let input = random_input(6, 5 - k, cfg.node_dim, &mut rng);
                TrainingExample {
                    target_x: Array2::from_shape_fn((6, cfg.node_dim), |_| rng.random_range(-1.0..1.0)),
                    target_lambda: Array1::from_shape_fn(6, |_| rng.random_range(-1.0..1.0)),
                    variance: 0.3,
                    weight: 0.3,
                    input,
                }
            })
            .collect();
        let ctx = LossContext::default();
        let (_, grads) = loss_grad(&p, &batch, &ctx)?;
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for k in 0..p.tensors().len() {
            let (rows, cols) = p.tensors()[k].dim();
            let mut diff = 0.0;
            let mut norm_fd = 0.0;
            let mut norm_an = 0.0;
            for r in 0..rows {
                for c in 0..cols {
                    let mut plus = p.clone();
                    plus.tensors_mut()[k][[r, c]] += h;
                    let mut minus = p.clone();
                    minus.tensors_mut()[k][[r, c]] -= h;
                    let fd = (loss(&plus, &batch, &ctx)? - loss(&minus, &batch, &ctx)?) / (2.0 * h);
                    let an = grads.tensors[k][[r, c]];
                    diff += (fd - an).powi(2);
                    norm_fd += fd * fd;
                    norm_an += an * an;
                }
            }
            let scale = norm_fd.sqrt().max(norm_an.sqrt());
            let rel = if scale > 1e-8 { diff.sqrt() / scale } else { diff.sqrt() };
            worst = worst.max(rel);
        }
        Ok(check("model.gradient_check", worst, 1e-4))
    }));
    out.push(guarded("model.zero_init", || {
        let p = init_params(&cfg, &mut ChaCha8Rng::seed_from_u64(35))?;
        let inp = random_input(6, 4, cfg.node_dim, &mut ChaCha8Rng::seed_from_u64(36));
        let o = forward(&p, &inp)?;
        let m = o.x.iter().chain(o.lambda.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(check("model.zero_init", m, 0.0))
    }));
    out.push(guarded("model.checkpoint_roundtrip", || {
        let p = randomized_params(&cfg, 37)?;
        let mut buf = Vec::new();
        checkpoint::write_checkpoint(&p, &mut buf)?;
        let q = checkpoint::read_checkpoint(buf.as_slice())?;
        let worst = p.tensors().iter().zip(q.tensors()).flat_map(|(a, b)| a.iter().zip(b.iter())).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        Ok(check("model.checkpoint_roundtrip", if p == q { worst } else { f64::INFINITY }, 0.0))
    }));
    out
}
