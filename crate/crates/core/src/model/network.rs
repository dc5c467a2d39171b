use ndarray::{concatenate, s, Array1, Array2, Axis};

use super::features::{enrich_adjacency, time_embed};
use super::{Activation, Gradients, ScoreNetParams};
use crate::{par, Error, Result};

/// One network evaluation: current state, bridge endpoint and time.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreInput {
    /// `n × d` current node features.
    pub x: Array2<f64>,
    /// `n × n` adjacency reconstructed from the current spectral state.
    pub adjacency: Array2<f64>,
    pub endpoint_x: Array2<f64>,
    pub endpoint_adjacency: Array2<f64>,
    /// Current eigenvalues, length `n`.
    pub lambda: Array1<f64>,
    pub endpoint_lambda: Array1<f64>,
    pub t: f64,
    pub mask: Vec<bool>,
    /// Eigenvalue slots that carry signal; padding slots get a zero score.
    pub eig_mask: Vec<bool>,
    /// Multiplies both outputs; the pipeline sets it to the inverse
    /// conditional standard deviation.
    pub score_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreOutput {
    pub x: Array2<f64>,
    pub lambda: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub input: ScoreInput,
    pub target_x: Array2<f64>,
    pub target_lambda: Array1<f64>,
    /// Conditional variance of the sampled state; examples with zero
    /// variance are skipped.
    pub variance: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossContext {
    pub c_x: f64,
    pub c_lambda: f64,
}

impl Default for LossContext {
    fn default() -> Self {
        Self { c_x: 1.0, c_lambda: 1.0 }
    }
}

struct AttnCache {
    y_in: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Array2<f64>,
    o: Array2<f64>,
    pre: Array2<f64>,
}

struct Cache {
    m: Array2<f64>,
    temb: Array2<f64>,
    xin: Array2<f64>,
    pre_in: Array2<f64>,
    ahat: Array2<f64>,
    gcn_agg: Vec<Array2<f64>>,
    gcn_pre: Vec<Array2<f64>>,
    h_gcn: Array2<f64>,
    gamma_g: Array2<f64>,
    attn: Vec<AttnCache>,
    y_attn: Array2<f64>,
    gamma_a: Array2<f64>,
    z: Array2<f64>,
    node_pre: Array2<f64>,
    node_u: Array2<f64>,
    n_active: usize,
    eig_rows: Vec<usize>,
    eig_in: Array2<f64>,
    eig_pre: Array2<f64>,
    eig_u: Array2<f64>,
    edges: Vec<Array2<f64>>,
    scale: f64,
}

fn check_input(p: &ScoreNetParams, inp: &ScoreInput) -> Result<()> {
    let n = inp.mask.len();
    let d = p.config().node_dim;
    let bad = |what: &str| Err(Error::InvalidArgument(format!("score input: {what}")));
    if inp.x.dim() != (n, d) || inp.endpoint_x.dim() != (n, d) {
        return bad(&format!("node features must be {n}×{d}"));
    }
    if inp.adjacency.dim() != (n, n) || inp.endpoint_adjacency.dim() != (n, n) {
        return bad("adjacency shape mismatch");
    }
    if inp.lambda.len() != n || inp.endpoint_lambda.len() != n || inp.eig_mask.len() != n {
        return bad("spectrum length mismatch");
    }
    if !(inp.score_scale.is_finite() && inp.score_scale > 0.0) {
        return bad("score_scale must be positive");
    }
    if !inp.t.is_finite() {
        return bad("time must be finite");
    }
    if inp.mask.iter().all(|&b| !b) {
        return bad("no active nodes");
    }
    Ok(())
}

fn act(a: Activation, x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| a.apply(v))
}

fn act_grad(a: Activation, upstream: &Array2<f64>, pre: &Array2<f64>) -> Array2<f64> {
    let mut out = upstream.clone();
    out.zip_mut_with(pre, |u, &p| *u *= a.derivative(p));
    out
}

fn colsum(x: &Array2<f64>) -> Array2<f64> {
    x.sum_axis(Axis(0)).insert_axis(Axis(0))
}

fn affine(x: &Array2<f64>, w: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    x.dot(w) + b
}

/// `D^{-1/2}(max(A,0)+I)D^{-1/2}` on the active block, zero elsewhere.
fn gcn_operator(adj: &Array2<f64>, mask: &[bool]) -> Array2<f64> {
    let n = mask.len();
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        if !mask[i] {
            continue;
        }
        for j in 0..n {
            if mask[j] {
                a[[i, j]] = if i == j { 1.0 } else { adj[[i, j]].max(0.0) };
            }
        }
    }
    let d: Vec<f64> = (0..n).map(|i| a.row(i).sum()).map(|s| if s > 0.0 { 1.0 / s.sqrt() } else { 0.0 }).collect();
    for i in 0..n {
        for j in 0..n {
            a[[i, j]] *= d[i] * d[j];
        }
    }
    a
}

fn run(p: &ScoreNetParams, inp: &ScoreInput) -> Result<(ScoreOutput, Cache)> {
    check_input(p, inp)?;
    let cfg = p.config();
    let lay = p.layout();
    let a = cfg.activation;
    let n = inp.mask.len();
    let h = cfg.hidden_dim;
    let m = Array2::from_shape_fn((n, 1), |(i, _)| if inp.mask[i] { 1.0 } else { 0.0 });
    let temb = time_embed(inp.t, cfg.time_dim).insert_axis(Axis(0));

    let enriched = enrich_adjacency(&inp.adjacency, &inp.mask, cfg.rw_steps, cfg.sp_cutoff);
    let xin = concatenate(Axis(1), &[(&inp.x * &m).view(), (&inp.endpoint_x * &m).view(), enriched.node.view()])
        .expect("input widths agree");
    let pre_in = affine(&xin, p.t(lay.input_w), p.t(lay.input_b));
    let h0 = act(a, &pre_in) * &m;

    let ahat = gcn_operator(&inp.adjacency, &inp.mask);
    let mut hg = h0.clone();
    let mut gcn_agg = Vec::new();
    let mut gcn_pre = Vec::new();
    for l in 0..cfg.n_gcn_layers {
        let agg = ahat.dot(&hg);
        let pre = affine(&agg, p.t(lay.gcn_w[l]), p.t(lay.gcn_b[l]));
        hg = act(a, &pre) * &m;
        gcn_agg.push(agg);
        gcn_pre.push(pre);
    }
    let film_g = affine(&temb, p.t(lay.gcn_film_w), p.t(lay.gcn_film_b));
    let gamma_g = film_g.slice(s![.., ..h]).to_owned();
    let gg = (&hg * &(&gamma_g + 1.0) + &film_g.slice(s![.., h..])) * &m;

    let mut edges = enriched.walks;
    edges.extend(enriched.shortest_path);
    edges.push(&inp.endpoint_adjacency * &m * &m.t());
    edges.push(&inp.adjacency * &m * &m.t());
    let inv_sqrt_h = 1.0 / (h as f64).sqrt();
    let mut y = h0;
    let mut attn = Vec::new();
    for l in 0..cfg.n_attn_layers {
        let q = y.dot(p.t(lay.attn_q[l]));
        let k = y.dot(p.t(lay.attn_k[l]));
        let v = y.dot(p.t(lay.attn_v[l]));
        let we = p.t(lay.attn_edge[l]);
        let mut scores = q.dot(&k.t()) * inv_sqrt_h;
        for (c, e) in edges.iter().enumerate() {
            scores.scaled_add(we[[c, 0]], e);
        }
        let mut probs = Array2::zeros((n, n));
        for i in 0..n {
            if !inp.mask[i] {
                continue;
            }
            let mx = (0..n).filter(|&j| inp.mask[j]).map(|j| scores[[i, j]]).fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for j in 0..n {
                if inp.mask[j] {
                    let e = (scores[[i, j]] - mx).exp();
                    probs[[i, j]] = e;
                    z += e;
                }
            }
            probs.row_mut(i).mapv_inplace(|x| x / z);
        }
        let o = probs.dot(&v);
        let pre = affine(&o, p.t(lay.attn_out_w[l]), p.t(lay.attn_out_b[l]));
        let y_next = &y + &(act(a, &pre) * &m);
        attn.push(AttnCache { y_in: y, q, k, v, probs, o, pre });
        y = y_next;
    }
    let film_a = affine(&temb, p.t(lay.attn_film_w), p.t(lay.attn_film_b));
    let gamma_a = film_a.slice(s![.., ..h]).to_owned();
    let ga = (&y * &(&gamma_a + 1.0) + &film_a.slice(s![.., h..])) * &m;

    let z = concatenate(Axis(1), &[gg.view(), ga.view()]).expect("branch widths agree");
    let node_pre = affine(&z, p.t(lay.node_w1), p.t(lay.node_b1));
    let node_u = act(a, &node_pre);
    let scale = inp.score_scale;
    let out_x = affine(&node_u, p.t(lay.node_w2), p.t(lay.node_b2)) * &m * scale;

    let n_active = inp.mask.iter().filter(|&&b| b).count();
    let pooled = (&z * &m).sum_axis(Axis(0)) / n_active as f64;
    let eig_rows: Vec<usize> = (0..n).filter(|&i| inp.eig_mask[i]).collect();
    let n_eig = eig_rows.len();
    let mut eig_in = Array2::zeros((n_eig, cfg.eig_input_dim()));
    for (r, &i) in eig_rows.iter().enumerate() {
        let mut row = vec![inp.lambda[i], inp.endpoint_lambda[i]];
        if cfg.eig_position {
            row.push(if n_eig > 1 { r as f64 / (n_eig - 1) as f64 } else { 0.0 });
            row.push(n_eig as f64 / n as f64);
        }
        row.extend(temb.iter());
        row.extend(pooled.iter());
        eig_in.row_mut(r).assign(&Array1::from(row));
    }
    let eig_pre = affine(&eig_in, p.t(lay.eig_w1), p.t(lay.eig_b1));
    let eig_u = act(a, &eig_pre);
    let eig_out = affine(&eig_u, p.t(lay.eig_w2), p.t(lay.eig_b2));
    let mut out_l = Array1::zeros(n);
    for (r, &i) in eig_rows.iter().enumerate() {
        out_l[i] = eig_out[[r, 0]] * scale;
    }

    if out_x.iter().chain(out_l.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Divergence { step: 0, what: "score network produced non-finite output".into() });
    }
    let cache = Cache {
        m,
        temb,
        xin,
        pre_in,
        ahat,
        gcn_agg,
        gcn_pre,
        h_gcn: hg,
        gamma_g,
        attn,
        y_attn: y,
        gamma_a,
        z,
        node_pre,
        node_u,
        n_active,
        eig_rows,
        eig_in,
        eig_pre,
        eig_u,
        edges,
        scale,
    };
    Ok((ScoreOutput { x: out_x, lambda: out_l }, cache))
}

/// Evaluate the score network. Padded rows and eigenvalue slots are zero.
pub fn forward(p: &ScoreNetParams, inp: &ScoreInput) -> Result<ScoreOutput> {
    run(p, inp).map(|(o, _)| o)
}

/// Gradient of a scalar loss with upstream derivatives `d_x`, `d_lambda`.
fn backward(p: &ScoreNetParams, c: &Cache, d_x: &Array2<f64>, d_lambda: &Array1<f64>) -> Gradients {
    let cfg = p.config();
    let lay = p.layout();
    let a = cfg.activation;
    let h = cfg.hidden_dim;
    let m = &c.m;
    let mut g = Gradients::zeros_like(p);

    let d_out = d_x * m * c.scale;
    g.tensors[lay.node_w2] = c.node_u.t().dot(&d_out);
    g.tensors[lay.node_b2] = colsum(&d_out);
    let d_pre = act_grad(a, &d_out.dot(&p.t(lay.node_w2).t()), &c.node_pre);
    g.tensors[lay.node_w1] = c.z.t().dot(&d_pre);
    g.tensors[lay.node_b1] = colsum(&d_pre);
    let mut d_z = d_pre.dot(&p.t(lay.node_w1).t());

    let n_eig = c.eig_rows.len();
    let d_eo = Array2::from_shape_fn((n_eig, 1), |(r, _)| d_lambda[c.eig_rows[r]] * c.scale);
    g.tensors[lay.eig_w2] = c.eig_u.t().dot(&d_eo);
    g.tensors[lay.eig_b2] = colsum(&d_eo);
    let d_epre = act_grad(a, &d_eo.dot(&p.t(lay.eig_w2).t()), &c.eig_pre);
    g.tensors[lay.eig_w1] = c.eig_in.t().dot(&d_epre);
    g.tensors[lay.eig_b1] = colsum(&d_epre);
    let d_ein = d_epre.dot(&p.t(lay.eig_w1).t());
    let pooled_from = cfg.eig_input_dim() - 2 * h;
    let d_pooled = d_ein.slice(s![.., pooled_from..]).sum_axis(Axis(0)) / c.n_active as f64;
    d_z += &(m * &d_pooled.insert_axis(Axis(0)));

    let d_gg = d_z.slice(s![.., ..h]).to_owned() * m;
    let d_ga = d_z.slice(s![.., h..]).to_owned() * m;

    let film_grad = |d_mod: &Array2<f64>, x: &Array2<f64>, gamma: &Array2<f64>| -> (Array2<f64>, Array2<f64>) {
        let d_gamma = colsum(&(d_mod * x));
        let d_beta = colsum(d_mod);
        let d_film = concatenate(Axis(1), &[d_gamma.view(), d_beta.view()]).expect("film halves");
        (d_mod * &(gamma + 1.0), d_film)
    };

    let (mut d_y, d_film_a) = film_grad(&d_ga, &c.y_attn, &c.gamma_a);
    g.tensors[lay.attn_film_w] = c.temb.t().dot(&d_film_a);
    g.tensors[lay.attn_film_b] = d_film_a;

    let inv_sqrt_h = 1.0 / (h as f64).sqrt();
    for l in (0..cfg.n_attn_layers).rev() {
        let ac = &c.attn[l];
        let d_pre = act_grad(a, &(&d_y * m), &ac.pre);
        g.tensors[lay.attn_out_w[l]] = ac.o.t().dot(&d_pre);
        g.tensors[lay.attn_out_b[l]] = colsum(&d_pre);
        let d_o = d_pre.dot(&p.t(lay.attn_out_w[l]).t());
        let d_probs = d_o.dot(&ac.v.t());
        let d_v = ac.probs.t().dot(&d_o);
        let mut d_s = &ac.probs * &d_probs;
        let row_dot = d_s.sum_axis(Axis(1));
        for (i, mut row) in d_s.rows_mut().into_iter().enumerate() {
            let rd = row_dot[i];
            row.zip_mut_with(&ac.probs.row(i), |v, &pr| *v -= pr * rd);
        }
        for (ch, e) in c.edges.iter().enumerate() {
            g.tensors[lay.attn_edge[l]][[ch, 0]] = (&d_s * e).sum();
        }
        let d_q = d_s.dot(&ac.k) * inv_sqrt_h;
        let d_k = d_s.t().dot(&ac.q) * inv_sqrt_h;
        g.tensors[lay.attn_q[l]] = ac.y_in.t().dot(&d_q);
        g.tensors[lay.attn_k[l]] = ac.y_in.t().dot(&d_k);
        g.tensors[lay.attn_v[l]] = ac.y_in.t().dot(&d_v);
        d_y = d_y
            + d_q.dot(&p.t(lay.attn_q[l]).t())
            + d_k.dot(&p.t(lay.attn_k[l]).t())
            + d_v.dot(&p.t(lay.attn_v[l]).t());
    }

    let (mut d_h, d_film_g) = film_grad(&d_gg, &c.h_gcn, &c.gamma_g);
    g.tensors[lay.gcn_film_w] = c.temb.t().dot(&d_film_g);
    g.tensors[lay.gcn_film_b] = d_film_g;
    for l in (0..cfg.n_gcn_layers).rev() {
        let d_pre = act_grad(a, &(&d_h * m), &c.gcn_pre[l]);
        g.tensors[lay.gcn_w[l]] = c.gcn_agg[l].t().dot(&d_pre);
        g.tensors[lay.gcn_b[l]] = colsum(&d_pre);
        d_h = c.ahat.t().dot(&d_pre.dot(&p.t(lay.gcn_w[l]).t()));
    }

    let d_h0 = d_y + d_h;
    let d_pre_in = act_grad(a, &(&d_h0 * m), &c.pre_in);
    g.tensors[lay.input_w] = c.xin.t().dot(&d_pre_in);
    g.tensors[lay.input_b] = colsum(&d_pre_in);
    g
}

fn usable(ex: &TrainingExample) -> bool {
    let ok = ex.variance > 0.0
        && ex.weight.is_finite()
        && ex.target_x.iter().chain(ex.target_lambda.iter()).all(|v| v.is_finite());
    if !ok {
        log::warn!("skipping training example at t={} with degenerate variance {}", ex.input.t, ex.variance);
    }
    ok
}

fn example_loss(p: &ScoreNetParams, ex: &TrainingExample, ctx: &LossContext, with_grad: bool) -> Result<(f64, Option<Gradients>)> {
    let (out, cache) = run(p, &ex.input)?;
    if ex.target_x.dim() != out.x.dim() || ex.target_lambda.len() != out.lambda.len() {
        return Err(Error::InvalidArgument("target shape mismatch".into()));
    }
    let mx = &cache.m;
    let rx = (&out.x - &ex.target_x) * mx;
    let rl = Array1::from_shape_fn(out.lambda.len(), |i| {
        if ex.input.eig_mask[i] {
            out.lambda[i] - ex.target_lambda[i]
        } else {
            0.0
        }
    });
    let value = ex.weight * (ctx.c_x * rx.iter().map(|v| v * v).sum::<f64>() + ctx.c_lambda * rl.dot(&rl));
    if !with_grad {
        return Ok((value, None));
    }
    let d_x = rx * (2.0 * ex.weight * ctx.c_x);
    let d_l = rl * (2.0 * ex.weight * ctx.c_lambda);
    Ok((value, Some(backward(p, &cache, &d_x, &d_l))))
}

/// Weighted squared error of the network against the conditional scores,
/// summed over active entries and averaged over usable examples.
pub fn loss(p: &ScoreNetParams, batch: &[TrainingExample], ctx: &LossContext) -> Result<f64> {
    let used: Vec<&TrainingExample> = batch.iter().filter(|e| usable(e)).collect();
    if used.is_empty() {
        return Err(Error::InvalidArgument("batch has no usable examples".into()));
    }
    let parts = par::map_slice(&used, |ex| example_loss(p, ex, ctx, false).map(|(v, _)| v));
    let mut total = 0.0;
    for v in parts {
        total += v?;
    }
    Ok(total / used.len() as f64)
}

/// [`loss`] and its exact gradient. Per-example work runs in parallel and is
/// reduced in batch order, so the result does not depend on thread count.
pub fn loss_grad(p: &ScoreNetParams, batch: &[TrainingExample], ctx: &LossContext) -> Result<(f64, Gradients)> {
    let used: Vec<&TrainingExample> = batch.iter().filter(|e| usable(e)).collect();
    if used.is_empty() {
        return Err(Error::InvalidArgument("batch has no usable examples".into()));
    }
    let parts = par::map_slice(&used, |ex| example_loss(p, ex, ctx, true));
    let mut total = 0.0;
    let mut grads = Gradients::zeros_like(p);
    for part in parts {
        let (v, g) = part?;
        total += v;
        grads.add_assign(&g.expect("gradient requested"));
    }
    let inv = 1.0 / used.len() as f64;
    grads.scale(inv);
    Ok((total * inv, grads))
}
