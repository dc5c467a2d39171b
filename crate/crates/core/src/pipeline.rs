//! Coarse-to-fine curriculum.
//!
//! Boundary `τ_0` holds the data graph, interior boundaries hold filtered
//! skeletons and `τ_K` is Gaussian noise. Segments `1..K−1` are GOU bridges
//! between consecutive boundary states; segment `K` is a VP diffusion from
//! the last skeleton into the prior, run on local time `s ∈ [0, 1]`.
//!
//! A stage state is the flat vector `[X (row-major n×d), Λ (n)]`; its mask
//! covers active node rows and the first `n_active` eigenvalue slots.
//! Adjacencies are always reconstructed with the data graph's own
//! eigenvectors `U_0`.

use ndarray::{s, Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::datasets::{default_features, gen_community_small, gen_sbm, GraphRecord};
use crate::eval::{eval_report, MmdReport};
use crate::graph::{adjacency_from_spectrum, masked_spectrum, quantize, reconstruct_laplacian, Graph, SpectralState};
use crate::model::{clip_grad_norm, forward, init_params, loss_grad, Adam, LossContext, ScoreInput, ScoreNetParams, TrainingExample};
use crate::sde::{bridge_conditional, conditional_score_target, euler_reverse, sample_gaussian, vp_reverse, vp_transition, BridgeSegment, GaussianMoments, GouSchedule, VpSchedule};
use crate::topology::{apply_filter, BaseFilter, FilterKind, FilterSpec};
use crate::{par, rng, Error, QuantizationRule, Result};

const TAG_DATA: u64 = 1;
const TAG_HOLDOUT: u64 = 2;
const TAG_INIT: u64 = 3;
const TAG_TRAIN: u64 = 4;
const TAG_SAMPLE: u64 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeWindows {
    boundaries: Vec<f64>,
}

impl TimeWindows {
    pub fn from_splits(horizon: f64, splits: &[f64]) -> Result<Self> {
        build_windows(splits.len() + 1, horizon, splits)
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn segments(&self) -> usize {
        self.boundaries.len() - 1
    }

    /// `[τ_{k−1}, τ_k]` for the 1-based segment `k`.
    pub fn segment(&self, k: usize) -> (f64, f64) {
        (self.boundaries[k - 1], self.boundaries[k])
    }
}

/// `{0} ∪ {T·split} ∪ {T}`.
pub fn build_windows(k: usize, horizon: f64, splits: &[f64]) -> Result<TimeWindows> {
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one window".into()));
    }
    if splits.len() != k - 1 {
        return Err(Error::InvalidArgument(format!("{k} windows need {} splits, got {}", k - 1, splits.len())));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    let mut prev = 0.0;
    for &s in splits {
        if !(s > prev && s < 1.0) {
            return Err(Error::InvalidArgument(format!("splits must be strictly ascending in (0, 1): {splits:?}")));
        }
        prev = s;
    }
    let mut boundaries = vec![0.0];
    boundaries.extend(splits.iter().map(|s| s * horizon));
    boundaries.push(horizon);
    Ok(TimeWindows { boundaries })
}

/// Shape of a flat stage state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageLayout {
    pub n: usize,
    pub d: usize,
}

impl StageLayout {
    pub fn len(&self) -> usize {
        self.n * self.d + self.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flatten(&self, x: &Array2<f64>, lambda: &Array1<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(self.len());
        out.slice_mut(s![..self.n * self.d]).assign(&Array1::from_iter(x.iter().copied()));
        out.slice_mut(s![self.n * self.d..]).assign(lambda);
        out
    }

    pub fn split(&self, flat: &Array1<f64>) -> (Array2<f64>, Array1<f64>) {
        let x = Array2::from_shape_vec((self.n, self.d), flat.slice(s![..self.n * self.d]).to_vec()).expect("sized");
        (x, flat.slice(s![self.n * self.d..]).to_owned())
    }

    pub fn mask(&self, node_mask: &[bool], eig_mask: &[bool]) -> Vec<bool> {
        let mut m = Vec::with_capacity(self.len());
        for &a in node_mask {
            m.extend(std::iter::repeat_n(a, self.d));
        }
        m.extend_from_slice(eig_mask);
        m
    }
}

/// Per-graph data the sampler needs besides the state itself.
#[derive(Debug, Clone, PartialEq)]
pub struct StageContext {
    pub layout: StageLayout,
    /// `U_0`, columns are eigenvectors.
    pub basis: Array2<f64>,
    pub node_mask: Vec<bool>,
    pub eig_mask: Vec<bool>,
}

impl StageContext {
    pub fn state_mask(&self) -> Vec<bool> {
        self.layout.mask(&self.node_mask, &self.eig_mask)
    }

    /// `−offdiag(U diag(Λ) Uᵀ)` for the eigenvalue part of `flat`.
    pub fn adjacency(&self, flat: &Array1<f64>) -> Array2<f64> {
        let lambda = flat.slice(s![self.layout.n * self.layout.d..]).to_owned();
        adjacency_from_spectrum(&self.basis, &lambda)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedGraph {
    pub graph: Graph,
    pub context: StageContext,
    /// Flat state at each boundary `0..=K`; `None` where the state is noise.
    pub states: Vec<Option<Array1<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub windows: TimeWindows,
    pub layout: StageLayout,
    pub graphs: Vec<PreparedGraph>,
    /// Interior boundary whose state is noise, if a noise guide is used.
    pub noise_boundary: Option<usize>,
}

impl Prepared {
    /// Segments that are trained and sampled: all of them, or those before a
    /// noise boundary.
    pub fn active_segments(&self) -> usize {
        self.noise_boundary.unwrap_or(self.windows.segments())
    }

    /// Whether the outermost active segment is the VP diffusion.
    pub fn final_is_vp(&self) -> bool {
        self.noise_boundary.is_none()
    }
}

fn padded_basis(stored: &SpectralState, g: &Graph) -> Option<SpectralState> {
    let n = g.n_max();
    let k = stored.values.len();
    if stored.vectors.dim() != (k, k) || k != g.n_active() || g.mask()[..k].iter().any(|&m| !m) {
        return None;
    }
    let mut vectors = Array2::zeros((n, n));
    vectors.slice_mut(s![..k, ..k]).assign(&stored.vectors);
    for i in k..n {
        vectors[[i, i]] = 1.0;
    }
    let mut values = Array1::zeros(n);
    values.slice_mut(s![..k]).assign(&stored.values);
    let lap = crate::graph::laplacian(g);
    let resid = crate::graph::frobenius(&(reconstruct_laplacian(&vectors, &values) - &lap));
    (resid <= 1e-8 * crate::graph::frobenius(&lap).max(1.0)).then_some(SpectralState { vectors, values })
}

/// Pad every graph to a common size, eigendecompose it and compute the
/// filtered boundary states.
pub fn prepare_intermediates(records: &[GraphRecord], windows: &TimeWindows, filters: &[FilterSpec]) -> Result<Prepared> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let k_total = windows.segments();
    if filters.len() != k_total - 1 {
        return Err(Error::InvalidArgument(format!("{} filters for {} interior boundaries", filters.len(), k_total - 1)));
    }
    for f in filters {
        f.validate()?;
    }
    let noise: Vec<usize> = (0..filters.len()).filter(|&i| filters[i].kind == FilterKind::Noise).map(|i| i + 1).collect();
    if noise.len() > 1 {
        return Err(Error::InvalidArgument("at most one noise boundary".into()));
    }
    let n = records.iter().map(|r| r.graph.n_max()).max().expect("non-empty");
    let d = records[0].graph.feature_dim();
    if records.iter().any(|r| r.graph.feature_dim() != d) {
        return Err(Error::InvalidArgument("records disagree on feature width".into()));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("records have no node features".into()));
    }
    let layout = StageLayout { n, d };
    let graphs = par::map_slice(records, |rec| -> Result<PreparedGraph> {
        let g = rec.graph.padded(n)?;
        let spec = match rec.eigenbasis.as_ref().and_then(|e| padded_basis(e, &g)) {
            Some(s) => s,
            None => masked_spectrum(&g)?,
        };
        let n_active = g.n_active();
        let eig_mask: Vec<bool> = (0..n).map(|i| i < n_active).collect();
        let mut states = vec![Some(layout.flatten(g.features(), &spec.values))];
        for f in filters {
            if f.kind == FilterKind::Noise {
                states.push(None);
                continue;
            }
            let view = apply_filter(&g, f)?.view();
            let lam = masked_spectrum(&view)?.values;
            states.push(Some(layout.flatten(view.features(), &lam)));
        }
        states.push(None);
        let context = StageContext { layout, basis: spec.vectors, node_mask: g.mask().to_vec(), eig_mask };
        Ok(PreparedGraph { graph: g, context, states })
    });
    let graphs = graphs.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(Prepared { windows: windows.clone(), layout, graphs, noise_boundary: noise.first().copied() })
}

/// Settings shared by training-input construction and sampling, so both see
/// identical network inputs.
#[derive(Debug, Clone)]
pub struct StageSettings {
    pub windows: TimeWindows,
    pub gou: GouSchedule,
    pub vp: VpSchedule,
    pub scale_floor: f64,
    pub quantize_endpoints: bool,
    pub rule: QuantizationRule,
}

impl StageSettings {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        Ok(Self {
            windows: TimeWindows::from_splits(cfg.windows.horizon, &cfg.windows.splits)?,
            gou: cfg.schedule.gou,
            vp: cfg.schedule.vp,
            scale_floor: cfg.train.scale_floor,
            quantize_endpoints: cfg.sample.quantize_between_stages,
            rule: cfg.sample.quantization.rule(),
        })
    }

    /// Global time of local VP time `s` in the final segment.
    pub fn vp_global_time(&self, s: f64) -> f64 {
        let (a, b) = self.windows.segment(self.windows.segments());
        a + s / self.vp.horizon * (b - a)
    }

    fn vp_local_time(&self, t: f64) -> f64 {
        let (a, b) = self.windows.segment(self.windows.segments());
        (t - a) / (b - a) * self.vp.horizon
    }

    /// Conditional variance of segment `k` at global time `t`.
    pub fn stage_variance(&self, k: usize, t: f64) -> f64 {
        if k == self.windows.segments() {
            self.vp.variance(self.vp_local_time(t))
        } else {
            let (a, b) = self.windows.segment(k);
            let sch = &self.gou;
            sch.v2(a, t) * sch.v2(t, b) / sch.v2(a, b)
        }
    }

    /// Network input for segment `k` at global time `t`. The final segment
    /// has no endpoint; its endpoint inputs are zero.
    pub fn score_input(&self, k: usize, t: f64, x: &Array1<f64>, endpoint: Option<&Array1<f64>>, ctx: &StageContext) -> ScoreInput {
        let lay = ctx.layout;
        let (xt, lt) = lay.split(x);
        let (xb, lb, ab) = match endpoint {
            Some(e) => {
                let (xb, lb) = lay.split(e);
                let mut ab = ctx.adjacency(e);
                if self.quantize_endpoints {
                    ab = quantize(&ab, &self.rule).mapv(|v| v as f64);
                }
                (xb, lb, ab)
            }
            None => (Array2::zeros((lay.n, lay.d)), Array1::zeros(lay.n), Array2::zeros((lay.n, lay.n))),
        };
        let var = self.stage_variance(k, t);
        ScoreInput {
            x: xt,
            adjacency: ctx.adjacency(x),
            endpoint_x: xb,
            endpoint_adjacency: ab,
            lambda: lt,
            endpoint_lambda: lb,
            t,
            mask: ctx.node_mask.clone(),
            eig_mask: ctx.eig_mask.clone(),
            score_scale: 1.0 / var.max(self.scale_floor).sqrt(),
        }
    }
}

fn standard_state<R: Rng + ?Sized>(len: usize, mask: &[bool], rng: &mut R) -> Array1<f64> {
    sample_gaussian(&GaussianMoments { mean: Array1::zeros(len), var: 1.0 }, Some(mask), rng)
}

/// One denoising example for segment `k`: a graph, a time, a perturbed state
/// and its conditional score.
pub fn make_example<R: Rng + ?Sized>(
    prep: &Prepared,
    k: usize,
    settings: &StageSettings,
    t_eps: f64,
    rng: &mut R,
) -> Result<TrainingExample> {
    let pg = &prep.graphs[rng.random_range(0..prep.graphs.len())];
    let ctx = &pg.context;
    let mask = ctx.state_mask();
    let x_start = pg.states[k - 1]
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument(format!("segment {k} starts from noise")))?;
    let u: f64 = rng.random();
    let (t, endpoint, moments) = if k == prep.windows.segments() {
        let s = settings.vp.horizon * (t_eps + (1.0 - t_eps) * u);
        (settings.vp_global_time(s), None, vp_transition(x_start, s, &settings.vp))
    } else {
        let (a, b) = prep.windows.segment(k);
        let t = a + (b - a) * (t_eps + (1.0 - 2.0 * t_eps) * u);
        let x_end = match &pg.states[k] {
            Some(e) => e.clone(),
            None => standard_state(mask.len(), &mask, rng),
        };
        let seg = BridgeSegment::new(a, b, x_start.clone(), x_end.clone(), settings.gou)?;
        (t, Some(x_end), bridge_conditional(&seg, t)?)
    };
    let x_t = sample_gaussian(&moments, Some(&mask), rng);
    let mut target = if moments.var > 0.0 { conditional_score_target(&x_t, &moments)? } else { Array1::zeros(x_t.len()) };
    target.iter_mut().zip(&mask).for_each(|(v, &m)| {
        if !m {
            *v = 0.0
        }
    });
    let input = settings.score_input(k, t, &x_t, endpoint.as_ref(), ctx);
    let (target_x, target_lambda) = ctx.layout.split(&target);
    Ok(TrainingExample { input, target_x, target_lambda, variance: moments.var, weight: moments.var })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentResult {
    pub params: ScoreNetParams,
    /// Batch loss before each optimiser step.
    pub losses: Vec<f64>,
}

/// Train the score network of segment `k` (1-based).
pub fn train_segment(k: usize, prep: &Prepared, cfg: &RunConfig) -> Result<SegmentResult> {
    if k == 0 || k > prep.active_segments() {
        return Err(Error::InvalidArgument(format!("segment {k} is not trainable here")));
    }
    let settings = StageSettings::from_config(cfg)?;
    let net_cfg = cfg.model.net_config(prep.layout.d);
    let mut params = init_params(&net_cfg, &mut rng::stream(cfg.seed, &[TAG_INIT, k as u64]))?;
    let mut opt = Adam::new(&params, cfg.train.lr);
    let ctx = LossContext { c_x: cfg.train.c_x, c_lambda: cfg.train.c_lambda };
    let mut losses = Vec::with_capacity(cfg.train.steps);
    for step in 0..cfg.train.steps {
        let batch = par::map_range(cfg.train.batch_size, |b| {
            let mut r = rng::stream(cfg.seed, &[TAG_TRAIN, k as u64, step as u64, b as u64]);
            make_example(prep, k, &settings, cfg.train.t_eps, &mut r)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let (loss, mut grads) = loss_grad(&params, &batch, &ctx).map_err(|e| match e {
            Error::Divergence { what, .. } => Error::Divergence { step, what },
            other => other,
        })?;
        if !loss.is_finite() || grads.tensors.iter().any(|t| t.iter().any(|v| !v.is_finite())) {
            return Err(Error::Divergence { step, what: format!("segment {k} loss is {loss}") });
        }
        clip_grad_norm(&mut grads, cfg.train.grad_clip);
        opt.update(&mut params, &grads);
        losses.push(loss);
        if step % 100 == 0 {
            log::debug!("segment {k} step {step} loss {loss:.4}");
        }
    }
    Ok(SegmentResult { params, losses })
}

/// Parameters per segment; `None` for segments skipped by a noise guide.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub segments: Vec<Option<ScoreNetParams>>,
}

pub fn train_all(prep: &Prepared, cfg: &RunConfig) -> Result<(TrainedModel, Vec<Vec<f64>>)> {
    let mut segments = Vec::new();
    let mut curves = Vec::new();
    for k in 1..=prep.windows.segments() {
        if k > prep.active_segments() {
            segments.push(None);
            curves.push(Vec::new());
            continue;
        }
        let r = train_segment(k, prep, cfg)?;
        log::info!("segment {k}: loss {:.4} -> {:.4}", r.losses.first().unwrap_or(&f64::NAN), r.losses.last().unwrap_or(&f64::NAN));
        segments.push(Some(r.params));
        curves.push(r.losses);
    }
    Ok((TrainedModel { segments }, curves))
}

/// Score of a stage state. `k` is the 1-based segment, `t` global time and
/// `endpoint` the segment's terminal state (absent for the VP segment).
pub trait StageScorer: Sync {
    fn score(&self, k: usize, t: f64, x: &Array1<f64>, endpoint: Option<&Array1<f64>>, ctx: &StageContext) -> Result<Array1<f64>>;
}

pub struct NetworkScorer<'a> {
    pub model: &'a TrainedModel,
    pub settings: &'a StageSettings,
}

impl StageScorer for NetworkScorer<'_> {
    fn score(&self, k: usize, t: f64, x: &Array1<f64>, endpoint: Option<&Array1<f64>>, ctx: &StageContext) -> Result<Array1<f64>> {
        let params = self
            .model
            .segments
            .get(k - 1)
            .and_then(|p| p.as_ref())
            .ok_or_else(|| Error::InvalidArgument(format!("no parameters for segment {k}")))?;
        let out = forward(params, &self.settings.score_input(k, t, x, endpoint, ctx))?;
        Ok(ctx.layout.flatten(&out.x, &out.lambda))
    }
}

/// Reverse integration plan.
#[derive(Debug, Clone)]
pub struct SamplerPlan {
    pub settings: StageSettings,
    pub steps: usize,
    /// Outermost segment to integrate; sampling starts from noise at its end.
    pub top_segment: usize,
    pub top_is_vp: bool,
}

impl SamplerPlan {
    pub fn for_prepared(prep: &Prepared, settings: StageSettings, steps: usize) -> Self {
        Self { settings, steps, top_segment: prep.active_segments(), top_is_vp: prep.final_is_vp() }
    }
}

/// Draw one boundary-0 state: noise, the reverse VP segment, then reverse
/// bridges each conditioned on the previous stage's output.
pub fn sample_state<S: StageScorer + ?Sized, R: Rng + ?Sized>(
    scorer: &S,
    plan: &SamplerPlan,
    ctx: &StageContext,
    rng: &mut R,
) -> Result<Array1<f64>> {
    let mask = ctx.state_mask();
    let st = &plan.settings;
    let mut x = standard_state(mask.len(), &mask, rng);
    let mut k = plan.top_segment;
    if plan.top_is_vp {
        x = vp_reverse(&x, |x, s| scorer.score(k, st.vp_global_time(s), x, None, ctx), plan.steps, &st.vp, Some(&mask), rng)?;
        k -= 1;
    }
    while k >= 1 {
        let (a, b) = st.windows.segment(k);
        let endpoint = x.clone();
        let seg = BridgeSegment::pinned_end(a, b, endpoint.clone(), st.gou)?;
        x = euler_reverse(&seg, &endpoint, |x, t| scorer.score(k, t, x, Some(&endpoint), ctx), plan.steps, Some(&mask), rng)?;
        k -= 1;
    }
    Ok(x)
}

/// Quantized graph from a boundary-0 state.
pub fn finalize_graph(x: &Array1<f64>, ctx: &StageContext, rule: &QuantizationRule) -> Result<Graph> {
    let levels = quantize(&ctx.adjacency(x), rule);
    let n = ctx.layout.n;
    let mut adj = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if i != j && ctx.node_mask[i] && ctx.node_mask[j] {
                adj[[i, j]] = levels[[i.min(j), i.max(j)]] as f64;
            }
        }
    }
    let (mut feats, _) = ctx.layout.split(x);
    for i in 0..n {
        if !ctx.node_mask[i] {
            feats.row_mut(i).fill(0.0);
        }
    }
    Graph::new(feats, adj, ctx.node_mask.clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    pub graphs: Vec<Graph>,
    pub failed: usize,
}

/// Generate `n` graphs. Sample `i` uses its own stream, so the output does not
/// depend on thread count; failed trajectories are dropped and counted.
pub fn sample<S: StageScorer + ?Sized>(scorer: &S, prep: &Prepared, plan: &SamplerPlan, n: usize, seed: u64) -> SampleOutcome {
    let results = par::map_range(n, |i| -> Result<Graph> {
        let mut r = rng::stream(seed, &[TAG_SAMPLE, i as u64]);
        let pg = &prep.graphs[r.random_range(0..prep.graphs.len())];
        let x = sample_state(scorer, plan, &pg.context, &mut r)?;
        finalize_graph(&x, &pg.context, &plan.settings.rule)
    });
    let mut graphs = Vec::with_capacity(n);
    let mut failed = 0;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(g) => graphs.push(g),
            Err(e) => {
                log::warn!("sample {i} failed: {e}");
                failed += 1;
            }
        }
    }
    SampleOutcome { graphs, failed }
}

/// Training and held-out reference records with node features attached.
pub fn build_dataset(cfg: &RunConfig) -> Result<(Vec<GraphRecord>, Vec<GraphRecord>)> {
    use crate::config::DatasetKind;
    let d = &cfg.dataset;
    let (train, reference) = match d.kind {
        DatasetKind::CommunitySmall => (
            gen_community_small(d.count, rng::derive_seed(cfg.seed, &[TAG_DATA])),
            gen_community_small(d.holdout, rng::derive_seed(cfg.seed, &[TAG_HOLDOUT])),
        ),
        DatasetKind::Sbm => (
            gen_sbm(d.count, rng::derive_seed(cfg.seed, &[TAG_DATA])),
            gen_sbm(d.holdout, rng::derive_seed(cfg.seed, &[TAG_HOLDOUT])),
        ),
        DatasetKind::File => {
            let path = d.path.as_ref().ok_or_else(|| Error::Config("dataset.path missing".into()))?;
            let mut all = crate::datasets::load(path)?;
            if d.holdout >= all.len() {
                return Err(Error::Config(format!("holdout {} leaves no training graphs out of {}", d.holdout, all.len())));
            }
            let reference = all.split_off(all.len() - d.holdout);
            (all, reference)
        }
    };
    let attach = |recs: Vec<GraphRecord>| -> Result<Vec<GraphRecord>> {
        recs.into_iter()
            .map(|mut r| {
                if r.graph.feature_dim() == 0 {
                    let f = default_features(&r.graph, d.features, d.degree_cap, d.spectral_k)?;
                    r.graph = r.graph.with_features(f)?;
                }
                Ok(r)
            })
            .collect()
    };
    Ok((attach(train)?, attach(reference)?))
}

/// Prepare, train and sample per config.
pub struct RunOutput {
    pub prepared: Prepared,
    pub model: TrainedModel,
    pub curves: Vec<Vec<f64>>,
}

pub fn train_run(records: &[GraphRecord], cfg: &RunConfig) -> Result<RunOutput> {
    let windows = TimeWindows::from_splits(cfg.windows.horizon, &cfg.windows.splits)?;
    let prepared = prepare_intermediates(records, &windows, &cfg.filters)?;
    let (model, curves) = train_all(&prepared, cfg)?;
    Ok(RunOutput { prepared, model, curves })
}

pub fn sample_run(run: &RunOutput, cfg: &RunConfig, n: usize, seed: u64) -> Result<SampleOutcome> {
    let settings = StageSettings::from_config(cfg)?;
    let plan = SamplerPlan::for_prepared(&run.prepared, settings.clone(), cfg.sample.steps);
    let scorer = NetworkScorer { model: &run.model, settings: &settings };
    Ok(sample(&scorer, &run.prepared, &plan, n, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Guide {
    Cell,
    Periphery,
    Noise,
}

impl Guide {
    pub fn filter(self, base: &FilterSpec) -> FilterSpec {
        let l_max = base.l_max;
        match self {
            Guide::Cell => FilterSpec::cell(l_max),
            Guide::Periphery => FilterSpec { periphery_of: BaseFilter::Cell, l_max, ..FilterSpec::new(FilterKind::Periphery) },
            Guide::Noise => FilterSpec::new(FilterKind::Noise),
        }
    }
}

impl std::str::FromStr for Guide {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cell" => Ok(Guide::Cell),
            "periphery" => Ok(Guide::Periphery),
            "noise" => Ok(Guide::Noise),
            other => Err(Error::InvalidArgument(format!("unknown guide '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuideResult {
    pub guide: Guide,
    pub seed: u64,
    /// Loss curve per segment; empty for segments the guide skips.
    pub losses: Vec<Vec<f64>>,
    pub report: MmdReport,
    pub failed: usize,
}

/// Train and sample once per guide on a two-stage configuration.
pub fn run_ablation(guides: &[Guide], train: &[GraphRecord], reference: &[Graph], cfg: &RunConfig) -> Result<Vec<GuideResult>> {
    if cfg.segments() != 2 {
        return Err(Error::Config("the guide ablation needs a two-stage configuration".into()));
    }
    let mut out = Vec::new();
    for &guide in guides {
        let mut c = cfg.clone();
        c.filters = vec![guide.filter(&cfg.filters[0])];
        let run = train_run(train, &c)?;
        let samples = sample_run(&run, &c, c.sample.num, c.seed)?;
        if samples.graphs.is_empty() {
            return Err(Error::Divergence { step: 0, what: format!("every sample failed for guide {guide:?}") });
        }
        let report = eval_report(&samples.graphs, reference, &c.eval)?;
        out.push(GuideResult { guide, seed: c.seed, losses: run.curves, report, failed: samples.failed });
    }
    Ok(out)
}

/// Mean of the last `fraction` of a curve.
pub fn tail_mean(curve: &[f64], fraction: f64) -> f64 {
    let k = ((curve.len() as f64 * fraction).ceil() as usize).clamp(1, curve.len().max(1));
    let tail = &curve[curve.len().saturating_sub(k)..];
    tail.iter().sum::<f64>() / tail.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_examples() {
        assert_eq!(build_windows(2, 1.0, &[0.5]).unwrap().boundaries(), &[0.0, 0.5, 1.0]);
        assert_eq!(build_windows(1, 1.0, &[]).unwrap().boundaries(), &[0.0, 1.0]);
        assert_eq!(build_windows(3, 1.0, &[0.3, 0.7]).unwrap().boundaries(), &[0.0, 0.3, 0.7, 1.0]);
        assert!(build_windows(3, 1.0, &[0.7, 0.3]).is_err());
        assert!(build_windows(2, 1.0, &[1.0]).is_err());
        assert!(build_windows(0, 1.0, &[]).is_err());
    }

    #[test]
    fn layout_round_trip() {
        let lay = StageLayout { n: 3, d: 2 };
        let x = Array2::from_shape_fn((3, 2), |(i, j)| (i * 2 + j) as f64);
        let l = Array1::from(vec![7.0, 8.0, 9.0]);
        let flat = lay.flatten(&x, &l);
        assert_eq!(flat.to_vec(), vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 7.0, 8.0, 9.0]);
        assert_eq!(lay.split(&flat), (x, l));
        assert_eq!(lay.mask(&[true, true, false], &[true, true, false]), vec![true, true, true, true, false, false, true, true, false]);
    }

    #[test]
    fn tail_mean_basics() {
        assert_eq!(tail_mean(&[1.0, 2.0, 3.0, 4.0], 0.5), 3.5);
        assert_eq!(tail_mean(&[5.0], 0.1), 5.0);
    }
}
