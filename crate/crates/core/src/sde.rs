//! Bridge mathematics.
//!
//! States are flat vectors: node features and eigenvalues share one schedule
//! and draw independent noise per entry, so a stage state is simply their
//! concatenation. Entries outside the state mask are held at zero.

use ndarray::Array1;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Linear mean-reversion schedule `θ(t) = θ_min + (θ_max − θ_min) t / T` with
/// `g(t)² = 2σ²θ(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GouSchedule {
    pub theta_min: f64,
    pub theta_max: f64,
    pub sigma2: f64,
    pub horizon: f64,
}

impl Default for GouSchedule {
    fn default() -> Self {
        Self { theta_min: 0.1, theta_max: 4.0, sigma2: 1.0, horizon: 1.0 }
    }
}

impl GouSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = self.theta_min > 0.0 && self.theta_max > 0.0 && self.sigma2 > 0.0 && self.horizon > 0.0;
        if !ok || !(self.theta_min + self.theta_max + self.sigma2 + self.horizon).is_finite() {
            return Err(Error::Config("GOU schedule parameters must be positive and finite".into()));
        }
        Ok(())
    }

    pub fn theta(&self, t: f64) -> f64 {
        self.theta_min + (self.theta_max - self.theta_min) * t / self.horizon
    }

    pub fn g2(&self, t: f64) -> f64 {
        2.0 * self.sigma2 * self.theta(t)
    }

    pub fn g(&self, t: f64) -> f64 {
        self.g2(t).sqrt()
    }

    /// `∫ₛᵗ θ(z) dz`, exact for the linear schedule.
    pub fn theta_bar(&self, s: f64, t: f64) -> f64 {
        self.theta_min * (t - s) + (self.theta_max - self.theta_min) * (t * t - s * s) / (2.0 * self.horizon)
    }

    /// Transition variance `σ²(1 − e^{−2θ̄(a,b)})`.
    pub fn v2(&self, a: f64, b: f64) -> f64 {
        -self.sigma2 * (-2.0 * self.theta_bar(a, b)).exp_m1()
    }

    /// Scalar factor of the bridge drift, `θ(t)(1 + 2/(e^{2θ̄(t,end)} − 1))`.
    pub fn bridge_coefficient(&self, t: f64, end: f64) -> Result<f64> {
        if t >= end {
            return Err(Error::Singular(format!("bridge drift evaluated at t={t} >= end={end}")));
        }
        Ok(self.theta(t) * (1.0 + 2.0 / (2.0 * self.theta_bar(t, end)).exp_m1()))
    }
}

/// Variance-preserving schedule with `β(t)` linear on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VpSchedule {
    pub beta_min: f64,
    pub beta_max: f64,
    pub horizon: f64,
}

impl Default for VpSchedule {
    fn default() -> Self {
        Self { beta_min: 0.1, beta_max: 20.0, horizon: 1.0 }
    }
}

impl VpSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_min > 0.0 && self.beta_max > 0.0 && self.horizon > 0.0) {
            return Err(Error::Config("VP schedule parameters must be positive".into()));
        }
        Ok(())
    }

    pub fn beta(&self, t: f64) -> f64 {
        self.beta_min + (self.beta_max - self.beta_min) * t / self.horizon
    }

    /// `∫₀ᵗ β(z) dz`.
    pub fn beta_integral(&self, t: f64) -> f64 {
        self.beta_min * t + (self.beta_max - self.beta_min) * t * t / (2.0 * self.horizon)
    }

    pub fn mean_scale(&self, t: f64) -> f64 {
        (-0.5 * self.beta_integral(t)).exp()
    }

    pub fn variance(&self, t: f64) -> f64 {
        -(-self.beta_integral(t)).exp_m1()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseSchedule {
    Gou(GouSchedule),
    Vp(VpSchedule),
}

/// Isotropic Gaussian `N(mean, var·I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMoments {
    pub mean: Array1<f64>,
    pub var: f64,
}

/// One bridge window. The start endpoint is optional: reverse-time sampling
/// needs only the terminal state.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeSegment {
    pub start: f64,
    pub end: f64,
    pub x_start: Option<Array1<f64>>,
    pub x_end: Array1<f64>,
    pub schedule: GouSchedule,
}

impl BridgeSegment {
    pub fn new(start: f64, end: f64, x_start: Array1<f64>, x_end: Array1<f64>, schedule: GouSchedule) -> Result<Self> {
        if x_start.len() != x_end.len() {
            return Err(Error::InvalidArgument("endpoint shapes differ".into()));
        }
        let seg = Self { start, end, x_start: Some(x_start), x_end, schedule };
        seg.check_window()?;
        Ok(seg)
    }

    /// A window pinned only at its terminal state.
    pub fn pinned_end(start: f64, end: f64, x_end: Array1<f64>, schedule: GouSchedule) -> Result<Self> {
        let seg = Self { start, end, x_start: None, x_end, schedule };
        seg.check_window()?;
        Ok(seg)
    }

    fn check_window(&self) -> Result<()> {
        if !(self.start < self.end) {
            return Err(Error::InvalidArgument(format!("degenerate window [{}, {}]", self.start, self.end)));
        }
        Ok(())
    }

    /// Conditional variance `v̄²(t)`; depends only on times.
    pub fn conditional_variance(&self, t: f64) -> f64 {
        let s = &self.schedule;
        let total = s.v2(self.start, self.end);
        s.v2(self.start, t) * s.v2(t, self.end) / total
    }
}

/// Closed-form GOU transition from `x_s` at time `s` to time `t`.
pub fn gou_transition(x_s: &Array1<f64>, s: f64, t: f64, mu: &Array1<f64>, sched: &GouSchedule) -> Result<GaussianMoments> {
    if s > t {
        return Err(Error::InvalidArgument(format!("transition backwards in time: s={s} > t={t}")));
    }
    let decay = (-sched.theta_bar(s, t)).exp();
    let mean = mu + &((x_s - mu) * decay);
    Ok(GaussianMoments { mean, var: sched.v2(s, t) })
}

/// Doob h-function `∇ₓ log p(x_T | x_t) = (x_T − x_t) / (σ²(e^{2θ̄(t,T)} − 1))`.
pub fn h_function(x_t: &Array1<f64>, t: f64, x_end: &Array1<f64>, end: f64, sched: &GouSchedule) -> Result<Array1<f64>> {
    if t >= end {
        return Err(Error::Singular(format!("h-function at t={t} >= T={end}")));
    }
    let denom = sched.sigma2 * (2.0 * sched.theta_bar(t, end)).exp_m1();
    Ok((x_end - x_t) / denom)
}

/// GOU bridge drift towards the segment's terminal state.
pub fn bridge_drift(x_t: &Array1<f64>, t: f64, seg: &BridgeSegment) -> Result<Array1<f64>> {
    let c = seg.schedule.bridge_coefficient(t, seg.end)?;
    Ok((&seg.x_end - x_t) * c)
}

/// Two-endpoint conditional law `p(x_t | x_start, x_end)`.
pub fn bridge_conditional(seg: &BridgeSegment, t: f64) -> Result<GaussianMoments> {
    let x_start = seg
        .x_start
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("bridge_conditional needs the start endpoint".into()))?;
    if t < seg.start || t > seg.end {
        return Err(Error::InvalidArgument(format!("t={t} outside [{}, {}]", seg.start, seg.end)));
    }
    let s = &seg.schedule;
    let total = s.v2(seg.start, seg.end);
    let weight = (-s.theta_bar(seg.start, t)).exp() * s.v2(t, seg.end) / total;
    let mean = &seg.x_end + &((x_start - &seg.x_end) * weight);
    Ok(GaussianMoments { mean, var: seg.conditional_variance(t) })
}

fn standard_normal<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Array1<f64> {
    Array1::from_iter((0..len).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

fn apply_mask(x: &mut Array1<f64>, mask: Option<&[bool]>) {
    if let Some(m) = mask {
        for (v, &keep) in x.iter_mut().zip(m) {
            if !keep {
                *v = 0.0;
            }
        }
    }
}

/// Draw `mean + √var ξ`. Noise is drawn for every entry (keeping the stream
/// layout fixed) and masked entries are then zeroed.
pub fn sample_gaussian<R: Rng + ?Sized>(moments: &GaussianMoments, mask: Option<&[bool]>, rng: &mut R) -> Array1<f64> {
    let xi = standard_normal(moments.mean.len(), rng);
    let mut x = &moments.mean + &(xi * moments.var.sqrt());
    apply_mask(&mut x, mask);
    x
}

pub fn sample_bridge_state<R: Rng + ?Sized>(
    seg: &BridgeSegment,
    t: f64,
    mask: Option<&[bool]>,
    rng: &mut R,
) -> Result<Array1<f64>> {
    Ok(sample_gaussian(&bridge_conditional(seg, t)?, mask, rng))
}

/// `∇ₓ log N(x; mean, var·I) = −(x − mean)/var`.
pub fn conditional_score_target(x_t: &Array1<f64>, moments: &GaussianMoments) -> Result<Array1<f64>> {
    if !(moments.var > 0.0) {
        return Err(Error::Singular("score target with zero variance".into()));
    }
    Ok((x_t - &moments.mean) / (-moments.var))
}

/// Evaluation times of the reverse bridge integrator: `end − i·δt` for
/// `i = 1..=steps`. The terminal time itself is never evaluated.
pub fn reverse_grid(start: f64, end: f64, steps: usize) -> (Vec<f64>, f64) {
    let dt = (end - start) / steps as f64;
    ((1..=steps).map(|i| end - i as f64 * dt).collect(), dt)
}

fn check_finite(x: &Array1<f64>, step: usize) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence { step, what: "non-finite state".into() })
    }
}

/// One reverse Euler–Maruyama update of the bridge with a supplied noise draw.
pub fn bridge_reverse_update(
    x: &Array1<f64>,
    t: f64,
    dt: f64,
    seg: &BridgeSegment,
    score: &Array1<f64>,
    xi: &Array1<f64>,
) -> Result<Array1<f64>> {
    let drift = bridge_drift(x, t, seg)?;
    let g2 = seg.schedule.g2(t);
    Ok(x - &((drift - score * g2) * dt) + &(xi * (g2 * dt).sqrt()))
}

/// Integrate the reverse bridge SDE from the state at `seg.end` over the given
/// evaluation times. Each step evaluates drift and score at its grid time and
/// advances the state by `dt` towards `seg.start`.
pub fn euler_reverse_on<R, F>(
    seg: &BridgeSegment,
    x_init: &Array1<f64>,
    mut score_fn: F,
    times: &[f64],
    dt: f64,
    mask: Option<&[bool]>,
    rng: &mut R,
) -> Result<Array1<f64>>
where
    R: Rng + ?Sized,
    F: FnMut(&Array1<f64>, f64) -> Result<Array1<f64>>,
{
    let mut x = x_init.clone();
    apply_mask(&mut x, mask);
    for (step, &t) in times.iter().enumerate() {
        let score = score_fn(&x, t)?;
        let xi = standard_normal(x.len(), rng);
        x = bridge_reverse_update(&x, t, dt, seg, &score, &xi)?;
        apply_mask(&mut x, mask);
        check_finite(&x, step)?;
    }
    Ok(x)
}

/// Full reverse pass over `steps` uniform steps from `seg.end` to `seg.start`.
pub fn euler_reverse<R, F>(
    seg: &BridgeSegment,
    x_init: &Array1<f64>,
    score_fn: F,
    steps: usize,
    mask: Option<&[bool]>,
    rng: &mut R,
) -> Result<Array1<f64>>
where
    R: Rng + ?Sized,
    F: FnMut(&Array1<f64>, f64) -> Result<Array1<f64>>,
{
    if steps == 0 {
        return Err(Error::InvalidArgument("need at least one step".into()));
    }
    let (times, dt) = reverse_grid(seg.start, seg.end, steps);
    euler_reverse_on(seg, x_init, score_fn, &times, dt, mask, rng)
}

/// Forward Euler–Maruyama simulation of the bridge SDE: `n_steps` steps of
/// size `dt` from `x_start` at `seg.start`. Fails if a step would evaluate
/// the drift at or beyond the terminal time.
pub fn simulate_bridge_forward<R: Rng + ?Sized>(
    seg: &BridgeSegment,
    x_start: &Array1<f64>,
    dt: f64,
    n_steps: usize,
    rng: &mut R,
) -> Result<Array1<f64>> {
    let mut x = x_start.clone();
    for i in 0..n_steps {
        let t = seg.start + i as f64 * dt;
        let drift = bridge_drift(&x, t, seg)?;
        let xi = standard_normal(x.len(), rng);
        x = &x + &(drift * dt) + &(xi * (seg.schedule.g2(t) * dt).sqrt());
        check_finite(&x, i)?;
    }
    Ok(x)
}

/// VP marginal from a clean state: `N(x₀ e^{−½∫β}, 1 − e^{−∫β})`.
pub fn vp_transition(x0: &Array1<f64>, t: f64, sched: &VpSchedule) -> GaussianMoments {
    GaussianMoments { mean: x0 * sched.mean_scale(t), var: sched.variance(t) }
}

/// Reverse step of `dX = −½βX dt + √β dW` with a supplied noise draw.
pub fn vp_reverse_update(x: &Array1<f64>, t: f64, dt: f64, sched: &VpSchedule, score: &Array1<f64>, xi: &Array1<f64>) -> Array1<f64> {
    let beta = sched.beta(t);
    let drift = x * (-0.5 * beta) - &(score * beta);
    x - &(drift * dt) + &(xi * (beta * dt).sqrt())
}

pub fn vp_reverse_step<R: Rng + ?Sized>(
    x: &Array1<f64>,
    t: f64,
    score: &Array1<f64>,
    dt: f64,
    sched: &VpSchedule,
    mask: Option<&[bool]>,
    rng: &mut R,
) -> Result<Array1<f64>> {
    let xi = standard_normal(x.len(), rng);
    let mut out = vp_reverse_update(x, t, dt, sched, score, &xi);
    apply_mask(&mut out, mask);
    check_finite(&out, 0)?;
    Ok(out)
}

/// Evaluation times of the reverse VP integrator: `T − i·δt`, `i = 0..steps`.
pub fn vp_reverse_grid(sched: &VpSchedule, steps: usize) -> (Vec<f64>, f64) {
    let dt = sched.horizon / steps as f64;
    ((0..steps).map(|i| sched.horizon - i as f64 * dt).collect(), dt)
}

/// Integrate the reverse VP SDE from `x_init` at `T` down to 0.
pub fn vp_reverse<R, F>(
    x_init: &Array1<f64>,
    mut score_fn: F,
    steps: usize,
    sched: &VpSchedule,
    mask: Option<&[bool]>,
    rng: &mut R,
) -> Result<Array1<f64>>
where
    R: Rng + ?Sized,
    F: FnMut(&Array1<f64>, f64) -> Result<Array1<f64>>,
{
    if steps == 0 {
        return Err(Error::InvalidArgument("need at least one step".into()));
    }
    let (times, dt) = vp_reverse_grid(sched, steps);
    let mut x = x_init.clone();
    apply_mask(&mut x, mask);
    for (step, &t) in times.iter().enumerate() {
        let score = score_fn(&x, t)?;
        x = vp_reverse_step(&x, t, &score, dt, sched, mask, rng)
            .map_err(|_| Error::Divergence { step, what: "non-finite VP state".into() })?;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_theta() -> GouSchedule {
        GouSchedule { theta_min: 1.0, theta_max: 1.0, sigma2: 1.0, horizon: 1.0 }
    }

    #[test]
    fn schedule_identities() {
        let s = GouSchedule::default();
        for t in [0.0, 0.3, 0.9] {
            assert_eq!(s.g2(t), 2.0 * s.sigma2 * s.theta(t));
        }
        // trapezoid of a linear function
        let (a, b) = (0.2, 0.7);
        let trap = 0.5 * (s.theta(a) + s.theta(b)) * (b - a);
        assert!((s.theta_bar(a, b) - trap).abs() < 1e-14);
    }

    #[test]
    fn gou_transition_examples() {
        let s = unit_theta();
        let x = array![1.0, -2.0];
        let m = gou_transition(&x, 0.3, 0.3, &array![0.0, 0.0], &s).unwrap();
        assert_eq!(m.mean, x);
        assert_eq!(m.var, 0.0);
        let m = gou_transition(&array![1.0], 0.0, 2f64.ln(), &array![0.0], &s).unwrap();
        assert!((m.mean[0] - 0.5).abs() < 1e-15);
        assert!((m.var - 0.75).abs() < 1e-15);
        let long = GouSchedule { horizon: 100.0, ..s };
        let m = gou_transition(&array![5.0], 0.0, 40.0, &array![1.0], &long).unwrap();
        assert!((m.mean[0] - 1.0).abs() < 4.0 * (-40.0f64).exp() + 1e-15);
        assert!((m.var - 1.0).abs() < (-80.0f64).exp() + 1e-15);
        assert!(gou_transition(&x, 0.5, 0.4, &x, &s).is_err());
    }

    #[test]
    fn h_function_basics() {
        let s = GouSchedule::default();
        let x = array![0.3];
        assert_eq!(h_function(&x, 0.2, &x, 1.0, &s).unwrap()[0], 0.0);
        assert!(h_function(&x, 0.2, &array![1.0], 1.0, &s).unwrap()[0] > 0.0);
        assert!(h_function(&x, 1.0, &x, 1.0, &s).is_err());
    }

    #[test]
    fn drift_zero_at_target_and_singular_at_end() {
        let s = GouSchedule::default();
        let seg = BridgeSegment::new(0.0, 1.0, array![0.0], array![2.0], s).unwrap();
        assert_eq!(bridge_drift(&array![2.0], 0.4, &seg).unwrap()[0], 0.0);
        assert!(bridge_drift(&array![0.0], 1.0, &seg).is_err());
    }

    #[test]
    fn bridge_conditional_reference_values() {
        let seg = BridgeSegment::new(0.0, 1.0, array![0.0], array![2.0], unit_theta()).unwrap();
        let m = bridge_conditional(&seg, 0.5).unwrap();
        // plug-in of the closed form
        let e = std::f64::consts::E;
        let mean = 2.0 - 2.0 * e.powf(-0.5) * (1.0 - 1.0 / e) / (1.0 - e.powi(-2));
        let var = (1.0 - 1.0 / e).powi(2) / (1.0 - e.powi(-2));
        assert!((m.mean[0] - mean).abs() < 1e-14);
        assert!((m.var - var).abs() < 1e-14);
        assert!((m.mean[0] - 1.1132).abs() < 1e-4);
        assert!((m.var - 0.4621).abs() < 1e-4);
    }

    #[test]
    fn endpoint_pinning_and_variance_bounds() {
        let seg = BridgeSegment::new(0.2, 0.9, array![1.0, -1.0], array![3.0, 0.5], GouSchedule::default()).unwrap();
        let a = bridge_conditional(&seg, 0.2).unwrap();
        assert_eq!(a.var, 0.0);
        assert!((&a.mean - &array![1.0, -1.0]).iter().all(|d| d.abs() < 1e-15));
        let b = bridge_conditional(&seg, 0.9).unwrap();
        assert_eq!(b.var, 0.0);
        assert_eq!(b.mean, array![3.0, 0.5]);
        assert!(bridge_conditional(&seg, 1.0).is_err());
        assert!(BridgeSegment::new(0.5, 0.5, array![0.0], array![0.0], GouSchedule::default()).is_err());
    }

    #[test]
    fn sample_bridge_state_determinism_and_pinning() {
        let seg = BridgeSegment::new(0.0, 1.0, array![1.0, 2.0], array![0.0, 0.0], GouSchedule::default()).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(
            sample_bridge_state(&seg, 0.4, None, &mut r1).unwrap(),
            sample_bridge_state(&seg, 0.4, None, &mut r2).unwrap()
        );
        assert_eq!(sample_bridge_state(&seg, 1.0, None, &mut r1).unwrap(), array![0.0, 0.0]);
        let masked = sample_bridge_state(&seg, 0.4, Some(&[true, false]), &mut r1).unwrap();
        assert_eq!(masked[1], 0.0);
    }

    #[test]
    fn score_target_properties() {
        let m = GaussianMoments { mean: array![1.0, 2.0], var: 0.25 };
        assert_eq!(conditional_score_target(&array![1.0, 2.0], &m).unwrap(), array![0.0, 0.0]);
        let a = conditional_score_target(&array![0.0, 0.0], &m).unwrap();
        let b = conditional_score_target(&array![0.5, -1.0], &m).unwrap();
        assert_eq!(&b - &a, array![-2.0, 4.0]);
        assert!(conditional_score_target(&array![0.0], &GaussianMoments { mean: array![0.0], var: 0.0 }).is_err());
    }

    #[test]
    fn single_reverse_step_contract() {
        let s = GouSchedule::default();
        let seg = BridgeSegment::pinned_end(0.0, 1.0, array![1.5, -0.5], s).unwrap();
        let x0 = array![0.2, 0.1];
        let score = array![0.3, -0.7];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let out = euler_reverse(&seg, &x0, |_, _| Ok(score.clone()), 1, None, &mut rng).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let xi = standard_normal(2, &mut rng);
        let t = 0.0;
        let dt = 1.0;
        let drift = bridge_drift(&x0, t, &seg).unwrap();
        let expected = &x0 - &((drift - &score * s.g2(t)) * dt) + &(xi * s.g(t) * dt.sqrt());
        assert_eq!(out, expected);
    }

    #[test]
    fn reverse_is_reproducible_and_respects_mask() {
        let seg = BridgeSegment::pinned_end(0.0, 0.5, array![1.0, 1.0, 0.0], GouSchedule::default()).unwrap();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            euler_reverse(&seg, &seg.x_end, |x, _| Ok(-x), 50, Some(&[true, true, false]), &mut rng).unwrap()
        };
        let a = run(3);
        assert_eq!(a, run(3));
        assert_eq!(a[2], 0.0);
        assert_ne!(a, run(4));
    }

    #[test]
    fn reverse_reports_divergence_step() {
        let seg = BridgeSegment::pinned_end(0.0, 1.0, array![0.0], GouSchedule::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = euler_reverse(&seg, &array![0.0], |_, t| Ok(array![if t < 0.5 { f64::NAN } else { 0.0 }]), 10, None, &mut rng)
            .unwrap_err();
        match err {
            Error::Divergence { step, .. } => assert_eq!(step, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn vp_examples() {
        let s = VpSchedule::default();
        let x = array![1.0, -3.0];
        let m = vp_transition(&x, 0.0, &s);
        assert_eq!(m.mean, x);
        assert_eq!(m.var, 0.0);
        let m = vp_transition(&x, 1.0, &s);
        assert!(m.mean.iter().all(|v| v.abs() < 0.03));
        assert!((m.var - 1.0).abs() < 1e-4);
    }

    #[test]
    fn vp_pure_drift_step() {
        let s = VpSchedule::default();
        let x = array![2.0];
        let out = vp_reverse_update(&x, 0.5, 0.01, &s, &array![0.0], &array![0.0]);
        let beta = s.beta(0.5);
        assert!((out[0] - (2.0 + 0.5 * beta * 2.0 * 0.01)).abs() < 1e-15);
    }

    #[test]
    fn vp_reverse_determinism() {
        let s = VpSchedule::default();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            vp_reverse(&array![0.3, 0.1], |x, _| Ok(-x), 20, &s, None, &mut rng).unwrap()
        };
        assert_eq!(run(), run());
    }
}
