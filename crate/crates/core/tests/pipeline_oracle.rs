use skelbridge::graph::QuantizationRule;
use skelbridge::pipeline::*;
use skelbridge::rng;
use skelbridge::sde::{GouSchedule, VpSchedule};
use skelbridge::Result;
use ndarray::{Array1, Array2};

const M: f64 = 0.6;
const S: f64 = 0.25;
const C: f64 = -0.4;

/// Exact scores for a two-window toy: boundary 0 is `N(M, S²)` per entry,
/// boundary 1 is the constant `C`.
struct ToyOracle {
    gou: GouSchedule,
    vp: VpSchedule,
    windows: TimeWindows,
}

impl ToyOracle {
    /// Trapezoid rule, exact for a linear θ.
    fn theta_integral(&self, s: f64, t: f64) -> f64 {
        0.5 * (t - s) * (self.gou.theta(s) + self.gou.theta(t))
    }

    fn v2(&self, s: f64, t: f64) -> f64 {
        self.gou.sigma2 * (1.0 - (-2.0 * self.theta_integral(s, t)).exp())
    }
}

impl StageScorer for ToyOracle {
    fn score(&self, k: usize, t: f64, x: &Array1<f64>, endpoint: Option<&Array1<f64>>, _ctx: &StageContext) -> Result<Array1<f64>> {
        if k == 2 {
            let (a, b) = self.windows.segment(2);
            let s = (t - a) / (b - a);
            let int = self.vp.beta_min * s + 0.5 * (self.vp.beta_max - self.vp.beta_min) * s * s;
            let alpha = (-0.5 * int).exp();
            let var = 1.0 - alpha * alpha;
            return Ok(x.mapv(|v| -(v - alpha * C) / var));
        }
        let (a, b) = self.windows.segment(1);
        let e = endpoint.expect("bridge segments carry an endpoint");
        let w = (-self.theta_integral(a, t)).exp() * self.v2(t, b) / self.v2(a, b);
        let bv = self.v2(a, t) * self.v2(t, b) / self.v2(a, b);
        let var = w * w * S * S + bv;
        Ok(Array1::from_iter(x.iter().zip(e).map(|(&v, &ev)| -(v - (ev + w * (M - ev))) / var)))
    }
}

#[test]
fn two_stage_sampler_with_exact_scores_recovers_data_law() {
    let windows = build_windows(2, 1.0, &[0.5]).unwrap();
    let settings = StageSettings {
        windows: windows.clone(),
        gou: GouSchedule::default(),
        vp: VpSchedule::default(),
        scale_floor: 1e-3,
        quantize_endpoints: false,
        rule: QuantizationRule::binary(),
    };
    let oracle = ToyOracle { gou: settings.gou, vp: settings.vp, windows };
    let plan = SamplerPlan { settings, steps: 1000, top_segment: 2, top_is_vp: true };
    let layout = StageLayout { n: 1, d: 1 };
    let ctx = StageContext { layout, basis: Array2::eye(1), node_mask: vec![true], eig_mask: vec![true] };
    let n = 10_000;
    let mut xs = Vec::with_capacity(n);
    let mut ls = Vec::with_capacity(n);
    for i in 0..n {
        let mut r = rng::stream(21, &[i as u64]);
        let x = sample_state(&oracle, &plan, &ctx, &mut r).unwrap();
        xs.push(x[0]);
        ls.push(x[1]);
    }
    let se_mean = S / (n as f64).sqrt();
    let se_var = S * S * (2.0 / n as f64).sqrt();
    for v in [xs, ls] {
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert!((mean - M).abs() < 3.0 * se_mean, "mean {mean} vs {M}");
        assert!((var - S * S).abs() < 3.0 * se_var, "var {var} vs {}", S * S);
    }
}
