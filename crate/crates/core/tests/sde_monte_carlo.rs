use skelbridge::rng;
use skelbridge::sde::*;
use ndarray::Array1;
use rand_distr::{Distribution, StandardNormal};

fn moments(x: &Array1<f64>) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.sum() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Composite Simpson quadrature of the schedule's θ; independent of the
/// library's closed-form integral.
fn theta_integral(sch: &GouSchedule, s: f64, t: f64) -> f64 {
    let n = 2000;
    let h = (t - s) / n as f64;
    let mut acc = sch.theta(s) + sch.theta(t);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * sch.theta(s + i as f64 * h);
    }
    acc * h / 3.0
}

fn v2(sch: &GouSchedule, s: f64, t: f64) -> f64 {
    sch.sigma2 * (1.0 - (-2.0 * theta_integral(sch, s, t)).exp())
}

#[test]
fn constant_theta_bridge_matches_hyperbolic_form() {
    let sch = GouSchedule { theta_min: 1.0, theta_max: 1.0, sigma2: 1.0, horizon: 1.0 };
    let seg = BridgeSegment::new(0.0, 1.0, Array1::from_elem(1, 0.0), Array1::from_elem(1, 2.0), sch).unwrap();
    for &t in &[0.1, 0.25, 0.5, 0.8] {
        let m = bridge_conditional(&seg, t).unwrap();
        let mean = 2.0 - 2.0 * (1.0 - t).sinh() / 1f64.sinh();
        let var = 2.0 * t.sinh() * (1.0 - t).sinh() / 1f64.sinh();
        assert!((m.mean[0] - mean).abs() < 1e-12, "t={t}");
        assert!((m.var - var).abs() < 1e-12, "t={t}");
    }
}

#[test]
fn forward_simulation_matches_conditional_law() {
    let sch = GouSchedule { theta_min: 1.0, theta_max: 1.0, sigma2: 1.0, horizon: 1.0 };
    let paths = 100_000;
    let seg = BridgeSegment::new(0.0, 1.0, Array1::zeros(paths), Array1::from_elem(paths, 2.0), sch).unwrap();
    let mut r = rng::stream(11, &[]);
    let x = simulate_bridge_forward(&seg, &Array1::zeros(paths), 1e-3, 500, &mut r).unwrap();
    let (mean, var) = moments(&x);
    let exact = bridge_conditional(&seg, 0.5).unwrap();
    assert!((mean - exact.mean[0]).abs() <= 0.02 * exact.mean[0].abs(), "mean {mean} vs {}", exact.mean[0]);
    assert!((var - exact.var).abs() <= 0.02 * exact.var, "var {var} vs {}", exact.var);
}

#[test]
fn reverse_bridge_with_exact_score_recovers_start_law() {
    let sch = GouSchedule::default();
    let (a, b) = (0.0, 0.5);
    let (m, s, c) = (1.5, 0.4, -0.7);
    let n = 10_000;
    let weight = |t: f64| (-theta_integral(&sch, a, t)).exp() * v2(&sch, t, b) / v2(&sch, a, b);
    let bridge_var = |t: f64| v2(&sch, a, t) * v2(&sch, t, b) / v2(&sch, a, b);
    let end = Array1::from_elem(n, c);
    let seg = BridgeSegment::pinned_end(a, b, end.clone(), sch).unwrap();
    let mut r = rng::stream(12, &[]);
    let x = euler_reverse(
        &seg,
        &end,
        |x, t| {
            let w = weight(t);
            let mean = c + w * (m - c);
            let var = w * w * s * s + bridge_var(t);
            Ok(x.mapv(|v| -(v - mean) / var))
        },
        1000,
        None,
        &mut r,
    )
    .unwrap();
    let (mean, var) = moments(&x);
    let se_mean = s / (n as f64).sqrt();
    let se_var = s * s * (2.0 / n as f64).sqrt();
    assert!((mean - m).abs() < 3.0 * se_mean, "mean {mean} vs {m}");
    assert!((var - s * s).abs() < 3.0 * se_var, "var {var} vs {}", s * s);
}

#[test]
fn reverse_vp_with_exact_score_recovers_data_law() {
    let sch = VpSchedule::default();
    let (m, s) = (0.8, 0.3);
    let n = 10_000;
    let alpha = |t: f64| (-0.5 * (sch.beta_min * t + 0.5 * (sch.beta_max - sch.beta_min) * t * t)).exp();
    let mut r = rng::stream(13, &[]);
    let a1 = alpha(1.0);
    let sd = (a1 * a1 * s * s + 1.0 - a1 * a1).sqrt();
    let init = Array1::from_iter((0..n).map(|_| a1 * m + sd * Distribution::<f64>::sample(&StandardNormal, &mut r)));
    let x = vp_reverse(
        &init,
        |x, t| {
            let a = alpha(t);
            let var = a * a * s * s + 1.0 - a * a;
            Ok(x.mapv(|v| -(v - a * m) / var))
        },
        1000,
        &sch,
        None,
        &mut r,
    )
    .unwrap();
    let (mean, var) = moments(&x);
    let se_mean = s / (n as f64).sqrt();
    let se_var = s * s * (2.0 / n as f64).sqrt();
    assert!((mean - m).abs() < 3.0 * se_mean, "mean {mean} vs {m}");
    assert!((var - s * s).abs() < 3.0 * se_var, "var {var} vs {}", s * s);
}

#[test]
fn masked_entries_stay_zero_in_reverse_passes() {
    let sch = GouSchedule::default();
    let end = Array1::from_vec(vec![1.0, 0.0, -1.0]);
    let mask = [true, false, true];
    let seg = BridgeSegment::pinned_end(0.0, 0.5, end.clone(), sch).unwrap();
    let mut r = rng::stream(14, &[]);
    let x = euler_reverse(&seg, &end, |x, _| Ok(x.mapv(|v| -v)), 50, Some(&mask), &mut r).unwrap();
    assert_eq!(x[1], 0.0);
    let y = vp_reverse(&end, |x, _| Ok(x.mapv(|v| -v)), 50, &VpSchedule::default(), Some(&mask), &mut r).unwrap();
    assert_eq!(y[1], 0.0);
}
