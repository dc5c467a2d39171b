use ndarray::Array2;

use super::{Gradients, ScoreNetParams};

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(params: &ScoreNetParams, lr: f64) -> Self {
        let zeros: Vec<Array2<f64>> = params.tensors().iter().map(|t| Array2::zeros(t.dim())).collect();
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: zeros.clone(), v: zeros }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn update(&mut self, params: &mut ScoreNetParams, grads: &Gradients) {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        for (k, p) in params.tensors_mut().iter_mut().enumerate() {
            let g = &grads.tensors[k];
            let m = &mut self.m[k];
            let v = &mut self.v[k];
            ndarray::Zip::from(p).and(m).and(v).and(g).for_each(|p, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
            });
        }
    }
}

/// Rescale `grads` so its global norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_grad_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads.norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ScoreNetConfig;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = ScoreNetConfig::with_node_dim(1);
        let mut p = ScoreNetParams::zeros(&cfg).unwrap();
        let mut g = Gradients::zeros_like(&p);
        g.tensors[0].fill(3.0);
        g.tensors[1].fill(-0.01);
        let mut opt = Adam::new(&p, 0.1);
        opt.update(&mut p, &g);
        assert!(p.tensors()[0].iter().all(|&x| (x + 0.1).abs() < 1e-6));
        assert!(p.tensors()[1].iter().all(|&x| (x - 0.1).abs() < 1e-5));
        assert!(p.tensors()[2].iter().all(|&x| x == 0.0));
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn clipping_caps_the_norm() {
        let cfg = ScoreNetConfig::with_node_dim(1);
        let p = ScoreNetParams::zeros(&cfg).unwrap();
        let mut g = Gradients::zeros_like(&p);
        g.tensors[0].fill(1.0);
        let before = clip_grad_norm(&mut g, 1.0);
        assert!(before > 1.0);
        assert!((g.norm() - 1.0).abs() < 1e-12);
    }
}
