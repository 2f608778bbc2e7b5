use serde::{Deserialize, Serialize};

use crate::nn::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    AdaptiveMoment,
}

/// First-order optimizer over a flat parameter vector.
#[derive(Clone, Debug)]
pub struct Optimizer<R> {
    kind: OptimizerKind,
    lr: R,
    beta1: R,
    beta2: R,
    eps: R,
    m: Vec<R>,
    v: Vec<R>,
    t: i32,
}

impl<R: Real> Optimizer<R> {
    pub fn new(kind: OptimizerKind, learning_rate: f64, n_params: usize) -> Self {
        let moments = if kind == OptimizerKind::AdaptiveMoment { n_params } else { 0 };
        Self {
            kind,
            lr: R::of(learning_rate),
            beta1: R::of(0.9),
            beta2: R::of(0.999),
            eps: R::of(1e-8),
            m: vec![R::zero(); moments],
            v: vec![R::zero(); moments],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [R], grads: &[R]) {
        debug_assert_eq!(params.len(), grads.len());
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, &g) in params.iter_mut().zip(grads) {
                    *p -= self.lr * g;
                }
            }
            OptimizerKind::AdaptiveMoment => {
                self.t += 1;
                let one = R::one();
                let c1 = one - self.beta1.powi(self.t);
                let c2 = one - self.beta2.powi(self.t);
                let step = self.lr * c2.sqrt() / c1;
                for i in 0..params.len() {
                    let g = grads[i];
                    self.m[i] = self.beta1 * self.m[i] + (one - self.beta1) * g;
                    self.v[i] = self.beta2 * self.v[i] + (one - self.beta2) * g * g;
                    params[i] -= step * self.m[i] / (self.v[i].sqrt() + self.eps);
                }
            }
        }
    }
}
