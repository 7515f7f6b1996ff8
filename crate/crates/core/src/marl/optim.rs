//! First-order optimizers over [`Mlp`] parameters.

use serde::{Deserialize, Serialize};

use super::nn::Mlp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Mlp,
    v: Mlp,
    t: i32,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, like: &Mlp) -> Self {
        Self {
            kind,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: like.zeros_like(),
            v: like.zeros_like(),
            t: 0,
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    /// Apply one descent step along `grads`.
    pub fn step(&mut self, params: &mut Mlp, grads: &Mlp) {
        self.t += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.params_mut().zip(grads.params()) {
                    *p -= self.lr * g;
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2) = (self.beta1, self.beta2);
                let c1 = 1.0 - b1.powi(self.t);
                let c2 = 1.0 - b2.powi(self.t);
                for (((p, g), m), v) in params
                    .params_mut()
                    .zip(grads.params())
                    .zip(self.m.params_mut())
                    .zip(self.v.params_mut())
                {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
                }
            }
        }
    }
}

/// Rescale `grads` so its global L2 norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_grad_norm(grads: &mut Mlp, max_norm: f64) -> f64 {
    let norm = grads.norm();
    if norm > max_norm {
        let s = max_norm / (norm + 1e-12);
        grads.params_mut().for_each(|g| *g *= s);
    }
    norm
}
