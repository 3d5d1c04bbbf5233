//! AdamW with linear warmup and global gradient-norm clipping.

use serde::{Deserialize, Serialize};

use super::params::{Grads, ParamStore};
use super::tensor::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub warmup_steps: usize,
    /// Global norm clip; non-positive disables clipping.
    pub clip_norm: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-3,
            weight_decay: 5e-5,
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-9,
            warmup_steps: 50,
            clip_norm: 1.0,
        }
    }
}

pub struct AdamW {
    config: OptimConfig,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    step: usize,
}

impl AdamW {
    pub fn new(store: &ParamStore, config: OptimConfig) -> Self {
        let zeros = || store.tensors().iter().map(|t| Matrix::zeros(t.rows, t.cols)).collect();
        Self { config, m: zeros(), v: zeros(), step: 0 }
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    fn current_lr(&self) -> f64 {
        let w = self.config.warmup_steps;
        if w > 0 && self.step <= w {
            self.config.learning_rate * self.step as f64 / w as f64
        } else {
            self.config.learning_rate
        }
    }

    /// Applies one update. Returns the gradient norm before clipping.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Grads) -> f64 {
        self.step += 1;
        let norm = grads.norm();
        let clip = if self.config.clip_norm > 0.0 && norm > self.config.clip_norm {
            self.config.clip_norm / norm
        } else {
            1.0
        };
        let lr = self.current_lr();
        let c = &self.config;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        for i in 0..store.len() {
            let Some(g) = grads.get(i) else { continue };
            let decay = if store.get(i).rows > 1 && store.get(i).cols > 1 { c.weight_decay } else { 0.0 };
            let p = store.get_mut(i);
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for k in 0..p.data.len() {
                let gk = g.data[k] * clip;
                m.data[k] = c.beta1 * m.data[k] + (1.0 - c.beta1) * gk;
                v.data[k] = c.beta2 * v.data[k] + (1.0 - c.beta2) * gk * gk;
                let mh = m.data[k] / bc1;
                let vh = v.data[k] / bc2;
                p.data[k] -= lr * (mh / (vh.sqrt() + c.eps) + decay * p.data[k]);
            }
        }
        norm
    }
}
