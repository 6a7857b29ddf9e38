use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AmsgradConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AmsgradConfig {
    fn default() -> Self {
        AmsgradConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// AMSGRAD without bias correction, weight decay applied outside the adaptive step:
/// `θ ← θ(1 − lr·λ) − lr·m/(√v̂ + ε)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Amsgrad {
    pub config: AmsgradConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    v_hat: Vec<f64>,
    t: u64,
}

impl Amsgrad {
    pub fn new(config: AmsgradConfig, n: usize) -> Self {
        Amsgrad {
            config,
            m: vec![0.0; n],
            v: vec![0.0; n],
            v_hat: vec![0.0; n],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn v_hat(&self) -> &[f64] {
        &self.v_hat
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        let n = self.m.len();
        if params.len() != n || grads.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: if params.len() != n { params.len() } else { grads.len() },
            });
        }
        let AmsgradConfig {
            learning_rate: lr,
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        let shrink = 1.0 - lr * weight_decay;
        self.t += 1;
        for i in 0..n {
            let g = grads[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            self.v_hat[i] = self.v_hat[i].max(self.v[i]);
            params[i] = params[i] * shrink - lr * self.m[i] / (self.v_hat[i].sqrt() + eps);
        }
        Ok(())
    }
}
