use serde::{Deserialize, Serialize};

use super::params::ParamSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moment buffers are laid out block-for-block like
/// the parameter set they were created for.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl Adam {
    pub fn new<P: ParamSet>(params: &P, config: AdamConfig) -> Self {
        let shapes: Vec<usize> = params.blocks().iter().map(|(_, b)| b.len()).collect();
        Self {
            config,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn second_moments(&self) -> &[Vec<f64>] {
        &self.v
    }

    /// Applies one update. Gradients are left untouched.
    ///
    /// A block whose gradient is identically zero is skipped entirely (moments
    /// and parameters unchanged), the way optimizers treat parameters that
    /// received no gradient. Non-finite gradients abort before anything is
    /// modified.
    pub fn step<P: ParamSet>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let grad_blocks = grads.blocks();
        if grad_blocks.len() != self.m.len() {
            return Err(Error::shape("adam_step blocks", self.m.len(), grad_blocks.len()));
        }
        for ((name, g), m) in grad_blocks.iter().zip(&self.m) {
            if g.len() != m.len() {
                return Err(Error::shape("adam_step block length", m.len(), g.len()));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient { block: name.clone() });
            }
        }

        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);

        let param_blocks = params.blocks_mut();
        if param_blocks.len() != grad_blocks.len() {
            return Err(Error::shape(
                "adam_step parameter blocks",
                grad_blocks.len(),
                param_blocks.len(),
            ));
        }
        for (((_, p), (_, g)), (m, v)) in param_blocks
            .into_iter()
            .zip(&grad_blocks)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            if g.iter().all(|&x| x == 0.0) {
                continue;
            }
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
