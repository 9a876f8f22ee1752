use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, Mlp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adaptive-moment (or plain SGD) state for one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptState {
    pub config: OptimizerConfig,
    pub step: u64,
    pub first_moment: Gradients,
    pub second_moment: Gradients,
}

impl OptState {
    pub fn new(model: &Mlp, config: OptimizerConfig) -> Self {
        Self {
            config,
            step: 0,
            first_moment: Gradients::zeros_like(model),
            second_moment: Gradients::zeros_like(model),
        }
    }

    /// Descends along `grads`.
    pub fn step(&mut self, model: &mut Mlp, grads: &Gradients) -> Result<()> {
        if !grads.same_shape(model) || !self.first_moment.same_shape(model) {
            return Err(Error::InvalidConfig("gradient shape does not match model".into()));
        }
        self.step += 1;
        let c = self.config;
        match c.kind {
            OptimizerKind::Sgd => {
                for (p, g) in model.params_mut().zip(grads.values()) {
                    *p -= c.learning_rate * g;
                }
            }
            OptimizerKind::Adam => {
                let t = self.step as i32;
                let correct1 = 1.0 - c.beta1.powi(t);
                let correct2 = 1.0 - c.beta2.powi(t);
                let moments = self.first_moment.values_mut().zip(self.second_moment.values_mut());
                for ((p, g), (m, v)) in model.params_mut().zip(grads.values()).zip(moments) {
                    *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                    *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                    let m_hat = *m / correct1;
                    let v_hat = *v / correct2;
                    *p -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
                }
            }
        }
        Ok(())
    }
}
