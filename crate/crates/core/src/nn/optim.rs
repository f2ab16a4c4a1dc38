use super::network::{Gradients, NetworkParameters};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerMode {
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerMode::Sgd),
            "adam" => Ok(OptimizerMode::Adam),
            other => Err(Error::Config(format!("unknown optimizer {other:?}"))),
        }
    }
}

impl std::fmt::Display for OptimizerMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OptimizerMode::Sgd => "sgd",
            OptimizerMode::Adam => "adam",
        })
    }
}

/// Learning rate plus, for Adam, bias-corrected moment estimates laid out
/// like the parameters (weights then bias, per layer).
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub mode: OptimizerMode,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(mode: OptimizerMode, learning_rate: f64, params: &NetworkParameters) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {learning_rate}")));
        }
        let shapes: Vec<usize> = params
            .layers
            .iter()
            .flat_map(|l| [l.weights.as_slice().len(), l.bias.len()])
            .collect();
        let zeros = |on: bool| -> Vec<Vec<f64>> {
            if on {
                shapes.iter().map(|&n| vec![0.0; n]).collect()
            } else {
                Vec::new()
            }
        };
        let adam = mode == OptimizerMode::Adam;
        Ok(OptimizerState {
            mode,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            step: 0,
            first_moment: zeros(adam),
            second_moment: zeros(adam),
        })
    }

    pub fn sgd(learning_rate: f64, params: &NetworkParameters) -> Result<Self> {
        Self::new(OptimizerMode::Sgd, learning_rate, params)
    }

    pub fn adam(learning_rate: f64, params: &NetworkParameters) -> Result<Self> {
        Self::new(OptimizerMode::Adam, learning_rate, params)
    }

    /// Applies one update with the configured rule.
    pub fn step(&mut self, params: &mut NetworkParameters, grads: &Gradients) {
        match self.mode {
            OptimizerMode::Sgd => self.sgd_step(params, grads),
            OptimizerMode::Adam => self.adam_step(params, grads),
        }
    }

    /// `w ← w − η ∂C/∂w`, `b ← b − η ∂C/∂b`
    pub fn sgd_step(&mut self, params: &mut NetworkParameters, grads: &Gradients) {
        let eta = self.learning_rate;
        for (layer, (gw, gb)) in params.layers.iter_mut().zip(grads.weights.iter().zip(&grads.biases)) {
            for (w, g) in layer.weights.as_mut_slice().iter_mut().zip(gw.as_slice()) {
                *w -= eta * g;
            }
            for (b, g) in layer.bias.iter_mut().zip(gb) {
                *b -= eta * g;
            }
        }
        self.step += 1;
    }

    /// Adam with bias-corrected moments:
    /// `θ ← θ − η · m̂ / (√v̂ + ε)`.
    pub fn adam_step(&mut self, params: &mut NetworkParameters, grads: &Gradients) {
        assert_eq!(self.mode, OptimizerMode::Adam, "adam_step on a non-Adam state");
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2, eps, eta) = (self.beta1, self.beta2, self.epsilon, self.learning_rate);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        let blocks = params
            .layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()]);
        for (((theta, g), m), v) in blocks
            .zip(grads.blocks())
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            for i in 0..theta.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                theta[i] -= eta * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}
