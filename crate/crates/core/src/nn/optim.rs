//! First-order optimizers acting on flat parameter vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Network;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

/// Optimizer with its accumulated state. Adam keeps first/second moment
/// vectors sized to the parameter vector; SGD keeps none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub step_count: u64,
    #[serde(default)]
    pub first_moment: Vec<f64>,
    #[serde(default)]
    pub second_moment: Vec<f64>,
}

impl OptimizerState {
    pub fn sgd(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            learning_rate,
            step_count: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    /// Adam with the standard defaults (beta1 = 0.9, beta2 = 0.999, eps = 1e-8).
    pub fn adam(learning_rate: f64) -> Self {
        Self::adam_with(learning_rate, 0.9, 0.999, 1e-8)
    }

    pub fn adam_with(learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            kind: OptimizerKind::Adam {
                beta1,
                beta2,
                epsilon,
            },
            learning_rate,
            step_count: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    /// Applies one descent step to `net` in place.
    ///
    /// SGD: `w <- w - lr * g`. Adam: bias-corrected moment update. Non-finite
    /// gradient entries reject the step without mutating anything.
    pub fn step(&mut self, net: &mut Network, grad: &[f64]) -> Result<()> {
        self.step_flat(net.weights_mut(), grad)
    }

    /// Same as [`step`](Self::step) but on a raw parameter slice.
    pub fn step_flat(&mut self, weights: &mut [f64], grad: &[f64]) -> Result<()> {
        if grad.len() != weights.len() {
            return Err(Error::Dimension {
                context: "optimizer gradient",
                expected: weights.len(),
                actual: grad.len(),
            });
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be nonnegative and finite, got {}",
                self.learning_rate
            )));
        }

        self.step_count += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (w, g) in weights.iter_mut().zip(grad) {
                    *w -= self.learning_rate * g;
                }
            }
            OptimizerKind::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                if self.first_moment.is_empty() {
                    self.first_moment = vec![0.0; weights.len()];
                    self.second_moment = vec![0.0; weights.len()];
                }
                if self.first_moment.len() != weights.len() {
                    return Err(Error::Dimension {
                        context: "adam moment vectors",
                        expected: weights.len(),
                        actual: self.first_moment.len(),
                    });
                }
                let t = self.step_count as i32;
                let bc1 = 1.0 - beta1.powi(t);
                let bc2 = 1.0 - beta2.powi(t);
                for i in 0..weights.len() {
                    let g = grad[i];
                    let m = &mut self.first_moment[i];
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    let v = &mut self.second_moment[i];
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    weights[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + epsilon);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, LayerSpec};
    use approx::assert_relative_eq;

    fn one_param_net(w: f64) -> Network {
        let mut net = Network::zeros(vec![LayerSpec::new(1, 1, Activation::Linear)]).unwrap();
        net.set_weights(&[w, 0.0]).unwrap();
        net
    }

    #[test]
    fn sgd_step_moves_against_gradient() {
        let mut net = one_param_net(1.0);
        let mut opt = OptimizerState::sgd(0.1);
        opt.step(&mut net, &[1.0, 0.0]).unwrap();
        assert_relative_eq!(net.weights()[0], 0.9, max_relative = 1e-15);
        assert_eq!(opt.step_count, 1);
    }

    #[test]
    fn zero_gradient_leaves_weights_unchanged_but_counts() {
        let mut net = one_param_net(1.0);
        let mut opt = OptimizerState::adam(1e-3);
        opt.step(&mut net, &[0.0, 0.0]).unwrap();
        assert_eq!(net.weights(), &[1.0, 0.0]);
        assert_eq!(opt.step_count, 1);
    }

    #[test]
    fn adam_first_step_is_bias_corrected() {
        // One step from zero moments with g = 1:
        //   m = 0.1, v = 0.001, m_hat = 1, v_hat = 1,
        //   delta = lr / (1 + eps) ~= lr.
        let mut net = one_param_net(1.0);
        let mut opt = OptimizerState::adam(1e-3);
        opt.step(&mut net, &[1.0, 0.0]).unwrap();
        let expected = 1.0 - 1e-3 / (1.0 + 1e-8);
        assert_relative_eq!(net.weights()[0], expected, epsilon = 1e-15);
    }

    #[test]
    fn non_finite_gradient_is_rejected_without_mutation() {
        let mut net = one_param_net(1.0);
        let mut opt = OptimizerState::sgd(0.1);
        let err = opt.step(&mut net, &[f64::NAN, 0.0]);
        assert!(err.is_err());
        assert_eq!(net.weights(), &[1.0, 0.0]);
        assert_eq!(opt.step_count, 0);
    }

    #[test]
    fn gradient_length_mismatch_is_rejected() {
        let mut net = one_param_net(1.0);
        let mut opt = OptimizerState::sgd(0.1);
        assert!(opt.step(&mut net, &[1.0]).is_err());
    }
}
