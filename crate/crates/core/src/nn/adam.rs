//! Bias-corrected adaptive-moment optimizer.

use crate::error::{Error, Result};

use super::ParamVector;

/// Adam state for one network: exponential moving averages of the gradient
/// and its elementwise square, plus the step counter driving bias
/// correction.
///
/// Each network in an agent owns an independent `Adam` instance; moments are
/// never shared, so critics stay as decorrelated as their shared data
/// allows.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub step_count: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    /// Conventional defaults: β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    pub fn new(param_len: usize, learning_rate: f64) -> Result<Self> {
        Adam::with_betas(param_len, learning_rate, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(
        param_len: usize,
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    ) -> Result<Self> {
        if !(learning_rate > 0.0) || !learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning rate must be positive and finite, got {learning_rate}"
            )));
        }
        for (name, beta) in [("beta1", beta1), ("beta2", beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::Config(format!(
                    "{name} must lie in [0, 1), got {beta}"
                )));
            }
        }
        if !(eps > 0.0) {
            return Err(Error::Config(format!("eps must be positive, got {eps}")));
        }
        Ok(Adam {
            step_count: 0,
            first_moment: vec![0.0; param_len],
            second_moment: vec![0.0; param_len],
            learning_rate,
            beta1,
            beta2,
            eps,
        })
    }

    /// Rebuild from checkpointed state.
    pub fn from_parts(
        step_count: u64,
        first_moment: Vec<f64>,
        second_moment: Vec<f64>,
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    ) -> Result<Self> {
        if first_moment.len() != second_moment.len() {
            return Err(Error::Shape(format!(
                "moment buffers disagree in length: {} vs {}",
                first_moment.len(),
                second_moment.len()
            )));
        }
        let mut adam = Adam::with_betas(first_moment.len(), learning_rate, beta1, beta2, eps)?;
        adam.step_count = step_count;
        adam.first_moment = first_moment;
        adam.second_moment = second_moment;
        Ok(adam)
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }

    /// Apply one descent step along `grads`.
    ///
    /// Rejects non-finite gradients *before* touching any state, so a failed
    /// step leaves parameters, moments, and the step counter untouched. With
    /// all-zero gradients the moments decay but the parameter delta is
    /// exactly zero.
    pub fn step(&mut self, params: &mut ParamVector, grads: &ParamVector) -> Result<()> {
        if grads.len() != params.len() || grads.len() != self.first_moment.len() {
            return Err(Error::Shape(format!(
                "optimizer/parameter/gradient length mismatch: {} moments, {} params, {} grads",
                self.first_moment.len(),
                params.len(),
                grads.len()
            )));
        }
        grads.check_finite("gradient")?;

        self.step_count += 1;
        let t = self.step_count.min(i32::MAX as u64) as i32;
        let correction1 = 1.0 - self.beta1.powi(t);
        let correction2 = 1.0 - self.beta2.powi(t);

        let p = params.as_mut_slice();
        let g = grads.as_slice();
        for i in 0..p.len() {
            let m = self.beta1 * self.first_moment[i] + (1.0 - self.beta1) * g[i];
            let v = self.beta2 * self.second_moment[i] + (1.0 - self.beta2) * g[i] * g[i];
            self.first_moment[i] = m;
            self.second_moment[i] = v;
            let m_hat = m / correction1;
            let v_hat = v / correction2;
            p[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}
