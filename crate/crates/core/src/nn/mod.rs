//! Minimal reverse-mode differentiation over fixed multilayer perceptrons.
//!
//! This is not a tensor library: the only supported topology is a dense MLP
//! described by [`MlpSpec`], parameters live in one flat [`ParamVector`]
//! with a fixed documented layout, and all arithmetic is `f64`. That is
//! exactly enough to express the actors and critics used elsewhere in the
//! crate, to backpropagate the TD critic loss, and to obtain the
//! action-input gradient `∇ₐQ(s,a)` required by the deterministic policy
//! gradient.
//!
//! Submodules:
//! * [`mlp`] — init / forward / backward plus a scratch-buffer engine for
//!   allocation-free batched use,
//! * [`adam`] — bias-corrected adaptive-moment optimizer,
//! * [`checkpoint`] — binary parameter serialization.

mod adam;
mod checkpoint;
mod mlp;

pub use adam::Adam;
pub use checkpoint::{read_params, write_params};
pub use mlp::{backward_into, forward_into, mlp_backward, mlp_forward, mlp_init, Scratch};

use crate::error::{Error, Result};

/// Activation applied to every hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    ReLU,
    Tanh,
}

/// Activation applied to the final layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutputActivation {
    /// Raw affine output; used by critics (Q-values are unbounded).
    Identity,
    /// `bound · tanh(z)`; used by actors so outputs live in
    /// `[-bound, bound]` componentwise.
    TanhScaled(f64),
}

/// Architecture of one dense network.
///
/// `layer_widths` runs input-first: `[in, h₁, …, out]`. Hidden layers share
/// one activation; the final layer uses `output_activation`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpSpec {
    pub layer_widths: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: OutputActivation,
}

impl MlpSpec {
    /// Build a validated spec.
    pub fn new(
        layer_widths: Vec<usize>,
        hidden_activation: Activation,
        output_activation: OutputActivation,
    ) -> Result<Self> {
        let spec = MlpSpec {
            layer_widths,
            hidden_activation,
            output_activation,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Check the structural invariants: at least two widths, all widths
    /// positive, tanh scaling bound positive.
    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 {
            return Err(Error::Config(format!(
                "network needs at least input and output widths, got {:?}",
                self.layer_widths
            )));
        }
        if self.layer_widths.iter().any(|&w| w == 0) {
            return Err(Error::Config(format!(
                "network widths must all be >= 1, got {:?}",
                self.layer_widths
            )));
        }
        if let OutputActivation::TanhScaled(bound) = self.output_activation {
            if !(bound > 0.0) || !bound.is_finite() {
                return Err(Error::Config(format!(
                    "tanh output bound must be a positive finite real, got {bound}"
                )));
            }
        }
        Ok(())
    }

    /// Number of affine layers (one fewer than the width list).
    pub fn layer_count(&self) -> usize {
        self.layer_widths.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    /// Total parameter count: Σ per layer of `in·out + out`.
    pub fn param_count(&self) -> usize {
        self.layer_widths
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }
}

/// Flat parameter (or gradient) store for one network.
///
/// Layout, fixed for the lifetime of the crate and mirrored by the
/// checkpoint format: for each affine layer in order, the weight matrix in
/// row-major order (`out × in`, so row `o` holds the fan-in of output unit
/// `o`), followed by that layer's `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
}

impl ParamVector {
    /// An all-zero vector sized for `spec` — the natural gradient buffer.
    pub fn zeros(spec: &MlpSpec) -> Self {
        ParamVector {
            values: vec![0.0; spec.param_count()],
        }
    }

    /// Wrap an existing flat value buffer. Length must match some spec's
    /// `param_count`; callers pair vectors with specs explicitly.
    pub fn from_values(values: Vec<f64>) -> Self {
        ParamVector { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Reset every entry to zero (gradient buffers between batches).
    pub fn fill_zero(&mut self) {
        self.values.fill(0.0);
    }

    /// Error with context if any entry is non-finite.
    pub fn check_finite(&self, what: &str) -> Result<()> {
        if let Some(idx) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "{what} contains non-finite value {} at index {idx}",
                self.values[idx]
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_count_matches_layout_arithmetic() {
        let spec = MlpSpec::new(
            vec![3, 256, 256, 1],
            Activation::ReLU,
            OutputActivation::Identity,
        )
        .unwrap();
        // 3·256+256 + 256·256+256 + 256·1+1 = 1024 + 65792 + 257
        assert_eq!(spec.param_count(), 67073);
    }

    #[test]
    fn rejects_degenerate_specs() {
        assert!(MlpSpec::new(vec![3], Activation::ReLU, OutputActivation::Identity).is_err());
        assert!(MlpSpec::new(vec![3, 0, 1], Activation::ReLU, OutputActivation::Identity).is_err());
        assert!(
            MlpSpec::new(vec![3, 1], Activation::ReLU, OutputActivation::TanhScaled(0.0)).is_err()
        );
        assert!(MlpSpec::new(
            vec![3, 1],
            Activation::ReLU,
            OutputActivation::TanhScaled(f64::NAN)
        )
        .is_err());
    }

    #[test]
    fn zeros_has_matching_length() {
        let spec = MlpSpec::new(
            vec![4, 8, 2],
            Activation::Tanh,
            OutputActivation::TanhScaled(1.0),
        )
        .unwrap();
        assert_eq!(ParamVector::zeros(&spec).len(), spec.param_count());
    }
}
