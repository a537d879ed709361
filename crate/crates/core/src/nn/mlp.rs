//! Forward evaluation and reverse-mode gradients for dense MLPs.
//!
//! Two API levels:
//!
//! * [`mlp_init`] / [`mlp_forward`] / [`mlp_backward`] — validated,
//!   allocating entry points matching the crate's public contract;
//! * [`Scratch`] plus [`forward_into`] / [`backward_into`] — the
//!   allocation-free engine the training loop drives thousands of times per
//!   second. A `Scratch` holds per-layer activation and delta buffers sized
//!   for one spec and is reused across calls.
//!
//! Backward uses the derivative-from-output trick: every supported
//! activation's derivative is reconstructible from its *output* (ReLU:
//! `y > 0`; tanh: `1 − y²`; scaled tanh: `B(1 − (y/B)²)`), so the forward
//! pass only stores post-activation values.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

use super::{Activation, MlpSpec, OutputActivation, ParamVector};

/// Initialize parameters for `spec`: weights uniform on
/// `[-1/√fan_in, 1/√fan_in)` drawn layer by layer in row-major order,
/// biases zero. Deterministic in `(spec, seed)`.
pub fn mlp_init(spec: &MlpSpec, seed: u64) -> Result<ParamVector> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(spec.param_count());
    for w in spec.layer_widths.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let bound = 1.0 / (fan_in as f64).sqrt();
        for _ in 0..fan_in * fan_out {
            values.push(rng.random_range(-bound..bound));
        }
        values.extend(std::iter::repeat(0.0).take(fan_out));
    }
    Ok(ParamVector::from_values(values))
}

/// Reusable per-layer buffers for one spec.
///
/// `acts[0]` holds the input; `acts[l+1]` the post-activation output of
/// layer `l`. `deltas[l]` holds pre-activation gradients during backward.
pub struct Scratch {
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Scratch {
    pub fn new(spec: &MlpSpec) -> Self {
        let acts = spec.layer_widths.iter().map(|&w| vec![0.0; w]).collect();
        let deltas = spec.layer_widths[1..]
            .iter()
            .map(|&w| vec![0.0; w])
            .collect();
        Scratch { acts, deltas }
    }

    /// Network output from the most recent [`forward_into`] call.
    pub fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four independent accumulators so the FP adds pipeline; order is fixed,
    // keeping results bit-reproducible.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn hidden_act(kind: Activation, z: f64) -> f64 {
    match kind {
        Activation::ReLU => {
            if z > 0.0 {
                z
            } else {
                0.0
            }
        }
        Activation::Tanh => z.tanh(),
    }
}

/// Derivative of the hidden activation expressed through its output `y`.
#[inline]
fn hidden_act_deriv(kind: Activation, y: f64) -> f64 {
    match kind {
        Activation::ReLU => {
            if y > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Activation::Tanh => 1.0 - y * y,
    }
}

#[inline]
fn output_act(kind: OutputActivation, z: f64) -> f64 {
    match kind {
        OutputActivation::Identity => z,
        OutputActivation::TanhScaled(b) => b * z.tanh(),
    }
}

/// Derivative of the output activation expressed through its output `y`.
#[inline]
fn output_act_deriv(kind: OutputActivation, y: f64) -> f64 {
    match kind {
        OutputActivation::Identity => 1.0,
        OutputActivation::TanhScaled(b) => {
            let t = y / b;
            b * (1.0 - t * t)
        }
    }
}

/// Run the forward pass into `scratch`; the result is `scratch.output()`.
///
/// Validates the input length and finiteness but trusts `params` length
/// (checked once by callers that pair params with specs; debug-asserted
/// here).
pub fn forward_into(
    spec: &MlpSpec,
    params: &ParamVector,
    input: &[f64],
    scratch: &mut Scratch,
) -> Result<()> {
    if input.len() != spec.input_dim() {
        return Err(Error::Shape(format!(
            "input length {} does not match network input width {}",
            input.len(),
            spec.input_dim()
        )));
    }
    if let Some(bad) = input.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite network input component {bad}"
        )));
    }
    debug_assert_eq!(params.len(), spec.param_count());

    scratch.acts[0].copy_from_slice(input);
    let values = params.as_slice();
    let last = spec.layer_count() - 1;
    let mut offset = 0;
    for l in 0..spec.layer_count() {
        let n_in = spec.layer_widths[l];
        let n_out = spec.layer_widths[l + 1];
        let (weights, rest) = values[offset..].split_at(n_in * n_out);
        let biases = &rest[..n_out];
        let (before, after) = scratch.acts.split_at_mut(l + 1);
        let x = &before[l];
        let out = &mut after[0];
        for o in 0..n_out {
            let z = dot(&weights[o * n_in..(o + 1) * n_in], x) + biases[o];
            out[o] = if l == last {
                output_act(spec.output_activation, z)
            } else {
                hidden_act(spec.hidden_activation, z)
            };
        }
        offset += n_in * n_out + n_out;
    }
    Ok(())
}

/// Reverse pass for the scalar `upstreamᵀ · output`.
///
/// Must follow a [`forward_into`] call on the same `scratch`. Parameter
/// gradients are **accumulated** (`+=`) into `param_grads` when provided, so
/// batch loops can share one buffer; zero it between batches. `input_grad`
/// is **overwritten** when provided — this is the `∇ₐQ` path used by the
/// policy gradient. Pass `None` to skip either side.
pub fn backward_into(
    spec: &MlpSpec,
    params: &ParamVector,
    scratch: &mut Scratch,
    upstream: &[f64],
    mut param_grads: Option<&mut ParamVector>,
    mut input_grad: Option<&mut [f64]>,
) -> Result<()> {
    if upstream.len() != spec.output_dim() {
        return Err(Error::Shape(format!(
            "upstream length {} does not match network output width {}",
            upstream.len(),
            spec.output_dim()
        )));
    }
    if let Some(g) = &param_grads {
        if g.len() != params.len() {
            return Err(Error::Shape(format!(
                "gradient buffer length {} does not match parameter length {}",
                g.len(),
                params.len()
            )));
        }
    }
    if let Some(g) = &input_grad {
        if g.len() != spec.input_dim() {
            return Err(Error::Shape(format!(
                "input-gradient buffer length {} does not match input width {}",
                g.len(),
                spec.input_dim()
            )));
        }
    }

    let values = params.as_slice();
    let layer_count = spec.layer_count();

    // Seed the output deltas: upstream times the output activation's
    // derivative at the stored outputs.
    {
        let out_acts = scratch.acts.last().unwrap();
        let out_deltas = scratch.deltas.last_mut().unwrap();
        for (d, (&u, &y)) in out_deltas
            .iter_mut()
            .zip(upstream.iter().zip(out_acts.iter()))
        {
            *d = u * output_act_deriv(spec.output_activation, y);
        }
    }

    // Walk the parameter block offsets once so each layer can be addressed
    // from the flat vector during the reverse sweep.
    let mut offsets = Vec::with_capacity(layer_count);
    {
        let mut offset = 0;
        for w in spec.layer_widths.windows(2) {
            offsets.push(offset);
            offset += w[0] * w[1] + w[1];
        }
    }

    for l in (0..layer_count).rev() {
        let n_in = spec.layer_widths[l];
        let n_out = spec.layer_widths[l + 1];
        let offset = offsets[l];
        let weights = &values[offset..offset + n_in * n_out];

        // Parameter gradients: ∂/∂W[o][i] = δ[o]·x[i], ∂/∂b[o] = δ[o].
        if let Some(grads) = param_grads.as_deref_mut() {
            let x = &scratch.acts[l];
            let delta = &scratch.deltas[l];
            let gslice = &mut grads.as_mut_slice()[offset..offset + n_in * n_out + n_out];
            let (gw, gb) = gslice.split_at_mut(n_in * n_out);
            for o in 0..n_out {
                let d = delta[o];
                if d != 0.0 {
                    let row = &mut gw[o * n_in..(o + 1) * n_in];
                    for (g, &xi) in row.iter_mut().zip(x.iter()) {
                        *g += d * xi;
                    }
                }
                gb[o] += d;
            }
        }

        // Propagate deltas to the previous layer (or to the input buffer).
        if l > 0 {
            let (prev_deltas, cur_deltas) = scratch.deltas.split_at_mut(l);
            let delta = &cur_deltas[0];
            let prev = &mut prev_deltas[l - 1];
            let prev_acts = &scratch.acts[l];
            for i in 0..n_in {
                let mut acc = 0.0;
                for o in 0..n_out {
                    acc += weights[o * n_in + i] * delta[o];
                }
                prev[i] = acc * hidden_act_deriv(spec.hidden_activation, prev_acts[i]);
            }
        } else if let Some(ig) = input_grad.as_deref_mut() {
            let delta = &scratch.deltas[0];
            for i in 0..n_in {
                let mut acc = 0.0;
                for o in 0..n_out {
                    acc += weights[o * n_in + i] * delta[o];
                }
                ig[i] = acc;
            }
        }
    }
    Ok(())
}

/// Evaluate the network once. Allocating convenience wrapper over
/// [`forward_into`]; use a [`Scratch`] directly in hot loops.
pub fn mlp_forward(spec: &MlpSpec, params: &ParamVector, input: &[f64]) -> Result<Vec<f64>> {
    spec.validate()?;
    if params.len() != spec.param_count() {
        return Err(Error::Shape(format!(
            "parameter vector length {} does not match spec ({} expected)",
            params.len(),
            spec.param_count()
        )));
    }
    let mut scratch = Scratch::new(spec);
    forward_into(spec, params, input, &mut scratch)?;
    Ok(scratch.output().to_vec())
}

/// Gradients of `upstreamᵀ · output` with respect to parameters and input.
/// Allocating convenience wrapper; hot loops drive [`backward_into`].
pub fn mlp_backward(
    spec: &MlpSpec,
    params: &ParamVector,
    input: &[f64],
    upstream: &[f64],
) -> Result<(ParamVector, Vec<f64>)> {
    spec.validate()?;
    if params.len() != spec.param_count() {
        return Err(Error::Shape(format!(
            "parameter vector length {} does not match spec ({} expected)",
            params.len(),
            spec.param_count()
        )));
    }
    let mut scratch = Scratch::new(spec);
    forward_into(spec, params, input, &mut scratch)?;
    let mut grads = ParamVector::zeros(spec);
    let mut input_grad = vec![0.0; spec.input_dim()];
    backward_into(
        spec,
        params,
        &mut scratch,
        upstream,
        Some(&mut grads),
        Some(&mut input_grad),
    )?;
    Ok((grads, input_grad))
}
