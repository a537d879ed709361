//! Reward-shaping wrapper: scale, sparsify, and add seeded Gaussian noise.
//!
//! The emitted reward is
//!
//! ```text
//! r' = scale · sparsify(r) + η,   η ~ N(0, noise_std²)
//! ```
//!
//! where `sparsify` zeroes rewards below the optional threshold *before*
//! scaling. States, termination, and truncation pass through untouched, so
//! a wrapped environment's state trajectory is identical to the base
//! environment's under the same seed and actions.
//!
//! The noise stream is re-derived on every reset from the wrapper's own
//! seed namespace and the episode's reset seed. That keeps the trajectory
//! invariant intact — a wrapped episode is a pure function of `(transform
//! seed, reset seed, action sequence)` regardless of how many episodes ran
//! before it — and keeps probe episodes from consuming training noise.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

use super::{BoxedEnv, Env, EnvSpec, StepResult};

/// Declarative reward-transform parameters, as they appear in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardTransform {
    /// Multiplier applied to every (possibly sparsified) reward. Must be
    /// nonzero — a zero scale would silently erase the learning signal.
    #[serde(default = "default_scale")]
    pub scale: f64,
    /// Standard deviation of additive Gaussian noise; zero disables the
    /// noise draw entirely.
    #[serde(default)]
    pub noise_std: f64,
    /// Rewards strictly below this threshold become 0 before scaling.
    #[serde(default)]
    pub sparsify_threshold: Option<f64>,
}

fn default_scale() -> f64 {
    1.0
}

impl Default for RewardTransform {
    fn default() -> Self {
        RewardTransform {
            scale: 1.0,
            noise_std: 0.0,
            sparsify_threshold: None,
        }
    }
}

impl RewardTransform {
    pub fn validate(&self) -> Result<()> {
        if self.scale == 0.0 || !self.scale.is_finite() {
            return Err(Error::Config(format!(
                "reward scale must be finite and nonzero, got {}",
                self.scale
            )));
        }
        if self.noise_std < 0.0 || !self.noise_std.is_finite() {
            return Err(Error::Config(format!(
                "reward noise std must be finite and non-negative, got {}",
                self.noise_std
            )));
        }
        if let Some(t) = self.sparsify_threshold {
            if !t.is_finite() {
                return Err(Error::Config(format!(
                    "sparsify threshold must be finite, got {t}"
                )));
            }
        }
        Ok(())
    }
}

/// Wrap `env` so its rewards pass through `transform`. `transform_seed`
/// namespaces the noise streams of this wrapper instance.
pub fn wrap_reward(
    env: BoxedEnv,
    transform: RewardTransform,
    transform_seed: u64,
) -> Result<BoxedEnv> {
    transform.validate()?;
    Ok(Box::new(TransformedEnv {
        inner: env,
        transform,
        transform_seed,
        noise_rng: rng::stream_indexed(transform_seed, rng::tags::REWARD_NOISE, 0),
    }))
}

struct TransformedEnv {
    inner: BoxedEnv,
    transform: RewardTransform,
    transform_seed: u64,
    noise_rng: ChaCha12Rng,
}

impl Env for TransformedEnv {
    fn spec(&self) -> &EnvSpec {
        self.inner.spec()
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        // Fresh per-episode noise stream keyed by (wrapper seed, reset
        // seed): episode outcomes stay independent of episode order.
        self.noise_rng = rng::stream_indexed(self.transform_seed, rng::tags::REWARD_NOISE, seed);
        self.inner.reset(seed)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let mut result = self.inner.step(action)?;
        let mut r = result.reward;
        if let Some(threshold) = self.transform.sparsify_threshold {
            if r < threshold {
                r = 0.0;
            }
        }
        r *= self.transform.scale;
        if self.transform.noise_std > 0.0 {
            let eta: f64 = self.noise_rng.sample(StandardNormal);
            r += self.transform.noise_std * eta;
        }
        result.reward = r;
        Ok(result)
    }
}
