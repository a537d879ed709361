//! Built-in continuous-control environments.
//!
//! Two tasks with hand-rolled deterministic physics:
//!
//! * `"pendulum"` — torque-limited pendulum swing-up ([`pendulum::Pendulum`]),
//! * `"reacher"` — planar point-mass reacher with goal capture
//!   ([`reacher::PointReacher`]).
//!
//! Both advance by explicit Euler integration with documented constants and
//! distinguish *terminal* states (`done`, where the value bootstrap must
//! stop) from *time-limit truncation* (`truncated`, where it must not).
//!
//! [`RewardTransform`] wraps any environment to rescale rewards, zero out
//! sub-threshold rewards, and add seeded Gaussian noise — the experimental
//! knob for reward variance, which is what drives the estimation-bias
//! regimes this crate studies.

mod pendulum;
mod reacher;
mod transform;

pub use pendulum::Pendulum;
pub use reacher::PointReacher;
pub use transform::{wrap_reward, RewardTransform};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Static facts about an environment: dimensions, the symmetric action box,
/// and the episode time limit.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_bound: f64,
    pub max_episode_steps: usize,
}

/// Outcome of one environment tick.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_state: Vec<f64>,
    pub reward: f64,
    /// Episode ended in a terminal state (bootstrap mask must be 0).
    pub done: bool,
    /// Episode hit the time limit without a terminal (bootstrap continues).
    pub truncated: bool,
}

/// The environment contract: seeded resets, one-tick stepping.
///
/// Implementations are single-owner mutable state. The `(seed, action
/// sequence)` pair fully determines a trajectory, bit-exact.
pub trait Env {
    fn spec(&self) -> &EnvSpec;

    /// Start a fresh episode from the documented initial distribution;
    /// deterministic in `seed`. Returns the initial state.
    fn reset(&mut self, seed: u64) -> Vec<f64>;

    /// Advance one tick. Actions are clamped to the action box defensively;
    /// stepping a finished episode without reset is a usage error.
    fn step(&mut self, action: &[f64]) -> Result<StepResult>;
}

pub type BoxedEnv = Box<dyn Env>;

/// Construct a bare environment from its identifier string.
pub fn make_env(id: &str) -> Result<BoxedEnv> {
    match id {
        "pendulum" => Ok(Box::new(Pendulum::new())),
        "reacher" => Ok(Box::new(PointReacher::new())),
        other => Err(Error::Config(format!(
            "unknown environment id {other:?} (known: \"pendulum\", \"reacher\")"
        ))),
    }
}

/// Cloneable recipe for building identical environment instances — the
/// training loop, the evaluator, and the bias probe each build their own
/// from one shared factory so their episode streams stay independent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvFactory {
    pub env_id: String,
    pub transform: Option<RewardTransform>,
    /// Seed namespace for the transform's reward-noise streams.
    pub transform_seed: u64,
}

impl EnvFactory {
    pub fn new(env_id: impl Into<String>) -> Self {
        EnvFactory {
            env_id: env_id.into(),
            transform: None,
            transform_seed: 0,
        }
    }

    pub fn with_transform(mut self, transform: RewardTransform, transform_seed: u64) -> Self {
        self.transform = Some(transform);
        self.transform_seed = transform_seed;
        self
    }

    pub fn build(&self) -> Result<BoxedEnv> {
        let base = make_env(&self.env_id)?;
        match &self.transform {
            None => Ok(base),
            Some(t) => wrap_reward(base, t.clone(), self.transform_seed),
        }
    }
}

pub(crate) fn clamp_action(action: &[f64], bound: f64, buf: &mut Vec<f64>) {
    buf.clear();
    buf.extend(action.iter().map(|a| a.clamp(-bound, bound)));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factory_rejects_unknown_ids() {
        assert!(matches!(make_env("cartpole"), Err(Error::Config(_))));
    }

    #[test]
    fn factory_builds_known_envs() {
        for id in ["pendulum", "reacher"] {
            let env = make_env(id).unwrap();
            assert!(env.spec().state_dim >= 1);
        }
    }

    #[test]
    fn factory_clones_build_identical_trajectories() {
        let factory = EnvFactory::new("pendulum");
        let mut a = factory.build().unwrap();
        let mut b = factory.clone().build().unwrap();
        let s_a = a.reset(7);
        let s_b = b.reset(7);
        assert_eq!(s_a, s_b);
        for i in 0..50 {
            let act = [((i as f64) * 0.37).sin()];
            let ra = a.step(&act).unwrap();
            let rb = b.step(&act).unwrap();
            assert_eq!(ra, rb);
        }
    }
}
