//! Torque-limited pendulum swing-up.
//!
//! A uniform rod of mass `m = 1` and length `l = 1` pivots at one end under
//! gravity `g = 10`, driven by a bounded torque `u ∈ [-2, 2]`. The angle
//! `θ` is measured from upright, so the controller must pump energy to
//! swing the rod up and then balance it against gravity's destabilizing
//! torque `(3g / 2l)·sin θ`.
//!
//! Observation: `[cos θ, sin θ, ω]`. Reward: `-(θ̂² + 0.1·ω² + 0.001·u²)`
//! with `θ̂` the angle wrapped to `(-π, π]` — zero at the balanced upright,
//! `-π²` hanging at rest. Episodes truncate at 200 steps; there is no
//! terminal state.
//!
//! Integration is one explicit-Euler tick per step at `dt = 0.05`: both the
//! angle and velocity updates use the *current* state's derivatives. The
//! angular velocity is clamped to `[-8, 8]` to keep the dynamics bounded.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

use super::{clamp_action, Env, EnvSpec, StepResult};

const GRAVITY: f64 = 10.0;
const MASS: f64 = 1.0;
const LENGTH: f64 = 1.0;
const DT: f64 = 0.05;
const MAX_SPEED: f64 = 8.0;
const MAX_TORQUE: f64 = 2.0;
const MAX_STEPS: usize = 200;

/// Wrap an angle to `(-π, π]`; the tie at `π` maps to `+π`.
pub(crate) fn wrap_angle(theta: f64) -> f64 {
    theta - 2.0 * PI * ((theta - PI) / (2.0 * PI)).ceil()
}

pub struct Pendulum {
    spec: EnvSpec,
    theta: f64,
    omega: f64,
    steps_taken: usize,
    needs_reset: bool,
    action_buf: Vec<f64>,
}

impl Pendulum {
    pub fn new() -> Self {
        Pendulum {
            spec: EnvSpec {
                state_dim: 3,
                action_dim: 1,
                action_bound: MAX_TORQUE,
                max_episode_steps: MAX_STEPS,
            },
            theta: 0.0,
            omega: 0.0,
            steps_taken: 0,
            needs_reset: true,
            action_buf: Vec::with_capacity(1),
        }
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.omega]
    }
}

impl Default for Pendulum {
    fn default() -> Self {
        Pendulum::new()
    }
}

impl Env for Pendulum {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    /// Initial distribution: `θ ~ U[-π, π)` then `ω ~ U[-1, 1)`, drawn in
    /// that order from a generator seeded by `seed`.
    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        self.theta = rng.random_range(-PI..PI);
        self.omega = rng.random_range(-1.0..1.0);
        self.steps_taken = 0;
        self.needs_reset = false;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.needs_reset {
            return Err(Error::Usage(
                "pendulum episode already finished; call reset before stepping".into(),
            ));
        }
        if action.len() != 1 {
            return Err(Error::Shape(format!(
                "pendulum takes a 1-dimensional action, got {}",
                action.len()
            )));
        }
        let mut buf = std::mem::take(&mut self.action_buf);
        clamp_action(action, MAX_TORQUE, &mut buf);
        let u = buf[0];
        self.action_buf = buf;

        let theta_wrapped = wrap_angle(self.theta);
        let reward =
            -(theta_wrapped * theta_wrapped + 0.1 * self.omega * self.omega + 0.001 * u * u);

        // Rod pivoted at one end: inertia ml²/3, gravity torque mg(l/2)sinθ.
        let accel = 3.0 * GRAVITY / (2.0 * LENGTH) * self.theta.sin()
            + 3.0 / (MASS * LENGTH * LENGTH) * u;
        let new_theta = self.theta + self.omega * DT;
        let new_omega = (self.omega + accel * DT).clamp(-MAX_SPEED, MAX_SPEED);
        self.theta = new_theta;
        self.omega = new_omega;

        self.steps_taken += 1;
        let truncated = self.steps_taken >= MAX_STEPS;
        if truncated {
            self.needs_reset = true;
        }
        Ok(StepResult {
            next_state: self.observation(),
            reward,
            done: false,
            truncated,
        })
    }
}
