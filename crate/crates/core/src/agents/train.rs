//! The online training loop binding an agent to an environment and a
//! replay buffer.

use rand_chacha::ChaCha12Rng;

use crate::envs::BoxedEnv;
use crate::error::{Error, Result};
use crate::replay::{ReplayBuffer, Transition};
use crate::rng;

use super::Agent;

/// Everything observable about one environment step of training.
#[derive(Debug, Clone, PartialEq)]
pub struct StepMetrics {
    /// Environment step index, starting at 1.
    pub step: u64,
    /// Raw reward received (after any reward transform the env applies).
    pub reward: f64,
    /// Mean |action| over dimensions — saturation indicator.
    pub action_abs_mean: f64,
    /// Index of the episode this step belonged to, starting at 0.
    pub episode_index: u64,
    pub done: bool,
    pub truncated: bool,
    /// Undiscounted return of the episode that ended at this step, if any.
    pub episode_return: Option<f64>,
    /// Length of the episode that ended at this step, if any.
    pub episode_length: Option<u64>,
    /// Per-critic TD losses when a critic update ran this step.
    pub critic_losses: Option<Vec<f64>>,
    /// Actor objective when a (delayed) actor update ran this step.
    pub actor_objective: Option<f64>,
}

/// Owns the agent, environment, replay buffer, and the named random
/// streams of one training run. Every random draw descends from
/// `run_seed` through a tagged stream, so two loops built with equal
/// inputs produce bitwise-equal metric streams.
pub struct TrainLoop {
    agent: Agent,
    env: BoxedEnv,
    buffer: ReplayBuffer,
    run_seed: u64,
    exploration_rng: ChaCha12Rng,
    target_noise_rng: ChaCha12Rng,
    replay_rng: ChaCha12Rng,
    episode_index: u64,
    state: Vec<f64>,
    episode_return: f64,
    episode_length: u64,
}

impl TrainLoop {
    /// Assemble a loop and reset the environment to episode 0. The agent's
    /// recorded environment shape must match the environment's.
    pub fn new(
        agent: Agent,
        mut env: BoxedEnv,
        buffer: ReplayBuffer,
        run_seed: u64,
    ) -> Result<TrainLoop> {
        if agent.env_spec() != env.spec() {
            return Err(Error::Usage(format!(
                "agent was built for environment shape {:?} but the loop got {:?}",
                agent.env_spec(),
                env.spec()
            )));
        }
        let state = env.reset(rng::mix_indexed(run_seed, rng::tags::EPISODE, 0));
        Ok(TrainLoop {
            exploration_rng: rng::stream(run_seed, rng::tags::EXPLORATION),
            target_noise_rng: rng::stream(run_seed, rng::tags::TARGET_NOISE),
            replay_rng: rng::stream(run_seed, rng::tags::REPLAY),
            agent,
            env,
            buffer,
            run_seed,
            episode_index: 0,
            state,
            episode_return: 0.0,
            episode_length: 0,
        })
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn agent_mut(&mut self) -> &mut Agent {
        &mut self.agent
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn current_state(&self) -> &[f64] {
        &self.state
    }

    pub fn episode_index(&self) -> u64 {
        self.episode_index
    }

    /// One iteration of the training loop:
    ///
    /// 1. act (uniform during warmup, else policy + exploration noise),
    /// 2. step the environment and store the transition (bootstrap mask 0
    ///    only on termination; truncation still bootstraps),
    /// 3. on episode end, reset with the next derived episode seed,
    /// 4. past warmup: one critic update on a fresh minibatch, and every
    ///    `policy_delay`-th step one actor update followed by a soft
    ///    target update.
    pub fn step(&mut self) -> Result<StepMetrics> {
        let action = self
            .agent
            .select_action(&self.state, true, &mut self.exploration_rng)?;
        let outcome = self.env.step(&action)?;
        self.agent.advance_step_counter();
        let t = self.agent.step_count();

        let done_mask = if outcome.done { 0.0 } else { 1.0 };
        self.buffer.push(Transition {
            state: std::mem::take(&mut self.state),
            action: action.clone(),
            reward: outcome.reward,
            next_state: outcome.next_state.clone(),
            done_mask,
        })?;

        self.episode_return += outcome.reward;
        self.episode_length += 1;
        let action_abs_mean =
            action.iter().map(|a| a.abs()).sum::<f64>() / action.len().max(1) as f64;
        let mut metrics = StepMetrics {
            step: t,
            reward: outcome.reward,
            action_abs_mean,
            episode_index: self.episode_index,
            done: outcome.done,
            truncated: outcome.truncated,
            episode_return: None,
            episode_length: None,
            critic_losses: None,
            actor_objective: None,
        };

        if outcome.done || outcome.truncated {
            metrics.episode_return = Some(self.episode_return);
            metrics.episode_length = Some(self.episode_length);
            self.episode_index += 1;
            self.episode_return = 0.0;
            self.episode_length = 0;
            self.state = self.env.reset(rng::mix_indexed(
                self.run_seed,
                rng::tags::EPISODE,
                self.episode_index,
            ));
        } else {
            self.state = outcome.next_state;
        }

        if t > self.agent.config().warmup_steps && !self.buffer.is_empty() {
            let batch_size = self.agent.config().batch_size;
            let batch = self.buffer.sample(batch_size, &mut self.replay_rng)?;
            let losses = self.agent.critic_update(&batch, &mut self.target_noise_rng)?;
            metrics.critic_losses = Some(losses);
            if t % self.agent.config().policy_delay == 0 {
                let objective = self.agent.actor_update(&batch)?;
                let tau = self.agent.config().tau;
                self.agent.soft_update(tau);
                metrics.actor_objective = Some(objective);
            }
        }
        Ok(metrics)
    }

    /// Consume the loop, returning the trained agent.
    pub fn into_agent(self) -> Agent {
        self.agent
    }
}
