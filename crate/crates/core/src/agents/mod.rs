//! The deterministic actor-critic family.
//!
//! One agent implementation covers three algorithms that differ only in the
//! rule combining target-critic values into the TD target
//! `y = r + γ·mask·(combined value)`:
//!
//! * [`TargetStrategy::Single`] — one critic, bootstrap from `Q'₁`,
//! * [`TargetStrategy::ClippedDouble`] — two critics, `min(Q'₁, Q'₂)`,
//! * [`TargetStrategy::Triplet`] — three critics,
//!   `min(max(Q'₁, Q'₂), Q'₃)`: the pairwise maximum clipped from below by
//!   a third, independently initialized estimate.
//!
//! The critic ordering is fixed for the lifetime of a run and the actor is
//! always optimized against critic 1, so the combination rule — not the
//! policy objective — is the experimental variable.
//!
//! The remaining machinery is shared: target policy smoothing (clipped
//! Gaussian noise on the target action), delayed actor updates (one actor
//! step per `policy_delay` critic steps), soft target tracking, uniform
//! warmup exploration, and termination-aware bootstrap masking.

mod train;

pub use train::{StepMetrics, TrainLoop};

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::nn::{
    backward_into, forward_into, mlp_init, read_params, write_params, Activation, Adam, MlpSpec,
    OutputActivation, ParamVector, Scratch,
};
use crate::rng;

/// Critic-target combination rule; fixes the critic count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetStrategy {
    Single,
    ClippedDouble,
    Triplet,
}

impl TargetStrategy {
    pub fn critic_count(&self) -> usize {
        match self {
            TargetStrategy::Single => 1,
            TargetStrategy::ClippedDouble => 2,
            TargetStrategy::Triplet => 3,
        }
    }

    /// Identifier used in config files and CSV headers.
    pub fn id(&self) -> &'static str {
        match self {
            TargetStrategy::Single => "single",
            TargetStrategy::ClippedDouble => "clipped_double",
            TargetStrategy::Triplet => "triplet",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(TargetStrategy::Single),
            "clipped_double" => Ok(TargetStrategy::ClippedDouble),
            "triplet" => Ok(TargetStrategy::Triplet),
            other => Err(Error::Config(format!(
                "unknown strategy {other:?} (known: \"single\", \"clipped_double\", \"triplet\")"
            ))),
        }
    }

    /// Combine per-critic target values into one bootstrap value. The
    /// slice length must equal the strategy's critic count.
    pub fn combine(&self, qs: &[f64]) -> Result<f64> {
        if qs.len() != self.critic_count() {
            return Err(Error::Usage(format!(
                "strategy {} expects {} target values, got {}",
                self.id(),
                self.critic_count(),
                qs.len()
            )));
        }
        Ok(match self {
            TargetStrategy::Single => qs[0],
            TargetStrategy::ClippedDouble => qs[0].min(qs[1]),
            TargetStrategy::Triplet => qs[0].max(qs[1]).min(qs[2]),
        })
    }
}

/// TD target from a reward, discount, bootstrap mask, and combined
/// target-critic value: `y = r + γ·mask·combined`. `mask` is 0 at terminal
/// transitions, 1 elsewhere (truncation included).
pub fn td_target(reward: f64, gamma: f64, done_mask: f64, combined: f64) -> f64 {
    reward + gamma * done_mask * combined
}

/// All scalar hyperparameters of the training loop.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    /// Discount factor γ ∈ [0, 1).
    pub gamma: f64,
    /// Soft-update proportion τ ∈ (0, 1].
    pub tau: f64,
    /// Critic updates per actor/target update (d ≥ 1).
    pub policy_delay: u64,
    /// Std of Gaussian exploration noise added to training actions.
    pub exploration_noise_std: f64,
    /// Std of the smoothing noise added to target actions.
    pub target_noise_std: f64,
    /// Clip bound for the smoothing noise.
    pub target_noise_clip: f64,
    /// Minibatch size N.
    pub batch_size: usize,
    /// Environment steps of uniform random exploration before any update.
    pub warmup_steps: u64,
}

impl AgentConfig {
    /// Defaults inherited from the fine-tuned two-critic reference setup:
    /// γ = 0.99, τ = 0.005, d = 2, σ = 0.1·action_bound, σ̃ = 0.2,
    /// c = 0.5, N = 256, warmup = 1000.
    pub fn default_for_bound(action_bound: f64) -> Self {
        AgentConfig {
            gamma: 0.99,
            tau: 0.005,
            policy_delay: 2,
            exploration_noise_std: 0.1 * action_bound,
            target_noise_std: 0.2,
            target_noise_clip: 0.5,
            batch_size: 256,
            warmup_steps: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!(
                "gamma must lie in [0, 1), got {}",
                self.gamma
            )));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!(
                "tau must lie in (0, 1], got {}",
                self.tau
            )));
        }
        if self.policy_delay == 0 {
            return Err(Error::Config("policy_delay must be at least 1".into()));
        }
        for (name, v) in [
            ("exploration_noise_std", self.exploration_noise_std),
            ("target_noise_std", self.target_noise_std),
            ("target_noise_clip", self.target_noise_clip),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::Config(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Everything needed to assemble an [`Agent`] besides the environment
/// dimensions and the seed.
#[derive(Debug, Clone)]
pub struct AgentBuild {
    pub strategy: TargetStrategy,
    pub config: AgentConfig,
    /// Hidden-layer widths shared by actor and critics.
    pub hidden_widths: Vec<usize>,
    pub hidden_activation: Activation,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl AgentBuild {
    /// Default build: two hidden layers of 256 ReLU units, Adam at 3e-4.
    pub fn new(strategy: TargetStrategy, action_bound: f64) -> Self {
        AgentBuild {
            strategy,
            config: AgentConfig::default_for_bound(action_bound),
            hidden_widths: vec![256, 256],
            hidden_activation: Activation::ReLU,
            learning_rate: 3e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

/// Precomputed smoothed target actions and TD targets for one minibatch.
pub struct BatchTargets {
    /// Flattened `batch × action_dim` smoothed target actions ã.
    pub actions: Vec<f64>,
    /// One TD target per batch element, shared by every critic.
    pub values: Vec<f64>,
}

/// A deterministic actor-critic agent: actor, target actor, `k` critics
/// with their targets, and one independent Adam instance per network.
pub struct Agent {
    strategy: TargetStrategy,
    config: AgentConfig,
    env_spec: EnvSpec,
    actor_spec: MlpSpec,
    critic_spec: MlpSpec,
    actor: ParamVector,
    actor_target: ParamVector,
    critics: Vec<ParamVector>,
    critic_targets: Vec<ParamVector>,
    actor_opt: Adam,
    critic_opts: Vec<Adam>,
    /// Environment steps taken (drives warmup and delay gates).
    t: u64,
    // Reusable buffers for the hot path.
    scratch_actor: Scratch,
    scratch_critic: Scratch,
    critic_input: Vec<f64>,
    critic_input_grad: Vec<f64>,
    grad_buffer: ParamVector,
    actor_grad_buffer: ParamVector,
}

impl std::fmt::Debug for Agent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Agent")
            .field("strategy", &self.strategy)
            .field("env_spec", &self.env_spec)
            .field("step_count", &self.t)
            .field("actor_param_count", &self.actor.len())
            .field(
                "critic_param_counts",
                &self.critics.iter().map(ParamVector::len).collect::<Vec<_>>(),
            )
            .finish_non_exhaustive()
    }
}

impl Agent {
    pub fn new(build: &AgentBuild, env_spec: &EnvSpec, seed: u64) -> Result<Agent> {
        build.config.validate()?;
        if build.hidden_widths.is_empty() {
            return Err(Error::Config(
                "agent networks need at least one hidden layer".into(),
            ));
        }

        let mut actor_widths = vec![env_spec.state_dim];
        actor_widths.extend_from_slice(&build.hidden_widths);
        actor_widths.push(env_spec.action_dim);
        let actor_spec = MlpSpec::new(
            actor_widths,
            build.hidden_activation,
            OutputActivation::TanhScaled(env_spec.action_bound),
        )?;

        let mut critic_widths = vec![env_spec.state_dim + env_spec.action_dim];
        critic_widths.extend_from_slice(&build.hidden_widths);
        critic_widths.push(1);
        let critic_spec = MlpSpec::new(
            critic_widths,
            build.hidden_activation,
            OutputActivation::Identity,
        )?;

        let actor = mlp_init(&actor_spec, rng::mix(seed, rng::tags::ACTOR_INIT))?;
        let k = build.strategy.critic_count();
        // Each critic gets its own init stream so no two start identical —
        // a third critic cloned from the second would make the triplet rule
        // degenerate at initialization.
        let critics: Vec<ParamVector> = (0..k)
            .map(|i| {
                mlp_init(
                    &critic_spec,
                    rng::mix_indexed(seed, rng::tags::CRITIC_INIT, i as u64),
                )
            })
            .collect::<Result<_>>()?;

        let new_adam = |len: usize| {
            Adam::with_betas(
                len,
                build.learning_rate,
                build.adam_beta1,
                build.adam_beta2,
                build.adam_eps,
            )
        };
        let actor_opt = new_adam(actor.len())?;
        let critic_opts = critics
            .iter()
            .map(|c| new_adam(c.len()))
            .collect::<Result<Vec<_>>>()?;

        let scratch_actor = Scratch::new(&actor_spec);
        let scratch_critic = Scratch::new(&critic_spec);
        let grad_buffer = ParamVector::zeros(&critic_spec);
        let actor_grad_buffer = ParamVector::zeros(&actor_spec);

        Ok(Agent {
            strategy: build.strategy,
            config: build.config.clone(),
            env_spec: env_spec.clone(),
            critic_targets: critics.clone(),
            actor_target: actor.clone(),
            actor,
            critics,
            actor_opt,
            critic_opts,
            t: 0,
            scratch_actor,
            scratch_critic,
            critic_input: vec![0.0; critic_spec.input_dim()],
            critic_input_grad: vec![0.0; critic_spec.input_dim()],
            grad_buffer,
            actor_grad_buffer,
            actor_spec,
            critic_spec,
        })
    }

    pub fn strategy(&self) -> TargetStrategy {
        self.strategy
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn env_spec(&self) -> &EnvSpec {
        &self.env_spec
    }

    pub fn critic_count(&self) -> usize {
        self.critics.len()
    }

    /// Environment steps taken so far.
    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub(crate) fn advance_step_counter(&mut self) {
        self.t += 1;
    }

    pub fn actor_params(&self) -> &ParamVector {
        &self.actor
    }

    pub fn actor_params_mut(&mut self) -> &mut ParamVector {
        &mut self.actor
    }

    pub fn critic_params(&self, idx: usize) -> &ParamVector {
        &self.critics[idx]
    }

    pub fn critic_params_mut(&mut self, idx: usize) -> &mut ParamVector {
        &mut self.critics[idx]
    }

    pub fn critic_target_params(&self, idx: usize) -> &ParamVector {
        &self.critic_targets[idx]
    }

    pub fn actor_target_params(&self) -> &ParamVector {
        &self.actor_target
    }

    /// The deterministic policy `π_φ(s)` without exploration noise or
    /// warmup override. Read-only: probes and evaluation use this.
    pub fn act_deterministic(&self, state: &[f64]) -> Result<Vec<f64>> {
        crate::nn::mlp_forward(&self.actor_spec, &self.actor, state)
    }

    /// Current (non-target) critic value `Q_θᵢ(s, a)`.
    pub fn critic_value(&self, idx: usize, state: &[f64], action: &[f64]) -> Result<f64> {
        if idx >= self.critics.len() {
            return Err(Error::Usage(format!(
                "critic index {idx} out of range for {} critics",
                self.critics.len()
            )));
        }
        let input = concat_state_action(state, action, &self.env_spec)?;
        Ok(crate::nn::mlp_forward(&self.critic_spec, &self.critics[idx], &input)?[0])
    }

    /// Target-critic value `Q_θᵢ'(s, a)`.
    pub fn critic_target_value(&self, idx: usize, state: &[f64], action: &[f64]) -> Result<f64> {
        if idx >= self.critic_targets.len() {
            return Err(Error::Usage(format!(
                "critic index {idx} out of range for {} critics",
                self.critic_targets.len()
            )));
        }
        let input = concat_state_action(state, action, &self.env_spec)?;
        Ok(crate::nn::mlp_forward(&self.critic_spec, &self.critic_targets[idx], &input)?[0])
    }

    /// Behavior action for training: `π_φ(s)` plus per-dimension Gaussian
    /// exploration noise when `explore` is set, clamped to the action box.
    /// During the warmup phase (`t < warmup_steps`) exploring agents draw
    /// uniformly from the action box instead, so the buffer seeds with
    /// state-independent coverage.
    pub fn select_action(
        &mut self,
        state: &[f64],
        explore: bool,
        noise_rng: &mut ChaCha12Rng,
    ) -> Result<Vec<f64>> {
        let bound = self.env_spec.action_bound;
        if explore && self.t < self.config.warmup_steps {
            return Ok((0..self.env_spec.action_dim)
                .map(|_| noise_rng.random_range(-bound..bound))
                .collect());
        }
        forward_into(&self.actor_spec, &self.actor, state, &mut self.scratch_actor)?;
        let mut action = self.scratch_actor.output().to_vec();
        if explore && self.config.exploration_noise_std > 0.0 {
            for a in &mut action {
                let z: f64 = noise_rng.sample(StandardNormal);
                *a += self.config.exploration_noise_std * z;
            }
        }
        for a in &mut action {
            *a = a.clamp(-bound, bound);
        }
        Ok(action)
    }

    /// Smoothed target action `ã = clamp(π_φ'(s') + clip(η, −c, c))` with
    /// `η ~ N(0, σ̃²)` per dimension. With `σ̃ = 0` the noise stream is not
    /// consulted and `ã = π_φ'(s')` exactly.
    pub fn smoothed_target_action(
        &mut self,
        next_state: &[f64],
        noise_rng: &mut ChaCha12Rng,
    ) -> Result<Vec<f64>> {
        forward_into(
            &self.actor_spec,
            &self.actor_target,
            next_state,
            &mut self.scratch_actor,
        )?;
        let mut action = self.scratch_actor.output().to_vec();
        apply_target_smoothing(
            &mut action,
            self.config.target_noise_std,
            self.config.target_noise_clip,
            self.env_spec.action_bound,
            noise_rng,
        );
        Ok(action)
    }

    /// One TD target for a single transition, evaluating every target
    /// critic at `(next_state, a_tilde)` and combining per the strategy.
    pub fn compute_target_value(
        &mut self,
        next_state: &[f64],
        a_tilde: &[f64],
        reward: f64,
        done_mask: f64,
    ) -> Result<f64> {
        let input = concat_state_action(next_state, a_tilde, &self.env_spec)?;
        let mut qs = Vec::with_capacity(self.critic_targets.len());
        for target in &self.critic_targets {
            forward_into(&self.critic_spec, target, &input, &mut self.scratch_critic)?;
            qs.push(self.scratch_critic.output()[0]);
        }
        let combined = self.strategy.combine(&qs)?;
        Ok(td_target(reward, self.config.gamma, done_mask, combined))
    }

    /// Smoothed target actions and TD targets for a whole minibatch — the
    /// shared-`y` half of a critic update, split out so the regression step
    /// can run against frozen targets (they are never differentiated
    /// through).
    pub fn compute_batch_targets(
        &mut self,
        batch: &[&crate::replay::Transition],
        noise_rng: &mut ChaCha12Rng,
    ) -> Result<BatchTargets> {
        if batch.is_empty() {
            return Err(Error::Usage("cannot compute targets for an empty batch".into()));
        }
        let adim = self.env_spec.action_dim;
        let mut actions = Vec::with_capacity(batch.len() * adim);
        let mut values = Vec::with_capacity(batch.len());
        let mut qs = vec![0.0; self.critic_targets.len()];
        for transition in batch {
            forward_into(
                &self.actor_spec,
                &self.actor_target,
                &transition.next_state,
                &mut self.scratch_actor,
            )?;
            let start = actions.len();
            actions.extend_from_slice(self.scratch_actor.output());
            apply_target_smoothing(
                &mut actions[start..],
                self.config.target_noise_std,
                self.config.target_noise_clip,
                self.env_spec.action_bound,
                noise_rng,
            );

            let state_dim = self.env_spec.state_dim;
            self.critic_input[..state_dim].copy_from_slice(&transition.next_state);
            self.critic_input[state_dim..].copy_from_slice(&actions[start..]);
            for (q, target) in qs.iter_mut().zip(&self.critic_targets) {
                forward_into(
                    &self.critic_spec,
                    target,
                    &self.critic_input,
                    &mut self.scratch_critic,
                )?;
                *q = self.scratch_critic.output()[0];
            }
            let combined = self.strategy.combine(&qs)?;
            values.push(td_target(
                transition.reward,
                self.config.gamma,
                transition.done_mask,
                combined,
            ));
        }
        Ok(BatchTargets { actions, values })
    }

    /// Mean-squared TD error of critic `idx` against fixed targets.
    /// Pure evaluation — the finite-difference reference for the gradient
    /// computed in [`Agent::critic_step_with_targets`].
    pub fn critic_batch_loss(
        &mut self,
        idx: usize,
        batch: &[&crate::replay::Transition],
        targets: &[f64],
    ) -> Result<f64> {
        self.check_batch_targets(idx, batch, targets)?;
        let state_dim = self.env_spec.state_dim;
        let mut loss = 0.0;
        for (transition, &y) in batch.iter().zip(targets) {
            self.critic_input[..state_dim].copy_from_slice(&transition.state);
            self.critic_input[state_dim..].copy_from_slice(&transition.action);
            forward_into(
                &self.critic_spec,
                &self.critics[idx],
                &self.critic_input,
                &mut self.scratch_critic,
            )?;
            let residual = self.scratch_critic.output()[0] - y;
            loss += residual * residual;
        }
        Ok(loss / batch.len() as f64)
    }

    fn check_batch_targets(
        &self,
        idx: usize,
        batch: &[&crate::replay::Transition],
        targets: &[f64],
    ) -> Result<()> {
        if idx >= self.critics.len() {
            return Err(Error::Usage(format!(
                "critic index {idx} out of range for {} critics",
                self.critics.len()
            )));
        }
        if batch.is_empty() {
            return Err(Error::Usage("cannot update on an empty batch".into()));
        }
        if batch.len() != targets.len() {
            return Err(Error::Shape(format!(
                "batch has {} transitions but {} targets",
                batch.len(),
                targets.len()
            )));
        }
        Ok(())
    }

    /// Mean-squared TD error of critic `idx` and its gradient, left in the
    /// shared gradient buffer.
    fn critic_grad_into_buffer(
        &mut self,
        idx: usize,
        batch: &[&crate::replay::Transition],
        targets: &[f64],
    ) -> Result<f64> {
        self.check_batch_targets(idx, batch, targets)?;
        let n = batch.len() as f64;
        let state_dim = self.env_spec.state_dim;
        self.grad_buffer.fill_zero();
        let mut loss = 0.0;
        for (transition, &y) in batch.iter().zip(targets) {
            self.critic_input[..state_dim].copy_from_slice(&transition.state);
            self.critic_input[state_dim..].copy_from_slice(&transition.action);
            forward_into(
                &self.critic_spec,
                &self.critics[idx],
                &self.critic_input,
                &mut self.scratch_critic,
            )?;
            let residual = self.scratch_critic.output()[0] - y;
            loss += residual * residual;
            // d(mean squared error)/d(output) for this element.
            let upstream = [2.0 * residual / n];
            backward_into(
                &self.critic_spec,
                &self.critics[idx],
                &mut self.scratch_critic,
                &upstream,
                Some(&mut self.grad_buffer),
                None,
            )?;
        }
        loss /= n;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!(
                "critic {idx} loss diverged to {loss} at environment step {}",
                self.t
            )));
        }
        Ok(loss)
    }

    /// Mean-squared TD error of critic `idx` against fixed targets together
    /// with its full parameter gradient. Exposed for finite-difference
    /// verification; [`Agent::critic_step_with_targets`] applies the same
    /// gradient through Adam.
    pub fn critic_loss_grad(
        &mut self,
        idx: usize,
        batch: &[&crate::replay::Transition],
        targets: &[f64],
    ) -> Result<(f64, ParamVector)> {
        let loss = self.critic_grad_into_buffer(idx, batch, targets)?;
        Ok((loss, self.grad_buffer.clone()))
    }

    /// One Adam step of critic `idx` on the mean-squared TD error against
    /// fixed targets; returns the pre-step loss.
    pub fn critic_step_with_targets(
        &mut self,
        idx: usize,
        batch: &[&crate::replay::Transition],
        targets: &[f64],
    ) -> Result<f64> {
        let loss = self.critic_grad_into_buffer(idx, batch, targets)?;
        self.critic_opts[idx]
            .step(&mut self.critics[idx], &self.grad_buffer)
            .map_err(|e| annotate_step(e, self.t))?;
        Ok(loss)
    }

    /// Full critic update: compute shared targets once, then step every
    /// critic toward them. Returns per-critic losses in critic order.
    pub fn critic_update(
        &mut self,
        batch: &[&crate::replay::Transition],
        noise_rng: &mut ChaCha12Rng,
    ) -> Result<Vec<f64>> {
        let targets = self.compute_batch_targets(batch, noise_rng)?;
        let mut losses = Vec::with_capacity(self.critics.len());
        for idx in 0..self.critics.len() {
            losses.push(self.critic_step_with_targets(idx, batch, &targets.values)?);
        }
        Ok(losses)
    }

    /// Mean first-critic value of the current policy over the batch states:
    /// `N⁻¹ Σ Q_θ₁(s, π_φ(s))`. Pure evaluation — the finite-difference
    /// reference for [`Agent::actor_update`].
    pub fn actor_objective(&mut self, batch: &[&crate::replay::Transition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Usage("cannot evaluate on an empty batch".into()));
        }
        let state_dim = self.env_spec.state_dim;
        let mut objective = 0.0;
        for transition in batch {
            forward_into(
                &self.actor_spec,
                &self.actor,
                &transition.state,
                &mut self.scratch_actor,
            )?;
            self.critic_input[..state_dim].copy_from_slice(&transition.state);
            self.critic_input[state_dim..].copy_from_slice(self.scratch_actor.output());
            forward_into(
                &self.critic_spec,
                &self.critics[0],
                &self.critic_input,
                &mut self.scratch_critic,
            )?;
            objective += self.scratch_critic.output()[0];
        }
        Ok(objective / batch.len() as f64)
    }

    /// Mean first-critic value of the current policy and the gradient of
    /// the *descent* surrogate (its negation), left in the actor gradient
    /// buffer.
    fn actor_grad_into_buffer(&mut self, batch: &[&crate::replay::Transition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Usage("cannot update on an empty batch".into()));
        }
        let n = batch.len() as f64;
        let state_dim = self.env_spec.state_dim;
        let adim = self.env_spec.action_dim;
        self.actor_grad_buffer.fill_zero();
        let mut objective = 0.0;
        let mut actor_upstream = vec![0.0; adim];
        for transition in batch {
            forward_into(
                &self.actor_spec,
                &self.actor,
                &transition.state,
                &mut self.scratch_actor,
            )?;
            self.critic_input[..state_dim].copy_from_slice(&transition.state);
            self.critic_input[state_dim..].copy_from_slice(self.scratch_actor.output());
            forward_into(
                &self.critic_spec,
                &self.critics[0],
                &self.critic_input,
                &mut self.scratch_critic,
            )?;
            objective += self.scratch_critic.output()[0];
            // ∂Q/∂(state‖action) with critic parameters left untouched.
            backward_into(
                &self.critic_spec,
                &self.critics[0],
                &mut self.scratch_critic,
                &[1.0],
                None,
                Some(&mut self.critic_input_grad),
            )?;
            // Ascent on the mean objective = descent on its negation.
            for (u, &g) in actor_upstream
                .iter_mut()
                .zip(&self.critic_input_grad[state_dim..])
            {
                *u = -g / n;
            }
            backward_into(
                &self.actor_spec,
                &self.actor,
                &mut self.scratch_actor,
                &actor_upstream,
                Some(&mut self.actor_grad_buffer),
                None,
            )?;
        }
        objective /= n;
        if !objective.is_finite() {
            return Err(Error::Numeric(format!(
                "actor objective diverged to {objective} at environment step {}",
                self.t
            )));
        }
        Ok(objective)
    }

    /// Actor objective `N⁻¹ Σ Q_θ₁(s, π_φ(s))` together with the gradient
    /// of its negation with respect to the actor parameters (the direction
    /// Adam descends). Exposed for finite-difference verification.
    pub fn actor_objective_grad(
        &mut self,
        batch: &[&crate::replay::Transition],
    ) -> Result<(f64, ParamVector)> {
        let objective = self.actor_grad_into_buffer(batch)?;
        Ok((objective, self.actor_grad_buffer.clone()))
    }

    /// One ascent step of the actor on the first critic's value, chaining
    /// `∇ₐQ_θ₁(s, a)|_{a=π_φ(s)}` through the action input into `∇_φ π`.
    /// Critic parameters are read, never written. Returns the pre-step
    /// objective.
    pub fn actor_update(&mut self, batch: &[&crate::replay::Transition]) -> Result<f64> {
        let objective = self.actor_grad_into_buffer(batch)?;
        self.actor_opt
            .step(&mut self.actor, &self.actor_grad_buffer)
            .map_err(|e| annotate_step(e, self.t))?;
        Ok(objective)
    }

    /// Convex-blend every target toward its current network:
    /// `θ' ← τθ + (1−τ)θ'` for all critics and the actor.
    pub fn soft_update(&mut self, tau: f64) {
        for (target, current) in self
            .critic_targets
            .iter_mut()
            .zip(&self.critics)
            .chain(std::iter::once((&mut self.actor_target, &self.actor)))
        {
            for (t, &c) in target.as_mut_slice().iter_mut().zip(current.as_slice()) {
                *t = tau * c + (1.0 - tau) * *t;
            }
        }
    }

    /// Serialize the whole agent (architectures, all six-to-eight parameter
    /// vectors, optimizer states, step counter, hyperparameters) to `w`.
    /// The encoding is deterministic: equal agents produce equal bytes.
    pub fn save<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(b"CRITLABA")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&[match self.strategy {
            TargetStrategy::Single => 0u8,
            TargetStrategy::ClippedDouble => 1u8,
            TargetStrategy::Triplet => 2u8,
        }])?;
        w.write_all(&self.t.to_le_bytes())?;
        for v in [
            self.config.gamma,
            self.config.tau,
            self.config.exploration_noise_std,
            self.config.target_noise_std,
            self.config.target_noise_clip,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in [
            self.config.policy_delay,
            self.config.batch_size as u64,
            self.config.warmup_steps,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(self.env_spec.state_dim as u64).to_le_bytes())?;
        w.write_all(&(self.env_spec.action_dim as u64).to_le_bytes())?;
        w.write_all(&self.env_spec.action_bound.to_le_bytes())?;
        w.write_all(&(self.env_spec.max_episode_steps as u64).to_le_bytes())?;

        write_params(w, &self.actor_spec, &self.actor)?;
        write_params(w, &self.actor_spec, &self.actor_target)?;
        w.write_all(&(self.critics.len() as u64).to_le_bytes())?;
        for critic in &self.critics {
            write_params(w, &self.critic_spec, critic)?;
        }
        for target in &self.critic_targets {
            write_params(w, &self.critic_spec, target)?;
        }
        write_adam(w, &self.actor_opt)?;
        for opt in &self.critic_opts {
            write_adam(w, opt)?;
        }
        Ok(())
    }

    /// Reconstruct an agent saved by [`Agent::save`].
    pub fn load<R: std::io::Read>(r: &mut R) -> Result<Agent> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != b"CRITLABA" {
            return Err(Error::Usage(format!(
                "not an agent checkpoint (bad magic {magic:02x?})"
            )));
        }
        let version = read_u32(r)?;
        if version != 1 {
            return Err(Error::Usage(format!(
                "unsupported agent checkpoint version {version}"
            )));
        }
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        let strategy = match tag[0] {
            0 => TargetStrategy::Single,
            1 => TargetStrategy::ClippedDouble,
            2 => TargetStrategy::Triplet,
            other => {
                return Err(Error::Usage(format!(
                    "unknown strategy tag {other} in agent checkpoint"
                )))
            }
        };
        let t = read_u64(r)?;
        let gamma = read_f64(r)?;
        let tau = read_f64(r)?;
        let exploration_noise_std = read_f64(r)?;
        let target_noise_std = read_f64(r)?;
        let target_noise_clip = read_f64(r)?;
        let policy_delay = read_u64(r)?;
        let batch_size = read_u64(r)? as usize;
        let warmup_steps = read_u64(r)?;
        let state_dim = read_u64(r)? as usize;
        let action_dim = read_u64(r)? as usize;
        let action_bound = read_f64(r)?;
        let max_episode_steps = read_u64(r)? as usize;
        let config = AgentConfig {
            gamma,
            tau,
            policy_delay,
            exploration_noise_std,
            target_noise_std,
            target_noise_clip,
            batch_size,
            warmup_steps,
        };
        config.validate()?;
        let env_spec = EnvSpec {
            state_dim,
            action_dim,
            action_bound,
            max_episode_steps,
        };

        let (actor_spec, actor) = read_params(r)?;
        let (_, actor_target) = read_params(r)?;
        let critic_count = read_u64(r)? as usize;
        if critic_count != strategy.critic_count() {
            return Err(Error::Usage(format!(
                "agent checkpoint stores {critic_count} critics but strategy {} needs {}",
                strategy.id(),
                strategy.critic_count()
            )));
        }
        let mut critic_spec = None;
        let mut critics = Vec::with_capacity(critic_count);
        for _ in 0..critic_count {
            let (spec, params) = read_params(r)?;
            critic_spec.get_or_insert(spec);
            critics.push(params);
        }
        let critic_spec = critic_spec.unwrap();
        let mut critic_targets = Vec::with_capacity(critic_count);
        for _ in 0..critic_count {
            let (_, params) = read_params(r)?;
            critic_targets.push(params);
        }
        let actor_opt = read_adam(r)?;
        let mut critic_opts = Vec::with_capacity(critic_count);
        for _ in 0..critic_count {
            critic_opts.push(read_adam(r)?);
        }

        let scratch_actor = Scratch::new(&actor_spec);
        let scratch_critic = Scratch::new(&critic_spec);
        let grad_buffer = ParamVector::zeros(&critic_spec);
        let actor_grad_buffer = ParamVector::zeros(&actor_spec);
        Ok(Agent {
            strategy,
            config,
            env_spec,
            critic_input: vec![0.0; critic_spec.input_dim()],
            critic_input_grad: vec![0.0; critic_spec.input_dim()],
            actor_spec,
            critic_spec,
            actor,
            actor_target,
            critics,
            critic_targets,
            actor_opt,
            critic_opts,
            t,
            scratch_actor,
            scratch_critic,
            grad_buffer,
            actor_grad_buffer,
        })
    }
}

fn annotate_step(e: Error, t: u64) -> Error {
    match e {
        Error::Numeric(msg) => Error::Numeric(format!("{msg} (environment step {t})")),
        other => other,
    }
}

fn concat_state_action(state: &[f64], action: &[f64], spec: &EnvSpec) -> Result<Vec<f64>> {
    if state.len() != spec.state_dim || action.len() != spec.action_dim {
        return Err(Error::Shape(format!(
            "state/action lengths ({}, {}) do not match environment ({}, {})",
            state.len(),
            action.len(),
            spec.state_dim,
            spec.action_dim
        )));
    }
    let mut input = Vec::with_capacity(state.len() + action.len());
    input.extend_from_slice(state);
    input.extend_from_slice(action);
    Ok(input)
}

/// Add clipped Gaussian smoothing noise to a target action in place, then
/// clamp to the action box. With `noise_std = 0` the stream is untouched.
fn apply_target_smoothing(
    action: &mut [f64],
    noise_std: f64,
    noise_clip: f64,
    action_bound: f64,
    rng: &mut ChaCha12Rng,
) {
    if noise_std > 0.0 {
        for a in action.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *a += (noise_std * z).clamp(-noise_clip, noise_clip);
        }
    }
    for a in action.iter_mut() {
        *a = a.clamp(-action_bound, action_bound);
    }
}

fn write_adam<W: std::io::Write>(w: &mut W, adam: &Adam) -> Result<()> {
    w.write_all(&adam.step_count.to_le_bytes())?;
    for v in [adam.learning_rate, adam.beta1, adam.beta2, adam.eps] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&(adam.first_moment().len() as u64).to_le_bytes())?;
    for m in adam.first_moment().iter().chain(adam.second_moment()) {
        w.write_all(&m.to_le_bytes())?;
    }
    Ok(())
}

fn read_adam<R: std::io::Read>(r: &mut R) -> Result<Adam> {
    let step_count = read_u64(r)?;
    let learning_rate = read_f64(r)?;
    let beta1 = read_f64(r)?;
    let beta2 = read_f64(r)?;
    let eps = read_f64(r)?;
    let len = read_u64(r)? as usize;
    let mut first = Vec::with_capacity(len);
    for _ in 0..len {
        first.push(read_f64(r)?);
    }
    let mut second = Vec::with_capacity(len);
    for _ in 0..len {
        second.push(read_f64(r)?);
    }
    Adam::from_parts(step_count, first, second, learning_rate, beta1, beta2, eps)
}

fn read_u32<R: std::io::Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: std::io::Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64<R: std::io::Read>(r: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}
