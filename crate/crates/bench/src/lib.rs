//! Shared fixtures for the criterion micro-benchmarks.
//!
//! The benchmarks measure the hot paths that dominate a training run:
//! target-rule combination, MLP forward/backward passes, one full
//! training step per strategy, and Monte-Carlo oracle throughput. The
//! fixtures here build the deterministic setups those measurements run
//! on, at the same scale the desk-preset experiments use.

use critlab_core::agents::{Agent, AgentBuild, TargetStrategy, TrainLoop};
use critlab_core::envs::{EnvFactory, EnvSpec};
use critlab_core::replay::ReplayBuffer;

/// The desk-preset network/batch scale used by the training benchmarks.
pub const HIDDEN: [usize; 2] = [32, 32];
pub const BATCH_SIZE: usize = 64;

/// A pendulum training loop advanced past warmup, ready for steady-state
/// per-step timing.
pub fn warmed_pendulum_loop(strategy: TargetStrategy, seed: u64) -> TrainLoop {
    let factory = EnvFactory::new("pendulum");
    let env = factory.build().expect("pendulum builds");
    let spec = env.spec().clone();
    let agent = pendulum_agent(strategy, &spec, seed);
    let buffer = ReplayBuffer::new(100_000).expect("capacity is positive");
    let mut training = TrainLoop::new(agent, env, buffer, seed).expect("specs match");
    // Steady state: past warmup, with update gating active.
    for _ in 0..1_100 {
        training.step().expect("training step succeeds");
    }
    training
}

/// A desk-preset agent for the pendulum spec.
pub fn pendulum_agent(strategy: TargetStrategy, spec: &EnvSpec, seed: u64) -> Agent {
    let mut build = AgentBuild::new(strategy, spec.action_bound);
    build.hidden_widths = HIDDEN.to_vec();
    build.config.batch_size = BATCH_SIZE;
    build.config.warmup_steps = 1_000;
    build.learning_rate = 1e-3;
    Agent::new(&build, spec, seed).expect("agent builds")
}
