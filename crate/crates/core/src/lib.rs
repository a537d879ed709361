//! Deterministic actor-critic laboratory.
//!
//! This crate implements a small, fully deterministic continuous-control
//! stack built around one question: how does the rule used to combine
//! target-critic values affect the bias of the learned Q-estimates?
//!
//! Three target rules are provided:
//!
//! * **Single** — bootstrap from one target critic (DDPG-style),
//! * **ClippedDouble** — the minimum of two target critics (TD3-style),
//! * **Triplet** — `min(max(Q'₁, Q'₂), Q'₃)` over three target critics,
//!   which clips the pairwise maximum from below by a third, independently
//!   trained estimate.
//!
//! Supporting the comparison are:
//!
//! * [`nn`] — a minimal reverse-mode gradient engine over fixed MLP
//!   topologies with an Adam optimizer, all in `f64`,
//! * [`envs`] — two built-in physics tasks (pendulum swing-up, planar
//!   point-reacher) plus a reward transform for controlling reward variance,
//! * [`replay`] — a fixed-capacity uniform replay ring,
//! * [`agents`] — the shared training loop parameterized by target rule,
//! * [`bias`] — closed-form expected estimation errors for a correlated
//!   Gaussian critic-error model, with a Monte-Carlo oracle that validates
//!   every closed form by brute sampling,
//! * [`diagnostics`] — true-Q Monte-Carlo probes and deterministic policy
//!   evaluation,
//! * [`harness`] — config loading, seeded multi-run orchestration, CSV and
//!   checkpoint persistence, and a cross-run comparison summarizer.
//!
//! Everything downstream of a seed is bit-reproducible: two runs of the same
//! config produce byte-identical CSVs and checkpoints.

pub mod agents;
pub mod bias;
pub mod diagnostics;
pub mod envs;
pub mod error;
pub mod harness;
pub mod nn;
pub mod replay;
pub mod rng;

pub use agents::{Agent, AgentConfig, StepMetrics, TargetStrategy};
pub use bias::{EstimatorKind, GaussianErrorModel};
pub use diagnostics::{BiasSample, EvalReport};
pub use envs::{EnvSpec, RewardTransform, StepResult};
pub use error::{Error, Result};
pub use harness::{ExperimentConfig, RunReport};
pub use nn::{Activation, MlpSpec, OutputActivation, ParamVector};
pub use replay::{ReplayBuffer, Transition};
