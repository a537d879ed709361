//! Experiment orchestration: structured config loading, seeded multi-run
//! execution, CSV persistence, checkpointing, and a comparison summarizer.
//!
//! A run is described by a TOML [`ExperimentConfig`]. Loading fills in
//! documented defaults, rejects unknown keys (with a nearest-key
//! suggestion), and validates ranges naming the offending field. Running
//! executes every seed independently — fresh agent, environment, replay
//! buffer, and derived random streams per seed — writing one directory of
//! CSVs and a final agent checkpoint per seed plus one `report.json` per
//! run. Everything written except wall-clock timings is a pure function of
//! the config, so a rerun is byte-identical.

mod compare;
mod run;

pub use compare::{
    compare_runs, load_run, read_bias_csv, read_eval_csv, smooth_series, BiasRow, Comparison,
    EvalRow, LoadedRun, StrategySummary,
};
pub use run::{
    output_root, run_experiment, run_seed, FailedSeed, RunReport, SeedOutcome,
    DEFAULT_OUTPUT_ROOT, OUTPUT_ROOT_ENV,
};

use serde::{Deserialize, Serialize};
use sha2::Digest;

use crate::agents::TargetStrategy;
use crate::envs::RewardTransform;
use crate::error::{Error, Result};
use crate::nn::Activation;

/// Scalar agent hyperparameters as they appear in the `[agent]` config
/// section. Every field has a default; `exploration_noise_std` defaults to
/// one tenth of the environment's action bound when left unset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentSection {
    pub gamma: f64,
    pub tau: f64,
    pub policy_delay: u64,
    pub exploration_noise_std: Option<f64>,
    pub target_noise_std: f64,
    pub target_noise_clip: f64,
    pub batch_size: usize,
    pub warmup_steps: u64,
}

impl Default for AgentSection {
    fn default() -> Self {
        AgentSection {
            gamma: 0.99,
            tau: 0.005,
            policy_delay: 2,
            exploration_noise_std: None,
            target_noise_std: 0.2,
            target_noise_clip: 0.5,
            batch_size: 256,
            warmup_steps: 1000,
        }
    }
}

/// Network architecture overrides (`[network]` section).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    /// Hidden-layer widths shared by actor and critics.
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            hidden: vec![256, 256],
            activation: Activation::ReLU,
        }
    }
}

/// Optimizer hyperparameters (`[optimizer]` section); one independent Adam
/// instance per network uses these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        OptimizerSection {
            learning_rate: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One experiment: an environment, a target-rule strategy, a seed list,
/// and the training/measurement cadence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Environment id: "pendulum" or "reacher".
    pub env: String,
    pub strategy: TargetStrategy,
    /// Independent training runs; must be nonempty and distinct.
    pub seeds: Vec<u64>,
    /// Optional reward transform applied to training, evaluation, and
    /// probe environments alike.
    #[serde(default)]
    pub transform: Option<RewardTransform>,
    #[serde(default = "default_total_steps")]
    pub total_steps: u64,
    #[serde(default = "default_cadence")]
    pub eval_every: u64,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default = "default_cadence")]
    pub bias_probe_every: u64,
    #[serde(default = "default_bias_episodes")]
    pub bias_episodes: usize,
    /// Replay capacity; defaults to `total_steps` (no eviction).
    #[serde(default)]
    pub replay_capacity: Option<usize>,
    /// Write the per-step `train.csv` (large); eval/bias series are always
    /// written.
    #[serde(default = "default_true")]
    pub log_train_steps: bool,
    /// Run directory, created under the output root.
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub agent: AgentSection,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
}

fn default_total_steps() -> u64 {
    50_000
}

fn default_cadence() -> u64 {
    2_500
}

fn default_eval_episodes() -> usize {
    10
}

fn default_bias_episodes() -> usize {
    100
}

fn default_true() -> bool {
    true
}

fn default_output_dir() -> String {
    "run".to_string()
}

/// Every key that may appear in a config file, for typo suggestions.
const KNOWN_KEYS: &[&str] = &[
    "env",
    "strategy",
    "seeds",
    "transform",
    "total_steps",
    "eval_every",
    "eval_episodes",
    "bias_probe_every",
    "bias_episodes",
    "replay_capacity",
    "log_train_steps",
    "output_dir",
    "agent",
    "network",
    "optimizer",
    "gamma",
    "tau",
    "policy_delay",
    "exploration_noise_std",
    "target_noise_std",
    "target_noise_clip",
    "batch_size",
    "warmup_steps",
    "hidden",
    "activation",
    "learning_rate",
    "beta1",
    "beta2",
    "eps",
    "scale",
    "noise_std",
    "sparsify_threshold",
];

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        crate::envs::make_env(&self.env)?;
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be nonempty".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if self.total_steps == 0 {
            return Err(Error::Config("total_steps must be at least 1".into()));
        }
        for (name, v) in [
            ("eval_every", self.eval_every),
            ("bias_probe_every", self.bias_probe_every),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        for (name, v) in [
            ("eval_episodes", self.eval_episodes),
            ("bias_episodes", self.bias_episodes),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if let Some(cap) = self.replay_capacity {
            if cap == 0 {
                return Err(Error::Config("replay_capacity must be at least 1".into()));
            }
        }
        if !(0.0..1.0).contains(&self.agent.gamma) {
            return Err(Error::Config(format!(
                "gamma must lie in [0, 1), got {}",
                self.agent.gamma
            )));
        }
        if !(self.agent.tau > 0.0 && self.agent.tau <= 1.0) {
            return Err(Error::Config(format!(
                "tau must lie in (0, 1], got {}",
                self.agent.tau
            )));
        }
        if self.agent.policy_delay == 0 {
            return Err(Error::Config("policy_delay must be at least 1".into()));
        }
        if self.agent.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if let Some(std) = self.agent.exploration_noise_std {
            if std < 0.0 || !std.is_finite() {
                return Err(Error::Config(format!(
                    "exploration_noise_std must be finite and non-negative, got {std}"
                )));
            }
        }
        for (name, v) in [
            ("target_noise_std", self.agent.target_noise_std),
            ("target_noise_clip", self.agent.target_noise_clip),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::Config(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if self.network.hidden.is_empty() {
            return Err(Error::Config("network hidden widths must be nonempty".into()));
        }
        if self.network.hidden.iter().any(|&w| w == 0) {
            return Err(Error::Config("network hidden widths must be positive".into()));
        }
        if !(self.optimizer.learning_rate > 0.0) || !self.optimizer.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning_rate must be positive and finite, got {}",
                self.optimizer.learning_rate
            )));
        }
        for (name, beta) in [
            ("beta1", self.optimizer.beta1),
            ("beta2", self.optimizer.beta2),
        ] {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {beta}")));
            }
        }
        if !(self.optimizer.eps > 0.0) {
            return Err(Error::Config(format!(
                "eps must be positive, got {}",
                self.optimizer.eps
            )));
        }
        if let Some(t) = &self.transform {
            t.validate()?;
        }
        if self.output_dir.is_empty() {
            return Err(Error::Config("output_dir must be nonempty".into()));
        }
        Ok(())
    }

    /// Stable identity of the *resolved* config: SHA-256 over its canonical
    /// JSON form. Key order in the TOML source does not matter; any change
    /// to a resolved value does.
    pub fn hash(&self) -> Result<String> {
        let canonical = serde_json::to_string(self)
            .map_err(|e| Error::Config(format!("cannot canonicalize config: {e}")))?;
        let digest = sha2::Sha256::digest(canonical.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// Parse and validate a config from TOML text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    match toml::from_str::<ExperimentConfig>(text) {
        Ok(config) => {
            config.validate()?;
            Ok(config)
        }
        Err(e) => Err(Error::Config(suggest_unknown_key(&e.to_string()))),
    }
}

/// Load, parse, and validate a config file.
pub fn load_config(path: &std::path::Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Config(format!("cannot read config {}: {e}", path.display()))
    })?;
    parse_config(&text)
}

/// Append a "did you mean" hint to TOML's unknown-field error when a known
/// key is within a small edit distance.
fn suggest_unknown_key(message: &str) -> String {
    let Some(rest) = message.split("unknown field `").nth(1) else {
        return message.to_string();
    };
    let Some(field) = rest.split('`').next() else {
        return message.to_string();
    };
    let best = KNOWN_KEYS
        .iter()
        .map(|k| (strsim::levenshtein(field, k), *k))
        .min();
    match best {
        Some((distance, key)) if distance <= 3 && distance < field.len() => {
            format!("{message}\ndid you mean `{key}`?")
        }
        _ => message.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
env = "pendulum"
strategy = "triplet"
seeds = [0]
"#;

    #[test]
    fn minimal_config_gets_documented_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.env, "pendulum");
        assert_eq!(c.strategy, TargetStrategy::Triplet);
        assert_eq!(c.seeds, vec![0]);
        assert_eq!(c.total_steps, 50_000);
        assert_eq!(c.eval_every, 2_500);
        assert_eq!(c.eval_episodes, 10);
        assert_eq!(c.bias_probe_every, 2_500);
        assert_eq!(c.bias_episodes, 100);
        assert_eq!(c.agent.gamma, 0.99);
        assert_eq!(c.agent.tau, 0.005);
        assert_eq!(c.agent.policy_delay, 2);
        assert_eq!(c.agent.batch_size, 256);
        assert_eq!(c.agent.warmup_steps, 1000);
        assert_eq!(c.network.hidden, vec![256, 256]);
        assert_eq!(c.network.activation, Activation::ReLU);
        assert_eq!(c.optimizer.learning_rate, 3e-4);
        assert!(c.transform.is_none());
        assert!(c.log_train_steps);
    }

    #[test]
    fn out_of_range_gamma_is_rejected_naming_the_field() {
        let text = format!("{MINIMAL}\n[agent]\ngamma = 1.2\n");
        let err = parse_config(&text).unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("gamma"), "{err}");
    }

    #[test]
    fn unknown_key_suggests_the_nearest_field() {
        let text = format!("{MINIMAL}\n[agent]\ngama = 0.9\n");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("gama"), "{err}");
        assert!(err.contains("did you mean `gamma`?"), "{err}");
    }

    #[test]
    fn duplicate_seeds_are_rejected() {
        let text = "env = \"pendulum\"\nstrategy = \"single\"\nseeds = [1, 1]\n";
        let err = parse_config(text).unwrap_err();
        assert!(err.to_string().contains("distinct"), "{err}");
    }

    #[test]
    fn unknown_environment_is_rejected() {
        let text = "env = \"cartpole\"\nstrategy = \"single\"\nseeds = [1]\n";
        assert!(parse_config(text).unwrap_err().is_config());
    }

    #[test]
    fn unknown_strategy_is_rejected() {
        let text = "env = \"pendulum\"\nstrategy = \"double\"\nseeds = [1]\n";
        assert!(parse_config(text).unwrap_err().is_config());
    }

    #[test]
    fn hash_is_stable_under_key_order_permutation() {
        let a = parse_config(
            "env = \"pendulum\"\nstrategy = \"triplet\"\nseeds = [0, 1]\ntotal_steps = 1000\n",
        )
        .unwrap();
        let b = parse_config(
            "total_steps = 1000\nseeds = [0, 1]\nstrategy = \"triplet\"\nenv = \"pendulum\"\n",
        )
        .unwrap();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());

        let c = parse_config(
            "env = \"pendulum\"\nstrategy = \"triplet\"\nseeds = [0, 1]\ntotal_steps = 1001\n",
        )
        .unwrap();
        assert_ne!(a.hash().unwrap(), c.hash().unwrap());
    }

    #[test]
    fn transform_section_parses_and_validates() {
        let text = format!("{MINIMAL}\n[transform]\nscale = 10.0\n");
        let c = parse_config(&text).unwrap();
        assert_eq!(c.transform.as_ref().unwrap().scale, 10.0);

        let bad = format!("{MINIMAL}\n[transform]\nscale = 0.0\n");
        assert!(parse_config(&bad).unwrap_err().is_config());
    }

    #[test]
    fn missing_file_is_a_config_error() {
        let err = load_config(std::path::Path::new("/nonexistent/notthere.toml")).unwrap_err();
        assert!(err.is_config());
    }
}
