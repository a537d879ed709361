//! Seeded experiment execution and artifact writing.
//!
//! One experiment = one config × many seeds. Each seed gets its own
//! directory of CSV series plus a final agent checkpoint; the run as a
//! whole gets a `report.json`. All CSVs and checkpoints are bit-exact
//! functions of the config; only the wall-clock fields of the report vary
//! between identical runs.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::agents::{Agent, AgentBuild, StepMetrics, TrainLoop};
use crate::diagnostics::{bias_probe, evaluate_policy, BiasProbeConfig, BiasSample, EvalReport};
use crate::envs::EnvFactory;
use crate::error::{Error, Result};
use crate::replay::ReplayBuffer;
use crate::rng;

/// Environment variable naming the directory all run artifacts live under.
pub const OUTPUT_ROOT_ENV: &str = "CRITLAB_OUT";

/// Default output root when [`OUTPUT_ROOT_ENV`] is unset.
pub const DEFAULT_OUTPUT_ROOT: &str = "runs";

/// Resolve the output root: the env var if set, else `runs` in the
/// working directory.
pub fn output_root() -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => PathBuf::from(DEFAULT_OUTPUT_ROOT),
    }
}

/// Artifacts and headline numbers of one completed seed. Paths are
/// relative to the run directory (where `report.json` sits).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    /// Mean evaluation return at the last evaluation point.
    pub final_eval_mean: f64,
    /// Mean |bias| over the last quarter (rounded up) of bias probes.
    pub mean_abs_bias_last_quarter: f64,
    /// Largest horizon-cut bound any probe reported.
    pub truncation_error_bound: f64,
    pub train_csv: Option<String>,
    pub eval_csv: String,
    pub bias_csv: String,
    pub checkpoint: String,
    pub train_seconds: f64,
    pub eval_seconds: f64,
    pub probe_seconds: f64,
}

/// A seed that aborted, with the error that stopped it. Other seeds keep
/// running.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedSeed {
    pub seed: u64,
    pub error: String,
}

/// `report.json`: the config that produced the run, its hash, and per-seed
/// outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedOutcome>,
    pub failed_seeds: Vec<FailedSeed>,
    /// Mean over completed seeds of `final_eval_mean`.
    pub final_return_mean: f64,
    /// Population standard deviation of the same.
    pub final_return_std: f64,
    pub wall_clock_seconds: f64,
}

impl RunReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Io(std::io::Error::other(format!("cannot encode report: {e}"))))?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RunReport> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| {
            Error::Io(std::io::Error::other(format!(
                "cannot decode report {}: {e}",
                path.display()
            )))
        })
    }
}

/// Run every seed of `config` under `output_root/&config.output_dir`,
/// write `report.json`, and return the report. A seed that fails is
/// recorded and skipped; the run as a whole fails only when no seed
/// completes.
pub fn run_experiment(config: &ExperimentConfig, output_root: &Path) -> Result<RunReport> {
    config.validate()?;
    let started = Instant::now();
    let run_dir = output_root.join(&config.output_dir);
    fs::create_dir_all(&run_dir)?;

    let mut seeds = Vec::new();
    let mut failed_seeds = Vec::new();
    for &seed in &config.seeds {
        match run_seed(config, seed, &run_dir) {
            Ok(outcome) => seeds.push(outcome),
            Err(e) => failed_seeds.push(FailedSeed {
                seed,
                error: e.to_string(),
            }),
        }
    }
    if seeds.is_empty() {
        let first = &failed_seeds[0];
        return Err(Error::Usage(format!(
            "every seed failed; first failure (seed {}): {}",
            first.seed, first.error
        )));
    }

    let finals: Vec<f64> = seeds.iter().map(|s| s.final_eval_mean).collect();
    let mean = finals.iter().sum::<f64>() / finals.len() as f64;
    let var = finals.iter().map(|f| (f - mean) * (f - mean)).sum::<f64>() / finals.len() as f64;
    let report = RunReport {
        config_hash: config.hash()?,
        config: config.clone(),
        seeds,
        failed_seeds,
        final_return_mean: mean,
        final_return_std: var.sqrt(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    report.save(&run_dir.join("report.json"))?;
    Ok(report)
}

/// Train one seed end to end, writing its artifact directory.
pub fn run_seed(config: &ExperimentConfig, seed: u64, run_dir: &Path) -> Result<SeedOutcome> {
    let seed_dir_name = format!("seed-{seed}");
    let seed_dir = run_dir.join(&seed_dir_name);
    fs::create_dir_all(&seed_dir)?;

    let mut factory = EnvFactory::new(config.env.clone());
    if let Some(t) = &config.transform {
        factory = factory.with_transform(t.clone(), seed);
    }
    let env = factory.build()?;
    let spec = env.spec().clone();

    let mut build = AgentBuild::new(config.strategy, spec.action_bound);
    build.config.gamma = config.agent.gamma;
    build.config.tau = config.agent.tau;
    build.config.policy_delay = config.agent.policy_delay;
    if let Some(std) = config.agent.exploration_noise_std {
        build.config.exploration_noise_std = std;
    }
    build.config.target_noise_std = config.agent.target_noise_std;
    build.config.target_noise_clip = config.agent.target_noise_clip;
    build.config.batch_size = config.agent.batch_size;
    build.config.warmup_steps = config.agent.warmup_steps;
    build.hidden_widths = config.network.hidden.clone();
    build.hidden_activation = config.network.activation;
    build.learning_rate = config.optimizer.learning_rate;
    build.adam_beta1 = config.optimizer.beta1;
    build.adam_beta2 = config.optimizer.beta2;
    build.adam_eps = config.optimizer.eps;

    let agent = Agent::new(&build, &spec, seed)?;
    let capacity = config.replay_capacity.unwrap_or(config.total_steps as usize);
    let buffer = ReplayBuffer::new(capacity)?;
    let mut training = TrainLoop::new(agent, env, buffer, seed)?;

    let probe_config = BiasProbeConfig {
        n_episodes: config.bias_episodes,
        gamma: config.agent.gamma,
        horizon: spec.max_episode_steps,
        use_target_critics: false,
    };

    let mut train_writer = if config.log_train_steps {
        let path = seed_dir.join("train.csv");
        let mut w = BufWriter::new(fs::File::create(path)?);
        writeln!(w, "# critlab-train-v1")?;
        writeln!(
            w,
            "step,reward,action_abs_mean,episode,episode_return,\
             critic_loss_1,critic_loss_2,critic_loss_3,actor_objective"
        )?;
        Some(w)
    } else {
        None
    };
    let mut eval_writer = BufWriter::new(fs::File::create(seed_dir.join("eval.csv"))?);
    writeln!(eval_writer, "# critlab-eval-v1")?;
    writeln!(
        eval_writer,
        "step,mean_return,min_return,max_return,std_return,n_episodes"
    )?;
    let mut bias_writer = BufWriter::new(fs::File::create(seed_dir.join("bias.csv"))?);
    writeln!(bias_writer, "# critlab-bias-v1")?;
    writeln!(
        bias_writer,
        "step,estimated_q,true_q,bias,n_samples,truncation_error_bound"
    )?;

    let mut train_seconds = 0.0;
    let mut eval_seconds = 0.0;
    let mut probe_seconds = 0.0;
    let mut final_eval_mean = 0.0;
    let mut abs_biases = Vec::new();
    let mut truncation_error_bound = 0.0f64;

    // Measure at step 0 (untrained), then after every `cadence` training
    // steps; the final step lands on the grid whenever the cadences divide
    // `total_steps`.
    for step in 0..=config.total_steps {
        if step % config.eval_every == 0 {
            let t = Instant::now();
            let ordinal = step / config.eval_every;
            let eval_seed = rng::mix_indexed(seed, rng::tags::EVAL, ordinal);
            let report = evaluate_policy(training.agent(), &factory, config.eval_episodes, eval_seed)?;
            write_eval_row(&mut eval_writer, &report)?;
            final_eval_mean = report.mean_return;
            eval_seconds += t.elapsed().as_secs_f64();
        }
        if step % config.bias_probe_every == 0 {
            let t = Instant::now();
            let ordinal = step / config.bias_probe_every;
            let probe_seed = rng::mix_indexed(seed, rng::tags::BIAS_PROBE, ordinal);
            let sample = bias_probe(training.agent(), &factory, &probe_config, step, probe_seed)?;
            write_bias_row(&mut bias_writer, &sample)?;
            abs_biases.push(sample.bias.abs());
            truncation_error_bound = truncation_error_bound.max(sample.truncation_error_bound);
            probe_seconds += t.elapsed().as_secs_f64();
        }
        if step == config.total_steps {
            break;
        }
        let t = Instant::now();
        let metrics = training.step()?;
        train_seconds += t.elapsed().as_secs_f64();
        if let Some(w) = train_writer.as_mut() {
            write_train_row(w, &metrics)?;
        }
    }

    if let Some(mut w) = train_writer.take() {
        w.flush()?;
    }
    eval_writer.flush()?;
    bias_writer.flush()?;

    let agent = training.into_agent();
    let mut ckpt = BufWriter::new(fs::File::create(seed_dir.join("agent.ckpt"))?);
    agent.save(&mut ckpt)?;
    ckpt.flush()?;

    let last_quarter = abs_biases.len().div_ceil(4);
    let tail = &abs_biases[abs_biases.len() - last_quarter..];
    let mean_abs_bias = tail.iter().sum::<f64>() / tail.len() as f64;

    Ok(SeedOutcome {
        seed,
        final_eval_mean,
        mean_abs_bias_last_quarter: mean_abs_bias,
        truncation_error_bound,
        train_csv: config
            .log_train_steps
            .then(|| format!("{seed_dir_name}/train.csv")),
        eval_csv: format!("{seed_dir_name}/eval.csv"),
        bias_csv: format!("{seed_dir_name}/bias.csv"),
        checkpoint: format!("{seed_dir_name}/agent.ckpt"),
        train_seconds,
        eval_seconds,
        probe_seconds,
    })
}

fn write_train_row<W: Write>(w: &mut W, m: &StepMetrics) -> Result<()> {
    write!(
        w,
        "{},{},{},{},",
        m.step, m.reward, m.action_abs_mean, m.episode_index
    )?;
    if let Some(r) = m.episode_return {
        write!(w, "{r}")?;
    }
    for idx in 0..3 {
        write!(w, ",")?;
        if let Some(losses) = &m.critic_losses {
            if let Some(loss) = losses.get(idx) {
                write!(w, "{loss}")?;
            }
        }
    }
    write!(w, ",")?;
    if let Some(obj) = m.actor_objective {
        write!(w, "{obj}")?;
    }
    writeln!(w)?;
    Ok(())
}

fn write_eval_row<W: Write>(w: &mut W, r: &EvalReport) -> Result<()> {
    writeln!(
        w,
        "{},{},{},{},{},{}",
        r.train_step,
        r.mean_return,
        r.min_return(),
        r.max_return(),
        r.std_return(),
        r.n_episodes
    )?;
    Ok(())
}

fn write_bias_row<W: Write>(w: &mut W, s: &BiasSample) -> Result<()> {
    writeln!(
        w,
        "{},{},{},{},{},{}",
        s.train_step,
        s.estimated_q_mean,
        s.true_q_mean,
        s.bias,
        s.n_samples,
        s.truncation_error_bound
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::TargetStrategy;
    use crate::harness::{
        compare_runs, load_run, read_bias_csv, read_eval_csv, AgentSection, ExperimentConfig,
        NetworkSection, OptimizerSection,
    };

    /// A config small enough to run in well under a second.
    fn tiny_config(strategy: TargetStrategy, seeds: Vec<u64>, output_dir: &str) -> ExperimentConfig {
        ExperimentConfig {
            env: "pendulum".to_string(),
            strategy,
            seeds,
            transform: None,
            total_steps: 300,
            eval_every: 100,
            eval_episodes: 2,
            bias_probe_every: 150,
            bias_episodes: 3,
            replay_capacity: None,
            log_train_steps: true,
            output_dir: output_dir.to_string(),
            agent: AgentSection {
                warmup_steps: 50,
                batch_size: 16,
                ..AgentSection::default()
            },
            network: NetworkSection {
                hidden: vec![8, 8],
                ..NetworkSection::default()
            },
            optimizer: OptimizerSection::default(),
        }
    }

    #[test]
    fn smoke_run_writes_the_full_artifact_tree() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(TargetStrategy::ClippedDouble, vec![0, 1], "smoke");
        let report = run_experiment(&config, dir.path()).unwrap();

        assert_eq!(report.config_hash, config.hash().unwrap());
        assert_eq!(report.seeds.len(), 2);
        assert!(report.failed_seeds.is_empty());
        let run_dir = dir.path().join("smoke");
        assert!(run_dir.join("report.json").is_file());

        for outcome in &report.seeds {
            let eval = read_eval_csv(&run_dir.join(&outcome.eval_csv)).unwrap();
            // Steps 0, 100, 200, 300.
            assert_eq!(eval.len(), 4);
            assert_eq!(eval[0].step, 0);
            assert_eq!(eval.last().unwrap().step, 300);
            assert_eq!(eval.last().unwrap().mean_return, outcome.final_eval_mean);
            assert!(eval.iter().all(|r| r.n_episodes == 2));

            let bias = read_bias_csv(&run_dir.join(&outcome.bias_csv)).unwrap();
            // Steps 0, 150, 300.
            assert_eq!(bias.len(), 3);
            assert_eq!(bias.last().unwrap().step, 300);
            assert!(bias.iter().all(|r| r.n_samples == 3));
            assert!(bias.iter().all(|r| (r.bias - (r.estimated_q - r.true_q)).abs() < 1e-12));
            // A discounted pendulum horizon cut leaves a real bound.
            assert!(outcome.truncation_error_bound > 0.0);

            let train_path = run_dir.join(outcome.train_csv.as_ref().unwrap());
            let train = std::fs::read_to_string(train_path).unwrap();
            // Schema comment + header + one row per training step.
            assert_eq!(train.lines().count(), 2 + 300);
            assert!(train.starts_with("# critlab-train-v1\n"));

            assert!(run_dir.join(&outcome.checkpoint).is_file());
        }

        let loaded = RunReport::load(&run_dir.join("report.json")).unwrap();
        assert_eq!(loaded, report);

        // Checkpoints restore to working agents at the right step count.
        let mut file =
            std::fs::File::open(run_dir.join(&report.seeds[0].checkpoint)).unwrap();
        let agent = crate::agents::Agent::load(&mut file).unwrap();
        assert_eq!(agent.step_count(), 300);
        assert_eq!(agent.strategy(), TargetStrategy::ClippedDouble);
    }

    #[test]
    fn reruns_are_byte_identical_across_roots() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let config = tiny_config(TargetStrategy::Triplet, vec![7], "rerun");
        run_experiment(&config, dir_a.path()).unwrap();
        run_experiment(&config, dir_b.path()).unwrap();
        for file in ["train.csv", "eval.csv", "bias.csv", "agent.ckpt"] {
            let a = std::fs::read(dir_a.path().join("rerun/seed-7").join(file)).unwrap();
            let b = std::fs::read(dir_b.path().join("rerun/seed-7").join(file)).unwrap();
            assert_eq!(a, b, "{file} differs between identical runs");
        }
    }

    #[test]
    fn seeds_produce_distinct_trajectories() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(TargetStrategy::Single, vec![0, 1], "distinct");
        let report = run_experiment(&config, dir.path()).unwrap();
        let run_dir = dir.path().join("distinct");
        let a = std::fs::read(run_dir.join(&report.seeds[0].eval_csv)).unwrap();
        let b = std::fs::read(run_dir.join(&report.seeds[1].eval_csv)).unwrap();
        assert_ne!(a, b, "different seeds repeated the same evaluations");
    }

    #[test]
    fn failing_seed_is_recorded_while_others_continue() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(TargetStrategy::Single, vec![0, 1], "partial");
        let run_dir = dir.path().join("partial");
        fs::create_dir_all(&run_dir).unwrap();
        // A plain file squatting on seed 1's directory makes that seed's
        // setup fail without touching seed 0.
        fs::write(run_dir.join("seed-1"), b"occupied").unwrap();
        let report = run_experiment(&config, dir.path()).unwrap();
        assert_eq!(report.seeds.len(), 1);
        assert_eq!(report.seeds[0].seed, 0);
        assert_eq!(report.failed_seeds.len(), 1);
        assert_eq!(report.failed_seeds[0].seed, 1);
        assert!(report.failed_seeds[0].error.contains("error"));
    }

    #[test]
    fn every_seed_failing_fails_the_run() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(TargetStrategy::Single, vec![3], "allfail");
        let run_dir = dir.path().join("allfail");
        fs::create_dir_all(&run_dir).unwrap();
        fs::write(run_dir.join("seed-3"), b"occupied").unwrap();
        let err = run_experiment(&config, dir.path()).unwrap_err();
        assert!(err.to_string().contains("seed 3"), "{err}");
    }

    #[test]
    fn train_logging_can_be_disabled() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = tiny_config(TargetStrategy::Single, vec![0], "nolog");
        config.log_train_steps = false;
        let report = run_experiment(&config, dir.path()).unwrap();
        assert!(report.seeds[0].train_csv.is_none());
        assert!(!dir.path().join("nolog/seed-0/train.csv").exists());
        assert!(dir.path().join("nolog/seed-0/eval.csv").is_file());
    }

    #[test]
    fn comparison_recomputes_report_numbers_from_the_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(TargetStrategy::ClippedDouble, vec![0, 1], "cmp");
        let report = run_experiment(&config, dir.path()).unwrap();
        let run = load_run(&dir.path().join("cmp/report.json")).unwrap();
        let comparison = compare_runs(std::slice::from_ref(&run)).unwrap();
        assert_eq!(comparison.summaries.len(), 1);
        let s = &comparison.summaries[0];
        assert_eq!(s.strategy, "clipped_double");
        assert_eq!(s.n_seeds, 2);
        assert!((s.final_return_mean - report.final_return_mean).abs() < 1e-12);
        assert!((s.final_return_std - report.final_return_std).abs() < 1e-12);
        for (recomputed, seed) in s.per_seed_mean_abs_bias.iter().zip(&report.seeds) {
            assert!((recomputed - seed.mean_abs_bias_last_quarter).abs() < 1e-12);
        }
        assert_eq!(s.eval_steps, vec![0, 100, 200, 300]);
        assert_eq!(s.mean_eval_curve.len(), 4);
        // AULC is the mean over eval points of per-seed mean returns.
        let manual: f64 = s.per_seed_aulc.iter().sum::<f64>() / 2.0;
        assert!((s.aulc_mean - manual).abs() < 1e-12);
        assert!(comparison.render(20).unwrap().contains("clipped_double"));
    }

    #[test]
    fn mismatched_protocols_refuse_to_compare() {
        let dir = tempfile::tempdir().unwrap();
        let a = tiny_config(TargetStrategy::Single, vec![0], "proto-a");
        let mut b = tiny_config(TargetStrategy::Triplet, vec![0], "proto-b");
        b.eval_every = 150;
        run_experiment(&a, dir.path()).unwrap();
        run_experiment(&b, dir.path()).unwrap();
        let run_a = load_run(&dir.path().join("proto-a/report.json")).unwrap();
        let run_b = load_run(&dir.path().join("proto-b/report.json")).unwrap();
        let err = compare_runs(&[run_a, run_b]).unwrap_err();
        assert!(matches!(err, Error::Comparison(_)), "{err}");
        assert!(err.to_string().contains("cadence"), "{err}");
    }
}
