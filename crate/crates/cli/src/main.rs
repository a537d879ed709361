//! `critlab` — command-line front end for the actor-critic laboratory.
//!
//! Subcommands:
//!
//! * `run <config>` — execute a seeded training experiment from a TOML
//!   config and write CSVs, checkpoints, and `report.json`,
//! * `bias-phase-diagram <grid-config>` — sweep the Gaussian error model
//!   over a parameter grid and emit closed-form vs Monte-Carlo bias CSV,
//! * `compare <reports...>` — summarize and tabulate finished runs,
//! * `gradcheck` — audit analytic gradients against finite differences,
//! * `oracle` — evaluate one error-model point, closed form vs sampling.
//!
//! Artifacts land under the directory named by the `CRITLAB_OUT`
//! environment variable (default `runs`), overridable per call with
//! `--output-root`. Exit codes: 0 success, 1 run failure, 2 bad config
//! or usage.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use critlab_core::bias::{
    mc_bias_oracle, triplet_form_exact_iid, EstimatorKind, GaussianErrorModel,
};
use critlab_core::diagnostics::finite_difference_gradcheck;
use critlab_core::error::{Error, Result};
use critlab_core::harness::{
    compare_runs, load_config, load_run, output_root, run_experiment, LoadedRun,
};
use critlab_core::rng;

#[derive(Parser)]
#[command(
    name = "critlab",
    about = "Deterministic actor-critic laboratory: train, probe, and compare critic-target rules",
    version
)]
struct Cli {
    /// Directory that receives all artifacts (overrides CRITLAB_OUT).
    #[arg(long, global = true)]
    output_root: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a training experiment described by a TOML config.
    Run {
        /// Path to the experiment config.
        config: PathBuf,
    },
    /// Sweep the Gaussian error model over a grid and write a CSV of
    /// closed-form and Monte-Carlo biases for the pair and triplet rules.
    BiasPhaseDiagram {
        /// Path to the grid config (TOML); see `--explain` for the schema.
        grid_config: Option<PathBuf>,
        /// Print the grid-config schema and defaults instead of running.
        #[arg(long)]
        explain: bool,
    },
    /// Summarize finished runs side by side.
    Compare {
        /// Paths to `report.json` files of the runs to compare.
        reports: Vec<PathBuf>,
        /// Trailing smoothing window for the rendered curves (1 = raw).
        #[arg(long, default_value_t = 20)]
        window: usize,
    },
    /// Audit analytic gradients against central finite differences.
    Gradcheck {
        /// Number of randomized agent/batch setups to audit.
        #[arg(long, default_value_t = 100)]
        checks: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Largest acceptable relative error.
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Evaluate one Gaussian error-model point: closed forms next to
    /// Monte-Carlo estimates for every estimator.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct OracleArgs {
    /// Mean error of the first critic.
    eps1: f64,
    /// Mean error of the second (and third) critic.
    eps2: f64,
    /// Error spread of the first critic.
    sigma1: f64,
    /// Error spread of the second (and third) critic.
    sigma2: f64,
    /// Correlation between the first two critics' errors.
    rho: f64,
    /// Restrict output to one estimator.
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Single,
    MinOfTwo,
    MaxOfTwo,
    MinMaxMin,
}

impl From<KindArg> for EstimatorKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Single => EstimatorKind::Single,
            KindArg::MinOfTwo => EstimatorKind::MinOfTwo,
            KindArg::MaxOfTwo => EstimatorKind::MaxOfTwo,
            KindArg::MinMaxMin => EstimatorKind::MinMaxMin,
        }
    }
}

/// Grid description for `bias-phase-diagram`. Every axis is an explicit
/// list of values; the sweep is their Cartesian product with `sigma`
/// applied to both critics (`σ₁ = σ₂`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct PhaseGridConfig {
    eps1: Vec<f64>,
    eps2: Vec<f64>,
    sigma: Vec<f64>,
    rho: Vec<f64>,
    n_samples: usize,
    seed: u64,
    /// Output CSV file, relative to the output root.
    output: String,
}

impl Default for PhaseGridConfig {
    fn default() -> Self {
        PhaseGridConfig {
            eps1: vec![0.0, 0.1, 0.5],
            eps2: vec![0.0, 0.1],
            sigma: vec![0.2, 1.0, 3.0],
            rho: vec![-0.5, 0.0, 0.5, 0.9],
            n_samples: 1_000_000,
            seed: 0,
            output: "phase_diagram.csv".to_string(),
        }
    }
}

const PHASE_GRID_SCHEMA: &str = r#"# bias-phase-diagram grid config (TOML). All keys optional.
eps1 = [0.0, 0.1, 0.5]      # mean error of critic 1
eps2 = [0.0, 0.1]           # mean error of critics 2 and 3
sigma = [0.2, 1.0, 3.0]     # shared error spread (sigma1 = sigma2)
rho = [-0.5, 0.0, 0.5, 0.9] # correlation between critics 1 and 2
n_samples = 1000000         # Monte-Carlo samples per grid point
seed = 0                    # sampling seed (per-point streams derive from it)
output = "phase_diagram.csv" # written under the output root

# Columns: closed_pair is the exact min(G1,G2) expectation and oracle_pair
# samples the same model, so those two agree to Monte-Carlo error everywhere.
# oracle_triplet samples min(max(G1,G2), G3) with an independent third
# critic; closed_triplet is exact for iid errors (eps1 = eps2, rho = 0) and
# off that axis the oracle column measures the decomposition's gap rather
# than validating it.
"#;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let root = cli.output_root.unwrap_or_else(output_root);
    match dispatch(cli.command, &root) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn dispatch(command: Command, root: &std::path::Path) -> Result<()> {
    match command {
        Command::Run { config } => cmd_run(&config, root),
        Command::BiasPhaseDiagram {
            grid_config,
            explain,
        } => cmd_phase_diagram(grid_config.as_deref(), explain, root),
        Command::Compare { reports, window } => cmd_compare(&reports, window),
        Command::Gradcheck {
            checks,
            seed,
            tolerance,
        } => cmd_gradcheck(checks, seed, tolerance),
        Command::Oracle(args) => cmd_oracle(&args),
    }
}

fn cmd_run(config_path: &std::path::Path, root: &std::path::Path) -> Result<()> {
    let config = load_config(config_path)?;
    println!(
        "running {:?} [{}] for {} steps x {} seeds -> {}",
        config.env,
        config.strategy.id(),
        config.total_steps,
        config.seeds.len(),
        root.join(&config.output_dir).display()
    );
    let report = run_experiment(&config, root)?;
    println!("config hash: {}", report.config_hash);
    for seed in &report.seeds {
        println!(
            "  seed {:>4}: final return {:.3}, mean |bias| {:.4} (last quarter), \
             train {:.1}s eval {:.1}s probe {:.1}s",
            seed.seed,
            seed.final_eval_mean,
            seed.mean_abs_bias_last_quarter,
            seed.train_seconds,
            seed.eval_seconds,
            seed.probe_seconds
        );
    }
    for failed in &report.failed_seeds {
        println!("  seed {:>4}: FAILED — {}", failed.seed, failed.error);
    }
    println!(
        "final return {:.3} ± {:.3} over {} seeds ({:.1}s wall clock)",
        report.final_return_mean,
        report.final_return_std,
        report.seeds.len(),
        report.wall_clock_seconds
    );
    if !report.failed_seeds.is_empty() {
        return Err(Error::Usage(format!(
            "{} of {} seeds failed",
            report.failed_seeds.len(),
            report.failed_seeds.len() + report.seeds.len()
        )));
    }
    Ok(())
}

fn load_grid_config(path: Option<&std::path::Path>) -> Result<PhaseGridConfig> {
    let Some(path) = path else {
        return Ok(PhaseGridConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read grid config {}: {e}", path.display())))?;
    let config: PhaseGridConfig =
        toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    for (name, axis) in [
        ("eps1", &config.eps1),
        ("eps2", &config.eps2),
        ("sigma", &config.sigma),
        ("rho", &config.rho),
    ] {
        if axis.is_empty() {
            return Err(Error::Config(format!("grid axis {name} must be nonempty")));
        }
    }
    if config.n_samples < 1000 {
        return Err(Error::Config(format!(
            "n_samples must be at least 1000, got {}",
            config.n_samples
        )));
    }
    if config.output.is_empty() {
        return Err(Error::Config("output must be nonempty".into()));
    }
    Ok(config)
}

fn cmd_phase_diagram(
    grid_path: Option<&std::path::Path>,
    explain: bool,
    root: &std::path::Path,
) -> Result<()> {
    if explain {
        print!("{PHASE_GRID_SCHEMA}");
        return Ok(());
    }
    let grid = load_grid_config(grid_path)?;
    // Validate every point before sampling anything.
    let mut models = Vec::new();
    for &eps1 in &grid.eps1 {
        for &eps2 in &grid.eps2 {
            for &sigma in &grid.sigma {
                for &rho in &grid.rho {
                    models.push(
                        GaussianErrorModel::new(eps1, eps2, sigma, sigma, rho)
                            .map_err(|e| Error::Config(e.to_string()))?,
                    );
                }
            }
        }
    }

    std::fs::create_dir_all(root)?;
    let out_path = root.join(&grid.output);
    if let Some(parent) = out_path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(&out_path)?);
    writeln!(w, "# critlab-phase-v1")?;
    writeln!(
        w,
        "eps1,eps2,sigma,rho,closed_pair,closed_triplet,oracle_pair,oracle_triplet,se_pair,se_triplet"
    )?;
    for (i, model) in models.iter().enumerate() {
        let closed_pair = model.clipped_double_bias();
        let closed_triplet = model.triplet_bias();
        let (oracle_pair, se_pair) = mc_bias_oracle(
            model,
            EstimatorKind::MinOfTwo,
            grid.n_samples,
            rng::mix_indexed(grid.seed, "phase-pair", i as u64),
        )?;
        let (oracle_triplet, se_triplet) = mc_bias_oracle(
            model,
            EstimatorKind::MinMaxMin,
            grid.n_samples,
            rng::mix_indexed(grid.seed, "phase-triplet", i as u64),
        )?;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            model.eps1,
            model.eps2,
            model.sigma1,
            model.rho,
            closed_pair,
            closed_triplet,
            oracle_pair,
            oracle_triplet,
            se_pair,
            se_triplet
        )?;
    }
    w.flush()?;
    println!(
        "wrote {} grid points x {} samples to {}",
        models.len(),
        grid.n_samples,
        out_path.display()
    );
    Ok(())
}

fn cmd_compare(report_paths: &[PathBuf], window: usize) -> Result<()> {
    if report_paths.is_empty() {
        return Err(Error::Config(
            "compare needs at least one report.json path".into(),
        ));
    }
    let runs: Vec<LoadedRun> = report_paths
        .iter()
        .map(|p| load_run(p))
        .collect::<Result<_>>()?;
    let comparison = compare_runs(&runs)?;
    print!("{}", comparison.render(window)?);
    Ok(())
}

fn cmd_gradcheck(checks: usize, seed: u64, tolerance: f64) -> Result<()> {
    if !(tolerance > 0.0) {
        return Err(Error::Config(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    let report = finite_difference_gradcheck(checks, seed)?;
    println!(
        "{} checks x {} coordinates per network: max relative error {:.3e}",
        report.n_checks, report.coordinates_per_check, report.max_relative_error
    );
    println!(
        "worst case: {} gradient, check {}, coordinate {}: analytic {:.6e} vs numeric {:.6e}",
        report.worst.network,
        report.worst.check_index,
        report.worst.coordinate,
        report.worst.analytic,
        report.worst.numeric
    );
    if report.max_relative_error >= tolerance {
        return Err(Error::Numeric(format!(
            "gradient audit failed: max relative error {:.3e} >= tolerance {tolerance:.3e}",
            report.max_relative_error
        )));
    }
    println!("within tolerance {tolerance:.1e}");
    Ok(())
}

fn cmd_oracle(args: &OracleArgs) -> Result<()> {
    let model = GaussianErrorModel::new(args.eps1, args.eps2, args.sigma1, args.sigma2, args.rho)
        .map_err(|e| Error::Config(e.to_string()))?;
    if args.samples < 1000 {
        return Err(Error::Config(format!(
            "samples must be at least 1000, got {}",
            args.samples
        )));
    }
    let kinds: Vec<EstimatorKind> = match args.kind {
        Some(k) => vec![k.into()],
        None => vec![
            EstimatorKind::Single,
            EstimatorKind::MinOfTwo,
            EstimatorKind::MaxOfTwo,
            EstimatorKind::MinMaxMin,
        ],
    };
    println!(
        "model: eps1={} eps2={} sigma1={} sigma2={} rho={} (theta={:.6})",
        model.eps1,
        model.eps2,
        model.sigma1,
        model.sigma2,
        model.rho,
        model.theta_combo()
    );
    println!(
        "{:<12} {:>14} {:>14} {:>12} {:>10}",
        "estimator", "closed form", "oracle mean", "std error", "|z|"
    );
    for kind in kinds {
        let closed = kind.closed_form(&model);
        let (mean, se) = mc_bias_oracle(&model, kind, args.samples, args.seed)?;
        let z = if se > 0.0 { (closed - mean).abs() / se } else { 0.0 };
        let label = match kind {
            EstimatorKind::Single => "single",
            EstimatorKind::MinOfTwo => "min-of-two",
            EstimatorKind::MaxOfTwo => "max-of-two",
            EstimatorKind::MinMaxMin => "min-max-min",
        };
        let caveat = if kind == EstimatorKind::MinMaxMin && !triplet_form_exact_iid(&model) {
            "  (closed form exact only for iid critics)"
        } else {
            ""
        };
        println!("{label:<12} {closed:>14.6} {mean:>14.6} {se:>12.2e} {z:>10.2}{caveat}");
    }
    Ok(())
}
