//! Cross-run comparison: read the CSV artifacts back, aggregate per
//! strategy, and render a summary table.
//!
//! Comparison recomputes its numbers from the CSV series (the artifacts
//! are the source of truth), not from the report's cached headline
//! fields. Runs are only comparable when they share the environment,
//! reward transform, step budget, and evaluation cadence; anything else
//! is a [`Error::Comparison`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::RunReport;
use crate::error::{Error, Result};

/// One data row of an `eval.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub step: u64,
    pub mean_return: f64,
    pub min_return: f64,
    pub max_return: f64,
    pub std_return: f64,
    pub n_episodes: u64,
}

/// One data row of a `bias.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub step: u64,
    pub estimated_q: f64,
    pub true_q: f64,
    pub bias: f64,
    pub n_samples: u64,
    pub truncation_error_bound: f64,
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Io(std::io::Error::other(format!(
            "cannot open {}: {e}",
            path.display()
        ))))
}

fn csv_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv_reader(path)?;
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        rows.push(record.map_err(|e| {
            Error::Io(std::io::Error::other(format!(
                "bad row in {}: {e}",
                path.display()
            )))
        })?);
    }
    if rows.is_empty() {
        return Err(Error::Comparison(format!("{} holds no data rows", path.display())));
    }
    Ok(rows)
}

pub fn read_eval_csv(path: &Path) -> Result<Vec<EvalRow>> {
    csv_rows(path)
}

pub fn read_bias_csv(path: &Path) -> Result<Vec<BiasRow>> {
    csv_rows(path)
}

/// Trailing-window moving average: element `i` becomes the mean of the
/// last `window` values up to and including `i` (fewer near the start).
/// Window 1 is the identity. For rendering curves only — stored artifacts
/// are never smoothed.
pub fn smooth_series(values: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::Usage("smoothing window must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(values.len());
    for i in 0..values.len() {
        let lo = (i + 1).saturating_sub(window);
        let span = &values[lo..=i];
        out.push(span.iter().sum::<f64>() / span.len() as f64);
    }
    Ok(out)
}

/// A report together with the directory its relative artifact paths
/// resolve against.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub report: RunReport,
    pub dir: PathBuf,
}

/// Load a `report.json`, remembering its directory for artifact access.
pub fn load_run(report_path: &Path) -> Result<LoadedRun> {
    let report = RunReport::load(report_path)?;
    let dir = report_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(LoadedRun { report, dir })
}

/// Aggregates of one run, recomputed from its CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: String,
    pub output_dir: String,
    pub n_seeds: usize,
    /// Final evaluation return per completed seed, in seed order.
    pub per_seed_final: Vec<f64>,
    /// Per-seed mean evaluation return over all evaluation points (the
    /// normalized area under the learning curve).
    pub per_seed_aulc: Vec<f64>,
    /// Per-seed mean |bias| over the last quarter (rounded up) of probes.
    pub per_seed_mean_abs_bias: Vec<f64>,
    /// Per-seed mean signed bias over the same tail window.
    pub per_seed_mean_bias: Vec<f64>,
    pub final_return_mean: f64,
    pub final_return_std: f64,
    pub aulc_mean: f64,
    pub mean_abs_bias: f64,
    /// Evaluation steps shared by every seed of this run.
    pub eval_steps: Vec<u64>,
    /// Cross-seed mean evaluation return at each step — raw, unsmoothed.
    pub mean_eval_curve: Vec<f64>,
}

/// The cross-run comparison: one summary per run, on a verified shared
/// protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub env: String,
    pub total_steps: u64,
    pub eval_every: u64,
    pub summaries: Vec<StrategySummary>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn population_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

fn summarize_run(run: &LoadedRun) -> Result<StrategySummary> {
    let report = &run.report;
    if report.seeds.is_empty() {
        return Err(Error::Comparison(format!(
            "run {:?} has no completed seeds",
            report.config.output_dir
        )));
    }
    let mut per_seed_final = Vec::new();
    let mut per_seed_aulc = Vec::new();
    let mut per_seed_mean_abs_bias = Vec::new();
    let mut per_seed_mean_bias = Vec::new();
    let mut eval_steps: Option<Vec<u64>> = None;
    let mut curve_sum: Vec<f64> = Vec::new();

    for seed in &report.seeds {
        let eval_rows = read_eval_csv(&run.dir.join(&seed.eval_csv))?;
        let steps: Vec<u64> = eval_rows.iter().map(|r| r.step).collect();
        match &eval_steps {
            None => {
                eval_steps = Some(steps);
                curve_sum = eval_rows.iter().map(|r| r.mean_return).collect();
            }
            Some(expected) => {
                if *expected != steps {
                    return Err(Error::Comparison(format!(
                        "seed {} of run {:?} evaluated on a different step grid",
                        seed.seed, report.config.output_dir
                    )));
                }
                for (acc, row) in curve_sum.iter_mut().zip(&eval_rows) {
                    *acc += row.mean_return;
                }
            }
        }
        let returns: Vec<f64> = eval_rows.iter().map(|r| r.mean_return).collect();
        per_seed_final.push(*returns.last().unwrap());
        per_seed_aulc.push(mean(&returns));

        let bias_rows = read_bias_csv(&run.dir.join(&seed.bias_csv))?;
        let tail_len = bias_rows.len().div_ceil(4);
        let tail = &bias_rows[bias_rows.len() - tail_len..];
        per_seed_mean_abs_bias.push(mean(&tail.iter().map(|r| r.bias.abs()).collect::<Vec<_>>()));
        per_seed_mean_bias.push(mean(&tail.iter().map(|r| r.bias).collect::<Vec<_>>()));
    }

    let n = report.seeds.len() as f64;
    let eval_steps = eval_steps.unwrap();
    let mean_eval_curve: Vec<f64> = curve_sum.iter().map(|s| s / n).collect();
    Ok(StrategySummary {
        strategy: report.config.strategy.id().to_string(),
        output_dir: report.config.output_dir.clone(),
        n_seeds: report.seeds.len(),
        final_return_mean: mean(&per_seed_final),
        final_return_std: population_std(&per_seed_final),
        aulc_mean: mean(&per_seed_aulc),
        mean_abs_bias: mean(&per_seed_mean_abs_bias),
        per_seed_final,
        per_seed_aulc,
        per_seed_mean_abs_bias,
        per_seed_mean_bias,
        eval_steps,
        mean_eval_curve,
    })
}

/// Compare runs that followed the same measurement protocol.
pub fn compare_runs(runs: &[LoadedRun]) -> Result<Comparison> {
    if runs.is_empty() {
        return Err(Error::Usage("comparison needs at least one run".into()));
    }
    let head = &runs[0].report.config;
    for run in &runs[1..] {
        let c = &run.report.config;
        if c.env != head.env {
            return Err(Error::Comparison(format!(
                "environments differ: {:?} vs {:?}",
                head.env, c.env
            )));
        }
        if c.total_steps != head.total_steps {
            return Err(Error::Comparison(format!(
                "step budgets differ: {} vs {}",
                head.total_steps, c.total_steps
            )));
        }
        if c.eval_every != head.eval_every {
            return Err(Error::Comparison(format!(
                "evaluation cadences differ: {} vs {}",
                head.eval_every, c.eval_every
            )));
        }
        if c.transform != head.transform {
            return Err(Error::Comparison(
                "reward transforms differ between runs".into(),
            ));
        }
    }
    let summaries = runs.iter().map(summarize_run).collect::<Result<Vec<_>>>()?;
    Ok(Comparison {
        env: head.env.clone(),
        total_steps: head.total_steps,
        eval_every: head.eval_every,
        summaries,
    })
}

impl Comparison {
    /// Human-readable summary table plus per-run learning curves smoothed
    /// with a trailing window (1 = raw).
    pub fn render(&self, curve_window: usize) -> Result<String> {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "environment: {}   steps: {}   eval every: {}",
            self.env, self.total_steps, self.eval_every
        );
        let _ = writeln!(
            out,
            "{:<14} {:>6} {:>14} {:>12} {:>12} {:>14}",
            "strategy", "seeds", "final return", "(std)", "aulc", "mean |bias|"
        );
        for s in &self.summaries {
            let _ = writeln!(
                out,
                "{:<14} {:>6} {:>14.3} {:>12.3} {:>12.3} {:>14.4}",
                s.strategy, s.n_seeds, s.final_return_mean, s.final_return_std, s.aulc_mean,
                s.mean_abs_bias
            );
        }
        for s in &self.summaries {
            let smoothed = smooth_series(&s.mean_eval_curve, curve_window)?;
            let _ = writeln!(out, "\ncurve [{}] ({}):", s.strategy, s.output_dir);
            for (step, value) in s.eval_steps.iter().zip(&smoothed) {
                let _ = writeln!(out, "  {step:>8}  {value:>12.3}");
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_one_smoothing_is_the_identity() {
        let xs = [3.0, -1.0, 4.0, -1.5, 9.2];
        assert_eq!(smooth_series(&xs, 1).unwrap(), xs.to_vec());
    }

    #[test]
    fn trailing_window_averages_only_the_past() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let s = smooth_series(&xs, 2).unwrap();
        assert_eq!(s, vec![1.0, 1.5, 2.5, 3.5]);
        // A window longer than the series averages the full prefix.
        let wide = smooth_series(&xs, 100).unwrap();
        assert_eq!(wide, vec![1.0, 1.5, 2.0, 2.5]);
    }

    #[test]
    fn zero_window_is_rejected() {
        assert!(smooth_series(&[1.0], 0).is_err());
    }
}
