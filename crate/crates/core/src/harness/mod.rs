//! Experiment orchestration: seeded trial fan-out, aggregation and
//! plot-ready CSV output.
//!
//! Output layout under the experiment directory:
//!
//! * `manifest.json`: configuration echo, version, master seed, per-trial seeds and status.
//! * `<metric>.csv`: `experiment,trial,x,value` rows for every completed trial.
//! * `<metric>_summary.csv`: `experiment,x,mean,std,n` per metric point.
//! * `trials/trial_NNNN.json`: per-trial results; reused on rerun when the
//!   configuration matches, so interrupted runs resume.
//! * `tables/trial_NNNN_{pre,post}.txt`: connection tables before and after training.

mod config;
mod protocols;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    ClassifyParams, CommonParams, ConnectivityParams, DistanceSweepParams, ExperimentConfig, ExperimentKind,
    FadingParams, GeneralityParams, PairwiseParams, RankParams, SameLiquidParams,
};
pub use protocols::{median_split_enrichment, SharedInputs};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: String,
    pub x: f64,
    pub value: f64,
}

/// What a protocol produces for one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutput {
    pub rows: Vec<MetricRow>,
    pub notes: Vec<String>,
    pub seeds: BTreeMap<String, u64>,
    pub pre_table: Option<String>,
    pub post_table: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seeds: BTreeMap<String, u64>,
    pub rows: Vec<MetricRow>,
    pub notes: Vec<String>,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrialOutcome {
    Completed(TrialResult),
    Failed { trial: usize, error: String },
}

impl TrialOutcome {
    pub fn completed(&self) -> Option<&TrialResult> {
        match self {
            Self::Completed(r) => Some(r),
            Self::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
    pub n: usize,
}

/// Mean, sample standard deviation and count.
pub fn aggregate(values: &[f64]) -> Result<Summary> {
    let n = values.len();
    if n == 0 {
        return Err(Error::Input("cannot aggregate zero trials".into()));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(Summary { mean, std, n })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub metric: String,
    pub x: f64,
    pub summary: Summary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub parallel: bool,
    /// Reuse per-trial results already present in the output directory.
    pub resume: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { parallel: true, resume: true }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub outcomes: Vec<TrialOutcome>,
    pub summaries: Vec<SummaryRow>,
}

impl ExperimentReport {
    pub fn completed(&self) -> impl Iterator<Item = &TrialResult> {
        self.outcomes.iter().filter_map(TrialOutcome::completed)
    }

    /// Per-trial values of `metric` at `x`, in trial order.
    pub fn values(&self, metric: &str, x: f64) -> Vec<f64> {
        self.completed()
            .flat_map(|r| r.rows.iter())
            .filter(|row| row.metric == metric && row.x == x)
            .map(|row| row.value)
            .collect()
    }

    /// `(trial, value)` pairs of `metric` at `x`.
    pub fn values_by_trial(&self, metric: &str, x: f64) -> Vec<(usize, f64)> {
        self.completed()
            .flat_map(|r| r.rows.iter().map(move |row| (r.trial, row)))
            .filter(|(_, row)| row.metric == metric && row.x == x)
            .map(|(t, row)| (t, row.value))
            .collect()
    }

    pub fn summary(&self, metric: &str, x: f64) -> Option<Summary> {
        self.summaries
            .iter()
            .find(|s| s.metric == metric && s.x == x)
            .map(|s| s.summary)
    }

    /// Summary points of `metric`, ordered by `x`.
    pub fn curve(&self, metric: &str) -> Vec<(f64, Summary)> {
        self.summaries
            .iter()
            .filter(|s| s.metric == metric)
            .map(|s| (s.x, s.summary))
            .collect()
    }
}

/// Group completed rows by metric and `x` and summarize each group.
pub fn summarize(results: &[&TrialResult]) -> Result<Vec<SummaryRow>> {
    let mut groups: BTreeMap<&str, Vec<(f64, Vec<f64>)>> = BTreeMap::new();
    for r in results {
        for row in &r.rows {
            let points = groups.entry(&row.metric).or_default();
            match points.iter_mut().find(|(x, _)| *x == row.x) {
                Some((_, values)) => values.push(row.value),
                None => points.push((row.x, vec![row.value])),
            }
        }
    }
    let mut out = Vec::new();
    for (metric, mut points) in groups {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (x, values) in points {
            out.push(SummaryRow { metric: metric.to_string(), x, summary: aggregate(&values)? });
        }
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct StoredTrial {
    config: String,
    result: TrialResult,
}

fn fingerprint(config: &ExperimentConfig) -> String {
    let mut c = config.clone();
    c.out = None;
    c.to_toml_string()
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn trial_path(out: &Path, trial: usize) -> PathBuf {
    out.join("trials").join(format!("trial_{trial:04}.json"))
}

fn load_trial(out: &Path, trial: usize, fp: &str) -> Option<TrialResult> {
    let text = std::fs::read_to_string(trial_path(out, trial)).ok()?;
    let stored: StoredTrial = serde_json::from_str(&text).ok()?;
    (stored.config == fp && stored.result.trial == trial).then_some(stored.result)
}

fn execute_trial(
    config: &ExperimentConfig,
    shared: &SharedInputs,
    trial: usize,
    out: Option<&Path>,
    fp: &str,
) -> TrialOutcome {
    let start = Instant::now();
    let output = match protocols::run_trial(config, shared, trial) {
        Ok(o) => o,
        Err(e) => return TrialOutcome::Failed { trial, error: e.to_string() },
    };
    let result = TrialResult {
        trial,
        seeds: output.seeds,
        rows: output.rows,
        notes: output.notes,
        runtime_ms: start.elapsed().as_secs_f64() * 1000.0,
    };
    if let Some(out) = out {
        let persist = || -> Result<()> {
            let tables = out.join("tables");
            if let Some(pre) = &output.pre_table {
                write_file(&tables.join(format!("trial_{trial:04}_pre.txt")), pre)?;
            }
            if let Some(post) = &output.post_table {
                write_file(&tables.join(format!("trial_{trial:04}_post.txt")), post)?;
            }
            let stored = StoredTrial { config: fp.to_string(), result: result.clone() };
            write_file(&trial_path(out, trial), &serde_json::to_string_pretty(&stored)?)
        };
        if let Err(e) = persist() {
            return TrialOutcome::Failed { trial, error: e.to_string() };
        }
    }
    TrialOutcome::Completed(result)
}

/// Run every trial of `config`, aggregate, and write results when an output
/// directory is configured.
pub fn run_experiment(config: &ExperimentConfig, options: RunOptions) -> Result<ExperimentReport> {
    config.validate()?;
    let shared = SharedInputs::generate(config)?;
    let fp = fingerprint(config);
    let out = config.out.as_deref();

    let run_one = |trial: usize| -> TrialOutcome {
        if options.resume {
            if let Some(result) = out.and_then(|o| load_trial(o, trial, &fp)) {
                return TrialOutcome::Completed(result);
            }
        }
        execute_trial(config, &shared, trial, out, &fp)
    };
    let outcomes: Vec<TrialOutcome> = if options.parallel {
        (0..config.trials).into_par_iter().map(run_one).collect()
    } else {
        (0..config.trials).map(run_one).collect()
    };

    let completed: Vec<&TrialResult> = outcomes.iter().filter_map(TrialOutcome::completed).collect();
    let any_completed = !completed.is_empty();
    let summaries = if any_completed { summarize(&completed)? } else { Vec::new() };
    let report = ExperimentReport { config: config.clone(), outcomes, summaries };
    if let Some(out) = out {
        write_outputs(out, &report)?;
    }
    if !any_completed {
        let first = report.outcomes.iter().find_map(|o| match o {
            TrialOutcome::Failed { error, .. } => Some(error.clone()),
            TrialOutcome::Completed(_) => None,
        });
        return Err(Error::Input(format!(
            "no trial completed{}",
            first.map(|e| format!(": {e}")).unwrap_or_default()
        )));
    }
    Ok(report)
}

#[derive(Serialize)]
struct ManifestTrial<'a> {
    trial: usize,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
    seeds: Option<&'a BTreeMap<String, u64>>,
    notes: &'a [String],
}

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: &'static str,
    version: &'static str,
    master_seed: u64,
    trials_requested: usize,
    trials_completed: usize,
    metrics: Vec<&'a str>,
    config: String,
    trials: Vec<ManifestTrial<'a>>,
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn write_outputs(out: &Path, report: &ExperimentReport) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let experiment = report.config.kind.as_str();

    let mut per_metric: BTreeMap<&str, Vec<(usize, f64, f64)>> = BTreeMap::new();
    for r in report.completed() {
        for row in &r.rows {
            per_metric.entry(&row.metric).or_default().push((r.trial, row.x, row.value));
        }
    }
    for (metric, rows) in &per_metric {
        let path = out.join(format!("{metric}.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["experiment", "trial", "x", "value"])?;
        for (trial, x, value) in rows {
            w.write_record([experiment, &trial.to_string(), &fmt_f64(*x), &fmt_f64(*value)])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }

    let mut by_metric: BTreeMap<&str, Vec<&SummaryRow>> = BTreeMap::new();
    for s in &report.summaries {
        by_metric.entry(&s.metric).or_default().push(s);
    }
    for (metric, rows) in &by_metric {
        let path = out.join(format!("{metric}_summary.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["experiment", "x", "mean", "std", "n"])?;
        for s in rows {
            w.write_record([
                experiment,
                &fmt_f64(s.x),
                &fmt_f64(s.summary.mean),
                &fmt_f64(s.summary.std),
                &s.summary.n.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }

    let trials = report
        .outcomes
        .iter()
        .map(|o| match o {
            TrialOutcome::Completed(r) => ManifestTrial {
                trial: r.trial,
                status: "completed",
                error: None,
                seeds: Some(&r.seeds),
                notes: &r.notes,
            },
            TrialOutcome::Failed { trial, error } => ManifestTrial {
                trial: *trial,
                status: "failed",
                error: Some(error),
                seeds: None,
                notes: &[],
            },
        })
        .collect();
    let manifest = Manifest {
        experiment,
        version: env!("CARGO_PKG_VERSION"),
        master_seed: report.config.seed,
        trials_requested: report.config.trials,
        trials_completed: report.completed().count(),
        metrics: per_metric.keys().copied().collect(),
        config: fingerprint(&report.config),
        trials,
    };
    write_file(&out.join("manifest.json"), &serde_json::to_string_pretty(&manifest)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_single_and_known() {
        assert_eq!(aggregate(&[3.5]).unwrap(), Summary { mean: 3.5, std: 0.0, n: 1 });
        let s = aggregate(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap();
        assert_eq!(s.mean, 5.0);
        assert!((s.std - (32.0f64 / 7.0).sqrt()).abs() < 1e-15);
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn summarize_groups_by_metric_and_x() {
        let mk = |trial, rows: Vec<(&str, f64, f64)>| TrialResult {
            trial,
            seeds: BTreeMap::new(),
            rows: rows
                .into_iter()
                .map(|(m, x, v)| MetricRow { metric: m.into(), x, value: v })
                .collect(),
            notes: vec![],
            runtime_ms: 0.0,
        };
        let a = mk(0, vec![("r", 1.0, 2.0), ("r", 0.0, 1.0)]);
        let b = mk(1, vec![("r", 1.0, 4.0)]);
        let s = summarize(&[&a, &b]).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].x, s[0].summary.n), (0.0, 1));
        assert_eq!((s[1].x, s[1].summary.mean, s[1].summary.n), (1.0, 3.0, 2));
    }
}
