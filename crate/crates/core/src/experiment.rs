//! Multi-trial experiments, node-count sweeps and their CSV outputs.
//!
//! Each trial is a pure function of the configuration and its seed
//! (`base_seed + trial`), so trials run in parallel and are collected back in
//! trial order before anything is written.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::drap::{DrapConfig, DrapPolicy};
use crate::error::{Result, SimError};
use crate::fifo::{ClusterSizing, FifoPolicy};
use crate::lymph::ScalingRow;
use crate::metrics::{RunSummary, Timeseries};
use crate::stats::{confidence_interval, fit_power_law, ConfidenceInterval, PowerLawFit};
use crate::workload::{generate, WorkloadSpec};
use crate::world::{init_world, Policy};

/// Radius giving about seven expected neighbors among 100 uniform agents.
pub const DEFAULT_BASE_RADIUS: f64 = 0.15;
/// Node count at which `base_radius` applies unscaled.
pub const REFERENCE_NODES: usize = 100;
pub const CONFIDENCE_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedulerKind {
    Drap,
    Fifo,
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchedulerKind::Drap => "drap",
            SchedulerKind::Fifo => "fifo",
        })
    }
}

impl FromStr for SchedulerKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "drap" => Ok(SchedulerKind::Drap),
            "fifo" => Ok(SchedulerKind::Fifo),
            other => Err(SimError::Config(format!("unknown scheduler '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusSetting {
    /// Scale the base radius as `1/sqrt(nodes)` so the expected neighbor
    /// count stays constant.
    Auto,
    Fixed(f64),
}

impl fmt::Display for RadiusSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadiusSetting::Auto => f.write_str("auto"),
            RadiusSetting::Fixed(r) => write!(f, "{r}"),
        }
    }
}

impl FromStr for RadiusSetting {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(RadiusSetting::Auto);
        }
        s.parse::<f64>()
            .map(RadiusSetting::Fixed)
            .map_err(|_| SimError::Config(format!("radius must be a number or 'auto', got '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scheduler: SchedulerKind,
    pub nodes: usize,
    pub tasks: usize,
    pub trials: usize,
    pub base_seed: u64,
    pub radius: RadiusSetting,
    /// Radius used at `REFERENCE_NODES` nodes when `radius` is auto.
    pub base_radius: f64,
    /// Count and seed are overridden per trial.
    pub workload: WorkloadSpec,
    pub drap: DrapConfig,
    pub fifo_sizing: ClusterSizing,
    pub max_ticks: u64,
    pub sweep: Vec<usize>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scheduler: SchedulerKind::Drap,
            nodes: 100,
            tasks: 1000,
            trials: 10,
            base_seed: 1,
            radius: RadiusSetting::Auto,
            base_radius: DEFAULT_BASE_RADIUS,
            workload: WorkloadSpec::default(),
            drap: DrapConfig::default(),
            fifo_sizing: ClusterSizing::Fixed(5),
            max_ticks: 1_000_000,
            sweep: vec![50, 100, 150, 200, 250, 300],
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(SimError::Config("trials must be at least 1".into()));
        }
        if self.nodes == 0 {
            return Err(SimError::Config("nodes must be at least 1".into()));
        }
        if self.max_ticks == 0 {
            return Err(SimError::Config("max_ticks must be at least 1".into()));
        }
        if !(self.base_radius > 0.0) {
            return Err(SimError::Config("base radius must be positive".into()));
        }
        self.workload.validate()?;
        self.drap.validate()?;
        let r = self.resolved_radius();
        if !(r > 0.0 && r <= std::f64::consts::SQRT_2) {
            return Err(SimError::Config(format!("neighbor radius must lie in (0, sqrt 2], got {r}")));
        }
        Ok(())
    }

    /// The neighbor radius this configuration runs with.
    pub fn resolved_radius(&self) -> f64 {
        match self.radius {
            RadiusSetting::Fixed(r) => r,
            RadiusSetting::Auto => (self.base_radius * (REFERENCE_NODES as f64 / self.nodes as f64).sqrt())
                .min(std::f64::consts::SQRT_2),
        }
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.base_seed.wrapping_add(trial as u64)
    }

    pub fn with_nodes(&self, nodes: usize) -> Self {
        ExperimentConfig { nodes, ..self.clone() }
    }

    pub fn with_scheduler(&self, scheduler: SchedulerKind) -> Self {
        ExperimentConfig { scheduler, ..self.clone() }
    }
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub trial: usize,
    pub summary: RunSummary,
    pub timeseries: Timeseries,
    pub mean_neighbors: f64,
}

/// Runs one trial to completion (or to `max_ticks`).
pub fn run_trial(config: &ExperimentConfig, trial: usize) -> Result<TrialResult> {
    config.validate()?;
    let seed = config.trial_seed(trial);
    let workload = WorkloadSpec { count: config.tasks, seed, ..config.workload.clone() };
    let tasks = generate(&workload)?;
    let mut world = init_world(config.nodes, tasks, config.resolved_radius(), seed)?;
    let mut policy: Box<dyn Policy> = match config.scheduler {
        SchedulerKind::Drap => Box::new(DrapPolicy::new(config.drap)?),
        SchedulerKind::Fifo => Box::new(FifoPolicy::new(config.fifo_sizing, workload, seed)),
    };
    policy.prepare(&mut world)?;
    let (timeseries, summary) = world.run_to_completion(policy.as_mut(), config.max_ticks)?;
    Ok(TrialResult { trial, summary, timeseries, mean_neighbors: world.mean_neighbor_count() })
}

/// Runs every trial, in parallel, returning results in trial order.
pub fn run_trials(config: &ExperimentConfig) -> Result<Vec<TrialResult>> {
    config.validate()?;
    (0..config.trials)
        .into_par_iter()
        .map(|i| run_trial(config, i))
        .collect()
}

/// Mean and interval for each metric across trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub t_complete: ConfidenceInterval,
    pub t_wait: ConfidenceInterval,
    pub mu_mean: ConfidenceInterval,
    pub incomplete: bool,
}

/// Aggregates at the 95% level. `None` with fewer than two trials.
pub fn aggregate(trials: &[TrialResult]) -> Option<Aggregate> {
    if trials.len() < 2 {
        return None;
    }
    let ci = |f: fn(&RunSummary) -> f64| {
        let v: Vec<f64> = trials.iter().map(|t| f(&t.summary)).collect();
        confidence_interval(&v, CONFIDENCE_LEVEL).expect("two or more samples")
    };
    Some(Aggregate {
        t_complete: ci(|s| s.t_complete as f64),
        t_wait: ci(|s| s.t_wait),
        mu_mean: ci(|s| s.mu_mean),
        incomplete: trials.iter().any(|t| t.summary.incomplete),
    })
}

/// Interval over `samples`; collapses to the single value when there is one.
fn interval_or_point(samples: &[f64]) -> ConfidenceInterval {
    match samples {
        [x] => ConfidenceInterval { mean: *x, lo: *x, hi: *x },
        _ => confidence_interval(samples, CONFIDENCE_LEVEL).expect("two or more samples"),
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub radius: f64,
    pub trials: Vec<TrialResult>,
    pub aggregate: Option<Aggregate>,
}

impl ExperimentReport {
    pub fn incomplete(&self) -> bool {
        self.trials.iter().any(|t| t.summary.incomplete)
    }
}

pub const SUMMARY_HEADER: [&str; 15] = [
    "trial",
    "scheduler",
    "nodes",
    "tasks",
    "seed",
    "t_complete",
    "t_wait",
    "mu_mean",
    "incomplete",
    "t_complete_ci_lo",
    "t_complete_ci_hi",
    "t_wait_ci_lo",
    "t_wait_ci_hi",
    "mu_mean_ci_lo",
    "mu_mean_ci_hi",
];

/// One row per trial, then an aggregate row (trial = `mean`) carrying the
/// interval bounds when there are at least two trials.
pub fn write_summary<W: Write>(out: W, trials: &[TrialResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for t in trials {
        let s = &t.summary;
        let mut row = vec![
            t.trial.to_string(),
            s.meta.scheduler.clone(),
            s.meta.nodes.to_string(),
            s.meta.tasks.to_string(),
            s.meta.seed.to_string(),
            s.t_complete.to_string(),
            s.t_wait.to_string(),
            s.mu_mean.to_string(),
            s.incomplete.to_string(),
        ];
        row.extend(std::iter::repeat_n(String::new(), 6));
        w.write_record(&row)?;
    }
    if let (Some(agg), Some(first)) = (aggregate(trials), trials.first()) {
        let m = &first.summary.meta;
        let mut row = vec![
            "mean".to_string(),
            m.scheduler.clone(),
            m.nodes.to_string(),
            m.tasks.to_string(),
            String::new(),
            agg.t_complete.mean.to_string(),
            agg.t_wait.mean.to_string(),
            agg.mu_mean.mean.to_string(),
            agg.incomplete.to_string(),
        ];
        for ci in [agg.t_complete, agg.t_wait, agg.mu_mean] {
            row.push(ci.lo.to_string());
            row.push(ci.hi.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub const TIMESERIES_HEADER: [&str; 5] = ["tick", "busy_nodes", "utilization", "traversals", "queue_length"];

pub fn write_timeseries<W: Write>(out: W, series: &Timeseries) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TIMESERIES_HEADER)?;
    for s in &series.samples {
        w.write_record([
            s.tick.to_string(),
            s.busy_nodes.to_string(),
            s.utilization.to_string(),
            s.traversals.to_string(),
            s.queue_length.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Runs all trials and writes `summary.csv`, `timeseries.csv` (first trial)
/// and `config.txt` into the output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let trials = run_trials(config)?;
    fs::create_dir_all(&config.out_dir)?;
    write_summary(create(&config.out_dir, "summary.csv")?, &trials)?;
    write_timeseries(create(&config.out_dir, "timeseries.csv")?, &trials[0].timeseries)?;
    create(&config.out_dir, "config.txt")?.write_all(config.to_config_text().as_bytes())?;
    Ok(ExperimentReport {
        radius: config.resolved_radius(),
        aggregate: aggregate(&trials),
        config: config.clone(),
        trials,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub nodes: usize,
    pub radius: f64,
    pub mean_neighbors: f64,
    pub t_complete: ConfidenceInterval,
    pub t_wait: ConfidenceInterval,
    pub incomplete: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricFit {
    pub metric: &'static str,
    pub fit: PowerLawFit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub fits: Vec<MetricFit>,
    /// Why fits are missing, when they are.
    pub diagnostic: Option<String>,
}

impl SweepReport {
    pub fn incomplete(&self) -> bool {
        self.rows.iter().any(|r| r.incomplete)
    }

    pub fn fit(&self, metric: &str) -> Option<&PowerLawFit> {
        self.fits.iter().find(|f| f.metric == metric).map(|f| &f.fit)
    }
}

/// Runs the full experiment at every node count and fits power laws to the
/// mean timing metrics against node count.
pub fn sweep_nodes(config: &ExperimentConfig, node_counts: &[usize]) -> Result<SweepReport> {
    if node_counts.is_empty() {
        return Err(SimError::Config("sweep needs at least one node count".into()));
    }
    if node_counts.contains(&0) {
        return Err(SimError::Config("sweep node counts must be at least 1".into()));
    }
    let configs: Vec<ExperimentConfig> = node_counts.iter().map(|&n| config.with_nodes(n)).collect();
    for c in &configs {
        c.validate()?;
    }
    let jobs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|i| (0..config.trials).map(move |t| (i, t)))
        .collect();
    let results: Vec<TrialResult> = jobs
        .par_iter()
        .map(|&(i, t)| run_trial(&configs[i], t))
        .collect::<Result<_>>()?;

    let rows: Vec<SweepRow> = configs
        .iter()
        .zip(results.chunks(config.trials))
        .map(|(c, trials)| {
            let tc: Vec<f64> = trials.iter().map(|t| t.summary.t_complete as f64).collect();
            let tw: Vec<f64> = trials.iter().map(|t| t.summary.t_wait).collect();
            SweepRow {
                nodes: c.nodes,
                radius: c.resolved_radius(),
                mean_neighbors: trials.iter().map(|t| t.mean_neighbors).sum::<f64>() / trials.len() as f64,
                t_complete: interval_or_point(&tc),
                t_wait: interval_or_point(&tw),
                incomplete: trials.iter().any(|t| t.summary.incomplete),
            }
        })
        .collect();

    let mut fits = Vec::new();
    let mut diagnostic = None;
    let mut distinct: Vec<usize> = node_counts.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        diagnostic = Some("power-law fit skipped: need at least two distinct node counts".to_string());
    } else {
        for (metric, get) in [
            ("t_complete", (|r: &SweepRow| r.t_complete.mean) as fn(&SweepRow) -> f64),
            ("t_wait", |r: &SweepRow| r.t_wait.mean),
        ] {
            let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.nodes as f64, get(r))).collect();
            match fit_power_law(&pts) {
                Ok(fit) => fits.push(MetricFit { metric, fit }),
                Err(e) => diagnostic = Some(format!("power-law fit for {metric} skipped: {e}")),
            }
        }
    }
    Ok(SweepReport { rows, fits, diagnostic })
}

pub const SWEEP_HEADER: [&str; 8] = [
    "nodes",
    "radius",
    "t_complete_mean",
    "t_complete_ci_lo",
    "t_complete_ci_hi",
    "t_wait_mean",
    "t_wait_ci_lo",
    "t_wait_ci_hi",
];

pub fn write_sweep<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            r.nodes.to_string(),
            r.radius.to_string(),
            r.t_complete.mean.to_string(),
            r.t_complete.lo.to_string(),
            r.t_complete.hi.to_string(),
            r.t_wait.mean.to_string(),
            r.t_wait.lo.to_string(),
            r.t_wait.hi.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const FIT_HEADER: [&str; 4] = ["metric", "exponent", "coefficient", "r_squared"];

pub fn write_fits<W: Write>(out: W, fits: &[MetricFit]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FIT_HEADER)?;
    for f in fits {
        w.write_record([
            f.metric.to_string(),
            f.fit.exponent.to_string(),
            f.fit.coefficient.to_string(),
            f.fit.r_squared.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs a sweep and writes `sweep.csv`, `fit.csv` and `config.txt`.
pub fn run_sweep(config: &ExperimentConfig, node_counts: &[usize]) -> Result<SweepReport> {
    let report = sweep_nodes(config, node_counts)?;
    fs::create_dir_all(&config.out_dir)?;
    write_sweep(create(&config.out_dir, "sweep.csv")?, &report.rows)?;
    write_fits(create(&config.out_dir, "fit.csv")?, &report.fits)?;
    create(&config.out_dir, "config.txt")?.write_all(config.to_config_text().as_bytes())?;
    Ok(report)
}

pub const SCALING_HEADER: [&str; 4] = ["N", "optimal_n", "brute_force_n", "cost"];

pub fn write_scaling_law<W: Write>(out: W, rows: &[ScalingRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCALING_HEADER)?;
    for r in rows {
        w.write_record([
            r.total_clusters.to_string(),
            r.optimal_n.to_string(),
            r.brute_force_n.to_string(),
            r.cost.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
