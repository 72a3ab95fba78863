//! Flat `key = value` experiment configuration files.
//!
//! Keys use the command-line flag names without the leading dashes
//! (`nodes = 200`, `radius = auto`). Underscores and dashes are
//! interchangeable. Blank lines and lines starting with `#` are ignored.

use std::path::PathBuf;

use crate::error::{Result, SimError};
use crate::experiment::ExperimentConfig;

/// Splits config text into `(key, value)` pairs in file order.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(SimError::Config(format!("line {}: expected 'key = value', got '{line}'", lineno + 1)));
        };
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(SimError::Config(format!("line {}: empty key", lineno + 1)));
        }
        pairs.push((key, v.trim().to_string()));
    }
    Ok(pairs)
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| SimError::Config(format!("{key}: cannot parse '{value}'")))
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(SimError::Config(format!("{key}: expected true or false, got '{value}'"))),
    }
}

/// Parses a comma-separated node list such as `50,100,150`.
pub fn parse_node_list(value: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num::<usize>("sweep", s))
        .collect()
}

impl ExperimentConfig {
    /// Sets one option by its flag name.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key.replace('_', "-").as_str() {
            "scheduler" => self.scheduler = value.parse()?,
            "nodes" => self.nodes = num(key, value)?,
            "tasks" => self.tasks = num(key, value)?,
            "trials" => self.trials = num(key, value)?,
            "seed" => self.base_seed = num(key, value)?,
            "radius" => self.radius = value.parse()?,
            "base-radius" => self.base_radius = num(key, value)?,
            "persistence" => self.drap.cluster_persistence = num(key, value)?,
            "starvation" => self.drap.starvation_timeout = num(key, value)?,
            "early-exit" => self.drap.early_exit_on_exact_fit = boolean(key, value)?,
            "no-early-exit" => self.drap.early_exit_on_exact_fit = !boolean(key, value)?,
            "workload" => self.workload.distribution = value.parse()?,
            "ordering" => self.workload.ordering = value.parse()?,
            "sigma" => self.workload.sigma = num(key, value)?,
            "time-per-cpu" => self.workload.time_per_cpu = num(key, value)?,
            "cpu-min" => self.workload.cpu_min = num(key, value)?,
            "cpu-max" => self.workload.cpu_max = num(key, value)?,
            "fifo-cluster-size" => self.fifo_sizing = value.parse()?,
            "max-ticks" => self.max_ticks = num(key, value)?,
            "sweep" => self.sweep = parse_node_list(value)?,
            "out" => self.out_dir = PathBuf::from(value),
            other => return Err(SimError::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Builds a configuration from defaults overlaid with the file's pairs.
    pub fn from_config_text(text: &str) -> Result<Self> {
        let mut config = ExperimentConfig::default();
        for (k, v) in parse_pairs(text)? {
            config.apply(&k, &v)?;
        }
        Ok(config)
    }

    /// Every option in config-file form, plus the resolved radius as a
    /// comment.
    pub fn to_config_text(&self) -> String {
        let sweep: Vec<String> = self.sweep.iter().map(usize::to_string).collect();
        let lines = [
            format!("scheduler = {}", self.scheduler),
            format!("nodes = {}", self.nodes),
            format!("tasks = {}", self.tasks),
            format!("trials = {}", self.trials),
            format!("seed = {}", self.base_seed),
            format!("radius = {}", self.radius),
            format!("base-radius = {}", self.base_radius),
            format!("# resolved neighbor radius: {}", self.resolved_radius()),
            format!("persistence = {}", self.drap.cluster_persistence),
            format!("starvation = {}", self.drap.starvation_timeout),
            format!("early-exit = {}", self.drap.early_exit_on_exact_fit),
            format!("workload = {}", self.workload.distribution),
            format!("ordering = {}", self.workload.ordering),
            format!("sigma = {}", self.workload.sigma),
            format!("time-per-cpu = {}", self.workload.time_per_cpu),
            format!("cpu-min = {}", self.workload.cpu_min),
            format!("cpu-max = {}", self.workload.cpu_max),
            format!("fifo-cluster-size = {}", self.fifo_sizing),
            format!("max-ticks = {}", self.max_ticks),
            format!("sweep = {}", sweep.join(",")),
            format!("out = {}", self.out_dir.display()),
        ];
        let mut s = lines.join("\n");
        s.push('\n');
        s
    }
}
