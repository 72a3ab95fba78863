use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use drap_core::experiment::{run_experiment, run_sweep, write_scaling_law};
use drap_core::lymph::{classify_scaling, scaling_exponent, scaling_table};
use drap_core::{ExperimentConfig, SimError};

const EXIT_ERROR: u8 = 1;
const EXIT_INCOMPLETE: u8 = 2;

#[derive(Parser)]
#[command(name = "drap", version, about = "Decentralized cluster-forming scheduler simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run repeated trials of one configuration.
    Run(ExperimentArgs),
    /// Run the experiment at several node counts and fit power laws.
    Sweep(ExperimentArgs),
    /// Tabulate optimal clusters per aggregation unit against system size.
    ScalingLaw(ScalingArgs),
}

#[derive(Args, Default)]
struct ExperimentArgs {
    /// Flat key = value file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// drap or fifo.
    #[arg(long)]
    scheduler: Option<String>,
    #[arg(long)]
    nodes: Option<String>,
    #[arg(long)]
    tasks: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Neighbor radius, or "auto" to keep the neighbor count constant.
    #[arg(long)]
    radius: Option<String>,
    /// Radius at 100 nodes when --radius is auto.
    #[arg(long)]
    base_radius: Option<String>,
    /// Ticks an idle cluster survives before dissociating.
    #[arg(long)]
    persistence: Option<String>,
    /// Ticks an under-staffed holder waits before giving its task back.
    #[arg(long)]
    starvation: Option<String>,
    /// normal or uniform.
    #[arg(long)]
    workload: Option<String>,
    /// shuffled, adversarial-desc or adversarial-asc.
    #[arg(long)]
    ordering: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    /// FIFO cluster size, or "workload" to draw sizes like task demands.
    #[arg(long)]
    fifo_cluster_size: Option<String>,
    #[arg(long)]
    max_ticks: Option<String>,
    /// Comma-separated node counts, e.g. "50,100,150".
    #[arg(long)]
    sweep: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// Scan the whole queue even after an exact fit.
    #[arg(long)]
    no_early_exit: bool,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig, SimError> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_config_text(&fs::read_to_string(path)?)?,
            None => ExperimentConfig::default(),
        };
        let flags = [
            ("scheduler", &self.scheduler),
            ("nodes", &self.nodes),
            ("tasks", &self.tasks),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("radius", &self.radius),
            ("base-radius", &self.base_radius),
            ("persistence", &self.persistence),
            ("starvation", &self.starvation),
            ("workload", &self.workload),
            ("ordering", &self.ordering),
            ("sigma", &self.sigma),
            ("fifo-cluster-size", &self.fifo_cluster_size),
            ("max-ticks", &self.max_ticks),
            ("sweep", &self.sweep),
            ("out", &self.out),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                config.apply(key, v)?;
            }
        }
        if self.no_early_exit {
            config.drap.early_exit_on_exact_fit = false;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct ScalingArgs {
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    beta: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    gamma: f64,
    /// Tabulate N = 10^1 .. 10^max_exponent.
    #[arg(long, default_value_t = 6)]
    max_exponent: u32,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn run(args: &ExperimentArgs) -> Result<u8, SimError> {
    let config = args.resolve()?;
    let report = run_experiment(&config)?;
    println!(
        "{} nodes={} tasks={} trials={} radius={:.4}",
        config.scheduler, config.nodes, config.tasks, config.trials, report.radius
    );
    match &report.aggregate {
        Some(a) => println!(
            "t_complete {:.2} ({:.2}, {:.2})  t_wait {:.2} ({:.2}, {:.2})  mu {:.4}",
            a.t_complete.mean, a.t_complete.lo, a.t_complete.hi, a.t_wait.mean, a.t_wait.lo, a.t_wait.hi,
            a.mu_mean.mean
        ),
        None => {
            let s = &report.trials[0].summary;
            println!("t_complete {}  t_wait {:.2}  mu {:.4}", s.t_complete, s.t_wait, s.mu_mean);
        }
    }
    println!("wrote {}", config.out_dir.display());
    Ok(if report.incomplete() {
        eprintln!("warning: some trials hit max-ticks before finishing");
        EXIT_INCOMPLETE
    } else {
        0
    })
}

fn sweep(args: &ExperimentArgs) -> Result<u8, SimError> {
    let config = args.resolve()?;
    let report = run_sweep(&config, &config.sweep)?;
    for r in &report.rows {
        println!(
            "nodes {:>5}  radius {:.4}  neighbors {:.2}  t_complete {:.2}  t_wait {:.2}",
            r.nodes, r.radius, r.mean_neighbors, r.t_complete.mean, r.t_wait.mean
        );
    }
    for f in &report.fits {
        println!(
            "{}: exponent {:.4}  coefficient {:.4}  r^2 {:.4}",
            f.metric, f.fit.exponent, f.fit.coefficient, f.fit.r_squared
        );
    }
    if let Some(d) = &report.diagnostic {
        eprintln!("{d}");
    }
    println!("wrote {}", config.out_dir.display());
    Ok(if report.incomplete() { EXIT_INCOMPLETE } else { 0 })
}

fn scaling_law(args: &ScalingArgs) -> Result<u8, SimError> {
    let totals: Vec<f64> = (1..=args.max_exponent).map(|e| 10f64.powi(e as i32)).collect();
    let rows = scaling_table(args.alpha, args.beta, args.gamma, &totals)?;
    fs::create_dir_all(&args.out)?;
    write_scaling_law(BufWriter::new(File::create(args.out.join("scaling_law.csv"))?), &rows)?;
    println!(
        "exponent {:.6}  regime {}",
        scaling_exponent(args.alpha, args.beta, args.gamma)?,
        classify_scaling(args.alpha, args.beta, args.gamma)?
    );
    println!("wrote {}", args.out.display());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_ERROR) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::ScalingLaw(a) => scaling_law(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
