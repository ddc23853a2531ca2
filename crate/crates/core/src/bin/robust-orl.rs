use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use robust_orl::harness::{
    mm_check, read_csv, run_experiment, summarize, write_csv, write_summary, ExperimentConfig, MmCheckConfig, Task,
};
use robust_orl::Result;

#[derive(Parser)]
#[command(name = "robust-orl", version, about = "Robust offline RL experiments on tabular MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Off-policy evaluation sweep; writes one CSV row per method, grid point and replicate.
    Ope(ExperimentArgs),
    /// Offline policy optimization sweep; rows carry regret.
    Opo(ExperimentArgs),
    /// Median-of-means versus sample mean on heavy-tailed draws.
    MmCheck(MmArgs),
    /// Summarize a results CSV by method and grid point.
    Report {
        /// Results CSV; `-` reads standard input.
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Every flag overrides the config-file key of the same name.
#[derive(Args)]
#[command(rename_all = "snake_case")]
struct ExperimentArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    df: Option<String>,
    #[arg(long)]
    kappa: Option<String>,
    #[arg(long = "K", alias = "k")]
    k: Option<String>,
    #[arg(long)]
    q: Option<String>,
    #[arg(long)]
    n_episodes: Option<String>,
    #[arg(long)]
    horizon: Option<String>,
    #[arg(long)]
    replicates: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    features: Option<String>,
    #[arg(long)]
    ridge: Option<String>,
    #[arg(long)]
    iterations: Option<String>,
    #[arg(long)]
    scale_exponent: Option<String>,
    #[arg(long)]
    trim: Option<String>,
    #[arg(long)]
    dm_base: Option<String>,
    #[arg(long)]
    vm_base: Option<String>,
    #[arg(long)]
    timing: Option<String>,
}

impl ExperimentArgs {
    fn overrides(&self) -> Vec<(&'static str, &String)> {
        let pairs = [
            ("env", &self.env),
            ("methods", &self.methods),
            ("df", &self.df),
            ("kappa", &self.kappa),
            ("K", &self.k),
            ("q", &self.q),
            ("n_episodes", &self.n_episodes),
            ("horizon", &self.horizon),
            ("replicates", &self.replicates),
            ("seed", &self.seed),
            ("output", &self.output),
            ("gamma", &self.gamma),
            ("epsilon", &self.epsilon),
            ("features", &self.features),
            ("ridge", &self.ridge),
            ("iterations", &self.iterations),
            ("scale_exponent", &self.scale_exponent),
            ("trim", &self.trim),
            ("dm_base", &self.dm_base),
            ("vm_base", &self.vm_base),
            ("timing", &self.timing),
        ];
        pairs.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k, v))).collect()
    }

    fn config(&self, task: Task) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path, task)?,
            None => ExperimentConfig::defaults(task),
        };
        // the subcommand decides the task
        cfg.task = task;
        for (key, value) in self.overrides() {
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct MmArgs {
    #[arg(long, default_value_t = 2.0)]
    df: f64,
    #[arg(long, default_value_t = 1024)]
    n: usize,
    #[arg(long = "K", alias = "k", default_value_t = 8)]
    k: usize,
    #[arg(long, default_value_t = 1000)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn open_output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) if p.as_os_str() != "-" => Box::new(BufWriter::new(File::create(p)?)),
        _ => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ope(args) => experiment(&args, Task::Ope),
        Command::Opo(args) => experiment(&args, Task::Opo),
        Command::MmCheck(args) => {
            let report = mm_check(&MmCheckConfig {
                df: args.df,
                n: args.n,
                k: args.k,
                replicates: args.replicates,
                seed: args.seed,
            })?;
            println!("rmse_sample_mean={}", report.rmse_sample_mean);
            println!("rmse_mm={}", report.rmse_mm);
            println!("ratio={}", report.ratio());
            Ok(())
        }
        Command::Report { input, output } => {
            let records = if input.as_os_str() == "-" {
                read_csv(io::stdin().lock())?
            } else {
                read_csv(BufReader::new(File::open(&input)?))?
            };
            let rows = summarize(&records)?;
            let mut out = open_output(output.as_ref())?;
            write_summary(&rows, &mut out)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn experiment(args: &ExperimentArgs, task: Task) -> Result<()> {
    let cfg = args.config(task)?;
    log::info!("running {:?} on {} with {} replicates", task, cfg.env, cfg.replicates);
    let records = run_experiment(&cfg)?;
    let mut out = open_output(cfg.output.as_ref())?;
    write_csv(&records, &mut out)?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
