//! Command-line surface of `itovolterra`: configuration, subcommands and
//! result persistence.
//!
//! Exit codes: 0 on success (a `Fails` verdict is a result, not an
//! error), 2 for configuration errors, 1 for anything else.

pub mod commands;
pub mod config;
pub mod output;

use clap::{Args, Parser, Subcommand};
use config::RunConfig;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] itovolterra::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "itovolterra", version, about = "Simulate Itô–Volterra integrals and check convergence criteria")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Overrides,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every criterion the kernel supports and write verdicts.json.
    Check,
    /// Simulate the integral on the eval ladder and write paths.csv.
    Simulate,
    /// Compare Monte Carlo mean-square distances with the isometry prediction.
    Isometry,
    /// Stochastic Fubini residuals at dt and dt/2.
    Fubini,
    /// Law of the iterated logarithm statistic of the Brownian ensemble.
    Lil,
    /// Built-in study: additive-counterexample, multiplicative, ou-log,
    /// ou-decay (alias exp-decay) or ou-constant.
    Example { name: String },
}

/// Flags applied on top of the config file.
#[derive(Debug, Args, Default)]
pub struct Overrides {
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub example: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long = "t-max", global = true)]
    pub t_max: Option<f64>,
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    #[arg(long, global = true)]
    pub q: Option<f64>,
    /// Worker threads; never changes the outputs.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub format: Option<Vec<String>>,
    /// Skip the summary table on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
}

impl Overrides {
    pub fn apply(&self, mut cfg: RunConfig) -> RunConfig {
        if let Some(v) = &self.example {
            cfg.kernel.example = Some(v.clone());
        }
        if let Some(v) = self.seed {
            cfg.ensemble.seed = v;
        }
        if let Some(v) = self.paths {
            cfg.ensemble.paths = v;
        }
        if let Some(v) = self.dt {
            cfg.grid.dt = v;
        }
        if let Some(v) = self.t_max {
            cfg.grid.t_max = v;
        }
        if let Some(v) = self.theta {
            cfg.kernel.theta = v;
        }
        if let Some(v) = self.q {
            cfg.kernel.q = v;
        }
        if let Some(v) = &self.out {
            cfg.output.dir = v.clone();
        }
        if let Some(v) = &self.format {
            cfg.output.formats = v.clone();
        }
        cfg
    }
}

impl Command {
    pub fn name(&self) -> String {
        match self {
            Command::Check => "check".into(),
            Command::Simulate => "simulate".into(),
            Command::Isometry => "isometry".into(),
            Command::Fubini => "fubini".into(),
            Command::Lil => "lil".into(),
            Command::Example { name } => format!("example {name}"),
        }
    }
}

/// What a finished run produced.
pub struct RunOutput {
    pub config: RunConfig,
    pub result: serde_json::Value,
    pub table: String,
    pub files: Vec<PathBuf>,
}

/// Runs one command with the effective config and commits its outputs.
pub fn execute(command: &Command, cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let started = output::unix_now();
    let outcome = match command {
        Command::Check => commands::cmd_check(cfg)?,
        Command::Simulate => commands::cmd_simulate(cfg)?,
        Command::Isometry => commands::cmd_isometry(cfg)?,
        Command::Fubini => commands::cmd_fubini(cfg)?,
        Command::Lil => commands::cmd_lil(cfg)?,
        Command::Example { name } => commands::cmd_example(cfg, name)?,
    };
    let manifest = output::manifest(cfg, &command.name(), started, outcome.artifacts.names());
    let files = outcome.artifacts.commit(&cfg.output.dir, &manifest)?;
    Ok(RunOutput {
        config: cfg.clone(),
        result: outcome.result,
        table: outcome.table,
        files,
    })
}

fn effective_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let base = match &cli.opts.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    Ok(cli.opts.apply(base))
}

/// Parses arguments, runs the command on a pool of `--workers` threads and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = effective_config(&cli).and_then(|cfg| {
        let mut pool = rayon::ThreadPoolBuilder::new();
        if let Some(w) = cli.opts.workers {
            if w == 0 {
                return Err(CliError::Config("--workers must be at least 1".into()));
            }
            pool = pool.num_threads(w);
        }
        let pool = pool.build().map_err(|e| CliError::Config(e.to_string()))?;
        pool.install(|| execute(&cli.command, &cfg))
    });
    match result {
        Ok(out) => {
            if cli.opts.quiet {
                return 0;
            }
            print!("{}", out.table);
            println!("wrote {} files to {}", out.files.len(), out.config.output.dir.display());
            0
        }
        Err(e) => {
            let msg = serde_json::json!({ "error": e.to_string(), "exit_code": e.exit_code() });
            eprintln!("{msg}");
            e.exit_code()
        }
    }
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
