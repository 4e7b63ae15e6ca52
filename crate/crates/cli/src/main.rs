//! `resonance`: resonances, field sweeps, crossing classification and
//! survival amplitudes of the two-delta Stark model from a config file.

mod commands;
mod config;
mod report;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::{ConfigError, Format, RunConfig, Settings};
use report::Report;

#[derive(Parser)]
#[command(name = "resonance", version, about = "Stark resonances of an asymmetric double delta well")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// The two resonances at `model.field`, with residues and |D| residuals
    Resonances(Args),
    /// Both resonance branches over the [sweep] field grid
    Sweep(Args),
    /// Crossing type, critical field and Agmon lengths
    Classify(Args),
    /// Survival amplitude of the Gaussian [state] over the [time] grid
    Survival(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Config file: `key = value` lines under [model], [state], [sweep], [time], [output],
    /// or a JSON output of an earlier run
    #[arg(long)]
    config: PathBuf,
    /// Write JSON instead of CSV
    #[arg(long)]
    json: bool,
    /// Output file (standard output if absent)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for `sweep`
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Override a setting, e.g. `--set model.field=0.21`
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
}

fn load(args: &Args) -> Result<RunConfig, ConfigError> {
    let mut settings = Settings::load(&args.config)?;
    for s in &args.set {
        settings.set(s)?;
    }
    let mut cfg = RunConfig::from_settings(&settings)?;
    if args.json {
        cfg.output.format = Format::Json;
    }
    if let Some(out) = &args.out {
        cfg.output.path = Some(out.clone());
    }
    if args.jobs == 0 {
        return Err(ConfigError { origin: None, message: "--jobs must be at least 1".into() });
    }
    Ok(cfg)
}

fn emit(name: &str, cfg: &RunConfig, report: &Report) -> Result<()> {
    let mut buffer = Vec::new();
    match cfg.output.format {
        Format::Csv => report::write_csv(&mut buffer, name, cfg, report)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut buffer, &report::to_json(name, cfg, report))?;
            buffer.push(b'\n');
        }
    }
    match &cfg.output.path {
        Some(path) => fs::write(path, &buffer).with_context(|| format!("cannot write {}", path.display())),
        None => io::stdout().write_all(&buffer).context("cannot write to standard output"),
    }
}

fn run(command: Command) -> Result<ExitCode> {
    let (name, args) = match &command {
        Command::Resonances(a) => ("resonances", a),
        Command::Sweep(a) => ("sweep", a),
        Command::Classify(a) => ("classify", a),
        Command::Survival(a) => ("survival", a),
    };
    let cfg = load(args)?;
    let (report, failure) = match command {
        Command::Resonances(_) => (commands::resonances(&cfg)?, None),
        Command::Sweep(_) => (commands::sweep(&cfg, args.jobs)?, None),
        Command::Classify(_) => {
            let c = commands::classify(&cfg)?;
            (c.report, c.failure)
        }
        Command::Survival(_) => (commands::survival(&cfg)?, None),
    };
    emit(name, &cfg, &report)?;
    if let Some(msg) = failure {
        eprintln!("error: {msg}");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RESONANCE_LOG", "warn")).init();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) if e.downcast_ref::<ConfigError>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
