//! `ddeperiodic`: certify, solve and classify periodic solutions of forced
//! delay systems from a TOML configuration.
//!
//! Exit codes: 0 when every check passes, 2 when the checks ran but a
//! certificate failed (or a step was refused), 1 on execution errors.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::RunConfig;
use report::Report;

#[derive(Debug, Parser)]
#[command(name = "ddeperiodic", version, about = "Periodic solutions of forced delay differential systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration (optional for `example`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for report.json and solution CSVs.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Overrides the seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Caps the number of worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Run `solve` even when the certificate fails.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Nonresonance certificate, multiplicity bound and h_k table.
    Analyze,
    /// Sampled inward-pointing checks on the domain boundary and the delay bound.
    VerifyDomain,
    /// Multi-start search for periodic solutions with a degree audit.
    Solve,
    /// Floquet multipliers and index of the linearised period map.
    Floquet,
    /// End-to-end run of the built-in singular example.
    Example,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::VerifyDomain => "verify-domain",
            Command::Solve => "solve",
            Command::Floquet => "floquet",
            Command::Example => "example",
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match (&cli.config, cli.command) {
        (Some(path), _) => config::load(path)?,
        (None, Command::Example) => config::example_default(),
        (None, _) => anyhow::bail!("--config is required for `{}`", cli.command.name()),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<i32> {
    if let Some(threads) = cli.threads {
        anyhow::ensure!(threads >= 1, "--threads must be at least 1");
        dde_periodic::exec::configure_threads(threads);
    }
    let cfg = load_config(cli)?;
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let name = cli.command.name();
    let mut report = Report::new(name, &cfg, cli.threads);
    let ctx = commands::RunContext {
        config: &cfg,
        out: &cli.out,
        force: cli.force,
    };
    commands::run(name, &ctx, &mut report)?;
    report.write(&cli.out)?;
    if let Some(h) = &report.headline {
        println!("{h}");
    }
    for m in &report.messages {
        println!("note: {m}");
    }
    println!(
        "{name}: {} (report in {})",
        serde_json::to_value(report.status)?.as_str().unwrap_or("unknown"),
        cli.out.join("report.json").display()
    );
    Ok(report.exit_code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
