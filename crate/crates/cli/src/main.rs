use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;
use xssd_cli::error::EXIT_VALIDATION;
use xssd_cli::{pipeline, render, CliError, Overrides};

/// Fit, compare and interpret supervised semantic gradients across
/// aligned embedding spaces.
#[derive(Debug, Parser)]
#[command(name = "xssd", version)]
struct Cli {
    /// Run configuration (for `synth`, a generator spec).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Cluster even when the difference test is not significant.
    #[arg(long, global = true)]
    force: bool,

    /// Worker threads; defaults to all cores.
    #[arg(long, env = "XSSD_THREADS", global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one gradient per language and dimension.
    Fit,
    /// Alignment test, difference test and bootstrap interval per pair.
    Compare,
    /// Cluster vocabulary around both poles of each difference gradient.
    Cluster,
    /// Write a synthetic pair of spaces and lexicons with known gradients.
    Synth,
    /// Render tables from the reports in the output directory.
    Report,
}

fn run(cli: Cli) -> Result<i32, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    }
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
    };
    let need_config = || {
        cli.config
            .clone()
            .ok_or_else(|| CliError::Validation("--config is required".into()))
    };
    let outcome = match cli.command {
        Command::Fit => pipeline::fit(&pipeline::load_config(&need_config()?, &overrides)?)?,
        Command::Compare => {
            pipeline::compare(&pipeline::load_config(&need_config()?, &overrides)?)?
        }
        Command::Cluster => pipeline::cluster(
            &pipeline::load_config(&need_config()?, &overrides)?,
            cli.force,
        )?,
        Command::Synth => {
            let (path, _) = pipeline::synth(&need_config()?, &overrides)?;
            println!("{}", path.display());
            return Ok(0);
        }
        Command::Report => {
            let dir = match (&cli.out, &cli.config) {
                (Some(out), _) => out.clone(),
                (None, Some(cfg)) => pipeline::load_config(cfg, &overrides)?.output,
                (None, None) => {
                    return Err(CliError::Validation(
                        "report needs --out or --config".into(),
                    ))
                }
            };
            print!("{}", render::report(&dir)?);
            return Ok(0);
        }
    };
    println!(
        "{}",
        outcome
            .output
            .join(format!("manifest_{}.json", outcome.manifest.command))
            .display()
    );
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let code = match Cli::try_parse() {
        Ok(cli) => run(cli).unwrap_or_else(|e| {
            error!("{e}");
            e.exit_code()
        }),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_VALIDATION
            } else {
                0
            }
        }
    };
    ExitCode::from(code as u8)
}
