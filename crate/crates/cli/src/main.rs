use std::path::PathBuf;
use std::process::ExitCode;

use ametric_fix::commands::{self, error_exit_code, Command};
use ametric_fix::ExperimentConfig;
use clap::{Args, Parser, Subcommand};

/// Check A-metric axioms, classify self-maps and run certified Picard iteration.
///
/// Logging goes to stderr and is set by AMETRIC_FIX_LOG (quiet, info or debug).
/// Stdout carries only the paths of the written reports.
#[derive(Parser)]
#[command(name = "ametric-fix", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Check the space axioms, symmetry and the triangle lemma.
    Axioms(Common),
    /// Classify the map and certify its contraction factor.
    Classify(Common),
    /// Run Picard iteration and write the trace.
    Solve(Common),
    /// Run every stage end to end.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Overrides sampling.seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn init_logging() -> Result<(), String> {
    let level = match std::env::var("AMETRIC_FIX_LOG").as_deref() {
        Err(_) | Ok("quiet") => log::LevelFilter::Off,
        Ok("info") => log::LevelFilter::Info,
        Ok("debug") => log::LevelFilter::Debug,
        Ok(other) => return Err(format!("AMETRIC_FIX_LOG must be quiet, info or debug, got {other:?}")),
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(msg) = init_logging() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let (command, args) = match cli.command {
        Sub::Axioms(a) => (Command::Axioms, a),
        Sub::Classify(a) => (Command::Classify, a),
        Sub::Solve(a) => (Command::Solve, a),
        Sub::Verify(a) => (Command::Verify, a),
    };
    let result = ExperimentConfig::load(&args.config, args.seed)
        .and_then(|cfg| commands::run(command, &cfg, &args.out_dir));
    match result {
        Ok(outcome) => {
            for path in &outcome.written {
                println!("{}", path.display());
            }
            if let Some(stage) = &outcome.report.failed_stage {
                eprintln!("{}: failed at {stage}", command.name());
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_exit_code(&e) as u8)
        }
    }
}
