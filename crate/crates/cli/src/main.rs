use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;

/// Pronunciation analysis toolkit: synthesize, augment, extract, train,
/// evaluate, diagnose and serve.
#[derive(Debug, Parser)]
#[command(name = "arpa", version)]
struct Cli {
    /// TOML configuration file (pipeline and service settings).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a labeled synthetic corpus and its manifest.
    Synth(commands::SynthArgs),
    /// Grow each letter to a target count with pitch-shifted copies.
    Augment(commands::AugmentArgs),
    /// Write mel and MFCC feature files (and optionally images) per clip.
    Extract(commands::ExtractArgs),
    /// Train one model per letter.
    Train(commands::TrainArgs),
    /// Cross-validate one or more model kinds and write a report.
    Eval(commands::EvalArgs),
    /// Classify one recording. Exit 0 for correct, 1 for incorrect.
    Diagnose(commands::DiagnoseArgs),
    /// Run the HTTP service.
    Serve(commands::ServeArgs),
}

/// Failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

fn root_cause(e: &arpa_core::Error) -> &arpa_core::Error {
    match e {
        arpa_core::Error::Sample { source, .. } => root_cause(source),
        other => other,
    }
}

impl From<arpa_core::Error> for CliError {
    fn from(e: arpa_core::Error) -> Self {
        use arpa_core::Error as E;
        let code = match root_cause(&e) {
            E::SilenceOnly | E::ClipTooShort { .. } => 4,
            E::SingleClass
            | E::KTooLarge { .. }
            | E::DimensionMismatch { .. }
            | E::StratumTooSmall { .. }
            | E::EmptyGroup(_) => 3,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<arpa_core::config::ArpaConfig, CliError> {
    let mut cfg = match path {
        Some(p) => arpa_core::config::ArpaConfig::load(p)?,
        None => Default::default(),
    };
    cfg.service.apply_env(|k| std::env::var(k).ok());
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let result = load_config(cli.config.as_deref()).and_then(|cfg| match cli.command {
        Command::Synth(a) => commands::synth(&cfg, a),
        Command::Augment(a) => commands::augment(&cfg, a),
        Command::Extract(a) => commands::extract(&cfg, a),
        Command::Train(a) => commands::train(&cfg, a),
        Command::Eval(a) => commands::eval(&cfg, a),
        Command::Diagnose(a) => commands::diagnose(&cfg, a),
        Command::Serve(a) => commands::serve(cfg, a),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
