//! `recgan`: command-line driver for the recommendation GAN pipeline.

mod commands;
mod config;
mod manifest;
mod selfcheck;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{RunConfig, Settings};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<recgan::Error> for CliError {
    fn from(e: recgan::Error) -> Self {
        use recgan::Error as E;
        match e {
            E::Io(_) | E::Divergence { .. } | E::UndefinedMetric { .. } => CliError::runtime(e.to_string()),
            E::Validation(_) | E::Config(_) | E::CodeOverflow { .. } | E::Format(_) | E::Contract(_) => {
                CliError::validation(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::runtime(format!("i/o error: {e}"))
    }
}

#[derive(Parser, Debug)]
#[command(name = "recgan", version, about = "Coupled GAN recommendations from clickstream logs")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Working directory for artifacts (paths.workdir).
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,
    /// Override any config key, e.g. `--set gan.z_dim=16`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Worker threads, 0 for all cores (runtime.workers).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Run single-threaded (runtime.deterministic).
    #[arg(long, global = true)]
    deterministic: bool,
    /// Report output on stdout: text or json (report.format).
    #[arg(long, global = true)]
    format: Option<String>,
    /// Training epochs (gan.epochs).
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Training batch size (gan.batch_size).
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    /// Run seed; every stage seed derives from it (seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Checkpoint interval in epochs, 0 disables (gan.checkpoint_every).
    #[arg(long, global = true)]
    checkpoint_every: Option<usize>,
    /// Optimizer step limit (gan.max_steps).
    #[arg(long, global = true)]
    max_steps: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Write a synthetic event log and catalog with planted preferences.
    Synth,
    /// Segment visitors and build (first, second) interaction sets.
    Ingest,
    /// Arithmetic-code the interaction matrices.
    Encode,
    /// Train the coupled GAN on the coded dataset.
    Train,
    /// Draw and binarize generator realizations.
    Sample,
    /// Decode realizations back to item sets.
    Decode,
    /// Conversion rate and category similarity of the realizations.
    Eval,
    /// Matched-density random null trials.
    Nulltest,
    /// Merge metrics and null trials into the report.
    Report,
    /// Codec round-trip, gradient-check and metric-oracle suites.
    Selfcheck,
}

fn settings(cli: &Cli) -> Result<Settings, CliError> {
    let mut s = Settings::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
        s.apply_text(&text, &path.display().to_string())?;
    }
    for kv in &cli.set {
        s.apply_assignment(kv)?;
    }
    let flags: [(&str, Option<String>); 8] = [
        ("paths.workdir", cli.workdir.as_ref().map(|p| p.display().to_string())),
        ("runtime.workers", cli.workers.map(|v| v.to_string())),
        ("runtime.deterministic", cli.deterministic.then(|| "true".to_string())),
        ("report.format", cli.format.clone()),
        ("gan.epochs", cli.epochs.map(|v| v.to_string())),
        ("gan.batch_size", cli.batch_size.map(|v| v.to_string())),
        ("seed", cli.seed.map(|v| v.to_string())),
        ("gan.checkpoint_every", cli.checkpoint_every.map(|v| v.to_string())),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            s.set(k, &v)?;
        }
    }
    if let Some(m) = cli.max_steps {
        s.set("gan.max_steps", &m.to_string())?;
    }
    Ok(s)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = RunConfig::from_settings(settings(cli)?)?;
    let threads = if cfg.deterministic { 1 } else { cfg.workers };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::runtime(format!("cannot start worker pool: {e}")))?;
    if cli.command == Command::Selfcheck {
        return selfcheck::run(cfg.seed);
    }
    std::fs::create_dir_all(&cfg.workdir)?;
    match cli.command {
        Command::Synth => commands::synth(&cfg),
        Command::Ingest => commands::ingest(&cfg),
        Command::Encode => commands::encode(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Sample => commands::sample(&cfg),
        Command::Decode => commands::decode(&cfg),
        Command::Eval => commands::eval(&cfg),
        Command::Nulltest => commands::nulltest(&cfg),
        Command::Report => commands::report(&cfg),
        Command::Selfcheck => unreachable!(),
    }?;
    std::fs::write(cfg.artifact(manifest::CONFIG_ECHO), cfg.settings.to_text())?;
    manifest::write(&cfg.workdir)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("recgan: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
