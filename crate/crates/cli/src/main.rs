use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use redcohort_cli::commands;
use redcohort_cli::config::PipelineConfig;
use redcohort_cli::CliError;

#[derive(Parser)]
#[command(
    name = "redcohort",
    version,
    about = "Batch pipeline: detect self-reported diagnosis cohorts in forum dumps and profile them"
)]
struct Cli {
    /// Pipeline config file (flat `key = value` lines).
    #[arg(long, global = true, default_value = "pipeline.conf")]
    config: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Deterministic seed; `export` derives its secret from it when the
    /// config carries none.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Canonicalize the raw JSONL dumps into the columnar store.
    Ingest,
    /// Detect the cohort, apply exclusions, extract comorbidities.
    Detect,
    /// Fuse self-reports and backend predictions into user profiles.
    Profile,
    /// Score every extraction method against the gold annotations.
    Evaluate,
    /// Write the report tables.
    Report,
    /// Write a pseudonymized copy of the corpus.
    Export,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = PipelineConfig::load(&cli.config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Config(format!("threads: {e}")))?;
    pool.install(|| match cli.command {
        Command::Ingest => commands::ingest::run(&config),
        Command::Detect => commands::detect::run(&config),
        Command::Profile => commands::profile::run(&config),
        Command::Evaluate => commands::evaluate::run(&config),
        Command::Report => commands::report::run(&config),
        Command::Export => commands::export::run(&config, cli.seed),
    })
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return;
        }
        Err(e) => {
            let _ = e.print();
            std::process::exit(1);
        }
    };
    if let Err(e) = run(&cli) {
        if e.exit_code() == 3 {
            eprintln!("warning: {e}");
        } else {
            eprintln!("error: {e}");
        }
        std::process::exit(e.exit_code());
    }
}
