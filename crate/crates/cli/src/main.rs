//! `contam` — contamination audit pipelines over a single run directory.
//!
//! Exit codes: 0 success; 1 partial failure (some questions unresolved or
//! dropped, report still valid); 2 configuration or usage error.

mod commands;
mod wiring;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "contam", version, about = "Benchmark contamination audit toolkit")]
struct Cli {
    /// Run configuration file.
    #[arg(long, global = true, default_value = "config.toml")]
    config: PathBuf,
    /// Run directory for artifacts (default: runs/<run-id>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw the stratified sample and write sample.json.
    Sample {
        /// Questions per subject (overrides the config).
        #[arg(long)]
        per_subject: Option<u32>,
        /// Sampling seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Web-overlap detection: search, judge, persist verdicts.
    Exp1 {
        /// Sample file (default: <out>/sample.json).
        #[arg(long)]
        sample: Option<PathBuf>,
        /// Overlap threshold (overrides the config).
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Paraphrase / indirect-reference diagnostic.
    Exp2 {
        #[command(subcommand)]
        action: Exp2Action,
    },
    /// TS-Guessing probes (Option Mask and Word Mask).
    Exp3 {
        #[command(subcommand)]
        action: Exp3Action,
    },
    /// Render tables, plot data, and the convergence summary.
    Report {
        /// Run directory holding artifacts (default: <out>).
        #[arg(long)]
        runs: Option<PathBuf>,
    },
    /// Move the replay cache between machines.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Subcommand)]
enum Exp2Action {
    /// Draw the exclusive sample and generate both variants per question.
    Generate {
        /// Sample to exclude (default: <out>/sample.json).
        #[arg(long)]
        sample: Option<PathBuf>,
    },
    /// Evaluate models on all three question forms.
    Evaluate {
        /// Comma-separated model names (default: every configured model).
        #[arg(long)]
        models: Option<String>,
    },
    /// Compute the accuracy-drop tables from persisted records.
    Report,
}

#[derive(Subcommand)]
enum Exp3Action {
    /// Run both probes for every (question, model) pair.
    Run {
        /// Sample file (default: <out>/sample.json).
        #[arg(long)]
        sample: Option<PathBuf>,
        /// Comma-separated model names (default: every configured model).
        #[arg(long)]
        models: Option<String>,
        /// Mask-choice seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Aggregate probe rates by model and category.
    Report,
}

#[derive(Subcommand)]
enum CacheAction {
    /// Write every cache entry to a JSONL file.
    Export { file: PathBuf },
    /// Merge entries from a JSONL export (last writer wins).
    Import { file: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let mut config = contam_core::config::load_config(&cli.config)
        .map_err(|e| anyhow::anyhow!(e.to_string()))?;
    match cli.command {
        Command::Sample { per_subject, seed } => {
            if let Some(v) = per_subject {
                config.per_subject = v;
            }
            if let Some(v) = seed {
                config.seed = v;
            }
            commands::sample(&config, cli.out.as_deref())
        }
        Command::Exp1 { sample, threshold } => {
            if let Some(v) = threshold {
                if !(v > 0.0 && v <= 1.0) {
                    anyhow::bail!("threshold must be in (0,1]");
                }
                config.threshold = v;
            }
            commands::exp1(&config, cli.out.as_deref(), sample.as_deref())
        }
        Command::Exp2 { action } => match action {
            Exp2Action::Generate { sample } => {
                commands::exp2_generate(&config, cli.out.as_deref(), sample.as_deref())
            }
            Exp2Action::Evaluate { models } => {
                commands::exp2_evaluate(&config, cli.out.as_deref(), models.as_deref())
            }
            Exp2Action::Report => commands::exp2_report(&config, cli.out.as_deref()),
        },
        Command::Exp3 { action } => match action {
            Exp3Action::Run { sample, models, seed } => {
                if let Some(v) = seed {
                    config.seed = v;
                }
                commands::exp3_run(&config, cli.out.as_deref(), sample.as_deref(), models.as_deref())
            }
            Exp3Action::Report => commands::exp3_report(&config, cli.out.as_deref()),
        },
        Command::Report { runs } => commands::report(&config, cli.out.as_deref(), runs.as_deref()),
        Command::Cache { action } => match action {
            CacheAction::Export { file } => commands::cache_export(&config, &file),
            CacheAction::Import { file } => commands::cache_import(&config, &file),
        },
    }
}
