//! `intersent` — run templated inter-group sentiment surveys against LLM
//! backends, score the answers, and correlate the results with human polls.
//!
//! Exit codes: 0 success, 1 partial results or runtime failure, 2
//! configuration error (including a locked output directory).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use intersent_cli::config::RunConfig;
use intersent_cli::orchestrate::{
    cmd_report, cmd_run, cmd_score, cmd_validate_config, AnalyzerOverride, CmdError, Outcome,
};

#[derive(Parser)]
#[command(name = "intersent", version, about = "Inter-group sentiment surveys for LLM backends")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a run end to end: query, score, aggregate, correlate, report.
    Run {
        /// Run configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(long)]
        outdir: Option<PathBuf>,
        /// Override the configured worker count.
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Re-score an existing run's transcripts and rebuild its artifacts.
    Score {
        /// Run id under the output directory.
        #[arg(long)]
        run: String,
        /// Output directory holding the run.
        #[arg(long, default_value = "runs")]
        outdir: PathBuf,
        /// Analyzer id: the run's configured analyzer, the builtin, or a
        /// new id defined by --analyzer-cmd.
        #[arg(long)]
        analyzer: Option<String>,
        /// External analyzer command (argv); requires --analyzer.
        #[arg(long = "analyzer-cmd", num_args = 1.., allow_hyphen_values = true)]
        analyzer_cmd: Option<Vec<String>>,
    },
    /// Rebuild grid.csv and report.md from the matrices on disk.
    Report {
        /// Run id under the output directory.
        #[arg(long)]
        run: String,
        /// Output directory holding the run.
        #[arg(long, default_value = "runs")]
        outdir: PathBuf,
    },
    /// Check a configuration file without running anything.
    ValidateConfig {
        /// Run configuration (TOML).
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            outdir,
            parallelism,
        } => RunConfig::load(&config)
            .map_err(|message| CmdError::Config { message })
            .and_then(|loaded| {
                let run_dir = outdir
                    .clone()
                    .unwrap_or_else(|| loaded.output_dir.clone())
                    .join(&loaded.run_id);
                cmd_run(loaded, outdir.as_deref(), parallelism)
                    .map(|outcome| (outcome, format!("run artifacts written to {}", run_dir.display())))
            }),
        Command::Score {
            run,
            outdir,
            analyzer,
            analyzer_cmd,
        } => {
            let override_ = match (analyzer, analyzer_cmd) {
                (None, None) => Ok(AnalyzerOverride::None),
                (Some(id), None) => Ok(AnalyzerOverride::Id(id)),
                (Some(id), Some(argv)) => Ok(AnalyzerOverride::Command { id, argv }),
                (None, Some(_)) => Err(CmdError::Config {
                    message: "--analyzer-cmd requires --analyzer <id> to name the analyzer"
                        .to_string(),
                }),
            };
            override_.and_then(|o| {
                cmd_score(&outdir, &run, o).map(|outcome| {
                    (outcome, format!("re-scored run {run} in {}", outdir.join(&run).display()))
                })
            })
        }
        Command::Report { run, outdir } => cmd_report(&outdir, &run).map(|outcome| {
            (outcome, format!("report rebuilt for run {run} in {}", outdir.join(&run).display()))
        }),
        Command::ValidateConfig { config } => {
            return match cmd_validate_config(&config) {
                Ok(()) => {
                    println!("configuration OK: {}", config.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_code(e.exit_code())
                }
            };
        }
    };

    match result {
        Ok((Outcome::Complete, message)) => {
            println!("{message}");
            ExitCode::SUCCESS
        }
        Ok((Outcome::Partial { reason }, message)) => {
            println!("{message}");
            eprintln!("partial results: {reason}");
            exit_code(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(e.exit_code())
        }
    }
}

fn exit_code(code: i32) -> ExitCode {
    ExitCode::from(u8::try_from(code).unwrap_or(1))
}
