use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use seqeval::config::{ExperimentConfig, RunOverrides};
use seqeval::runner;

#[derive(Parser)]
#[command(
    name = "seqeval",
    about = "Sequential evaluation of offline RL algorithms as a function of available data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Experiment configuration file (TOML).
    #[arg(long)]
    config: String,
}

#[derive(Subcommand)]
enum Command {
    /// Build the dataset tiers (and the environment file) declared in the
    /// config.
    MakeDatasets {
        #[command(flatten)]
        config: ConfigArg,
        /// Where to write dataset files; overrides the config.
        #[arg(long)]
        out_dir: Option<String>,
    },
    /// Run the experiment matrix: algorithm x dataset x seed, optionally
    /// swept over replay ratios.
    Run {
        #[command(flatten)]
        config: ConfigArg,
        /// Comma-separated seed list; overrides the config.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Comma-separated replay ratios to sweep, e.g. 0.25,1,4.
        #[arg(long, value_delimiter = ',')]
        rr: Option<Vec<f64>>,
        /// Training scheme.
        #[arg(long, value_parser = ["seqeval", "minibatch"])]
        mode: Option<String>,
        /// Online fine-tuning steps after the offline data is exhausted.
        #[arg(long)]
        finetune_steps: Option<usize>,
        /// Worker threads for matrix cells.
        #[arg(long)]
        workers: Option<usize>,
        /// Where to write curves and reports; overrides the config.
        #[arg(long)]
        out_dir: Option<String>,
    },
    /// Summarize a run directory into comparison tables.
    Report {
        /// Directory holding curve files from `run`.
        run_dir: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> seqeval::Result<ExitCode> {
    match cli.command {
        Command::MakeDatasets { config, out_dir } => {
            let cfg = ExperimentConfig::load(&config.config)?;
            let written = runner::cmd_make_datasets(&cfg, out_dir.as_deref())?;
            for path in written {
                println!("wrote {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            config,
            seeds,
            rr,
            mode,
            finetune_steps,
            workers,
            out_dir,
        } => {
            let cfg = ExperimentConfig::load(&config.config)?;
            let overrides = RunOverrides {
                seeds,
                replay_ratios: rr,
                mode,
                finetune_steps,
                workers,
                out_dir,
            };
            let outcome = runner::cmd_run(&cfg, &overrides)?;
            for result in &outcome.results {
                match &result.outcome {
                    Ok(run) => println!(
                        "ok {} ({} points, {} grad steps)",
                        result.file_name,
                        run.curve.points.len(),
                        run.report.total_grad_steps
                    ),
                    Err(e) => eprintln!("failed {}: {e}", result.file_name),
                }
            }
            println!(
                "{} of {} cells completed; outputs in {}",
                outcome.results.len() - outcome.failed,
                outcome.results.len(),
                outcome.out_dir.display()
            );
            if outcome.failed > 0 {
                Ok(ExitCode::FAILURE)
            } else {
                Ok(ExitCode::SUCCESS)
            }
        }
        Command::Report { run_dir } => {
            let text = runner::cmd_report(&run_dir)?;
            print!("{text}");
            Ok(ExitCode::SUCCESS)
        }
    }
}
