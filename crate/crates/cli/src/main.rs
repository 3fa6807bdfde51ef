mod cmd;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cmd::calibrate::CalibrateArgs;
use cmd::detect::DetectArgs;
use cmd::evaluate::EvaluateArgs;
use cmd::generate::GenerateArgs;
use cmd::judge::JudgeCmdArgs;
use cmd::report::ReportArgs;
use cmd::Globals;
use config::RunConfig;
use error::Result;

#[derive(Parser)]
#[command(name = "wmbench", version)]
#[command(about = "Calibrate, evaluate and report LLM watermarks at matched detection strength")]
struct Cli {
    /// Base seed for sampling and judge ordering.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when omitted and the command allows it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON run configuration (model, sampler, detector, tokenizer, judge).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate from the toy model with a scheme file or `none`.
    Generate(GenerateArgs),
    /// Score texts for the watermark.
    Detect(DetectArgs),
    /// Search scheme parameters for a target detection rate and freeze them.
    Calibrate(CalibrateArgs),
    /// Run a task file under a frozen scheme and write a report.
    Evaluate(EvaluateArgs),
    /// Pairwise preference judging.
    Judge(JudgeCmdArgs),
    /// Merge reports into one table, grouped by strength.
    Report(ReportArgs),
}

fn run(cli: Cli) -> Result<()> {
    let g = Globals { seed: cli.seed, out: cli.out, config: RunConfig::load(cli.config.as_deref())? };
    match &cli.command {
        Command::Generate(a) => cmd::generate::run(a, &g),
        Command::Detect(a) => cmd::detect::run(a, &g),
        Command::Calibrate(a) => cmd::calibrate::run(a, &g),
        Command::Evaluate(a) => cmd::evaluate::run(a, &g),
        Command::Judge(a) => cmd::judge::run(a, &g),
        Command::Report(a) => cmd::report::run(a, &g),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
