use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use wmbench::judge::{judge_all, JudgePair, JudgeRun};
use wmbench::RunManifest;

use super::{Globals, JudgeArgs, OrderArg};
use crate::error::{CliError, Result};
use crate::io::{emit, read_jsonl, to_json_pretty};

#[derive(Debug, Args)]
pub struct JudgeCmdArgs {
    /// JSONL pairs {"id", "instruction", "ours", "baseline"}.
    #[arg(long)]
    pub pairs: PathBuf,
    #[command(flatten)]
    pub judge: JudgeArgs,
    #[arg(long, value_enum, default_value_t)]
    pub order: OrderArg,
    /// Concurrent judge calls.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_in_flight: u64,
}

#[derive(Serialize)]
struct JudgeFile {
    /// Absent when no pair could be judged.
    win_rate: Option<f64>,
    #[serde(flatten)]
    run: JudgeRun,
    manifest: RunManifest,
}

pub fn run(args: &JudgeCmdArgs, g: &Globals) -> Result<()> {
    let judge = args
        .judge
        .build(&g.config)?
        .ok_or_else(|| CliError::Usage("judge needs --mock, --endpoint or a judge section in --config".into()))?;
    let pairs: Vec<JudgePair> = read_jsonl(&args.pairs)?;
    if pairs.is_empty() {
        return Err(CliError::data(&args.pairs, "no pairs"));
    }
    let seed = g.seed.unwrap_or(0);
    let run = judge_all(&pairs, judge.as_ref(), args.order.into(), seed, args.max_in_flight as usize)?;
    for (id, reason) in &run.failures {
        log::warn!("{id}: {reason}");
    }
    if run.unparsed > 0 {
        log::warn!("{} responses could not be parsed and count as ties", run.unparsed);
    }
    let win_rate = run.win_rate().ok();
    match win_rate {
        Some(w) => log::info!("win rate {w:.4} over {} verdicts", run.verdicts.len()),
        None => log::error!("no pair could be judged"),
    }
    let manifest = RunManifest::new("judge").seed("order", seed);
    emit(g.out.as_deref(), &to_json_pretty(&JudgeFile { win_rate, run, manifest })?)
}
