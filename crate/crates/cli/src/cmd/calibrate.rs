use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::Serialize;
use wmbench::calibrate::{
    calibrate, trace_to_csv, unwatermarked_negatives, CalibrationOutcome, GridSpec, StrengthProtocol,
    StrengthTarget, DEFAULT_TOLERANCE,
};
use wmbench::wmgen::{Family, Provenance, SchemeDocument};
use wmbench::RunManifest;

use super::{load_prompts, Globals};
use crate::error::{CliError, Result};
use crate::io::{require_out, sibling, to_json_pretty, write_atomic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Hard,
    Soft,
    Gpt,
    V2,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Hard => Family::Hard,
            FamilyArg::Soft => Family::Soft,
            FamilyArg::Gpt => Family::Gpt,
            FamilyArg::V2 => Family::V2,
        }
    }
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    /// Detection rate the frozen scheme must reach on the corpus.
    #[arg(long)]
    pub target_tpr: f64,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    /// Comma-separated green-list fractions to search.
    #[arg(long, value_delimiter = ',', required = true)]
    pub grid_gamma: Vec<f64>,
    /// Comma-separated logit biases to search (ignored by the hard family).
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    pub grid_delta: Vec<f64>,
    /// Reference point used to break ties between equally good grid points.
    #[arg(long, default_value_t = 0.25)]
    pub default_gamma: f64,
    #[arg(long, default_value_t = 2.0)]
    pub default_delta: f64,
    /// JSONL prompts.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Key mixed into every green-list hash.
    #[arg(long, default_value_t = 0)]
    pub hash_key: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_new_tokens: Option<u64>,
    /// Tune only the best N feasible grid points.
    #[arg(long)]
    pub max_candidates: Option<usize>,
    /// Skip unwatermarked negatives; TNR and GM columns stay empty.
    #[arg(long)]
    pub no_negatives: bool,
}

#[derive(Serialize)]
struct CalibrationFile<'a> {
    #[serde(flatten)]
    outcome: &'a CalibrationOutcome,
    manifest: RunManifest,
}

pub fn run(args: &CalibrateArgs, g: &Globals) -> Result<()> {
    let out = require_out(g.out.as_deref(), "calibrate")?;
    let trace_path = sibling(out, "trace.csv");
    let scheme_path = sibling(out, "scheme.json");

    let target = StrengthTarget::with_tolerance(args.target_tpr, args.tolerance)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let grid = GridSpec::new(args.grid_gamma.clone(), args.grid_delta.clone(), args.default_gamma, args.default_delta)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let seed = g.seed.unwrap_or(0);
    let model = g.config.model()?;
    let tokenizer = g.config.tokenizer()?;
    let corpus: Vec<_> = load_prompts(&args.corpus, &tokenizer)?.into_iter().map(|p| p.tokens).collect();
    let protocol = StrengthProtocol {
        sampler: g.config.sampler.with_seed(seed),
        max_new_tokens: g.config.max_new_tokens(args.max_new_tokens),
        stop_token: g.config.stop_token,
        detector: g.config.detector,
    };
    let negatives =
        if args.no_negatives { Vec::new() } else { unwatermarked_negatives(&corpus, &model, &protocol)? };

    let family = Family::from(args.family);
    let result = calibrate(&target, &grid, family, args.hash_key, &corpus, &model, &protocol, &negatives, args.max_candidates);
    let outcome = match result {
        Ok(o) => o,
        Err(wmbench::Error::Calibration { message, trace }) => {
            write_atomic(&trace_path, trace_to_csv(&trace).as_bytes())?;
            log::error!("trace written to {}", trace_path.display());
            return Err(wmbench::Error::Calibration { message, trace }.into());
        }
        Err(e) => return Err(e.into()),
    };
    log::info!("selection:\n{}", outcome.comparison_table);

    let mut doc = SchemeDocument::new(&outcome.scheme, &protocol.sampler);
    doc.provenance = Some(Provenance {
        scheme_hash: doc.scheme_hash(),
        target_tpr: target.target_tpr,
        achieved_tpr: outcome.achieved_tpr,
        corpus_hash: outcome.corpus_hash.clone(),
    });
    let manifest = RunManifest::new("calibrate")
        .seed("sampler", seed)
        .seed("model", g.config.model.seed)
        .seed("hash_key", args.hash_key)
        .corpus("calibration", outcome.corpus_hash.clone());
    let manifest = RunManifest { scheme_hash: Some(doc.scheme_hash()), ..manifest };

    write_atomic(&trace_path, trace_to_csv(&outcome.trace).as_bytes())?;
    write_atomic(&scheme_path, &to_json_pretty(&doc)?)?;
    write_atomic(out, &to_json_pretty(&CalibrationFile { outcome: &outcome, manifest })?)?;
    log::info!(
        "gamma {} delta {} threshold {:.1}: TPR {:.4} (target {}); scheme frozen to {}",
        outcome.scheme.gamma,
        outcome.scheme.delta,
        outcome.scheme.z_threshold,
        outcome.achieved_tpr,
        target.target_tpr,
        scheme_path.display()
    );
    Ok(())
}
