use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use wmbench::bench::{evaluate, load_tasks, EvalConfig, EvalReport, NegativeSource};
use wmbench::wmgen::{Family, SchemeDocument};
use wmbench::RunManifest;

use super::{Globals, JudgeArgs, LoadedScheme, OrderArg};
use crate::error::{CliError, Result};
use crate::io::{read_json, require_out, sibling, to_json_pretty, write_atomic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum NegativesArg {
    /// First reference answer of each record.
    #[default]
    References,
    /// A fresh unwatermarked generation for the same input.
    Unwatermarked,
}

impl From<NegativesArg> for NegativeSource {
    fn from(n: NegativesArg) -> Self {
        match n {
            NegativesArg::References => NegativeSource::References,
            NegativesArg::Unwatermarked => NegativeSource::Unwatermarked,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// JSONL task records.
    #[arg(long)]
    pub tasks: PathBuf,
    /// Frozen scheme file from `calibrate`, or `none` for a baseline run.
    #[arg(long)]
    pub scheme_file: String,
    /// Baseline report used to fill the Drop columns.
    #[arg(long)]
    pub baseline_report: Option<PathBuf>,
    /// Accept a scheme file without calibration provenance; recorded in the manifest.
    #[arg(long)]
    pub uncalibrated: bool,
    /// For baseline runs: copy the sampler settings from this scheme file.
    #[arg(long)]
    pub sampler_from: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub negatives: NegativesArg,
    #[arg(long, value_enum, default_value_t)]
    pub judge_order: OrderArg,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_new_tokens: Option<u64>,
    #[command(flatten)]
    pub judge: JudgeArgs,
}

/// Refuses schemes whose parameters differ from what calibration froze.
pub fn check_provenance(doc: &SchemeDocument, path: &Path, uncalibrated: bool) -> Result<bool> {
    if doc.family == Family::None {
        return Ok(false);
    }
    match &doc.provenance {
        Some(_) if doc.provenance_matches() => Ok(false),
        Some(p) => Err(CliError::Refused(format!(
            "{}: parameters hash to {} but calibration froze {}; the file was edited after calibration. \
             Recalibrate rather than comparing at an unknown strength",
            path.display(),
            doc.scheme_hash(),
            p.scheme_hash
        ))),
        None if uncalibrated => Ok(true),
        None => Err(CliError::Refused(format!(
            "{} carries no calibration provenance, so its detection strength is unknown. \
             Run `wmbench calibrate` to freeze a scheme, or pass --uncalibrated to proceed anyway",
            path.display()
        ))),
    }
}

pub fn run(args: &EvaluateArgs, g: &Globals) -> Result<()> {
    let out = require_out(g.out.as_deref(), "evaluate")?;
    let loaded = LoadedScheme::from_arg(&args.scheme_file)?;
    let uncalibrated = match &loaded {
        Some(l) => check_provenance(&l.doc, Path::new(&args.scheme_file), args.uncalibrated)?,
        None => false,
    };
    if loaded.is_some() && args.sampler_from.is_some() {
        return Err(CliError::Usage("--sampler-from only applies to --scheme-file none".into()));
    }
    let sampler = match (&loaded, &args.sampler_from) {
        (Some(l), _) => l.doc.sampler()?,
        (None, Some(p)) => LoadedScheme::load(p)?.doc.sampler()?,
        (None, None) => g.config.sampler,
    };
    let seed = g.seed.unwrap_or(sampler.rng_seed);
    let cfg = EvalConfig {
        sampler: sampler.with_seed(seed),
        max_new_tokens: g.config.max_new_tokens(args.max_new_tokens),
        stop_token: g.config.stop_token,
        detector: g.config.detector,
        negatives: args.negatives.into(),
        judge_order: args.judge_order.into(),
    };

    let tasks = load_tasks(&args.tasks).map_err(|e| CliError::data(&args.tasks, e.to_string()))?;
    let model = g.config.model()?;
    let tokenizer = g.config.tokenizer()?;
    let judge = args.judge.build(&g.config)?;
    let scheme = loaded.as_ref().map(|l| l.doc.scheme()).transpose()?;

    let mut report = evaluate(scheme.as_ref(), &tasks, &model, &tokenizer, judge.as_deref(), &cfg)?;
    report.target_tpr = loaded.as_ref().and_then(|l| l.doc.provenance.as_ref()).map(|p| p.target_tpr);
    if let Some(path) = &args.baseline_report {
        let baseline: EvalReport = read_json(path)?;
        if baseline.config.sampler.with_seed(0) != cfg.sampler.with_seed(0) {
            log::warn!("baseline report used different sampler settings; Drop mixes two effects");
        }
        report.apply_baseline(&baseline).map_err(|e| CliError::data(path, e.to_string()))?;
    }
    for ex in &report.excluded {
        log::warn!("excluded {}: {}", ex.id, ex.reason);
    }

    let mut manifest = RunManifest::new("evaluate")
        .seed("sampler", seed)
        .seed("model", g.config.model.seed)
        .corpus("tasks", report.metadata.tasks_hash.clone());
    if let Some(l) = &loaded {
        manifest.scheme_file_hash = Some(l.file_hash.clone());
        manifest.scheme_hash = l.doc.provenance.as_ref().map(|p| p.scheme_hash.clone());
    }
    manifest.uncalibrated = uncalibrated;
    if uncalibrated {
        log::warn!("evaluating an uncalibrated scheme; the report is flagged as such");
    }
    report.manifest = Some(manifest);

    write_atomic(&sibling(out, "csv"), report.to_csv().as_bytes())?;
    write_atomic(out, &to_json_pretty(&report)?)?;
    log::info!(
        "overall GM {:.1} over {} records ({} excluded)",
        report.overall.gm,
        report.overall.records,
        report.excluded.len()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use wmbench::wmgen::{Provenance, SamplerConfig, WatermarkScheme};

    fn doc(family: Family) -> SchemeDocument {
        let scheme = WatermarkScheme::new(family, 0.25, 2.0, 0).unwrap();
        SchemeDocument::new(&scheme, &SamplerConfig::default())
    }

    fn stamped(mut d: SchemeDocument) -> SchemeDocument {
        d.provenance = Some(Provenance {
            scheme_hash: d.scheme_hash(),
            target_tpr: 0.95,
            achieved_tpr: 0.95,
            corpus_hash: "c".into(),
        });
        d
    }

    #[test]
    fn calibrated_scheme_passes() {
        assert!(!check_provenance(&stamped(doc(Family::Soft)), Path::new("s"), false).unwrap());
    }

    #[test]
    fn missing_provenance_needs_the_override() {
        let d = doc(Family::Soft);
        assert!(matches!(check_provenance(&d, Path::new("s"), false), Err(CliError::Refused(_))));
        assert!(check_provenance(&d, Path::new("s"), true).unwrap());
    }

    #[test]
    fn edited_parameters_are_refused_even_with_the_override() {
        let mut d = stamped(doc(Family::Soft));
        d.delta = 3.0;
        assert!(matches!(check_provenance(&d, Path::new("s"), true), Err(CliError::Refused(_))));
    }

    #[test]
    fn unwatermarked_documents_need_no_provenance() {
        assert!(!check_provenance(&doc(Family::None), Path::new("s"), false).unwrap());
    }
}
