//! Watermarking-strength measurement and hyper-parameter calibration.
//!
//! Strength is the detector's true-positive rate on watermarked generations.
//! Calibration first grid-searches `(gamma, delta)` at the default z
//! threshold, keeps the points whose TPR is near the target, fine-tunes the
//! threshold for each on a 0.1 grid over `[3.0, 5.0]`, and finally picks the
//! point with the smallest remaining deviation. Deviation ties go to the point
//! closest to the method defaults (normalised L1 over the grid axes).

mod roc;

pub use roc::{roc, RocCurve, RocPoint};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{detect, DetectionResult, DetectorConfig};
use crate::error::{Error, Result};
use crate::greenlist::TokenId;
use crate::rng::stream_seed;
use crate::wmgen::{generate, hex_digest, Family, LogitSource, SamplerConfig, WatermarkScheme, DEFAULT_Z_THRESHOLD};

pub const DEFAULT_TOLERANCE: f64 = 0.02;
/// Grid points farther than this many tolerances from the target are infeasible.
pub const FEASIBILITY_FACTOR: f64 = 3.0;
/// Threshold sweep: `THRESHOLD_STEPS` values `i / 10` for `i` in 30..=50.
pub const THRESHOLD_STEPS: std::ops::RangeInclusive<u32> = 30..=50;

const NEGATIVE_STREAM_SALT: u64 = 0x6E65_6761_7469_7665;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrengthTarget {
    pub target_tpr: f64,
    pub tolerance: f64,
}

impl StrengthTarget {
    pub fn new(target_tpr: f64) -> Result<Self> {
        Self::with_tolerance(target_tpr, DEFAULT_TOLERANCE)
    }

    pub fn with_tolerance(target_tpr: f64, tolerance: f64) -> Result<Self> {
        if !(target_tpr > 0.0 && target_tpr < 1.0) {
            return Err(Error::param(format!("target TPR must lie in (0, 1), got {target_tpr}")));
        }
        if !(tolerance >= 0.0 && tolerance.is_finite()) {
            return Err(Error::param(format!("tolerance must be >= 0, got {tolerance}")));
        }
        Ok(Self { target_tpr, tolerance })
    }

    pub fn deviation(&self, tpr: f64) -> f64 {
        (tpr - self.target_tpr).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub gamma_values: Vec<f64>,
    pub delta_values: Vec<f64>,
    pub default_gamma: f64,
    pub default_delta: f64,
}

impl GridSpec {
    pub fn new(mut gamma_values: Vec<f64>, mut delta_values: Vec<f64>, default_gamma: f64, default_delta: f64) -> Result<Self> {
        if gamma_values.is_empty() || delta_values.is_empty() {
            return Err(Error::param("grid axes must be nonempty"));
        }
        if gamma_values.iter().chain(&delta_values).any(|v| !v.is_finite()) {
            return Err(Error::param("grid values must be finite"));
        }
        gamma_values.sort_by(f64::total_cmp);
        gamma_values.dedup();
        delta_values.sort_by(f64::total_cmp);
        delta_values.dedup();
        Ok(Self { gamma_values, delta_values, default_gamma, default_delta })
    }

    fn range(values: &[f64]) -> f64 {
        values.last().unwrap() - values.first().unwrap()
    }

    /// Normalised L1 distance from the defaults; a degenerate axis contributes 0.
    pub fn distance_from_defaults(&self, gamma: f64, delta: f64) -> f64 {
        let term = |v: f64, d: f64, range: f64| if range > 0.0 { (v - d).abs() / range } else { 0.0 };
        term(gamma, self.default_gamma, Self::range(&self.gamma_values))
            + term(delta, self.default_delta, Self::range(&self.delta_values))
    }
}

/// How watermarked texts are produced and scored during strength measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrengthProtocol {
    /// `rng_seed` is the base seed; prompt `i` samples with a derived stream.
    pub sampler: SamplerConfig,
    pub max_new_tokens: usize,
    pub stop_token: Option<TokenId>,
    pub detector: DetectorConfig,
}

impl Default for StrengthProtocol {
    fn default() -> Self {
        Self {
            sampler: SamplerConfig::default(),
            max_new_tokens: 200,
            stop_token: None,
            detector: DetectorConfig::default(),
        }
    }
}

impl StrengthProtocol {
    pub fn prompt_seed(&self, index: usize) -> u64 {
        stream_seed(self.sampler.rng_seed, index as u64)
    }
}

/// A text known not to carry the watermark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativeText {
    pub tokens: Vec<TokenId>,
    /// Token preceding `tokens[0]` (last prompt token), if known.
    pub first_context: Option<TokenId>,
}

/// One unwatermarked generation per prompt, on a seed stream disjoint from
/// the watermarked runs.
pub fn unwatermarked_negatives<S: LogitSource + ?Sized>(
    corpus: &[Vec<TokenId>],
    source: &S,
    protocol: &StrengthProtocol,
) -> Result<Vec<NegativeText>> {
    let none = WatermarkScheme::unwatermarked(0.5, 0)?;
    corpus
        .par_iter()
        .enumerate()
        .map(|(i, prompt)| {
            let cfg = protocol.sampler.with_seed(stream_seed(protocol.sampler.rng_seed ^ NEGATIVE_STREAM_SALT, i as u64));
            let rec = generate(source, prompt, &none, &cfg, protocol.max_new_tokens, protocol.stop_token)?;
            Ok(NegativeText { tokens: rec.output, first_context: prompt.last().copied() })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrengthMeasurement {
    pub tpr: f64,
    /// `None` when no negatives were supplied.
    pub tnr: Option<f64>,
    pub positives: Vec<DetectionResult>,
    pub negatives: Vec<DetectionResult>,
}

impl StrengthMeasurement {
    pub fn positive_z(&self) -> Vec<f64> {
        self.positives.iter().map(|d| d.z).collect()
    }

    pub fn negative_z(&self) -> Vec<f64> {
        self.negatives.iter().map(|d| d.z).collect()
    }

    /// Rates recomputed as if the scheme's threshold were `threshold`.
    pub fn rates_at(&self, threshold: f64) -> (f64, Option<f64>) {
        (flag_rate(&self.positives, threshold), tnr_at(&self.negatives, threshold))
    }
}

fn flag_rate(results: &[DetectionResult], threshold: f64) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    results.iter().filter(|d| d.flagged_at(threshold)).count() as f64 / results.len() as f64
}

fn tnr_at(results: &[DetectionResult], threshold: f64) -> Option<f64> {
    (!results.is_empty()).then(|| 1.0 - flag_rate(results, threshold))
}

/// Generates one watermarked text per prompt and reports the detected fraction.
pub fn measure_strength<S: LogitSource + ?Sized>(
    scheme: &WatermarkScheme,
    corpus: &[Vec<TokenId>],
    source: &S,
    protocol: &StrengthProtocol,
    negatives: &[NegativeText],
) -> Result<StrengthMeasurement> {
    if corpus.is_empty() {
        return Err(Error::input("strength measurement needs a nonempty corpus"));
    }
    scheme.validate()?;
    let vocab = source.vocab();
    let positives = corpus
        .par_iter()
        .enumerate()
        .map(|(i, prompt)| {
            let cfg = protocol.sampler.with_seed(protocol.prompt_seed(i));
            let rec = generate(source, prompt, scheme, &cfg, protocol.max_new_tokens, protocol.stop_token)?;
            detect(&rec.output, scheme, vocab, &protocol.detector, prompt.last().copied())
        })
        .collect::<Result<Vec<_>>>()?;
    let negatives = negatives
        .par_iter()
        .map(|n| detect(&n.tokens, scheme, vocab, &protocol.detector, n.first_context))
        .collect::<Result<Vec<_>>>()?;
    let tpr = flag_rate(&positives, scheme.z_threshold);
    let tnr = tnr_at(&negatives, scheme.z_threshold);
    Ok(StrengthMeasurement { tpr, tnr, positives, negatives })
}

/// One row of the calibration trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub gamma: f64,
    pub delta: f64,
    pub threshold: f64,
    pub tpr: f64,
    pub tnr: Option<f64>,
}

pub fn trace_to_csv(trace: &[TraceEntry]) -> String {
    let mut out = String::from("gamma,delta,threshold,tpr,tnr\n");
    for e in trace {
        let tnr = e.tnr.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{},{}\n", e.gamma, e.delta, e.threshold, e.tpr, tnr));
    }
    out
}

/// A grid point evaluated at the default threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub scheme: WatermarkScheme,
    pub measurement: StrengthMeasurement,
    pub deviation: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    /// Feasible points for the search target, best first.
    pub ranked: Vec<Candidate>,
    /// Every grid point, in grid order. Lets other targets reuse the search.
    pub evaluated: Vec<Candidate>,
    pub trace: Vec<TraceEntry>,
}

/// Grid points for `family`; families without a bias collapse the delta axis.
fn grid_points(grid: &GridSpec, family: Family) -> Vec<(f64, f64)> {
    let deltas: Vec<f64> = if family.uses_delta() { grid.delta_values.clone() } else { vec![0.0] };
    grid.gamma_values
        .iter()
        .flat_map(|&g| deltas.iter().map(move |&d| (g, d)))
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn grid_search<S: LogitSource + ?Sized>(
    target: &StrengthTarget,
    grid: &GridSpec,
    corpus: &[Vec<TokenId>],
    source: &S,
    family: Family,
    global_seed: u64,
    protocol: &StrengthProtocol,
    negatives: &[NegativeText],
) -> Result<GridSearchResult> {
    if family == Family::None {
        return Err(Error::param("cannot calibrate the unwatermarked family"));
    }
    let mut evaluated = Vec::new();
    for (gamma, delta) in grid_points(grid, family) {
        let scheme = WatermarkScheme::new(family, gamma, delta, global_seed)?.with_threshold(DEFAULT_Z_THRESHOLD);
        let measurement = measure_strength(&scheme, corpus, source, protocol, negatives)?;
        log::debug!("grid gamma={gamma} delta={delta} tpr={}", measurement.tpr);
        evaluated.push(Candidate {
            deviation: target.deviation(measurement.tpr),
            distance: grid.distance_from_defaults(gamma, delta),
            scheme,
            measurement,
        });
    }
    let trace: Vec<TraceEntry> = evaluated
        .iter()
        .map(|c| TraceEntry {
            gamma: c.scheme.gamma,
            delta: c.scheme.delta,
            threshold: c.scheme.z_threshold,
            tpr: c.measurement.tpr,
            tnr: c.measurement.tnr,
        })
        .collect();

    let limit = FEASIBILITY_FACTOR * target.tolerance;
    let mut ranked: Vec<Candidate> = evaluated.iter().filter(|c| c.deviation <= limit + 1e-12).cloned().collect();
    if ranked.is_empty() {
        return Err(Error::Calibration {
            message: format!(
                "no grid point within {limit:.3} of target TPR {}",
                target.target_tpr
            ),
            trace,
        });
    }
    ranked.sort_by(|a, b| {
        a.deviation
            .total_cmp(&b.deviation)
            .then(a.distance.total_cmp(&b.distance))
            .then(a.scheme.gamma.total_cmp(&b.scheme.gamma))
            .then(a.scheme.delta.total_cmp(&b.scheme.delta))
    });
    Ok(GridSearchResult { ranked, evaluated, trace })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub threshold: f64,
    pub tpr: f64,
}

pub fn threshold_grid() -> impl Iterator<Item = f64> {
    THRESHOLD_STEPS.map(|i| i as f64 / 10.0)
}

/// Picks the sweep threshold whose TPR is closest to the target; ties go to
/// the larger threshold.
pub fn tune_threshold(positives: &[DetectionResult], target: &StrengthTarget) -> ThresholdChoice {
    let mut best: Option<ThresholdChoice> = None;
    for threshold in threshold_grid() {
        let tpr = flag_rate(positives, threshold);
        let better = match best {
            None => true,
            Some(b) => target.deviation(tpr) <= target.deviation(b.tpr),
        };
        if better {
            best = Some(ThresholdChoice { threshold, tpr });
        }
    }
    best.expect("threshold grid is nonempty")
}

/// A near-target point after threshold tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunedCandidate {
    pub gamma: f64,
    pub delta: f64,
    pub threshold: f64,
    pub tpr: f64,
    pub tnr: Option<f64>,
    pub deviation: f64,
    pub distance: f64,
    /// Generation metric, when the caller evaluated one.
    pub gm: Option<f64>,
}

impl TunedCandidate {
    pub fn from_candidate(c: &Candidate, target: &StrengthTarget) -> Self {
        let choice = tune_threshold(&c.measurement.positives, target);
        let (_, tnr) = c.measurement.rates_at(choice.threshold);
        Self {
            gamma: c.scheme.gamma,
            delta: c.scheme.delta,
            threshold: choice.threshold,
            tpr: choice.tpr,
            tnr,
            deviation: target.deviation(choice.tpr),
            distance: c.distance,
            gm: None,
        }
    }
}

/// Chooses the minimal-deviation candidate (ties: smaller hyper-parameter
/// distance) and returns its index alongside a printable comparison table.
pub fn select_point(candidates: &[TunedCandidate]) -> Result<(usize, String)> {
    if candidates.is_empty() {
        return Err(Error::input("select_point needs at least one candidate"));
    }
    let chosen = (0..candidates.len())
        .min_by(|&a, &b| {
            let (ca, cb) = (&candidates[a], &candidates[b]);
            ca.deviation.total_cmp(&cb.deviation).then(ca.distance.total_cmp(&cb.distance))
        })
        .unwrap();
    let fmt_opt = |v: Option<f64>, scale: f64| v.map(|x| format!("{:.1}", x * scale)).unwrap_or_else(|| "--".into());
    let mut table = String::from("chosen,gamma,delta,threshold,TP,TN,GM,deviation\n");
    for (i, c) in candidates.iter().enumerate() {
        table.push_str(&format!(
            "{},{},{},{:.1},{:.1},{},{},{:.4}\n",
            if i == chosen { "*" } else { "" },
            c.gamma,
            c.delta,
            c.threshold,
            c.tpr * 100.0,
            fmt_opt(c.tnr, 100.0),
            fmt_opt(c.gm, 1.0),
            c.deviation
        ));
    }
    Ok((chosen, table))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOutcome {
    pub scheme: WatermarkScheme,
    pub target: StrengthTarget,
    pub achieved_tpr: f64,
    pub achieved_tnr: Option<f64>,
    /// Grid evaluations at the default threshold, then the tuned candidates.
    pub trace: Vec<TraceEntry>,
    pub candidates: Vec<TunedCandidate>,
    pub comparison_table: String,
    pub grid: GridSpec,
    pub protocol: StrengthProtocol,
    pub corpus_hash: String,
    pub corpus_size: usize,
}

/// Grid search, then threshold tuning on the feasible points and selection.
///
/// `max_candidates` caps how many feasible points (best first) are tuned;
/// `None` tunes them all.
#[allow(clippy::too_many_arguments)]
pub fn calibrate<S: LogitSource + ?Sized>(
    target: &StrengthTarget,
    grid: &GridSpec,
    family: Family,
    global_seed: u64,
    corpus: &[Vec<TokenId>],
    source: &S,
    protocol: &StrengthProtocol,
    negatives: &[NegativeText],
    max_candidates: Option<usize>,
) -> Result<CalibrationOutcome> {
    let search = grid_search(target, grid, corpus, source, family, global_seed, protocol, negatives)?;
    finish_calibration(target, grid, &search, corpus, protocol, max_candidates)
}

/// Threshold tuning and point selection over an existing grid search.
///
/// Grid results do not depend on the target, so several strengths can share
/// one search.
pub fn finish_calibration(
    target: &StrengthTarget,
    grid: &GridSpec,
    search: &GridSearchResult,
    corpus: &[Vec<TokenId>],
    protocol: &StrengthProtocol,
    max_candidates: Option<usize>,
) -> Result<CalibrationOutcome> {
    // Re-rank against this target: the search may have been run for another one.
    let mut ranked: Vec<&Candidate> = search.evaluated.iter().collect();
    ranked.sort_by(|a, b| {
        target
            .deviation(a.measurement.tpr)
            .total_cmp(&target.deviation(b.measurement.tpr))
            .then(a.distance.total_cmp(&b.distance))
    });
    let limit = FEASIBILITY_FACTOR * target.tolerance + 1e-12;
    let pool: Vec<&Candidate> = ranked
        .into_iter()
        .filter(|c| target.deviation(c.measurement.tpr) <= limit)
        .take(max_candidates.unwrap_or(usize::MAX).max(1))
        .collect();
    let mut trace = search.trace.clone();
    if pool.is_empty() {
        return Err(Error::Calibration {
            message: format!("no grid point near target TPR {}", target.target_tpr),
            trace,
        });
    }
    let tuned: Vec<TunedCandidate> = pool.iter().map(|c| TunedCandidate::from_candidate(c, target)).collect();
    trace.extend(tuned.iter().map(|t| TraceEntry {
        gamma: t.gamma,
        delta: t.delta,
        threshold: t.threshold,
        tpr: t.tpr,
        tnr: t.tnr,
    }));
    let (chosen, comparison_table) = select_point(&tuned)?;
    let best = &tuned[chosen];
    if best.deviation > target.tolerance + 1e-12 {
        return Err(Error::Calibration {
            message: format!(
                "best tuned TPR {:.4} misses target {} by more than {}",
                best.tpr, target.target_tpr, target.tolerance
            ),
            trace,
        });
    }
    let scheme = pool[chosen].scheme.with_threshold(best.threshold);
    Ok(CalibrationOutcome {
        scheme,
        target: *target,
        achieved_tpr: best.tpr,
        achieved_tnr: best.tnr,
        trace,
        candidates: tuned.clone(),
        comparison_table,
        grid: grid.clone(),
        protocol: *protocol,
        corpus_hash: corpus_hash(corpus),
        corpus_size: corpus.len(),
    })
}

/// SHA-256 of the corpus token lists, hex encoded.
pub fn corpus_hash(corpus: &[Vec<TokenId>]) -> String {
    hex_digest(&serde_json::to_vec(corpus).expect("token lists serialize"))
}
