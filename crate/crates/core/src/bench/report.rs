use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics;
use super::tasks::{Category, Metric, TaskRecord};
use crate::detect::{detect, DetectionResult, DetectorConfig, SimpleTokenizer};
use crate::error::{Error, Result};
use crate::greenlist::TokenId;
use crate::judge::{judge_pair, Judge, OrderPolicy, JUDGE_TEMPLATE_VERSION};
use crate::manifest::RunManifest;
use crate::rng::stream_seed;
use crate::wmgen::{generate, hex_digest, Family, LogitSource, SamplerConfig, WatermarkScheme};

const NEGATIVE_SALT: u64 = 0x6e65_6761_7469_7665;
const JUDGE_SALT: u64 = 0x6a75_6467_6500_0000;

/// Which texts count as unwatermarked when measuring TN.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeSource {
    /// The record's first reference answer.
    #[default]
    References,
    /// A fresh unwatermarked generation for the same prompt.
    Unwatermarked,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// `rng_seed` is the base seed; each record derives its own stream from its id.
    pub sampler: SamplerConfig,
    pub max_new_tokens: usize,
    pub stop_token: Option<TokenId>,
    pub detector: DetectorConfig,
    pub negatives: NegativeSource,
    pub judge_order: OrderPolicy,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            sampler: SamplerConfig::default(),
            max_new_tokens: 200,
            stop_token: None,
            detector: DetectorConfig::default(),
            negatives: NegativeSource::References,
            judge_order: OrderPolicy::Random,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionSummary {
    pub z: f64,
    pub detected: bool,
    pub insufficient_tokens: bool,
    pub total_scored: usize,
}

impl From<&DetectionResult> for DetectionSummary {
    fn from(d: &DetectionResult) -> Self {
        DetectionSummary {
            z: d.z,
            detected: d.detected,
            insufficient_tokens: d.insufficient_tokens,
            total_scored: d.total_scored,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordOutcome {
    pub id: String,
    pub category: Category,
    pub task: String,
    pub metric: Metric,
    pub output: String,
    /// Metric value in `[0, 1]`; for judge tasks the win credit (1, 0.5 or 0).
    pub score: f64,
    /// Detection on the generation. Absent for baseline runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive: Option<DetectionSummary>,
    /// Detection on the negative text. Absent for baseline runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative: Option<DetectionSummary>,
    #[serde(default)]
    pub judge_unparsed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRow {
    pub category: Category,
    pub task: String,
    pub metric: Metric,
    pub records: usize,
    /// Mean score times 100.
    pub gm: f64,
    pub tp_rate: Option<f64>,
    pub tn_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub records: usize,
    /// Record-weighted; absent for baseline runs.
    pub tp_rate: Option<f64>,
    pub tn_rate: Option<f64>,
    /// Mean of the member tasks' GM.
    pub gm: f64,
    /// Relative GM decline against a baseline report, as a fraction.
    pub drop: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub f1_normalization: String,
    pub rouge_l_beta: f64,
    pub edit_sim_unit: String,
    pub judge_template: String,
    pub tasks_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub family: Family,
    /// Absent for baseline runs.
    pub scheme: Option<WatermarkScheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_tpr: Option<f64>,
    pub config: EvalConfig,
    pub metadata: ReportMetadata,
    pub tasks: Vec<TaskRow>,
    pub categories: Vec<SummaryRow>,
    pub overall: SummaryRow,
    pub excluded: Vec<Exclusion>,
    pub records: Vec<RecordOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
}

/// `(baseline - watermarked) / baseline`, or `None` when the baseline is not positive.
pub fn drop(gm_baseline: f64, gm_watermarked: f64) -> Option<f64> {
    (gm_baseline > 0.0).then(|| (gm_baseline - gm_watermarked) / gm_baseline)
}

fn record_seed(base: u64, id: &str) -> u64 {
    let digest = hex_digest(id.as_bytes());
    stream_seed(base, u64::from_str_radix(&digest[..16], 16).expect("hex digest"))
}

fn tokenize(tokenizer: &SimpleTokenizer, text: &str, what: &str) -> Result<Vec<TokenId>> {
    tokenizer
        .tokenize(text)
        .map(|t| t.tokens)
        .map_err(|e| Error::input(format!("{what}: {e}")))
}

#[allow(clippy::too_many_arguments)]
fn eval_record<S: LogitSource + ?Sized>(
    rec: &TaskRecord,
    scheme: &WatermarkScheme,
    watermarked: bool,
    source: &S,
    tokenizer: &SimpleTokenizer,
    judge: Option<&dyn Judge>,
    cfg: &EvalConfig,
) -> Result<RecordOutcome> {
    let vocab = source.vocab();
    let seed = record_seed(cfg.sampler.rng_seed, &rec.id);
    let prompt = tokenize(tokenizer, &rec.input, "input")?;
    let gen = generate(source, &prompt, scheme, &cfg.sampler.with_seed(seed), cfg.max_new_tokens, cfg.stop_token)?;
    let output = tokenizer.detokenize(&gen.output)?;

    let mut judge_unparsed = false;
    let score = match rec.metric {
        Metric::Judge => {
            let judge = judge.ok_or_else(|| Error::config("judge task but no judge configured"))?;
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, JUDGE_SALT));
            let v = judge_pair(&rec.id, &rec.input, &output, &rec.references[0], judge, cfg.judge_order, &mut rng)?;
            judge_unparsed = v.unparsed;
            v.preferred.score()
        }
        m => metrics::score(m, &output, &rec.references).expect("text metric"),
    };

    let (positive, negative) = if watermarked {
        let first = prompt.last().copied();
        let pos = detect(&gen.output, scheme, vocab, &cfg.detector, first)?;
        let neg_tokens = match cfg.negatives {
            NegativeSource::References => tokenize(tokenizer, &rec.references[0], "reference")?,
            NegativeSource::Unwatermarked => {
                let none = WatermarkScheme::unwatermarked(scheme.gamma, scheme.hash.global_seed)?;
                let neg_cfg = cfg.sampler.with_seed(stream_seed(seed, NEGATIVE_SALT));
                generate(source, &prompt, &none, &neg_cfg, cfg.max_new_tokens, cfg.stop_token)?.output
            }
        };
        let neg = detect(&neg_tokens, scheme, vocab, &cfg.detector, first)?;
        (Some(DetectionSummary::from(&pos)), Some(DetectionSummary::from(&neg)))
    } else {
        (None, None)
    };

    Ok(RecordOutcome {
        id: rec.id.clone(),
        category: rec.category,
        task: rec.task.clone(),
        metric: rec.metric,
        output,
        score,
        positive,
        negative,
        judge_unparsed,
    })
}

/// Generates, scores and detects every record.
///
/// `scheme` of `None` (or family `None`) is a baseline run: outputs are
/// unwatermarked and detection is skipped. Records that fail are listed in
/// `excluded` and left out of every aggregate.
pub fn evaluate<S: LogitSource + ?Sized>(
    scheme: Option<&WatermarkScheme>,
    tasks: &[TaskRecord],
    source: &S,
    tokenizer: &SimpleTokenizer,
    judge: Option<&dyn Judge>,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    if tasks.is_empty() {
        return Err(Error::input("no task records to evaluate"));
    }
    if cfg.max_new_tokens == 0 {
        return Err(Error::param("max_new_tokens must be >= 1"));
    }
    cfg.sampler.validate()?;
    let (run_scheme, watermarked) = match scheme {
        Some(s) if s.family != Family::None => (*s, true),
        Some(s) => (*s, false),
        None => (WatermarkScheme::unwatermarked(0.5, 0)?, false),
    };
    run_scheme.validate()?;

    let outcomes: Vec<Result<RecordOutcome>> = tasks
        .par_iter()
        .map(|rec| eval_record(rec, &run_scheme, watermarked, source, tokenizer, judge, cfg))
        .collect();
    let mut records = Vec::new();
    let mut excluded = Vec::new();
    for (rec, outcome) in tasks.iter().zip(outcomes) {
        match outcome {
            Ok(o) => records.push(o),
            Err(e) => {
                log::warn!("record {} excluded: {e}", rec.id);
                excluded.push(Exclusion { id: rec.id.clone(), reason: e.to_string() });
            }
        }
    }
    if records.is_empty() {
        return Err(Error::input(format!("all {} records failed; first error: {}", tasks.len(), excluded[0].reason)));
    }

    let metadata = ReportMetadata {
        f1_normalization: "lowercase, strip ASCII punctuation, whitespace tokens".into(),
        rouge_l_beta: 1.0,
        edit_sim_unit: "characters".into(),
        judge_template: JUDGE_TEMPLATE_VERSION.into(),
        tasks_hash: hex_digest(&serde_json::to_vec(tasks)?),
        baseline_hash: None,
    };
    let (tasks_rows, categories, overall) = aggregate(&records, watermarked);
    Ok(EvalReport {
        family: run_scheme.family,
        scheme: watermarked.then_some(run_scheme),
        target_tpr: None,
        config: *cfg,
        metadata,
        tasks: tasks_rows,
        categories,
        overall,
        excluded,
        records,
        manifest: None,
    })
}

#[derive(Default)]
struct Tally {
    records: usize,
    score_sum: f64,
    tp: usize,
    tn: usize,
}

impl Tally {
    fn add(&mut self, r: &RecordOutcome) {
        self.records += 1;
        self.score_sum += r.score;
        self.tp += r.positive.is_some_and(|d| d.detected) as usize;
        self.tn += r.negative.is_some_and(|d| !d.detected) as usize;
    }

    fn rates(&self, watermarked: bool) -> (Option<f64>, Option<f64>) {
        if !watermarked || self.records == 0 {
            return (None, None);
        }
        let n = self.records as f64;
        (Some(self.tp as f64 / n), Some(self.tn as f64 / n))
    }
}

fn aggregate(records: &[RecordOutcome], watermarked: bool) -> (Vec<TaskRow>, Vec<SummaryRow>, SummaryRow) {
    let mut by_task: BTreeMap<(Category, &str), (Metric, Tally)> = BTreeMap::new();
    for r in records {
        by_task.entry((r.category, r.task.as_str())).or_insert_with(|| (r.metric, Tally::default())).1.add(r);
    }
    let tasks: Vec<TaskRow> = by_task
        .iter()
        .map(|((cat, task), (metric, t))| {
            let (tp_rate, tn_rate) = t.rates(watermarked);
            TaskRow {
                category: *cat,
                task: task.to_string(),
                metric: *metric,
                records: t.records,
                gm: 100.0 * t.score_sum / t.records as f64,
                tp_rate,
                tn_rate,
            }
        })
        .collect();

    let summarize = |label: String, rows: Vec<&TaskRow>| {
        let mut t = Tally::default();
        for r in records.iter().filter(|r| rows.iter().any(|row| row.category == r.category && row.task == r.task)) {
            t.add(r);
        }
        let (tp_rate, tn_rate) = t.rates(watermarked);
        SummaryRow {
            label,
            records: t.records,
            tp_rate,
            tn_rate,
            gm: rows.iter().map(|r| r.gm).sum::<f64>() / rows.len() as f64,
            drop: None,
        }
    };
    let categories = Category::ALL
        .iter()
        .filter_map(|c| {
            let rows: Vec<&TaskRow> = tasks.iter().filter(|t| t.category == *c).collect();
            (!rows.is_empty()).then(|| summarize(c.to_string(), rows))
        })
        .collect();
    let overall = summarize("Overall".into(), tasks.iter().collect());
    (tasks, categories, overall)
}

impl EvalReport {
    /// Fills every `drop` field from the matching rows of `baseline`.
    pub fn apply_baseline(&mut self, baseline: &EvalReport) -> Result<()> {
        if baseline.family != Family::None {
            return Err(Error::input("drop baseline must be an unwatermarked (family none) report"));
        }
        if baseline.metadata.tasks_hash != self.metadata.tasks_hash {
            return Err(Error::input("baseline report was produced from a different task file"));
        }
        for row in &mut self.categories {
            row.drop = baseline
                .categories
                .iter()
                .find(|b| b.label == row.label)
                .and_then(|b| drop(b.gm, row.gm));
        }
        self.overall.drop = drop(baseline.overall.gm, self.overall.gm);
        self.metadata.baseline_hash = Some(hex_digest(&serde_json::to_vec(baseline)?));
        Ok(())
    }

    pub fn category(&self, c: Category) -> Option<&SummaryRow> {
        self.categories.iter().find(|r| r.label == c.as_str())
    }

    pub fn task_gm(&self, task: &str) -> Option<f64> {
        self.tasks.iter().find(|t| t.task == task).map(|t| t.gm)
    }

    pub fn positive_z(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.positive.map(|d| d.z)).collect()
    }

    pub fn negative_z(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.negative.map(|d| d.z)).collect()
    }

    pub fn to_csv(&self) -> String {
        table_csv(&[(self.family.to_string(), self)])
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "--".to_string(), |x| format!("{x:.1}"))
}

fn row_cells(row: Option<&SummaryRow>) -> [String; 4] {
    match row {
        None => ["--".into(), "--".into(), "--".into(), "--".into()],
        Some(r) => [
            cell(r.tp_rate.map(|x| 100.0 * x)),
            cell(r.tn_rate.map(|x| 100.0 * x)),
            cell(Some(r.gm)),
            cell(r.drop.map(|x| 100.0 * x)),
        ],
    }
}

/// One row per labelled report; TP, TN, GM and Drop for each category and
/// overall. Rates and Drop are in percent; missing values print as `--`.
pub fn table_csv(rows: &[(String, &EvalReport)]) -> String {
    let mut header = vec!["method".to_string()];
    for label in Category::ALL.iter().map(|c| c.as_str()).chain(["Overall"]) {
        for col in ["TP", "TN", "GM", "Drop"] {
            header.push(format!("{label}_{col}"));
        }
    }
    let mut out = header.join(",");
    out.push('\n');
    for (label, report) in rows {
        let mut cells = vec![label.replace(',', ";")];
        for c in Category::ALL {
            cells.extend(row_cells(report.category(c)));
        }
        cells.extend(row_cells(Some(&report.overall)));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::input("correlation inputs differ in length"));
    }
    if x.len() < 2 {
        return Err(Error::input("correlation needs at least two points"));
    }
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskCorrelation {
    pub category: Category,
    pub task_a: String,
    pub task_b: String,
    /// `None` marks an undefined correlation (zero variance).
    pub r: Option<f64>,
}

/// Correlates per-task GM across reports for every task pair within a category.
pub fn category_correlation(reports: &[&EvalReport]) -> Result<Vec<TaskCorrelation>> {
    if reports.len() < 2 {
        return Err(Error::input("correlation needs at least two reports"));
    }
    let mut out = Vec::new();
    for cat in Category::ALL {
        let names: Vec<&str> = reports[0].tasks.iter().filter(|t| t.category == cat).map(|t| t.task.as_str()).collect();
        for (i, a) in names.iter().enumerate() {
            for b in &names[i + 1..] {
                let mut xs = Vec::new();
                let mut ys = Vec::new();
                for r in reports {
                    match (r.task_gm(a), r.task_gm(b)) {
                        (Some(x), Some(y)) => {
                            xs.push(x);
                            ys.push(y);
                        }
                        _ => return Err(Error::input(format!("a report lacks task {a} or {b}"))),
                    }
                }
                out.push(TaskCorrelation { category: cat, task_a: a.to_string(), task_b: b.to_string(), r: pearson(&xs, &ys)? });
            }
        }
    }
    Ok(out)
}
