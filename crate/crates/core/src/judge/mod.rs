//! Pairwise preference judging with randomised presentation order.

mod http;

pub use http::{HttpJudge, JudgeEndpoint, API_KEY_ENV};

use std::collections::HashMap;
use std::hash::Hash;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_seed;

/// Identifies the prompt template below; stored with every judged report.
/// The template is our own wording, not a published canonical prompt.
pub const JUDGE_TEMPLATE_VERSION: &str = "wmbench-pairwise-v1";

const TEMPLATE: &str = "\
You are comparing two responses to the same instruction.
Decide which response is better. Consider whether it is helpful, whether its
language is natural and free of repetition, and whether it is factually accurate.
Answer using only \"Output (a)\" or \"Output (b)\".

# Instruction
{instruction}

# Output (a)
{output_a}

# Output (b)
{output_b}

# Which is better, Output (a) or Output (b)?";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PresentedOrder {
    /// Ours shown as Output (a).
    AB,
    /// Baseline shown as Output (a).
    BA,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preference {
    Ours,
    Baseline,
    Tie,
}

impl Preference {
    /// Win-rate credit: 1 for a win, 0.5 for a tie.
    pub fn score(&self) -> f64 {
        match self {
            Preference::Ours => 1.0,
            Preference::Tie => 0.5,
            Preference::Baseline => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub record_id: String,
    pub presented_order: PresentedOrder,
    /// Already un-swapped: independent of `presented_order`.
    pub preferred: Preference,
    pub raw_response: String,
    /// The response named neither output; recorded as a tie.
    #[serde(default)]
    pub unparsed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderPolicy {
    Random,
    ForcedAB,
    ForcedBA,
}

/// What a judge sees: the rendered prompt plus its parts.
#[derive(Debug, Clone)]
pub struct JudgeRequest<'a> {
    pub instruction: &'a str,
    pub output_a: &'a str,
    pub output_b: &'a str,
    pub prompt: String,
}

pub trait Judge: Sync {
    /// Raw judge response for one comparison.
    fn respond(&self, request: &JudgeRequest<'_>) -> Result<String>;
}

impl<J: Judge + ?Sized> Judge for &J {
    fn respond(&self, request: &JudgeRequest<'_>) -> Result<String> {
        (**self).respond(request)
    }
}

/// Deterministic judge that prefers the longer output and ignores position.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockJudge;

impl Judge for MockJudge {
    fn respond(&self, r: &JudgeRequest<'_>) -> Result<String> {
        let (a, b) = (r.output_a.chars().count(), r.output_b.chars().count());
        Ok(match a.cmp(&b) {
            std::cmp::Ordering::Greater => "Output (a)",
            std::cmp::Ordering::Less => "Output (b)",
            std::cmp::Ordering::Equal => "Tie",
        }
        .to_string())
    }
}

pub fn render_prompt(instruction: &str, output_a: &str, output_b: &str) -> String {
    TEMPLATE
        .replace("{instruction}", instruction)
        .replace("{output_a}", output_a)
        .replace("{output_b}", output_b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Choice {
    A,
    B,
    Tie,
}

fn parse_choice(response: &str) -> Option<Choice> {
    let lower = response.to_ascii_lowercase();
    let a = lower.contains("output (a)");
    let b = lower.contains("output (b)");
    match (a, b) {
        (true, false) => Some(Choice::A),
        (false, true) => Some(Choice::B),
        (false, false) if lower.trim().trim_end_matches('.') == "tie" => Some(Choice::Tie),
        _ => None,
    }
}

pub fn judge_pair<J: Judge + ?Sized, R: Rng + ?Sized>(
    record_id: &str,
    instruction: &str,
    ours: &str,
    baseline: &str,
    judge: &J,
    policy: OrderPolicy,
    rng: &mut R,
) -> Result<JudgeVerdict> {
    if instruction.trim().is_empty() {
        return Err(Error::input(format!("record {record_id}: empty instruction")));
    }
    let order = match policy {
        OrderPolicy::ForcedAB => PresentedOrder::AB,
        OrderPolicy::ForcedBA => PresentedOrder::BA,
        OrderPolicy::Random => {
            if rng.random_bool(0.5) {
                PresentedOrder::AB
            } else {
                PresentedOrder::BA
            }
        }
    };
    let (output_a, output_b) = match order {
        PresentedOrder::AB => (ours, baseline),
        PresentedOrder::BA => (baseline, ours),
    };
    let request = JudgeRequest { instruction, output_a, output_b, prompt: render_prompt(instruction, output_a, output_b) };
    let raw_response = judge.respond(&request)?;
    let choice = parse_choice(&raw_response);
    let preferred = match (choice, order) {
        (Some(Choice::A), PresentedOrder::AB) | (Some(Choice::B), PresentedOrder::BA) => Preference::Ours,
        (Some(Choice::B), PresentedOrder::AB) | (Some(Choice::A), PresentedOrder::BA) => Preference::Baseline,
        (Some(Choice::Tie), _) | (None, _) => Preference::Tie,
    };
    Ok(JudgeVerdict {
        record_id: record_id.to_string(),
        presented_order: order,
        preferred,
        raw_response,
        unparsed: choice.is_none(),
    })
}

/// One comparison to judge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgePair {
    pub id: String,
    pub instruction: String,
    pub ours: String,
    pub baseline: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeRun {
    pub verdicts: Vec<JudgeVerdict>,
    /// `(record id, reason)` for pairs that could not be judged.
    pub failures: Vec<(String, String)>,
    pub unparsed: usize,
    pub template_version: String,
}

impl JudgeRun {
    pub fn win_rate(&self) -> Result<f64> {
        win_rate(&self.verdicts)
    }
}

/// Judges every pair with at most `max_in_flight` concurrent calls.
///
/// Pair `i` draws its presentation order from stream `i` of `seed`, so the
/// order sequence does not depend on scheduling.
pub fn judge_all<J: Judge + ?Sized>(
    pairs: &[JudgePair],
    judge: &J,
    policy: OrderPolicy,
    seed: u64,
    max_in_flight: usize,
) -> Result<JudgeRun> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(max_in_flight.max(1))
        .build()
        .map_err(|e| Error::config(format!("judge thread pool: {e}")))?;
    let outcomes: Vec<Result<JudgeVerdict>> = pool.install(|| {
        pairs
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, i as u64));
                judge_pair(&p.id, &p.instruction, &p.ours, &p.baseline, judge, policy, &mut rng)
            })
            .collect()
    });
    let mut verdicts = Vec::new();
    let mut failures = Vec::new();
    for (pair, outcome) in pairs.iter().zip(outcomes) {
        match outcome {
            Ok(v) => verdicts.push(v),
            Err(e) => failures.push((pair.id.clone(), e.to_string())),
        }
    }
    let unparsed = verdicts.iter().filter(|v| v.unparsed).count();
    Ok(JudgeRun { verdicts, failures, unparsed, template_version: JUDGE_TEMPLATE_VERSION.to_string() })
}

/// Wins over total, ties counted as half a win.
pub fn win_rate(verdicts: &[JudgeVerdict]) -> Result<f64> {
    if verdicts.is_empty() {
        return Err(Error::input("win rate needs at least one verdict"));
    }
    Ok(verdicts.iter().map(|v| v.preferred.score()).sum::<f64>() / verdicts.len() as f64)
}

/// Cohen's kappa between two raters' labels.
///
/// When chance agreement is 1 (both raters always give the same single
/// label) kappa is defined as 1.
pub fn cohen_kappa<T: Eq + Hash>(labels_a: &[T], labels_b: &[T]) -> Result<f64> {
    if labels_a.len() != labels_b.len() {
        return Err(Error::input(format!(
            "label vectors differ in length ({} vs {})",
            labels_a.len(),
            labels_b.len()
        )));
    }
    if labels_a.is_empty() {
        return Err(Error::input("kappa needs at least one label pair"));
    }
    let n = labels_a.len() as f64;
    let observed = labels_a.iter().zip(labels_b).filter(|(a, b)| a == b).count() as f64 / n;
    let mut marg_a: HashMap<&T, usize> = HashMap::new();
    let mut marg_b: HashMap<&T, usize> = HashMap::new();
    for (a, b) in labels_a.iter().zip(labels_b) {
        *marg_a.entry(a).or_default() += 1;
        *marg_b.entry(b).or_default() += 1;
    }
    let expected: f64 = marg_a
        .iter()
        .map(|(label, &ca)| ca as f64 * marg_b.get(label).copied().unwrap_or(0) as f64)
        .sum::<f64>()
        / (n * n);
    if expected >= 1.0 {
        return Ok(1.0);
    }
    Ok((observed - expected) / (1.0 - expected))
}
