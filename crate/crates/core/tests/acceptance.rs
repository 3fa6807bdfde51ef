//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so every line is printed even when all criteria
//! pass. Exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wmbench::bench::{drop, edit_sim, f1, rouge_l};
use wmbench::calibrate::{
    finish_calibration, grid_search, measure_strength, roc, unwatermarked_negatives, CalibrationOutcome, GridSpec,
    StrengthProtocol, StrengthTarget,
};
use wmbench::detect::{detect, green_flags, winmax_z, z_score, DetectorConfig};
use wmbench::greenlist::{is_green, TokenId, Vocabulary};
use wmbench::judge::{cohen_kappa, judge_all, JudgePair, MockJudge, OrderPolicy, Preference};
use wmbench::toy_lm::{synthetic_prompts, ToyLm, ToyLmConfig};
use wmbench::wmgen::{generate, Family, LogitSource, SamplerConfig, WatermarkScheme};

const GEN_LEN: usize = 200;
const PROMPT_LEN: usize = 8;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn lm() -> ToyLm {
    ToyLm::new(ToyLmConfig::default()).expect("default toy LM")
}

fn protocol(seed: u64) -> StrengthProtocol {
    StrengthProtocol { sampler: SamplerConfig::default().with_seed(seed), max_new_tokens: GEN_LEN, ..Default::default() }
}

fn within(limit: Duration, took: Duration) -> (bool, String) {
    (took <= limit, format!("{:.1}s of {}s budget", took.as_secs_f64(), limit.as_secs()))
}

// 1
fn z_exactness() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let total = rng.random_range(1..=5000usize);
        let green = rng.random_range(0..=total);
        let gamma = rng.random_range(0.01..0.99);
        // Standardised proportion: (p_hat - gamma) / sqrt(gamma (1 - gamma) / n).
        let p_hat = green as f64 / total as f64;
        let oracle = (p_hat - gamma) / (gamma * (1.0 - gamma) / total as f64).sqrt();
        let got = z_score(green, total, gamma).unwrap();
        worst = worst.max((got - oracle).abs());
    }
    let (fast, time) = within(Duration::from_secs(1), start.elapsed());
    verdict(worst <= 1e-9 && fast, format!("max |z - oracle| = {worst:.2e}; {time}"))
}

// 2
fn generator_detector_agreement() -> Verdict {
    let start = Instant::now();
    let lm = lm();
    let vocab = lm.vocab();
    let prompts = synthetic_prompts(vocab, 1000, PROMPT_LEN, 2);
    let gammas = [0.1, 0.25, 0.5];
    let deltas = [0.5, 1.0, 2.0, 5.0];
    let mut agree = 0;
    for (i, prompt) in prompts.iter().enumerate() {
        let family = Family::ALL[i % Family::ALL.len()];
        let scheme = WatermarkScheme::new(family, gammas[i % 3], deltas[i % 4], 100 + i as u64 % 7).unwrap();
        let cfg = SamplerConfig::default().with_seed(i as u64);
        let rec = generate(&lm, prompt, &scheme, &cfg, GEN_LEN, None).unwrap();
        let flags = green_flags(&rec.output, &scheme, vocab, prompt.last().copied()).unwrap();
        let count = flags.iter().filter(|g| **g).count();
        agree += (flags == rec.green_flags && count == rec.green_count() && rec.output.len() == GEN_LEN) as usize;
    }
    let (fast, time) = within(Duration::from_secs(60), start.elapsed());
    verdict(agree == prompts.len() && fast, format!("{agree}/{} records agree; {time}", prompts.len()))
}

// 3
fn hard_guarantee() -> Verdict {
    let lm = lm();
    let vocab = lm.vocab();
    let scheme = WatermarkScheme::new(Family::Hard, 0.25, 0.0, 3).unwrap();
    let closed_form = (200.0 - 50.0) / 37.5f64.sqrt();
    let mut all_green = 0;
    let mut worst = 0.0f64;
    for (i, prompt) in synthetic_prompts(vocab, 500, PROMPT_LEN, 3).iter().enumerate() {
        let rec = generate(&lm, prompt, &scheme, &SamplerConfig::default().with_seed(i as u64), GEN_LEN, None).unwrap();
        all_green += (rec.green_flags.iter().all(|g| *g) && rec.output.len() == GEN_LEN) as usize;
        let d = detect(&rec.output, &scheme, vocab, &DetectorConfig::default(), prompt.last().copied()).unwrap();
        worst = worst.max((d.z - closed_form).abs());
    }
    verdict(
        all_green == 500 && worst <= 1e-6,
        format!("{all_green}/500 fully green; z = {closed_form:.4}, max deviation {worst:.1e}"),
    )
}

// 4
fn null_behaviour() -> Verdict {
    let lm = lm();
    let vocab = lm.vocab();
    let prompts = synthetic_prompts(vocab, 1000, PROMPT_LEN, 4);
    let negatives = unwatermarked_negatives(&prompts, &lm, &protocol(4)).unwrap();
    let scheme = WatermarkScheme::new(Family::Soft, 0.25, 2.0, 4).unwrap();
    let z: Vec<f64> = negatives
        .iter()
        .map(|n| detect(&n.tokens, &scheme, vocab, &DetectorConfig::default(), n.first_context).unwrap().z)
        .collect();
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    let fpr = z.iter().filter(|&&v| v >= 4.0).count() as f64 / z.len() as f64;
    verdict(
        (-0.15..=0.15).contains(&mean) && fpr < 0.005,
        format!("mean z = {mean:.4}, FPR at 4 = {:.2}%", 100.0 * fpr),
    )
}

// 5
fn strength_monotonicity() -> Verdict {
    let start = Instant::now();
    let lm = lm();
    let corpus = synthetic_prompts(lm.vocab(), 500, PROMPT_LEN, 5);
    let proto = protocol(5);
    let gammas = [0.1, 0.25, 0.5];
    let deltas = [0.0, 0.25, 0.5, 0.75, 1.0, 2.0, 10.0];
    let mut tpr = vec![vec![0.0; deltas.len()]; gammas.len()];
    for (gi, &g) in gammas.iter().enumerate() {
        for (di, &d) in deltas.iter().enumerate() {
            let scheme = WatermarkScheme::new(Family::Soft, g, d, 5).unwrap();
            tpr[gi][di] = measure_strength(&scheme, &corpus, &lm, &proto, &[]).unwrap().tpr;
        }
    }
    let slack = 0.02;
    let delta_ok = tpr.iter().all(|row| row.windows(2).all(|w| w[1] >= w[0] - slack));
    let last = deltas.len() - 1;
    let gamma_ok = (1..gammas.len()).all(|i| tpr[i][last] <= tpr[i - 1][last] + slack);
    let rows: Vec<String> = gammas
        .iter()
        .zip(&tpr)
        .map(|(g, r)| format!("g={g}: {}", r.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(" ")))
        .collect();
    let (fast, time) = within(Duration::from_secs(600), start.elapsed());
    verdict(delta_ok && gamma_ok && fast, format!("deltas {deltas:?}; {}; {time}", rows.join("; ")))
}

// 6
fn calibration_convergence(store: &mut Option<CalibrationOutcome>) -> Verdict {
    let start = Instant::now();
    let lm = lm();
    let corpus = synthetic_prompts(lm.vocab(), 500, PROMPT_LEN, 6);
    let proto = protocol(6);
    // At 200 tokens the z-score is discrete, so TPR moves in jumps of several
    // points as the threshold changes. The lattice spacing depends on gamma,
    // so a denser gamma axis gives threshold tuning more jump positions.
    let gammas = vec![0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5];
    let deltas: Vec<f64> = (6..=12).map(|i| i as f64 / 20.0).collect();
    let grid = GridSpec::new(gammas, deltas, 0.25, 2.0).unwrap();
    let high = StrengthTarget::new(0.95).unwrap();
    let low = StrengthTarget::new(0.70).unwrap();
    let search = match grid_search(&high, &grid, &corpus, &lm, Family::Soft, 6, &proto, &[]) {
        Ok(s) => s,
        Err(e) => return verdict(false, format!("grid search failed: {e}")),
    };
    let mut details = Vec::new();
    let mut pass = true;
    for target in [high, low] {
        match finish_calibration(&target, &grid, &search, &corpus, &proto, None) {
            Ok(out) => {
                let rerun = measure_strength(&out.scheme, &corpus, &lm, &out.protocol, &[]).unwrap().tpr;
                let ok = target.deviation(out.achieved_tpr) <= target.tolerance
                    && target.deviation(rerun) <= target.tolerance
                    && wmbench::calibrate::corpus_hash(&corpus) == out.corpus_hash;
                pass &= ok;
                details.push(format!(
                    "target {}: gamma={} delta={} threshold={:.1} TPR={:.3} rerun={:.3}",
                    target.target_tpr, out.scheme.gamma, out.scheme.delta, out.scheme.z_threshold, out.achieved_tpr, rerun
                ));
                if target.target_tpr == 0.95 {
                    *store = Some(out);
                }
            }
            Err(e) => {
                pass = false;
                details.push(format!("target {}: {e}", target.target_tpr));
            }
        }
    }
    let (fast, time) = within(Duration::from_secs(900), start.elapsed());
    verdict(pass && fast, format!("{}; {time}", details.join("; ")))
}

fn mann_whitney(pos: &[f64], neg: &[f64]) -> f64 {
    let mut wins = 0.0;
    for p in pos {
        for n in neg {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

// 7
fn auc(calibrated: Option<&CalibrationOutcome>) -> Verdict {
    let Some(out) = calibrated else {
        return verdict(false, "no calibrated 0.95 scheme available");
    };
    let lm = lm();
    let vocab = lm.vocab();
    let corpus = synthetic_prompts(vocab, 500, PROMPT_LEN, 6);
    let m = measure_strength(&out.scheme, &corpus, &lm, &out.protocol, &[]).unwrap();
    let negatives = unwatermarked_negatives(&corpus, &lm, &out.protocol).unwrap();
    let neg_z: Vec<f64> = negatives
        .iter()
        .map(|n| detect(&n.tokens, &out.scheme, vocab, &out.protocol.detector, n.first_context).unwrap().z)
        .collect();
    let curve = roc(&m.positive_z(), &neg_z).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        // Rounded scores so that ties occur.
        let pos: Vec<f64> = (0..50).map(|_| (rng.random_range(-2.0..3.0f64) * 4.0).round() / 4.0).collect();
        let neg: Vec<f64> = (0..50).map(|_| (rng.random_range(-3.0..2.0f64) * 4.0).round() / 4.0).collect();
        worst = worst.max((roc(&pos, &neg).unwrap().auc - mann_whitney(&pos, &neg)).abs());
    }
    verdict(
        curve.auc >= 0.98 && worst <= 1e-9,
        format!("AUC = {:.4} at the calibrated scheme; max |AUC - Mann-Whitney| = {worst:.1e}", curve.auc),
    )
}

// 8
fn short_output_degradation() -> Verdict {
    let lm = lm();
    let corpus = synthetic_prompts(lm.vocab(), 200, PROMPT_LEN, 8);
    let scheme = WatermarkScheme::new(Family::Soft, 0.25, 2.0, 8).unwrap();
    let long = measure_strength(&scheme, &corpus, &lm, &protocol(8), &[]).unwrap();
    let short_proto = StrengthProtocol { max_new_tokens: 8, ..protocol(8) };
    let short = measure_strength(&scheme, &corpus, &lm, &short_proto, &[]).unwrap();
    let all_flagged = short.positives.iter().all(|d| d.insufficient_tokens && !d.detected);
    verdict(
        short.tpr == 0.0 && all_flagged,
        format!("TPR {:.1}% at 200 tokens, {:.1}% at 8 tokens (min_tokens 16)", 100.0 * long.tpr, 100.0 * short.tpr),
    )
}

/// (table, model, method, column, baseline GM, watermarked GM, printed drop %).
const DROP_FIXTURES: &[(&str, &str, &str, &str, f64, f64, f64)] = &[
    ("strength95", "Llama2", "hard", "C1", 17.8, 5.0, 71.9),
    ("strength95", "Llama2", "hard", "C2", 21.3, 12.1, 43.4),
    ("strength95", "Llama2", "hard", "C3", 37.5, 16.4, 56.3),
    ("strength95", "Llama2", "soft", "C1", 17.8, 7.7, 56.6),
    ("strength95", "Llama2", "soft", "C2", 21.3, 9.9, 53.3),
    ("strength95", "Llama2", "soft", "C3", 37.5, 19.8, 47.2),
    ("strength95", "Llama2", "gpt", "C1", 17.8, 13.6, 23.9),
    ("strength95", "Llama2", "gpt", "C2", 21.3, 5.2, 75.5),
    ("strength95", "Llama2", "gpt", "C3", 37.5, 14.7, 60.7),
    ("strength95", "Llama2", "v2", "C1", 17.8, 11.2, 37.1),
    ("strength95", "Llama2", "v2", "C2", 21.3, 13.3, 37.4),
    ("strength95", "Llama2", "v2", "C3", 37.5, 13.9, 63.0),
    ("strength95", "Internlm", "hard", "C1", 26.3, 1.8, 93.1),
    ("strength95", "Internlm", "hard", "C2", 18.4, 9.6, 47.9),
    ("strength95", "Internlm", "hard", "C3", 31.6, 11.7, 63.0),
    ("strength95", "Internlm", "soft", "C1", 26.3, 6.2, 76.3),
    ("strength95", "Internlm", "soft", "C2", 18.4, 7.6, 58.7),
    ("strength95", "Internlm", "soft", "C3", 31.6, 10.6, 66.5),
    ("strength95", "Internlm", "gpt", "C1", 26.3, 3.2, 87.8),
    ("strength95", "Internlm", "gpt", "C2", 18.4, 7.8, 57.6),
    ("strength95", "Internlm", "gpt", "C3", 31.6, 11.4, 63.8),
    ("strength95", "Internlm", "v2", "C1", 26.3, 11.0, 58.4),
    ("strength95", "Internlm", "v2", "C2", 18.4, 7.6, 58.4),
    ("strength95", "Internlm", "v2", "C3", 31.6, 15.8, 50.1),
    ("strength95", "Llama2", "hard", "C4", 23.3, 11.6, 50.0),
    ("strength95", "Llama2", "hard", "C5", 54.7, 1.1, 98.0),
    ("strength95", "Llama2", "hard", "Overall", 28.3, 10.1, 64.1),
    ("strength95", "Llama2", "soft", "C4", 23.3, 10.2, 56.3),
    ("strength95", "Llama2", "soft", "C5", 54.7, 0.6, 98.9),
    ("strength95", "Llama2", "soft", "Overall", 28.3, 10.7, 62.3),
    ("strength95", "Llama2", "gpt", "C4", 23.3, 7.2, 69.1),
    ("strength95", "Llama2", "gpt", "C5", 54.7, 0.2, 99.5),
    ("strength95", "Llama2", "gpt", "Overall", 28.3, 9.1, 67.9),
    ("strength95", "Llama2", "v2", "C4", 23.3, 11.6, 50.2),
    ("strength95", "Llama2", "v2", "C5", 54.7, 0.9, 98.4),
    ("strength95", "Llama2", "v2", "Overall", 28.3, 11.2, 60.3),
    ("strength95", "Internlm", "hard", "C4", 17.8, 6.4, 64.3),
    ("strength95", "Internlm", "hard", "C5", 21.5, 0.8, 96.5),
    ("strength95", "Internlm", "hard", "Overall", 23.3, 6.6, 71.6),
    ("strength95", "Internlm", "soft", "C4", 17.8, 4.6, 74.0),
    ("strength95", "Internlm", "soft", "C5", 21.5, 0.3, 98.6),
    ("strength95", "Internlm", "soft", "Overall", 23.3, 6.5, 72.2),
    ("strength95", "Internlm", "gpt", "C4", 17.8, 5.2, 70.9),
    ("strength95", "Internlm", "gpt", "C5", 21.5, 0.5, 97.7),
    ("strength95", "Internlm", "gpt", "Overall", 23.3, 6.2, 73.4),
    ("strength95", "Internlm", "v2", "C4", 17.8, 5.5, 69.2),
    ("strength95", "Internlm", "v2", "C5", 21.5, 0.5, 97.7),
    ("strength95", "Internlm", "v2", "Overall", 23.3, 8.9, 61.7),
    ("strength70", "Llama2", "hard", "C1", 17.8, 13.7, 23.3),
    ("strength70", "Llama2", "hard", "C2", 21.3, 19.4, 8.9),
    ("strength70", "Llama2", "hard", "C3", 37.5, 21.0, 44.1),
    ("strength70", "Llama2", "soft", "C1", 17.8, 13.8, 22.6),
    ("strength70", "Llama2", "soft", "C2", 21.3, 19.4, 8.7),
    ("strength70", "Llama2", "soft", "C3", 37.5, 20.6, 45.1),
    ("strength70", "Llama2", "gpt", "C1", 17.8, 17.0, 4.4),
    ("strength70", "Llama2", "gpt", "C2", 21.3, 13.8, 35.0),
    ("strength70", "Llama2", "gpt", "C3", 37.5, 17.3, 53.9),
    ("strength70", "Llama2", "v2", "C1", 17.8, 14.9, 16.6),
    ("strength70", "Llama2", "v2", "C2", 21.3, 19.4, 8.8),
    ("strength70", "Llama2", "v2", "C3", 37.5, 25.1, 33.2),
    ("strength70", "Llama2", "hard", "C4", 23.3, 19.9, 14.4),
    ("strength70", "Llama2", "hard", "C5", 54.7, 17.3, 68.4),
    ("strength70", "Llama2", "hard", "Overall", 28.3, 18.4, 35.1),
    ("strength70", "Llama2", "soft", "C4", 23.3, 20.2, 13.3),
    ("strength70", "Llama2", "soft", "C5", 54.7, 19.0, 65.2),
    ("strength70", "Llama2", "soft", "Overall", 28.3, 18.6, 34.4),
    ("strength70", "Llama2", "gpt", "C4", 23.3, 15.0, 35.4),
    ("strength70", "Llama2", "gpt", "C5", 54.7, 4.1, 92.5),
    ("strength70", "Llama2", "gpt", "Overall", 28.3, 14.5, 48.7),
    ("strength70", "Llama2", "v2", "C4", 23.3, 19.7, 15.3),
    ("strength70", "Llama2", "v2", "C5", 54.7, 17.0, 68.9),
    ("strength70", "Llama2", "v2", "Overall", 28.3, 19.5, 31.2),
];

// 9
fn drop_arithmetic() -> Verdict {
    let mut misses = Vec::new();
    let mut worst = 0.0f64;
    for &(table, model, method, col, base, wm, printed) in DROP_FIXTURES {
        let pct = 100.0 * drop(base, wm).unwrap();
        let err = (pct - printed).abs();
        worst = worst.max(err);
        if err > 0.5 {
            misses.push(format!("{table}/{model}/{method}/{col}: {pct:.2} vs {printed}"));
        }
    }
    let example = format!("{:.1}", 100.0 * drop(18.4, 7.6).unwrap());
    verdict(
        misses.is_empty() && example == "58.7",
        format!(
            "{} fixtures, max error {worst:.3}pp, (18.4, 7.6) -> {example}%{}",
            DROP_FIXTURES.len(),
            if misses.is_empty() { String::new() } else { format!("; misses: {}", misses.join(", ")) }
        ),
    )
}

fn oracle_f1(pred: &str, gold: &str) -> f64 {
    let norm = |s: &str| -> Vec<String> {
        s.to_lowercase()
            .replace(|c: char| c.is_ascii_punctuation(), "")
            .split_whitespace()
            .map(String::from)
            .collect()
    };
    let (p, g) = (norm(pred), norm(gold));
    if p.is_empty() && g.is_empty() {
        return 1.0;
    }
    if p.is_empty() || g.is_empty() {
        return 0.0;
    }
    let mut distinct = p.clone();
    distinct.sort();
    distinct.dedup();
    let common: usize = distinct
        .iter()
        .map(|t| p.iter().filter(|x| *x == t).count().min(g.iter().filter(|x| *x == t).count()))
        .sum();
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / p.len() as f64;
    let recall = common as f64 / g.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

fn oracle_rouge(pred: &str, gold: &str) -> f64 {
    let a: Vec<&str> = pred.split_whitespace().collect();
    let b: Vec<&str> = gold.split_whitespace().collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] { t[i - 1][j - 1] + 1 } else { t[i - 1][j].max(t[i][j - 1]) };
        }
    }
    let lcs = t[a.len()][b.len()] as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let (precision, recall) = (lcs / a.len() as f64, lcs / b.len() as f64);
    2.0 * precision * recall / (precision + recall)
}

fn oracle_edit(pred: &str, gold: &str) -> f64 {
    let a: Vec<char> = pred.chars().collect();
    let b: Vec<char> = gold.chars().collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in t.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in t[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = t[i - 1][j - 1] + (a[i - 1] != b[j - 1]) as usize;
            t[i][j] = sub.min(t[i - 1][j] + 1).min(t[i][j - 1] + 1);
        }
    }
    1.0 - t[a.len()][b.len()] as f64 / a.len().max(b.len()) as f64
}

// 10
fn metric_oracles() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let vocab = ["the", "The", "cat", "cat.", "sat", "on", "mat", "a", "A,", "dog!", "é"];
    let phrase = |rng: &mut ChaCha8Rng| {
        let n = rng.random_range(0..8);
        (0..n).map(|_| vocab[rng.random_range(0..vocab.len())]).collect::<Vec<_>>().join(" ")
    };
    let chars = ['a', 'b', 'c', 'é', ' ', '😀'];
    let word = |rng: &mut ChaCha8Rng| {
        let n = rng.random_range(0..10);
        (0..n).map(|_| chars[rng.random_range(0..chars.len())]).collect::<String>()
    };
    let mut mismatches = [0usize; 3];
    for _ in 0..1000 {
        let (p, g) = (phrase(&mut rng), phrase(&mut rng));
        mismatches[0] += (f1(&p, &g) != oracle_f1(&p, &g)) as usize;
        let (p, g) = (phrase(&mut rng), phrase(&mut rng));
        mismatches[1] += (rouge_l(&p, &g) != oracle_rouge(&p, &g)) as usize;
        let (p, g) = (word(&mut rng), word(&mut rng));
        mismatches[2] += (edit_sim(&p, &g) != oracle_edit(&p, &g)) as usize;
    }
    let (fast, time) = within(Duration::from_secs(30), start.elapsed());
    verdict(
        mismatches == [0, 0, 0] && fast,
        format!("mismatches F1/Rouge-L/EditSim = {mismatches:?} over 1000 pairs each; {time}"),
    )
}

// 11
fn winmax_equivalence() -> Verdict {
    let vocab = Vocabulary::new(1000).unwrap();
    let cfg = DetectorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut equal = 0;
    let mut dominant = 0;
    for i in 0..200 {
        let scheme = WatermarkScheme::new(Family::V2, [0.1, 0.25, 0.5][i % 3], 2.0, i as u64).unwrap();
        let len = rng.random_range(cfg.min_window..=200);
        // Plant a green-rich stretch in some sequences so the best window varies.
        let bias_from = rng.random_range(0..len);
        let mut seq: Vec<TokenId> = Vec::with_capacity(len);
        let mut prev = vocab.sentinel();
        for pos in 0..len {
            let mut t = rng.random_range(0..1000);
            if pos >= bias_from && i % 2 == 0 {
                for _ in 0..20 {
                    if is_green(t, prev, &scheme.hash, scheme.gamma, vocab).unwrap() {
                        break;
                    }
                    t = rng.random_range(0..1000);
                }
            }
            seq.push(t);
            prev = t;
        }
        let flags: Vec<bool> = seq
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let ctx = if k == 0 { vocab.sentinel() } else { seq[k - 1] };
                is_green(t, ctx, &scheme.hash, scheme.gamma, vocab).unwrap()
            })
            .collect();
        let mut brute = f64::NEG_INFINITY;
        for s in 0..len {
            for e in s + cfg.min_window..=len {
                let g = flags[s..e].iter().filter(|f| **f).count();
                brute = brute.max(z_score(g, e - s, scheme.gamma).unwrap());
            }
        }
        let (got, _) = winmax_z(&seq, &scheme, vocab, cfg.min_window, None).unwrap();
        let full = z_score(flags.iter().filter(|f| **f).count(), len, scheme.gamma).unwrap();
        equal += (got == brute) as usize;
        dominant += (got >= full) as usize;
    }
    verdict(equal == 200 && dominant == 200, format!("{equal}/200 equal brute force, {dominant}/200 >= full-sequence z"))
}

// 12
fn judge_protocol() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let pairs: Vec<JudgePair> = (0..200)
        .map(|i| JudgePair {
            id: format!("p{i}"),
            instruction: "answer the question".into(),
            ours: "x".repeat(rng.random_range(1..40)),
            baseline: "y".repeat(rng.random_range(1..40)),
        })
        .collect();
    let prefs = |policy| -> Vec<Preference> {
        judge_all(&pairs, &MockJudge, policy, 12, 4).unwrap().verdicts.iter().map(|v| v.preferred).collect()
    };
    let (ab, ba, random) = (prefs(OrderPolicy::ForcedAB), prefs(OrderPolicy::ForcedBA), prefs(OrderPolicy::Random));
    let rate = |p: &[Preference]| p.iter().map(|x| x.score()).sum::<f64>() / p.len() as f64;
    let identical = ab == ba && ba == random && ab.len() == 200;

    let k1 = cohen_kappa(&[0, 1, 2, 1, 0], &[0, 1, 2, 1, 0]).unwrap();
    let k0 = cohen_kappa(&[1, 1, 0, 0], &[1, 0, 1, 0]).unwrap();
    let mut in_range = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..30);
        let a: Vec<u8> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let b: Vec<u8> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let k = cohen_kappa(&a, &b).unwrap();
        in_range += (-1.0..=1.0).contains(&k) as usize;
    }
    verdict(
        identical && k1 == 1.0 && k0 == 0.0 && in_range == 1000,
        format!(
            "win rates AB/BA/random = {:.3}/{:.3}/{:.3}; kappa constructions {k0}, {k1}; {in_range}/1000 in [-1, 1]",
            rate(&ab),
            rate(&ba),
            rate(&random)
        ),
    )
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut calibrated = None;
    let mut results: Vec<(u8, &str, Verdict)> = Vec::new();
    let mut run = |id: u8, name: &'static str, f: &mut dyn FnMut() -> Verdict| {
        let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        println!("{} [{id:02}] {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((id, name, v));
    };
    run(1, "z-score exactness", &mut z_exactness);
    run(2, "generator/detector agreement", &mut generator_detector_agreement);
    run(3, "hard watermark guarantee", &mut hard_guarantee);
    run(4, "null behaviour", &mut null_behaviour);
    run(5, "strength monotonicity", &mut strength_monotonicity);
    run(6, "calibration convergence", &mut || calibration_convergence(&mut calibrated));
    run(7, "ROC AUC", &mut || auc(calibrated.as_ref()));
    run(8, "short-output degradation", &mut short_output_degradation);
    run(9, "drop arithmetic", &mut drop_arithmetic);
    run(10, "metric oracles", &mut metric_oracles);
    run(11, "WinMax brute-force equivalence", &mut winmax_equivalence);
    run(12, "judge protocol", &mut judge_protocol);
    let failed: Vec<String> = results.iter().filter(|r| !r.2.pass).map(|r| format!("[{:02}] {}", r.0, r.1)).collect();
    println!("acceptance: {}/{} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
