//! Generation-quality metrics. Each returns a value in `[0, 1]`.
//!
//! - `f1`: bag-of-words F1 after lowercasing and removing ASCII punctuation.
//! - `rouge_l`: LCS F-measure (beta = 1) over whitespace tokens.
//! - `edit_sim`: `1 - levenshtein / max_len` over Unicode characters.

use std::collections::HashMap;

use super::tasks::Metric;

/// Lowercases, drops ASCII punctuation, splits on whitespace.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    let cleaned: String = text.chars().filter(|c| !c.is_ascii_punctuation()).collect();
    cleaned.to_lowercase().split_whitespace().map(str::to_string).collect()
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn f1(prediction: &str, reference: &str) -> f64 {
    let pred = normalize_tokens(prediction);
    let gold = normalize_tokens(reference);
    if pred.is_empty() || gold.is_empty() {
        return if pred.is_empty() && gold.is_empty() { 1.0 } else { 0.0 };
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &gold {
        *counts.entry(t).or_default() += 1;
    }
    let mut common = 0usize;
    for t in &pred {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    harmonic(common as f64 / pred.len() as f64, common as f64 / gold.len() as f64)
}

pub(crate) fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

pub fn rouge_l(prediction: &str, reference: &str) -> f64 {
    let pred: Vec<&str> = prediction.split_whitespace().collect();
    let gold: Vec<&str> = reference.split_whitespace().collect();
    if pred.is_empty() || gold.is_empty() {
        return if pred.is_empty() && gold.is_empty() { 1.0 } else { 0.0 };
    }
    let lcs = lcs_len(&pred, &gold) as f64;
    harmonic(lcs / pred.len() as f64, lcs / gold.len() as f64)
}

pub fn edit_sim(prediction: &str, reference: &str) -> f64 {
    let longest = prediction.chars().count().max(reference.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - strsim::levenshtein(prediction, reference) as f64 / longest as f64
}

/// Best score over `references`. `Judge` has no text metric and returns `None`.
pub fn score(metric: Metric, prediction: &str, references: &[String]) -> Option<f64> {
    let f: fn(&str, &str) -> f64 = match metric {
        Metric::F1 => f1,
        Metric::RougeL => rouge_l,
        Metric::EditSim => edit_sim,
        Metric::Judge => return None,
    };
    references.iter().map(|r| f(prediction, r)).reduce(f64::max)
}
