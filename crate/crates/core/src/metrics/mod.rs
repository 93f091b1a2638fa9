//! Accuracy, confidence intervals, isotropy and cosine-similarity geometry,
//! and episodic few-shot evaluation.

mod cosine;
mod fewshot;
mod isotropy;

pub use cosine::{cosine_stats, CosineStats};
pub use fewshot::{episode_seed, evaluate_fewshot, paired_difference, EpisodeResult, FewshotConfig, FewshotReport};
pub use isotropy::isotropy_score;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Fraction of rows whose argmax equals the label; ties go to the lowest index.
pub fn top1_accuracy(logits: &Matrix, labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    if labels.len() != logits.rows() {
        return Err(Error::Shape(format!(
            "{} logit rows for {} labels",
            logits.rows(),
            labels.len()
        )));
    }
    let correct = logits
        .row_iter()
        .zip(labels)
        .filter(|(row, &y)| argmax(row) == y)
        .count();
    Ok(correct as f64 / labels.len() as f64)
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Normal critical value for the supported confidence levels.
fn z_value(level: f64) -> Result<f64> {
    const TABLE: [(f64, f64); 3] = [(0.90, 1.645), (0.95, 1.96), (0.99, 2.576)];
    TABLE
        .iter()
        .find(|(l, _)| (l - level).abs() < 1e-12)
        .map(|&(_, z)| z)
        .ok_or_else(|| Error::config("level", "supported confidence levels are 0.90, 0.95 and 0.99"))
}

/// Mean and normal-approximation half-width `z·s/√n`, with `s` the sample
/// standard deviation.
pub fn mean_ci(values: &[f64], level: f64) -> Result<(f64, f64)> {
    let z = z_value(level)?;
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientSamples(format!(
            "confidence interval needs 2 values, got {n}"
        )));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok((mean, z * var.sqrt() / (n as f64).sqrt()))
}

pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}
