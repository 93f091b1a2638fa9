//! CSV and JSON report files. Every CSV starts with a `schema` column naming
//! the file layout and its version; data files carry full-precision numbers.

use std::path::Path;

use schane::framework::TrainingTrace;
use schane::metrics::{CosineStats, FewshotReport};
use schane::numerics::Matrix;
use schane::objectives::ObjectiveConfig;
use schane::{Error, Result};

pub const FEWSHOT_SCHEMA: &str = "schane-fewshot-v1";
pub const EPISODES_SCHEMA: &str = "schane-episodes-v1";
pub const SWEEP_SCHEMA: &str = "schane-sweep-v1";
pub const ABLATION_SCHEMA: &str = "schane-ablation-v1";
pub const TRACE_SCHEMA: &str = "schane-trace-v1";
pub const HISTOGRAM_SCHEMA: &str = "schane-cosine-histogram-v1";
pub const PROJECTION_SCHEMA: &str = "schane-projection-v1";

pub const FEWSHOT_HEADER: [&str; 11] = [
    "schema",
    "objective",
    "way",
    "shot",
    "lambda",
    "tau",
    "mean",
    "median",
    "ci",
    "episodes",
    "seed",
];
pub const ABLATION_HEADER: [&str; 13] = [
    "schema",
    "objective",
    "way",
    "shot",
    "lambda",
    "tau",
    "mean",
    "median",
    "ci",
    "episodes",
    "seed",
    "delta_vs_ce",
    "delta_ci",
];
pub const EPISODES_HEADER: [&str; 6] = ["schema", "objective", "lambda", "episode", "episode_seed", "accuracy"];
pub const TRACE_HEADER: [&str; 4] = ["schema", "epoch", "loss", "val_accuracy"];
pub const HISTOGRAM_HEADER: [&str; 5] = ["schema", "bin_lo", "bin_hi", "positive", "negative"];
pub const PROJECTION_HEADER: [&str; 5] = ["schema", "sample_id", "x", "y", "label"];

/// Written in place of a confidence interval when there is a single episode.
pub const NO_CI: &str = "NA";

/// Six significant digits, for console reports.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    if (-4..6).contains(&magnitude) {
        let decimals = (5 - magnitude).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.5e}")
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

fn write_rows<const N: usize>(path: &Path, header: [&str; N], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One summary row: objective, way, shot, λ, τ, mean, median, ci, episodes, seed.
pub fn summary_row(
    schema: &str,
    objective: &ObjectiveConfig,
    way: usize,
    shot: usize,
    report: &FewshotReport,
    seed: u64,
) -> Vec<String> {
    vec![
        schema.into(),
        objective.kind.name().into(),
        way.to_string(),
        shot.to_string(),
        objective.effective_lambda().to_string(),
        objective.tau.to_string(),
        report.mean.to_string(),
        report.median.to_string(),
        report.ci.map_or(NO_CI.into(), |c| c.to_string()),
        report.episodes.len().to_string(),
        seed.to_string(),
    ]
}

pub fn write_summary(path: &Path, rows: &[Vec<String>]) -> Result<()> {
    write_rows(path, FEWSHOT_HEADER, rows)
}

pub fn write_ablation(path: &Path, rows: &[Vec<String>]) -> Result<()> {
    write_rows(path, ABLATION_HEADER, rows)
}

pub fn write_episodes(path: &Path, results: &[(ObjectiveConfig, &FewshotReport)]) -> Result<()> {
    let rows: Vec<Vec<String>> = results
        .iter()
        .flat_map(|(o, r)| {
            r.episodes.iter().map(move |e| {
                vec![
                    EPISODES_SCHEMA.into(),
                    o.kind.name().into(),
                    o.effective_lambda().to_string(),
                    e.episode.to_string(),
                    e.seed.to_string(),
                    e.accuracy.to_string(),
                ]
            })
        })
        .collect();
    write_rows(path, EPISODES_HEADER, &rows)
}

pub fn write_trace(path: &Path, trace: &TrainingTrace) -> Result<()> {
    let rows: Vec<Vec<String>> = trace
        .epochs
        .iter()
        .map(|e| {
            vec![
                TRACE_SCHEMA.into(),
                e.epoch.to_string(),
                e.loss.to_string(),
                e.val_accuracy.map_or(String::new(), |a| a.to_string()),
            ]
        })
        .collect();
    write_rows(path, TRACE_HEADER, &rows)
}

pub fn write_histogram(path: &Path, stats: &CosineStats) -> Result<()> {
    let rows: Vec<Vec<String>> = (0..stats.positive.len())
        .map(|k| {
            vec![
                HISTOGRAM_SCHEMA.into(),
                stats.bin_edges[k].to_string(),
                stats.bin_edges[k + 1].to_string(),
                stats.positive[k].to_string(),
                stats.negative[k].to_string(),
            ]
        })
        .collect();
    write_rows(path, HISTOGRAM_HEADER, &rows)
}

/// `sample_id` is the row index within the analysed set.
pub fn write_projection(path: &Path, projection: &Matrix, labels: &[usize]) -> Result<()> {
    let rows: Vec<Vec<String>> = projection
        .row_iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (p, l))| {
            vec![
                PROJECTION_SCHEMA.into(),
                i.to_string(),
                p[0].to_string(),
                p[1].to_string(),
                l.to_string(),
            ]
        })
        .collect();
    write_rows(path, PROJECTION_HEADER, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.123456789), "0.123457");
        assert_eq!(sig6(12.3456789), "12.3457");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(0.000012345678), "1.23457e-5");
        assert_eq!(sig6(1.0), "1.00000");
        assert_eq!(sig6(0.0), "0");
    }
}
