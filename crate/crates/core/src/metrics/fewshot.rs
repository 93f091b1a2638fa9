use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{argmax, mean_ci, median, top1_accuracy};
use crate::data::{sample_episode, Dataset};
use crate::error::{Error, Result};
use crate::framework::{adapt_to_episode, encode, head_logits, EncoderParams, FinetuneConfig};
use crate::objectives::ObjectiveConfig;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FewshotConfig {
    pub way: usize,
    pub shot: usize,
    pub query_shot: usize,
    pub episodes: usize,
    pub finetune: FinetuneConfig,
    /// Worker threads for episode evaluation; 0 or 1 runs serially.
    pub threads: usize,
}

impl Default for FewshotConfig {
    fn default() -> Self {
        Self {
            way: 5,
            shot: 1,
            query_shot: 15,
            episodes: 200,
            finetune: FinetuneConfig::default(),
            threads: 1,
        }
    }
}

impl FewshotConfig {
    pub fn validate(&self) -> Result<()> {
        if self.way < 2 {
            return Err(Error::config("way", "must be at least 2"));
        }
        if self.shot == 0 {
            return Err(Error::config("shot", "must be at least 1"));
        }
        if self.query_shot == 0 {
            return Err(Error::config("query_shot", "must be at least 1"));
        }
        if self.episodes == 0 {
            return Err(Error::config("episodes", "must be at least 1"));
        }
        self.finetune.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub episode: usize,
    pub seed: u64,
    /// Fraction of query samples classified correctly.
    pub accuracy: f64,
    /// Query accuracy per episode label `0..way`.
    pub per_class_accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewshotReport {
    pub mean: f64,
    pub median: f64,
    /// 95% half-width; absent for a single episode.
    pub ci: Option<f64>,
    pub episodes: Vec<EpisodeResult>,
}

impl FewshotReport {
    pub fn accuracies(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.accuracy).collect()
    }
}

/// Seed of episode `index`; independent of the objective, so every compared
/// run sees the same support and query sets.
pub fn episode_seed(seed: u64, index: usize) -> u64 {
    seed::derive(seed::derive(seed, seed::stream::EPISODE), index as u64)
}

fn run_episode(
    params: &EncoderParams,
    ds: &Dataset,
    cfg: &FewshotConfig,
    objective: &ObjectiveConfig,
    seed: u64,
    index: usize,
) -> Result<EpisodeResult> {
    let ep_seed = episode_seed(seed, index);
    let episode = sample_episode(ds, cfg.way, cfg.shot, cfg.query_shot, ep_seed)?;
    let adapted = adapt_to_episode(params, &episode, objective, &cfg.finetune, ep_seed)?;
    let (z, _) = encode(&adapted, &episode.query, false, 0)?;
    let logits = head_logits(&adapted, &z)?;
    let accuracy = top1_accuracy(&logits, &episode.query_labels)?;
    let mut hits = vec![0usize; cfg.way];
    let mut totals = vec![0usize; cfg.way];
    for (row, &y) in logits.row_iter().zip(&episode.query_labels) {
        totals[y] += 1;
        hits[y] += usize::from(argmax(row) == y);
    }
    Ok(EpisodeResult {
        episode: index,
        seed: ep_seed,
        accuracy,
        per_class_accuracy: hits.iter().zip(&totals).map(|(&h, &t)| h as f64 / t as f64).collect(),
    })
}

/// Adapts a copy of `params` to each sampled episode and scores its query set.
///
/// Episode `i` uses [`episode_seed`]`(seed, i)`, so serial and parallel runs
/// give identical per-episode results, aggregated in episode order.
pub fn evaluate_fewshot(
    params: &EncoderParams,
    dataset: &Dataset,
    cfg: &FewshotConfig,
    objective: &ObjectiveConfig,
    seed: u64,
) -> Result<FewshotReport> {
    cfg.validate()?;
    objective.validate()?;
    let run = |i| run_episode(params, dataset, cfg, objective, seed, i);
    let episodes: Vec<EpisodeResult> = if cfg.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::config("threads", e.to_string()))?;
        pool.install(|| (0..cfg.episodes).into_par_iter().map(run).collect::<Result<_>>())?
    } else {
        (0..cfg.episodes).map(run).collect::<Result<_>>()?
    };
    let acc: Vec<f64> = episodes.iter().map(|e| e.accuracy).collect();
    let (mean, ci) = if acc.len() >= 2 {
        let (m, h) = mean_ci(&acc, 0.95)?;
        (m, Some(h))
    } else {
        (acc[0], None)
    };
    Ok(FewshotReport {
        mean,
        median: median(&acc)?,
        ci,
        episodes,
    })
}

/// Mean and 95% half-width of the per-episode difference `a − b`.
pub fn paired_difference(a: &FewshotReport, b: &FewshotReport) -> Result<(f64, f64)> {
    if a.episodes.len() != b.episodes.len() || a.episodes.iter().zip(&b.episodes).any(|(x, y)| x.seed != y.seed) {
        return Err(Error::Shape("reports do not cover the same episodes".into()));
    }
    let diff: Vec<f64> = a
        .episodes
        .iter()
        .zip(&b.episodes)
        .map(|(x, y)| x.accuracy - y.accuracy)
        .collect();
    mean_ci(&diff, 0.95)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticSpec};
    use crate::framework::{AugmentPolicy, EncoderShape, HeadInit};
    use rand::seq::SliceRandom;

    fn setup(noise: f64) -> (Dataset, EncoderParams) {
        let ds = generate_synthetic(&SyntheticSpec {
            class_count: 6,
            feature_dim: 16,
            samples_per_class: 30,
            mean_radius: 5.0,
            noise_sigma: noise,
            seed: 2,
        })
        .unwrap();
        let shape = EncoderShape {
            input: 16,
            hidden: vec![32],
            embedding: 16,
            classes: 4,
        };
        (ds, EncoderParams::init(&shape, 0.0, 1).unwrap())
    }

    fn quick(episodes: usize, way: usize, shot: usize) -> FewshotConfig {
        FewshotConfig {
            way,
            shot,
            query_shot: 5,
            episodes,
            finetune: FinetuneConfig {
                steps: 2,
                augment: AugmentPolicy::identity(),
                ..Default::default()
            },
            threads: 1,
        }
    }

    #[test]
    fn noiseless_task_is_solved() {
        let (ds, p) = setup(0.0);
        let r = evaluate_fewshot(&p, &ds, &quick(10, 5, 5), &ObjectiveConfig::default(), 3).unwrap();
        assert_eq!(r.mean, 1.0);
        assert_eq!(r.ci, Some(0.0));
        assert!(r
            .episodes
            .iter()
            .all(|e| e.per_class_accuracy.iter().all(|&a| a == 1.0)));
    }

    #[test]
    fn random_labels_give_chance() {
        let (ds, p) = setup(1.0);
        let mut labels = ds.labels().to_vec();
        labels.shuffle(&mut seed::rng(4));
        let shuffled = Dataset::new(ds.features().clone(), labels, ds.class_count()).unwrap();
        let mut cfg = quick(200, 2, 1);
        cfg.finetune.head_init = HeadInit::Random;
        let r = evaluate_fewshot(&p, &shuffled, &cfg, &ObjectiveConfig::ce(), 5).unwrap();
        let ci = r.ci.unwrap();
        assert!((r.mean - 0.5).abs() < 2.0 * ci.max(0.03), "mean {} ci {ci}", r.mean);
    }

    #[test]
    fn parallel_matches_serial() {
        let (ds, p) = setup(1.0);
        let cfg = quick(12, 3, 1);
        let obj = ObjectiveConfig::default();
        let serial = evaluate_fewshot(&p, &ds, &cfg, &obj, 8).unwrap();
        let parallel = evaluate_fewshot(&p, &ds, &FewshotConfig { threads: 4, ..cfg }, &obj, 8).unwrap();
        assert_eq!(serial, parallel);
        assert_eq!(serial, evaluate_fewshot(&p, &ds, &cfg, &obj, 8).unwrap());
    }

    #[test]
    fn single_episode_has_no_ci() {
        let (ds, p) = setup(1.0);
        let r = evaluate_fewshot(&p, &ds, &quick(1, 3, 1), &ObjectiveConfig::ce(), 0).unwrap();
        assert_eq!(r.ci, None);
        assert_eq!(r.mean, r.median);
    }

    #[test]
    fn paired_difference_requires_same_episodes() {
        let (ds, p) = setup(1.0);
        let cfg = quick(5, 3, 1);
        let a = evaluate_fewshot(&p, &ds, &cfg, &ObjectiveConfig::ce(), 0).unwrap();
        let b = evaluate_fewshot(&p, &ds, &cfg, &ObjectiveConfig::ce(), 1).unwrap();
        assert!(paired_difference(&a, &b).is_err());
        assert_eq!(paired_difference(&a, &a).unwrap(), (0.0, 0.0));
    }
}
