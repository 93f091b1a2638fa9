use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::augment::{make_view_batch, AugmentPolicy};
use super::encoder::{backprop, encode, head_logits, Dense, EncoderParams, ParamGrads};
use crate::data::{Dataset, Episode};
use crate::error::{Error, Result};
use crate::metrics::top1_accuracy;
use crate::numerics::Matrix;
use crate::objectives::{Diagnostics, EmbeddingBatch, ObjectiveConfig};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub augment: AugmentPolicy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 128,
            learning_rate: 1e-4,
            weight_decay: 0.05,
            augment: AugmentPolicy::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be finite and non-negative"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::config("weight_decay", "must be finite and non-negative"));
        }
        self.augment.validate()
    }
}

/// Everything needed to continue training exactly where it stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub params: EncoderParams,
    pub adam: AdamState,
    /// Completed epochs.
    pub epoch: usize,
    pub seed: u64,
}

impl TrainState {
    pub fn new(params: EncoderParams, config: &TrainConfig, seed: u64) -> Self {
        let adam = AdamState::new(&params, config.learning_rate, config.weight_decay);
        Self {
            params,
            adam,
            epoch: 0,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Sample-weighted mean training loss over the epoch.
    pub loss: f64,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub epochs: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub loss: f64,
    pub grads: ParamGrads,
    pub diagnostics: Diagnostics,
}

/// Loss and parameter gradients for one batch of view rows.
///
/// Dropout is active when `dropout_seed` is given. Fails if any embedding hit
/// the zero-norm guard.
pub fn loss_and_grads(
    params: &EncoderParams,
    inputs: &Matrix,
    labels: &[usize],
    view_of: &[usize],
    objective: &ObjectiveConfig,
    dropout_seed: Option<u64>,
) -> Result<StepOutput> {
    let (z, cache) = encode(params, inputs, dropout_seed.is_some(), dropout_seed.unwrap_or(0))?;
    if cache.guard_fired() {
        return Err(Error::DegenerateInput("encoder produced a zero-norm embedding".into()));
    }
    let logits = head_logits(params, &z)?;
    let batch = EmbeddingBatch::new(z, labels.to_vec(), view_of.to_vec())?;
    let result = objective.evaluate(&logits, &batch)?;
    if !result.value.is_finite() {
        return Err(Error::NonFinite("training loss".into()));
    }
    let grads = backprop(
        params,
        &cache,
        result.grad_embeddings.as_ref(),
        result.grad_logits.as_ref(),
    )?;
    Ok(StepOutput {
        loss: result.value,
        grads,
        diagnostics: result.diagnostics,
    })
}

/// Splits `n` items into `ceil(n / size)` contiguous chunks whose lengths differ by at most one.
fn chunk_bounds(n: usize, size: usize) -> Vec<(usize, usize)> {
    let count = n.div_ceil(size);
    let (base, extra) = (n / count.max(1), n % count.max(1));
    let mut start = 0;
    (0..count)
        .map(|b| {
            let len = base + usize::from(b < extra);
            let r = (start, start + len);
            start += len;
            r
        })
        .collect()
}

/// Top-1 accuracy of the head on `ds`, encoder in evaluation mode.
pub fn head_accuracy(params: &EncoderParams, ds: &Dataset) -> Result<f64> {
    let (z, _) = encode(params, ds.features(), false, 0)?;
    top1_accuracy(&head_logits(params, &z)?, ds.labels())
}

/// Runs epochs until `state.epoch == config.epochs`.
///
/// Each epoch derives its shuffle, view and dropout seeds from the state seed
/// and the epoch index, so stopping after epoch k and resuming from the saved
/// state reproduces an uninterrupted run.
pub fn train(
    mut state: TrainState,
    config: &TrainConfig,
    train_set: &Dataset,
    val_set: Option<&Dataset>,
    objective: &ObjectiveConfig,
) -> Result<(TrainState, TrainingTrace)> {
    config.validate()?;
    objective.validate()?;
    state.params.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if train_set.feature_dim() != state.params.input_dim() {
        return Err(Error::Shape(format!(
            "dataset has {} features, encoder expects {}",
            train_set.feature_dim(),
            state.params.input_dim()
        )));
    }
    state.adam.learning_rate = config.learning_rate;
    state.adam.weight_decay = config.weight_decay;

    let mut trace = TrainingTrace::default();
    let n = train_set.len();
    while state.epoch < config.epochs {
        let epoch_seed = seed::derive(seed::derive(state.seed, seed::stream::EPOCH), state.epoch as u64);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seed::rng(seed::derive(epoch_seed, seed::stream::BATCH)));

        let mut total = 0.0;
        for (b, (lo, hi)) in chunk_bounds(n, config.batch_size).into_iter().enumerate() {
            let batch_seed = seed::derive(epoch_seed, b as u64);
            let idx = &order[lo..hi];
            let x = train_set.features().select_rows(idx);
            let y: Vec<usize> = idx.iter().map(|&i| train_set.labels()[i]).collect();
            let views = make_view_batch(&x, &y, &config.augment, seed::derive(batch_seed, seed::stream::VIEWS))?;
            let step = loss_and_grads(
                &state.params,
                &views.inputs,
                &views.labels,
                &views.view_of,
                objective,
                Some(seed::derive(batch_seed, seed::stream::DROPOUT)),
            )?;
            adam_step(&mut state.adam, &mut state.params, &step.grads)?;
            total += step.loss * idx.len() as f64;
        }
        state.epoch += 1;
        let val_accuracy = val_set.map(|v| head_accuracy(&state.params, v)).transpose()?;
        let record = EpochRecord {
            epoch: state.epoch,
            loss: total / n as f64,
            val_accuracy,
        };
        log::info!(
            "epoch {} loss {:.6} val_acc {}",
            record.epoch,
            record.loss,
            val_accuracy.map_or("-".into(), |a| format!("{a:.4}"))
        );
        trace.epochs.push(record);
    }
    Ok((state, trace))
}

/// How the fresh classification head of an episode starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum HeadInit {
    Zero,
    /// Uniform random weights drawn from the episode seed.
    Random,
    /// Column `c` is `scale` times the mean support embedding of class `c`.
    Prototype {
        scale: f64,
    },
}

/// Per-episode adaptation on the support set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FinetuneConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub augment: AugmentPolicy,
    pub head_init: HeadInit,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            steps: 20,
            learning_rate: 1e-4,
            weight_decay: 0.05,
            augment: AugmentPolicy::default(),
            head_init: HeadInit::Prototype { scale: 10.0 },
        }
    }
}

impl FinetuneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(
                "finetune.learning_rate",
                "must be finite and non-negative",
            ));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::config(
                "finetune.weight_decay",
                "must be finite and non-negative",
            ));
        }
        if let HeadInit::Prototype { scale } = self.head_init {
            if !scale.is_finite() {
                return Err(Error::config("finetune.head_init.scale", "must be finite"));
            }
        }
        self.augment.validate()
    }
}

fn episode_head(params: &EncoderParams, episode: &Episode, init: HeadInit, seed: u64) -> Result<Dense> {
    let dim = params.embedding_dim();
    Ok(match init {
        HeadInit::Zero => Dense::zeros(dim, episode.way),
        HeadInit::Random => Dense::glorot(dim, episode.way, &mut seed::rng(seed::derive(seed, seed::stream::HEAD))),
        HeadInit::Prototype { scale } => {
            let (z, _) = encode(params, &episode.support, false, 0)?;
            let mut head = Dense::zeros(dim, episode.way);
            let mut counts = vec![0usize; episode.way];
            for (row, &label) in z.row_iter().zip(&episode.support_labels) {
                counts[label] += 1;
                for (k, &v) in row.iter().enumerate() {
                    head.weight[(k, label)] += v;
                }
            }
            for k in 0..dim {
                for (c, &count) in counts.iter().enumerate() {
                    head.weight[(k, c)] *= scale / count.max(1) as f64;
                }
            }
            head
        }
    })
}

/// Fine-tunes a copy of `params` on the episode support set with a fresh
/// `way`-class head. Query samples are never read.
pub fn adapt_to_episode(
    params: &EncoderParams,
    episode: &Episode,
    objective: &ObjectiveConfig,
    finetune: &FinetuneConfig,
    seed: u64,
) -> Result<EncoderParams> {
    finetune.validate()?;
    objective.validate()?;
    let head = episode_head(params, episode, finetune.head_init, seed)?;
    let mut adapted = params.with_head(head)?;
    let mut adam = AdamState::new(&adapted, finetune.learning_rate, finetune.weight_decay);
    let base = seed::derive(seed, seed::stream::FINETUNE);
    for step in 0..finetune.steps {
        let step_seed = seed::derive(base, step as u64);
        let views = make_view_batch(
            &episode.support,
            &episode.support_labels,
            &finetune.augment,
            seed::derive(step_seed, seed::stream::VIEWS),
        )?;
        let out = loss_and_grads(
            &adapted,
            &views.inputs,
            &views.labels,
            &views.view_of,
            objective,
            Some(seed::derive(step_seed, seed::stream::DROPOUT)),
        )?;
        adam_step(&mut adam, &mut adapted, &out.grads)?;
    }
    Ok(adapted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, sample_episode, SyntheticSpec};
    use crate::framework::encoder::EncoderShape;
    use crate::objectives::ObjectiveKind;

    #[test]
    fn chunks_are_balanced() {
        assert_eq!(chunk_bounds(10, 4), vec![(0, 4), (4, 7), (7, 10)]);
        assert_eq!(chunk_bounds(8, 8), vec![(0, 8)]);
        assert_eq!(chunk_bounds(3, 10), vec![(0, 3)]);
        assert!(chunk_bounds(0, 3).is_empty());
    }

    fn toy() -> (Dataset, EncoderParams) {
        let ds = generate_synthetic(&SyntheticSpec {
            class_count: 3,
            feature_dim: 8,
            samples_per_class: 10,
            mean_radius: 3.0,
            noise_sigma: 1.0,
            seed: 1,
        })
        .unwrap();
        let shape = EncoderShape {
            input: 8,
            hidden: vec![12],
            embedding: 6,
            classes: 3,
        };
        (ds, EncoderParams::init(&shape, 0.1, 3).unwrap())
    }

    #[test]
    fn zero_epochs_keep_initialization() {
        let (ds, p) = toy();
        let cfg = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        let (state, trace) = train(
            TrainState::new(p.clone(), &cfg, 1),
            &cfg,
            &ds,
            None,
            &ObjectiveConfig::ce(),
        )
        .unwrap();
        assert_eq!(state.params, p);
        assert!(trace.epochs.is_empty());
    }

    #[test]
    fn lambda_zero_matches_ce() {
        let (ds, p) = toy();
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 8,
            learning_rate: 1e-3,
            ..Default::default()
        };
        let ce = train(
            TrainState::new(p.clone(), &cfg, 5),
            &cfg,
            &ds,
            Some(&ds),
            &ObjectiveConfig::ce(),
        )
        .unwrap();
        let zero = ObjectiveConfig::default().with_lambda(0.0);
        let mixed = train(TrainState::new(p, &cfg, 5), &cfg, &ds, Some(&ds), &zero).unwrap();
        assert_eq!(ce, mixed);
    }

    #[test]
    fn resume_matches_continuous_run() {
        let (ds, p) = toy();
        let cfg = TrainConfig {
            epochs: 4,
            batch_size: 8,
            learning_rate: 1e-3,
            ..Default::default()
        };
        let obj = ObjectiveConfig::default();
        let (full, full_trace) = train(TrainState::new(p.clone(), &cfg, 9), &cfg, &ds, None, &obj).unwrap();
        let half = TrainConfig { epochs: 2, ..cfg };
        let (mid, first) = train(TrainState::new(p, &cfg, 9), &half, &ds, None, &obj).unwrap();
        let (resumed, second) = train(mid, &cfg, &ds, None, &obj).unwrap();
        assert_eq!(full, resumed);
        assert_eq!(full_trace.epochs, [first.epochs, second.epochs].concat());
    }

    #[test]
    fn lambda_one_gives_no_logit_gradient() {
        let (ds, p) = toy();
        let views = make_view_batch(ds.features(), ds.labels(), &AugmentPolicy::default(), 2).unwrap();
        let obj = ObjectiveConfig::default().with_lambda(1.0);
        let out = loss_and_grads(&p, &views.inputs, &views.labels, &views.view_of, &obj, None).unwrap();
        assert!(out.grads.head.weight.as_slice().iter().all(|&v| v == 0.0));
        assert!(out.grads.head.bias.iter().all(|&v| v == 0.0));
        assert!(!out.grads.layers[0].weight.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn adaptation_leaves_input_untouched_and_ignores_query() {
        let (ds, p) = toy();
        let mut ep = sample_episode(&ds, 3, 1, 2, 4).unwrap();
        let cfg = FinetuneConfig::default();
        let obj = ObjectiveConfig::default().with_kind(ObjectiveKind::Schane);
        let a = adapt_to_episode(&p, &ep, &obj, &cfg, 11).unwrap();
        assert_eq!(a.head.output_dim(), 3);
        assert_ne!(a.layers, p.layers);
        ep.query.scale(-7.0);
        ep.query_labels.reverse();
        assert_eq!(adapt_to_episode(&p, &ep, &obj, &cfg, 11).unwrap(), a);
    }

    #[test]
    fn prototype_head_classifies_support() {
        let (ds, p) = toy();
        let ep = sample_episode(&ds, 3, 2, 1, 6).unwrap();
        let cfg = FinetuneConfig {
            steps: 0,
            ..Default::default()
        };
        let a = adapt_to_episode(&p, &ep, &ObjectiveConfig::ce(), &cfg, 0).unwrap();
        let (z, _) = encode(&a, &ep.support, false, 0).unwrap();
        let logits = head_logits(&a, &z).unwrap();
        assert!(top1_accuracy(&logits, &ep.support_labels).unwrap() > 0.5);
    }
}
