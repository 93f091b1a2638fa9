//! The experiment pipeline shared by every command.
//!
//! Classes are split into base and novel sets. The encoder is pretrained
//! with cross-entropy on the base classes, optionally trained further on the
//! base classes with the evaluated objective, and then adapted per episode on
//! novel-class support sets.

use rand::seq::index::sample;
use schane::data::{generate_synthetic, load_csv, load_idx, split, split_classes, Dataset};
use schane::framework::{encode, train, EncoderParams, EncoderShape, TrainState, TrainingTrace};
use schane::metrics::{cosine_stats, evaluate_fewshot, isotropy_score, CosineStats, FewshotReport};
use schane::numerics::{pca_project, Matrix};
use schane::objectives::{ObjectiveConfig, ObjectiveKind};
use schane::{seed, Error, Result};
use serde::Serialize;

use crate::config::{AnalysisSet, DatasetSource, RunConfig};

/// Seed streams of the pipeline phases.
pub mod phase {
    pub const SPLIT: u64 = 1;
    pub const INIT: u64 = 2;
    pub const PRETRAIN: u64 = 3;
    pub const FINETUNE: u64 = 4;
    pub const FEWSHOT: u64 = 5;
    pub const ANALYSIS: u64 = 6;

    pub const ALL: [(&str, u64); 6] = [
        ("split", SPLIT),
        ("init", INIT),
        ("pretrain", PRETRAIN),
        ("finetune", FINETUNE),
        ("fewshot", FEWSHOT),
        ("analysis", ANALYSIS),
    ];
}

pub fn phase_seed(cfg: &RunConfig, phase: u64) -> u64 {
    seed::derive(cfg.seed, phase)
}

pub fn load_dataset(source: &DatasetSource) -> Result<Dataset> {
    match source {
        DatasetSource::Synthetic { spec } => generate_synthetic(spec),
        DatasetSource::Csv { path } => load_csv(path),
        DatasetSource::Idx { images, labels } => load_idx(images, labels),
    }
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub base_train: Dataset,
    pub base_val: Dataset,
    pub base_test: Dataset,
    pub novel: Dataset,
}

pub fn prepare(cfg: &RunConfig) -> Result<Splits> {
    let ds = load_dataset(&cfg.data.source)?;
    let s = phase_seed(cfg, phase::SPLIT);
    let (base, novel) = split_classes(&ds, cfg.data.base_fraction, s)?;
    let (base_train, base_val, base_test) = split(&base, cfg.data.split, s)?;
    log::info!(
        "{} samples, {} classes: {} base ({} train / {} val / {} test), {} novel",
        ds.len(),
        ds.class_count(),
        base.class_count(),
        base_train.len(),
        base_val.len(),
        base_test.len(),
        novel.class_count()
    );
    Ok(Splits {
        base_train,
        base_val,
        base_test,
        novel,
    })
}

pub fn init_params(cfg: &RunConfig, splits: &Splits) -> Result<EncoderParams> {
    let shape = EncoderShape {
        input: splits.base_train.feature_dim(),
        hidden: cfg.model.hidden.clone(),
        embedding: cfg.model.embedding,
        classes: splits.base_train.class_count(),
    };
    EncoderParams::init(&shape, cfg.model.dropout, phase_seed(cfg, phase::INIT))
}

/// Cross-entropy training on the base classes, continuing from `state`.
pub fn pretrain(cfg: &RunConfig, state: TrainState, splits: &Splits) -> Result<(TrainState, TrainingTrace)> {
    train(
        state,
        &cfg.pretrain,
        &splits.base_train,
        Some(&splits.base_val),
        &ObjectiveConfig::ce(),
    )
}

pub fn fresh_pretrain_state(cfg: &RunConfig, splits: &Splits) -> Result<TrainState> {
    Ok(TrainState::new(
        init_params(cfg, splits)?,
        &cfg.pretrain,
        phase_seed(cfg, phase::PRETRAIN),
    ))
}

/// Base-class training with `objective`, starting from the pretrained weights.
/// Every objective uses the same seed, so compared runs see the same batches
/// and views.
pub fn finetune_base(
    cfg: &RunConfig,
    pretrained: &EncoderParams,
    splits: &Splits,
    objective: &ObjectiveConfig,
) -> Result<(EncoderParams, TrainingTrace)> {
    if cfg.base_finetune.epochs == 0 {
        return Ok((pretrained.clone(), TrainingTrace::default()));
    }
    let state = TrainState::new(pretrained.clone(), &cfg.base_finetune, phase_seed(cfg, phase::FINETUNE));
    let (state, trace) = train(
        state,
        &cfg.base_finetune,
        &splits.base_train,
        Some(&splits.base_val),
        objective,
    )?;
    Ok((state.params, trace))
}

/// Episodic evaluation on the novel classes. Episodes depend only on the run
/// seed, so they are paired across objectives and λ values.
pub fn fewshot(
    cfg: &RunConfig,
    params: &EncoderParams,
    splits: &Splits,
    objective: &ObjectiveConfig,
) -> Result<FewshotReport> {
    evaluate_fewshot(
        params,
        &splits.novel,
        &cfg.fewshot,
        objective,
        phase_seed(cfg, phase::FEWSHOT),
    )
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub objective: ObjectiveConfig,
    pub params: EncoderParams,
    pub trace: TrainingTrace,
    pub report: FewshotReport,
}

/// Base fine-tuning followed by few-shot evaluation for one objective.
pub fn evaluate_objective(
    cfg: &RunConfig,
    pretrained: &EncoderParams,
    splits: &Splits,
    objective: ObjectiveConfig,
) -> Result<Evaluation> {
    let (params, trace) = finetune_base(cfg, pretrained, splits, &objective)?;
    let report = fewshot(cfg, &params, splits, &objective)?;
    log::info!(
        "{} (lambda {}): mean {:.4} median {:.4}",
        objective.kind.display(),
        objective.lambda,
        report.mean,
        report.median
    );
    Ok(Evaluation {
        objective,
        params,
        trace,
        report,
    })
}

/// The objective as evaluated: plain CE carries λ = 0.
pub fn resolved_objective(cfg: &RunConfig, kind: ObjectiveKind) -> ObjectiveConfig {
    let o = cfg.objective_of(kind);
    if kind == ObjectiveKind::Ce {
        o.with_lambda(0.0)
    } else {
        o
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Analysis {
    pub isotropy: f64,
    pub class_pair: [usize; 2],
    pub cosine: CosineStats,
    #[serde(skip)]
    pub projection: Matrix,
    #[serde(skip)]
    pub labels: Vec<usize>,
}

pub fn analysis_set<'a>(cfg: &RunConfig, splits: &'a Splits) -> &'a Dataset {
    match cfg.analysis.set {
        AnalysisSet::BaseTest => &splits.base_test,
        AnalysisSet::Novel => &splits.novel,
    }
}

/// Isotropy, cosine separation of one class pair, and a 2-D PCA projection of
/// the evaluation-mode embeddings of the configured analysis set.
pub fn analyze(cfg: &RunConfig, params: &EncoderParams, splits: &Splits) -> Result<Analysis> {
    let ds = analysis_set(cfg, splits);
    let (z, cache) = encode(params, ds.features(), false, 0)?;
    if cache.guard_fired() {
        return Err(Error::DegenerateInput("encoder produced a zero-norm embedding".into()));
    }
    let class_pair = match cfg.analysis.class_pair {
        Some(p) => p,
        None => {
            if ds.class_count() < 2 {
                return Err(Error::InsufficientClasses("analysis needs two classes".into()));
            }
            let mut rng = seed::rng(phase_seed(cfg, phase::ANALYSIS));
            let v = sample(&mut rng, ds.class_count(), 2).into_vec();
            [v[0].min(v[1]), v[0].max(v[1])]
        }
    };
    if class_pair.iter().any(|&c| c >= ds.class_count()) {
        return Err(Error::config(
            "analysis.class_pair",
            format!("classes must be below {}", ds.class_count()),
        ));
    }
    let cosine = cosine_stats(
        &z,
        ds.labels(),
        class_pair[0],
        class_pair[1],
        cfg.analysis.bins,
        cfg.analysis.pair_cap,
    )?;
    Ok(Analysis {
        isotropy: isotropy_score(&z)?,
        class_pair,
        cosine,
        projection: pca_project(&z, 2)?,
        labels: ds.labels().to_vec(),
    })
}
