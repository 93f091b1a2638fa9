//! Run configuration: a JSON document whose every field has a default.
//!
//! Unknown keys are rejected at every level. A run manifest can be used in
//! place of a config file; its `config` member is read.

use std::path::{Path, PathBuf};

use schane::data::{SplitFractions, SyntheticSpec};
use schane::framework::{AugmentPolicy, FinetuneConfig, HeadInit, TrainConfig};
use schane::metrics::FewshotConfig;
use schane::objectives::{ObjectiveConfig, ObjectiveKind};
use schane::{Error, Result};
use serde::{Deserialize, Serialize};

pub const PRESET_SYNTHETIC_FEWSHOT: &str = "synthetic-fewshot";

/// The grid of mixing weights swept by default.
pub const DEFAULT_LAMBDAS: [f64; 7] = [0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSource {
    Synthetic { spec: SyntheticSpec },
    Csv { path: PathBuf },
    Idx { images: PathBuf, labels: PathBuf },
}

impl Default for DatasetSource {
    fn default() -> Self {
        Self::Synthetic {
            spec: SyntheticSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub source: DatasetSource,
    /// Per-class train/val/test fractions applied to the base classes.
    pub split: SplitFractions,
    /// Fraction of classes used for pretraining; the rest are novel classes
    /// reserved for few-shot episodes.
    pub base_fraction: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DatasetSource::default(),
            split: SplitFractions::default(),
            base_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub embedding: usize,
    pub dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128],
            embedding: 64,
            dropout: 0.1,
        }
    }
}

/// Which embeddings `analyze` measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnalysisSet {
    /// Held-out test split of the base classes.
    BaseTest,
    /// Every sample of the novel classes.
    #[default]
    Novel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub set: AnalysisSet,
    pub bins: usize,
    /// Class pair (dense ids within the analysed set); drawn from the seed when absent.
    pub class_pair: Option<[usize; 2]>,
    /// Maximum samples per class entering the pair statistics.
    pub pair_cap: Option<usize>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            set: AnalysisSet::default(),
            bins: 50,
            class_pair: None,
            pair_cap: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataConfig,
    pub model: ModelConfig,
    /// Cross-entropy training on the base classes.
    pub pretrain: TrainConfig,
    /// Further training on the base classes with the evaluated objective,
    /// starting from the pretrained checkpoint. Zero epochs skips it.
    pub base_finetune: TrainConfig,
    pub objective: ObjectiveConfig,
    /// Objectives compared by `fewshot` and `analyze`; empty means
    /// `objective.kind` alone.
    pub objectives: Vec<ObjectiveKind>,
    pub fewshot: FewshotConfig,
    pub lambdas: Vec<f64>,
    pub analysis: AnalysisConfig,
    /// Pretrained checkpoint read by the evaluation commands; defaults to
    /// `<out>/pretrain.ckpt.json`.
    pub checkpoint: Option<PathBuf>,
    /// Checkpoint that `pretrain` continues from instead of a fresh
    /// initialization.
    pub resume: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: DataConfig::default(),
            model: ModelConfig::default(),
            pretrain: TrainConfig::default(),
            base_finetune: TrainConfig {
                epochs: 0,
                ..TrainConfig::default()
            },
            objective: ObjectiveConfig::default(),
            objectives: Vec::new(),
            fewshot: FewshotConfig::default(),
            lambdas: DEFAULT_LAMBDAS.to_vec(),
            analysis: AnalysisConfig::default(),
            checkpoint: None,
            resume: None,
            seed: 0,
            out: PathBuf::from("runs"),
        }
    }
}

impl RunConfig {
    /// The pinned desk-scale few-shot benchmark.
    pub fn synthetic_fewshot() -> Self {
        let augment = AugmentPolicy::default();
        Self {
            data: DataConfig {
                source: DatasetSource::Synthetic {
                    spec: SyntheticSpec::default(),
                },
                split: SplitFractions::default(),
                base_fraction: 0.5,
            },
            model: ModelConfig::default(),
            pretrain: TrainConfig {
                epochs: 30,
                batch_size: 128,
                learning_rate: 1e-3,
                weight_decay: 0.05,
                augment,
            },
            base_finetune: TrainConfig {
                epochs: 10,
                batch_size: 128,
                learning_rate: 1e-3,
                weight_decay: 0.05,
                augment,
            },
            objective: ObjectiveConfig::default(),
            objectives: Vec::new(),
            fewshot: FewshotConfig {
                way: 5,
                shot: 1,
                query_shot: 15,
                episodes: 200,
                finetune: FinetuneConfig {
                    steps: 20,
                    learning_rate: 1e-3,
                    weight_decay: 0.05,
                    augment,
                    head_init: HeadInit::Prototype { scale: 10.0 },
                },
                threads: 1,
            },
            lambdas: DEFAULT_LAMBDAS.to_vec(),
            analysis: AnalysisConfig::default(),
            checkpoint: None,
            resume: None,
            seed: 0,
            out: PathBuf::from("runs"),
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            PRESET_SYNTHETIC_FEWSHOT => Ok(Self::synthetic_fewshot()),
            other => Err(Error::config("preset", format!("unknown preset `{other}`"))),
        }
    }

    /// Reads a config file or the `config` member of a run manifest.
    pub fn load(path: &Path) -> Result<Self> {
        Self::load_over(&Self::default(), path)
    }

    /// Reads a config file as a patch over `base`: keys present in the file
    /// replace those of `base`, recursively.
    pub fn load_over(base: &Self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::config("config", e.to_string()))?;
        let is_manifest = value.get("kind").and_then(|k| k.as_str()) == Some(crate::manifest::MANIFEST_KIND);
        let patch = if is_manifest {
            value
                .get("config")
                .cloned()
                .ok_or_else(|| Error::config("config", "manifest has no config"))?
        } else {
            value
        };
        if !patch.is_object() {
            return Err(Error::config("config", "expected a JSON object"));
        }
        let mut merged = serde_json::to_value(base)?;
        merge(&mut merged, patch);
        serde_json::from_value(merged).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| self.out.join("pretrain.ckpt.json"))
    }

    pub fn validate(&self) -> Result<()> {
        if let DatasetSource::Synthetic { spec } = &self.data.source {
            spec.validate()?;
        }
        self.data.split.validate()?;
        if !(self.data.base_fraction > 0.0 && self.data.base_fraction < 1.0) {
            return Err(Error::config("data.base_fraction", "must lie in (0, 1)"));
        }
        if self.model.embedding == 0 || self.model.hidden.contains(&0) {
            return Err(Error::config("model", "layer widths must be positive"));
        }
        if !(0.0..1.0).contains(&self.model.dropout) {
            return Err(Error::config("model.dropout", "must lie in [0, 1)"));
        }
        self.pretrain.validate()?;
        self.base_finetune.validate()?;
        self.objective.validate()?;
        self.fewshot.validate()?;
        if self.lambdas.is_empty() {
            return Err(Error::config("lambdas", "must not be empty"));
        }
        if let Some(bad) = self.lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(Error::config("lambdas", format!("{bad} is outside [0, 1]")));
        }
        if self.analysis.bins < 2 {
            return Err(Error::config("analysis.bins", "must be at least 2"));
        }
        Ok(())
    }

    /// Objectives evaluated by the comparison commands, in order.
    pub fn selected_objectives(&self) -> Vec<ObjectiveKind> {
        if self.objectives.is_empty() {
            vec![self.objective.kind]
        } else {
            self.objectives.clone()
        }
    }

    /// Objective with the configured τ, λ and gradient mode but a different kind.
    pub fn objective_of(&self, kind: ObjectiveKind) -> ObjectiveConfig {
        self.objective.with_kind(kind)
    }
}

/// Overlays `patch` onto `base`. Objects merge key by key unless their
/// `kind` tags differ, in which case the patch replaces the whole object.
fn merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    use serde_json::Value;
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            let retagged = matches!((b.get("kind"), p.get("kind")), (Some(x), Some(y)) if x != y);
            if retagged {
                *b = p;
                return;
            }
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, p) => *slot = p,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        for cfg in [RunConfig::default(), RunConfig::synthetic_fewshot()] {
            let text = serde_json::to_string(&cfg).unwrap();
            assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
            cfg.validate().unwrap();
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            r#"{"seeed": 1}"#,
            r#"{"model": {"width": 3}}"#,
            r#"{"data": {"source": {"kind": "csv", "path": "x", "extra": 1}}}"#,
            r#"{"fewshot": {"finetune": {"stepz": 2}}}"#,
        ] {
            let err = serde_json::from_str::<RunConfig>(text).unwrap_err().to_string();
            assert!(err.contains("unknown field"), "{text}: {err}");
        }
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"seed": 7, "objective": {"kind": "supcon", "tau": 0.3, "lambda": 0.5}}"#).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.objective.kind, ObjectiveKind::SupCon);
        assert_eq!(cfg.lambdas, DEFAULT_LAMBDAS);
    }

    #[test]
    fn invalid_values_name_the_field() {
        let mut cfg = RunConfig::default();
        cfg.data.source = DatasetSource::Synthetic {
            spec: SyntheticSpec {
                class_count: 0,
                ..Default::default()
            },
        };
        match cfg.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "class_count"),
            other => panic!("{other:?}"),
        }
        assert!(RunConfig::preset("nope").is_err());
    }

    #[test]
    fn file_patches_preset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(
            &path,
            r#"{"fewshot": {"episodes": 3}, "data": {"source": {"kind": "csv", "path": "d.csv"}}}"#,
        )
        .unwrap();
        let base = RunConfig::synthetic_fewshot();
        let cfg = RunConfig::load_over(&base, &path).unwrap();
        assert_eq!(cfg.fewshot.episodes, 3);
        assert_eq!(cfg.fewshot.finetune, base.fewshot.finetune);
        assert_eq!(cfg.pretrain, base.pretrain);
        assert_eq!(cfg.data.source, DatasetSource::Csv { path: "d.csv".into() });

        std::fs::write(&path, r#"{"fewshot": {"episodez": 3}}"#).unwrap();
        let err = RunConfig::load_over(&base, &path).unwrap_err().to_string();
        assert!(err.contains("episodez"), "{err}");
    }
}
