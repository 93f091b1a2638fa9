//! Command-line arguments and how they override the run configuration.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use schane::objectives::ObjectiveKind;
use schane::Result;

use crate::config::{AnalysisSet, DatasetSource, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "schane",
    version,
    about = "Contrastive fine-tuning with hard-negative weighting: experiments"
)]
pub struct Cli {
    /// JSON config file or run manifest, applied over the preset.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Named base configuration, e.g. `synthetic-fewshot`.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Run seed; also reseeds a synthetic dataset.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for episode evaluation; results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the synthetic dataset as CSV.
    Generate,
    /// Cross-entropy training on the base classes.
    Pretrain(PretrainArgs),
    /// Few-shot evaluation on the novel classes.
    Fewshot(EvalArgs),
    /// Few-shot evaluation across mixing weights.
    SweepLambda(SweepArgs),
    /// Few-shot evaluation of CE, CE+SimCLR, CE+SupCon and CE+SCHaNe.
    Ablation(EvalArgs),
    /// Embedding geometry: isotropy, cosine statistics, 2-D projection.
    Analyze(AnalyzeArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Pretrain(_) => "pretrain",
            Command::Fewshot(_) => "fewshot",
            Command::SweepLambda(_) => "sweep-lambda",
            Command::Ablation(_) => "ablation",
            Command::Analyze(_) => "analyze",
        }
    }
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Where the checkpoint is written.
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// Continue training from this checkpoint.
    #[arg(long, value_name = "PATH")]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Pretrained checkpoint to evaluate.
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// ce, simclr, supcon, schane, a comma-separated list, or `all`.
    #[arg(long)]
    pub objective: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub way: Option<usize>,
    #[arg(long)]
    pub shot: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub eval: EvalArgs,
    /// Comma-separated mixing weights.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub eval: EvalArgs,
    #[arg(long, value_enum)]
    pub set: Option<SetArg>,
    /// Two dense class ids, e.g. `0,3`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub class_pair: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum SetArg {
    BaseTest,
    Novel,
}

/// Parses `--objective`: one kind, a comma-separated list, or `all`.
pub fn parse_objectives(text: &str) -> Result<Vec<ObjectiveKind>> {
    if text.eq_ignore_ascii_case("all") {
        return Ok(ObjectiveKind::ALL.to_vec());
    }
    text.split(',').map(|s| s.trim().parse()).collect()
}

impl Cli {
    /// Preset, then config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let base = match &self.preset {
            Some(name) => RunConfig::preset(name)?,
            None => RunConfig::default(),
        };
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load_over(&base, path)?,
            None => base,
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
            if let DatasetSource::Synthetic { spec } = &mut cfg.data.source {
                spec.seed = seed;
            }
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(t) = self.threads {
            cfg.fewshot.threads = t;
        }
        match &self.command {
            Command::Generate => {}
            Command::Pretrain(a) => {
                if let Some(e) = a.epochs {
                    cfg.pretrain.epochs = e;
                }
                if a.checkpoint.is_some() {
                    cfg.checkpoint = a.checkpoint.clone();
                }
                if a.resume.is_some() {
                    cfg.resume = a.resume.clone();
                }
            }
            Command::Fewshot(a) | Command::Ablation(a) => a.apply(&mut cfg)?,
            Command::SweepLambda(a) => {
                a.eval.apply(&mut cfg)?;
                if let Some(l) = &a.lambdas {
                    cfg.lambdas = l.clone();
                }
            }
            Command::Analyze(a) => {
                a.eval.apply(&mut cfg)?;
                if let Some(s) = a.set {
                    cfg.analysis.set = match s {
                        SetArg::BaseTest => AnalysisSet::BaseTest,
                        SetArg::Novel => AnalysisSet::Novel,
                    };
                }
                if let Some(p) = &a.class_pair {
                    cfg.analysis.class_pair = Some([p[0], p[1]]);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl EvalArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if self.checkpoint.is_some() {
            cfg.checkpoint = self.checkpoint.clone();
        }
        if let Some(text) = &self.objective {
            let kinds = parse_objectives(text)?;
            if kinds.len() == 1 {
                cfg.objective.kind = kinds[0];
                cfg.objectives.clear();
            } else {
                cfg.objectives = kinds;
            }
        }
        if let Some(l) = self.lambda {
            cfg.objective.lambda = l;
        }
        if let Some(t) = self.tau {
            cfg.objective.tau = t;
        }
        if let Some(e) = self.episodes {
            cfg.fewshot.episodes = e;
        }
        if let Some(w) = self.way {
            cfg.fewshot.way = w;
        }
        if let Some(s) = self.shot {
            cfg.fewshot.shot = s;
        }
        Ok(())
    }
}
