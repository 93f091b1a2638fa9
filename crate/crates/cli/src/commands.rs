//! The six commands. Each returns its manifest (already written to disk) and
//! a console report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use schane::data::save_csv;
use schane::framework::{Checkpoint, EncoderParams, TrainingTrace};
use schane::metrics::{paired_difference, FewshotReport};
use schane::objectives::{ObjectiveConfig, ObjectiveKind};
use schane::{Error, Result};
use serde::Serialize;

use crate::config::{AnalysisSet, DatasetSource, RunConfig};
use crate::manifest::RunManifest;
use crate::pipeline::{self, Splits};
use crate::report::{self, sig6, ABLATION_SCHEMA, FEWSHOT_SCHEMA, NO_CI, SWEEP_SCHEMA};

pub const ANALYSIS_SCHEMA: &str = "schane-analysis-v1";

#[derive(Debug, Clone)]
pub struct Outcome {
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
    /// Human-readable summary lines.
    pub report: Vec<String>,
}

struct Run {
    manifest: RunManifest,
    out: PathBuf,
    report: Vec<String>,
}

impl Run {
    fn start(command: &str, cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
        Ok(Self {
            manifest: RunManifest::new(command, cfg),
            out: cfg.out.clone(),
            report: Vec::new(),
        })
    }

    fn timed<T>(&mut self, phase: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let r = f()?;
        *self.manifest.timings.entry(phase.to_string()).or_default() += t.elapsed().as_secs_f64();
        Ok(r)
    }

    fn output(&mut self, role: &str, name: &str) -> PathBuf {
        let path = self.out.join(name);
        self.manifest.outputs.insert(role.to_string(), path.clone());
        path
    }

    fn metric(&mut self, key: impl Into<String>, value: f64) {
        self.manifest.metrics.insert(key.into(), value);
    }

    fn say(&mut self, line: impl Into<String>) {
        self.report.push(line.into());
    }

    fn finish(mut self) -> Result<Outcome> {
        let name = format!("{}.manifest.json", self.manifest.command);
        let path = self.out.join(name);
        self.manifest.outputs.insert("manifest".into(), path.clone());
        self.manifest.save(&path)?;
        Ok(Outcome {
            manifest: self.manifest,
            manifest_path: path,
            report: self.report,
        })
    }
}

fn record_report(run: &mut Run, prefix: &str, r: &FewshotReport) {
    run.metric(format!("{prefix}.mean"), r.mean);
    run.metric(format!("{prefix}.median"), r.median);
    if let Some(ci) = r.ci {
        run.metric(format!("{prefix}.ci"), ci);
    }
    for e in &r.episodes {
        run.metric(format!("{prefix}.episode.{:04}", e.episode), e.accuracy);
    }
}

fn describe(label: &str, r: &FewshotReport) -> String {
    let ci = r.ci.map_or(NO_CI.to_string(), sig6);
    format!(
        "{label:<12} mean {} ± {ci}  median {}  ({} episodes)",
        sig6(r.mean),
        sig6(r.median),
        r.episodes.len()
    )
}

/// Loads the pretrained checkpoint for an evaluation command and pins its
/// resolved path in the manifest config.
fn load_pretrained(run: &mut Run, cfg: &mut RunConfig, splits: &Splits) -> Result<EncoderParams> {
    let path = cfg.checkpoint_path();
    let ckpt = Checkpoint::load(&path)?;
    let params = ckpt.params;
    if params.input_dim() != splits.base_train.feature_dim()
        || params.shape().classes != splits.base_train.class_count()
    {
        return Err(Error::Shape(format!(
            "checkpoint {} expects {} features and {} base classes; the dataset has {} and {}",
            path.display(),
            params.input_dim(),
            params.shape().classes,
            splits.base_train.feature_dim(),
            splits.base_train.class_count()
        )));
    }
    run.manifest.inputs.insert("checkpoint".into(), path.clone());
    cfg.checkpoint = Some(path);
    run.manifest.config = cfg.clone();
    Ok(params)
}

pub fn generate(cfg: &RunConfig) -> Result<Outcome> {
    let DatasetSource::Synthetic { spec } = &cfg.data.source else {
        return Err(Error::config("data.source", "generate needs a synthetic source"));
    };
    let mut run = Run::start("generate", cfg)?;
    let ds = run.timed("generate", || schane::data::generate_synthetic(spec))?;
    let csv_path = run.output("dataset", "dataset.csv");
    save_csv(&ds, &csv_path)?;
    let spec_path = run.output("spec", "dataset.spec.json");
    std::fs::write(&spec_path, serde_json::to_string_pretty(spec)?).map_err(|e| Error::io(&spec_path, e))?;
    run.metric("generate.samples", ds.len() as f64);
    run.metric("generate.classes", ds.class_count() as f64);
    run.metric("generate.features", ds.feature_dim() as f64);
    run.say(format!(
        "{} classes, {} samples, {} features -> {}",
        ds.class_count(),
        ds.len(),
        ds.feature_dim(),
        csv_path.display()
    ));
    run.finish()
}

pub fn pretrain(cfg: &RunConfig) -> Result<Outcome> {
    let mut run = Run::start("pretrain", cfg)?;
    let splits = run.timed("data", || pipeline::prepare(cfg))?;
    let state = match &cfg.resume {
        Some(path) => {
            run.manifest.inputs.insert("resume".into(), path.clone());
            let ckpt = Checkpoint::load(path)?;
            if ckpt.params.input_dim() != splits.base_train.feature_dim() {
                return Err(Error::Shape(format!(
                    "checkpoint {} does not match the dataset",
                    path.display()
                )));
            }
            ckpt.into_state()
        }
        None => pipeline::fresh_pretrain_state(cfg, &splits)?,
    };
    let start_epoch = state.epoch;
    let (state, trace) = run.timed("pretrain", || pipeline::pretrain(cfg, state, &splits))?;

    let ckpt_path = cfg.checkpoint_path();
    if let Some(dir) = ckpt_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Checkpoint::from_state(&state).save(&ckpt_path)?;
    run.manifest.outputs.insert("checkpoint".into(), ckpt_path.clone());
    let trace_path = run.output("trace", "pretrain_trace.csv");
    report::write_trace(&trace_path, &trace)?;

    record_trace(&mut run, "pretrain", &trace);
    let val = schane::framework::head_accuracy(&state.params, &splits.base_val)?;
    run.metric("pretrain.val_accuracy", val);
    run.say(format!(
        "pretrained epochs {}..{}: final loss {}, base validation accuracy {} -> {}",
        start_epoch,
        state.epoch,
        trace.epochs.last().map_or("-".into(), |e| sig6(e.loss)),
        sig6(val),
        ckpt_path.display()
    ));
    run.finish()
}

fn record_trace(run: &mut Run, prefix: &str, trace: &TrainingTrace) {
    for e in &trace.epochs {
        run.metric(format!("{prefix}.epoch.{:04}.loss", e.epoch), e.loss);
        if let Some(a) = e.val_accuracy {
            run.metric(format!("{prefix}.epoch.{:04}.val_accuracy", e.epoch), a);
        }
    }
}

pub fn fewshot(cfg: &RunConfig) -> Result<Outcome> {
    let mut cfg = cfg.clone();
    let mut run = Run::start("fewshot", &cfg)?;
    let splits = run.timed("data", || pipeline::prepare(&cfg))?;
    let pretrained = load_pretrained(&mut run, &mut cfg, &splits)?;

    let mut rows = Vec::new();
    let mut results = Vec::new();
    for kind in cfg.selected_objectives() {
        let objective = pipeline::resolved_objective(&cfg, kind);
        let eval = run.timed(kind.name(), || {
            pipeline::evaluate_objective(&cfg, &pretrained, &splits, objective)
        })?;
        record_trace(&mut run, &format!("fewshot.{}.finetune", kind.name()), &eval.trace);
        record_report(&mut run, &format!("fewshot.{}", kind.name()), &eval.report);
        run.say(describe(kind.display(), &eval.report));
        rows.push(report::summary_row(
            FEWSHOT_SCHEMA,
            &objective,
            cfg.fewshot.way,
            cfg.fewshot.shot,
            &eval.report,
            cfg.seed,
        ));
        results.push((objective, eval.report));
    }
    report::write_summary(&run.output("summary", "fewshot.csv"), &rows)?;
    let refs: Vec<_> = results.iter().map(|(o, r)| (*o, r)).collect();
    report::write_episodes(&run.output("episodes", "fewshot_episodes.csv"), &refs)?;
    run.finish()
}

pub fn sweep_lambda(cfg: &RunConfig) -> Result<Outcome> {
    let mut cfg = cfg.clone();
    let mut run = Run::start("sweep-lambda", &cfg)?;
    let splits = run.timed("data", || pipeline::prepare(&cfg))?;
    let pretrained = load_pretrained(&mut run, &mut cfg, &splits)?;

    let mut rows = Vec::new();
    let mut results: Vec<(ObjectiveConfig, FewshotReport)> = Vec::new();
    for &lambda in &cfg.lambdas {
        let objective = cfg.objective.with_lambda(lambda);
        let label = format!("lambda={lambda}");
        let eval = run.timed(&label, || {
            pipeline::evaluate_objective(&cfg, &pretrained, &splits, objective)
        })?;
        record_report(&mut run, &format!("sweep.{label}"), &eval.report);
        run.say(describe(&label, &eval.report));
        rows.push(report::summary_row(
            SWEEP_SCHEMA,
            &objective,
            cfg.fewshot.way,
            cfg.fewshot.shot,
            &eval.report,
            cfg.seed,
        ));
        results.push((objective, eval.report));
    }
    if let Some((best, _)) = results.iter().max_by(|a, b| a.1.mean.total_cmp(&b.1.mean)) {
        run.metric("sweep.best_lambda", best.lambda);
        run.say(format!("best lambda {}", best.lambda));
    }
    report::write_summary(&run.output("summary", "sweep.csv"), &rows)?;
    let refs: Vec<_> = results.iter().map(|(o, r)| (*o, r)).collect();
    report::write_episodes(&run.output("episodes", "sweep_episodes.csv"), &refs)?;
    run.finish()
}

pub fn ablation(cfg: &RunConfig) -> Result<Outcome> {
    let mut cfg = cfg.clone();
    let mut run = Run::start("ablation", &cfg)?;
    let splits = run.timed("data", || pipeline::prepare(&cfg))?;
    let pretrained = load_pretrained(&mut run, &mut cfg, &splits)?;

    let mut results: Vec<(ObjectiveConfig, FewshotReport)> = Vec::new();
    for kind in ObjectiveKind::ALL {
        let objective = pipeline::resolved_objective(&cfg, kind);
        let eval = run.timed(kind.name(), || {
            pipeline::evaluate_objective(&cfg, &pretrained, &splits, objective)
        })?;
        record_report(&mut run, &format!("ablation.{}", kind.name()), &eval.report);
        results.push((objective, eval.report));
    }
    let ce = results[0].1.clone();
    let mut rows = Vec::new();
    for (objective, r) in &results {
        let (delta, delta_ci) = paired_difference(r, &ce)?;
        let name = objective.kind.name();
        run.metric(format!("ablation.{name}.delta_vs_ce"), delta);
        run.metric(format!("ablation.{name}.delta_ci"), delta_ci);
        let mut row = report::summary_row(
            ABLATION_SCHEMA,
            objective,
            cfg.fewshot.way,
            cfg.fewshot.shot,
            r,
            cfg.seed,
        );
        row.push(delta.to_string());
        row.push(delta_ci.to_string());
        rows.push(row);
        run.say(format!(
            "{}  vs CE {:+} ± {}",
            describe(objective.kind.display(), r),
            sig6(delta),
            sig6(delta_ci)
        ));
    }
    report::write_ablation(&run.output("summary", "ablation.csv"), &rows)?;
    let refs: Vec<_> = results.iter().map(|(o, r)| (*o, r)).collect();
    report::write_episodes(&run.output("episodes", "ablation_episodes.csv"), &refs)?;
    run.finish()
}

#[derive(Debug, Serialize)]
struct AnalysisEntry {
    objective: String,
    lambda: f64,
    samples: usize,
    #[serde(flatten)]
    analysis: pipeline::Analysis,
}

#[derive(Debug, Serialize)]
struct AnalysisSummary {
    schema: &'static str,
    set: AnalysisSet,
    entries: Vec<AnalysisEntry>,
}

/// Isotropy, cosine statistics and a 2-D projection of the embeddings of each
/// selected objective after base fine-tuning.
pub fn analyze(cfg: &RunConfig) -> Result<Outcome> {
    let mut cfg = cfg.clone();
    let mut run = Run::start("analyze", &cfg)?;
    let splits = run.timed("data", || pipeline::prepare(&cfg))?;
    let pretrained = load_pretrained(&mut run, &mut cfg, &splits)?;
    let samples = pipeline::analysis_set(&cfg, &splits).len();

    let mut entries = Vec::new();
    for kind in cfg.selected_objectives() {
        let objective = pipeline::resolved_objective(&cfg, kind);
        let name = kind.name();
        let (params, trace) = run.timed(name, || pipeline::finetune_base(&cfg, &pretrained, &splits, &objective))?;
        record_trace(&mut run, &format!("analysis.{name}.finetune"), &trace);
        let analysis = run.timed("analysis", || pipeline::analyze(&cfg, &params, &splits))?;
        report::write_histogram(
            &run.output(&format!("cosine.{name}"), &format!("cosine_{name}.csv")),
            &analysis.cosine,
        )?;
        report::write_projection(
            &run.output(&format!("projection.{name}"), &format!("projection_{name}.csv")),
            &analysis.projection,
            &analysis.labels,
        )?;
        run.metric(format!("analysis.{name}.isotropy"), analysis.isotropy);
        run.metric(format!("analysis.{name}.overlap"), analysis.cosine.overlap);
        run.metric(format!("analysis.{name}.positive_mean"), analysis.cosine.positive_mean);
        run.metric(format!("analysis.{name}.negative_mean"), analysis.cosine.negative_mean);
        run.say(format!(
            "{:<12} isotropy {}  overlap {}  cos+ {}  cos- {}  (classes {:?})",
            kind.display(),
            sig6(analysis.isotropy),
            sig6(analysis.cosine.overlap),
            sig6(analysis.cosine.positive_mean),
            sig6(analysis.cosine.negative_mean),
            analysis.class_pair
        ));
        entries.push(AnalysisEntry {
            objective: name.into(),
            lambda: objective.effective_lambda(),
            samples,
            analysis,
        });
    }
    let summary = AnalysisSummary {
        schema: ANALYSIS_SCHEMA,
        set: cfg.analysis.set,
        entries,
    };
    let path = run.output("summary", "analysis.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary)?).map_err(|e| Error::io(&path, e))?;
    run.finish()
}

/// Numeric key-value view of a manifest's metrics, for comparisons.
pub fn metrics_of(path: &Path) -> Result<BTreeMap<String, f64>> {
    Ok(RunManifest::load(path)?.metrics)
}

/// Process exit code for an error: 2 configuration, 3 data or i/o,
/// 4 numeric failure.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Serde(_) => 2,
        Error::NonFinite(_) | Error::DegenerateVector | Error::DegenerateInput(_) | Error::NoNegatives { .. } => 4,
        _ => 3,
    }
}
