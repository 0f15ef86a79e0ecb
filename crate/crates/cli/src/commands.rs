//! Batch entry points. Each command computes every artifact in memory and
//! then hands them to [`crate::artifacts`] in one go.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use catafinger::config::{locate, SceneConfig};
use catafinger::design_opt::{optimize_observed, DesignObjective, DesignVector, HistoryRow, OptimizeResult};
use catafinger::proprio::{
    evaluate_regressor, generate_dataset, load_dataset, save_dataset, train_regressor, GenerateConfig, TorqueRegressor,
    TrainConfig,
};
use catafinger::report::TraceReport;
use log::info;
use serde::Serialize;

use crate::artifacts::{with_suffix, write_dir, write_files};

/// Read and validate a scene file; `None` means the shipped reference.
pub fn load_config(path: Option<&Path>) -> Result<SceneConfig> {
    let Some(path) = path else {
        return Ok(SceneConfig::reference());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config = SceneConfig::parse(&text).with_context(|| path.display().to_string())?;
    config.validate().map_err(|e| locate(e, &text)).with_context(|| path.display().to_string())?;
    Ok(config)
}

/// The three trace artifacts as text.
#[derive(Debug, Clone)]
pub struct TraceArtifacts {
    pub report: TraceReport,
    pub svg: String,
    pub metrics_tsv: String,
    pub summary_json: String,
}

pub fn trace_artifacts(config: &SceneConfig) -> Result<TraceArtifacts> {
    let scene = config.build()?;
    let traces = scene.trace_all()?;
    let report = TraceReport::new(&scene, traces);
    Ok(TraceArtifacts {
        svg: report.svg(&scene),
        metrics_tsv: report.metrics_tsv(),
        summary_json: report.summary_json(),
        report,
    })
}

pub fn trace_paths(prefix: &Path) -> [PathBuf; 3] {
    [with_suffix(prefix, ".svg"), with_suffix(prefix, ".metrics.tsv"), with_suffix(prefix, ".summary.json")]
}

pub fn cmd_trace(config: &SceneConfig, prefix: &Path) -> Result<TraceArtifacts> {
    let art = trace_artifacts(config)?;
    let [svg, tsv, json] = trace_paths(prefix);
    write_files(&[
        (svg, art.svg.clone().into_bytes()),
        (tsv, art.metrics_tsv.clone().into_bytes()),
        (json, art.summary_json.clone().into_bytes()),
    ])?;
    info!(
        "traced {} pixels: coverage {:.4}, min imaging angle {:.3} deg",
        art.report.summary.pixel_count, art.report.summary.coverage, art.report.summary.min_imaging_angle_deg
    );
    Ok(art)
}

#[derive(Debug, Clone)]
pub struct OptimizeRun {
    pub initial_score: f64,
    pub result: OptimizeResult,
    pub best_scene: SceneConfig,
}

impl OptimizeRun {
    pub fn final_score(&self) -> f64 {
        self.result.best_score
    }
}

/// Default design vector of `config` (mirrors plus skin, skin endpoints
/// fixed), checked against the budget.
pub fn design_for(config: &SceneConfig, budget: usize) -> Result<DesignVector> {
    let design = DesignVector::from_config(config)?;
    let dim = design.free_count();
    if budget < dim + 1 {
        bail!("budget {budget} is below the {} evaluations of the initial simplex", dim + 1);
    }
    Ok(design)
}

pub fn run_optimize(
    config: &SceneConfig,
    objective: &DesignObjective,
    budget: usize,
    seed: u64,
) -> Result<OptimizeRun> {
    run_optimize_observed(config, objective, budget, seed, |_| {})
}

pub fn run_optimize_observed(
    config: &SceneConfig,
    objective: &DesignObjective,
    budget: usize,
    seed: u64,
    observe: impl FnMut(&HistoryRow),
) -> Result<OptimizeRun> {
    let design = design_for(config, budget)?;
    let result = optimize_observed(&design, config, objective, budget, seed, observe);
    // The first evaluation is always the unmodified design.
    let initial_score = result.history.first().map_or(f64::NAN, |r| r.result.score);
    let best_scene = result.best.apply(config)?;
    Ok(OptimizeRun { initial_score, result, best_scene })
}

pub fn optimize_paths(prefix: &Path) -> [PathBuf; 2] {
    [with_suffix(prefix, ".history.tsv"), with_suffix(prefix, ".best.toml")]
}

pub fn cmd_optimize(
    config: &SceneConfig,
    objective: &DesignObjective,
    budget: usize,
    seed: u64,
    prefix: &Path,
) -> Result<OptimizeRun> {
    let run = run_optimize(config, objective, budget, seed)?;
    let [history, best] = optimize_paths(prefix);
    write_files(&[
        (history, run.result.history_tsv().into_bytes()),
        (best, run.best_scene.to_canonical_string().into_bytes()),
    ])?;
    Ok(run)
}

pub fn cmd_generate(cfg: &GenerateConfig, dir: &Path) -> Result<usize> {
    let dataset = generate_dataset(cfg)?;
    write_dir(dir, |staging| Ok(save_dataset(staging, &dataset)?))?;
    info!("wrote {} samples to {}", dataset.samples.len(), dir.display());
    Ok(dataset.samples.len())
}

pub fn train_paths(prefix: &Path) -> [PathBuf; 2] {
    [with_suffix(prefix, ".model"), with_suffix(prefix, ".loss.tsv")]
}

pub fn cmd_train(data: &Path, cfg: &TrainConfig, prefix: &Path) -> Result<Vec<f64>> {
    let dataset = load_dataset(data)?;
    let outcome = train_regressor(&dataset.samples, cfg)?;
    let mut loss = String::from("epoch\tmse_standardized\n");
    for (i, l) in outcome.loss_history.iter().enumerate() {
        loss.push_str(&format!("{}\t{l:.9e}\n", i + 1));
    }
    let [model, history] = train_paths(prefix);
    write_files(&[(model, outcome.model.to_bytes()), (history, loss.into_bytes())])?;
    Ok(outcome.loss_history)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub samples: usize,
    #[serde(rename = "rmse_bending_Nmm")]
    pub rmse_bending: f64,
    #[serde(rename = "rmse_twisting_Nmm")]
    pub rmse_twisting: f64,
}

pub fn eval_paths(prefix: &Path) -> [PathBuf; 2] {
    [with_suffix(prefix, ".eval.json"), with_suffix(prefix, ".predictions.tsv")]
}

pub fn cmd_eval(data: &Path, model: &Path, prefix: &Path) -> Result<EvalSummary> {
    let dataset = load_dataset(data)?;
    let bytes = std::fs::read(model).with_context(|| format!("reading {}", model.display()))?;
    let regressor = TorqueRegressor::from_bytes(&bytes).with_context(|| model.display().to_string())?;
    let expected = regressor.shape().input_len();
    if let Some(s) = dataset.samples.iter().find(|s| s.image.data.len() != expected) {
        bail!(
            "model expects {expected} inputs but dataset images are {}x{}x{}",
            s.image.channels,
            s.image.height,
            s.image.width
        );
    }
    let evaluation = evaluate_regressor(&regressor, &dataset.samples);
    let summary = EvalSummary {
        samples: dataset.samples.len(),
        rmse_bending: evaluation.rmse_bending,
        rmse_twisting: evaluation.rmse_twisting,
    };
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    let [summary_path, predictions] = eval_paths(prefix);
    write_files(&[(summary_path, json.into_bytes()), (predictions, evaluation.predictions_tsv().into_bytes())])?;
    Ok(summary)
}
