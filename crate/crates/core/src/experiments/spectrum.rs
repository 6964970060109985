//! Metric spectrum of a trained network.

use super::{
    build_tasks, initial_spec, log_task_accuracies, ExperimentConfig,
};
use crate::error::Result;
use crate::metric::{metric_spectrum, MetricEvaluation};
use crate::runlog::{values_of, RunLog};
use crate::train::train_base;

/// Trains the base task, evaluates the metric on the seeded anchor
/// subsample, and writes the eigenvalue report to `spectrum.json`.
pub fn run_spectrum(config: &ExperimentConfig) -> Result<RunLog> {
    config.validate()?;
    let (_lock, mut log) = super::begin_run(config)?;
    let tasks = build_tasks(config)?;
    let task = &tasks[0];

    let spec = initial_spec(config, task.train.dim(), task.n_classes)?;
    let settings = config.train.to_settings(config.seed);
    let w = train_base(&spec, &task.train, &settings, &mut log, "train")?;
    log_task_accuracies(
        &mut log,
        "train",
        settings.epochs as u64,
        &spec,
        &w,
        &tasks[..1],
    )?;

    let anchor = task
        .train
        .subsample(config.path.anchor_batch_size, config.seed);
    let me = MetricEvaluation::new(&spec, &w, &anchor)?;
    let report = metric_spectrum(&me, config.tol_rel)?;
    std::fs::write(config.out_dir.join("spectrum.json"), report.to_json()?)?;

    let trace: f64 = report.eigenvalues.iter().sum();
    log.append(
        "spectrum",
        0,
        "summary",
        values_of(&[
            ("lambda_max", report.eigenvalues[0]),
            ("lambda_min", *report.eigenvalues.last().unwrap()),
            ("degeneracy_dim", report.degeneracy_dim as f64),
            ("rank", report.rank() as f64),
            ("eigenvalue_sum", trace),
            ("n", report.n as f64),
            ("batch_size", report.batch_size as f64),
            ("tol_rel", report.tol_rel),
        ]),
    )?;
    Ok(log)
}
