//! Sequential-task learning: FIP adaptation versus naive fine-tuning.

use super::{
    build_tasks, initial_spec, log_path_steps, log_task_accuracies, seed_mix,
    ExperimentConfig, ExperimentKind, TaskData,
};
use crate::checkpoint::{save_checkpoint, Checkpoint};
use crate::error::{FipError, Result};
use crate::net::{
    append_output_nodes, loss_and_grad, Batch, LossKind, NetworkSpec, WeightVector,
};
use crate::objective::ObjectiveSpec;
use crate::path::sample_path;
use crate::runlog::{values_of, RunLog};
use crate::train::train_base;
use std::path::Path;

/// Trains the base task, then adapts to each subsequent task twice from the
/// same snapshot: along a directed path whose metric is anchored to all
/// previously learned heads and data, and by budget-matched naive gradient
/// descent on the new task alone. A single-task config reduces to base
/// training.
pub fn run_continual(config: &ExperimentConfig) -> Result<RunLog> {
    config.validate()?;
    let (_lock, mut log) = super::begin_run(config)?;
    let tasks = build_tasks(config)?;

    let spec = initial_spec(config, tasks[0].train.dim(), tasks[0].n_classes)?;
    let settings = config.train.to_settings(config.seed);
    let base = train_base(&spec, &tasks[0].train, &settings, &mut log, "task0:train")?;
    log_task_accuracies(
        &mut log,
        "task0:train",
        settings.epochs as u64,
        &spec,
        &base,
        &tasks[..1],
    )?;
    save_checkpoint(
        &Checkpoint::new(&spec, &base, vec!["base training (task 0)".into()]),
        &config.out_dir.join("base.fipc"),
    )?;

    let mut fip = (spec.clone(), base.clone());
    let mut naive = (spec, base);
    for j in 1..tasks.len() {
        let append_seed = seed_mix(config.seed, 50 + j as u64);
        fip = append_output_nodes(
            &fip.0,
            &fip.1,
            j,
            tasks[j].n_classes,
            config.append_init_scale,
            append_seed,
        )?;
        naive = append_output_nodes(
            &naive.0,
            &naive.1,
            j,
            tasks[j].n_classes,
            config.append_init_scale,
            append_seed,
        )?;

        let pre_phase = format!("task{j}:pre");
        log_task_accuracies(&mut log, &pre_phase, 0, &fip.0, &fip.1, &tasks[..=j])?;

        let fip_phase = format!("task{j}:fip");
        fip.1 = adapt_with_path(config, &mut log, &fip_phase, &fip.0, &fip.1, &tasks, j)?;
        log_task_accuracies(
            &mut log,
            &fip_phase,
            config.path.n_steps as u64,
            &fip.0,
            &fip.1,
            &tasks[..=j],
        )?;

        let naive_phase = format!("task{j}:naive");
        naive.1 = naive_with_trace(
            config,
            &mut log,
            &naive_phase,
            &naive.0,
            &naive.1,
            &tasks[j].train,
            &config.out_dir.join(format!("paths/task{j}_naive")),
        )?;
        log_task_accuracies(
            &mut log,
            &naive_phase,
            config.path.n_steps as u64,
            &naive.0,
            &naive.1,
            &tasks[..=j],
        )?;
    }

    save_checkpoint(
        &Checkpoint::new(&fip.0, &fip.1, vec!["continual adaptation endpoint".into()]),
        &config.out_dir.join("final_fip.fipc"),
    )?;
    super::emit_plotdata(&config.out_dir, ExperimentKind::Continual)?;
    Ok(log)
}

/// Directed path toward task `j`'s loss: the metric is evaluated on the
/// pooled inputs of tasks `0..j` and restricted to their heads; the
/// objective gradient comes from task `j`'s own data.
fn adapt_with_path(
    config: &ExperimentConfig,
    log: &mut RunLog,
    phase: &str,
    spec: &NetworkSpec,
    w: &WeightVector,
    tasks: &[TaskData],
    j: usize,
) -> Result<WeightVector> {
    let previous: Vec<&Batch> = tasks[..j].iter().map(|t| &t.train).collect();
    let metric_batch = Batch::concat_inputs(&previous)?;
    let mut cfg = config.path.to_config(w, seed_mix(config.seed, 100 + j as u64));
    cfg.metric_tasks = Some((0..j).collect());
    let objective = ObjectiveSpec::TaskLoss {
        batch: tasks[j].train.clone(),
    };
    let path = sample_path(spec, w, &metric_batch, &objective, &cfg)?;
    log_path_steps(log, phase, &path)?;
    crate::path::save_path(
        &path,
        spec,
        &config.out_dir.join(format!("paths/task{j}_fip")),
        config.path.persist_stride,
    )?;
    Ok(path.endpoint().clone())
}

/// Budget-matched baseline: `n_steps` plain gradient-descent updates (no
/// momentum) on the new task alone, with the trajectory checkpointed for the
/// weight-space PCA.
fn naive_with_trace(
    config: &ExperimentConfig,
    log: &mut RunLog,
    phase: &str,
    spec: &NetworkSpec,
    w: &WeightVector,
    task_train: &Batch,
    trace_dir: &Path,
) -> Result<WeightVector> {
    std::fs::create_dir_all(trace_dir)?;
    save_checkpoint(
        &Checkpoint::new(spec, w, vec!["naive trace start".into()]),
        &trace_dir.join("w0.fipc"),
    )?;
    let n_updates = config.path.n_steps;
    let stride = config.path.persist_stride;
    let mut current = w.clone();
    for t in 0..n_updates {
        let (loss, grad) =
            loss_and_grad(spec, &current, task_train, LossKind::CrossEntropyOverHead)?;
        if !loss.is_finite() {
            return Err(FipError::Diverged {
                epoch: t,
                last_finite: Box::new(current),
            });
        }
        let mut values = current.values().to_vec();
        for (v, g) in values.iter_mut().zip(&grad) {
            *v -= config.train.lr * g;
        }
        current = WeightVector::new(spec, values)?;
        log.append(phase, t as u64, "update", values_of(&[("loss", loss)]))?;
        if t % stride == 0 || t + 1 == n_updates {
            save_checkpoint(
                &Checkpoint::new(spec, &current, vec![format!("naive update {t}")]),
                &trace_dir.join(format!("step_{t:05}.fipc")),
            )?;
        }
    }
    Ok(current)
}
