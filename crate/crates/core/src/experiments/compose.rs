//! Operator composition: continual-learning adaptation (CL) and
//! sparsifying compression (Co) applied in both orders from one base
//! network, measuring how far apart the endpoints land and how well each
//! performs on both tasks.

use super::{
    build_tasks, initial_spec, log_path_steps, log_task_accuracies, seed_mix,
    ExperimentConfig, ExperimentKind, TaskData,
};
use crate::checkpoint::{save_checkpoint, Checkpoint};
use crate::error::{FipError, Result};
use crate::linalg;
use crate::net::{append_output_nodes, Batch, NetworkSpec, WeightVector};
use crate::objective::{hard_sparsify, ObjectiveSpec, SparsifyRef};
use crate::path::{sample_path, sample_path_with};
use crate::runlog::{values_of, RunLog};
use crate::train::train_base;

/// Compression operator: sparsify toward `p` along a path whose metric
/// protects every head present, then hard-project. `p = 0` is the identity.
fn op_compress(
    config: &ExperimentConfig,
    log: &mut RunLog,
    phase: &str,
    spec: &NetworkSpec,
    w: &WeightVector,
    tasks: &[TaskData],
) -> Result<(WeightVector, f64)> {
    let p = config.sparsity;
    if p == 0.0 {
        return hard_sparsify(spec, w, 0.0);
    }
    let present: Vec<&Batch> = tasks
        .iter()
        .enumerate()
        .filter(|(t, _)| spec.head(*t).is_ok())
        .map(|(_, task)| &task.train)
        .collect();
    let metric_batch = Batch::concat_inputs(&present)?;
    let mut cfg = config.path.to_config(w, seed_mix(config.seed, 122));
    cfg.metric_tasks = Some(
        (0..tasks.len())
            .filter(|&t| spec.head(t).is_ok())
            .collect(),
    );
    let n_steps = cfg.n_steps;
    let include_biases = config.include_biases;
    let anchor = w.clone();
    let path = sample_path_with(spec, w, &metric_batch, &cfg, |t| ObjectiveSpec::Sparsify {
        p: p * (t + 1) as f64 / n_steps as f64,
        ref_point: match config.sparsify_ref {
            super::SparsifyRefMode::CurrentW => SparsifyRef::Current,
            super::SparsifyRefMode::FixedStart => SparsifyRef::Fixed(anchor.clone()),
        },
        include_biases,
    })?;
    log_path_steps(log, phase, &path)?;
    crate::path::save_path(
        &path,
        spec,
        &config.out_dir.join(format!("paths/{}", phase.replace(':', "_"))),
        config.path.persist_stride,
    )?;
    hard_sparsify(spec, path.endpoint(), p)
}

/// Adaptation operator: append task 1's head (seeded identically in every
/// pipeline) and follow a directed path toward its loss while the metric
/// protects task 0.
fn op_adapt(
    config: &ExperimentConfig,
    log: &mut RunLog,
    phase: &str,
    spec: &NetworkSpec,
    w: &WeightVector,
    tasks: &[TaskData],
) -> Result<(NetworkSpec, WeightVector)> {
    let (new_spec, appended) = append_output_nodes(
        spec,
        w,
        1,
        tasks[1].n_classes,
        config.append_init_scale,
        seed_mix(config.seed, 51),
    )?;
    let metric_batch = Batch::concat_inputs(&[&tasks[0].train])?;
    let mut cfg = config
        .path
        .to_config(&appended, seed_mix(config.seed, 121));
    cfg.metric_tasks = Some(vec![0]);
    let objective = ObjectiveSpec::TaskLoss {
        batch: tasks[1].train.clone(),
    };
    let path = sample_path(&new_spec, &appended, &metric_batch, &objective, &cfg)?;
    log_path_steps(log, phase, &path)?;
    crate::path::save_path(
        &path,
        &new_spec,
        &config.out_dir.join(format!("paths/{}", phase.replace(':', "_"))),
        config.path.persist_stride,
    )?;
    Ok((new_spec, path.endpoint().clone()))
}

fn zero_fraction(w: &WeightVector) -> f64 {
    w.values().iter().filter(|&&v| v == 0.0).count() as f64 / w.len() as f64
}

pub fn run_compose(config: &ExperimentConfig) -> Result<RunLog> {
    config.validate()?;
    let (_lock, mut log) = super::begin_run(config)?;
    let tasks = build_tasks(config)?;
    if tasks.len() < 2 {
        return Err(FipError::InvalidConfig(
            "compose needs two tasks (dataset n_tasks >= 2)".into(),
        ));
    }

    let spec = initial_spec(config, tasks[0].train.dim(), tasks[0].n_classes)?;
    let settings = config.train.to_settings(config.seed);
    let base = train_base(&spec, &tasks[0].train, &settings, &mut log, "train")?;
    log_task_accuracies(
        &mut log,
        "train",
        settings.epochs as u64,
        &spec,
        &base,
        &tasks[..1],
    )?;

    // The operators are seed-identical in both pipelines; only the order
    // differs, so p = 0 (where compression is the identity) makes the two
    // endpoints coincide bit for bit.
    let (spec_a, adapted) = op_adapt(config, &mut log, "cl-co:cl", &spec, &base, &tasks)?;
    let (w1, sparsity1) = op_compress(config, &mut log, "cl-co:co", &spec_a, &adapted, &tasks)?;
    log_task_accuracies(&mut log, "cl-co:done", 0, &spec_a, &w1, &tasks[..2])?;

    let (compressed, _) = op_compress(config, &mut log, "co-cl:co", &spec, &base, &tasks)?;
    let (spec_b, w2) = op_adapt(config, &mut log, "co-cl:cl", &spec, &compressed, &tasks)?;
    log_task_accuracies(&mut log, "co-cl:done", 0, &spec_b, &w2, &tasks[..2])?;

    assert_eq!(spec_a, spec_b, "both pipelines end at the same architecture");
    let diff = linalg::sub(w1.values(), w2.values());
    let l2 = linalg::norm(&diff);
    let rel = l2 / linalg::norm(w1.values()).max(f64::MIN_POSITIVE);
    log.append(
        "compose",
        0,
        "summary",
        values_of(&[
            ("endpoint_l2_distance", l2),
            ("endpoint_rel_distance", rel),
            ("clco_achieved_sparsity", sparsity1),
            ("cocl_final_zero_fraction", zero_fraction(&w2)),
        ]),
    )?;
    save_checkpoint(
        &Checkpoint::new(&spec_a, &w1, vec!["compose: adapt then compress".into()]),
        &config.out_dir.join("endpoint_cl_co.fipc"),
    )?;
    save_checkpoint(
        &Checkpoint::new(&spec_b, &w2, vec!["compose: compress then adapt".into()]),
        &config.out_dir.join("endpoint_co_cl.fipc"),
    )?;
    super::emit_plotdata(&config.out_dir, ExperimentKind::Compose)?;
    Ok(log)
}
