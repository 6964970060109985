//! Sparsification sweep: anneal toward a p-sparse projection along a path,
//! then hard-project and measure.

use super::{
    build_tasks, initial_spec, log_path_steps, log_task_accuracies, seed_mix,
    ExperimentConfig, ExperimentKind,
};
use crate::checkpoint::{save_checkpoint, Checkpoint};
use crate::error::Result;
use crate::net::accuracy;
use crate::objective::{hard_sparsify, ObjectiveSpec, SparsifyRef};
use crate::path::sample_path_with;
use crate::runlog::{values_of, RunLog};
use crate::train::train_base;

pub fn default_sparsity_grid() -> Vec<f64> {
    (0..=8).map(|k| k as f64 / 10.0).collect()
}

/// For each target `p` in the grid: a path whose secondary objective is the
/// distance to the p-sparse projection (ramped linearly from 0 to `p` over
/// the steps), a final hard projection, and post-projection accuracies.
/// `p = 0` is a no-op by definition: the base network is measured directly,
/// so its accuracy matches the base exactly.
pub fn run_sparsify(config: &ExperimentConfig) -> Result<RunLog> {
    config.validate()?;
    let (_lock, mut log) = super::begin_run(config)?;
    let tasks = build_tasks(config)?;
    let task = &tasks[0];

    let spec = initial_spec(config, task.train.dim(), task.n_classes)?;
    let settings = config.train.to_settings(config.seed);
    let base = train_base(&spec, &task.train, &settings, &mut log, "train")?;
    log_task_accuracies(
        &mut log,
        "train",
        settings.epochs as u64,
        &spec,
        &base,
        &tasks[..1],
    )?;
    save_checkpoint(
        &Checkpoint::new(&spec, &base, vec!["base training".into()]),
        &config.out_dir.join("base.fipc"),
    )?;

    let grid = config
        .sparsity_grid
        .clone()
        .unwrap_or_else(default_sparsity_grid);
    for (gi, &p) in grid.iter().enumerate() {
        let phase = format!("sparsify:p{:03}", (p * 100.0).round() as u32);
        let endpoint = if p == 0.0 {
            base.clone()
        } else {
            let cfg = config
                .path
                .to_config(&base, seed_mix(config.seed, 200 + gi as u64));
            let n_steps = cfg.n_steps;
            let include_biases = config.include_biases;
            let ref_for_step = |_t: usize| match config.sparsify_ref {
                super::SparsifyRefMode::CurrentW => SparsifyRef::Current,
                super::SparsifyRefMode::FixedStart => SparsifyRef::Fixed(base.clone()),
            };
            let path = sample_path_with(&spec, &base, &task.train, &cfg, |t| {
                ObjectiveSpec::Sparsify {
                    p: p * (t + 1) as f64 / n_steps as f64,
                    ref_point: ref_for_step(t),
                    include_biases,
                }
            })?;
            log_path_steps(&mut log, &phase, &path)?;
            crate::path::save_path(
                &path,
                &spec,
                &config.out_dir.join(format!("paths/{}", phase.replace(':', "_"))),
                config.path.persist_stride,
            )?;
            path.endpoint().clone()
        };
        let (sparse, achieved) = hard_sparsify(&spec, &endpoint, p)?;
        save_checkpoint(
            &Checkpoint::new(&spec, &sparse, vec![format!("hard sparsify p={p}")]),
            &config.out_dir.join(format!("sparse_p{:03}.fipc", (p * 100.0).round() as u32)),
        )?;
        log.append(
            &phase,
            config.path.n_steps as u64,
            "summary",
            values_of(&[
                ("p_target", p),
                ("achieved_sparsity", achieved),
                ("train_acc", accuracy(&spec, &sparse, &task.train)?),
                ("test_acc", accuracy(&spec, &sparse, &task.test)?),
            ]),
        )?;
    }
    super::emit_plotdata(&config.out_dir, ExperimentKind::Sparsify)?;
    Ok(log)
}
