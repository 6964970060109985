//! Ensemble robustness: sample networks along an isofunctional path, attack
//! through an independently trained surrogate, and compare clean/adversarial
//! accuracy for the base network, each member, and the softmax sum.

use super::{
    build_tasks, initial_spec, log_path_steps, log_task_accuracies, seed_mix,
    ExperimentConfig, ExperimentKind,
};
use crate::checkpoint::{save_checkpoint, Checkpoint};
use crate::ensemble::{
    coherence_score, diversity_score, pgd_attack, sample_ensemble_along_path, AttackConfig,
    Ensemble, EnsembleSource,
};
use crate::error::{FipError, Result};
use crate::net::{accuracy, Batch, NetworkSpec, WeightVector};
use crate::objective::ObjectiveSpec;
use crate::path::sample_path;
use crate::runlog::{values_of, RunLog};
use crate::train::{train_base, train_from};
use serde::Serialize;

/// Everything needed to reproduce an adversarial batch.
#[derive(Debug, Serialize)]
struct AdversarialProvenance {
    surrogate_checkpoint_hash: u64,
    attack: AttackConfig,
    clean_fingerprint: u64,
    adversarial_fingerprint: u64,
}

fn input_range(batch: &Batch) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in batch.inputs_flat() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

fn log_model_eval(
    log: &mut RunLog,
    phase: &str,
    spec: &NetworkSpec,
    w: &WeightVector,
    clean: &Batch,
    adv: &Batch,
) -> Result<()> {
    log.append(
        phase,
        0,
        "eval",
        values_of(&[
            ("clean_acc", accuracy(spec, w, clean)?),
            ("adv_acc", accuracy(spec, w, adv)?),
        ]),
    )?;
    Ok(())
}

pub fn run_ensemble(config: &ExperimentConfig) -> Result<RunLog> {
    config.validate()?;
    if config.path.n_steps < config.ensemble_members {
        return Err(FipError::InvalidConfig(format!(
            "path.n_steps ({}) must cover ensemble_members ({})",
            config.path.n_steps, config.ensemble_members
        )));
    }
    let (_lock, mut log) = super::begin_run(config)?;
    let tasks = build_tasks(config)?;
    let task = &tasks[0];

    let spec = initial_spec(config, task.train.dim(), task.n_classes)?;
    let settings = config.train.to_settings(config.seed);
    let base = train_base(&spec, &task.train, &settings, &mut log, "train:base")?;
    log_task_accuracies(
        &mut log,
        "train:base",
        settings.epochs as u64,
        &spec,
        &base,
        &tasks[..1],
    )?;

    // Black-box threat model: the attacker trains its own network.
    let surrogate_settings = config.train.to_settings(seed_mix(config.seed, 777));
    let surrogate = train_base(
        &spec,
        &task.train,
        &surrogate_settings,
        &mut log,
        "train:surrogate",
    )?;
    let surrogate_ck = Checkpoint::new(&spec, &surrogate, vec!["surrogate training".into()]);
    let surrogate_hash = surrogate_ck.header.payload_checksum;
    save_checkpoint(&surrogate_ck, &config.out_dir.join("surrogate.fipc"))?;

    // Isofunctional path from the base network; members sampled evenly.
    let cfg = config.path.to_config(&base, seed_mix(config.seed, 300));
    let path = sample_path(&spec, &base, &task.train, &ObjectiveSpec::Null, &cfg)?;
    log_path_steps(&mut log, "path", &path)?;
    crate::path::save_path(
        &path,
        &spec,
        &config.out_dir.join("paths/fip"),
        config.path.persist_stride,
    )?;
    let ens = sample_ensemble_along_path(&spec, &path, config.ensemble_members)?;

    // Comparison ensemble: checkpoints of continued fine-tuning of the base.
    let checkpoint_ens = checkpoint_ensemble(config, &spec, &base, task, &mut log)?;

    let (lo, hi) = input_range(&task.test);
    let eps = config.attack.eps_rel * (hi - lo);
    let attack = AttackConfig {
        eps_adv: eps,
        step_size: eps * config.attack.step_frac,
        n_iters: config.attack.n_iters,
        seed: seed_mix(config.seed, 400),
        clamp: (lo, hi),
    };
    let adv = pgd_attack((&spec, &surrogate), &task.test, &attack)?;
    persist_adversarial(config, &task.test, &adv, surrogate_hash, &attack)?;

    log_model_eval(&mut log, "eval:base", &spec, &base, &task.test, &adv)?;
    log_model_eval(
        &mut log,
        "eval:surrogate",
        &spec,
        &surrogate,
        &task.test,
        &adv,
    )?;
    for (i, member) in ens.members().iter().enumerate() {
        log_model_eval(
            &mut log,
            &format!("eval:member_{i:02}"),
            &spec,
            member,
            &task.test,
            &adv,
        )?;
        let coherence = coherence_score((&spec, member), (&spec, &surrogate), &task.test)?;
        log.append(
            &format!("eval:member_{i:02}"),
            0,
            "coherence",
            values_of(&[("coherence_vs_surrogate", coherence)]),
        )?;
    }
    log.append(
        "eval:surrogate",
        0,
        "coherence",
        values_of(&[(
            "coherence_vs_surrogate",
            coherence_score((&spec, &surrogate), (&spec, &surrogate), &task.test)?,
        )]),
    )?;
    log.append(
        "eval:ensemble",
        0,
        "eval",
        values_of(&[
            ("clean_acc", ens.accuracy(&task.test)?),
            ("adv_acc", ens.accuracy(&adv)?),
            ("members", ens.len() as f64),
        ]),
    )?;

    // Per-layer representation diversity of both ensembles.
    for layer in 0..spec.n_layers() - 1 {
        log.append(
            "diversity",
            layer as u64,
            "diversity",
            values_of(&[
                ("fip", diversity_score(&ens, layer, &task.test)?),
                (
                    "checkpoints",
                    diversity_score(&checkpoint_ens, layer, &task.test)?,
                ),
            ]),
        )?;
    }

    super::emit_plotdata(&config.out_dir, ExperimentKind::Ensemble)?;
    Ok(log)
}

/// Continues training the base network and snapshots evenly spaced
/// checkpoints from the single run.
fn checkpoint_ensemble(
    config: &ExperimentConfig,
    spec: &NetworkSpec,
    base: &WeightVector,
    task: &super::TaskData,
    log: &mut RunLog,
) -> Result<Ensemble> {
    let mut members = Vec::with_capacity(config.ensemble_members);
    let mut current = base.clone();
    let mut settings = config.train.to_settings(seed_mix(config.seed, 888));
    settings.epochs = 1;
    for k in 0..config.ensemble_members {
        settings.seed = seed_mix(config.seed, 888 + k as u64);
        current = train_from(
            spec,
            &current,
            &task.train,
            &settings,
            log,
            &format!("train:checkpoints_{k:02}"),
        )?;
        members.push(current.clone());
    }
    Ensemble::new(
        spec.clone(),
        members,
        EnsembleSource::TrainingCheckpoints,
        task.train.task_id(),
    )
}

/// Adversarial inputs are persisted losslessly in the IDX double container
/// next to their labels and a JSON provenance sidecar.
fn persist_adversarial(
    config: &ExperimentConfig,
    clean: &Batch,
    adv: &Batch,
    surrogate_hash: u64,
    attack: &AttackConfig,
) -> Result<()> {
    let dir = config.out_dir.join("adversarial");
    std::fs::create_dir_all(&dir)?;
    crate::idx::write_idx_f64_matrix(
        &dir.join("inputs.idx"),
        adv.inputs_flat(),
        adv.len(),
        adv.dim(),
    )?;
    crate::idx::write_idx_labels(&dir.join("labels.idx"), adv.labels().unwrap_or(&[]))?;
    let provenance = AdversarialProvenance {
        surrogate_checkpoint_hash: surrogate_hash,
        attack: attack.clone(),
        clean_fingerprint: clean.fingerprint(),
        adversarial_fingerprint: adv.fingerprint(),
    };
    std::fs::write(
        dir.join("provenance.json"),
        serde_json::to_string_pretty(&provenance)?,
    )?;
    Ok(())
}
