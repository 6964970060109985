//! Experiment drivers behind the CLI: continual learning, sparsification
//! sweeps, adversarial ensembling, operator composition, and metric spectra.
//!
//! Every driver locks its output directory, writes an append-only
//! `runlog.jsonl`, persists paths/checkpoints under the directory, and emits
//! plot-ready CSV files at the end. Reruns with the same config and seed
//! reproduce every logged scalar except wall-clock fields.

mod compose;
mod continual;
mod ensemble_run;
mod plotdata;
mod sparsify;
mod spectrum;

pub use compose::run_compose;
pub use continual::run_continual;
pub use ensemble_run::run_ensemble;
pub use plotdata::{emit_plotdata, pca_project_2d, Pca2d};
pub use sparsify::run_sparsify;
pub use spectrum::run_spectrum;

use crate::data::{gen_blob_centers, gen_blobs_from_centers};
use crate::error::{FipError, Result};
use crate::idx::load_idx;
use crate::net::{accuracy, Activation, Batch, NetworkSpec, WeightVector};
use crate::path::{FipPath, PathConfig};
use crate::runlog::{values_of, RunLog};
use crate::train::TrainSettings;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Continual,
    Sparsify,
    Ensemble,
    Compose,
    Spectrum,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Continual => "continual",
            ExperimentKind::Sparsify => "sparsify",
            ExperimentKind::Ensemble => "ensemble",
            ExperimentKind::Compose => "compose",
            ExperimentKind::Spectrum => "spectrum",
        }
    }
}

/// Where the task data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum DatasetSpec {
    /// Synthetic Gaussian blobs; each task draws fresh cluster centers.
    /// `task_offset` shifts task `t`'s centers by `t * offset` along every
    /// axis, giving later tasks their own input region (a domain-shifted
    /// split, which is what makes naive fine-tuning forget).
    Blobs {
        n_classes: usize,
        n_per_class: usize,
        test_per_class: usize,
        dim: usize,
        separation: f64,
        #[serde(default = "default_one")]
        n_tasks: usize,
        #[serde(default)]
        task_offset: f64,
    },
    /// Standard IDX image/label files, optionally split into class-group
    /// tasks (`classes_per_task = 0` keeps a single task over all classes).
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        #[serde(default)]
        classes_per_task: usize,
    },
}

fn default_one() -> usize {
    1
}

fn default_rel_step() -> f64 {
    1e-2
}

fn default_beta() -> f64 {
    1.0
}

fn default_inner_iters() -> usize {
    crate::path::DEFAULT_INNER_ITERS
}

fn default_candidates() -> usize {
    crate::path::DEFAULT_N_CANDIDATES
}

fn default_anchor() -> usize {
    crate::path::DEFAULT_ANCHOR_BATCH_SIZE
}

fn default_stride() -> usize {
    crate::path::DEFAULT_PERSIST_STRIDE
}

fn default_momentum() -> f64 {
    0.9
}

fn default_members() -> usize {
    10
}

fn default_compose_p() -> f64 {
    0.3
}

fn default_tol_rel() -> f64 {
    1e-6
}

fn default_init_scale() -> f64 {
    0.01
}

fn default_true() -> bool {
    true
}

fn default_eps_rel() -> f64 {
    0.03
}

fn default_step_frac() -> f64 {
    0.25
}

fn default_attack_iters() -> usize {
    10
}

/// Path solver settings as written in config files. `epsilon` is either
/// absolute or derived from `relative_step` (`sqrt(eps) = rel * ||w||`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSettings {
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default = "default_rel_step")]
    pub relative_step: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    pub n_steps: usize,
    #[serde(default = "default_inner_iters")]
    pub inner_iters: usize,
    #[serde(default)]
    pub inner_lr: Option<f64>,
    #[serde(default = "default_candidates")]
    pub n_candidates: usize,
    #[serde(default = "default_anchor")]
    pub anchor_batch_size: usize,
    #[serde(default = "default_stride")]
    pub persist_stride: usize,
}

impl PathSettings {
    pub fn to_config(&self, w: &WeightVector, seed: u64) -> PathConfig {
        let epsilon = self.epsilon.unwrap_or_else(|| {
            let step = self.relative_step * w.euclidean_norm();
            step * step
        });
        let mut cfg = PathConfig::new(epsilon, self.n_steps);
        cfg.beta = self.beta;
        cfg.inner_iters = self.inner_iters;
        cfg.inner_lr = self.inner_lr.unwrap_or(0.1 * epsilon.sqrt());
        cfg.n_candidates = self.n_candidates;
        cfg.anchor_batch_size = self.anchor_batch_size;
        cfg.seed = seed;
        cfg
    }
}

/// Base-training hyperparameters as written in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub lr: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl TrainParams {
    pub fn to_settings(&self, seed: u64) -> TrainSettings {
        let mut s = TrainSettings::new(self.lr, self.epochs, self.batch_size, seed);
        s.momentum = self.momentum;
        s
    }
}

/// Which reference point the sparsification distance projects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SparsifyRefMode {
    /// Reproject the moving weights each step (annealing).
    #[default]
    CurrentW,
    /// Keep the projection anchored at the path's starting weights.
    FixedStart,
}

/// PGD budget relative to the observed input range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackParams {
    #[serde(default = "default_eps_rel")]
    pub eps_rel: f64,
    #[serde(default = "default_step_frac")]
    pub step_frac: f64,
    #[serde(default = "default_attack_iters")]
    pub n_iters: usize,
}

impl Default for AttackParams {
    fn default() -> Self {
        AttackParams {
            eps_rel: default_eps_rel(),
            step_frac: default_step_frac(),
            n_iters: default_attack_iters(),
        }
    }
}

/// One experiment, fully specified. Serialized as the CLI's JSON config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub dataset: DatasetSpec,
    pub hidden_dims: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    pub train: TrainParams,
    pub path: PathSettings,
    #[serde(default)]
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Sparsify: target fractions to sweep (default 0, 0.1, ..., 0.8).
    #[serde(default)]
    pub sparsity_grid: Option<Vec<f64>>,
    /// Compose: the single sparsity target.
    #[serde(default = "default_compose_p")]
    pub sparsity: f64,
    #[serde(default = "default_members")]
    pub ensemble_members: usize,
    #[serde(default)]
    pub attack: AttackParams,
    /// Spectrum: relative degeneracy threshold.
    #[serde(default = "default_tol_rel")]
    pub tol_rel: f64,
    #[serde(default = "default_init_scale")]
    pub append_init_scale: f64,
    /// Sparsification treats biases as ordinary coordinates unless disabled.
    #[serde(default = "default_true")]
    pub include_biases: bool,
    #[serde(default)]
    pub sparsify_ref: SparsifyRefMode,
}

fn default_activation() -> Activation {
    Activation::Relu
}

impl ExperimentConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn run_id(&self) -> String {
        format!("{}-seed{}", self.kind.name(), self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) {
            return Err(FipError::InvalidConfig(
                "hidden_dims must be non-empty with positive widths".into(),
            ));
        }
        if !self.train.lr.is_finite() || self.train.lr < 0.0 {
            return Err(FipError::InvalidConfig("train.lr must be >= 0".into()));
        }
        if self.train.epochs == 0 || self.train.batch_size == 0 {
            return Err(FipError::InvalidConfig(
                "train.epochs and train.batch_size must be >= 1".into(),
            ));
        }
        if self.path.n_steps == 0 {
            return Err(FipError::InvalidConfig("path.n_steps must be >= 1".into()));
        }
        if let Some(grid) = &self.sparsity_grid {
            if grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(FipError::InvalidConfig(
                    "sparsity_grid entries must be in [0, 1]".into(),
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.sparsity) {
            return Err(FipError::InvalidConfig("sparsity must be in [0, 1]".into()));
        }
        if self.ensemble_members == 0 {
            return Err(FipError::InvalidConfig(
                "ensemble_members must be >= 1".into(),
            ));
        }
        match &self.dataset {
            DatasetSpec::Blobs {
                n_classes,
                n_per_class,
                test_per_class,
                dim,
                separation,
                n_tasks,
                ..
            } => {
                if *n_classes < 2 || *n_per_class == 0 || *test_per_class == 0 || *dim == 0 {
                    return Err(FipError::InvalidConfig(
                        "blobs need >= 2 classes and positive sizes".into(),
                    ));
                }
                if !(*separation > 0.0) {
                    return Err(FipError::InvalidConfig("separation must be > 0".into()));
                }
                if *n_tasks == 0 {
                    return Err(FipError::InvalidConfig("n_tasks must be >= 1".into()));
                }
            }
            DatasetSpec::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
                ..
            } => {
                for p in [train_images, train_labels, test_images, test_labels] {
                    if !p.exists() {
                        return Err(FipError::InvalidConfig(format!(
                            "dataset file {} does not exist",
                            p.display()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Exclusive ownership of an output directory via a `.lock` file; released
/// on drop.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(".lock");
        match std::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(mut f) => {
                use std::io::Write;
                let _ = writeln!(f, "{}", std::process::id());
                Ok(DirLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(FipError::OutputDirLocked {
                    dir: dir.display().to_string(),
                })
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

/// Locks the output directory, echoes the resolved config into
/// `config.json` (run provenance), and opens the run log.
pub(crate) fn begin_run(config: &ExperimentConfig) -> Result<(DirLock, RunLog)> {
    let lock = DirLock::acquire(&config.out_dir)?;
    std::fs::write(
        config.out_dir.join("config.json"),
        serde_json::to_string_pretty(config)?,
    )?;
    let log = RunLog::create(&config.out_dir, config.run_id())?;
    Ok((lock, log))
}

/// One task's train/test split, with `task_id` already assigned.
#[derive(Debug, Clone)]
pub struct TaskData {
    pub train: Batch,
    pub test: Batch,
    pub n_classes: usize,
}

pub(crate) fn seed_mix(seed: u64, salt: u64) -> u64 {
    seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Materializes the configured tasks. Blobs draw fresh centers per task;
/// IDX tasks split the label set into consecutive class groups relabeled
/// locally.
pub fn build_tasks(config: &ExperimentConfig) -> Result<Vec<TaskData>> {
    match &config.dataset {
        DatasetSpec::Blobs {
            n_classes,
            n_per_class,
            test_per_class,
            dim,
            separation,
            n_tasks,
            task_offset,
        } => {
            let mut tasks = Vec::with_capacity(*n_tasks);
            for t in 0..*n_tasks {
                let cseed = seed_mix(config.seed, 10_000 + t as u64);
                let mut centers = gen_blob_centers(*n_classes, *dim, *separation, cseed)?;
                for center in centers.iter_mut() {
                    for coord in center.iter_mut() {
                        *coord += t as f64 * task_offset;
                    }
                }
                let train = gen_blobs_from_centers(&centers, *n_per_class, seed_mix(cseed, 1))?
                    .retagged(t);
                let test = gen_blobs_from_centers(&centers, *test_per_class, seed_mix(cseed, 2))?
                    .retagged(t);
                tasks.push(TaskData {
                    train,
                    test,
                    n_classes: *n_classes,
                });
            }
            Ok(tasks)
        }
        DatasetSpec::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
            classes_per_task,
        } => {
            let train = load_idx(train_images, train_labels)?;
            let test = load_idx(test_images, test_labels)?;
            let max_label = train
                .labels()
                .unwrap()
                .iter()
                .chain(test.labels().unwrap())
                .max()
                .copied()
                .unwrap_or(0);
            let n_classes = max_label + 1;
            if *classes_per_task == 0 || *classes_per_task >= n_classes {
                return Ok(vec![TaskData {
                    train,
                    test,
                    n_classes,
                }]);
            }
            let mut tasks = Vec::new();
            let mut start = 0usize;
            let mut t = 0usize;
            while start < n_classes {
                let end = (start + classes_per_task).min(n_classes);
                tasks.push(TaskData {
                    train: split_classes(&train, start, end, t),
                    test: split_classes(&test, start, end, t),
                    n_classes: end - start,
                });
                start = end;
                t += 1;
            }
            Ok(tasks)
        }
    }
}

/// Rows whose label falls in `[start, end)`, relabeled to `0..end-start`.
fn split_classes(batch: &Batch, start: usize, end: usize, task_id: usize) -> Batch {
    let labels = batch.labels().unwrap();
    let idx: Vec<usize> = (0..batch.len())
        .filter(|&i| (start..end).contains(&labels[i]))
        .collect();
    let sub = batch.select_rows(&idx);
    let relabeled: Vec<usize> = sub.labels().unwrap().iter().map(|&l| l - start).collect();
    Batch::new(
        sub.inputs_flat().to_vec(),
        sub.dim(),
        Some(relabeled),
        task_id,
    )
    .expect("split preserves validity")
}

/// The network for the first task: `input -> hidden_dims -> n_classes`,
/// single head owned by task 0.
pub fn initial_spec(config: &ExperimentConfig, input_dim: usize, n_classes: usize) -> Result<NetworkSpec> {
    let mut dims = Vec::with_capacity(config.hidden_dims.len() + 2);
    dims.push(input_dim);
    dims.extend_from_slice(&config.hidden_dims);
    dims.push(n_classes);
    NetworkSpec::mlp(dims, config.activation)
}

/// Logs train/test accuracy for every task currently evaluable.
pub fn log_task_accuracies(
    log: &mut RunLog,
    phase: &str,
    step: u64,
    spec: &NetworkSpec,
    w: &WeightVector,
    tasks: &[TaskData],
) -> Result<BTreeMap<String, f64>> {
    let mut values = BTreeMap::new();
    for (t, task) in tasks.iter().enumerate() {
        if spec.head(t).is_err() {
            continue;
        }
        values.insert(
            format!("task{t}_train_acc"),
            accuracy(spec, w, &task.train)?,
        );
        values.insert(format!("task{t}_test_acc"), accuracy(spec, w, &task.test)?);
    }
    log.append(phase, step, "eval", values.clone())?;
    Ok(values)
}

/// Logs the per-step scalar diagnostics of a path.
pub fn log_path_steps(log: &mut RunLog, phase: &str, path: &FipPath) -> Result<()> {
    let w0 = path.w0.values();
    for step in &path.steps {
        let dist: f64 = step
            .w
            .values()
            .iter()
            .zip(w0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        log.append(
            phase,
            step.t as u64,
            "path_step",
            values_of(&[
                ("g_norm_sq", step.g_norm_sq),
                ("obj_alignment", step.obj_alignment),
                ("secondary_loss", step.secondary_loss),
                ("dist_from_w0", dist),
                ("solver_final_objective", step.solver.final_objective),
            ]),
        )?;
    }
    Ok(())
}

/// Dispatches on the configured experiment kind.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunLog> {
    match config.kind {
        ExperimentKind::Continual => run_continual(config),
        ExperimentKind::Sparsify => run_sparsify(config),
        ExperimentKind::Ensemble => run_ensemble(config),
        ExperimentKind::Compose => run_compose(config),
        ExperimentKind::Spectrum => run_spectrum(config),
    }
}
