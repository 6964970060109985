//! Path sampling in weight space.
//!
//! Each step solves a constrained direction problem on the epsilon-sphere
//! `||theta||^2 = epsilon`: minimize the metric quadratic form `q(theta)`
//! (the squared output displacement), optionally plus `beta * <theta,
//! grad L>` for a secondary objective `L`. The solver samples candidate
//! directions uniformly on the sphere (plus a warm start along `-grad L`
//! when an objective is active), runs projected gradient descent with
//! backtracking on each, and keeps the candidate with the lowest final
//! objective. Chaining accepted directions yields a functionally invariant
//! path; a constant-velocity variant targets `q = v0` instead of the
//! minimum.
//!
//! Both objective terms are pre-normalized when an objective is active
//! (`q` by its warm-start value, the alignment by `sqrt(eps) * ||grad L||`)
//! so that `beta` is scale-free. When steps are chained, the previous
//! accepted direction joins the next step's candidates so the tangent stays
//! continuous and the chain explores instead of random-walking.

use crate::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::error::{FipError, Result};
use crate::linalg;
use crate::metric::MetricEvaluation;
use crate::net::{Batch, NetworkSpec, WeightVector};
use crate::objective::{objective_grad, ObjectiveSpec};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::borrow::Cow;
use std::path::Path;

pub const DEFAULT_INNER_ITERS: usize = 20;
pub const DEFAULT_N_CANDIDATES: usize = 8;
pub const DEFAULT_ANCHOR_BATCH_SIZE: usize = 256;
/// Persist full weights every this many steps (plus the endpoint).
pub const DEFAULT_PERSIST_STRIDE: usize = 10;
const MAX_BACKTRACKS: usize = 30;

/// Step-budget and solver settings for one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    /// Squared Euclidean step length: every accepted direction satisfies
    /// `||theta||^2 = epsilon`.
    pub epsilon: f64,
    /// Weight of the secondary-objective alignment term.
    pub beta: f64,
    pub n_steps: usize,
    /// Projected-descent iterations per candidate.
    pub inner_iters: usize,
    /// Initial descent step; backtracking halves it as needed.
    pub inner_lr: f64,
    /// Random sphere initializations per step (a warm start along
    /// `-grad L` is added on top when an objective is active).
    pub n_candidates: usize,
    pub seed: u64,
    /// Metric anchor subsample size; the subsample is drawn once per path.
    pub anchor_batch_size: usize,
    /// Restrict the metric to these tasks' output heads (continual
    /// learning anchors the metric to previously learned heads).
    pub metric_tasks: Option<Vec<usize>>,
}

impl PathConfig {
    pub fn new(epsilon: f64, n_steps: usize) -> Self {
        PathConfig {
            epsilon,
            beta: 1.0,
            n_steps,
            inner_iters: DEFAULT_INNER_ITERS,
            inner_lr: 0.1 * epsilon.max(0.0).sqrt(),
            n_candidates: DEFAULT_N_CANDIDATES,
            seed: 0,
            anchor_batch_size: DEFAULT_ANCHOR_BATCH_SIZE,
            metric_tasks: None,
        }
    }

    /// Chooses `epsilon` so that `sqrt(epsilon) = rel * ||w0||`.
    pub fn relative_to(w0: &WeightVector, rel: f64, n_steps: usize) -> Self {
        let step = rel * w0.euclidean_norm();
        PathConfig::new(step * step, n_steps)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(FipError::InvalidConfig(format!(
                "epsilon must be finite and > 0, got {}",
                self.epsilon
            )));
        }
        if self.beta < 0.0 || !self.beta.is_finite() {
            return Err(FipError::InvalidConfig("beta must be >= 0".into()));
        }
        if self.n_steps == 0 {
            return Err(FipError::InvalidConfig("n_steps must be >= 1".into()));
        }
        if self.inner_iters == 0 || self.n_candidates == 0 || self.anchor_batch_size == 0 {
            return Err(FipError::InvalidConfig(
                "inner_iters, n_candidates, anchor_batch_size must be >= 1".into(),
            ));
        }
        if !(self.inner_lr > 0.0) {
            return Err(FipError::InvalidConfig("inner_lr must be > 0".into()));
        }
        Ok(())
    }
}

/// Record of the inner solve for one accepted direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionDiagnostics {
    /// Index into the assembled candidate list (warm start first when present).
    pub candidate_index: usize,
    pub initial_objective: f64,
    pub final_objective: f64,
}

/// One accepted step: the direction, the weights after applying it, and the
/// scalar diagnostics logged along the path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathStep {
    pub t: usize,
    /// Weights after taking the step: `w_next = w_prev + theta_star`.
    pub w: WeightVector,
    pub theta_star: Vec<f64>,
    /// Metric norm of the step, `<theta*, theta*>_g` (output velocity squared).
    pub g_norm_sq: f64,
    /// `<theta*, grad L>`; zero when no objective gradient is present.
    pub obj_alignment: f64,
    /// Secondary loss at the pre-step weights.
    pub secondary_loss: f64,
    pub solver: DirectionDiagnostics,
}

/// Run metadata persisted with every path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathProvenance {
    pub seed: u64,
    pub code_version: String,
    pub n_params: usize,
    pub metric_dataset_fingerprint: u64,
    pub anchor_fingerprint: u64,
    pub anchor_size: usize,
}

/// An ordered chain of accepted steps starting at `w0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FipPath {
    pub w0: WeightVector,
    pub steps: Vec<PathStep>,
    pub config: PathConfig,
    pub provenance: PathProvenance,
}

impl FipPath {
    pub fn endpoint(&self) -> &WeightVector {
        self.steps.last().map(|s| &s.w).unwrap_or(&self.w0)
    }

    /// Cumulative Euclidean length, `sum_t ||theta_t||`.
    pub fn euclidean_length(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| linalg::norm(&s.theta_star))
            .sum()
    }

    /// Checks the chain identity `w_{t+1} = w_t + theta_t` exactly.
    pub fn chain_is_exact(&self) -> bool {
        let mut prev = self.w0.values();
        for step in &self.steps {
            let ok = step
                .w
                .values()
                .iter()
                .zip(prev.iter().zip(&step.theta_star))
                .all(|(&w, (&p, &th))| w == p + th);
            if !ok {
                return false;
            }
            prev = step.w.values();
        }
        true
    }
}

fn step_seed(seed: u64, t: usize) -> u64 {
    seed ^ (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn random_sphere_point(n: usize, radius: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let nv = linalg::norm(&v);
        if nv > 1e-12 {
            return linalg::scaled(&v, radius / nv);
        }
    }
}

/// Rescales onto the sphere in place; fails only for a (near-)zero vector.
fn project_sphere(v: &mut [f64], radius: f64) -> bool {
    let nv = linalg::norm(v);
    if !(nv > 1e-300) || !nv.is_finite() {
        return false;
    }
    let s = radius / nv;
    for x in v.iter_mut() {
        *x *= s;
    }
    true
}

/// The inner objective minimized on the sphere.
enum InnerGoal<'g> {
    /// `q / q_scale + beta * <theta, g> / lin_scale`, or plain `q` when no
    /// gradient is active.
    Descend {
        grad_l: Option<&'g [f64]>,
        beta: f64,
        q_scale: f64,
        lin_scale: f64,
    },
    /// `(q - v0)^2`: hold the output velocity at a target.
    ConstantVelocity { v0: f64 },
}

impl InnerGoal<'_> {
    fn objective(&self, me: &MetricEvaluation<'_>, theta: &[f64]) -> Result<f64> {
        let q = me.quadratic_form(theta)?;
        Ok(self.combine(q, theta))
    }

    fn combine(&self, q: f64, theta: &[f64]) -> f64 {
        match self {
            InnerGoal::Descend {
                grad_l,
                beta,
                q_scale,
                lin_scale,
            } => match grad_l {
                Some(g) => q / q_scale + beta * linalg::dot(theta, g) / lin_scale,
                None => q,
            },
            InnerGoal::ConstantVelocity { v0 } => {
                let d = q - v0;
                d * d
            }
        }
    }

    fn objective_and_grad(
        &self,
        me: &MetricEvaluation<'_>,
        theta: &[f64],
    ) -> Result<(f64, Vec<f64>)> {
        let (q, dq) = me.quadratic_form_and_grad(theta)?;
        match self {
            InnerGoal::Descend {
                grad_l,
                beta,
                q_scale,
                lin_scale,
            } => {
                let mut grad = linalg::scaled(&dq, 1.0 / q_scale);
                if let Some(g) = grad_l {
                    linalg::axpy(beta / lin_scale, g, &mut grad);
                }
                Ok((self.combine(q, theta), grad))
            }
            InnerGoal::ConstantVelocity { v0 } => {
                let d = q - v0;
                Ok((d * d, linalg::scaled(&dq, 2.0 * d)))
            }
        }
    }
}

/// Projected descent with backtracking from one candidate. The returned
/// objective never exceeds the initial one: the best-so-far iterate wins.
fn descend_candidate(
    me: &MetricEvaluation<'_>,
    goal: &InnerGoal<'_>,
    start: Vec<f64>,
    cfg: &PathConfig,
) -> Result<(Vec<f64>, f64, f64)> {
    let radius = cfg.epsilon.sqrt();
    let mut theta = start;
    let mut f = goal.objective(me, &theta)?;
    let f_init = f;
    let mut best_theta = theta.clone();
    let mut f_best = f;
    let mut lr = cfg.inner_lr;
    for _ in 0..cfg.inner_iters {
        let (_, grad) = goal.objective_and_grad(me, &theta)?;
        let mut trial_lr = lr;
        let mut improved = false;
        for _ in 0..MAX_BACKTRACKS {
            let mut cand = theta.clone();
            linalg::axpy(-trial_lr, &grad, &mut cand);
            if !project_sphere(&mut cand, radius) {
                trial_lr *= 0.5;
                continue;
            }
            let fc = goal.objective(me, &cand)?;
            if fc.is_finite() && fc <= f {
                theta = cand;
                f = fc;
                improved = true;
                if fc < f_best {
                    f_best = fc;
                    best_theta = theta.clone();
                }
                break;
            }
            trial_lr *= 0.5;
        }
        if !improved {
            break;
        }
        lr = (trial_lr * 2.0).min(cfg.inner_lr * 8.0);
    }
    Ok((best_theta, f_init, f_best))
}

fn solve_direction(
    me: &MetricEvaluation<'_>,
    goal: &InnerGoal<'_>,
    candidates: Vec<Vec<f64>>,
    cfg: &PathConfig,
) -> Result<(Vec<f64>, DirectionDiagnostics)> {
    let mut best: Option<(Vec<f64>, DirectionDiagnostics)> = None;
    for (index, cand) in candidates.into_iter().enumerate() {
        let (theta, f_init, f_final) = descend_candidate(me, goal, cand, cfg)?;
        let diag = DirectionDiagnostics {
            candidate_index: index,
            initial_objective: f_init,
            final_objective: f_final,
        };
        // strict comparison: ties keep the lowest candidate index
        let better = match &best {
            None => true,
            Some((_, d)) => f_final < d.final_objective,
        };
        if better {
            best = Some((theta, diag));
        }
    }
    Ok(best.expect("at least one candidate"))
}

/// Solves the per-step direction problem at the metric's base point.
///
/// With `grad_l` absent (or `beta = 0`, or a zero gradient) the solve reduces
/// to pure output-velocity minimization on the sphere; otherwise a warm-start
/// candidate along `-grad_l` joins the random initializations and the two
/// objective terms are normalized as documented on [`PathConfig`].
pub fn fip_direction(
    me: &MetricEvaluation<'_>,
    grad_l: Option<&[f64]>,
    cfg: &PathConfig,
) -> Result<(Vec<f64>, DirectionDiagnostics)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    fip_direction_with_rng(me, grad_l, None, cfg, &mut rng)
}

fn fip_direction_with_rng(
    me: &MetricEvaluation<'_>,
    grad_l: Option<&[f64]>,
    continuation: Option<&[f64]>,
    cfg: &PathConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, DirectionDiagnostics)> {
    cfg.validate()?;
    let n = me.weights().len();
    if let Some(g) = grad_l {
        if g.len() != n {
            return Err(FipError::WeightLength {
                expected: n,
                got: g.len(),
            });
        }
        if !linalg::all_finite(g) {
            return Err(FipError::NonFinite {
                what: "objective gradient".into(),
            });
        }
    }
    let radius = cfg.epsilon.sqrt();
    // A zero gradient or beta = 0 must behave exactly like the L-absent
    // call: same candidates, same objective.
    let active = grad_l.filter(|g| cfg.beta > 0.0 && linalg::norm(g) > 0.0);
    let mut candidates = Vec::with_capacity(cfg.n_candidates + 2);
    // The previous accepted direction seeds the candidate set during
    // chaining: without it the per-step argmin flips sign freely (q is even
    // in theta) and the chain degenerates into a random walk instead of a
    // path. It wins ties, so the tangent stays continuous unless another
    // candidate descends strictly lower.
    if let Some(prev) = continuation {
        let norm = linalg::norm(prev);
        if norm > 0.0 {
            candidates.push(linalg::scaled(prev, radius / norm));
        }
    }
    if let Some(g) = active {
        candidates.push(linalg::scaled(g, -radius / linalg::norm(g)));
    }
    for _ in 0..cfg.n_candidates {
        candidates.push(random_sphere_point(n, radius, rng));
    }
    let goal = match active {
        Some(g) => {
            let warm = linalg::scaled(g, -radius / linalg::norm(g));
            let q_ws = me.quadratic_form(&warm)?;
            InnerGoal::Descend {
                grad_l: Some(g),
                beta: cfg.beta,
                q_scale: if q_ws > 1e-300 { q_ws } else { 1.0 },
                lin_scale: radius * linalg::norm(g),
            }
        }
        None => InnerGoal::Descend {
            grad_l: None,
            beta: 0.0,
            q_scale: 1.0,
            lin_scale: 1.0,
        },
    };
    solve_direction(me, &goal, candidates, cfg)
}

/// Constant-velocity variant: minimizes `(q(theta) - v0)^2` on the sphere.
/// `v0 = 0` reduces to the plain direction solve up to the squared
/// reparameterization.
pub fn geodesic_step(me: &MetricEvaluation<'_>, v0: f64, cfg: &PathConfig) -> Result<PathStep> {
    cfg.validate()?;
    if !(v0 >= 0.0) || !v0.is_finite() {
        return Err(FipError::InvalidConfig(format!(
            "target velocity v0 must be finite and >= 0, got {v0}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = me.weights().len();
    let radius = cfg.epsilon.sqrt();
    let candidates: Vec<Vec<f64>> = (0..cfg.n_candidates)
        .map(|_| random_sphere_point(n, radius, &mut rng))
        .collect();
    // (q - 0)^2 is a monotone transform of q >= 0: the v0 = 0 problem is
    // exactly the plain minimization, which also conditions better (the
    // squared form's gradient vanishes at the optimum).
    let goal = if v0 == 0.0 {
        InnerGoal::Descend {
            grad_l: None,
            beta: 0.0,
            q_scale: 1.0,
            lin_scale: 1.0,
        }
    } else {
        InnerGoal::ConstantVelocity { v0 }
    };
    let (theta, diag) = solve_direction(me, &goal, candidates, cfg)?;
    let g_norm_sq = me.quadratic_form(&theta)?;
    let penalty = (g_norm_sq - v0) * (g_norm_sq - v0);
    let w = me.weights();
    let mut next = w.values().to_vec();
    linalg::axpy(1.0, &theta, &mut next);
    Ok(PathStep {
        t: 0,
        w: w.with_values(next),
        theta_star: theta,
        g_norm_sq,
        obj_alignment: 0.0,
        secondary_loss: penalty,
        solver: diag,
    })
}

fn fip_step_at(
    spec: &NetworkSpec,
    w: &WeightVector,
    batch_metric: &Batch,
    objective: &ObjectiveSpec,
    cfg: &PathConfig,
    t: usize,
    continuation: Option<&[f64]>,
) -> Result<PathStep> {
    cfg.validate()?;
    w.check(spec)?;
    let anchor = batch_metric.subsample(cfg.anchor_batch_size, cfg.seed);
    let mut me = MetricEvaluation::new(spec, w, &anchor)?;
    if let Some(tasks) = &cfg.metric_tasks {
        me = me.restricted_to_tasks(tasks)?;
    }
    let (secondary_loss, grad) = objective_grad(objective, spec, w)?;
    let mut rng = ChaCha8Rng::seed_from_u64(step_seed(cfg.seed, t));
    let (theta, diag) = fip_direction_with_rng(&me, grad.as_deref(), continuation, cfg, &mut rng)?;
    let g_norm_sq = me.quadratic_form(&theta)?;
    let obj_alignment = grad
        .as_deref()
        .map(|g| linalg::dot(&theta, g))
        .unwrap_or(0.0);
    let mut next = w.values().to_vec();
    linalg::axpy(1.0, &theta, &mut next);
    Ok(PathStep {
        t,
        w: w.with_values(next),
        theta_star: theta,
        g_norm_sq,
        obj_alignment,
        secondary_loss,
        solver: diag,
    })
}

/// One accepted step from `w`: builds the metric on the (fixed, seeded)
/// anchor subsample of `batch_metric`, evaluates the objective gradient at
/// `w`, solves for the direction, and returns the step with `w' = w + theta`.
pub fn fip_step(
    spec: &NetworkSpec,
    w: &WeightVector,
    batch_metric: &Batch,
    objective: &ObjectiveSpec,
    cfg: &PathConfig,
) -> Result<PathStep> {
    fip_step_at(spec, w, batch_metric, objective, cfg, 0, None)
}

fn provenance_for(cfg: &PathConfig, batch_metric: &Batch, n_params: usize) -> PathProvenance {
    let anchor = batch_metric.subsample(cfg.anchor_batch_size, cfg.seed);
    PathProvenance {
        seed: cfg.seed,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        n_params,
        metric_dataset_fingerprint: batch_metric.fingerprint(),
        anchor_fingerprint: anchor.fingerprint(),
        anchor_size: anchor.len(),
    }
}

fn sample_path_inner<'o, F>(
    spec: &NetworkSpec,
    w0: &WeightVector,
    batch_metric: &Batch,
    cfg: &PathConfig,
    mut objective_at: F,
) -> Result<FipPath>
where
    F: FnMut(usize) -> Cow<'o, ObjectiveSpec>,
{
    cfg.validate()?;
    w0.check(spec)?;
    let provenance = provenance_for(cfg, batch_metric, w0.len());
    let mut steps: Vec<PathStep> = Vec::with_capacity(cfg.n_steps);
    let mut current = w0.clone();
    for t in 0..cfg.n_steps {
        let objective = objective_at(t);
        let continuation = steps.last().map(|s: &PathStep| s.theta_star.as_slice());
        let step = fip_step_at(
            spec,
            &current,
            batch_metric,
            objective.as_ref(),
            cfg,
            t,
            continuation,
        )?;
        if !linalg::all_finite(step.w.values()) {
            return Err(FipError::NonFinitePath {
                step: t,
                partial: Box::new(FipPath {
                    w0: w0.clone(),
                    steps,
                    config: cfg.clone(),
                    provenance,
                }),
            });
        }
        current = step.w.clone();
        steps.push(step);
    }
    Ok(FipPath {
        w0: w0.clone(),
        steps,
        config: cfg.clone(),
        provenance,
    })
}

/// Chains `cfg.n_steps` accepted steps under one fixed objective.
pub fn sample_path(
    spec: &NetworkSpec,
    w0: &WeightVector,
    batch_metric: &Batch,
    objective: &ObjectiveSpec,
    cfg: &PathConfig,
) -> Result<FipPath> {
    sample_path_inner(spec, w0, batch_metric, cfg, |_| Cow::Borrowed(objective))
}

/// Chains steps with a per-step objective (e.g. a sparsity schedule).
pub fn sample_path_with<F>(
    spec: &NetworkSpec,
    w0: &WeightVector,
    batch_metric: &Batch,
    cfg: &PathConfig,
    mut objective_at: F,
) -> Result<FipPath>
where
    F: FnMut(usize) -> ObjectiveSpec,
{
    sample_path_inner(spec, w0, batch_metric, cfg, move |t| {
        Cow::Owned(objective_at(t))
    })
}

// ---------------------------------------------------------------------------
// Persistence: one JSON index plus stride-selected weight checkpoints.
// ---------------------------------------------------------------------------

/// Per-step scalars stored in the path index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathIndexStep {
    pub t: usize,
    pub g_norm_sq: f64,
    pub obj_alignment: f64,
    pub secondary_loss: f64,
    pub solver: DirectionDiagnostics,
    /// File name of the persisted weights, when this step was persisted.
    pub weights_file: Option<String>,
}

/// The JSON index written next to the per-step checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathIndex {
    pub config: PathConfig,
    pub provenance: PathProvenance,
    pub w0_file: String,
    pub steps: Vec<PathIndexStep>,
}

/// A path reloaded from disk: only stride-persisted steps carry weights.
#[derive(Debug, Clone)]
pub struct PersistedPath {
    pub index: PathIndex,
    pub spec: NetworkSpec,
    pub w0: WeightVector,
    pub steps: Vec<(usize, WeightVector)>,
}

/// Writes `index.json`, `w0.fipc`, and one checkpoint per persisted step
/// (every `stride`-th step plus the endpoint).
pub fn save_path(
    path: &FipPath,
    spec: &NetworkSpec,
    dir: &Path,
    stride: usize,
) -> Result<PathIndex> {
    if stride == 0 {
        return Err(FipError::InvalidConfig("stride must be >= 1".into()));
    }
    std::fs::create_dir_all(dir)?;
    let w0_file = "w0.fipc".to_string();
    save_checkpoint(
        &Checkpoint::new(spec, &path.w0, vec!["path w0".into()]),
        &dir.join(&w0_file),
    )?;
    let last = path.steps.len().saturating_sub(1);
    let mut steps = Vec::with_capacity(path.steps.len());
    for (i, step) in path.steps.iter().enumerate() {
        let persist = i % stride == 0 || i == last;
        let weights_file = if persist {
            let name = format!("step_{:05}.fipc", step.t);
            save_checkpoint(
                &Checkpoint::new(spec, &step.w, vec![format!("path step {}", step.t)]),
                &dir.join(&name),
            )?;
            Some(name)
        } else {
            None
        };
        steps.push(PathIndexStep {
            t: step.t,
            g_norm_sq: step.g_norm_sq,
            obj_alignment: step.obj_alignment,
            secondary_loss: step.secondary_loss,
            solver: step.solver,
            weights_file,
        });
    }
    let index = PathIndex {
        config: path.config.clone(),
        provenance: path.provenance.clone(),
        w0_file,
        steps,
    };
    let json = serde_json::to_string_pretty(&index)?;
    std::fs::write(dir.join("index.json"), json)?;
    Ok(index)
}

pub fn load_path(dir: &Path) -> Result<PersistedPath> {
    let index: PathIndex = serde_json::from_str(&std::fs::read_to_string(dir.join("index.json"))?)?;
    let w0_ck = load_checkpoint(&dir.join(&index.w0_file))?;
    let spec = w0_ck.header.spec.clone();
    let w0 = w0_ck.weights()?;
    let mut steps = Vec::new();
    for s in &index.steps {
        if let Some(file) = &s.weights_file {
            let ck = load_checkpoint(&dir.join(file))?;
            steps.push((s.t, ck.weights()?));
        }
    }
    Ok(PersistedPath {
        index,
        spec,
        w0,
        steps,
    })
}
