//! Path ensembles, PGD attack generation, softmax-sum inference, and the
//! coherence / representation-diversity diagnostics.

use crate::error::{FipError, Result};
use crate::linalg;
use crate::net::{
    forward, forward_trace, input_gradient, softmax, Batch, NetworkSpec, WeightVector,
};
use crate::path::FipPath;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Where an ensemble's members came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleSource {
    /// Sampled along one weight-space path.
    FipPath,
    /// Independently trained runs.
    IndependentRuns,
    /// Checkpoints of a single training run.
    TrainingCheckpoints,
}

/// A set of same-architecture networks used jointly at inference time.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    spec: NetworkSpec,
    members: Vec<WeightVector>,
    source: EnsembleSource,
    /// Task whose output head inference runs over.
    task_id: usize,
}

impl Ensemble {
    pub fn new(
        spec: NetworkSpec,
        members: Vec<WeightVector>,
        source: EnsembleSource,
        task_id: usize,
    ) -> Result<Self> {
        if members.is_empty() {
            return Err(FipError::InvalidConfig(
                "an ensemble needs at least one member".into(),
            ));
        }
        for m in &members {
            m.check(&spec)?;
        }
        spec.head(task_id)?;
        Ok(Ensemble {
            spec,
            members,
            source,
            task_id,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn members(&self) -> &[WeightVector] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn source(&self) -> &EnsembleSource {
        &self.source
    }

    pub fn task_id(&self) -> usize {
        self.task_id
    }

    /// Fraction of the batch classified correctly by the softmax sum.
    pub fn accuracy(&self, batch: &Batch) -> Result<f64> {
        let labels = batch.labels().ok_or(FipError::MissingLabels)?;
        let mut correct = 0usize;
        for (i, &label) in labels.iter().enumerate() {
            let (class, _) = ensemble_predict(self, batch.input(i))?;
            if class == label {
                correct += 1;
            }
        }
        Ok(correct as f64 / batch.len() as f64)
    }
}

/// Even-grid index selection including the last index.
fn even_indices(available: usize, count: usize) -> Vec<usize> {
    if count == 1 {
        return vec![available - 1];
    }
    (0..count)
        .map(|j| {
            let ideal = j as f64 * (available - 1) as f64 / (count - 1) as f64;
            ideal.round() as usize
        })
        .collect()
}

/// Picks `count` members evenly spaced by step index along a path, always
/// including the final step.
pub fn sample_ensemble_along_path(
    spec: &NetworkSpec,
    path: &FipPath,
    count: usize,
) -> Result<Ensemble> {
    if count == 0 {
        return Err(FipError::InvalidConfig("count must be >= 1".into()));
    }
    if path.steps.len() < count {
        return Err(FipError::InsufficientSteps {
            have: path.steps.len(),
            want: count,
        });
    }
    let members: Vec<WeightVector> = even_indices(path.steps.len(), count)
        .into_iter()
        .map(|i| path.steps[i].w.clone())
        .collect();
    let task_id = spec
        .head_ranges()
        .first()
        .map(|h| h.task_id)
        .ok_or_else(|| FipError::InvalidConfig("spec has no output heads".into()))?;
    Ensemble::new(spec.clone(), members, EnsembleSource::FipPath, task_id)
}

/// Softmax-sum inference: each member's softmax over the active head is
/// summed across members; the argmax wins, ties to the lowest class index.
pub fn ensemble_predict(ens: &Ensemble, x: &[f64]) -> Result<(usize, Vec<f64>)> {
    let head = ens.spec.head(ens.task_id)?;
    let mut summed = vec![0.0; head.len()];
    for member in &ens.members {
        let y = forward(&ens.spec, member, x)?;
        let s = softmax(&y.values()[head.start..head.end]);
        for (acc, v) in summed.iter_mut().zip(&s) {
            *acc += v;
        }
    }
    let mut best = 0usize;
    for (c, &v) in summed.iter().enumerate() {
        if v > summed[best] {
            best = c;
        }
    }
    Ok((best, summed))
}

/// L-infinity attack budget and iteration settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    /// Max-norm budget around each input.
    pub eps_adv: f64,
    pub step_size: f64,
    pub n_iters: usize,
    pub seed: u64,
    /// Valid input range `(lo, hi)`; every output is clamped into it.
    pub clamp: (f64, f64),
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_adv >= 0.0) || !self.eps_adv.is_finite() {
            return Err(FipError::InvalidConfig("eps_adv must be >= 0".into()));
        }
        if self.n_iters == 0 {
            return Err(FipError::InvalidConfig("n_iters must be >= 1".into()));
        }
        if !(self.clamp.0 < self.clamp.1) {
            return Err(FipError::InvalidConfig(
                "clamp range must satisfy lo < hi".into(),
            ));
        }
        if !(self.step_size >= 0.0) || !self.step_size.is_finite() {
            return Err(FipError::InvalidConfig("step_size must be >= 0".into()));
        }
        Ok(())
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Projects `x` onto the intersection of the L-infinity ball around `x0`
/// and the clamp range, exactly in f64 arithmetic: the returned value `v`
/// satisfies `|v - x0| <= eps` and `lo <= v <= hi` as written, with the
/// one-ulp outward rounding of `x0 +- eps` nudged back toward `x0`.
fn project_coord(x0: f64, x: f64, eps: f64, lo: f64, hi: f64) -> f64 {
    let mut v = x.clamp((x0 - eps).max(lo), (x0 + eps).min(hi));
    while v - x0 > eps {
        v = v.next_down();
    }
    while v - x0 < -eps {
        v = v.next_up();
    }
    v
}

/// Projected gradient descent on the cross-entropy of a surrogate network:
/// iterated sign-gradient ascent clipped to the L-infinity ball and the
/// clamp range (both exact). With more than one iteration the start point
/// is drawn uniformly inside the ball. `eps_adv = 0` returns the inputs
/// bit-identically.
pub fn pgd_attack(
    surrogate: (&NetworkSpec, &WeightVector),
    batch: &Batch,
    cfg: &AttackConfig,
) -> Result<Batch> {
    let (spec, w) = surrogate;
    cfg.validate()?;
    w.check(spec)?;
    batch.validate_for(spec)?;
    let labels = batch.labels().ok_or(FipError::MissingLabels)?;
    if cfg.eps_adv == 0.0 {
        return Ok(batch.clone());
    }
    let (lo, hi) = cfg.clamp;
    if batch.inputs_flat().iter().any(|&v| v < lo || v > hi) {
        return Err(FipError::InvalidConfig(
            "clamp range must contain every input".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut perturbed = Vec::with_capacity(batch.len() * batch.dim());
    for (i, &label) in labels.iter().enumerate() {
        let x0 = batch.input(i);
        let mut x: Vec<f64> = if cfg.n_iters > 1 {
            x0.iter()
                .map(|&v| {
                    let jitter: f64 = rng.gen_range(-cfg.eps_adv..=cfg.eps_adv);
                    project_coord(v, v + jitter, cfg.eps_adv, lo, hi)
                })
                .collect()
        } else {
            x0.to_vec()
        };
        for _ in 0..cfg.n_iters {
            let grad = input_gradient(spec, w, &x, label, batch.task_id())?;
            for ((xi, &x0i), g) in x.iter_mut().zip(x0).zip(&grad) {
                let stepped = *xi + cfg.step_size * sign(*g);
                *xi = project_coord(x0i, stepped, cfg.eps_adv, lo, hi);
            }
        }
        perturbed.extend_from_slice(&x);
    }
    batch.with_inputs(perturbed)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    linalg::dot(a, b) / (linalg::norm(a) * linalg::norm(b))
}

/// Mean cosine similarity between the input-gradients of two networks on a
/// labeled batch. Inputs where either gradient vanishes are skipped; if all
/// are skipped the score is undefined and an error is returned.
pub fn coherence_score(
    member: (&NetworkSpec, &WeightVector),
    surrogate: (&NetworkSpec, &WeightVector),
    batch: &Batch,
) -> Result<f64> {
    let labels = batch.labels().ok_or(FipError::MissingLabels)?;
    if member.0.input_dim() != surrogate.0.input_dim() {
        return Err(FipError::DimensionMismatch {
            layer: 0,
            expected: surrogate.0.input_dim(),
            got: member.0.input_dim(),
        });
    }
    let mut total = 0.0;
    let mut used = 0usize;
    for (i, &label) in labels.iter().enumerate() {
        let x = batch.input(i);
        let gm = input_gradient(member.0, member.1, x, label, batch.task_id())?;
        let gs = input_gradient(surrogate.0, surrogate.1, x, label, batch.task_id())?;
        if linalg::norm(&gm) == 0.0 || linalg::norm(&gs) == 0.0 {
            continue;
        }
        total += cosine(&gm, &gs);
        used += 1;
    }
    if used == 0 {
        return Err(FipError::AllGradientsZero);
    }
    Ok(total / used as f64)
}

/// Similarity convention for activation vectors: bitwise-identical vectors
/// (zero or not) are fully similar, a single zero vector is fully
/// dissimilar, and the general case is the cosine clamped into `[-1, 1]`.
fn activation_similarity(a: &[f64], b: &[f64]) -> f64 {
    if a == b {
        return 1.0;
    }
    let na = linalg::norm(a);
    let nb = linalg::norm(b);
    match (na == 0.0, nb == 0.0) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => (linalg::dot(a, b) / (na * nb)).clamp(-1.0, 1.0),
    }
}

/// Mean pairwise `(1 - cosine)` of member activations at one hidden layer,
/// averaged over the batch. A single-member ensemble scores 0.
pub fn diversity_score(ens: &Ensemble, layer_index: usize, batch: &Batch) -> Result<f64> {
    let hidden_layers = ens.spec.n_layers() - 1;
    if layer_index >= hidden_layers {
        return Err(FipError::InvalidConfig(format!(
            "layer_index {layer_index} is not a hidden layer (0..{hidden_layers})"
        )));
    }
    if ens.len() == 1 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for i in 0..batch.len() {
        let x = batch.input(i);
        let acts: Vec<Vec<f64>> = ens
            .members
            .iter()
            .map(|m| forward_trace(&ens.spec, m, x).map(|tr| tr[layer_index].clone()))
            .collect::<Result<_>>()?;
        let mut pair_sum = 0.0;
        let mut pairs = 0usize;
        for a in 0..acts.len() {
            for b in (a + 1)..acts.len() {
                pair_sum += 1.0 - activation_similarity(&acts[a], &acts[b]);
                pairs += 1;
            }
        }
        total += pair_sum / pairs as f64;
    }
    Ok(total / batch.len() as f64)
}
