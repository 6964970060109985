//! Minimal differentiable feedforward engine over a flat `f64` weight vector.
//!
//! A network is described by a [`NetworkSpec`] (layer widths, per-layer
//! activations, output-head bookkeeping) and parameterized by a flat
//! [`WeightVector`] laid out layer by layer: for layer `l` with `in` inputs
//! and `out` units, the row-major `out x in` weight block comes first,
//! followed by the `out` biases. Biases are ordinary coordinates of `w` and
//! participate in every derivative and projection.
//!
//! All operations are pure functions of their arguments and deterministic:
//! batch reductions run in a fixed left-to-right order.

pub(crate) mod forward;
pub(crate) mod grad;
mod surgery;

pub use forward::{accuracy, forward, forward_trace, softmax};
pub use grad::{
    input_gradient, jvp, loss_and_grad, output_jacobian, vjp, LossKind, DEFAULT_JACOBIAN_CAP,
};
pub use surgery::append_output_nodes;

use crate::error::{FipError, Result};
use crate::linalg::{self, Fnv64};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Element-wise activation applied after a layer's affine transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative at pre-activation `z`. The relu subgradient at 0 is 0,
    /// consistently across gradient and Jacobian paths.
    #[inline]
    pub fn deriv(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }
}

/// Half-open interval of output indices owned by one task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadRange {
    pub task_id: usize,
    pub start: usize,
    pub end: usize,
}

impl HeadRange {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Architecture description: layer widths, activations, and output heads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    layer_dims: Vec<usize>,
    activations: Vec<Activation>,
    head_ranges: Vec<HeadRange>,
}

/// Offsets of one layer's parameter blocks inside the flat weight vector.
#[derive(Debug, Clone, Copy)]
pub struct LayerLayout {
    pub layer: usize,
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

impl NetworkSpec {
    /// Builds a spec from explicit layer dims, per-layer activations, and
    /// head ranges. Head ranges must partition a suffix of the output
    /// indices: sorted, contiguous, disjoint, ending at the output dim.
    pub fn new(
        layer_dims: Vec<usize>,
        activations: Vec<Activation>,
        head_ranges: Vec<HeadRange>,
    ) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(FipError::InvalidConfig(
                "layer_dims must list at least input and output dims".into(),
            ));
        }
        if layer_dims.contains(&0) {
            return Err(FipError::InvalidConfig(
                "every layer dim must be >= 1".into(),
            ));
        }
        let n_layers = layer_dims.len() - 1;
        if activations.len() != n_layers {
            return Err(FipError::InvalidConfig(format!(
                "expected {} activations, got {}",
                n_layers,
                activations.len()
            )));
        }
        let m = *layer_dims.last().unwrap();
        let mut sorted = head_ranges.clone();
        sorted.sort_by_key(|h| h.start);
        let mut seen_tasks = Vec::new();
        let mut cursor = None;
        for h in &sorted {
            if h.start >= h.end || h.end > m {
                return Err(FipError::InvalidConfig(format!(
                    "head for task {} has invalid range {}..{}",
                    h.task_id, h.start, h.end
                )));
            }
            if seen_tasks.contains(&h.task_id) {
                return Err(FipError::DuplicateTask { task_id: h.task_id });
            }
            seen_tasks.push(h.task_id);
            if let Some(prev_end) = cursor {
                if h.start != prev_end {
                    return Err(FipError::InvalidConfig(
                        "head ranges must be contiguous and disjoint".into(),
                    ));
                }
            }
            cursor = Some(h.end);
        }
        if let Some(end) = cursor {
            if end != m {
                return Err(FipError::InvalidConfig(
                    "head ranges must cover a suffix ending at the output dim".into(),
                ));
            }
        }
        Ok(NetworkSpec {
            layer_dims,
            activations,
            head_ranges: sorted,
        })
    }

    /// Convenience constructor: dense net with the given dims, one hidden
    /// activation, identity outputs, and a single head (task 0) covering
    /// every output.
    pub fn mlp(layer_dims: Vec<usize>, hidden: Activation) -> Result<Self> {
        let n_layers = layer_dims.len().saturating_sub(1);
        let mut activations = vec![hidden; n_layers];
        if let Some(last) = activations.last_mut() {
            *last = Activation::Identity;
        }
        let m = *layer_dims.last().ok_or_else(|| {
            FipError::InvalidConfig("layer_dims must not be empty".into())
        })?;
        let heads = vec![HeadRange {
            task_id: 0,
            start: 0,
            end: m,
        }];
        NetworkSpec::new(layer_dims, activations, heads)
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn head_ranges(&self) -> &[HeadRange] {
        &self.head_ranges
    }

    pub fn head(&self, task_id: usize) -> Result<HeadRange> {
        self.head_ranges
            .iter()
            .find(|h| h.task_id == task_id)
            .copied()
            .ok_or(FipError::UnknownTask { task_id })
    }

    pub fn n_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    /// Total parameter count: per layer, `(in + 1) * out` (one bias per unit).
    pub fn param_count(&self) -> usize {
        self.layer_dims
            .windows(2)
            .map(|w| (w[0] + 1) * w[1])
            .sum()
    }

    pub fn layer_layouts(&self) -> Vec<LayerLayout> {
        let mut out = Vec::with_capacity(self.n_layers());
        let mut offset = 0;
        for (l, w) in self.layer_dims.windows(2).enumerate() {
            let (in_dim, out_dim) = (w[0], w[1]);
            out.push(LayerLayout {
                layer: l,
                in_dim,
                out_dim,
                weight_offset: offset,
                bias_offset: offset + in_dim * out_dim,
            });
            offset += (in_dim + 1) * out_dim;
        }
        out
    }

    /// `true` at positions of `w` that hold a bias.
    pub fn bias_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.param_count()];
        for lay in self.layer_layouts() {
            for i in 0..lay.out_dim {
                mask[lay.bias_offset + i] = true;
            }
        }
        mask
    }

    /// Stable checksum binding weight vectors to this spec. FNV-1a over a
    /// canonical encoding, so it is identical across runs and platforms.
    pub fn spec_hash(&self) -> u64 {
        let mut h = Fnv64::new();
        h.update(b"netspec-v1");
        h.update_u64(self.layer_dims.len() as u64);
        for &d in &self.layer_dims {
            h.update_u64(d as u64);
        }
        for a in &self.activations {
            h.update_u64(match a {
                Activation::Identity => 0,
                Activation::Relu => 1,
                Activation::Tanh => 2,
            });
        }
        h.update_u64(self.head_ranges.len() as u64);
        for hr in &self.head_ranges {
            h.update_u64(hr.task_id as u64);
            h.update_u64(hr.start as u64);
            h.update_u64(hr.end as u64);
        }
        h.finish()
    }
}

/// Flat parameter vector bound to a [`NetworkSpec`] by checksum.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    values: Vec<f64>,
    spec_hash: u64,
}

impl WeightVector {
    /// Validates length and finiteness against the spec.
    pub fn new(spec: &NetworkSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.param_count() {
            return Err(FipError::WeightLength {
                expected: spec.param_count(),
                got: values.len(),
            });
        }
        if !linalg::all_finite(&values) {
            return Err(FipError::NonFinite {
                what: "weight vector".into(),
            });
        }
        Ok(WeightVector {
            values,
            spec_hash: spec.spec_hash(),
        })
    }

    pub fn zeros(spec: &NetworkSpec) -> Self {
        WeightVector {
            values: vec![0.0; spec.param_count()],
            spec_hash: spec.spec_hash(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spec_hash(&self) -> u64 {
        self.spec_hash
    }

    pub fn matches(&self, spec: &NetworkSpec) -> bool {
        self.spec_hash == spec.spec_hash() && self.values.len() == spec.param_count()
    }

    /// Same binding, new values. For crate-internal updates that preserve
    /// length by construction (projections, optimizer steps).
    pub(crate) fn with_values(&self, values: Vec<f64>) -> WeightVector {
        debug_assert_eq!(self.values.len(), values.len());
        WeightVector {
            values,
            spec_hash: self.spec_hash,
        }
    }

    pub(crate) fn check(&self, spec: &NetworkSpec) -> Result<()> {
        if self.matches(spec) {
            Ok(())
        } else if self.values.len() != spec.param_count() {
            Err(FipError::WeightLength {
                expected: spec.param_count(),
                got: self.values.len(),
            })
        } else {
            Err(FipError::SpecMismatch)
        }
    }

    pub fn euclidean_norm(&self) -> f64 {
        linalg::norm(&self.values)
    }
}

/// Raw (pre-softmax) outputs of the last layer for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputVector {
    values: Vec<f64>,
}

impl OutputVector {
    pub(crate) fn new(values: Vec<f64>) -> Self {
        OutputVector { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// A set of inputs (row-major `n x dim`) with optional class labels.
///
/// Labels are class indices local to the task's output head: label `c` for
/// task `t` refers to output `head(t).start + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    inputs: Vec<f64>,
    n: usize,
    dim: usize,
    labels: Option<Vec<usize>>,
    task_id: usize,
}

impl Batch {
    pub fn new(
        inputs: Vec<f64>,
        dim: usize,
        labels: Option<Vec<usize>>,
        task_id: usize,
    ) -> Result<Self> {
        if dim == 0 || inputs.is_empty() || !inputs.len().is_multiple_of(dim) {
            return Err(FipError::InvalidConfig(format!(
                "inputs length {} is not a positive multiple of dim {}",
                inputs.len(),
                dim
            )));
        }
        let n = inputs.len() / dim;
        if let Some(ref l) = labels {
            if l.len() != n {
                return Err(FipError::InvalidConfig(format!(
                    "{} labels for {} inputs",
                    l.len(),
                    n
                )));
            }
        }
        if !linalg::all_finite(&inputs) {
            return Err(FipError::NonFinite {
                what: "batch inputs".into(),
            });
        }
        Ok(Batch {
            inputs,
            n,
            dim,
            labels,
            task_id,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Option<Vec<usize>>, task_id: usize) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(FipError::InvalidConfig("ragged input rows".into()));
        }
        let mut flat = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            flat.extend_from_slice(r);
        }
        Batch::new(flat, dim, labels, task_id)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn task_id(&self) -> usize {
        self.task_id
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn inputs_flat(&self) -> &[f64] {
        &self.inputs
    }

    /// Same rows under a different task id (for head-remapped evaluation).
    pub fn retagged(&self, task_id: usize) -> Batch {
        let mut b = self.clone();
        b.task_id = task_id;
        b
    }

    /// Replaces the input matrix, keeping labels and task id. Used to wrap
    /// adversarially perturbed copies of a batch.
    pub fn with_inputs(&self, inputs: Vec<f64>) -> Result<Batch> {
        Batch::new(inputs, self.dim, self.labels.clone(), self.task_id)
    }

    /// Checks input dim and (when labels are present) that every label fits
    /// inside the head registered for this batch's task.
    pub fn validate_for(&self, spec: &NetworkSpec) -> Result<()> {
        if self.dim != spec.input_dim() {
            return Err(FipError::DimensionMismatch {
                layer: 0,
                expected: spec.input_dim(),
                got: self.dim,
            });
        }
        if let Some(labels) = &self.labels {
            let head = spec.head(self.task_id)?;
            for &l in labels {
                if l >= head.len() {
                    return Err(FipError::LabelOutOfRange {
                        label: l,
                        head_len: head.len(),
                        task_id: self.task_id,
                    });
                }
            }
        }
        Ok(())
    }

    /// Deterministic subsample of `size` rows without replacement (all rows
    /// when `size >= len`). Selected rows keep their original order.
    pub fn subsample(&self, size: usize, seed: u64) -> Batch {
        if size >= self.n {
            return self.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx: Vec<usize> = (0..self.n).collect();
        for i in 0..size {
            let j = rng.gen_range(i..self.n);
            idx.swap(i, j);
        }
        let mut chosen = idx[..size].to_vec();
        chosen.sort_unstable();
        let mut inputs = Vec::with_capacity(size * self.dim);
        let mut labels = self.labels.as_ref().map(|_| Vec::with_capacity(size));
        for &i in &chosen {
            inputs.extend_from_slice(self.input(i));
            if let (Some(out), Some(src)) = (labels.as_mut(), self.labels.as_ref()) {
                out.push(src[i]);
            }
        }
        Batch {
            inputs,
            n: size,
            dim: self.dim,
            labels,
            task_id: self.task_id,
        }
    }

    /// Rows at the given indices, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Batch {
        let mut inputs = Vec::with_capacity(idx.len() * self.dim);
        let mut labels = self.labels.as_ref().map(|_| Vec::with_capacity(idx.len()));
        for &i in idx {
            inputs.extend_from_slice(self.input(i));
            if let (Some(out), Some(src)) = (labels.as_mut(), self.labels.as_ref()) {
                out.push(src[i]);
            }
        }
        Batch {
            inputs,
            n: idx.len(),
            dim: self.dim,
            labels,
            task_id: self.task_id,
        }
    }

    /// Concatenates the inputs of several batches into one unlabeled batch
    /// (for metric anchoring across tasks). All batches must share a dim.
    pub fn concat_inputs(batches: &[&Batch]) -> Result<Batch> {
        let first = batches.first().ok_or(FipError::EmptyBatch)?;
        let dim = first.dim;
        let mut inputs = Vec::new();
        for b in batches {
            if b.dim != dim {
                return Err(FipError::DimensionMismatch {
                    layer: 0,
                    expected: dim,
                    got: b.dim,
                });
            }
            inputs.extend_from_slice(&b.inputs);
        }
        Batch::new(inputs, dim, None, 0)
    }

    /// Stable content hash (inputs, labels, task id) for provenance logs.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv64::new();
        h.update(b"batch-v1");
        h.update_u64(self.n as u64);
        h.update_u64(self.dim as u64);
        h.update_u64(self.task_id as u64);
        for &x in &self.inputs {
            h.update_f64(x);
        }
        if let Some(labels) = &self.labels {
            for &l in labels {
                h.update_u64(l as u64);
            }
        }
        h.finish()
    }
}
