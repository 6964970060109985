//! Forward evaluation.

use crate::error::{FipError, Result};
use crate::net::{Batch, NetworkSpec, OutputVector, WeightVector};

/// Per-layer (pre-activation, post-activation) buffers of one forward pass.
pub(crate) type LayerBuffers = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// One forward pass; returns the raw (pre-softmax) outputs of the last layer.
pub fn forward(spec: &NetworkSpec, w: &WeightVector, x: &[f64]) -> Result<OutputVector> {
    w.check(spec)?;
    if x.len() != spec.input_dim() {
        return Err(FipError::DimensionMismatch {
            layer: 0,
            expected: spec.input_dim(),
            got: x.len(),
        });
    }
    let mut a = x.to_vec();
    let weights = w.values();
    for lay in spec.layer_layouts() {
        let act = spec.activations()[lay.layer];
        let mut next = vec![0.0; lay.out_dim];
        for (o, out) in next.iter_mut().enumerate() {
            let row = lay.weight_offset + o * lay.in_dim;
            let mut z = weights[lay.bias_offset + o];
            for (i, &ai) in a.iter().enumerate() {
                z += weights[row + i] * ai;
            }
            *out = act.apply(z);
        }
        a = next;
    }
    Ok(OutputVector::new(a))
}

/// Forward pass keeping every intermediate: returns (per-layer
/// pre-activations, per-layer post-activations). `post[l]` has length
/// `layer_dims[l + 1]`; the last entry is the raw network output.
pub(crate) fn forward_buffers(
    spec: &NetworkSpec,
    w: &WeightVector,
    x: &[f64],
) -> Result<LayerBuffers> {
    w.check(spec)?;
    if x.len() != spec.input_dim() {
        return Err(FipError::DimensionMismatch {
            layer: 0,
            expected: spec.input_dim(),
            got: x.len(),
        });
    }
    let weights = w.values();
    let mut pre = Vec::with_capacity(spec.n_layers());
    let mut post = Vec::with_capacity(spec.n_layers());
    let mut a = x.to_vec();
    for lay in spec.layer_layouts() {
        let act = spec.activations()[lay.layer];
        let mut z = vec![0.0; lay.out_dim];
        for (o, zo) in z.iter_mut().enumerate() {
            let row = lay.weight_offset + o * lay.in_dim;
            let mut s = weights[lay.bias_offset + o];
            for (i, &ai) in a.iter().enumerate() {
                s += weights[row + i] * ai;
            }
            *zo = s;
        }
        let acts: Vec<f64> = z.iter().map(|&v| act.apply(v)).collect();
        pre.push(z);
        a = acts.clone();
        post.push(acts);
    }
    Ok((pre, post))
}

/// Post-activation vectors of every layer (hidden layers and output), in
/// order. Used by representation diagnostics.
pub fn forward_trace(spec: &NetworkSpec, w: &WeightVector, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    let (_, post) = forward_buffers(spec, w, x)?;
    Ok(post)
}

/// Numerically stable softmax of a slice.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// Fraction of the batch classified correctly by argmax over the batch's
/// task head. Ties resolve to the lowest class index.
pub fn accuracy(spec: &NetworkSpec, w: &WeightVector, batch: &Batch) -> Result<f64> {
    batch.validate_for(spec)?;
    let labels = batch.labels().ok_or(FipError::MissingLabels)?;
    let head = spec.head(batch.task_id())?;
    let mut correct = 0usize;
    for (i, &label) in labels.iter().enumerate() {
        let y = forward(spec, w, batch.input(i))?;
        let logits = &y.values()[head.start..head.end];
        let mut best = 0usize;
        for (c, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = c;
            }
        }
        if best == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / batch.len() as f64)
}
