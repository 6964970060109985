//! Derivatives: loss gradients, output Jacobians, and matrix-free
//! Jacobian-vector / vector-Jacobian products.

use crate::error::{FipError, Result};
use crate::net::forward::{forward_buffers, softmax};
use crate::net::{Batch, NetworkSpec, OutputVector, WeightVector};

/// Default cap on `m * n` entries for materializing a dense Jacobian.
pub const DEFAULT_JACOBIAN_CAP: usize = 10_000_000;

/// Training losses. Cross-entropy applies softmax restricted to the batch's
/// head range; mean squared error compares head outputs to a one-hot target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    CrossEntropyOverHead,
    MeanSquaredError,
}

/// Reverse sweep shared by every gradient path. Seeds the output adjoint
/// `dy`, optionally accumulates parameter gradients into `grad`, and returns
/// the adjoint of the input.
pub(crate) fn backward(
    spec: &NetworkSpec,
    weights: &[f64],
    x: &[f64],
    pre: &[Vec<f64>],
    post: &[Vec<f64>],
    dy: &[f64],
    mut grad: Option<&mut [f64]>,
) -> Vec<f64> {
    let layouts = spec.layer_layouts();
    let mut g = dy.to_vec();
    for lay in layouts.iter().rev() {
        let act = spec.activations()[lay.layer];
        let a_prev: &[f64] = if lay.layer == 0 {
            x
        } else {
            &post[lay.layer - 1]
        };
        let gz: Vec<f64> = g
            .iter()
            .zip(&pre[lay.layer])
            .map(|(&go, &z)| go * act.deriv(z))
            .collect();
        if let Some(grad) = grad.as_deref_mut() {
            for (o, &gzo) in gz.iter().enumerate() {
                grad[lay.bias_offset + o] += gzo;
                let row = lay.weight_offset + o * lay.in_dim;
                for (i, &ai) in a_prev.iter().enumerate() {
                    grad[row + i] += gzo * ai;
                }
            }
        }
        let mut g_prev = vec![0.0; lay.in_dim];
        for (o, &gzo) in gz.iter().enumerate() {
            let row = lay.weight_offset + o * lay.in_dim;
            for (i, gp) in g_prev.iter_mut().enumerate() {
                *gp += weights[row + i] * gzo;
            }
        }
        g = g_prev;
    }
    g
}

/// One-hot loss adjoint for a single example: returns (loss value, dL/dy)
/// where dy is dense over all m outputs (zero outside the head).
fn loss_adjoint(
    head_start: usize,
    head_len: usize,
    m: usize,
    y: &[f64],
    label: usize,
    loss: LossKind,
) -> (f64, Vec<f64>) {
    let logits = &y[head_start..head_start + head_len];
    let mut dy = vec![0.0; m];
    match loss {
        LossKind::CrossEntropyOverHead => {
            let s = softmax(logits);
            let l = -s[label].max(f64::MIN_POSITIVE).ln();
            for (c, &sc) in s.iter().enumerate() {
                let t = if c == label { 1.0 } else { 0.0 };
                dy[head_start + c] = sc - t;
            }
            (l, dy)
        }
        LossKind::MeanSquaredError => {
            let mut l = 0.0;
            for (c, &v) in logits.iter().enumerate() {
                let t = if c == label { 1.0 } else { 0.0 };
                let d = v - t;
                l += d * d;
                dy[head_start + c] = 2.0 * d;
            }
            (l, dy)
        }
    }
}

/// Mean loss over the batch and its gradient with respect to every weight.
///
/// The gradient has length `n` and averages per-example gradients in batch
/// order, so results are run-to-run deterministic.
pub fn loss_and_grad(
    spec: &NetworkSpec,
    w: &WeightVector,
    batch: &Batch,
    loss: LossKind,
) -> Result<(f64, Vec<f64>)> {
    w.check(spec)?;
    batch.validate_for(spec)?;
    let labels = batch.labels().ok_or(FipError::MissingLabels)?;
    if batch.is_empty() {
        return Err(FipError::EmptyBatch);
    }
    let head = spec.head(batch.task_id())?;
    let m = spec.output_dim();
    let n = spec.param_count();
    let inv_n = 1.0 / batch.len() as f64;
    let mut total_loss = 0.0;
    let mut grad = vec![0.0; n];
    for (i, &label) in labels.iter().enumerate() {
        let x = batch.input(i);
        let (pre, post) = forward_buffers(spec, w, x)?;
        let y = post.last().unwrap();
        let (l, mut dy) = loss_adjoint(head.start, head.len(), m, y, label, loss);
        total_loss += l * inv_n;
        for d in dy.iter_mut() {
            *d *= inv_n;
        }
        backward(spec, w.values(), x, &pre, &post, &dy, Some(&mut grad));
    }
    Ok((total_loss, grad))
}

/// Gradient of the per-example cross-entropy (over the batch's head) with
/// respect to the *input*. Used by attack generation and coherence scoring.
pub fn input_gradient(
    spec: &NetworkSpec,
    w: &WeightVector,
    x: &[f64],
    label: usize,
    task_id: usize,
) -> Result<Vec<f64>> {
    w.check(spec)?;
    let head = spec.head(task_id)?;
    if label >= head.len() {
        return Err(FipError::LabelOutOfRange {
            label,
            head_len: head.len(),
            task_id,
        });
    }
    let (pre, post) = forward_buffers(spec, w, x)?;
    let y = post.last().unwrap();
    let (_, dy) = loss_adjoint(
        head.start,
        head.len(),
        spec.output_dim(),
        y,
        label,
        LossKind::CrossEntropyOverHead,
    );
    Ok(backward(spec, w.values(), x, &pre, &post, &dy, None))
}

/// Dense output Jacobian: row `i` is `d f_i / d w`. Guarded by an entry cap;
/// use [`jvp`]/[`vjp`] above it.
pub fn output_jacobian(spec: &NetworkSpec, w: &WeightVector, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    output_jacobian_capped(spec, w, x, DEFAULT_JACOBIAN_CAP)
}

pub fn output_jacobian_capped(
    spec: &NetworkSpec,
    w: &WeightVector,
    x: &[f64],
    cap: usize,
) -> Result<Vec<Vec<f64>>> {
    let m = spec.output_dim();
    let n = spec.param_count();
    if m.saturating_mul(n) > cap {
        return Err(FipError::CapExceeded {
            what: "dense output Jacobian",
            needed: m * n,
            cap,
        });
    }
    w.check(spec)?;
    let (pre, post) = forward_buffers(spec, w, x)?;
    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let mut dy = vec![0.0; m];
        dy[i] = 1.0;
        let mut row = vec![0.0; n];
        backward(spec, w.values(), x, &pre, &post, &dy, Some(&mut row));
        rows.push(row);
    }
    Ok(rows)
}

/// Tangent sweep against cached forward buffers; identical arithmetic to
/// [`jvp`] but skips the forward recomputation. `pre`/`post` must come from
/// `forward_buffers` at the same `(spec, weights, x)`.
pub(crate) fn tangent_from_buffers(
    spec: &NetworkSpec,
    weights: &[f64],
    x: &[f64],
    pre: &[Vec<f64>],
    post: &[Vec<f64>],
    dw: &[f64],
) -> Vec<f64> {
    let mut da = vec![0.0; x.len()];
    for lay in spec.layer_layouts() {
        let act = spec.activations()[lay.layer];
        let a_prev: &[f64] = if lay.layer == 0 {
            x
        } else {
            &post[lay.layer - 1]
        };
        let mut da_next = vec![0.0; lay.out_dim];
        for (o, slot) in da_next.iter_mut().enumerate() {
            let row = lay.weight_offset + o * lay.in_dim;
            let mut dz = dw[lay.bias_offset + o];
            for i in 0..lay.in_dim {
                dz += dw[row + i] * a_prev[i] + weights[row + i] * da[i];
            }
            *slot = act.deriv(pre[lay.layer][o]) * dz;
        }
        da = da_next;
    }
    da
}

/// Jacobian-vector product `J(x) * dw` via one tangent-mode sweep; exact and
/// never materializes `J`.
pub fn jvp(spec: &NetworkSpec, w: &WeightVector, x: &[f64], dw: &[f64]) -> Result<OutputVector> {
    w.check(spec)?;
    if dw.len() != spec.param_count() {
        return Err(FipError::WeightLength {
            expected: spec.param_count(),
            got: dw.len(),
        });
    }
    if x.len() != spec.input_dim() {
        return Err(FipError::DimensionMismatch {
            layer: 0,
            expected: spec.input_dim(),
            got: x.len(),
        });
    }
    let weights = w.values();
    let mut a = x.to_vec();
    let mut da = vec![0.0; x.len()];
    for lay in spec.layer_layouts() {
        let act = spec.activations()[lay.layer];
        let mut a_next = vec![0.0; lay.out_dim];
        let mut da_next = vec![0.0; lay.out_dim];
        for o in 0..lay.out_dim {
            let row = lay.weight_offset + o * lay.in_dim;
            let mut z = weights[lay.bias_offset + o];
            let mut dz = dw[lay.bias_offset + o];
            for i in 0..lay.in_dim {
                z += weights[row + i] * a[i];
                dz += dw[row + i] * a[i] + weights[row + i] * da[i];
            }
            a_next[o] = act.apply(z);
            da_next[o] = act.deriv(z) * dz;
        }
        a = a_next;
        da = da_next;
    }
    Ok(OutputVector::new(da))
}

/// Vector-Jacobian product `J(x)ᵀ * v` via one reverse sweep.
pub fn vjp(spec: &NetworkSpec, w: &WeightVector, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    w.check(spec)?;
    if v.len() != spec.output_dim() {
        return Err(FipError::DimensionMismatch {
            layer: spec.n_layers() - 1,
            expected: spec.output_dim(),
            got: v.len(),
        });
    }
    let (pre, post) = forward_buffers(spec, w, x)?;
    let mut grad = vec![0.0; spec.param_count()];
    backward(spec, w.values(), x, &pre, &post, v, Some(&mut grad));
    Ok(grad)
}
