//! Secondary objectives that bias path directions, and the p-sparse
//! projection used for magnitude sparsification.

use crate::error::{FipError, Result};
use crate::linalg;
use crate::net::{loss_and_grad, Batch, LossKind, NetworkSpec, WeightVector};

/// Reference point for the sparsification distance `||w - P_p(w_ref)||^2`.
///
/// `Current` reprojects at every evaluation (a moving target that anneals
/// the weights toward sparsity); `Fixed` keeps the projection anchored at a
/// snapshot.
#[derive(Debug, Clone, PartialEq)]
pub enum SparsifyRef {
    Current,
    Fixed(WeightVector),
}

/// The pluggable secondary loss `L(x, w)` of a path step.
#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveSpec {
    /// `L = 0`: pure isofunctional exploration.
    Null,
    /// Cross-entropy of a new task over its own head.
    TaskLoss { batch: Batch },
    /// Squared distance to the p-sparse projection of a reference point.
    Sparsify {
        p: f64,
        ref_point: SparsifyRef,
        /// When false, biases are never zeroed and do not count toward `p`.
        include_biases: bool,
    },
}

impl ObjectiveSpec {
    pub fn sparsify(p: f64) -> Self {
        ObjectiveSpec::Sparsify {
            p,
            ref_point: SparsifyRef::Current,
            include_biases: true,
        }
    }

    fn validate(&self, spec: &NetworkSpec) -> Result<()> {
        match self {
            ObjectiveSpec::Null => Ok(()),
            ObjectiveSpec::TaskLoss { batch } => {
                if batch.labels().is_none() {
                    return Err(FipError::MissingLabels);
                }
                batch.validate_for(spec)
            }
            ObjectiveSpec::Sparsify { p, ref_point, .. } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(FipError::InvalidConfig(format!(
                        "sparsity fraction must be in [0, 1], got {p}"
                    )));
                }
                if let SparsifyRef::Fixed(w_ref) = ref_point {
                    w_ref.check(spec)?;
                }
                Ok(())
            }
        }
    }
}

/// Evaluates the secondary loss and its weight gradient at `w`.
///
/// Returns `(0, None)` for the null objective, so callers can treat "no
/// gradient" and "L = 0" identically.
pub fn objective_grad(
    obj: &ObjectiveSpec,
    spec: &NetworkSpec,
    w: &WeightVector,
) -> Result<(f64, Option<Vec<f64>>)> {
    obj.validate(spec)?;
    w.check(spec)?;
    match obj {
        ObjectiveSpec::Null => Ok((0.0, None)),
        ObjectiveSpec::TaskLoss { batch } => {
            let (l, g) = loss_and_grad(spec, w, batch, LossKind::CrossEntropyOverHead)?;
            Ok((l, Some(g)))
        }
        ObjectiveSpec::Sparsify {
            p,
            ref_point,
            include_biases,
        } => {
            let reference = match ref_point {
                SparsifyRef::Current => w,
                SparsifyRef::Fixed(anchor) => anchor,
            };
            let mask = (!include_biases).then(|| spec.bias_mask());
            let projected = project_masked(reference.values(), *p, mask.as_deref());
            let diff = linalg::sub(w.values(), &projected);
            let l = linalg::norm_sq(&diff);
            let grad: Vec<f64> = diff.iter().map(|d| 2.0 * d).collect();
            Ok((l, Some(grad)))
        }
    }
}

/// Zeroes the `floor(p * n_eligible)` smallest-magnitude eligible entries.
/// `bias_mask[i] == true` marks entries excluded from zeroing (and from the
/// eligible count); `None` makes every entry eligible.
fn project_masked(values: &[f64], p: f64, bias_mask: Option<&[bool]>) -> Vec<f64> {
    let eligible: Vec<usize> = match bias_mask {
        None => (0..values.len()).collect(),
        Some(mask) => (0..values.len()).filter(|&i| !mask[i]).collect(),
    };
    let k = ((p * eligible.len() as f64).floor() as usize).min(eligible.len());
    let mut order = eligible;
    // smallest magnitude first; ties zero the lower flat index first
    order.sort_by(|&a, &b| {
        values[a]
            .abs()
            .partial_cmp(&values[b].abs())
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut out = values.to_vec();
    for &i in &order[..k] {
        out[i] = 0.0;
    }
    out
}

/// The Euclidean-closest vector with `floor(p * n)` entries set to zero:
/// magnitude top-k retention over the whole flat vector.
pub fn p_sparse_projection(w: &WeightVector, p: f64) -> Result<WeightVector> {
    if !(0.0..=1.0).contains(&p) {
        return Err(FipError::InvalidConfig(format!(
            "sparsity fraction must be in [0, 1], got {p}"
        )));
    }
    Ok(w.with_values(project_masked(w.values(), p, None)))
}

/// Applies the projection and reports the exact fraction of zero entries
/// (which can exceed `floor(p n)/n` if `w` already contained zeros).
pub fn hard_sparsify(
    spec: &NetworkSpec,
    w: &WeightVector,
    p: f64,
) -> Result<(WeightVector, f64)> {
    w.check(spec)?;
    let projected = p_sparse_projection(w, p)?;
    let zeros = projected.values().iter().filter(|&&v| v == 0.0).count();
    let achieved = zeros as f64 / projected.len() as f64;
    Ok((projected, achieved))
}
