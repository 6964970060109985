//! Output-head surgery for continual learning.

use crate::error::{FipError, Result};
use crate::net::{HeadRange, NetworkSpec, WeightVector};
use rand::distributions::{Distribution, Uniform};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Appends `count` output units for a new task.
///
/// The last layer grows by `count` rows; the new weights and biases are drawn
/// from a zero-mean uniform of half-width `init_scale` (seeded, so surgery is
/// reproducible). Every pre-existing parameter keeps its value, so outputs on
/// previously registered heads are bit-identical for all inputs.
pub fn append_output_nodes(
    spec: &NetworkSpec,
    w: &WeightVector,
    new_task_id: usize,
    count: usize,
    init_scale: f64,
    seed: u64,
) -> Result<(NetworkSpec, WeightVector)> {
    w.check(spec)?;
    if count == 0 {
        return Err(FipError::InvalidConfig(
            "append_output_nodes requires count >= 1".into(),
        ));
    }
    if !init_scale.is_finite() || init_scale < 0.0 {
        return Err(FipError::InvalidConfig(
            "init_scale must be finite and >= 0".into(),
        ));
    }
    if spec.head_ranges().iter().any(|h| h.task_id == new_task_id) {
        return Err(FipError::DuplicateTask {
            task_id: new_task_id,
        });
    }

    let old_m = spec.output_dim();
    let mut dims = spec.layer_dims().to_vec();
    *dims.last_mut().unwrap() = old_m + count;
    let mut heads = spec.head_ranges().to_vec();
    heads.push(HeadRange {
        task_id: new_task_id,
        start: old_m,
        end: old_m + count,
    });
    let new_spec = NetworkSpec::new(dims, spec.activations().to_vec(), heads)?;

    let last = *spec.layer_layouts().last().unwrap();
    let hidden = last.in_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new_inclusive(-init_scale, init_scale);

    // Layout: [earlier layers | W_last rows | b_last]. New rows slot in after
    // the old weight block and new biases after the old bias block.
    let old = w.values();
    let mut values = Vec::with_capacity(new_spec.param_count());
    values.extend_from_slice(&old[..last.bias_offset]);
    for _ in 0..count * hidden {
        values.push(dist.sample(&mut rng));
    }
    values.extend_from_slice(&old[last.bias_offset..]);
    for _ in 0..count {
        values.push(dist.sample(&mut rng));
    }

    let new_w = WeightVector::new(&new_spec, values)?;
    Ok((new_spec, new_w))
}
