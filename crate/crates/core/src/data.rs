//! Synthetic Gaussian-blob classification tasks.

use crate::error::{FipError, Result};
use crate::net::Batch;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const CENTER_ATTEMPTS: usize = 1000;

/// Draws `n_classes` cluster centers with mutual distance >= `separation`.
/// Deterministic under `seed`; fails when the packing cannot be placed.
pub fn gen_blob_centers(
    n_classes: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if n_classes < 2 {
        return Err(FipError::InvalidConfig("need at least 2 classes".into()));
    }
    if dim == 0 {
        return Err(FipError::InvalidConfig("dim must be >= 1".into()));
    }
    if !separation.is_finite() || !(separation > 0.0) {
        return Err(FipError::InvalidConfig(
            "separation must be finite and > 0".into(),
        ));
    }
    // Box wide enough that the packing is feasible with room to spare.
    let half_width = separation * (n_classes as f64).powf(1.0 / dim as f64);
    place_centers(n_classes, dim, separation, seed, half_width, CENTER_ATTEMPTS)
}

/// Rejection sampling inside `[-half_width, half_width]^dim`; errors when a
/// center cannot be placed within the attempt budget.
fn place_centers(
    n_classes: usize,
    dim: usize,
    separation: f64,
    seed: u64,
    half_width: f64,
    attempts: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(n_classes);
    for _ in 0..n_classes {
        let mut placed = false;
        for _ in 0..attempts {
            let cand: Vec<f64> = (0..dim)
                .map(|_| rng.gen_range(-half_width..half_width))
                .collect();
            let ok = centers.iter().all(|c| {
                let d2: f64 = c
                    .iter()
                    .zip(&cand)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                d2.sqrt() >= separation
            });
            if ok {
                centers.push(cand);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(FipError::InfeasiblePacking {
                n_classes,
                dim,
                separation,
            });
        }
    }
    Ok(centers)
}

/// Unit-variance Gaussian clusters around fixed centers, `n_per_class` rows
/// per class in class-major order. Labels are the class indices.
pub fn gen_blobs_from_centers(centers: &[Vec<f64>], n_per_class: usize, seed: u64) -> Result<Batch> {
    if centers.is_empty() || n_per_class == 0 {
        return Err(FipError::InvalidConfig(
            "need at least one center and one row per class".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(centers.len() * n_per_class);
    let mut labels = Vec::with_capacity(centers.len() * n_per_class);
    for (class, center) in centers.iter().enumerate() {
        for _ in 0..n_per_class {
            let row: Vec<f64> = center
                .iter()
                .map(|&c| c + rng.sample::<f64, _>(StandardNormal))
                .collect();
            rows.push(row);
            labels.push(class);
        }
    }
    Batch::from_rows(&rows, Some(labels), 0)
}

/// Gaussian clusters with unit variance and centers at mutual distance at
/// least `separation`; deterministic under `seed`.
pub fn gen_blobs(
    n_classes: usize,
    n_per_class: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<Batch> {
    let centers = gen_blob_centers(n_classes, dim, separation, seed)?;
    gen_blobs_from_centers(&centers, n_per_class, seed.wrapping_add(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{accuracy, loss_and_grad, Activation, LossKind, NetworkSpec, WeightVector};

    #[test]
    fn same_seed_gives_bit_identical_data() {
        let a = gen_blobs(3, 10, 2, 4.0, 9).unwrap();
        let b = gen_blobs(3, 10, 2, 4.0, 9).unwrap();
        assert_eq!(a, b);
        let c = gen_blobs(3, 10, 2, 4.0, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn class_counts_are_exact() {
        let b = gen_blobs(4, 7, 3, 3.0, 2).unwrap();
        assert_eq!(b.len(), 28);
        let labels = b.labels().unwrap();
        for class in 0..4 {
            assert_eq!(labels.iter().filter(|&&l| l == class).count(), 7);
        }
    }

    #[test]
    fn well_separated_blobs_are_linearly_separable() {
        // separation 10 in 2d: a linear classifier fit by gradient descent
        // reaches 100% train accuracy.
        let batch = gen_blobs(2, 30, 2, 10.0, 5).unwrap();
        let spec = NetworkSpec::mlp(vec![2, 2], Activation::Identity).unwrap();
        let mut w = WeightVector::zeros(&spec);
        for _ in 0..200 {
            let (_, g) = loss_and_grad(&spec, &w, &batch, LossKind::CrossEntropyOverHead).unwrap();
            let vals: Vec<f64> = w
                .values()
                .iter()
                .zip(&g)
                .map(|(wi, gi)| wi - 0.5 * gi)
                .collect();
            w = WeightVector::new(&spec, vals).unwrap();
        }
        assert_eq!(accuracy(&spec, &w, &batch).unwrap(), 1.0);
    }

    #[test]
    fn infeasible_packing_is_detected() {
        // Two centers at separation 1 cannot coexist in a box of width 0.5.
        assert!(matches!(
            place_centers(2, 2, 1.0, 0, 0.25, 100),
            Err(FipError::InfeasiblePacking {
                n_classes: 2,
                dim: 2,
                ..
            })
        ));
        assert!(matches!(
            gen_blob_centers(2, 2, f64::INFINITY, 0),
            Err(FipError::InvalidConfig(_))
        ));
    }

    #[test]
    fn centers_respect_separation() {
        let centers = gen_blob_centers(5, 2, 3.0, 77).unwrap();
        for i in 0..5 {
            for j in (i + 1)..5 {
                let d2: f64 = centers[i]
                    .iter()
                    .zip(&centers[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                assert!(d2.sqrt() >= 3.0);
            }
        }
    }
}
