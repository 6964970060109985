//! Base-task training: seeded minibatch gradient descent with momentum.

use crate::error::{FipError, Result};
use crate::linalg;
use crate::net::{accuracy, loss_and_grad, Activation, Batch, LossKind, NetworkSpec, WeightVector};
use crate::runlog::{values_of, RunLog};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Hyperparameters for [`train_base`]. Everything is seeded, so identical
/// settings reproduce bit-identical weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub loss: LossKind,
}

impl TrainSettings {
    pub fn new(lr: f64, epochs: usize, batch_size: usize, seed: u64) -> Self {
        TrainSettings {
            lr,
            momentum: 0.9,
            epochs,
            batch_size,
            seed,
            loss: LossKind::CrossEntropyOverHead,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lr.is_finite() || self.lr < 0.0 {
            return Err(FipError::InvalidConfig("lr must be finite and >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(FipError::InvalidConfig("momentum must be in [0, 1)".into()));
        }
        if self.batch_size == 0 {
            return Err(FipError::InvalidConfig("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Xavier-uniform initialization per layer (biases start at zero), seeded.
pub fn init_weights(spec: &NetworkSpec, seed: u64) -> WeightVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; spec.param_count()];
    for lay in spec.layer_layouts() {
        let act = spec.activations()[lay.layer];
        let limit = match act {
            Activation::Relu => (6.0 / lay.in_dim as f64).sqrt(),
            _ => (6.0 / (lay.in_dim + lay.out_dim) as f64).sqrt(),
        };
        for k in 0..lay.out_dim * lay.in_dim {
            values[lay.weight_offset + k] = rng.gen_range(-limit..limit);
        }
    }
    WeightVector::new(spec, values).expect("finite init")
}

/// Minibatch gradient descent with momentum from explicit starting weights.
/// Logs one `epoch` record per epoch; fails with the last finite weights if
/// the loss diverges.
pub fn train_from(
    spec: &NetworkSpec,
    w0: &WeightVector,
    data: &Batch,
    settings: &TrainSettings,
    log: &mut RunLog,
    phase: &str,
) -> Result<WeightVector> {
    settings.validate()?;
    w0.check(spec)?;
    data.validate_for(spec)?;
    if data.labels().is_none() {
        return Err(FipError::MissingLabels);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut w = w0.clone();
    let mut velocity = vec![0.0; w.len()];
    let n = data.len();
    for epoch in 0..settings.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        let mut n_batches = 0usize;
        for chunk in order.chunks(settings.batch_size) {
            let mini = data.select_rows(chunk);
            let (loss, grad) = loss_and_grad(spec, &w, &mini, settings.loss)?;
            if !loss.is_finite() || !linalg::all_finite(&grad) {
                return Err(FipError::Diverged {
                    epoch,
                    last_finite: Box::new(w),
                });
            }
            for (v, g) in velocity.iter_mut().zip(&grad) {
                *v = settings.momentum * *v - settings.lr * g;
            }
            let mut values = w.values().to_vec();
            linalg::axpy(1.0, &velocity, &mut values);
            if !linalg::all_finite(&values) {
                return Err(FipError::Diverged {
                    epoch,
                    last_finite: Box::new(w),
                });
            }
            w = w.with_values(values);
            epoch_loss += loss;
            n_batches += 1;
        }
        let train_acc = accuracy(spec, &w, data)?;
        log.append(
            phase,
            epoch as u64,
            "epoch",
            values_of(&[
                ("loss", epoch_loss / n_batches.max(1) as f64),
                ("train_acc", train_acc),
            ]),
        )?;
    }
    Ok(w)
}

/// Trains from Xavier-initialized weights (seeded by `settings.seed`).
pub fn train_base(
    spec: &NetworkSpec,
    data: &Batch,
    settings: &TrainSettings,
    log: &mut RunLog,
    phase: &str,
) -> Result<WeightVector> {
    let w0 = init_weights(spec, settings.seed);
    train_from(spec, &w0, data, settings, log, phase)
}
