//! Shared fixtures for the benchmark targets.

use fip_core::net::{Batch, NetworkSpec, WeightVector};
use fip_core::Activation;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A randomly initialized dense net plus an unlabeled probe batch.
pub struct Fixture {
    pub spec: NetworkSpec,
    pub w: WeightVector,
    pub batch: Batch,
    pub dw: Vec<f64>,
}

pub fn fixture(dims: Vec<usize>, batch_size: usize, seed: u64) -> Fixture {
    let spec = NetworkSpec::mlp(dims, Activation::Tanh).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals: Vec<f64> = (0..spec.param_count())
        .map(|_| rng.gen_range(-0.8..0.8))
        .collect();
    let w = WeightVector::new(&spec, vals).unwrap();
    let rows: Vec<Vec<f64>> = (0..batch_size)
        .map(|_| {
            (0..spec.input_dim())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect()
        })
        .collect();
    let batch = Batch::from_rows(&rows, None, 0).unwrap();
    let dw: Vec<f64> = (0..spec.param_count())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    Fixture { spec, w, batch, dw }
}
