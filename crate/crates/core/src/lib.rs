//! Functionally invariant paths (FIPs) in neural-network weight space.
//!
//! The weight space of a network `f(x; w)` is treated as a Riemannian manifold
//! whose metric measures, for a perturbation `dw`, how far the network's
//! outputs move on a reference dataset. Directions that are nearly null for
//! the metric change the input-output map very little, so chaining small
//! steps along them produces long-range weight-space paths whose members all
//! behave like the original network. Biasing each step with the gradient of a
//! secondary objective turns the same machinery into a tool for continual
//! learning (learn a new head without forgetting), magnitude sparsification
//! (anneal toward a p-sparse projection), and robust ensembling (sample
//! diverse iso-performing networks along a path).
//!
//! Module map:
//!
//! - [`net`]: minimal dense feedforward engine over a flat `f64` weight
//!   vector — forward evaluation, losses, Jacobians, matrix-free `jvp`/`vjp`,
//!   and output-head surgery.
//! - [`metric`]: the weight-space metric `g_w(X) = mean JᵀJ`, evaluated
//!   matrix-free or densely, plus its spectrum.
//! - [`path`]: the per-step constrained direction solver and path chaining.
//! - [`objective`]: secondary objectives (task loss, sparsification distance)
//!   and the p-sparse projection itself.
//! - [`ensemble`]: path ensembles, PGD attacks, softmax-sum inference, and
//!   coherence/diversity diagnostics.
//! - [`data`], [`idx`], [`checkpoint`], [`runlog`], [`train`],
//!   [`experiments`]: datasets, persistence, and the experiment drivers
//!   behind the CLI.

// validators use negated comparisons (`!(x > 0.0)`) so NaN fails them too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod idx;
mod linalg;
pub mod metric;
pub mod net;
pub mod objective;
pub mod path;
pub mod runlog;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointHeader};
pub use data::gen_blobs;
pub use ensemble::{
    coherence_score, diversity_score, ensemble_predict, pgd_attack, sample_ensemble_along_path,
    AttackConfig, Ensemble, EnsembleSource,
};
pub use error::{FipError, Result};
pub use experiments::{
    emit_plotdata, run_compose, run_continual, run_ensemble, run_experiment, run_sparsify,
    run_spectrum, DatasetSpec, ExperimentConfig, ExperimentKind,
};
pub use idx::load_idx;
pub use metric::{
    fd_output_distance, metric_matrix, metric_spectrum, output_distance_sq, MetricEvaluation,
    OutputMode, SpectrumReport,
};
pub use net::{
    accuracy, append_output_nodes, forward, jvp, loss_and_grad, output_jacobian, vjp, Activation,
    Batch, HeadRange, LossKind, NetworkSpec, OutputVector, WeightVector,
};
pub use objective::{hard_sparsify, objective_grad, p_sparse_projection, ObjectiveSpec, SparsifyRef};
pub use path::{
    fip_direction, fip_step, geodesic_step, sample_path, sample_path_with, DirectionDiagnostics,
    FipPath, PathConfig, PathProvenance, PathStep,
};
pub use runlog::{RunLog, RunRecord};
pub use train::{init_weights, train_base, TrainSettings};
