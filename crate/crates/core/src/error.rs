//! Crate-wide error type.

use crate::path::FipPath;
use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, FipError>;

/// Structured errors for every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum FipError {
    #[error("layer {layer}: expected input of length {expected}, got {got}")]
    DimensionMismatch {
        layer: usize,
        expected: usize,
        got: usize,
    },

    #[error("weight vector has {got} entries, spec requires {expected}")]
    WeightLength { expected: usize, got: usize },

    #[error("weight vector does not match this network spec (stale binding)")]
    SpecMismatch,

    #[error("non-finite value encountered in {what}")]
    NonFinite { what: String },

    #[error("batch has no labels but the operation requires them")]
    MissingLabels,

    #[error("label {label} outside head of length {head_len} for task {task_id}")]
    LabelOutOfRange {
        label: usize,
        head_len: usize,
        task_id: usize,
    },

    #[error("{what}: {needed} entries exceed configured cap {cap}; use the matrix-free path")]
    CapExceeded {
        what: &'static str,
        needed: usize,
        cap: usize,
    },

    #[error("operation requires a non-empty batch")]
    EmptyBatch,

    #[error("task {task_id} already has an output head")]
    DuplicateTask { task_id: usize },

    #[error("no output head registered for task {task_id}")]
    UnknownTask { task_id: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("path produced non-finite weights at step {step}; prefix of {} steps retained", partial.steps.len())]
    NonFinitePath { step: usize, partial: Box<FipPath> },

    #[error("all inputs had zero loss gradient; no coherence to measure")]
    AllGradientsZero,

    #[error("requested {want} members but only {have} steps are available")]
    InsufficientSteps { have: usize, want: usize },

    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Diverged {
        epoch: usize,
        last_finite: Box<crate::net::WeightVector>,
    },

    #[error("could not place {n_classes} centers at mutual distance {separation} in {dim} dimensions")]
    InfeasiblePacking {
        n_classes: usize,
        dim: usize,
        separation: f64,
    },

    #[error("{file}: bad magic number {got:#010x}, expected {expected:#010x}")]
    BadMagic {
        file: String,
        got: u32,
        expected: u32,
    },

    #[error("{file}: truncated ({context})")]
    Truncated { file: String, context: String },

    #[error("image file has {images} items but label file has {labels}")]
    CountMismatch { images: usize, labels: usize },

    #[error("checkpoint payload checksum mismatch (stored {stored:#018x}, computed {computed:#018x})")]
    ChecksumMismatch { stored: u64, computed: u64 },

    #[error("unsupported checkpoint format version {version}")]
    UnsupportedVersion { version: u32 },

    #[error("output directory {dir} is locked by another run (remove the .lock file if stale)")]
    OutputDirLocked { dir: String },

    #[error("run log is empty; nothing to plot")]
    EmptyRunLog,

    #[error("run log step indices must be non-decreasing within a phase ({phase}: {prev} then {got})")]
    NonMonotoneStep {
        phase: String,
        prev: u64,
        got: u64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl FipError {
    /// Stable machine-readable tag for each variant (used by the CLI's
    /// error JSON).
    pub fn kind(&self) -> &'static str {
        match self {
            FipError::DimensionMismatch { .. } => "dimension-mismatch",
            FipError::WeightLength { .. } => "weight-length",
            FipError::SpecMismatch => "spec-mismatch",
            FipError::NonFinite { .. } => "non-finite",
            FipError::MissingLabels => "missing-labels",
            FipError::LabelOutOfRange { .. } => "label-out-of-range",
            FipError::CapExceeded { .. } => "cap-exceeded",
            FipError::EmptyBatch => "empty-batch",
            FipError::DuplicateTask { .. } => "duplicate-task",
            FipError::UnknownTask { .. } => "unknown-task",
            FipError::InvalidConfig(_) => "invalid-config",
            FipError::NonFinitePath { .. } => "non-finite-path",
            FipError::AllGradientsZero => "all-gradients-zero",
            FipError::InsufficientSteps { .. } => "insufficient-steps",
            FipError::Diverged { .. } => "diverged",
            FipError::InfeasiblePacking { .. } => "infeasible-packing",
            FipError::BadMagic { .. } => "bad-magic",
            FipError::Truncated { .. } => "truncated",
            FipError::CountMismatch { .. } => "count-mismatch",
            FipError::ChecksumMismatch { .. } => "checksum-mismatch",
            FipError::UnsupportedVersion { .. } => "unsupported-version",
            FipError::OutputDirLocked { .. } => "output-dir-locked",
            FipError::EmptyRunLog => "empty-run-log",
            FipError::NonMonotoneStep { .. } => "non-monotone-step",
            FipError::Io(_) => "io",
            FipError::Json(_) => "json",
        }
    }
}
