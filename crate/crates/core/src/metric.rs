//! The weight-space metric `g_w(X) = mean_i J(x_i)ᵀ J(x_i)` and its spectrum.
//!
//! A [`MetricEvaluation`] is a matrix-free handle: the induced quadratic form
//! `q(dw) = mean_i ||J(x_i) dw||^2` is evaluated with one tangent sweep per
//! example and never materializes `g`. For small parameter counts the dense
//! matrix and its eigendecomposition are available behind a cap.
//!
//! By default the Jacobian is taken on raw (pre-softmax) outputs; a
//! post-softmax mode is offered for ablation. The Jacobian rows can also be
//! restricted to the heads of previously learned tasks, which is how
//! continual-learning paths anchor the metric to old tasks only.

use crate::error::{FipError, Result};
use crate::linalg;
use crate::net::forward::{forward_buffers, softmax, LayerBuffers};
use crate::net::grad::{backward, tangent_from_buffers};
use crate::net::{forward, Batch, NetworkSpec, WeightVector};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Default cap on `n` for dense metric materialization.
pub const DEFAULT_DENSE_CAP: usize = 2000;

/// Which outputs the metric measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputMode {
    /// Raw last-layer outputs (the default).
    PreSoftmax,
    /// Per-head softmax applied before measuring displacement.
    PostSoftmax,
}

/// Matrix-free handle for the metric of one `(spec, w, batch)` triple.
///
/// Forward activations are cached per example at construction, so repeated
/// quadratic-form evaluations against different `dw` only pay the tangent
/// and adjoint sweeps.
pub struct MetricEvaluation<'a> {
    spec: &'a NetworkSpec,
    w: &'a WeightVector,
    batch: &'a Batch,
    output_mode: OutputMode,
    /// Output index ranges that contribute rows; `None` means all outputs.
    selected: Option<Vec<(usize, usize)>>,
    /// Cached (pre-activation, post-activation) buffers per example.
    cache: Vec<LayerBuffers>,
}

impl<'a> MetricEvaluation<'a> {
    pub fn new(spec: &'a NetworkSpec, w: &'a WeightVector, batch: &'a Batch) -> Result<Self> {
        w.check(spec)?;
        if batch.is_empty() {
            return Err(FipError::EmptyBatch);
        }
        if batch.dim() != spec.input_dim() {
            return Err(FipError::DimensionMismatch {
                layer: 0,
                expected: spec.input_dim(),
                got: batch.dim(),
            });
        }
        let mut cache = Vec::with_capacity(batch.len());
        for i in 0..batch.len() {
            cache.push(forward_buffers(spec, w, batch.input(i))?);
        }
        Ok(MetricEvaluation {
            spec,
            w,
            batch,
            output_mode: OutputMode::PreSoftmax,
            selected: None,
            cache,
        })
    }

    pub fn with_output_mode(mut self, mode: OutputMode) -> Self {
        self.output_mode = mode;
        self
    }

    /// Restricts the metric to the output heads of the given tasks. Rows for
    /// all other outputs are dropped from the Jacobian.
    pub fn restricted_to_tasks(mut self, tasks: &[usize]) -> Result<Self> {
        let mut ranges = Vec::with_capacity(tasks.len());
        for &t in tasks {
            let h = self.spec.head(t)?;
            ranges.push((h.start, h.end));
        }
        ranges.sort_unstable();
        self.selected = Some(ranges);
        Ok(self)
    }

    pub fn spec(&self) -> &NetworkSpec {
        self.spec
    }

    pub fn weights(&self) -> &WeightVector {
        self.w
    }

    pub fn batch(&self) -> &Batch {
        self.batch
    }

    pub fn output_mode(&self) -> OutputMode {
        self.output_mode
    }

    fn n_params(&self) -> usize {
        self.spec.param_count()
    }

    fn ranges(&self) -> Vec<(usize, usize)> {
        match &self.selected {
            Some(r) => r.clone(),
            None => vec![(0, self.spec.output_dim())],
        }
    }

    /// Applies the output map `M` (selection, plus the per-head softmax
    /// Jacobian in post-softmax mode) to an output-space vector, in place.
    /// The softmax Jacobian `diag(s) - s sᵀ` is symmetric, so the same map
    /// serves as its own transpose.
    fn apply_output_map(&self, y: &[f64], v: &mut [f64]) {
        let ranges = self.ranges();
        let mut keep = vec![false; v.len()];
        for &(s, e) in &ranges {
            for k in keep.iter_mut().take(e).skip(s) {
                *k = true;
            }
        }
        if let OutputMode::PostSoftmax = self.output_mode {
            // Softmax blocks follow head boundaries, not the selection, so a
            // selected range is transformed per overlapping head.
            let heads = self.spec.head_ranges();
            for h in heads {
                if !keep[h.start] {
                    continue;
                }
                let s = softmax(&y[h.start..h.end]);
                let seg = &mut v[h.start..h.end];
                let mean: f64 = s.iter().zip(seg.iter()).map(|(si, vi)| si * vi).sum();
                for (vi, &si) in seg.iter_mut().zip(&s) {
                    *vi = si * (*vi - mean);
                }
            }
        }
        for (vi, &k) in v.iter_mut().zip(&keep) {
            if !k {
                *vi = 0.0;
            }
        }
    }

    /// `M J(x_i) dw` for example `i`.
    fn mapped_tangent(&self, i: usize, dw: &[f64]) -> Vec<f64> {
        let (pre, post) = &self.cache[i];
        let mut dy = tangent_from_buffers(
            self.spec,
            self.w.values(),
            self.batch.input(i),
            pre,
            post,
            dw,
        );
        let y = post.last().unwrap();
        self.apply_output_map(y, &mut dy);
        dy
    }

    /// The quadratic form `q(dw) = mean_i ||M J(x_i) dw||^2`.
    pub fn quadratic_form(&self, dw: &[f64]) -> Result<f64> {
        self.check_dw(dw)?;
        let mut acc = 0.0;
        for i in 0..self.batch.len() {
            let dy = self.mapped_tangent(i, dw);
            acc += linalg::norm_sq(&dy);
        }
        Ok(acc / self.batch.len() as f64)
    }

    /// `q(dw)` together with its gradient `2 * mean_i Jᵀ Mᵀ M J dw`, sharing
    /// the tangent sweeps. This is the hot call of the path solver.
    pub fn quadratic_form_and_grad(&self, dw: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_dw(dw)?;
        let inv_n = 1.0 / self.batch.len() as f64;
        let mut q = 0.0;
        let mut grad = vec![0.0; self.n_params()];
        for i in 0..self.batch.len() {
            let (pre, post) = &self.cache[i];
            let x = self.batch.input(i);
            let mut dy = self.mapped_tangent(i, dw);
            q += linalg::norm_sq(&dy) * inv_n;
            // pull back through Mᵀ (same map) and then Jᵀ
            let y = post.last().unwrap();
            self.apply_output_map(y, &mut dy);
            for d in dy.iter_mut() {
                *d *= 2.0 * inv_n;
            }
            backward(self.spec, self.w.values(), x, pre, post, &dy, Some(&mut grad));
        }
        Ok((q, grad))
    }

    fn check_dw(&self, dw: &[f64]) -> Result<()> {
        if dw.len() != self.n_params() {
            return Err(FipError::WeightLength {
                expected: self.n_params(),
                got: dw.len(),
            });
        }
        Ok(())
    }
}

/// Mean squared output displacement induced by `dw` (see
/// [`MetricEvaluation::quadratic_form`]).
pub fn output_distance_sq(me: &MetricEvaluation<'_>, dw: &[f64]) -> Result<f64> {
    me.quadratic_form(dw)
}

/// Dense `n x n` metric matrix, exactly symmetric by construction.
pub fn metric_matrix(me: &MetricEvaluation<'_>) -> Result<DMatrix<f64>> {
    metric_matrix_capped(me, DEFAULT_DENSE_CAP)
}

pub fn metric_matrix_capped(me: &MetricEvaluation<'_>, cap: usize) -> Result<DMatrix<f64>> {
    let n = me.n_params();
    if n > cap {
        return Err(FipError::CapExceeded {
            what: "dense metric matrix",
            needed: n,
            cap,
        });
    }
    let inv_n = 1.0 / me.batch.len() as f64;
    let mut g = DMatrix::<f64>::zeros(n, n);
    // One mapped Jacobian row per selected output: row_r = (M J)_r, obtained
    // by pulling e_r back through Mᵀ and then Jᵀ.
    let m = me.spec.output_dim();
    for i in 0..me.batch.len() {
        let (pre, post) = &me.cache[i];
        let x = me.batch.input(i);
        let y = post.last().unwrap();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for &(s, e) in &me.ranges() {
            for r in s..e {
                let mut v = vec![0.0; m];
                v[r] = 1.0;
                me.apply_output_map(y, &mut v);
                let mut row = vec![0.0; n];
                backward(me.spec, me.w.values(), x, pre, post, &v, Some(&mut row));
                rows.push(row);
            }
        }
        for row in &rows {
            for a in 0..n {
                if row[a] == 0.0 {
                    continue;
                }
                let ra = row[a] * inv_n;
                for b in a..n {
                    g[(a, b)] += ra * row[b];
                }
            }
        }
    }
    // mirror the strictly computed upper triangle: exact symmetry
    for a in 0..n {
        for b in (a + 1)..n {
            g[(b, a)] = g[(a, b)];
        }
    }
    Ok(g)
}

/// Eigenvalue report of the dense metric.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Descending eigenvalues, length `n`.
    pub eigenvalues: Vec<f64>,
    /// Count of eigenvalues below `tol_rel * lambda_max`.
    pub degeneracy_dim: usize,
    pub tol_rel: f64,
    pub n: usize,
    #[serde(rename = "N")]
    pub batch_size: usize,
}

impl SpectrumReport {
    pub fn rank(&self) -> usize {
        self.n - self.degeneracy_dim
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Spectral decomposition of the dense metric; `degeneracy_dim` counts the
/// near-null directions below `tol_rel * lambda_max`.
pub fn metric_spectrum(me: &MetricEvaluation<'_>, tol_rel: f64) -> Result<SpectrumReport> {
    metric_spectrum_capped(me, tol_rel, DEFAULT_DENSE_CAP)
}

pub fn metric_spectrum_capped(
    me: &MetricEvaluation<'_>,
    tol_rel: f64,
    cap: usize,
) -> Result<SpectrumReport> {
    let g = metric_matrix_capped(me, cap)?;
    if g.iter().any(|v| !v.is_finite()) {
        return Err(FipError::NonFinite {
            what: "metric matrix".into(),
        });
    }
    let eig = g.symmetric_eigen();
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let n = eigenvalues.len();
    let lambda_max = eigenvalues.first().copied().unwrap_or(0.0);
    let degeneracy_dim = if lambda_max <= 0.0 {
        n
    } else {
        eigenvalues
            .iter()
            .filter(|&&l| l < tol_rel * lambda_max)
            .count()
    };
    Ok(SpectrumReport {
        eigenvalues,
        degeneracy_dim,
        tol_rel,
        n,
        batch_size: me.batch.len(),
    })
}

/// Finite-difference oracle for the quadratic form: mean over the batch of
/// `||f(x, w + h dw) - f(x, w)||^2 / h^2` on raw outputs. Exact for linear
/// (identity-activation) networks at any `h`; converges to
/// [`output_distance_sq`] as `h -> 0` otherwise.
pub fn fd_output_distance(
    spec: &NetworkSpec,
    w: &WeightVector,
    batch: &Batch,
    dw: &[f64],
    h: f64,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(FipError::InvalidConfig("fd step h must be > 0".into()));
    }
    if dw.len() != spec.param_count() {
        return Err(FipError::WeightLength {
            expected: spec.param_count(),
            got: dw.len(),
        });
    }
    if batch.is_empty() {
        return Err(FipError::EmptyBatch);
    }
    let shifted: Vec<f64> = w
        .values()
        .iter()
        .zip(dw)
        .map(|(wi, di)| wi + h * di)
        .collect();
    let w_shift = WeightVector::new(spec, shifted)?;
    let mut acc = 0.0;
    for i in 0..batch.len() {
        let y0 = forward(spec, w, batch.input(i))?;
        let y1 = forward(spec, &w_shift, batch.input(i))?;
        let d = linalg::sub(y1.values(), y0.values());
        acc += linalg::norm_sq(&d) / (h * h);
    }
    Ok(acc / batch.len() as f64)
}
