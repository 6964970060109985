//! Plot-ready CSV series and the 2-component weight-trajectory projection.

use super::ExperimentKind;
use crate::checkpoint::load_checkpoint;
use crate::error::{FipError, Result};
use crate::runlog::{load_records, RunRecord, RUNLOG_FILE};
use nalgebra::DMatrix;
use std::path::{Path, PathBuf};

/// Column schemas, asserted by tests and documented in the README.
pub const ACCURACY_VS_STEP_HEADER: &str = "phase,step,series,value";
pub const ACCURACY_VS_SPARSITY_HEADER: &str =
    "p_target,achieved_sparsity,train_accuracy,test_accuracy";
pub const ADVERSARIAL_ACCURACY_HEADER: &str = "model,clean_accuracy,adversarial_accuracy";
pub const COMPOSE_SUMMARY_HEADER: &str = "key,value";
pub const TRAJECTORY_PCA_HEADER: &str = "phase,step,pc1,pc2";

/// Scores of a 2-component principal projection.
#[derive(Debug, Clone)]
pub struct Pca2d {
    /// Per-row (pc1, pc2) coordinates.
    pub coords: Vec<(f64, f64)>,
    /// Per-row Euclidean distance between the centered row and its
    /// 2-component reconstruction.
    pub residuals: Vec<f64>,
}

/// PCA onto the top-2 principal components of the visited weight set, via
/// the sample-space Gram matrix (cheap when there are far fewer rows than
/// coordinates). Exact for data confined to a 2-plane.
pub fn pca_project_2d(rows: &[Vec<f64>]) -> Result<Pca2d> {
    let s = rows.len();
    if s == 0 {
        return Err(FipError::InvalidConfig("PCA needs at least one row".into()));
    }
    let n = rows[0].len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(FipError::InvalidConfig("PCA rows must share a length".into()));
    }
    let mut mean = vec![0.0; n];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / s as f64;
        }
    }
    let centered: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();
    let mut gram = DMatrix::<f64>::zeros(s, s);
    for a in 0..s {
        for b in a..s {
            let dot: f64 = centered[a].iter().zip(&centered[b]).map(|(x, y)| x * y).sum();
            gram[(a, b)] = dot;
            gram[(b, a)] = dot;
        }
    }
    let eig = gram.symmetric_eigen();
    // top-2 eigenpairs
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let mut coords = vec![(0.0, 0.0); s];
    // principal directions in feature space, for explicit reconstruction
    let mut directions: Vec<Vec<f64>> = Vec::with_capacity(2);
    for (k, &ei) in order.iter().take(2).enumerate() {
        let lambda = eig.eigenvalues[ei].max(0.0);
        if lambda == 0.0 {
            directions.push(vec![0.0; n]);
            continue;
        }
        let scale = lambda.sqrt();
        let mut col: Vec<f64> = (0..s).map(|r| eig.eigenvectors[(r, ei)]).collect();
        // deterministic sign: largest-magnitude entry positive
        let lead = col
            .iter()
            .cloned()
            .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if lead < 0.0 {
            for v in col.iter_mut() {
                *v = -*v;
            }
        }
        for r in 0..s {
            let score = col[r] * scale;
            if k == 0 {
                coords[r].0 = score;
            } else {
                coords[r].1 = score;
            }
        }
        // v_k = Xc^T u_k / sqrt(lambda_k)
        let mut dir = vec![0.0; n];
        for (r, row) in centered.iter().enumerate() {
            let weight = col[r] / scale;
            for (d, v) in dir.iter_mut().zip(row) {
                *d += weight * v;
            }
        }
        directions.push(dir);
    }
    while directions.len() < 2 {
        directions.push(vec![0.0; n]);
    }
    let residuals = centered
        .iter()
        .zip(&coords)
        .map(|(row, (p1, p2))| {
            row.iter()
                .zip(&directions[0])
                .zip(&directions[1])
                .map(|((v, d1), d2)| {
                    let recon = p1 * d1 + p2 * d2;
                    (v - recon) * (v - recon)
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    Ok(Pca2d { coords, residuals })
}

fn csv_escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn write_csv(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::with_capacity(rows.len() * 32 + header.len() + 1);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|f| csv_escape(f)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn accuracy_vs_step_rows(records: &[RunRecord]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for r in records.iter().filter(|r| r.event == "eval") {
        for (key, value) in &r.values {
            rows.push(vec![
                r.phase.clone(),
                r.step.to_string(),
                key.clone(),
                fmt(*value),
            ]);
        }
    }
    rows
}

fn sparsity_rows(records: &[RunRecord]) -> Vec<Vec<String>> {
    records
        .iter()
        .filter(|r| r.event == "summary" && r.values.contains_key("p_target"))
        .map(|r| {
            vec![
                fmt(r.values["p_target"]),
                fmt(r.values["achieved_sparsity"]),
                fmt(r.values["train_acc"]),
                fmt(r.values["test_acc"]),
            ]
        })
        .collect()
}

fn adversarial_rows(records: &[RunRecord]) -> Vec<Vec<String>> {
    records
        .iter()
        .filter(|r| {
            r.event == "eval" && r.phase.starts_with("eval:") && r.values.contains_key("adv_acc")
        })
        .map(|r| {
            vec![
                r.phase.trim_start_matches("eval:").to_string(),
                fmt(r.values["clean_acc"]),
                fmt(r.values["adv_acc"]),
            ]
        })
        .collect()
}

fn compose_rows(records: &[RunRecord]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for r in records
        .iter()
        .filter(|r| r.event == "summary" || (r.event == "eval" && r.phase.ends_with(":done")))
    {
        for (key, value) in &r.values {
            rows.push(vec![format!("{}:{}", r.phase, key), fmt(*value)]);
        }
    }
    rows
}

/// Weight vectors persisted under `out/paths/<phase>/`, reconstructed as
/// (phase, plot step, weights). `w0.fipc` plots at step 0 and `step_K.fipc`
/// at `K + 1`.
fn trajectory_points(paths_dir: &Path) -> Result<Vec<(String, usize, Vec<f64>)>> {
    let mut points = Vec::new();
    if !paths_dir.exists() {
        return Ok(points);
    }
    let mut phase_dirs: Vec<PathBuf> = std::fs::read_dir(paths_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    phase_dirs.sort();
    for dir in phase_dirs {
        let phase = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "fipc"))
            .collect();
        files.sort();
        for f in files {
            let stem = f.file_stem().map(|s| s.to_string_lossy().into_owned());
            let step = match stem.as_deref() {
                Some("w0") => 0,
                Some(name) => match name.strip_prefix("step_").and_then(|s| s.parse::<usize>().ok())
                {
                    Some(k) => k + 1,
                    None => continue,
                },
                None => continue,
            };
            let ck = load_checkpoint(&f)?;
            points.push((phase.clone(), step, ck.payload));
        }
    }
    points.sort_by(|a, b| (&a.0, a.1).cmp(&(&b.0, b.1)));
    Ok(points)
}

/// Emits the CSV series for one experiment's output directory and returns
/// the files written. The trajectory PCA covers the largest group of
/// persisted weight vectors that share a parameter count (head surgery
/// changes the count mid-experiment).
pub fn emit_plotdata(out_dir: &Path, kind: ExperimentKind) -> Result<Vec<PathBuf>> {
    let records = load_records(&out_dir.join(RUNLOG_FILE))?;
    if records.is_empty() {
        return Err(FipError::EmptyRunLog);
    }
    let plots = out_dir.join("plots");
    std::fs::create_dir_all(&plots)?;
    let mut written = Vec::new();

    match kind {
        ExperimentKind::Continual | ExperimentKind::Spectrum => {
            let path = plots.join("accuracy_vs_step.csv");
            write_csv(&path, ACCURACY_VS_STEP_HEADER, &accuracy_vs_step_rows(&records))?;
            written.push(path);
        }
        ExperimentKind::Sparsify => {
            let path = plots.join("accuracy_vs_sparsity.csv");
            write_csv(&path, ACCURACY_VS_SPARSITY_HEADER, &sparsity_rows(&records))?;
            written.push(path);
        }
        ExperimentKind::Ensemble => {
            let path = plots.join("adversarial_accuracy.csv");
            write_csv(&path, ADVERSARIAL_ACCURACY_HEADER, &adversarial_rows(&records))?;
            written.push(path);
        }
        ExperimentKind::Compose => {
            let path = plots.join("compose_summary.csv");
            write_csv(&path, COMPOSE_SUMMARY_HEADER, &compose_rows(&records))?;
            written.push(path);
        }
    }

    let points = trajectory_points(&out_dir.join("paths"))?;
    if !points.is_empty() {
        // group by parameter count, keep the largest group
        let mut lengths: Vec<usize> = points.iter().map(|(_, _, w)| w.len()).collect();
        lengths.sort_unstable();
        lengths.dedup();
        let dominant = lengths
            .into_iter()
            .max_by_key(|&len| points.iter().filter(|(_, _, w)| w.len() == len).count())
            .unwrap();
        let group: Vec<&(String, usize, Vec<f64>)> = points
            .iter()
            .filter(|(_, _, w)| w.len() == dominant)
            .collect();
        let rows_data: Vec<Vec<f64>> = group.iter().map(|(_, _, w)| w.clone()).collect();
        let pca = pca_project_2d(&rows_data)?;
        let rows: Vec<Vec<String>> = group
            .iter()
            .zip(&pca.coords)
            .map(|((phase, step, _), (p1, p2))| {
                vec![phase.clone(), step.to_string(), fmt(*p1), fmt(*p2)]
            })
            .collect();
        let path = plots.join("trajectory_pca.csv");
        write_csv(&path, TRAJECTORY_PCA_HEADER, &rows)?;
        written.push(path);
    }
    Ok(written)
}
