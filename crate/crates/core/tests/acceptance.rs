//! Acceptance suite: one test per criterion, each asserting its stated
//! tolerances and printing a PASS line (visible with `--nocapture`).
//!
//! Experiment-level criteria run through the real drivers with pinned
//! seeds, so every number here is reproduced bit-for-bit on rerun.

use fip_core::ensemble::{pgd_attack, AttackConfig};
use fip_core::experiments::{
    build_tasks, AttackParams, DatasetSpec, ExperimentConfig, ExperimentKind, PathSettings,
    SparsifyRefMode, TrainParams,
};
use fip_core::metric::{
    fd_output_distance, metric_matrix, metric_spectrum, output_distance_sq, MetricEvaluation,
};
use fip_core::net::{accuracy, forward, Activation, Batch, NetworkSpec, WeightVector};
use fip_core::objective::ObjectiveSpec;
use fip_core::path::{fip_direction, sample_path, PathConfig};
use fip_core::runlog::RunLog;
use fip_core::train::{train_base, TrainSettings};
use fip_core::{load_checkpoint, save_checkpoint, Checkpoint};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::time::Instant;

fn random_weights(spec: &NetworkSpec, seed: u64) -> WeightVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals: Vec<f64> = (0..spec.param_count())
        .map(|_| rng.gen_range(-0.8..0.8))
        .collect();
    WeightVector::new(spec, vals).unwrap()
}

fn random_inputs(dim: usize, n: usize, seed: u64) -> Batch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.2..1.2)).collect())
        .collect();
    Batch::from_rows(&rows, None, 0).unwrap()
}

fn pass(criterion: usize, name: &str, started: Instant, detail: String) {
    println!(
        "ACCEPTANCE {criterion} ({name}): PASS [{:.2}s] {detail}",
        started.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_1_metric_correctness() {
    let started = Instant::now();
    let shapes: [&[usize]; 3] = [&[3, 7, 2], &[2, 6, 6, 3], &[4, 10, 1]];
    let mut worst_dense = 0.0f64;
    let mut worst_fd = 0.0f64;
    for k in 0..25usize {
        let dims = shapes[k % shapes.len()].to_vec();
        let act = if k % 2 == 0 {
            Activation::Tanh
        } else {
            Activation::Relu
        };
        let spec = NetworkSpec::mlp(dims, act).unwrap();
        assert!(spec.param_count() <= 500);
        let w = random_weights(&spec, 1000 + k as u64);
        let batch = random_inputs(spec.input_dim(), 2 + k % 5, 2000 + k as u64);
        let me = MetricEvaluation::new(&spec, &w, &batch).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + k as u64);
        let dw: Vec<f64> = (0..spec.param_count())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();

        let q = output_distance_sq(&me, &dw).unwrap();
        let g = metric_matrix(&me).unwrap();
        let dv = nalgebra::DVector::from_column_slice(&dw);
        let dense = (dv.transpose() * &g * &dv)[(0, 0)];
        let rel = (dense - q).abs() / q.abs().max(1e-12);
        assert!(rel <= 1e-9, "net {k}: dense vs matrix-free rel err {rel}");
        worst_dense = worst_dense.max(rel);

        if act == Activation::Tanh {
            let fd = fd_output_distance(&spec, &w, &batch, &dw, 1e-5).unwrap();
            let rel_fd = (fd - q).abs() / (q + 1e-12);
            assert!(rel_fd < 1e-3, "net {k}: fd vs form rel err {rel_fd}");
            worst_fd = worst_fd.max(rel_fd);
        }
    }
    assert!(started.elapsed().as_secs() < 60);
    pass(
        1,
        "metric correctness",
        started,
        format!("worst dense/matrix-free rel {worst_dense:.2e}, worst fd rel {worst_fd:.2e}"),
    );
}

#[test]
fn criterion_2_direction_solver_optimality() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst_gap = f64::NEG_INFINITY;
    for trial in 0..100usize {
        let spec = NetworkSpec::mlp(vec![1, 1], Activation::Identity).unwrap();
        let w = WeightVector::new(
            &spec,
            vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
        )
        .unwrap();
        let n_pts = rng.gen_range(1..=4);
        let xs: Vec<f64> = (0..n_pts).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let batch = Batch::from_rows(&rows, None, 0).unwrap();
        let me = MetricEvaluation::new(&spec, &w, &batch).unwrap();
        let beta = [0.0, 0.5, 1.0, 3.0, 1e6][trial % 5];
        let grad = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let epsilon = rng.gen_range(0.25..4.0);
        let mut cfg = PathConfig::new(epsilon, 1)
            .with_seed(trial as u64)
            .with_beta(beta);
        cfg.n_candidates = 32;
        cfg.inner_iters = 60;
        let (_, diag) = fip_direction(&me, Some(&grad), &cfg).unwrap();

        // hand-built 2x2 metric: mean over the batch of (x, 1)(x, 1)^T
        let n = xs.len() as f64;
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for &x in &xs {
            a += x * x / n;
            b += x / n;
            c += 1.0 / n;
        }
        let q = |t: &[f64; 2]| a * t[0] * t[0] + 2.0 * b * t[0] * t[1] + c * t[1] * t[1];
        let radius = epsilon.sqrt();
        let gn = (grad[0] * grad[0] + grad[1] * grad[1]).sqrt();
        let active = beta > 0.0 && gn > 0.0;
        let (q_scale, lin_scale) = if active {
            let ws = [-radius * grad[0] / gn, -radius * grad[1] / gn];
            let qs = q(&ws);
            (if qs > 1e-300 { qs } else { 1.0 }, radius * gn)
        } else {
            (1.0, 1.0)
        };
        let mut oracle = f64::INFINITY;
        for k in 0..1_000_000u32 {
            let phi = 2.0 * std::f64::consts::PI * f64::from(k) / 1e6;
            let t = [radius * phi.cos(), radius * phi.sin()];
            let mut f = q(&t) / q_scale;
            if active {
                f += beta * (t[0] * grad[0] + t[1] * grad[1]) / lin_scale;
            }
            oracle = oracle.min(f);
        }
        let gap = diag.final_objective - oracle;
        worst_gap = worst_gap.max(gap);
        assert!(
            gap <= 1e-3,
            "trial {trial}: solver {} vs oracle {oracle} (gap {gap})",
            diag.final_objective
        );
    }
    assert!(started.elapsed().as_secs() < 60);
    pass(
        2,
        "direction-solver optimality",
        started,
        format!("worst objective gap {worst_gap:.2e} over 100 instances"),
    );
}

#[test]
fn criterion_3_isofunctional_paths() {
    let started = Instant::now();
    let train = fip_core::gen_blobs(2, 100, 2, 6.0, 31).unwrap();
    let spec = NetworkSpec::mlp(vec![2, 16, 2], Activation::Relu).unwrap();
    let settings = TrainSettings::new(0.05, 40, 16, 3);
    let mut log = RunLog::in_memory("c3");
    let w0 = train_base(&spec, &train, &settings, &mut log, "train").unwrap();
    let acc0 = accuracy(&spec, &w0, &train).unwrap();

    let cfg = PathConfig::relative_to(&w0, 1e-2, 50).with_seed(5);
    let epsilon = cfg.epsilon;
    let path = sample_path(&spec, &w0, &train, &ObjectiveSpec::Null, &cfg).unwrap();

    // long-range movement
    let dist: f64 = path
        .endpoint()
        .values()
        .iter()
        .zip(w0.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let floor = 0.5 * 50.0 * epsilon.sqrt();
    assert!(dist >= floor, "moved {dist}, need {floor}");

    // accuracy preserved
    let acc1 = accuracy(&spec, path.endpoint(), &train).unwrap();
    assert!(
        (acc0 - acc1).abs() <= 0.02,
        "train accuracy changed {acc0} -> {acc1}"
    );

    // function displacement beats the random-direction mean on >= 95% of steps
    let displacement = |w: &WeightVector, theta: &[f64]| -> f64 {
        let shifted: Vec<f64> = w.values().iter().zip(theta).map(|(a, b)| a + b).collect();
        let ws = WeightVector::new(&spec, shifted).unwrap();
        let mut acc = 0.0;
        for i in 0..train.len() {
            let y0 = forward(&spec, w, train.input(i)).unwrap();
            let y1 = forward(&spec, &ws, train.input(i)).unwrap();
            acc += y0
                .values()
                .iter()
                .zip(y1.values())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
        acc / train.len() as f64
    };
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let radius = epsilon.sqrt();
    let mut wins = 0usize;
    let mut prev = path.w0.clone();
    for step in &path.steps {
        let own = displacement(&prev, &step.theta_star);
        let mut random_mean = 0.0;
        for _ in 0..100 {
            let v: Vec<f64> = (0..spec.param_count())
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let dir: Vec<f64> = v.iter().map(|x| x * radius / norm).collect();
            random_mean += displacement(&prev, &dir) / 100.0;
        }
        if own <= random_mean {
            wins += 1;
        }
        prev = step.w.clone();
    }
    assert!(
        wins >= 48,
        "accepted step beat the random mean on only {wins}/50 steps"
    );
    assert!(started.elapsed().as_secs() < 300);
    pass(
        3,
        "isofunctional paths",
        started,
        format!(
            "moved {:.2} (floor {:.2}), accuracy {:.3} -> {:.3}, {wins}/50 steps beat random",
            dist, floor, acc0, acc1
        ),
    );
}

fn continual_config(out: std::path::PathBuf) -> ExperimentConfig {
    ExperimentConfig {
        kind: ExperimentKind::Continual,
        dataset: DatasetSpec::Blobs {
            n_classes: 2,
            n_per_class: 100,
            test_per_class: 50,
            dim: 2,
            separation: 5.0,
            n_tasks: 2,
            task_offset: 10.0,
        },
        hidden_dims: vec![16],
        activation: Activation::Relu,
        train: TrainParams {
            lr: 0.05,
            momentum: 0.9,
            epochs: 40,
            batch_size: 16,
        },
        path: PathSettings {
            epsilon: None,
            relative_step: 1e-2,
            beta: 2.0,
            n_steps: 600,
            inner_iters: 15,
            inner_lr: None,
            n_candidates: 6,
            anchor_batch_size: 128,
            persist_stride: 20,
        },
        seed: 1,
        out_dir: out,
        sparsity_grid: None,
        sparsity: 0.3,
        ensemble_members: 10,
        attack: AttackParams::default(),
        tol_rel: 1e-6,
        append_init_scale: 0.01,
        include_biases: true,
        sparsify_ref: SparsifyRefMode::CurrentW,
    }
}

#[test]
fn criterion_4_continual_learning() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let config = continual_config(dir.path().join("run"));
    let log = fip_core::run_continual(&config).unwrap();

    let pre = log.last_value("task1:pre", "eval", "task0_test_acc").unwrap();
    let fip_t0 = log.last_value("task1:fip", "eval", "task0_test_acc").unwrap();
    let fip_t1 = log.last_value("task1:fip", "eval", "task1_test_acc").unwrap();
    let naive_t0 = log
        .last_value("task1:naive", "eval", "task0_test_acc")
        .unwrap();
    let fip_drop = pre - fip_t0;
    let naive_drop = pre - naive_t0;

    assert!(fip_drop <= 0.05, "path adaptation lost {fip_drop} of task 0");
    assert!(fip_t1 >= 0.90, "task 1 accuracy {fip_t1} below 0.90");
    assert!(
        naive_drop - fip_drop >= 0.20,
        "naive drop {naive_drop} vs path drop {fip_drop}"
    );
    // budget accounting: the logged path has exactly n_steps steps
    let path_steps = log
        .records()
        .iter()
        .filter(|r| r.phase == "task1:fip" && r.event == "path_step")
        .count();
    assert_eq!(path_steps, config.path.n_steps);
    assert!(started.elapsed().as_secs() < 600);
    pass(
        4,
        "continual learning",
        started,
        format!(
            "task0 {pre:.3} -> path {fip_t0:.3} / naive {naive_t0:.3}; task1 {fip_t1:.3}"
        ),
    );
}

#[test]
fn criterion_5_sparsification() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let grid = vec![0.0, 0.25, 0.5];
    let config = ExperimentConfig {
        kind: ExperimentKind::Sparsify,
        dataset: DatasetSpec::Blobs {
            n_classes: 2,
            n_per_class: 100,
            test_per_class: 50,
            dim: 2,
            separation: 6.0,
            n_tasks: 1,
            task_offset: 0.0,
        },
        hidden_dims: vec![64, 64],
        activation: Activation::Tanh,
        train: TrainParams {
            lr: 0.05,
            momentum: 0.9,
            epochs: 40,
            batch_size: 16,
        },
        path: PathSettings {
            epsilon: None,
            relative_step: 1e-2,
            beta: 1.0,
            n_steps: 50,
            inner_iters: 10,
            inner_lr: None,
            n_candidates: 4,
            anchor_batch_size: 64,
            persist_stride: 10,
        },
        seed: 1,
        out_dir: dir.path().join("run"),
        sparsity_grid: Some(grid.clone()),
        sparsity: 0.3,
        ensemble_members: 10,
        attack: AttackParams::default(),
        tol_rel: 1e-6,
        append_init_scale: 0.01,
        include_biases: true,
        sparsify_ref: SparsifyRefMode::CurrentW,
    };
    let log = fip_core::run_sparsify(&config).unwrap();

    let n = (2 + 1) * 64 + (64 + 1) * 64 + (64 + 1) * 2;
    let base_test = log.last_value("train", "eval", "task0_test_acc").unwrap();
    for &p in &grid {
        let phase = format!("sparsify:p{:03}", (p * 100.0).round() as u32);
        let achieved = log.last_value(&phase, "summary", "achieved_sparsity").unwrap();
        let expect = (p * n as f64).floor() / n as f64;
        assert_eq!(
            achieved, expect,
            "p {p}: achieved {achieved} vs floor contract {expect}"
        );
    }
    let p0_acc = log
        .last_value("sparsify:p000", "summary", "test_acc")
        .unwrap();
    assert_eq!(p0_acc, base_test, "p=0 must equal base exactly");
    let p50_acc = log
        .last_value("sparsify:p050", "summary", "test_acc")
        .unwrap();
    assert!(
        base_test - p50_acc <= 0.05,
        "p=0.5 lost {} points",
        base_test - p50_acc
    );
    assert!(started.elapsed().as_secs() < 600);
    pass(
        5,
        "sparsification",
        started,
        format!("base {base_test:.3}, p=0.5 accuracy {p50_acc:.3} at exact sparsity 0.5"),
    );
}

#[test]
fn criterion_6_adversarial_ensembling() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig {
        kind: ExperimentKind::Ensemble,
        dataset: DatasetSpec::Blobs {
            n_classes: 2,
            n_per_class: 100,
            test_per_class: 250,
            dim: 2,
            separation: 2.6,
            n_tasks: 1,
            task_offset: 0.0,
        },
        hidden_dims: vec![16],
        activation: Activation::Relu,
        train: TrainParams {
            lr: 0.05,
            momentum: 0.9,
            epochs: 40,
            batch_size: 16,
        },
        path: PathSettings {
            epsilon: None,
            relative_step: 0.015,
            beta: 1.0,
            n_steps: 100,
            inner_iters: 15,
            inner_lr: None,
            n_candidates: 6,
            anchor_batch_size: 128,
            persist_stride: 10,
        },
        seed: 12,
        out_dir: dir.path().join("run"),
        sparsity_grid: None,
        sparsity: 0.3,
        ensemble_members: 10,
        attack: AttackParams::default(),
        tol_rel: 1e-6,
        append_init_scale: 0.01,
        include_biases: true,
        sparsify_ref: SparsifyRefMode::CurrentW,
    };
    let log = fip_core::run_ensemble(&config).unwrap();
    let base_adv = log.last_value("eval:base", "eval", "adv_acc").unwrap();
    let ens_adv = log.last_value("eval:ensemble", "eval", "adv_acc").unwrap();
    let members = log.last_value("eval:ensemble", "eval", "members").unwrap();
    assert_eq!(members, 10.0);
    assert!(
        ens_adv > base_adv,
        "ensemble adv accuracy {ens_adv} does not exceed base {base_adv}"
    );

    // feasibility of the persisted adversarial batch against the clean test set
    let tasks = build_tasks(&config).unwrap();
    let clean = &tasks[0].test;
    let (adv_values, n_rows, adv_dim) =
        fip_core::idx::read_idx_f64_matrix(&dir.path().join("run/adversarial/inputs.idx")).unwrap();
    assert_eq!(n_rows, clean.len());
    assert_eq!(adv_dim, clean.dim());
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in clean.inputs_flat() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let eps = config.attack.eps_rel * (hi - lo);
    for (a, o) in adv_values.iter().zip(clean.inputs_flat()) {
        assert!((a - o).abs() <= eps, "budget violated: |{a} - {o}| > {eps}");
        assert!(*a >= lo && *a <= hi, "clamp violated: {a}");
    }

    // zero-budget attack returns the inputs bit-identically
    let spec = NetworkSpec::mlp(vec![2, 16, 2], Activation::Relu).unwrap();
    let w = fip_core::train::init_weights(&spec, 9);
    let cfg0 = AttackConfig {
        eps_adv: 0.0,
        step_size: 0.1,
        n_iters: 10,
        seed: 4,
        clamp: (lo, hi),
    };
    let same = pgd_attack((&spec, &w), clean, &cfg0).unwrap();
    assert_eq!(&same, clean);

    assert!(started.elapsed().as_secs() < 900);
    pass(
        6,
        "adversarial ensembling",
        started,
        format!("base adv {base_adv:.3} < ensemble adv {ens_adv:.3}; feasibility exact on {n_rows} rows"),
    );
}

#[test]
fn criterion_7_non_abelian_composition() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig {
        kind: ExperimentKind::Compose,
        dataset: DatasetSpec::Blobs {
            n_classes: 2,
            n_per_class: 100,
            test_per_class: 50,
            dim: 2,
            separation: 6.0,
            n_tasks: 2,
            task_offset: 0.0,
        },
        hidden_dims: vec![16],
        activation: Activation::Relu,
        train: TrainParams {
            lr: 0.05,
            momentum: 0.9,
            epochs: 40,
            batch_size: 16,
        },
        path: PathSettings {
            epsilon: None,
            relative_step: 1e-2,
            beta: 1.0,
            n_steps: 150,
            inner_iters: 15,
            inner_lr: None,
            n_candidates: 6,
            anchor_batch_size: 128,
            persist_stride: 15,
        },
        seed: 1,
        out_dir: dir.path().join("run"),
        sparsity_grid: None,
        sparsity: 0.3,
        ensemble_members: 10,
        attack: AttackParams::default(),
        tol_rel: 1e-6,
        append_init_scale: 0.01,
        include_biases: true,
        sparsify_ref: SparsifyRefMode::CurrentW,
    };
    let log = fip_core::run_compose(&config).unwrap();
    let rel = log
        .last_value("compose", "summary", "endpoint_rel_distance")
        .unwrap();
    assert!(rel > 0.01, "endpoints coincide: relative distance {rel}");
    for task in 0..2 {
        let key = format!("task{task}_test_acc");
        let a = log.last_value("cl-co:done", "eval", &key).unwrap();
        let b = log.last_value("co-cl:done", "eval", &key).unwrap();
        assert!(
            (a - b).abs() <= 0.05,
            "task {task}: endpoint accuracies {a} vs {b} differ by more than 5 points"
        );
    }
    assert!(started.elapsed().as_secs() < 900);
    pass(
        7,
        "non-abelian composition",
        started,
        format!("relative endpoint distance {rel:.3} with matched accuracies"),
    );
}

#[test]
fn criterion_8_spectral_degeneracy() {
    let started = Instant::now();
    let train = fip_core::gen_blobs(2, 100, 2, 6.0, 31).unwrap();
    let spec = NetworkSpec::mlp(vec![2, 16, 2], Activation::Relu).unwrap();
    let settings = TrainSettings::new(0.05, 40, 16, 3);
    let mut log = RunLog::in_memory("c8");
    let w = train_base(&spec, &train, &settings, &mut log, "train").unwrap();

    let me = MetricEvaluation::new(&spec, &w, &train).unwrap();
    let report = metric_spectrum(&me, 1e-6).unwrap();
    assert!(
        report.degeneracy_dim >= 1,
        "no degenerate directions at tol 1e-6 (min eigenvalue {:.3e})",
        report.eigenvalues.last().unwrap()
    );
    let lmax = report.eigenvalues[0];
    assert!(report.eigenvalues.iter().all(|&l| l >= -1e-9 * lmax));
    let g = metric_matrix(&me).unwrap();
    let trace: f64 = (0..spec.param_count()).map(|i| g[(i, i)]).sum();
    let sum: f64 = report.eigenvalues.iter().sum();
    assert!(
        (sum - trace).abs() <= 1e-8 * trace.abs().max(1e-12),
        "eigenvalue sum {sum} vs trace {trace}"
    );
    assert!(started.elapsed().as_secs() < 60);
    pass(
        8,
        "spectral degeneracy",
        started,
        format!(
            "degeneracy_dim {} of n {} (lambda_max {lmax:.3e})",
            report.degeneracy_dim, report.n
        ),
    );
}

#[test]
fn criterion_9_infrastructure() {
    let started = Instant::now();

    // checkpoint round trip is bit-exact
    let spec = NetworkSpec::mlp(vec![3, 8, 2], Activation::Tanh).unwrap();
    let w = random_weights(&spec, 99);
    let dir = tempfile::tempdir().unwrap();
    let p1 = dir.path().join("a.fipc");
    let p2 = dir.path().join("b.fipc");
    save_checkpoint(&Checkpoint::new(&spec, &w, vec!["c9".into()]), &p1).unwrap();
    let loaded = load_checkpoint(&p1).unwrap();
    assert_eq!(
        loaded
            .payload
            .iter()
            .map(|v| v.to_bits())
            .collect::<Vec<_>>(),
        w.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
    save_checkpoint(&loaded, &p2).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());

    // reruns with fixed seeds reproduce every logged scalar
    let small = |out: std::path::PathBuf| ExperimentConfig {
        kind: ExperimentKind::Sparsify,
        dataset: DatasetSpec::Blobs {
            n_classes: 2,
            n_per_class: 30,
            test_per_class: 15,
            dim: 2,
            separation: 6.0,
            n_tasks: 1,
            task_offset: 0.0,
        },
        hidden_dims: vec![8],
        activation: Activation::Relu,
        train: TrainParams {
            lr: 0.05,
            momentum: 0.9,
            epochs: 10,
            batch_size: 10,
        },
        path: PathSettings {
            epsilon: None,
            relative_step: 1e-2,
            beta: 1.0,
            n_steps: 6,
            inner_iters: 8,
            inner_lr: None,
            n_candidates: 4,
            anchor_batch_size: 32,
            persist_stride: 3,
        },
        seed: 5,
        out_dir: out,
        sparsity_grid: Some(vec![0.0, 0.4]),
        sparsity: 0.3,
        ensemble_members: 10,
        attack: AttackParams::default(),
        tol_rel: 1e-6,
        append_init_scale: 0.01,
        include_biases: true,
        sparsify_ref: SparsifyRefMode::CurrentW,
    };
    let log_a = fip_core::run_sparsify(&small(dir.path().join("run_a"))).unwrap();
    let log_b = fip_core::run_sparsify(&small(dir.path().join("run_b"))).unwrap();
    assert_eq!(log_a.records().len(), log_b.records().len());
    for (a, b) in log_a.records().iter().zip(log_b.records()) {
        assert_eq!(a.comparable(), b.comparable());
    }

    assert!(started.elapsed().as_secs() < 300);
    pass(
        9,
        "infrastructure",
        started,
        format!(
            "checkpoint bytes identical; {} runlog records reproduced exactly",
            log_a.records().len()
        ),
    );
}
