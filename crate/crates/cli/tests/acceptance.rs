//! Acceptance suite: one test per release criterion, each printing a
//! pass/fail line (visible with `cargo test --test acceptance -- --nocapture`).

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use iscb::classifier::{self, LinearFeatureMap};
use iscb::norms::{vector_pnorm, PNorm};
use iscb::prox::{project_l1_ball, ProxMode, ProxSpec};
use iscb::synth::{generate_synthetic, CoefficientModel, SeededRng, SyntheticSpec};
use iscb::trainer::{
    self, grassmann_bound, pseudo_inverse, response_gradient, response_objective, train,
    TrainConfig,
};
use iscb::{lift_features, normalize_columns, qr_reduce};
use nalgebra::{DMatrix, DVector};

fn criterion(number: u32, name: &str, passed: bool, detail: String) {
    if passed {
        println!("acceptance {number} ({name}): PASS");
    } else {
        println!("acceptance {number} ({name}): FAIL — {detail}");
        panic!("acceptance criterion {number} ({name}) failed: {detail}");
    }
}

fn all_prox_specs() -> Vec<(&'static str, ProxSpec)> {
    let mut out = Vec::new();
    for (tag, p) in [("l1", PNorm::One), ("l2", PNorm::Two), ("linf", PNorm::Inf)] {
        out.push((
            tag,
            ProxSpec {
                p,
                mode: ProxMode::Equality,
                radius: 1.3,
            },
        ));
        out.push((
            tag,
            ProxSpec {
                p,
                mode: ProxMode::Inequality,
                radius: 0.6,
            },
        ));
    }
    out
}

/// A random point satisfying the constraint, constructed directly so the
/// optimality check never depends on the projections it is checking.
fn random_feasible(rng: &mut SeededRng, spec: &ProxSpec, len: usize) -> Vec<f64> {
    let r = spec.radius;
    let mut point: Vec<f64> = match spec.p {
        PNorm::Two => {
            let g: Vec<f64> = (0..len).map(|_| rng.normal()).collect();
            let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
            g.iter().map(|x| r * x / norm).collect()
        }
        PNorm::One => {
            let e: Vec<f64> = (0..len).map(|_| -rng.uniform().max(1e-12).ln()).collect();
            let total: f64 = e.iter().sum();
            e.iter().map(|x| rng.sign() * r * x / total).collect()
        }
        PNorm::Inf => {
            let mut g: Vec<f64> = (0..len).map(|_| (2.0 * rng.uniform() - 1.0) * r).collect();
            let pin = rng.index(len);
            g[pin] = rng.sign() * r;
            g
        }
    };
    if spec.mode == ProxMode::Inequality {
        let t = rng.uniform();
        point.iter_mut().for_each(|x| *x *= t);
    }
    point
}

#[test]
fn criterion_1_prox_feasibility() {
    let started = Instant::now();
    let mut rng = SeededRng::new(101);
    let mut worst = 0.0f64;
    for (_, spec) in all_prox_specs() {
        for _ in 0..1000 {
            let len = 1 + rng.index(10);
            let h: Vec<f64> = (0..len).map(|_| rng.normal() * 2.0).collect();
            let g = spec.apply(&h);
            let norm = vector_pnorm(&g, spec.p);
            let violation = match spec.mode {
                ProxMode::Equality => (norm - spec.radius).abs(),
                ProxMode::Inequality => (norm - spec.radius).max(0.0),
            };
            worst = worst.max(violation);
        }
    }
    let elapsed = started.elapsed();
    criterion(
        1,
        "prox feasibility",
        worst <= 1e-9 && elapsed < Duration::from_secs(5),
        format!("worst violation {worst:.3e}, elapsed {elapsed:?}"),
    );
}

#[test]
fn criterion_2_prox_optimality() {
    let mut rng = SeededRng::new(202);
    let mut worst_excess = f64::NEG_INFINITY;
    for (_, spec) in all_prox_specs() {
        for _ in 0..200 {
            let len = 8;
            let h: Vec<f64> = (0..len).map(|_| rng.normal() * 1.5).collect();
            let g = spec.apply(&h);
            let dist =
                |a: &[f64]| -> f64 { a.iter().zip(&h).map(|(x, y)| (x - y) * (x - y)).sum() };
            let ours = dist(&g).sqrt();
            for _ in 0..10_000 {
                let candidate = random_feasible(&mut rng, &spec, len);
                worst_excess = worst_excess.max(ours - dist(&candidate).sqrt());
            }
        }
    }
    // sort-based oracle agreement for the l1 ball
    let mut worst_oracle_gap = 0.0f64;
    for _ in 0..1000 {
        let len = 1 + rng.index(10);
        let h: Vec<f64> = (0..len).map(|_| rng.normal() * 2.0).collect();
        let mu = rng.uniform() * 2.0;
        let fast = project_l1_ball(&h, mu);
        let oracle = l1_ball_sort_oracle(&h, mu);
        for (a, b) in fast.iter().zip(&oracle) {
            worst_oracle_gap = worst_oracle_gap.max((a - b).abs());
        }
    }
    criterion(
        2,
        "prox optimality",
        worst_excess <= 1e-9 && worst_oracle_gap <= 1e-10,
        format!("worst candidate excess {worst_excess:.3e}, oracle gap {worst_oracle_gap:.3e}"),
    );
}

/// Duchi-style sort projection onto the l1 ball, independent of the shrink.
fn l1_ball_sort_oracle(h: &[f64], mu: f64) -> Vec<f64> {
    if vector_pnorm(h, PNorm::One) <= mu {
        return h.to_vec();
    }
    let mut mags: Vec<f64> = h.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, m) in mags.iter().enumerate() {
        cumsum += m;
        let candidate = (cumsum - mu) / (j + 1) as f64;
        if m - candidate > 0.0 {
            theta = candidate;
        }
    }
    h.iter()
        .map(|x| x.signum() * (x.abs() - theta).max(0.0))
        .collect()
}

#[test]
fn criterion_3_procrustes_optimality() {
    let mut rng = SeededRng::new(303);
    let mut worst_ortho = 0.0f64;
    let mut worst_excess = f64::NEG_INFINITY;
    for _ in 0..100 {
        let x = DMatrix::from_fn(6, 3, |_, _| rng.normal());
        let projected = trainer::project_to_orthonormal(std::slice::from_ref(&x)).unwrap();
        let f = &projected.blocks[0];
        worst_ortho = worst_ortho.max(iscb::types::orthonormality_deviation(f));
        let ours = (f - &x).norm();
        for _ in 0..1000 {
            let candidate = DMatrix::from_fn(6, 3, |_, _| rng.normal()).qr().q();
            worst_excess = worst_excess.max(ours - (&candidate - &x).norm());
        }
    }
    criterion(
        3,
        "procrustes optimality",
        worst_excess <= 1e-9 && worst_ortho <= 1e-10,
        format!("worst candidate excess {worst_excess:.3e}, orthonormality {worst_ortho:.3e}"),
    );
}

#[test]
fn criterion_4_gradient_correctness() {
    let mut rng = SeededRng::new(404);
    let mut worst_rel = 0.0f64;
    for _ in 0..20 {
        // C = 2, d = 6, s = 2, N = 8
        let y = DMatrix::from_fn(6, 8, |_, _| rng.normal());
        let pinv = pseudo_inverse(&y).unwrap();
        let ghat = DMatrix::from_fn(4, 8, |_, _| rng.normal());
        let g0 = DMatrix::from_fn(4, 8, |_, _| rng.normal());
        let analytic = response_gradient(&g0, &ghat, &pinv);
        let h = 1e-6;
        let mut fd = DMatrix::zeros(4, 8);
        for r in 0..4 {
            for c in 0..8 {
                let mut plus = g0.clone();
                plus[(r, c)] += h;
                let mut minus = g0.clone();
                minus[(r, c)] -= h;
                fd[(r, c)] = (response_objective(&plus, &ghat, &pinv)
                    - response_objective(&minus, &ghat, &pinv))
                    / (2.0 * h);
            }
        }
        worst_rel = worst_rel.max((&fd - &analytic).norm() / analytic.norm());
    }
    criterion(
        4,
        "gradient correctness",
        worst_rel < 1e-5,
        format!("worst relative error {worst_rel:.3e}"),
    );
}

#[test]
fn criterion_5_grassmann_bound_values() {
    let seven = grassmann_bound(7, 700, None);
    let one = grassmann_bound(1, 700, None);
    criterion(
        5,
        "grassmann bound",
        seven == 0.1 && (one - 0.0378).abs() <= 5e-4,
        format!("sqrt(7/700) = {seven}, sqrt(1/700) = {one}"),
    );
}

#[test]
fn criterion_6_planted_recovery() {
    let started = Instant::now();
    let spec = SyntheticSpec {
        classes: 5,
        dim: 40,
        per_class: 12,
        rank: 3,
        coefficient_model: CoefficientModel::Gaussian,
        noise_sigma: 0.0,
        subspace_coherence: 0.0,
        seed: 606,
    };
    let (train_set, _, planted) = generate_synthetic(&spec).unwrap();
    let normalized = normalize_columns(&train_set).unwrap();
    let (reduction, reduced) = qr_reduce(&normalized).unwrap();
    let cfg = TrainConfig::new(PNorm::Two, 3);
    let (bank, report) = train(&reduced, &cfg).unwrap();
    let lifted = lift_features(&reduction, &bank).unwrap();
    let mut worst_projector = 0.0f64;
    for i in 0..5 {
        let learned = lifted.block(i) * lifted.block(i).transpose();
        let truth = planted.block(i) * planted.block(i).transpose();
        worst_projector = worst_projector.max((learned - truth).norm());
    }
    let elapsed = started.elapsed();
    criterion(
        6,
        "planted recovery",
        report.best_distance <= 1e-6
            && worst_projector <= 1e-4
            && elapsed < Duration::from_secs(30),
        format!(
            "best distance {:.3e}, worst projector distance {worst_projector:.3e}, elapsed {elapsed:?}",
            report.best_distance
        ),
    );
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_iscb")
}

fn run_ok(args: &[&str]) -> String {
    let output = Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout).expect("utf-8 stdout")
}

fn parse_kv(stdout: &str, key: &str) -> f64 {
    stdout
        .lines()
        .flat_map(|line| line.split_whitespace())
        .find_map(|field| field.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("missing {key}= in output:\n{stdout}"))
        .parse()
        .expect("numeric value")
}

fn nn_accuracy(train_csv: &Path, test_csv: &Path) -> f64 {
    let train_set = iscb::io::load_csv(train_csv).unwrap();
    let test_set = iscb::io::load_csv(test_csv).unwrap();
    let map = LinearFeatureMap::identity(train_set.dim());
    let mut correct = 0;
    let mut total = 0;
    for (i, block) in test_set.classes().iter().enumerate() {
        for k in 0..block.ncols() {
            let y = block.column(k).into_owned();
            let prediction = classifier::nn_classify(&train_set, &map, &y).unwrap();
            if prediction.label == test_set.labels()[i] {
                correct += 1;
            }
            total += 1;
        }
    }
    correct as f64 / total as f64
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("iscb-acceptance-{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn criterion_7_end_to_end_accuracy() {
    let started = Instant::now();
    let dir = temp_dir("e2e");
    let train_csv = dir.join("train.csv");
    let test_csv = dir.join("test.csv");
    let model = dir.join("model.iscb");
    run_ok(&[
        "synth",
        "--classes", "10",
        "--dim", "64",
        "--per-class", "40",
        "--s", "3",
        "--coeff", "gaussian",
        "--noise", "0.05",
        "--coherence", "0.9",
        "--seed", "7",
        "--out-train", train_csv.to_str().unwrap(),
        "--out-test", test_csv.to_str().unwrap(),
    ]);
    run_ok(&[
        "train",
        "--data", train_csv.to_str().unwrap(),
        "--p", "2",
        "--s", "3",
        "--mu-fraction", "0.01",
        "--seed", "7",
        "--out", model.to_str().unwrap(),
    ]);
    let stdout = run_ok(&[
        "evaluate",
        "--model", model.to_str().unwrap(),
        "--data", test_csv.to_str().unwrap(),
    ]);
    let accuracy = parse_kv(&stdout, "accuracy");
    let baseline = nn_accuracy(&train_csv, &test_csv);
    let elapsed = started.elapsed();
    criterion(
        7,
        "end-to-end synthetic accuracy",
        accuracy >= 0.95 && accuracy > baseline && elapsed < Duration::from_secs(60),
        format!("accuracy {accuracy}, nn baseline {baseline}, elapsed {elapsed:?}"),
    );
}

#[test]
fn criterion_8_model_selection_direction() {
    let pipeline = |model: CoefficientModel, p: PNorm, seed: u64| -> f64 {
        let spec = SyntheticSpec {
            classes: 6,
            dim: 64,
            per_class: 30,
            rank: 8,
            coefficient_model: model,
            noise_sigma: 0.15,
            subspace_coherence: 0.3,
            seed,
        };
        let (train_set, test_set, _) = generate_synthetic(&spec).unwrap();
        let normalized = normalize_columns(&train_set).unwrap();
        let (reduction, reduced) = qr_reduce(&normalized).unwrap();
        let mut cfg = TrainConfig::new(p, 8);
        cfg.mu_fraction = 0.05;
        cfg.seed = seed;
        let (bank, _) = train(&reduced, &cfg).unwrap();
        let lifted = lift_features(&reduction, &bank).unwrap();
        classifier::evaluate(&lifted, &test_set).unwrap().accuracy
    };
    let mean = |model: CoefficientModel, p: PNorm| -> f64 {
        (1u64..=5).map(|seed| pipeline(model, p, seed)).sum::<f64>() / 5.0
    };
    let sparse_inf = mean(CoefficientModel::Sparse, PNorm::Inf);
    let sparse_one = mean(CoefficientModel::Sparse, PNorm::One);
    let flat_one = mean(CoefficientModel::Flat, PNorm::One);
    let flat_inf = mean(CoefficientModel::Flat, PNorm::Inf);
    criterion(
        8,
        "model-selection direction",
        sparse_inf >= sparse_one && flat_one >= flat_inf,
        format!(
            "sparse: p=inf {sparse_inf:.4} vs p=1 {sparse_one:.4}; \
             flat: p=1 {flat_one:.4} vs p=inf {flat_inf:.4}"
        ),
    );
}

#[test]
fn criterion_9_pipeline_determinism() {
    let run_pipeline = |dir: &Path| -> (Vec<u8>, String, Vec<u8>) {
        let train_csv = dir.join("train.csv");
        let test_csv = dir.join("test.csv");
        let model = dir.join("model.iscb");
        let predictions = dir.join("predictions.csv");
        run_ok(&[
            "synth",
            "--classes", "4",
            "--dim", "24",
            "--per-class", "10",
            "--s", "2",
            "--coeff", "gaussian",
            "--noise", "0.1",
            "--coherence", "0.2",
            "--seed", "99",
            "--out-train", train_csv.to_str().unwrap(),
            "--out-test", test_csv.to_str().unwrap(),
        ]);
        run_ok(&[
            "train",
            "--data", train_csv.to_str().unwrap(),
            "--p", "1",
            "--s", "2",
            "--mu-fraction", "0.03",
            "--seed", "99",
            "--out", model.to_str().unwrap(),
        ]);
        let eval_stdout = run_ok(&[
            "evaluate",
            "--model", model.to_str().unwrap(),
            "--data", test_csv.to_str().unwrap(),
        ]);
        run_ok(&[
            "classify",
            "--model", model.to_str().unwrap(),
            "--data", test_csv.to_str().unwrap(),
            "--out", predictions.to_str().unwrap(),
        ]);
        (
            std::fs::read(&model).unwrap(),
            eval_stdout,
            std::fs::read(&predictions).unwrap(),
        )
    };
    let first = run_pipeline(&temp_dir("det-a"));
    let second = run_pipeline(&temp_dir("det-b"));
    criterion(
        9,
        "pipeline determinism",
        first == second,
        "two identical runs produced different model or evaluation bytes".into(),
    );
}

#[test]
fn criterion_10_qr_reduction_transparency() {
    let mut mismatches = 0usize;
    let mut compared = 0usize;
    for seed in 1u64..=5 {
        // zero noise keeps every test signal inside span(train)
        let spec = SyntheticSpec {
            classes: 4,
            dim: 30,
            per_class: 12,
            rank: 2,
            coefficient_model: CoefficientModel::Gaussian,
            noise_sigma: 0.0,
            subspace_coherence: 0.0,
            seed: 1000 + seed,
        };
        let (train_set, test_set, _) = generate_synthetic(&spec).unwrap();
        let normalized = normalize_columns(&train_set).unwrap();
        let mut cfg = TrainConfig::new(PNorm::Two, 2);
        cfg.mu_fraction = 0.02;

        // pipeline A: train directly in the ambient space
        let (direct_bank, _) = train(&normalized, &cfg).unwrap();
        // pipeline B: reduce, train, lift back
        let (reduction, reduced) = qr_reduce(&normalized).unwrap();
        let (reduced_bank, _) = train(&reduced, &cfg).unwrap();
        let lifted = lift_features(&reduction, &reduced_bank).unwrap();

        for block in test_set.classes() {
            for k in 0..block.ncols() {
                let y: DVector<f64> = block.column(k).into_owned();
                let a = classifier::classify(&direct_bank, &y).unwrap();
                let b = classifier::classify(&lifted, &y).unwrap();
                compared += 1;
                if a.label != b.label {
                    mismatches += 1;
                }
            }
        }
    }
    criterion(
        10,
        "qr-reduction transparency",
        mismatches == 0 && compared > 0,
        format!("{mismatches} label mismatches out of {compared} signals"),
    );
}
