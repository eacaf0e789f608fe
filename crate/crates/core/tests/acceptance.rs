//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line with
//! the measured numbers (visible with `--nocapture`).

mod common;

use std::f64::consts::PI;
use std::sync::OnceLock;

use common::{constrained_qp, lasso_kkt_violation, least_norm_to, random_matrix, random_vector, rng};
use nalgebra::{DMatrix, DVector};
use pdd_gsa::bench::{
    ishigami, ishigami_reference, run_study_with, Benchmark, BenchmarkKind, OakleyCoefficients, StudyConfig,
    StudyOutcome, ISHIGAMI_A, ISHIGAMI_B,
};
use pdd_gsa::fit::{fit, Method};
use pdd_gsa::gsa::{index_name, mc_sobol_oracle, sobol_indices};
use pdd_gsa::measures::{sample_design, SamplingMethod};
use pdd_gsa::pdd::{enumerate_basis, write_csv};
use pdd_gsa::regress::{
    dmorph_initial, dmorph_original, dmorph_sparse, lasso, null_projector, pseudoinverse, DmorphConfig,
    ManifoldSolver,
};
use pdd_gsa::{Distribution, PddModel, TrainingSet};
use rand::Rng;

fn verdict(criterion: u32, ok: bool, detail: &str) {
    println!("criterion {criterion}: {} {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {criterion} failed: {detail}");
}

fn std_mre(outcome: &StudyOutcome, method: Method, lambda: Option<f64>, iteration: Option<usize>) -> f64 {
    outcome
        .row(method, lambda, iteration)
        .and_then(|r| r.error("std"))
        .and_then(|e| e.mean_relative_error)
        .expect("std row present")
}

#[test]
fn criterion_1_ishigami_dense_least_squares() {
    let dists = vec![Distribution::uniform(-PI, PI).unwrap(); 3];
    let basis = enumerate_basis(3, 2, 11).unwrap();
    assert_eq!(basis.len(), 199);
    let x = sample_design(&dists, 2000, 1, SamplingMethod::LatinHypercube).unwrap();
    let y = DVector::from_fn(2000, |i, _| ishigami(&[x[(i, 0)], x[(i, 1)], x[(i, 2)]], ISHIGAMI_A, ISHIGAMI_B));
    let ts = TrainingSet::new(x, y, dists).unwrap();
    let (model, diag) = fit(&ts, &basis, None, &DmorphConfig::default()).unwrap();
    assert_eq!(diag.method, Method::LeastSquares);
    let r = sobol_indices(&model);

    // Published values, cross-checked against the closed form.
    let published = [("mean", 3.5), ("std", 3.720832), ("S{1}", 0.313905), ("S{2}", 0.442411), ("S{1,3}", 0.243684)];
    let exact = ishigami_reference(ISHIGAMI_A, ISHIGAMI_B);
    for (name, v) in published {
        assert!((exact.get(name).unwrap() - v).abs() < 5e-6, "{name}");
    }

    let mut ok = true;
    let mut detail = String::new();
    for (name, target) in published {
        let got = match name {
            "mean" => r.mean,
            "std" => r.std,
            _ => r.table().into_iter().find(|(k, _)| k == name).unwrap().1,
        };
        let pass = if matches!(name, "mean" | "std") {
            (got / target - 1.0).abs() <= 0.01
        } else {
            (got - target).abs() <= 0.01
        };
        ok &= pass;
        detail += &format!("{name}={got:.6} ");
    }
    for vars in [&[2usize][..], &[0, 1], &[1, 2]] {
        let v = r.index(vars).unwrap();
        ok &= v <= 0.005;
        detail += &format!("{}={v:.2e} ", index_name("S", vars));
    }
    verdict(1, ok, &detail);
}

fn small_study() -> &'static StudyOutcome {
    static OUTCOME: OnceLock<StudyOutcome> = OnceLock::new();
    OUTCOME.get_or_init(|| {
        let cfg: StudyConfig = serde_json::from_value(serde_json::json!({
            "benchmark": "ishigami", "variate": 2, "order": 11, "samples": 59, "trials": 30,
            "checkpoints": [0, 30], "seed_base": 1000,
            "dmorph": { "lambda": 0.5, "epsilon": 1e-6, "max_iterations": 30 }
        }))
        .unwrap();
        assert_eq!(cfg.benchmark, BenchmarkKind::Ishigami);
        run_study_with(&cfg, &Benchmark::ishigami(ISHIGAMI_A, ISHIGAMI_B)).unwrap()
    })
}

#[test]
fn criterion_2_sparse_dmorph_beats_lasso_at_59_samples() {
    let s = small_study();
    let dmorph = std_mre(s, Method::Dmorph, Some(0.5), Some(30));
    let lasso = std_mre(s, Method::Lasso, None, None);
    verdict(
        2,
        dmorph <= 0.14 && dmorph < lasso,
        &format!("MRE(std): dmorph@30={dmorph:.4} lasso={lasso:.4} (limit 0.14)"),
    );
}

#[test]
fn criterion_3_iterations_reduce_std_error() {
    let s = small_study();
    let first = std_mre(s, Method::Dmorph, Some(0.5), Some(0));
    let last = std_mre(s, Method::Dmorph, Some(0.5), Some(30));
    verdict(3, last < first, &format!("MRE(std): iteration 0={first:.4} iteration 30={last:.4}"));
}

#[test]
fn criterion_4_oakley_trend_with_sample_size() {
    let bench = Benchmark::oakley_ohagan(OakleyCoefficients::builtin(), 1_000_000, 0).unwrap();
    let lambdas = [0.2, 0.6, 1.0];
    let study = |m: usize| {
        let cfg: StudyConfig = serde_json::from_value(serde_json::json!({
            "benchmark": "oakley_ohagan", "variate": 2, "order": 5, "samples": m, "trials": 20,
            "lambdas": lambdas, "checkpoints": [30], "seed_base": 2000,
            "dmorph": { "solver": "range_space" }
        }))
        .unwrap();
        run_study_with(&cfg, &bench).unwrap()
    };
    let small = study(337);
    assert_eq!(small.basis_size, 1126);
    let large = study(788);

    let mut ok = true;
    let lasso_small = std_mre(&small, Method::Lasso, None, None);
    let lasso_large = std_mre(&large, Method::Lasso, None, None);
    ok &= lasso_large < lasso_small;
    let mut detail = format!("lasso {lasso_small:.4}->{lasso_large:.4}");
    for l in lambdas {
        let a = std_mre(&small, Method::Dmorph, Some(l), Some(30));
        let b = std_mre(&large, Method::Dmorph, Some(l), Some(30));
        ok &= a < lasso_small && b < a;
        detail += &format!("; dmorph(lambda={l}) {a:.4}->{b:.4}");
    }
    verdict(4, ok, &detail);
}

#[test]
fn criterion_5_numerical_properties() {
    let mut g = rng(5);
    let mut worst = [0.0f64; 8];
    for _ in 0..20 {
        let (rows, cols) = (g.random_range(2..9), g.random_range(2..14));
        let a = random_matrix(&mut g, rows, cols);
        let (p, _) = pseudoinverse(&a, None).unwrap();
        let ap = &a * &p;
        let pa = &p * &a;
        let mp = [
            (&ap * &a - &a).norm(),
            (&pa * &p - &p).norm(),
            (&ap - ap.transpose()).norm(),
            (&pa - pa.transpose()).norm(),
        ];
        worst[0] = worst[0].max(mp.into_iter().fold(0.0, f64::max));
        let phi = null_projector(&a, &p).unwrap();
        worst[1] = worst[1].max((&phi * &phi - &phi).norm()).max((&phi - phi.transpose()).norm());

        let b = random_vector(&mut g, rows);
        let k = g.random_range(0.01..2.0);
        worst[2] = worst[2].max(lasso_kkt_violation(&a, &b, &lasso(&a, &b, k).unwrap().coefficients, k));
    }
    for _ in 0..10 {
        let a = random_matrix(&mut g, 10, 40);
        let b = random_vector(&mut g, 10);
        let c0 = lasso(&a, &b, 0.5).unwrap().coefficients;
        worst[3] = worst[3].max((dmorph_initial(&a, &b, &c0, None).unwrap() - least_norm_to(&a, &b, &c0)).amax());
        for solver in [ManifoldSolver::Svd, ManifoldSolver::RangeSpace] {
            let cfg = DmorphConfig { lambda: g.random_range(0.0..=1.0), solver, ..Default::default() };
            let (c, _) = dmorph_sparse(&a, &b, &c0, &cfg).unwrap();
            worst[4] = worst[4].max((&a * &c - &b).norm() / b.norm());
        }

        let (rows, cols) = (g.random_range(1..4), g.random_range(4..8));
        let a = random_matrix(&mut g, rows, cols);
        let b = random_vector(&mut g, rows);
        let r = random_matrix(&mut g, cols, cols);
        let d = &r * r.transpose() + DMatrix::identity(cols, cols) * 0.5;
        worst[5] = worst[5].max((dmorph_original(&a, &b, &d, None).unwrap() - constrained_qp(&d, &a, &b)).amax());
    }
    for _ in 0..20 {
        let basis = enumerate_basis(4, 2, 3).unwrap();
        let c: Vec<f64> = (0..basis.len()).map(|_| g.random_range(-2.0..2.0)).collect();
        let dists = vec![Distribution::uniform(-1.0, 2.0).unwrap(); 4];
        let model = PddModel::new(basis.clone(), c.clone(), dists.clone()).unwrap();
        let r = sobol_indices(&model);
        let sum: f64 = r.all_indices().iter().map(|(_, v)| v).sum();
        worst[6] = worst[6].max((sum - 1.0).abs());
        let scaled: Vec<f64> = c.iter().enumerate().map(|(i, v)| if i == 0 { v + 3.0 } else { v * 7.5 }).collect();
        let rs = sobol_indices(&PddModel::new(basis, scaled, dists).unwrap());
        for ((_, u), (_, v)) in r.all_indices().iter().zip(rs.all_indices()) {
            worst[7] = worst[7].max((u - v).abs());
        }
    }
    let limits = [1e-8, 1e-8, 1e-6, 1e-6, 1e-6, 1e-6, 1e-10, 1e-12];
    let names = ["moore-penrose", "projector", "lasso-kkt", "initial", "manifold", "original", "normalization", "scaling"];
    let ok = worst.iter().zip(limits).all(|(w, l)| *w <= l);
    let detail: Vec<String> = names.iter().zip(worst).map(|(n, w)| format!("{n}={w:.1e}")).collect();
    verdict(5, ok, &detail.join(" "));
}

/// Five-input stand-in: one linear, one quadratic, one pairwise product,
/// one weak linear input and one inert input.
fn stand_in(x: &[f64]) -> f64 {
    2.0 * x[0] + x[1] * x[1] + 1.5 * x[2] * x[3] + 0.3 * x[3]
}

#[test]
fn criterion_6_csv_round_trip_on_five_input_stand_in() {
    println!("criterion 6: the expensive-simulator study is replaced by criterion 4 and this CSV round trip");
    let dists = vec![Distribution::uniform(-1.0, 1.0).unwrap(); 5];
    let basis = enumerate_basis(5, 2, 4).unwrap();
    let m = 60;
    assert!(m < basis.len());
    let x = sample_design(&dists, m, 6, SamplingMethod::LatinHypercube).unwrap();
    let y = DVector::from_fn(m, |i, _| stand_in(&x.row(i).iter().copied().collect::<Vec<_>>()));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("training.csv");
    write_csv(std::fs::File::create(&path).unwrap(), &x, Some(&y)).unwrap();
    let ts = TrainingSet::from_csv_path(&path, dists.clone()).unwrap();
    assert_eq!(ts.inputs(), &x);
    assert_eq!(ts.outputs(), &y);

    let (model, diag) = fit(&ts, &basis, None, &DmorphConfig::default()).unwrap();
    assert_eq!(diag.method, Method::Dmorph);
    let r = sobol_indices(&model);
    let oracle = mc_sobol_oracle(stand_in, &dists, 200_000, 6).unwrap();
    let mut ok = (r.std / oracle.std - 1.0).abs() < 0.02;
    let mut detail = format!("std={:.4}/{:.4}", r.std, oracle.std);
    for i in 0..5 {
        let (got, want) = (r.total_effect[&i], oracle.total_effect[&i]);
        ok &= (got - want).abs() < 0.02;
        detail += &format!(" T{}={got:.3}/{want:.3}", i + 1);
    }
    verdict(6, ok, &detail);
}
