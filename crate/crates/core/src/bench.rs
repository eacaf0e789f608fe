//! Analytic test functions with reference values, and a replicated-trial
//! driver that measures how well each regression method recovers them.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{run_lasso_cv, Method};
use crate::gsa::{aggregate, error_metrics, index_name, mc_sobol_oracle, sobol_indices, SensitivityReport};
use crate::measures::{sample_design, Distribution, SamplingMethod};
use crate::pdd::{design_matrix_for, enumerate_basis, BasisSet, PddModel};
use crate::regress::{DmorphConfig, DmorphTrace, Manifold};

pub const ISHIGAMI_A: f64 = 7.0;
pub const ISHIGAMI_B: f64 = 0.1;

/// `sin x1 + a sin^2 x2 + b x3^4 sin x1`.
pub fn ishigami(x: &[f64], a: f64, b: f64) -> f64 {
    let s1 = x[0].sin();
    let s2 = x[1].sin();
    s1 + a * s2 * s2 + b * x[2].powi(4) * s1
}

/// Closed-form mean, standard deviation and every first- and second-order
/// index of the Ishigami function on `U[-pi, pi]^3`.
pub fn ishigami_reference(a: f64, b: f64) -> Reference {
    let pi4 = PI.powi(4);
    let pi8 = PI.powi(8);
    let v1 = 0.5 * (1.0 + b * pi4 / 5.0).powi(2);
    let v2 = a * a / 8.0;
    let v13 = 8.0 * b * b * pi8 / 225.0;
    let var = a * a / 8.0 + b * pi4 / 5.0 + b * b * pi8 / 18.0 + 0.5;
    Reference::new(vec![
        ("mean".into(), a / 2.0),
        ("std".into(), var.sqrt()),
        (index_name("S", &[0]), v1 / var),
        (index_name("S", &[1]), v2 / var),
        (index_name("S", &[2]), 0.0),
        (index_name("S", &[0, 1]), 0.0),
        (index_name("S", &[0, 2]), v13 / var),
        (index_name("S", &[1, 2]), 0.0),
    ])
}

/// Coefficients of the Oakley-O'Hagan function `a1'x + a2' sin x + a3' cos x + x'Mx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OakleyCoefficients {
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    pub a3: Vec<f64>,
    pub m: Vec<Vec<f64>>,
}

const OAKLEY_ASSET: &str = include_str!("../assets/oakley_ohagan.json");

impl OakleyCoefficients {
    /// The published 15-input coefficient set bundled with the crate.
    pub fn builtin() -> Self {
        Self::from_json(OAKLEY_ASSET).expect("bundled coefficient asset is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: OakleyCoefficients =
            serde_json::from_str(text).map_err(|e| Error::Asset(format!("coefficient file: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Asset(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn zeros(dims: usize) -> Self {
        OakleyCoefficients {
            a1: vec![0.0; dims],
            a2: vec![0.0; dims],
            a3: vec![0.0; dims],
            m: vec![vec![0.0; dims]; dims],
        }
    }

    pub fn dims(&self) -> usize {
        self.a1.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a1.len();
        if n == 0 {
            return Err(Error::Asset("coefficient vectors are empty".into()));
        }
        if self.a2.len() != n || self.a3.len() != n {
            return Err(Error::Asset(format!(
                "coefficient vectors have lengths {}, {}, {}",
                n,
                self.a2.len(),
                self.a3.len()
            )));
        }
        if self.m.len() != n || self.m.iter().any(|row| row.len() != n) {
            return Err(Error::Asset(format!("quadratic coefficients must form a {n}x{n} matrix")));
        }
        let all = self.a1.iter().chain(&self.a2).chain(&self.a3).chain(self.m.iter().flatten());
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::Asset("coefficients must be finite".into()));
        }
        Ok(())
    }
}

pub fn oakley_ohagan(x: &[f64], c: &OakleyCoefficients) -> f64 {
    let mut y = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        y += c.a1[i] * xi + c.a2[i] * xi.sin() + c.a3[i] * xi.cos();
        let row: f64 = c.m[i].iter().zip(x).map(|(m, xj)| m * xj).sum();
        y += xi * row;
    }
    y
}

/// Named reference values (`mean`, `std`, `S{..}`) a study is scored against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub values: Vec<(String, f64)>,
}

impl Reference {
    pub fn new(values: Vec<(String, f64)>) -> Self {
        Reference { values }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    fn from_report(report: &SensitivityReport) -> Self {
        let mut values = vec![("mean".to_string(), report.mean), ("std".to_string(), report.std)];
        values.extend(report.all_indices().into_iter().map(|(k, v)| (index_name("S", &k), v)));
        Reference { values }
    }
}

pub type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct Benchmark {
    pub name: String,
    pub distributions: Vec<Distribution>,
    pub evaluator: Evaluator,
    pub reference: Reference,
}

impl fmt::Debug for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Benchmark")
            .field("name", &self.name)
            .field("dims", &self.dims())
            .field("reference", &self.reference)
            .finish_non_exhaustive()
    }
}

impl Benchmark {
    pub fn ishigami(a: f64, b: f64) -> Self {
        let d = Distribution::uniform(-PI, PI).expect("valid bounds");
        Benchmark {
            name: "ishigami".into(),
            distributions: vec![d; 3],
            evaluator: Arc::new(move |x: &[f64]| ishigami(x, a, b)),
            reference: ishigami_reference(a, b),
        }
    }

    /// Oakley-O'Hagan on standard normal inputs. No closed form is used:
    /// mean, std and first-order indices come from the Monte Carlo oracle.
    pub fn oakley_ohagan(coeffs: OakleyCoefficients, reference_samples: usize, reference_seed: u64) -> Result<Self> {
        coeffs.validate()?;
        let dists = vec![Distribution::standard_normal(); coeffs.dims()];
        let coeffs = Arc::new(coeffs);
        let evaluator: Evaluator = {
            let c = Arc::clone(&coeffs);
            Arc::new(move |x: &[f64]| oakley_ohagan(x, &c))
        };
        let oracle = mc_sobol_oracle(|x| evaluator(x), &dists, reference_samples, reference_seed)?;
        Ok(Benchmark {
            name: "oakley_ohagan".into(),
            distributions: dists,
            evaluator,
            reference: Reference::from_report(&oracle),
        })
    }

    pub fn dims(&self) -> usize {
        self.distributions.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.evaluator)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkKind {
    Ishigami,
    #[serde(alias = "oakley")]
    OakleyOhagan,
}

fn default_method() -> Method {
    Method::Dmorph
}

fn default_reference_samples() -> usize {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub benchmark: BenchmarkKind,
    /// Interaction order `S`.
    pub variate: usize,
    /// Polynomial order `m`.
    pub order: usize,
    /// Training samples per trial.
    pub samples: usize,
    pub trials: usize,
    #[serde(default = "default_method")]
    pub method: Method,
    /// D-MORPH blend weights to run; empty means `dmorph.lambda` alone.
    #[serde(default)]
    pub lambdas: Vec<f64>,
    /// Iterations at which D-MORPH estimates are scored; empty means
    /// `dmorph.max_iterations` alone.
    #[serde(default)]
    pub checkpoints: Vec<usize>,
    #[serde(default)]
    pub dmorph: DmorphConfig,
    #[serde(default)]
    pub seed_base: u64,
    /// Oracle sample count for benchmarks without closed-form references.
    #[serde(default = "default_reference_samples")]
    pub reference_samples: usize,
    #[serde(default)]
    pub reference_seed: u64,
    /// Overrides the bundled Oakley-O'Hagan coefficients.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<PathBuf>,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.samples == 0 {
            return Err(Error::Config("samples must be at least 1".into()));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(Error::Config(format!("lambda must lie in [0, 1], got {l}")));
        }
        self.dmorph.validate()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        if self.lambdas.is_empty() {
            vec![self.dmorph.lambda]
        } else {
            self.lambdas.clone()
        }
    }

    pub fn checkpoints(&self) -> Vec<usize> {
        let mut c = if self.checkpoints.is_empty() {
            vec![self.dmorph.max_iterations]
        } else {
            self.checkpoints.clone()
        };
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn benchmark(&self) -> Result<Benchmark> {
        match self.benchmark {
            BenchmarkKind::Ishigami => Ok(Benchmark::ishigami(ISHIGAMI_A, ISHIGAMI_B)),
            BenchmarkKind::OakleyOhagan => {
                let coeffs = match &self.coefficients {
                    Some(p) => OakleyCoefficients::from_path(p)?,
                    None => OakleyCoefficients::builtin(),
                };
                Benchmark::oakley_ohagan(coeffs, self.reference_samples, self.reference_seed)
            }
        }
    }
}

/// One row of the summary table: a method, and for D-MORPH a blend weight
/// and iteration count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowKey {
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iteration: Option<usize>,
}

impl RowKey {
    fn plain(method: Method) -> Self {
        RowKey {
            method,
            lambda: None,
            iteration: None,
        }
    }

    pub fn label(&self) -> String {
        let method = match self.method {
            Method::LeastSquares => "least_squares",
            Method::Lasso => "lasso",
            Method::Dmorph => "dmorph",
        };
        match (self.lambda, self.iteration) {
            (Some(l), Some(i)) => format!("{method}(lambda={l},iteration={i})"),
            _ => method.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialEstimate {
    pub key: RowKey,
    pub report: SensitivityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lasso_penalty: Option<f64>,
    pub estimates: Vec<TrialEstimate>,
    /// D-MORPH convergence history, one entry per blend weight.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub traces: Vec<DmorphTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityError {
    pub name: String,
    pub reference: f64,
    pub mean_absolute_error: f64,
    pub mean_relative_error: Option<f64>,
}

impl QuantityError {
    /// MRE when the reference is nonzero, MAE otherwise.
    pub fn headline(&self) -> f64 {
        self.mean_relative_error.unwrap_or(self.mean_absolute_error)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub key: RowKey,
    pub errors: Vec<QuantityError>,
    /// Trial-averaged report with per-trial values.
    pub report: SensitivityReport,
}

impl SummaryRow {
    pub fn error(&self, name: &str) -> Option<&QuantityError> {
        self.errors.iter().find(|e| e.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOutcome {
    pub benchmark: String,
    pub basis_size: usize,
    pub reference: Reference,
    pub trials: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
}

impl StudyOutcome {
    pub fn row(&self, method: Method, lambda: Option<f64>, iteration: Option<usize>) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.key.method == method && r.key.lambda == lambda && r.key.iteration == iteration)
    }

    /// Summary as CSV: one row per method/iteration, an MRE and an MAE
    /// column per reference quantity (MRE left blank where undefined).
    pub fn write_summary_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let fmt_err = |e: csv::Error| Error::Format(format!("summary CSV: {e}"));
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["method".to_string(), "lambda".into(), "iteration".into()];
        for (name, _) in &self.reference.values {
            header.push(format!("mre_{name}"));
            header.push(format!("mae_{name}"));
        }
        w.write_record(&header).map_err(fmt_err)?;
        for row in &self.summary {
            let method = RowKey::plain(row.key.method).label();
            let mut rec = vec![
                method,
                row.key.lambda.map(|l| l.to_string()).unwrap_or_default(),
                row.key.iteration.map(|i| i.to_string()).unwrap_or_default(),
            ];
            for e in &row.errors {
                rec.push(e.mean_relative_error.map(|v| v.to_string()).unwrap_or_default());
                rec.push(e.mean_absolute_error.to_string());
            }
            w.write_record(&rec).map_err(fmt_err)?;
        }
        w.flush().map_err(|e| Error::Format(format!("summary CSV: {e}")))?;
        Ok(())
    }
}

/// Runs the study described by `cfg`, building its benchmark first.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyOutcome> {
    cfg.validate()?;
    let bench = cfg.benchmark()?;
    run_study_with(cfg, &bench)
}

/// Runs the study on an already-constructed benchmark, so expensive oracle
/// references can be shared between studies.
pub fn run_study_with(cfg: &StudyConfig, bench: &Benchmark) -> Result<StudyOutcome> {
    cfg.validate()?;
    let basis = enumerate_basis(bench.dims(), cfg.variate, cfg.order)?;
    let results: Vec<Result<TrialRecord>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, bench, &basis, t))
        .collect();
    // Report the lowest failing trial so errors do not depend on scheduling.
    let trials = results
        .into_iter()
        .enumerate()
        .map(|(t, r)| {
            r.map_err(|e| Error::Trial {
                trial: t,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let keys: Vec<RowKey> = trials[0].estimates.iter().map(|e| e.key).collect();
    let mut summary = Vec::with_capacity(keys.len());
    for (k, key) in keys.iter().enumerate() {
        let reports: Vec<SensitivityReport> = trials.iter().map(|t| t.estimates[k].report.clone()).collect();
        let report = aggregate(&reports)?;
        let mut errors = Vec::with_capacity(bench.reference.values.len());
        for (name, exact) in &bench.reference.values {
            let estimates = report
                .per_trial
                .get(name)
                .ok_or_else(|| Error::Shape(format!("estimate {name} is not available at this truncation")))?;
            let m = error_metrics(estimates, *exact)?;
            errors.push(QuantityError {
                name: name.clone(),
                reference: *exact,
                mean_absolute_error: m.mean_absolute_error,
                mean_relative_error: m.mean_relative_error,
            });
        }
        summary.push(SummaryRow {
            key: *key,
            errors,
            report,
        });
    }
    Ok(StudyOutcome {
        benchmark: bench.name.clone(),
        basis_size: basis.len(),
        reference: bench.reference.clone(),
        trials,
        summary,
    })
}

fn report_for(basis: &BasisSet, coefficients: &DVector<f64>, dists: &[Distribution]) -> Result<SensitivityReport> {
    let model = PddModel::new(basis.clone(), coefficients.iter().copied().collect(), dists.to_vec())?;
    Ok(sobol_indices(&model))
}

fn run_trial(cfg: &StudyConfig, bench: &Benchmark, basis: &BasisSet, trial: usize) -> Result<TrialRecord> {
    let seed = cfg.seed_base.wrapping_add(trial as u64);
    let dists = &bench.distributions;
    let x = sample_design(dists, cfg.samples, seed, SamplingMethod::LatinHypercube)?;
    let mut row = vec![0.0; x.ncols()];
    let b = DVector::from_fn(x.nrows(), |i, _| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = x[(i, j)];
        }
        bench.eval(&row)
    });
    let a: DMatrix<f64> = design_matrix_for(&x, dists, basis)?;

    let mut record = TrialRecord {
        trial,
        seed,
        lasso_penalty: None,
        estimates: Vec::new(),
        traces: Vec::new(),
    };
    match cfg.method {
        Method::LeastSquares => {
            let manifold = Manifold::new(&a, &b, cfg.dmorph.rank_tol)?;
            record.estimates.push(TrialEstimate {
                key: RowKey::plain(Method::LeastSquares),
                report: report_for(basis, manifold.start(), dists)?,
            });
        }
        Method::Lasso | Method::Dmorph => {
            let cv = run_lasso_cv(&a, &b, &cfg.dmorph)?;
            record.lasso_penalty = Some(cv.penalty);
            record.estimates.push(TrialEstimate {
                key: RowKey::plain(Method::Lasso),
                report: report_for(basis, &cv.fit.coefficients, dists)?,
            });
            if cfg.method == Method::Dmorph {
                let manifold = Manifold::new(&a, &b, cfg.dmorph.rank_tol)?;
                let checkpoints = cfg.checkpoints();
                let last = *checkpoints.last().expect("at least one checkpoint");
                for lambda in cfg.lambdas() {
                    let run_cfg = DmorphConfig {
                        lambda,
                        max_iterations: last,
                        ..cfg.dmorph.clone()
                    };
                    let mut captured: BTreeMap<usize, DVector<f64>> = BTreeMap::new();
                    let (final_c, trace) = manifold.sparse(&cv.fit.coefficients, &run_cfg, |i, c| {
                        if checkpoints.binary_search(&i).is_ok() {
                            let c = if run_cfg.enforce_fit { manifold.correct(c) } else { c.clone() };
                            captured.insert(i, c);
                        }
                    })?;
                    for &i in &checkpoints {
                        // Checkpoints past an early convergence reuse the final iterate.
                        let c = captured.get(&i).unwrap_or(&final_c);
                        record.estimates.push(TrialEstimate {
                            key: RowKey {
                                method: Method::Dmorph,
                                lambda: Some(lambda),
                                iteration: Some(i),
                            },
                            report: report_for(basis, c, dists)?,
                        });
                    }
                    record.traces.push(trace);
                }
            }
        }
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ishigami_values() {
        assert_eq!(ishigami(&[0.0, 0.0, 0.0], 7.0, 0.1), 0.0);
        assert_relative_eq!(ishigami(&[PI / 2.0, 0.0, 0.0], 7.0, 0.1), 1.0, epsilon = 1e-15);
        assert_relative_eq!(ishigami(&[0.0, PI / 2.0, 0.0], 7.0, 0.1), 7.0, epsilon = 1e-14);
    }

    #[test]
    fn ishigami_reference_identities() {
        let r = ishigami_reference(ISHIGAMI_A, ISHIGAMI_B);
        assert_eq!(r.get("mean"), Some(3.5));
        assert_relative_eq!(r.get("std").unwrap(), 3.720832, epsilon = 1e-6);
        assert_relative_eq!(r.get("S{1}").unwrap(), 0.313905, epsilon = 1e-6);
        assert_relative_eq!(r.get("S{2}").unwrap(), 0.442411, epsilon = 1e-6);
        assert_relative_eq!(r.get("S{1,3}").unwrap(), 0.243684, epsilon = 1e-6);
        for zero in ["S{3}", "S{1,2}", "S{2,3}"] {
            assert_eq!(r.get(zero), Some(0.0));
        }
        let sum = r.get("S{1}").unwrap() + r.get("S{2}").unwrap() + r.get("S{1,3}").unwrap();
        assert_relative_eq!(sum, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn oakley_at_origin() {
        let c = OakleyCoefficients::builtin();
        assert_eq!(c.dims(), 15);
        let x = [0.0; 15];
        assert_eq!(oakley_ohagan(&x, &OakleyCoefficients::zeros(15)), 0.0);
        assert_relative_eq!(oakley_ohagan(&x, &c), c.a3.iter().sum::<f64>(), epsilon = 1e-14);
    }

    #[test]
    fn oakley_quadratic_term() {
        let mut c = OakleyCoefficients::zeros(2);
        c.m = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        // x'Mx at (1, 1) sums the matrix.
        assert_eq!(oakley_ohagan(&[1.0, 1.0], &c), 10.0);
    }

    #[test]
    fn bad_assets() {
        assert!(matches!(OakleyCoefficients::from_json("{"), Err(Error::Asset(_))));
        let mut c = OakleyCoefficients::zeros(3);
        c.m.pop();
        let text = serde_json::to_string(&c).unwrap();
        assert!(matches!(OakleyCoefficients::from_json(&text), Err(Error::Asset(_))));
        assert!(matches!(
            OakleyCoefficients::from_path(Path::new("/nonexistent/coeffs.json")),
            Err(Error::Asset(_))
        ));
    }

    fn small_study(method: Method) -> StudyConfig {
        serde_json::from_value(serde_json::json!({
            "benchmark": "ishigami",
            "variate": 2,
            "order": 4,
            "samples": 30,
            "trials": 3,
            "method": method,
            "checkpoints": [0, 5],
            "dmorph": { "max_iterations": 5, "lasso": { "grid_size": 8 } },
            "seed_base": 9
        }))
        .unwrap()
    }

    #[test]
    fn study_layout_and_determinism() {
        let cfg = small_study(Method::Dmorph);
        let a = run_study(&cfg).unwrap();
        let b = run_study(&cfg).unwrap();
        assert_eq!(a, b);
        let labels: Vec<String> = a.summary.iter().map(|r| r.key.label()).collect();
        assert_eq!(
            labels,
            ["lasso", "dmorph(lambda=0.5,iteration=0)", "dmorph(lambda=0.5,iteration=5)"]
        );
        assert_eq!(a.trials.len(), 3);
        assert_eq!(a.trials[2].seed, 11);
        let mut csv_a = Vec::new();
        a.write_summary_csv(&mut csv_a).unwrap();
        let text = String::from_utf8(csv_a).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("method,lambda,iteration,mre_mean,mae_mean,mre_std"));
    }

    #[test]
    fn single_trial_error_is_absolute_difference() {
        let mut cfg = small_study(Method::LeastSquares);
        cfg.trials = 1;
        cfg.samples = 40;
        let out = run_study(&cfg).unwrap();
        let row = &out.summary[0];
        let est = out.trials[0].estimates[0].report.std;
        let e = row.error("std").unwrap();
        assert_eq!(e.mean_absolute_error, (out.reference.get("std").unwrap() - est).abs());
        assert!(row.error("S{3}").unwrap().mean_relative_error.is_none());
    }

    #[test]
    fn invalid_studies() {
        let mut cfg = small_study(Method::Lasso);
        cfg.trials = 0;
        assert!(matches!(run_study(&cfg), Err(Error::Config(_))));
        let mut cfg = small_study(Method::Lasso);
        cfg.lambdas = vec![1.5];
        assert!(matches!(run_study(&cfg), Err(Error::Config(_))));
        let mut cfg = small_study(Method::Lasso);
        cfg.samples = 3; // fewer rows than CV folds
        assert!(matches!(run_study(&cfg), Err(Error::Trial { trial: 0, .. })));
    }
}
