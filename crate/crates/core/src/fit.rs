//! Budget-driven fitting: least squares when the system is overdetermined,
//! cross-validated Lasso followed by sparse D-MORPH otherwise.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pdd::{design_matrix, BasisSet, PddModel, TrainingSet};
use crate::regress::{
    default_lasso_grid, lasso_cv, CostRecord, DmorphConfig, LassoCvResult, Manifold,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[serde(alias = "ls")]
    LeastSquares,
    Lasso,
    Dmorph,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ls" | "least_squares" => Ok(Method::LeastSquares),
            "lasso" => Ok(Method::Lasso),
            "dmorph" => Ok(Method::Dmorph),
            other => Err(Error::Config(format!("unknown method `{other}` (expected ls, lasso or dmorph)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitPath {
    Overdetermined,
    Underdetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub path: FitPath,
    pub method: Method,
    pub samples: usize,
    pub basis_size: usize,
    pub residual_norm: f64,
    pub relative_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lasso_penalty: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lasso_converged: Option<bool>,
    pub iterations: usize,
    pub change_history: Vec<f64>,
    pub cost_history: Vec<CostRecord>,
}

/// Chooses the method from the sample budget when `method` is `None`.
pub fn select_method(samples: usize, basis_size: usize, method: Option<Method>) -> Method {
    method.unwrap_or(if samples >= basis_size {
        Method::LeastSquares
    } else {
        Method::Dmorph
    })
}

pub fn run_lasso_cv(a: &DMatrix<f64>, b: &DVector<f64>, cfg: &DmorphConfig) -> Result<LassoCvResult> {
    let grid = default_lasso_grid(a, b, cfg.lasso.grid_size);
    lasso_cv(a, b, &grid, cfg.lasso.folds, cfg.lasso.seed)
}

/// Solves `A c = b` with the given method.
pub fn fit_system(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    method: Method,
    cfg: &DmorphConfig,
) -> Result<(DVector<f64>, FitDiagnostics)> {
    cfg.validate()?;
    let (m, l) = a.shape();
    let path = if m >= l {
        FitPath::Overdetermined
    } else {
        FitPath::Underdetermined
    };
    let mut diag = FitDiagnostics {
        path,
        method,
        samples: m,
        basis_size: l,
        residual_norm: 0.0,
        relative_residual: 0.0,
        lasso_penalty: None,
        lasso_converged: None,
        iterations: 0,
        change_history: Vec::new(),
        cost_history: Vec::new(),
    };
    let coefficients = match method {
        Method::LeastSquares => {
            let manifold = Manifold::new(a, b, cfg.rank_tol)?;
            manifold.start().clone()
        }
        Method::Lasso => {
            let cv = run_lasso_cv(a, b, cfg)?;
            diag.lasso_penalty = Some(cv.penalty);
            diag.lasso_converged = Some(cv.fit.converged);
            cv.fit.coefficients
        }
        Method::Dmorph => {
            let cv = run_lasso_cv(a, b, cfg)?;
            diag.lasso_penalty = Some(cv.penalty);
            diag.lasso_converged = Some(cv.fit.converged);
            let manifold = Manifold::new(a, b, cfg.rank_tol)?;
            let (c, trace) = manifold.sparse(&cv.fit.coefficients, cfg, |_, _| {})?;
            diag.iterations = trace.iterations;
            diag.change_history = trace.change_history;
            diag.cost_history = trace.cost_history;
            c
        }
    };
    diag.residual_norm = (a * &coefficients - b).norm();
    diag.relative_residual = if b.norm() > 0.0 {
        diag.residual_norm / b.norm()
    } else {
        diag.residual_norm
    };
    Ok((coefficients, diag))
}

/// Fits a PDD surrogate to `ts` on `basis`.
pub fn fit(
    ts: &TrainingSet,
    basis: &BasisSet,
    method: Option<Method>,
    cfg: &DmorphConfig,
) -> Result<(PddModel, FitDiagnostics)> {
    if ts.dims() != basis.dims() {
        return Err(Error::Shape(format!(
            "training data has {} inputs, basis has {}",
            ts.dims(),
            basis.dims()
        )));
    }
    let (a, b) = design_matrix(ts, basis)?;
    let method = select_method(a.nrows(), a.ncols(), method);
    let (c, diag) = fit_system(&a, &b, method, cfg)?;
    let model = PddModel::new(basis.clone(), c.iter().copied().collect(), ts.distributions().to_vec())?;
    Ok((model, diag))
}
