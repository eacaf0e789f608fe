//! Coefficient solvers for the PDD regression system `A c = b`.
//!
//! * [`least_squares`]: minimum-norm least squares through the pseudoinverse.
//! * [`lasso`] / [`lasso_cv`]: cyclic coordinate descent on
//!   `|b - A c|^2 + k |c|_1`, with K-fold selection of `k`.
//! * [`dmorph_original`]: the homotopy limit that minimizes `a' D a` over the
//!   solution manifold `{a : A a = A A+ b}`.
//! * [`dmorph_initial`] and [`dmorph_sparse`]: the Lasso-anchored variant.
//!   The first projects the Lasso solution onto the manifold; the second
//!   repeatedly minimizes the reweighted distance to a blend of the Lasso
//!   solution and the running average of previous iterates.
//!
//! Every manifold solution is the `t -> inf` limit of
//! `da/dt = -Phi W a + Phi W g`, `a(0) = A+ b`. With the SVD
//! `Phi W = E diag(T_r, 0) F'`, that limit splits into the oblique projection
//! of `A+ b` onto `null(Phi W)` along `range(Phi W)` plus the complementary
//! projection of `g`:
//!
//! ```text
//! a(inf) = F_{L-r} (E_{L-r}' F_{L-r})^-1 E_{L-r}' A+ b
//!        + E_r (F_r' E_r)^-1 T_r^-1 E_r' Phi W g
//! ```

use std::cell::OnceCell;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Condition number above which a projection block is treated as singular.
pub const MAX_BLOCK_CONDITION: f64 = 1.0 / (1.0e3 * f64::EPSILON);

const LASSO_TOL: f64 = 1e-8;
const LASSO_MAX_SWEEPS: usize = 10_000;

/// Thin SVD `A = U diag(s) V'` with singular values in descending order.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v_t: DMatrix<f64>,
    pub rank: usize,
}

impl SvdFactors {
    pub fn compute(a: &DMatrix<f64>, rank_tol: Option<f64>) -> Result<Self> {
        check_finite(a, "matrix")?;
        let (rows, cols) = a.shape();
        if rows == 0 || cols == 0 {
            return Err(Error::Shape("cannot factor an empty matrix".into()));
        }
        let (u, singular_values, v_t) =
            sorted_svd(a).ok_or_else(|| Error::Numeric("SVD did not converge".into()))?;
        let rank = numerical_rank(singular_values.as_slice(), rank_tol.unwrap_or_else(|| default_rank_tol(rows, cols)));
        Ok(SvdFactors {
            u,
            singular_values,
            v_t,
            rank,
        })
    }

    /// Relative reconstruction error `|U S V' - A|_F / |A|_F`.
    pub fn reconstruction_error(&self, a: &DMatrix<f64>) -> f64 {
        let rebuilt = &self.u * DMatrix::from_diagonal(&self.singular_values) * &self.v_t;
        let scale = a.norm().max(f64::MIN_POSITIVE);
        (rebuilt - a).norm() / scale
    }
}

/// Thin SVD with singular triplets in descending order.
///
/// Factored with faer: nalgebra's implicit-shift SVD can return an
/// inaccurate factorization for rank-deficient input.
fn sorted_svd(m: &DMatrix<f64>) -> Option<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let (rows, cols) = m.shape();
    let fm = faer::Mat::<f64>::from_fn(rows, cols, |i, j| m[(i, j)]);
    let svd = fm.thin_svd().ok()?;
    let (u, v, s) = (svd.U(), svd.V(), svd.S().column_vector());
    let k = rows.min(cols);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    let u = DMatrix::from_fn(rows, k, |i, j| u[(i, order[j])]);
    let v_t = DMatrix::from_fn(k, cols, |i, j| v[(j, order[i])]);
    let s = DVector::from_iterator(k, order.iter().map(|&i| s[i]));
    Some((u, s, v_t))
}

/// `max(M, L) * eps`, relative to the largest singular value.
pub fn default_rank_tol(rows: usize, cols: usize) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON
}

fn numerical_rank(sorted_desc: &[f64], rel_tol: f64) -> usize {
    let Some(&largest) = sorted_desc.first() else {
        return 0;
    };
    if largest <= 0.0 {
        return 0;
    }
    let cutoff = rel_tol * largest;
    sorted_desc.iter().take_while(|&&s| s > cutoff).count()
}

fn check_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if let Some(idx) = m.iter().position(|v| !v.is_finite()) {
        let (row, col) = (idx % m.nrows(), idx / m.nrows());
        return Err(Error::NonFinite {
            row: row + 1,
            col: col + 1,
            context: what.into(),
        });
    }
    Ok(())
}

fn check_system(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<()> {
    if a.nrows() != b.len() {
        return Err(Error::Shape(format!(
            "matrix has {} rows but right-hand side has {} entries",
            a.nrows(),
            b.len()
        )));
    }
    check_finite(a, "design matrix")?;
    if let Some(i) = b.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: i + 1,
            col: 1,
            context: "right-hand side".into(),
        });
    }
    Ok(())
}

/// Moore-Penrose pseudoinverse from the truncated SVD.
pub fn pseudoinverse(a: &DMatrix<f64>, rank_tol: Option<f64>) -> Result<(DMatrix<f64>, SvdFactors)> {
    let f = SvdFactors::compute(a, rank_tol)?;
    let r = f.rank;
    let mut v_r = f.v_t.rows(0, r).transpose();
    for (j, mut col) in v_r.column_iter_mut().enumerate() {
        col /= f.singular_values[j];
    }
    let pinv = v_r * f.u.columns(0, r).transpose();
    Ok((pinv, f))
}

/// `Phi = I - A+ A`, the orthogonal projector onto `null(A)`.
pub fn null_projector(a: &DMatrix<f64>, a_pinv: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a_pinv.shape() != (a.ncols(), a.nrows()) {
        return Err(Error::Shape(format!(
            "pseudoinverse is {:?}, expected {:?}",
            a_pinv.shape(),
            (a.ncols(), a.nrows())
        )));
    }
    let l = a.ncols();
    Ok(DMatrix::identity(l, l) - a_pinv * a)
}

/// Minimum-norm least-squares solution `A+ b`.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    check_system(a, b)?;
    let (pinv, _) = pseudoinverse(a, None)?;
    Ok(pinv * b)
}

// ---------------------------------------------------------------------------
// Lasso

#[derive(Debug, Clone)]
pub struct LassoFit {
    pub coefficients: DVector<f64>,
    pub penalty: f64,
    pub sweeps: usize,
    pub converged: bool,
}

struct CoordinateDescent<'a> {
    a: &'a DMatrix<f64>,
    col_sq: Vec<f64>,
}

impl<'a> CoordinateDescent<'a> {
    fn new(a: &'a DMatrix<f64>) -> Self {
        let col_sq = a.column_iter().map(|c| c.norm_squared()).collect();
        CoordinateDescent { a, col_sq }
    }

    fn column(&self, j: usize) -> &[f64] {
        let m = self.a.nrows();
        &self.a.as_slice()[j * m..(j + 1) * m]
    }

    /// One pass over `indices`; returns the largest coefficient change.
    fn sweep(&self, k: f64, c: &mut [f64], r: &mut [f64], indices: impl Iterator<Item = usize>) -> f64 {
        let half_k = 0.5 * k;
        let mut max_change = 0.0f64;
        for j in indices {
            let sq = self.col_sq[j];
            if sq == 0.0 {
                continue;
            }
            let col = self.column(j);
            let old = c[j];
            let rho = dot(col, r) + sq * old;
            let new = soft_threshold(rho, half_k) / sq;
            let delta = new - old;
            if delta != 0.0 {
                for (ri, ai) in r.iter_mut().zip(col) {
                    *ri -= ai * delta;
                }
                c[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        max_change
    }

    /// Runs cyclic coordinate descent from `c`, alternating full sweeps with
    /// sweeps over the current nonzero set.
    fn solve(&self, b: &DVector<f64>, k: f64, c: &mut [f64]) -> (usize, bool) {
        let l = c.len();
        let mut r: Vec<f64> = (b - self.a * DVector::from_column_slice(c)).iter().copied().collect();
        let mut sweeps = 0;
        while sweeps < LASSO_MAX_SWEEPS {
            let change = self.sweep(k, c, &mut r, 0..l);
            sweeps += 1;
            if change < LASSO_TOL {
                return (sweeps, true);
            }
            let active: Vec<usize> = (0..l).filter(|&j| c[j] != 0.0).collect();
            while sweeps < LASSO_MAX_SWEEPS {
                let change = self.sweep(k, c, &mut r, active.iter().copied());
                sweeps += 1;
                if change < LASSO_TOL {
                    break;
                }
            }
        }
        (sweeps, false)
    }
}

/// Dot product with independent partial sums so the loop vectorizes.
#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let xs = x.chunks_exact(8);
    let ys = y.chunks_exact(8);
    let tail: f64 = xs.remainder().iter().zip(ys.remainder()).map(|(a, b)| a * b).sum();
    for (xc, yc) in xs.zip(ys) {
        for k in 0..8 {
            acc[k] += xc[k] * yc[k];
        }
    }
    acc.iter().sum::<f64>() + tail
}

#[inline]
fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Minimizes `(b - A c)'(b - A c) + k sum |c_i|` by cyclic coordinate
/// descent in basis order. Non-convergence is reported, not raised.
pub fn lasso(a: &DMatrix<f64>, b: &DVector<f64>, k: f64) -> Result<LassoFit> {
    lasso_from(a, b, k, None)
}

/// As [`lasso`], warm-started from `start`.
pub fn lasso_from(a: &DMatrix<f64>, b: &DVector<f64>, k: f64, start: Option<&DVector<f64>>) -> Result<LassoFit> {
    check_system(a, b)?;
    if !(k >= 0.0) || !k.is_finite() {
        return Err(Error::Argument(format!("lasso penalty must be finite and >= 0, got {k}")));
    }
    let mut c: Vec<f64> = match start {
        Some(s) if s.len() == a.ncols() => s.iter().copied().collect(),
        Some(s) => {
            return Err(Error::Shape(format!("warm start has {} entries, expected {}", s.len(), a.ncols())))
        }
        None => vec![0.0; a.ncols()],
    };
    let (sweeps, converged) = CoordinateDescent::new(a).solve(b, k, &mut c);
    Ok(LassoFit {
        coefficients: DVector::from_vec(c),
        penalty: k,
        sweeps,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LassoCvConfig {
    pub folds: usize,
    pub grid_size: usize,
    pub seed: u64,
}

impl Default for LassoCvConfig {
    fn default() -> Self {
        LassoCvConfig {
            folds: 5,
            grid_size: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LassoCvResult {
    pub penalty: f64,
    pub fit: LassoFit,
    /// `(penalty, mean out-of-fold squared error)` in grid order.
    pub cv_curve: Vec<(f64, f64)>,
}

/// `size` log-spaced penalties spanning `[1e-4, 1e1] * |A' b|_inf`, largest first.
pub fn default_lasso_grid(a: &DMatrix<f64>, b: &DVector<f64>, size: usize) -> Vec<f64> {
    let scale = (a.transpose() * b).amax();
    if scale == 0.0 || size == 0 {
        return vec![0.0];
    }
    if size == 1 {
        return vec![scale];
    }
    let (lo, hi) = ((1e-4f64).ln(), (1e1f64).ln());
    (0..size)
        .map(|i| scale * (hi - (hi - lo) * i as f64 / (size - 1) as f64).exp())
        .collect()
}

fn select_rows(a: &DMatrix<f64>, b: &DVector<f64>, rows: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
    let sub_a = DMatrix::from_fn(rows.len(), a.ncols(), |i, j| a[(rows[i], j)]);
    let sub_b = DVector::from_fn(rows.len(), |i, _| b[rows[i]]);
    (sub_a, sub_b)
}

/// Chooses the penalty minimizing mean out-of-fold squared error.
///
/// Fold training fits use the penalty scaled by the training fraction so the
/// penalty-to-data ratio matches the full fit. Ties go to the larger penalty.
pub fn lasso_cv(a: &DMatrix<f64>, b: &DVector<f64>, grid: &[f64], folds: usize, seed: u64) -> Result<LassoCvResult> {
    check_system(a, b)?;
    if grid.is_empty() {
        return Err(Error::Argument("penalty grid is empty".into()));
    }
    if folds < 2 {
        return Err(Error::Argument(format!("need at least 2 folds, got {folds}")));
    }
    let m = a.nrows();
    if m < folds {
        return Err(Error::Folds { folds, rows: m });
    }
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&i, &j| grid[j].total_cmp(&grid[i]));

    let mut errors = vec![0.0; grid.len()];
    if grid.len() > 1 {
        let mut perm: Vec<usize> = (0..m).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        for fold in 0..folds {
            let (test, train): (Vec<usize>, Vec<usize>) = {
                let mut test = Vec::new();
                let mut train = Vec::new();
                for (pos, &row) in perm.iter().enumerate() {
                    if pos % folds == fold {
                        test.push(row);
                    } else {
                        train.push(row);
                    }
                }
                (test, train)
            };
            let (a_train, b_train) = select_rows(a, b, &train);
            let (a_test, b_test) = select_rows(a, b, &test);
            let scale = train.len() as f64 / m as f64;
            let cd = CoordinateDescent::new(&a_train);
            let mut c = vec![0.0; a.ncols()];
            for &gi in &order {
                cd.solve(&b_train, grid[gi] * scale, &mut c);
                let pred = &a_test * DVector::from_column_slice(&c);
                let mse = (&b_test - pred).norm_squared() / test.len() as f64;
                errors[gi] += mse / folds as f64;
            }
        }
    }

    let mut best = order[0];
    for &gi in &order[1..] {
        if errors[gi] < errors[best] {
            best = gi;
        }
    }

    // Full-data path down to the selected penalty, warm-started.
    let cd = CoordinateDescent::new(a);
    let mut c = vec![0.0; a.ncols()];
    let mut outcome = (0, true);
    for &gi in &order {
        outcome = cd.solve(b, grid[gi], &mut c);
        if gi == best {
            break;
        }
    }
    let penalty = grid[best];
    Ok(LassoCvResult {
        penalty,
        fit: LassoFit {
            coefficients: DVector::from_vec(c),
            penalty,
            sweeps: outcome.0,
            converged: outcome.1,
        },
        cv_curve: grid.iter().copied().zip(errors).collect(),
    })
}

// ---------------------------------------------------------------------------
// D-MORPH

/// How each manifold-constrained minimization is carried out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldSolver {
    /// Closed-form limit from the SVD of `Phi W` (an `L x L` factorization).
    #[default]
    Svd,
    /// The same minimizer from the `M`-dimensional KKT system; much cheaper
    /// when `M << L`.
    RangeSpace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DmorphConfig {
    pub lambda: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub convergence_tol: f64,
    pub rank_tol: Option<f64>,
    pub enforce_fit: bool,
    pub lasso: LassoCvConfig,
    pub solver: ManifoldSolver,
}

impl Default for DmorphConfig {
    fn default() -> Self {
        DmorphConfig {
            lambda: 0.5,
            epsilon: 1e-6,
            max_iterations: 30,
            convergence_tol: 1e-8,
            rank_tol: None,
            enforce_fit: true,
            lasso: LassoCvConfig::default(),
            solver: ManifoldSolver::Svd,
        }
    }
}

impl DmorphConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.convergence_tol >= 0.0) {
            return Err(Error::Config("convergence_tol must be non-negative".into()));
        }
        if let Some(t) = self.rank_tol {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::Config(format!("rank_tol must be positive, got {t}")));
            }
        }
        if self.lasso.folds < 2 {
            return Err(Error::Config("lasso.folds must be at least 2".into()));
        }
        if self.lasso.grid_size == 0 {
            return Err(Error::Config("lasso.grid_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Cost of the blended objective before and after one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostRecord {
    /// Cost at the homotopy starting point `A+ b`.
    pub start: f64,
    /// Cost at the returned iterate.
    pub end: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DmorphTrace {
    pub iterations: usize,
    /// Relative coefficient change per iteration.
    pub change_history: Vec<f64>,
    pub cost_history: Vec<CostRecord>,
    pub converged: bool,
}

/// Cached pseudoinverse data for one system `A c = b`.
///
/// Reusing it across several D-MORPH runs on the same data avoids
/// refactoring `A`.
pub struct Manifold<'a> {
    a: &'a DMatrix<f64>,
    b: &'a DVector<f64>,
    pinv: DMatrix<f64>,
    factors: SvdFactors,
    /// `A+ b`, the minimum-norm point of the manifold.
    start: DVector<f64>,
    rank_tol: f64,
    phi: OnceCell<DMatrix<f64>>,
}

impl<'a> Manifold<'a> {
    pub fn new(a: &'a DMatrix<f64>, b: &'a DVector<f64>, rank_tol: Option<f64>) -> Result<Self> {
        check_system(a, b)?;
        let (pinv, factors) = pseudoinverse(a, rank_tol)?;
        let start = &pinv * b;
        let rank_tol = rank_tol.unwrap_or_else(|| default_rank_tol(a.nrows(), a.ncols()));
        Ok(Manifold {
            a,
            b,
            pinv,
            factors,
            start,
            rank_tol,
            phi: OnceCell::new(),
        })
    }

    pub fn pinv(&self) -> &DMatrix<f64> {
        &self.pinv
    }

    pub fn factors(&self) -> &SvdFactors {
        &self.factors
    }

    pub fn start(&self) -> &DVector<f64> {
        &self.start
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    /// Dimension of `null(A)`.
    pub fn nullity(&self) -> usize {
        self.dim() - self.factors.rank
    }

    /// `I - V_r V_r'`, which equals `I - A+ A` exactly in exact arithmetic.
    pub fn phi(&self) -> &DMatrix<f64> {
        self.phi.get_or_init(|| {
            let l = self.dim();
            let v_r = self.factors.v_t.rows(0, self.factors.rank);
            DMatrix::identity(l, l) - v_r.transpose() * v_r
        })
    }

    /// Adds `A+ (b - A c)` so that `c` satisfies the normal equations exactly.
    pub fn correct(&self, c: &DVector<f64>) -> DVector<f64> {
        let residual = self.b - self.a * c;
        c + &self.pinv * residual
    }

    pub fn relative_residual(&self, c: &DVector<f64>) -> f64 {
        let r = (self.a * c - self.b).norm();
        let scale = self.b.norm();
        if scale > 0.0 {
            r / scale
        } else {
            r
        }
    }

    /// Homotopy limit for `da/dt = -K a + K g` with `K = Phi W`, computed
    /// from the SVD of `K`. `target = None` drops the particular solution.
    fn limit_svd(&self, k: DMatrix<f64>, k_target: Option<&DVector<f64>>) -> Result<DVector<f64>> {
        let l = self.dim();
        let (e, t, f_t) = sorted_svd(&k)
            .ok_or_else(|| Error::Numeric("SVD of the projected weight matrix did not converge".into()))?;
        let f = f_t.transpose();
        // rank(Phi W) <= rank(Phi) = nullity of A.
        let r = numerical_rank(t.as_slice(), self.rank_tol).min(self.nullity());

        let mut out = DVector::zeros(l);
        if r < l {
            let e_tail = e.columns(r, l - r);
            let f_tail = f.columns(r, l - r);
            let block = e_tail.transpose() * f_tail;
            let z = solve_block(block, e_tail.transpose() * &self.start)?;
            out += f_tail * z;
        }
        if let (Some(kg), true) = (k_target, r > 0) {
            let e_r = e.columns(0, r);
            let f_r = f.columns(0, r);
            let mut y = e_r.transpose() * kg;
            for (yi, ti) in y.iter_mut().zip(t.iter()) {
                *yi /= ti;
            }
            let z = solve_block(f_r.transpose() * e_r, y)?;
            out += e_r * z;
        }
        Ok(out)
    }

    /// Minimizer of `(a - g)' W (a - g)` over the manifold for diagonal `W`.
    fn weighted_projection(&self, weights: &DVector<f64>, target: &DVector<f64>, solver: ManifoldSolver) -> Result<DVector<f64>> {
        match solver {
            ManifoldSolver::Svd => {
                let mut k = self.phi().clone();
                for (j, mut col) in k.column_iter_mut().enumerate() {
                    col *= weights[j];
                }
                let kg = self.phi() * weights.component_mul(target);
                self.limit_svd(k, Some(&kg))
            }
            ManifoldSolver::RangeSpace => self.weighted_projection_kkt(weights, target),
        }
    }

    /// Solves `min (a-g)'W(a-g) s.t. A a = A A+ b` through its KKT system in
    /// the multipliers and the unweighted coordinates.
    fn weighted_projection_kkt(&self, weights: &DVector<f64>, target: &DVector<f64>) -> Result<DVector<f64>> {
        let (m, l) = self.a.shape();
        let free: Vec<usize> = (0..l).filter(|&j| weights[j] == 0.0).collect();
        let nf = free.len();
        // Scaled copy A W^+ for the weighted columns.
        let mut scaled = self.a.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            let w = weights[j];
            if w > 0.0 {
                col /= w;
            } else {
                col.fill(0.0);
            }
        }
        let gram = &scaled * self.a.transpose();
        let mut kkt = DMatrix::zeros(m + nf, m + nf);
        kkt.view_mut((0, 0), (m, m)).copy_from(&gram);
        for (q, &j) in free.iter().enumerate() {
            kkt.view_mut((0, m + q), (m, 1)).copy_from(&self.a.column(j));
            kkt.view_mut((m + q, 0), (1, m)).copy_from(&self.a.column(j).transpose());
        }
        let consistent = self.a * &self.start;
        let mut rhs = DVector::zeros(m + nf);
        rhs.rows_mut(0, m).copy_from(&(consistent - self.a * target));

        let sol = match kkt.clone().lu().solve(&rhs) {
            Some(s) if s.iter().all(|v| v.is_finite()) && (&kkt * &s - &rhs).norm() <= 1e-8 * rhs.norm().max(1.0) => s,
            _ => {
                let (pinv, _) = pseudoinverse(&kkt, None)?;
                pinv * &rhs
            }
        };
        let mu = sol.rows(0, m);
        let mut a = target + scaled.transpose() * mu;
        for (q, &j) in free.iter().enumerate() {
            a[j] = target[j] + sol[m + q];
        }
        Ok(a)
    }

    /// Original homotopy limit for a symmetric non-negative definite `D`.
    pub fn original(&self, d: &DMatrix<f64>) -> Result<DVector<f64>> {
        let l = self.dim();
        if d.shape() != (l, l) {
            return Err(Error::Shape(format!("weight matrix is {:?}, expected {l}x{l}", d.shape())));
        }
        check_finite(d, "weight matrix")?;
        let k = self.phi() * d;
        self.limit_svd(k, None)
    }

    /// Manifold point closest to `c0` in the Euclidean norm.
    pub fn initial(&self, c0: &DVector<f64>, solver: ManifoldSolver) -> Result<DVector<f64>> {
        self.check_len(c0)?;
        match solver {
            ManifoldSolver::Svd => {
                let k = self.phi().clone();
                let kg = self.phi() * c0;
                self.limit_svd(k, Some(&kg))
            }
            ManifoldSolver::RangeSpace => Ok(&self.start + (c0 - &self.pinv * (self.a * c0))),
        }
    }

    fn check_len(&self, c: &DVector<f64>) -> Result<()> {
        if c.len() != self.dim() {
            return Err(Error::Shape(format!("coefficient vector has {} entries, expected {}", c.len(), self.dim())));
        }
        Ok(())
    }

    /// Iterative Lasso-anchored D-MORPH. `observer` sees every iterate
    /// (index 0 is the initial projection) before the final fit correction.
    pub fn sparse<F>(&self, c0: &DVector<f64>, cfg: &DmorphConfig, mut observer: F) -> Result<(DVector<f64>, DmorphTrace)>
    where
        F: FnMut(usize, &DVector<f64>),
    {
        cfg.validate()?;
        self.check_len(c0)?;
        let l = self.dim();
        let lambda = cfg.lambda;

        let mut current = self.initial(c0, cfg.solver)?;
        if current.iter().any(|v| !v.is_finite()) {
            return Err(Error::DivergedIterate { iteration: 0 });
        }
        observer(0, &current);
        let mut running_sum = current.clone();
        let mut trace = DmorphTrace::default();

        for i in 1..=cfg.max_iterations {
            let prior = &running_sum / i as f64;
            let mut weights = DVector::zeros(l);
            for j in 1..l {
                weights[j] = 1.0 / (current[j].abs() + cfg.epsilon);
            }
            let target = c0 * lambda + &prior * (1.0 - lambda);
            let next = self.weighted_projection(&weights, &target, cfg.solver)?;
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::DivergedIterate { iteration: i });
            }
            let cost = |a: &DVector<f64>| blended_cost(a, c0, &prior, &weights, lambda);
            trace.cost_history.push(CostRecord {
                start: cost(&self.start),
                end: cost(&next),
            });
            let change = (&next - &current).norm() / current.norm().max(f64::MIN_POSITIVE);
            trace.change_history.push(change);
            trace.iterations = i;
            running_sum += &next;
            current = next;
            observer(i, &current);
            if change < cfg.convergence_tol {
                trace.converged = true;
                break;
            }
        }
        if cfg.enforce_fit {
            current = self.correct(&current);
        }
        Ok((current, trace))
    }
}

/// `lambda/2 (a-c0)'W(a-c0) + (1-lambda)/2 (a-c1)'W(a-c1)` for diagonal `W`.
pub fn blended_cost(a: &DVector<f64>, c0: &DVector<f64>, c1: &DVector<f64>, weights: &DVector<f64>, lambda: f64) -> f64 {
    let mut total = 0.0;
    for j in 0..a.len() {
        let d0 = a[j] - c0[j];
        let d1 = a[j] - c1[j];
        total += weights[j] * (lambda * d0 * d0 + (1.0 - lambda) * d1 * d1);
    }
    0.5 * total
}

fn solve_block(block: DMatrix<f64>, rhs: DVector<f64>) -> Result<DVector<f64>> {
    let (_, sv, _) = sorted_svd(&block).ok_or_else(|| Error::Numeric("SVD did not converge".into()))?;
    let (max, min) = (sv.max(), sv.min());
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_BLOCK_CONDITION) {
        return Err(Error::Conditioning { condition });
    }
    block
        .lu()
        .solve(&rhs)
        .ok_or(Error::Conditioning { condition })
}

/// Original D-MORPH: minimizes `a' D a` over `{a : A a = A A+ b}`.
pub fn dmorph_original(a: &DMatrix<f64>, b: &DVector<f64>, d: &DMatrix<f64>, rank_tol: Option<f64>) -> Result<DVector<f64>> {
    Manifold::new(a, b, rank_tol)?.original(d)
}

/// Starting point of the Lasso-anchored iteration: the manifold point
/// nearest to the Lasso solution `c0`.
pub fn dmorph_initial(a: &DMatrix<f64>, b: &DVector<f64>, c0: &DVector<f64>, rank_tol: Option<f64>) -> Result<DVector<f64>> {
    Manifold::new(a, b, rank_tol)?.initial(c0, ManifoldSolver::Svd)
}

pub fn dmorph_sparse(a: &DMatrix<f64>, b: &DVector<f64>, c0: &DVector<f64>, cfg: &DmorphConfig) -> Result<(DVector<f64>, DmorphTrace)> {
    Manifold::new(a, b, cfg.rank_tol)?.sparse(c0, cfg, |_, _| {})
}
