//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_vector(rng: &mut impl Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.random_range(-1.0..1.0))
}

/// Gauss-Legendre nodes and weights on [-1, 1] (weights sum to 2), by
/// Newton iteration on the Bonnet recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// Unnormalized Legendre `P_n(x)` and its derivative.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let k = k as f64;
        let p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    (p1, nf * (x * p1 - p0) / (x * x - 1.0))
}

pub fn legendre(n: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return 1.0;
    }
    for k in 1..n {
        let k = k as f64;
        let p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Probabilists' Hermite `He_n(x)`.
pub fn hermite(n: usize, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, x);
    if n == 0 {
        return 1.0;
    }
    for k in 1..n {
        let h2 = x * h1 - k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Gauss rule for the standard normal density (weights sum to 1) via the
/// eigen-decomposition of the Hermite Jacobi matrix.
pub fn gauss_hermite_prob(n: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let nodes = eig.eigenvalues.iter().copied().collect();
    let weights = (0..n).map(|k| eig.eigenvectors[(0, k)].powi(2)).collect();
    (nodes, weights)
}

/// `argmin |c - c0|` subject to `A c = b` for full-row-rank `A`:
/// `c = c0 + A' (A A')^{-1} (b - A c0)`.
pub fn least_norm_to(a: &DMatrix<f64>, b: &DVector<f64>, c0: &DVector<f64>) -> DVector<f64> {
    let gram = a * a.transpose();
    let y = gram.lu().solve(&(b - a * c0)).expect("full row rank");
    c0 + a.transpose() * y
}

/// `argmin a' D a` subject to `A a = b`, from the bordered KKT system.
pub fn constrained_qp(d: &DMatrix<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let (m, l) = a.shape();
    let mut kkt = DMatrix::zeros(l + m, l + m);
    kkt.view_mut((0, 0), (l, l)).copy_from(&(d * 2.0));
    kkt.view_mut((0, l), (l, m)).copy_from(&a.transpose());
    kkt.view_mut((l, 0), (m, l)).copy_from(a);
    let mut rhs = DVector::zeros(l + m);
    rhs.rows_mut(l, m).copy_from(b);
    let sol = kkt.lu().solve(&rhs).expect("nonsingular KKT system");
    sol.rows(0, l).into_owned()
}

/// Largest violation of the Lasso optimality conditions for
/// `|b - A c|^2 + k |c|_1`, with the gradient halved.
pub fn lasso_kkt_violation(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>, k: f64) -> f64 {
    let g = a.transpose() * (b - a * c);
    let half = 0.5 * k;
    let mut worst = 0.0f64;
    for j in 0..c.len() {
        let v = if c[j] == 0.0 {
            (g[j].abs() - half).max(0.0)
        } else {
            (g[j] - half * c[j].signum()).abs()
        };
        worst = worst.max(v);
    }
    worst
}
