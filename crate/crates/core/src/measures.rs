//! Input probability measures and their orthonormal polynomial families.
//!
//! Two measures are supported: uniform on `[lower, upper]` and normal with
//! `(mean, std)`. Each comes with an analytic three-term recurrence for the
//! polynomials orthonormal under it (normalized Legendre and normalized
//! probabilists' Hermite). Families are evaluated in the native coordinate
//! of the variable; the affine map to the reference interval is applied
//! internally.

use nalgebra::DMatrix;
use rand::distr::Open01;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Marginal distribution of one input variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", try_from = "RawDistribution")]
pub enum Distribution {
    Uniform { lower: f64, upper: f64 },
    Normal { mean: f64, std: f64 },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum RawDistribution {
    Uniform { lower: f64, upper: f64 },
    Normal { mean: f64, std: f64 },
}

impl TryFrom<RawDistribution> for Distribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        match raw {
            RawDistribution::Uniform { lower, upper } => Distribution::uniform(lower, upper),
            RawDistribution::Normal { mean, std } => Distribution::normal(mean, std),
        }
    }
}

impl Distribution {
    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        let d = Distribution::Uniform { lower, upper };
        d.validate()?;
        Ok(d)
    }

    pub fn normal(mean: f64, std: f64) -> Result<Self> {
        let d = Distribution::Normal { mean, std };
        d.validate()?;
        Ok(d)
    }

    pub fn standard_normal() -> Self {
        Distribution::Normal {
            mean: 0.0,
            std: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Distribution::Uniform { lower, upper } => {
                if !(lower.is_finite() && upper.is_finite()) {
                    return Err(Error::Parameter(format!(
                        "uniform bounds must be finite, got [{lower}, {upper}]"
                    )));
                }
                if lower >= upper {
                    return Err(Error::Parameter(format!(
                        "uniform requires lower < upper, got [{lower}, {upper}]"
                    )));
                }
            }
            Distribution::Normal { mean, std } => {
                if !mean.is_finite() || !std.is_finite() || std <= 0.0 {
                    return Err(Error::Parameter(format!(
                        "normal requires finite mean and std > 0, got ({mean}, {std})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Affine map from the native coordinate to the reference variable
    /// (`[-1, 1]` for uniform, standard normal for normal).
    #[inline]
    pub fn standardize(&self, x: f64) -> f64 {
        match *self {
            Distribution::Uniform { lower, upper } => (2.0 * x - lower - upper) / (upper - lower),
            Distribution::Normal { mean, std } => (x - mean) / std,
        }
    }

    pub fn in_support(&self, x: f64) -> bool {
        match *self {
            Distribution::Uniform { lower, upper } => x >= lower && x <= upper,
            Distribution::Normal { .. } => x.is_finite(),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Uniform { lower, upper } => 0.5 * (lower + upper),
            Distribution::Normal { mean, .. } => mean,
        }
    }

    pub fn std_dev(&self) -> f64 {
        match *self {
            Distribution::Uniform { lower, upper } => (upper - lower) / 12f64.sqrt(),
            Distribution::Normal { std, .. } => std,
        }
    }

    /// Quantile function; `u` must lie in the open unit interval.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        match *self {
            Distribution::Uniform { lower, upper } => lower + (upper - lower) * u,
            Distribution::Normal { mean, std } => {
                // Parameters were validated on construction.
                let n = Normal::new(mean, std).expect("validated normal parameters");
                n.inverse_cdf(u)
            }
        }
    }
}

/// Orthonormal polynomials `psi_0..=psi_max` for one [`Distribution`].
///
/// The family satisfies `t psi_k = b_{k+1} psi_{k+1} + b_k psi_{k-1}` in the
/// standardized variable `t`, with `psi_0 = 1` and `b_k > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialFamily {
    distribution: Distribution,
    max_degree: usize,
    /// `recurrence[k - 1] = b_k` for `k = 1..=max_degree`.
    recurrence: Vec<f64>,
}

pub fn family_for(dist: Distribution, max_degree: usize) -> Result<PolynomialFamily> {
    dist.validate()?;
    let recurrence = (1..=max_degree)
        .map(|k| {
            let k = k as f64;
            match dist {
                Distribution::Uniform { .. } => k / (4.0 * k * k - 1.0).sqrt(),
                Distribution::Normal { .. } => k.sqrt(),
            }
        })
        .collect();
    Ok(PolynomialFamily {
        distribution: dist,
        max_degree,
        recurrence,
    })
}

impl PolynomialFamily {
    pub fn distribution(&self) -> &Distribution {
        &self.distribution
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Off-diagonal recurrence coefficients `b_1..=b_max`.
    pub fn recurrence(&self) -> &[f64] {
        &self.recurrence
    }

    pub fn eval(&self, degree: usize, x: f64) -> Result<f64> {
        if degree > self.max_degree {
            return Err(Error::Degree {
                degree,
                max: self.max_degree,
            });
        }
        let t = self.distribution.standardize(x);
        let (mut prev, mut cur) = (0.0, 1.0);
        for k in 0..degree {
            let b_next = self.recurrence[k];
            let b_cur = if k == 0 { 0.0 } else { self.recurrence[k - 1] };
            let next = (t * cur - b_cur * prev) / b_next;
            prev = cur;
            cur = next;
        }
        Ok(cur)
    }

    /// Writes `psi_0(x)..=psi_{out.len()-1}(x)` into `out`.
    pub fn eval_all(&self, x: f64, out: &mut [f64]) -> Result<()> {
        if out.is_empty() {
            return Ok(());
        }
        if out.len() > self.max_degree + 1 {
            return Err(Error::Degree {
                degree: out.len() - 1,
                max: self.max_degree,
            });
        }
        let t = self.distribution.standardize(x);
        out[0] = 1.0;
        if out.len() > 1 {
            out[1] = t / self.recurrence[0];
        }
        for k in 1..out.len() - 1 {
            out[k + 1] = (t * out[k] - self.recurrence[k - 1] * out[k - 1]) / self.recurrence[k];
        }
        Ok(())
    }
}

pub fn eval_poly(family: &PolynomialFamily, degree: usize, x: f64) -> Result<f64> {
    family.eval(degree, x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMethod {
    MonteCarlo,
    #[default]
    LatinHypercube,
}

/// Draws `n` values from `dist`. Deterministic for a given seed.
pub fn sample(dist: &Distribution, n: usize, seed: u64, method: SamplingMethod) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(dist, n, method, &mut rng)
}

pub fn sample_with<R: Rng + ?Sized>(
    dist: &Distribution,
    n: usize,
    method: SamplingMethod,
    rng: &mut R,
) -> Result<Vec<f64>> {
    dist.validate()?;
    if n == 0 {
        return Err(Error::Argument("sample size must be at least 1".into()));
    }
    let u: Vec<f64> = match method {
        SamplingMethod::MonteCarlo => (0..n).map(|_| rng.sample(Open01)).collect(),
        SamplingMethod::LatinHypercube => {
            let mut strata: Vec<usize> = (0..n).collect();
            strata.shuffle(rng);
            strata
                .into_iter()
                .map(|s| {
                    let jitter: f64 = rng.sample(Open01);
                    (s as f64 + jitter) / n as f64
                })
                .collect()
        }
    };
    Ok(u.into_iter().map(|u| dist.inverse_cdf(u)).collect())
}

/// Draws an `n x N` design, one column per distribution, from a single
/// seeded stream (columns are filled in order).
pub fn sample_design(
    dists: &[Distribution],
    n: usize,
    seed: u64,
    method: SamplingMethod,
) -> Result<DMatrix<f64>> {
    if dists.is_empty() {
        return Err(Error::Argument("design needs at least one input".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut design = DMatrix::zeros(n, dists.len());
    for (j, dist) in dists.iter().enumerate() {
        let column = sample_with(dist, n, method, &mut rng)?;
        design.column_mut(j).copy_from_slice(&column);
    }
    Ok(design)
}
