//! Moments and Sobol indices of a fitted surrogate, plus a pick-freeze
//! Monte Carlo estimator used as an independent reference.

use std::collections::BTreeMap;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::Distribution;
use crate::pdd::PddModel;

/// Sobol indices and output moments.
///
/// Variable indices are zero-based in memory; the JSON form uses one-based
/// keys such as `"1"` and `"1,3"`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub mean: f64,
    pub std: f64,
    #[serde(with = "subset_map")]
    pub first_order: BTreeMap<usize, f64>,
    #[serde(with = "subset_map", default)]
    pub second_order: BTreeMap<(usize, usize), f64>,
    #[serde(with = "subset_map", default, skip_serializing_if = "BTreeMap::is_empty")]
    pub higher_order: BTreeMap<Vec<usize>, f64>,
    #[serde(with = "subset_map")]
    pub total_effect: BTreeMap<usize, f64>,
    pub trials: usize,
    #[serde(default)]
    pub per_trial: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub degenerate: bool,
}

impl SensitivityReport {
    /// Index of the exact subset `vars` (zero-based, sorted), if reported.
    pub fn index(&self, vars: &[usize]) -> Option<f64> {
        match vars {
            [i] => self.first_order.get(i).copied(),
            [i, j] => self.second_order.get(&(*i, *j)).copied(),
            _ => self.higher_order.get(vars).copied(),
        }
    }

    /// Every subset index, in graded order.
    pub fn all_indices(&self) -> Vec<(Vec<usize>, f64)> {
        let mut out: Vec<(Vec<usize>, f64)> = self.first_order.iter().map(|(&i, &v)| (vec![i], v)).collect();
        out.extend(self.second_order.iter().map(|(&(i, j), &v)| (vec![i, j], v)));
        out.extend(self.higher_order.iter().map(|(k, &v)| (k.clone(), v)));
        out
    }

    /// Flat `(name, value)` rows: mean, std, `S{..}` and `T{..}` entries.
    pub fn table(&self) -> Vec<(String, f64)> {
        let mut rows = vec![("mean".to_string(), self.mean), ("std".to_string(), self.std)];
        rows.extend(self.all_indices().into_iter().map(|(k, v)| (index_name("S", &k), v)));
        rows.extend(self.total_effect.iter().map(|(&i, &v)| (index_name("T", &[i]), v)));
        rows
    }
}

/// Averages replicated reports; `per_trial` keeps every trial's value under
/// the labels used by [`SensitivityReport::table`].
pub fn aggregate(reports: &[SensitivityReport]) -> Result<SensitivityReport> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Argument("cannot aggregate zero reports".into()))?;
    let k = reports.len() as f64;
    let avg = |get: &dyn Fn(&SensitivityReport) -> f64| reports.iter().map(get).sum::<f64>() / k;
    let mut out = SensitivityReport {
        mean: avg(&|r| r.mean),
        std: avg(&|r| r.std),
        trials: reports.len(),
        degenerate: reports.iter().all(|r| r.degenerate),
        ..Default::default()
    };
    for r in reports {
        if r.first_order.len() != first.first_order.len()
            || r.second_order.len() != first.second_order.len()
            || r.higher_order.len() != first.higher_order.len()
        {
            return Err(Error::Shape("reports cover different index sets".into()));
        }
        for (name, v) in r.table() {
            out.per_trial.entry(name).or_default().push(v);
        }
    }
    let mean_of = |name: String| -> Result<f64> {
        let values = out
            .per_trial
            .get(&name)
            .filter(|v| v.len() == reports.len())
            .ok_or_else(|| Error::Shape(format!("index {name} missing from some reports")))?;
        Ok(values.iter().sum::<f64>() / k)
    };
    let mut first_order = BTreeMap::new();
    for &i in first.first_order.keys() {
        first_order.insert(i, mean_of(index_name("S", &[i]))?);
    }
    let mut second_order = BTreeMap::new();
    for &(i, j) in first.second_order.keys() {
        second_order.insert((i, j), mean_of(index_name("S", &[i, j]))?);
    }
    let mut higher_order = BTreeMap::new();
    for key in first.higher_order.keys() {
        higher_order.insert(key.clone(), mean_of(index_name("S", key))?);
    }
    let mut total_effect = BTreeMap::new();
    for &i in first.total_effect.keys() {
        total_effect.insert(i, mean_of(index_name("T", &[i]))?);
    }
    out.first_order = first_order;
    out.second_order = second_order;
    out.higher_order = higher_order;
    out.total_effect = total_effect;
    Ok(out)
}

/// `S{1,3}`-style label for a zero-based subset.
pub fn index_name(prefix: &str, vars: &[usize]) -> String {
    let inner: Vec<String> = vars.iter().map(|v| (v + 1).to_string()).collect();
    format!("{prefix}{{{}}}", inner.join(","))
}

/// Mean and variance: the constant coefficient and the sum of the squared
/// remaining coefficients (Parseval for an orthonormal basis).
pub fn moments(model: &PddModel) -> (f64, f64) {
    let c = model.coefficients();
    let variance = c[1..].iter().map(|v| v * v).sum();
    (c[0], variance)
}

/// Sobol indices from the squared coefficients grouped by variable subset.
pub fn sobol_indices(model: &PddModel) -> SensitivityReport {
    let (mean, variance) = moments(model);
    let mut by_subset: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for (term, c) in model.basis().terms().iter().zip(model.coefficients()).skip(1) {
        *by_subset.entry(term.vars().to_vec()).or_insert(0.0) += c * c;
    }
    let degenerate = !(variance > 0.0);
    let mut report = SensitivityReport {
        mean,
        std: variance.sqrt(),
        trials: 1,
        degenerate,
        ..Default::default()
    };
    for i in 0..model.basis().dims() {
        report.total_effect.insert(i, 0.0);
    }
    for (vars, part) in by_subset {
        let s = if degenerate { 0.0 } else { (part / variance).clamp(0.0, 1.0) };
        for &i in &vars {
            *report.total_effect.get_mut(&i).expect("variable in range") += s;
        }
        match vars.as_slice() {
            [i] => {
                report.first_order.insert(*i, s);
            }
            [i, j] => {
                report.second_order.insert((*i, *j), s);
            }
            _ => {
                report.higher_order.insert(vars, s);
            }
        }
    }
    for t in report.total_effect.values_mut() {
        *t = t.min(1.0);
    }
    report
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0.0 {
            return other;
        }
        if other.n == 0.0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * other.n / n,
            m2: self.m2 + other.m2 + d * d * self.n * other.n / n,
        }
    }

    fn variance(&self) -> f64 {
        if self.n > 1.0 {
            self.m2 / (self.n - 1.0)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone)]
struct OracleBlock {
    output: Moments,
    /// `sum f(B) (f(A_B^i) - f(A))`
    first: Vec<f64>,
    /// `sum (f(A_B^i) - f(A))`
    diff: Vec<f64>,
    /// `sum (f(A) - f(A_B^i))^2`
    total: Vec<f64>,
}

const ORACLE_BLOCK: usize = 8192;

/// Pick-freeze estimates of first-order (Saltelli) and total-effect
/// (Jansen) indices from `n` base samples, `n (N + 2)` evaluations in all.
///
/// Samples are drawn in fixed-size blocks, each from its own ChaCha
/// stream, and partial sums are reduced in block order, so the result does
/// not depend on the thread count.
pub fn mc_sobol_oracle<F>(f: F, dists: &[Distribution], n: usize, seed: u64) -> Result<SensitivityReport>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if n < 100 {
        return Err(Error::Argument(format!("oracle needs at least 100 samples, got {n}")));
    }
    if dists.is_empty() {
        return Err(Error::Argument("oracle needs at least one input".into()));
    }
    for d in dists {
        d.validate()?;
    }
    let dim = dists.len();
    let blocks = n.div_ceil(ORACLE_BLOCK);
    let partials: Vec<OracleBlock> = (0..blocks)
        .into_par_iter()
        .map(|blk| {
            let rows = ORACLE_BLOCK.min(n - blk * ORACLE_BLOCK);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(blk as u64);
            let mut draw = || -> Vec<f64> { dists.iter().map(|d| d.inverse_cdf(rng.sample(Open01))).collect() };
            let mut out = OracleBlock {
                output: Moments::default(),
                first: vec![0.0; dim],
                diff: vec![0.0; dim],
                total: vec![0.0; dim],
            };
            let mut mixed = vec![0.0; dim];
            for _ in 0..rows {
                let a = draw();
                let b = draw();
                let fa = f(&a);
                let fb = f(&b);
                if !fa.is_finite() || !fb.is_finite() {
                    return Err(Error::Numeric("oracle function returned a non-finite value".into()));
                }
                out.output.push(fa);
                out.output.push(fb);
                for i in 0..dim {
                    mixed.copy_from_slice(&a);
                    mixed[i] = b[i];
                    let fab = f(&mixed);
                    if !fab.is_finite() {
                        return Err(Error::Numeric("oracle function returned a non-finite value".into()));
                    }
                    let d = fab - fa;
                    out.first[i] += fb * d;
                    out.diff[i] += d;
                    out.total[i] += d * d;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut output = Moments::default();
    let mut first = vec![0.0; dim];
    let mut diff = vec![0.0; dim];
    let mut total = vec![0.0; dim];
    for p in partials {
        output = output.merge(p.output);
        for i in 0..dim {
            first[i] += p.first[i];
            diff[i] += p.diff[i];
            total[i] += p.total[i];
        }
    }
    let variance = output.variance();
    let nf = n as f64;
    let degenerate = !(variance > 0.0);
    let mut report = SensitivityReport {
        mean: output.mean,
        std: variance.sqrt(),
        trials: 1,
        degenerate,
        ..Default::default()
    };
    for i in 0..dim {
        let (s, t) = if degenerate {
            (0.0, 0.0)
        } else {
            // Centering f(B) on the pooled mean reduces estimator variance.
            let vi = (first[i] - output.mean * diff[i]) / nf;
            let ti = total[i] / (2.0 * nf);
            ((vi / variance).clamp(0.0, 1.0), (ti / variance).clamp(0.0, 1.0))
        };
        report.first_order.insert(i, s);
        report.total_effect.insert(i, t);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub mean_absolute_error: f64,
    /// `None` when the reference value is zero.
    pub mean_relative_error: Option<f64>,
}

/// `MAE = mean |Y - Y_k|`, `MRE = MAE / |Y|` (undefined when `Y = 0`).
pub fn error_metrics(estimates: &[f64], exact: f64) -> Result<ErrorMetrics> {
    if estimates.is_empty() {
        return Err(Error::Argument("error metrics need at least one trial".into()));
    }
    let k = estimates.len() as f64;
    let mae = estimates.iter().map(|y| (exact - y).abs()).sum::<f64>() / k;
    let mre = if exact != 0.0 {
        Some(estimates.iter().map(|y| ((exact - y) / exact).abs()).sum::<f64>() / k)
    } else {
        None
    };
    Ok(ErrorMetrics {
        mean_absolute_error: mae,
        mean_relative_error: mre,
    })
}

/// Serde adapter writing subset-keyed maps with one-based, comma-joined keys.
mod subset_map {
    use std::collections::BTreeMap;
    use std::fmt;

    use serde::de::{MapAccess, Visitor};
    use serde::ser::SerializeMap;
    use serde::{Deserializer, Serializer};

    pub trait SubsetKey: Ord + Sized {
        fn vars(&self) -> Vec<usize>;
        fn from_vars(vars: Vec<usize>) -> Option<Self>;
    }

    impl SubsetKey for usize {
        fn vars(&self) -> Vec<usize> {
            vec![*self]
        }
        fn from_vars(vars: Vec<usize>) -> Option<Self> {
            match vars.as_slice() {
                [i] => Some(*i),
                _ => None,
            }
        }
    }

    impl SubsetKey for (usize, usize) {
        fn vars(&self) -> Vec<usize> {
            vec![self.0, self.1]
        }
        fn from_vars(vars: Vec<usize>) -> Option<Self> {
            match vars.as_slice() {
                [i, j] if i < j => Some((*i, *j)),
                _ => None,
            }
        }
    }

    impl SubsetKey for Vec<usize> {
        fn vars(&self) -> Vec<usize> {
            self.clone()
        }
        fn from_vars(vars: Vec<usize>) -> Option<Self> {
            (vars.len() > 2 && vars.windows(2).all(|w| w[0] < w[1])).then_some(vars)
        }
    }

    pub fn serialize<K: SubsetKey, S: Serializer>(map: &BTreeMap<K, f64>, s: S) -> Result<S::Ok, S::Error> {
        let mut out = s.serialize_map(Some(map.len()))?;
        for (k, v) in map {
            let key: Vec<String> = k.vars().iter().map(|i| (i + 1).to_string()).collect();
            out.serialize_entry(&key.join(","), v)?;
        }
        out.end()
    }

    pub fn deserialize<'de, K: SubsetKey, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<K, f64>, D::Error> {
        struct V<K>(std::marker::PhantomData<K>);

        impl<'de, K: SubsetKey> Visitor<'de> for V<K> {
            type Value = BTreeMap<K, f64>;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map keyed by one-based variable subsets")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut map = BTreeMap::new();
                while let Some((key, value)) = access.next_entry::<String, f64>()? {
                    let vars: Option<Vec<usize>> = key
                        .split(',')
                        .map(|p| p.trim().parse::<usize>().ok().filter(|&i| i > 0).map(|i| i - 1))
                        .collect();
                    let k = vars
                        .and_then(K::from_vars)
                        .ok_or_else(|| serde::de::Error::custom(format!("bad subset key `{key}`")))?;
                    map.insert(k, value);
                }
                Ok(map)
            }
        }

        d.deserialize_map(V(std::marker::PhantomData))
    }
}
