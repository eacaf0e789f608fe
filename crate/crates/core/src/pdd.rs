//! Truncated polynomial dimensional decomposition: basis enumeration,
//! basis evaluation, design-matrix assembly and the fitted surrogate.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{family_for, Distribution, PolynomialFamily};

/// One product basis function `prod_{i in U} psi_{i, j_i}(x_i)`.
///
/// Variable indices are zero-based in memory and one-based on disk.
/// The empty term is the constant function.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "RawTerm", try_from = "RawTerm")]
pub struct BasisTerm {
    vars: Vec<usize>,
    degrees: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawTerm {
    subset: Vec<usize>,
    degrees: Vec<usize>,
}

impl From<BasisTerm> for RawTerm {
    fn from(t: BasisTerm) -> Self {
        RawTerm {
            subset: t.vars.iter().map(|v| v + 1).collect(),
            degrees: t.degrees,
        }
    }
}

impl TryFrom<RawTerm> for BasisTerm {
    type Error = Error;

    fn try_from(raw: RawTerm) -> Result<Self> {
        if raw.subset.contains(&0) {
            return Err(Error::Format("basis subsets are one-based".into()));
        }
        BasisTerm::new(raw.subset.into_iter().map(|v| v - 1).collect(), raw.degrees)
    }
}

impl BasisTerm {
    pub fn constant() -> Self {
        BasisTerm {
            vars: Vec::new(),
            degrees: Vec::new(),
        }
    }

    pub fn new(vars: Vec<usize>, degrees: Vec<usize>) -> Result<Self> {
        if vars.len() != degrees.len() {
            return Err(Error::Format(format!(
                "basis term has {} variables but {} degrees",
                vars.len(),
                degrees.len()
            )));
        }
        if vars.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Format(
                "basis term variables must be strictly increasing".into(),
            ));
        }
        if degrees.contains(&0) {
            return Err(Error::Format("basis term degrees must be positive".into()));
        }
        Ok(BasisTerm { vars, degrees })
    }

    /// Zero-based variable indices `U`.
    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn is_constant(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn total_degree(&self) -> usize {
        self.degrees.iter().sum()
    }
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// `L(S, N, m) = 1 + sum_{s=1}^{S} C(N, s) C(m, s)`.
pub fn basis_count(dims: usize, variate: usize, order: usize) -> u128 {
    1 + (1..=variate)
        .map(|s| binomial(dims, s) * binomial(order, s))
        .sum::<u128>()
}

/// The ordered basis of an `S`-variate, `m`-th order truncation.
///
/// Ordering: constant first, then graded by subset size, lexicographic in
/// the subset, lexicographic in the degree vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBasis")]
pub struct BasisSet {
    dims: usize,
    order: usize,
    variate: usize,
    terms: Vec<BasisTerm>,
}

#[derive(Deserialize)]
struct RawBasis {
    dims: usize,
    order: usize,
    variate: usize,
    terms: Vec<BasisTerm>,
}

impl TryFrom<RawBasis> for BasisSet {
    type Error = Error;

    fn try_from(raw: RawBasis) -> Result<Self> {
        check_truncation(raw.dims, raw.variate, raw.order)?;
        if raw.terms.first().map(|t| !t.is_constant()).unwrap_or(true) {
            return Err(Error::Format("first basis term must be the constant".into()));
        }
        let mut seen = HashSet::with_capacity(raw.terms.len());
        for term in &raw.terms {
            if !seen.insert(term) {
                return Err(Error::Format("duplicate basis term".into()));
            }
            if term.is_constant() && seen.len() > 1 {
                return Err(Error::Format("constant term appears twice".into()));
            }
            let size = term.vars.len();
            if size > raw.variate
                || term.total_degree() > raw.order
                || term.vars.last().map(|&v| v >= raw.dims).unwrap_or(false)
            {
                return Err(Error::Format(format!(
                    "basis term {:?} violates the truncation",
                    term
                )));
            }
        }
        Ok(BasisSet {
            dims: raw.dims,
            order: raw.order,
            variate: raw.variate,
            terms: raw.terms,
        })
    }
}

fn check_truncation(dims: usize, variate: usize, order: usize) -> Result<()> {
    if dims == 0 {
        return Err(Error::Truncation("need at least one input dimension".into()));
    }
    if variate == 0 || variate > dims {
        return Err(Error::Truncation(format!(
            "interaction order S={variate} must satisfy 1 <= S <= N={dims}"
        )));
    }
    if order < variate {
        return Err(Error::Truncation(format!(
            "polynomial order m={order} must be at least S={variate}"
        )));
    }
    Ok(())
}

/// Next combination of `k` elements from `0..n` in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// All degree vectors of length `s` with positive entries summing to at
/// most `order`, in lexicographic order.
fn degree_vectors(s: usize, order: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, remaining_slots: usize, budget: usize, out: &mut Vec<Vec<usize>>) {
        if remaining_slots == 0 {
            out.push(prefix.clone());
            return;
        }
        // Leave at least one unit for each later slot.
        let max_here = budget - (remaining_slots - 1);
        for d in 1..=max_here {
            prefix.push(d);
            rec(prefix, remaining_slots - 1, budget - d, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(s), s, order, &mut out);
    out
}

pub fn enumerate_basis(dims: usize, variate: usize, order: usize) -> Result<BasisSet> {
    check_truncation(dims, variate, order)?;
    let mut terms = vec![BasisTerm::constant()];
    for s in 1..=variate {
        let degrees = degree_vectors(s, order);
        let mut subset: Vec<usize> = (0..s).collect();
        loop {
            for d in &degrees {
                terms.push(BasisTerm {
                    vars: subset.clone(),
                    degrees: d.clone(),
                });
            }
            if !next_combination(&mut subset, dims) {
                break;
            }
        }
    }
    debug_assert_eq!(terms.len() as u128, basis_count(dims, variate, order));
    Ok(BasisSet {
        dims,
        order,
        variate,
        terms,
    })
}

impl BasisSet {
    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn variate(&self) -> usize {
        self.variate
    }

    pub fn terms(&self) -> &[BasisTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Families of degree up to the truncation order, one per input.
    pub fn families(&self, dists: &[Distribution]) -> Result<Vec<PolynomialFamily>> {
        if dists.len() != self.dims {
            return Err(Error::Shape(format!(
                "basis has {} inputs but {} distributions were given",
                self.dims,
                dists.len()
            )));
        }
        dists.iter().map(|d| family_for(*d, self.order)).collect()
    }

    /// Evaluates every basis function at `x`, writing into `row`.
    fn eval_row(&self, families: &[PolynomialFamily], x: &[f64], scratch: &mut [f64], row: &mut [f64]) -> Result<()> {
        let width = self.order + 1;
        for (i, fam) in families.iter().enumerate() {
            fam.eval_all(x[i], &mut scratch[i * width..(i + 1) * width])?;
        }
        for (slot, term) in row.iter_mut().zip(&self.terms) {
            *slot = term
                .vars
                .iter()
                .zip(&term.degrees)
                .map(|(&v, &d)| scratch[v * width + d])
                .product();
        }
        Ok(())
    }
}

pub fn eval_basis_term(term: &BasisTerm, families: &[PolynomialFamily], x: &[f64]) -> Result<f64> {
    if x.len() != families.len() {
        return Err(Error::Shape(format!(
            "point has {} coordinates but {} families were given",
            x.len(),
            families.len()
        )));
    }
    let mut value = 1.0;
    for (&v, &d) in term.vars.iter().zip(&term.degrees) {
        let fam = families.get(v).ok_or_else(|| {
            Error::Shape(format!("term references input {} of {}", v + 1, families.len()))
        })?;
        value *= fam.eval(d, x[v])?;
    }
    Ok(value)
}

/// Input/output samples with the marginal distribution of each input.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    inputs: DMatrix<f64>,
    outputs: DVector<f64>,
    distributions: Vec<Distribution>,
}

impl TrainingSet {
    pub fn new(inputs: DMatrix<f64>, outputs: DVector<f64>, distributions: Vec<Distribution>) -> Result<Self> {
        if inputs.nrows() == 0 {
            return Err(Error::Argument("training set needs at least one sample".into()));
        }
        if inputs.nrows() != outputs.len() {
            return Err(Error::Shape(format!(
                "{} input rows but {} outputs",
                inputs.nrows(),
                outputs.len()
            )));
        }
        if inputs.ncols() != distributions.len() {
            return Err(Error::Shape(format!(
                "{} input columns but {} distributions",
                inputs.ncols(),
                distributions.len()
            )));
        }
        for d in &distributions {
            d.validate()?;
        }
        for l in 0..inputs.nrows() {
            for (j, d) in distributions.iter().enumerate() {
                let x = inputs[(l, j)];
                if !x.is_finite() {
                    return Err(Error::NonFinite {
                        row: l + 1,
                        col: j + 1,
                        context: "training input".into(),
                    });
                }
                if !d.in_support(x) {
                    return Err(Error::Ingestion {
                        row: l + 1,
                        message: format!("x{} = {x} lies outside the support of {:?}", j + 1, d),
                    });
                }
            }
            if !outputs[l].is_finite() {
                return Err(Error::NonFinite {
                    row: l + 1,
                    col: inputs.ncols() + 1,
                    context: "training output".into(),
                });
            }
        }
        Ok(TrainingSet {
            inputs,
            outputs,
            distributions,
        })
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn outputs(&self) -> &DVector<f64> {
        &self.outputs
    }

    pub fn distributions(&self) -> &[Distribution] {
        &self.distributions
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.distributions.len()
    }

    /// Reads `x1,...,xN,y` CSV. Rejects wrong column counts, non-numeric
    /// cells, non-finite values and out-of-support inputs.
    pub fn from_csv_reader<R: Read>(reader: R, distributions: Vec<Distribution>) -> Result<Self> {
        let n = distributions.len();
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Ingestion {
                row: 0,
                message: format!("unreadable header: {e}"),
            })?
            .clone();
        let expected: Vec<String> = (1..=n).map(|i| format!("x{i}")).chain(["y".to_string()]).collect();
        if headers.iter().collect::<Vec<_>>() != expected.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::Ingestion {
                row: 0,
                message: format!("expected header `{}`, found `{}`", expected.join(","), headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (idx, record) in rdr.records().enumerate() {
            let row = idx + 1;
            let record = record.map_err(|e| Error::Ingestion {
                row,
                message: e.to_string(),
            })?;
            if record.len() != n + 1 {
                return Err(Error::Ingestion {
                    row,
                    message: format!("expected {} columns, found {}", n + 1, record.len()),
                });
            }
            for (j, cell) in record.iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| Error::Ingestion {
                    row,
                    message: format!("column {} is not a number: `{cell}`", j + 1),
                })?;
                if !v.is_finite() {
                    return Err(Error::Ingestion {
                        row,
                        message: format!("column {} is not finite", j + 1),
                    });
                }
                if j < n {
                    if !distributions[j].in_support(v) {
                        return Err(Error::Ingestion {
                            row,
                            message: format!("x{} = {v} lies outside its support", j + 1),
                        });
                    }
                    xs.push(v);
                } else {
                    ys.push(v);
                }
            }
        }
        if ys.is_empty() {
            return Err(Error::Ingestion {
                row: 1,
                message: "no data rows".into(),
            });
        }
        let inputs = DMatrix::from_row_slice(ys.len(), n, &xs);
        TrainingSet::new(inputs, DVector::from_vec(ys), distributions)
    }

    pub fn from_csv_path(path: &Path, distributions: Vec<Distribution>) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file, distributions)
    }
}

/// Writes an `x1..xN[,y]` CSV. Values use the shortest round-trip form.
pub fn write_csv<W: std::io::Write>(writer: W, inputs: &DMatrix<f64>, outputs: Option<&DVector<f64>>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| Error::Format(format!("csv write failed: {e}"));
    let mut header: Vec<String> = (1..=inputs.ncols()).map(|i| format!("x{i}")).collect();
    if outputs.is_some() {
        header.push("y".into());
    }
    wtr.write_record(&header).map_err(to_err)?;
    for l in 0..inputs.nrows() {
        let mut record: Vec<String> = inputs.row(l).iter().map(|v| v.to_string()).collect();
        if let Some(y) = outputs {
            record.push(y[l].to_string());
        }
        wtr.write_record(&record).map_err(to_err)?;
    }
    wtr.flush().map_err(|e| Error::Format(format!("csv flush failed: {e}")))?;
    Ok(())
}

/// Builds the regression system `A c = b` with `A[l][i] = Psi_i(x_l)`.
pub fn design_matrix(ts: &TrainingSet, basis: &BasisSet) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let a = design_matrix_for(ts.inputs(), ts.distributions(), basis)?;
    Ok((a, ts.outputs().clone()))
}

/// Evaluates the basis at every row of `inputs`.
pub fn design_matrix_for(inputs: &DMatrix<f64>, dists: &[Distribution], basis: &BasisSet) -> Result<DMatrix<f64>> {
    let families = basis.families(dists)?;
    if inputs.ncols() != basis.dims() {
        return Err(Error::Shape(format!(
            "inputs have {} columns, basis expects {}",
            inputs.ncols(),
            basis.dims()
        )));
    }
    let n = basis.dims();
    let width = basis.order() + 1;
    let cols = basis.len();
    let rows: Vec<Vec<f64>> = (0..inputs.nrows())
        .into_par_iter()
        .map(|l| {
            let x: Vec<f64> = inputs.row(l).iter().copied().collect();
            let mut scratch = vec![0.0; n * width];
            let mut row = vec![0.0; cols];
            basis.eval_row(&families, &x, &mut scratch, &mut row)?;
            if let Some(i) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    row: l + 1,
                    col: i + 1,
                    context: "basis evaluation".into(),
                });
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(rows.len(), cols, |l, i| rows[l][i]))
}

/// Fitted surrogate `y(x) = sum_i c_i Psi_i(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct PddModel {
    basis: BasisSet,
    coefficients: Vec<f64>,
    distributions: Vec<Distribution>,
}

#[derive(Deserialize)]
struct RawModel {
    basis: BasisSet,
    coefficients: Vec<f64>,
    distributions: Vec<Distribution>,
}

impl TryFrom<RawModel> for PddModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        PddModel::new(raw.basis, raw.coefficients, raw.distributions)
    }
}

impl PddModel {
    pub fn new(basis: BasisSet, coefficients: Vec<f64>, distributions: Vec<Distribution>) -> Result<Self> {
        if coefficients.len() != basis.len() {
            return Err(Error::Shape(format!(
                "{} coefficients for a basis of {} terms",
                coefficients.len(),
                basis.len()
            )));
        }
        if distributions.len() != basis.dims() {
            return Err(Error::Shape(format!(
                "{} distributions for {} inputs",
                distributions.len(),
                basis.dims()
            )));
        }
        if let Some(i) = coefficients.iter().position(|c| !c.is_finite()) {
            return Err(Error::Numeric(format!("coefficient {} is not finite", i + 1)));
        }
        Ok(PddModel {
            basis,
            coefficients,
            distributions,
        })
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn distributions(&self) -> &[Distribution] {
        &self.distributions
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.basis.dims() {
            return Err(Error::Shape(format!(
                "point has {} coordinates, model expects {}",
                x.len(),
                self.basis.dims()
            )));
        }
        let families = self.basis.families(&self.distributions)?;
        let width = self.basis.order() + 1;
        let mut scratch = vec![0.0; self.basis.dims() * width];
        let mut row = vec![0.0; self.basis.len()];
        self.basis.eval_row(&families, x, &mut scratch, &mut row)?;
        Ok(row.iter().zip(&self.coefficients).map(|(p, c)| p * c).sum())
    }
}

pub fn predict(model: &PddModel, x: &[f64]) -> Result<f64> {
    model.predict(x)
}
