//! Variance-based global sensitivity analysis with sparse polynomial
//! dimensional decomposition (PDD) surrogates.
//!
//! The pipeline is: describe the inputs ([`measures`]), enumerate a
//! truncated basis and assemble the regression system ([`pdd`]), solve for
//! the coefficients ([`regress`], [`fit`]), and read Sobol indices straight
//! off the coefficients ([`gsa`]). [`bench`] carries analytic test functions
//! and a replicated-study driver.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod fit;
pub mod gsa;
pub mod measures;
pub mod pdd;
pub mod regress;

pub use error::{Error, ErrorKind, Result};
pub use measures::{Distribution, PolynomialFamily, SamplingMethod};
pub use pdd::{BasisSet, BasisTerm, PddModel, TrainingSet};
pub use regress::DmorphConfig;
