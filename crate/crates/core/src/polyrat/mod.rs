//! Real-coefficient polynomials and rational functions in the Laplace
//! variable `s`.

mod poly;
mod rational;

pub use poly::Polynomial;
pub use rational::{
    rf_arith, rf_equal, rf_eval, rf_normalize, ArithOp, RationalFunction, CANCEL_TOL,
    DEFAULT_EQ_TOL, ZERO_SNAP_TOL,
};

use num_complex::Complex64;

use crate::error::Result;

/// Stability margin used for every closed-loop Hurwitz test.
pub const HURWITZ_MARGIN: f64 = 1e-9;

pub fn poly_roots(p: &Polynomial) -> Result<Vec<Complex64>> {
    p.roots()
}

pub fn poly_is_hurwitz(p: &Polynomial, margin: f64) -> Result<bool> {
    p.is_hurwitz(margin)
}
