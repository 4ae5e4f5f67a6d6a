use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::poly::Polynomial;
use crate::error::{Error, Result};

/// Leading coefficients at or below this fraction of the largest
/// coefficient are treated as arithmetic residue and dropped.
const LEADING_TRIM_REL: f64 = 1e-13;

/// A numerator whose coefficients are all below this (scaled by the monic
/// denominator's largest coefficient) is snapped to exactly zero.
pub const ZERO_SNAP_TOL: f64 = 1e-10;

/// Common-root pairing distance, relative to `1 + |root|`.
pub const CANCEL_TOL: f64 = 1e-7;

/// Eigenvalues of a multiple root scatter by roughly eps^(1/m); roots this
/// close are grouped and represented by their centroid before pairing.
const CLUSTER_TOL: f64 = 1e-4;

pub const DEFAULT_EQ_TOL: f64 = 1e-9;

/// Ratio of real polynomials in `s`, always held in canonical form:
/// monic denominator, common roots cancelled, zero as `0/1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RationalRepr", into = "RationalRepr")]
pub struct RationalFunction {
    num: Polynomial,
    den: Polynomial,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RationalRepr {
    num: Polynomial,
    den: Polynomial,
}

impl TryFrom<RationalRepr> for RationalFunction {
    type Error = Error;

    fn try_from(r: RationalRepr) -> Result<Self> {
        RationalFunction::new(r.num, r.den)
    }
}

impl From<RationalFunction> for RationalRepr {
    fn from(r: RationalFunction) -> Self {
        RationalRepr { num: r.num, den: r.den }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Inv,
}

impl RationalFunction {
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::Domain("denominator is identically zero".into()));
        }
        Ok(Self::from_parts_unchecked(num, den).normalize())
    }

    pub fn from_coeffs(num: &[f64], den: &[f64]) -> Result<Self> {
        Self::new(Polynomial::new(num.to_vec()), Polynomial::new(den.to_vec()))
    }

    pub(crate) fn from_parts_unchecked(num: Polynomial, den: Polynomial) -> Self {
        Self { num, den }
    }

    pub fn zero() -> Self {
        Self { num: Polynomial::zero(), den: Polynomial::one() }
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn constant(c: f64) -> Self {
        Self { num: Polynomial::constant(c), den: Polynomial::one() }
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// `Some(k)` when the function is a constant `k`.
    pub fn as_constant(&self) -> Option<f64> {
        if self.den.degree() == 0 && self.num.degree() == 0 {
            Some(self.num.coeffs().first().copied().unwrap_or(0.0) / self.den.leading())
        } else {
            None
        }
    }

    pub fn is_proper(&self) -> bool {
        self.is_zero() || self.num.degree() <= self.den.degree()
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.is_zero() || self.num.degree() < self.den.degree()
    }

    pub fn poles(&self) -> Result<Vec<Complex64>> {
        if self.den.degree() == 0 {
            return Ok(Vec::new());
        }
        self.den.roots()
    }

    pub fn zeros(&self) -> Result<Vec<Complex64>> {
        if self.num.degree() == 0 {
            return Ok(Vec::new());
        }
        self.num.roots()
    }

    /// Denominator is Hurwitz with the given margin; the zero function
    /// counts as stable.
    pub fn is_stable(&self, margin: f64) -> Result<bool> {
        if self.is_zero() {
            return Ok(true);
        }
        self.den.is_hurwitz(margin)
    }

    /// Canonical form: trims leading residue, makes the denominator monic,
    /// snaps numerically-zero numerators to `0/1`, and deflates common
    /// roots of numerator and denominator until none remain.
    pub fn normalize(&self) -> Self {
        let mut num = self.num.trim_relative(LEADING_TRIM_REL);
        let mut den = self.den.trim_relative(LEADING_TRIM_REL);
        if den.is_zero() {
            // only reachable through from_parts_unchecked misuse
            den = Polynomial::one();
        }
        loop {
            let lead = den.leading();
            if lead != 1.0 {
                num = num.scale(1.0 / lead);
                den = den.scale(1.0 / lead);
            }
            if num.max_abs() <= ZERO_SNAP_TOL * den.max_abs().max(1.0) {
                return Self::zero();
            }
            match common_factor(&num, &den) {
                Some(g) => {
                    num = deflate(&num, &g);
                    den = deflate(&den, &g);
                }
                None => return Self { num, den },
            }
        }
    }

    pub fn eval(&self, s: Complex64) -> Result<Complex64> {
        let d = self.den.eval_complex(s);
        if d.norm() <= 1e-12 * self.den.eval_scale(s) {
            return Err(Error::PoleEvaluation { at: s });
        }
        Ok(self.num.eval_complex(s) / d)
    }

    /// Frequency response `T(jω)`.
    pub fn freq_response(&self, omega: f64) -> Result<Complex64> {
        self.eval(Complex64::new(0.0, omega))
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::from_parts_unchecked(self.num.scale(k), self.den.clone()).normalize()
    }

    pub fn inv(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::Domain("inverse of the zero function".into()));
        }
        Ok(Self::from_parts_unchecked(self.den.clone(), self.num.clone()).normalize())
    }

    pub fn checked_div(&self, rhs: &Self) -> Result<Self> {
        Ok(self * &rhs.inv()?)
    }

    /// Equality of canonical forms: same degrees and every coefficient
    /// within `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let a = self.normalize();
        let b = other.normalize();
        fn close(p: &Polynomial, q: &Polynomial, tol: f64) -> bool {
            p.coeffs().len() == q.coeffs().len()
                && p.coeffs().iter().zip(q.coeffs()).all(|(x, y)| (x - y).abs() < tol)
        }
        close(&a.num, &b.num, tol) && close(&a.den, &b.den, tol)
    }
}

pub fn rf_arith(x: &RationalFunction, y: &RationalFunction, op: ArithOp) -> Result<RationalFunction> {
    Ok(match op {
        ArithOp::Add => x + y,
        ArithOp::Sub => x - y,
        ArithOp::Mul => x * y,
        ArithOp::Div => x.checked_div(y)?,
        ArithOp::Neg => -x,
        ArithOp::Inv => x.inv()?,
    })
}

pub fn rf_normalize(x: &RationalFunction) -> RationalFunction {
    x.normalize()
}

pub fn rf_eval(x: &RationalFunction, s0: Complex64) -> Result<Complex64> {
    x.eval(s0)
}

pub fn rf_equal(x: &RationalFunction, y: &RationalFunction, tol: f64) -> bool {
    x.approx_eq(y, tol)
}

fn clusters(p: &Polynomial, roots: &[Complex64]) -> Vec<(Complex64, usize)> {
    let mut groups: Vec<Vec<Complex64>> = Vec::new();
    for &r in roots {
        let hit = groups
            .iter_mut()
            .find(|members| members.iter().any(|m| (m - r).norm() < CLUSTER_TOL * (1.0 + m.norm())));
        match hit {
            Some(members) => members.push(r),
            None => groups.push(vec![r]),
        }
    }
    let mut out = Vec::with_capacity(groups.len());
    for members in groups {
        let n = members.len();
        let centre = members.iter().sum::<Complex64>() / n as f64;
        let spread = members.iter().map(|m| (m - centre).norm()).fold(0.0, f64::max);
        if n > 1 && spread <= multiple_root_radius(p, centre, n) {
            out.push((refine_multiple(p, centre, n), n));
        } else {
            // distinct roots that merely lie close together
            out.extend(members.into_iter().map(|m| (m, 1)));
        }
    }
    out
}

/// How far rounding noise can scatter an n-fold root at `c`: the roots of
/// `p + e` near `c` lie within `(|e(c)| / |p^(n)(c)/n!|)^(1/n)`.
fn multiple_root_radius(p: &Polynomial, c: Complex64, n: usize) -> f64 {
    let noise = 1e-14
        * p.coeffs()
            .iter()
            .enumerate()
            .map(|(i, a)| a.abs() * c.norm().powi(i as i32))
            .sum::<f64>();
    let mut q = p.clone();
    let mut factorial = 1.0;
    for k in 1..=n {
        q = q.derivative();
        factorial *= k as f64;
    }
    let curvature = q.eval_complex(c).norm() / factorial;
    if curvature == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (noise / curvature).powf(1.0 / n as f64)
}

/// An n-fold root of `p` is a simple root of its (n-1)th derivative.
fn refine_multiple(p: &Polynomial, mut z: Complex64, n: usize) -> Complex64 {
    if n < 2 {
        return z;
    }
    let mut q = p.clone();
    for _ in 1..n {
        q = q.derivative();
    }
    let dq = q.derivative();
    let start = z;
    for _ in 0..8 {
        let d = dq.eval_complex(z);
        if d.norm() == 0.0 {
            break;
        }
        let step = q.eval_complex(z) / d;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        z -= step;
        if step.norm() <= 1e-15 * (1.0 + z.norm()) {
            break;
        }
    }
    if (z - start).norm() < CLUSTER_TOL * (1.0 + start.norm()) {
        z
    } else {
        start
    }
}

/// Monic polynomial whose roots are shared (within `CANCEL_TOL`) by `num`
/// and `den`, or `None` when nothing cancels.
fn common_factor(num: &Polynomial, den: &Polynomial) -> Option<Polynomial> {
    if num.degree() == 0 || den.degree() == 0 {
        return None;
    }
    let rn = clusters(num, &num.roots().ok()?);
    let mut rd = clusters(den, &den.roots().ok()?);
    let mut shared = Vec::new();
    for (zn, cn) in rn {
        let best = rd
            .iter_mut()
            .filter(|(_, cd)| *cd > 0)
            .map(|entry| ((entry.0 - zn).norm(), entry))
            .filter(|(dist, _)| *dist < CANCEL_TOL * (1.0 + zn.norm()))
            .min_by(|a, b| a.0.total_cmp(&b.0));
        if let Some((_, (zd, cd))) = best {
            let m = cn.min(*cd);
            *cd -= m;
            let root = (zn + *zd) * 0.5;
            shared.extend(std::iter::repeat_n(root, m));
        }
    }
    if shared.is_empty() {
        None
    } else {
        Some(Polynomial::from_roots(&shared))
    }
}

fn deflate(p: &Polynomial, g: &Polynomial) -> Polynomial {
    // the remainder is rounding residue of a root that was matched
    p.div_rem(g).map(|(q, _)| q).unwrap_or_else(|_| p.clone())
}

impl Add for &RationalFunction {
    type Output = RationalFunction;

    fn add(self, rhs: &RationalFunction) -> RationalFunction {
        let (num, den) = if self.den == rhs.den {
            (&self.num + &rhs.num, self.den.clone())
        } else {
            (
                &(&self.num * &rhs.den) + &(&rhs.num * &self.den),
                &self.den * &rhs.den,
            )
        };
        RationalFunction::from_parts_unchecked(num, den).normalize()
    }
}

impl Sub for &RationalFunction {
    type Output = RationalFunction;

    fn sub(self, rhs: &RationalFunction) -> RationalFunction {
        self + &(-rhs)
    }
}

impl Neg for &RationalFunction {
    type Output = RationalFunction;

    fn neg(self) -> RationalFunction {
        RationalFunction::from_parts_unchecked(-&self.num, self.den.clone())
    }
}

impl Mul for &RationalFunction {
    type Output = RationalFunction;

    fn mul(self, rhs: &RationalFunction) -> RationalFunction {
        RationalFunction::from_parts_unchecked(&self.num * &rhs.num, &self.den * &rhs.den)
            .normalize()
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for RationalFunction {
            type Output = RationalFunction;
            fn $m(self, rhs: RationalFunction) -> RationalFunction {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for RationalFunction {
    type Output = RationalFunction;

    fn neg(self) -> RationalFunction {
        -&self
    }
}

impl From<f64> for RationalFunction {
    fn from(c: f64) -> Self {
        Self::constant(c)
    }
}

impl fmt::Display for RationalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.degree() == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "({}) / ({})", self.num, self.den)
        }
    }
}
