use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real polynomial in `s`, coefficients in ascending degree.
///
/// The zero polynomial is stored with no coefficients; every other
/// polynomial has a nonzero last (leading) coefficient.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// Monic polynomial with the given roots. Imaginary parts of the
    /// expanded coefficients are dropped, so complex roots should come in
    /// conjugate pairs.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut acc = vec![Complex64::new(1.0, 0.0)];
        for &r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
            for (k, &c) in acc.iter().enumerate() {
                next[k + 1] += c;
                next[k] -= c * r;
            }
            acc = next;
        }
        Self::new(acc.into_iter().map(|c| c.re).collect())
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, s: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    /// Sum of |c_k| |s|^k, the natural scale for judging whether a value
    /// of `eval_complex` is numerically zero.
    pub(crate) fn eval_scale(&self, s: Complex64) -> f64 {
        let r = s.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c.abs())
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    /// Drops leading coefficients whose magnitude is at most `rel` times the
    /// largest coefficient.
    pub fn trim_relative(&self, rel: f64) -> Self {
        let threshold = rel * self.max_abs();
        let mut coeffs = self.coeffs.clone();
        while coeffs.last().is_some_and(|c| c.abs() <= threshold) {
            coeffs.pop();
        }
        Self::new(coeffs)
    }

    /// Euclidean division `self = q * divisor + r` with `deg r < deg divisor`.
    pub fn div_rem(&self, divisor: &Polynomial) -> Result<(Polynomial, Polynomial)> {
        if divisor.is_zero() {
            return Err(Error::Domain("polynomial division by zero".into()));
        }
        let dd = divisor.degree();
        if self.is_zero() || self.degree() < dd {
            return Ok((Polynomial::zero(), self.clone()));
        }
        let lead = divisor.leading();
        let mut rem = self.coeffs.clone();
        let mut quot = vec![0.0; self.degree() - dd + 1];
        for k in (0..quot.len()).rev() {
            let factor = rem[k + dd] / lead;
            quot[k] = factor;
            for (j, &dc) in divisor.coeffs.iter().enumerate() {
                rem[k + j] -= factor * dc;
            }
            rem[k + dd] = 0.0;
        }
        rem.truncate(dd);
        Ok((Polynomial::new(quot), Polynomial::new(rem)))
    }

    /// All complex roots with multiplicity, from the eigenvalues of the
    /// companion matrix. Sorted by real part, then imaginary part.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        if self.is_zero() {
            return Err(Error::Domain("roots of the zero polynomial".into()));
        }
        let n = self.degree();
        if n == 0 {
            return Err(Error::Domain("roots of a constant polynomial".into()));
        }
        // exact roots at the origin; eigenvalues would scatter them
        let zeros = self.coeffs.iter().take_while(|c| **c == 0.0).count();
        if zeros > 0 {
            let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
            if zeros < n {
                roots.extend(Polynomial::new(self.coeffs[zeros..].to_vec()).roots()?);
            }
            roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
            return Ok(roots);
        }
        let lead = self.leading();
        let mut roots = if n == 1 {
            vec![Complex64::new(-self.coeffs[0] / lead, 0.0)]
        } else {
            let mut companion = DMatrix::<f64>::zeros(n, n);
            for i in 1..n {
                companion[(i, i - 1)] = 1.0;
            }
            for i in 0..n {
                companion[(i, n - 1)] = -self.coeffs[i] / lead;
            }
            let eig = companion.complex_eigenvalues();
            if eig.iter().any(|z| !z.re.is_finite()) {
                return Err(Error::Domain(format!("eigenvalue solver failed on {self}")));
            }
            // a 2x2 block with a double real eigenvalue can come back with
            // a NaN imaginary part
            eig.iter()
                .map(|z| if z.im.is_finite() { *z } else { Complex64::new(z.re, 0.0) })
                .map(|z| self.polish(z))
                .collect::<Vec<_>>()
        };
        for r in roots.iter_mut() {
            if r.im.abs() <= 1e-12 * (1.0 + r.re.abs()) {
                r.im = 0.0;
            }
        }
        roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        Ok(roots)
    }

    // A few guarded Newton steps; a step is kept only if it shrinks |p|.
    fn polish(&self, mut z: Complex64) -> Complex64 {
        let dp = self.derivative();
        let mut fz = self.eval_complex(z).norm();
        for _ in 0..3 {
            let d = dp.eval_complex(z);
            if d.norm() == 0.0 || fz == 0.0 {
                break;
            }
            let cand = z - self.eval_complex(z) / d;
            let fc = self.eval_complex(cand).norm();
            if !(fc < fz) {
                break;
            }
            z = cand;
            fz = fc;
        }
        z
    }

    /// True iff every root has real part below `-margin`. A nonzero
    /// constant has no roots and counts as Hurwitz.
    pub fn is_hurwitz(&self, margin: f64) -> Result<bool> {
        if self.is_zero() {
            return Err(Error::Domain("stability of the zero polynomial".into()));
        }
        if self.degree() == 0 {
            return Ok(true);
        }
        Ok(self.roots()?.iter().all(|r| r.re < -margin))
    }
}

impl From<Vec<f64>> for Polynomial {
    fn from(coeffs: Vec<f64>) -> Self {
        Self::new(coeffs)
    }
}

impl From<Polynomial> for Vec<f64> {
    fn from(p: Polynomial) -> Self {
        if p.coeffs.is_empty() {
            vec![0.0]
        } else {
            p.coeffs
        }
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;

    fn add(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let get = |p: &Polynomial, k: usize| p.coeffs.get(k).copied().unwrap_or(0.0);
        Polynomial::new((0..n).map(|k| get(self, k) + get(rhs, k)).collect())
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;

    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self + &(-rhs)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;

    fn neg(self) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|c| -c).collect())
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;

    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0.0 {
                continue;
            }
            let sign = if c < 0.0 { "-" } else { "+" };
            if first {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            let mag = c.abs();
            match k {
                0 => write!(f, "{mag}")?,
                _ => {
                    if mag != 1.0 {
                        write!(f, "{mag}")?;
                    }
                    if k == 1 {
                        write!(f, "s")?;
                    } else {
                        write!(f, "s^{k}")?;
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roots_at_origin_are_exact() {
        let p = Polynomial::new(vec![0.0, 0.0, 0.0, 2.0, 1.0]);
        let roots = p.roots().unwrap();
        assert_eq!(roots.iter().filter(|z| **z == Complex64::new(0.0, 0.0)).count(), 3);
        assert!(roots.iter().any(|z| (z.re + 2.0).abs() < 1e-14));
    }

    #[test]
    fn double_root_has_finite_roots() {
        let p = Polynomial::new(vec![
            42.68931313358612,
            42.9030907751363,
            -3.202930960041524,
            -8.514066380225685,
            1.5272056279646793,
            1.0,
        ]);
        let roots = p.roots().unwrap();
        assert!(roots.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        let near = roots.iter().filter(|z| (z.re + 1.4940318868086688).abs() < 1e-6).count();
        assert_eq!(near, 2);
    }

    fn sorted_re(mut v: Vec<Complex64>) -> Vec<f64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re));
        v.into_iter().map(|z| z.re).collect()
    }

    #[test]
    fn canonical_zero() {
        assert!(Polynomial::new(vec![0.0, 0.0]).is_zero());
        assert_eq!(Polynomial::new(vec![1.0, 2.0, 0.0]).coeffs(), &[1.0, 2.0]);
        let json = serde_json::to_string(&Polynomial::zero()).unwrap();
        assert_eq!(json, "[0.0]");
        let back: Polynomial = serde_json::from_str(&json).unwrap();
        assert!(back.is_zero());
    }

    #[test]
    fn linear_root() {
        let r = Polynomial::new(vec![1.0, 1.0]).roots().unwrap();
        assert_eq!(r, vec![Complex64::new(-1.0, 0.0)]);
    }

    #[test]
    fn imaginary_pair() {
        let r = Polynomial::new(vec![1.0, 0.0, 1.0]).roots().unwrap();
        assert_eq!(r.len(), 2);
        assert!((r[0] - Complex64::new(0.0, -1.0)).norm() < 1e-12);
        assert!((r[1] - Complex64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn factorable_quadratic() {
        let r = Polynomial::new(vec![2.0, 3.0, 1.0]).roots().unwrap();
        let re = sorted_re(r);
        assert!((re[0] + 2.0).abs() < 1e-12);
        assert!((re[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn roots_of_constants_rejected() {
        assert!(Polynomial::zero().roots().is_err());
        assert!(Polynomial::constant(3.0).roots().is_err());
    }

    #[test]
    fn hurwitz_examples() {
        assert!(Polynomial::new(vec![1.0, 1.0]).is_hurwitz(1e-9).unwrap());
        assert!(!Polynomial::new(vec![1.0, -1.0, 1.0]).is_hurwitz(1e-9).unwrap());
        // (s+1)(s+2) + K(s-1) at K = 1 is s^2 + 4s + 1; quadratic formula
        // gives (-4 +- sqrt(12)) / 2, both negative.
        let k = 1.0;
        let p = Polynomial::new(vec![2.0 - k, 3.0 + k, 1.0]);
        let larger = (-4.0 + 12f64.sqrt()) / 2.0;
        assert!(larger < 0.0);
        assert!(p.is_hurwitz(1e-9).unwrap());
        let max_re = p.roots().unwrap().iter().map(|r| r.re).fold(f64::MIN, f64::max);
        assert!((max_re - larger).abs() < 1e-12);
        assert!(Polynomial::constant(2.0).is_hurwitz(1e-9).unwrap());
        assert!(Polynomial::zero().is_hurwitz(1e-9).is_err());
    }

    #[test]
    fn division() {
        // (s^2 + 3s + 2) / (s + 1) = s + 2
        let p = Polynomial::new(vec![2.0, 3.0, 1.0]);
        let (q, r) = p.div_rem(&Polynomial::new(vec![1.0, 1.0])).unwrap();
        assert_eq!(q.coeffs(), &[2.0, 1.0]);
        assert!(r.is_zero());
    }

    #[test]
    fn from_roots_expands() {
        let p = Polynomial::from_roots(&[
            Complex64::new(-1.0, 2.0),
            Complex64::new(-1.0, -2.0),
        ]);
        assert_eq!(p.coeffs(), &[5.0, 2.0, 1.0]);
    }

    #[test]
    fn display() {
        assert_eq!(Polynomial::new(vec![2.0, -3.0, 1.0]).to_string(), "s^2 - 3s + 2");
        assert_eq!(Polynomial::zero().to_string(), "0");
    }
}
