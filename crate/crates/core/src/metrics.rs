//! H-infinity norm and band-limited Bode integral of stable transfer
//! functions. An identically-zero map has norm exactly 0 and a Bode
//! integral of minus infinity, reported as a sentinel.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polyrat::{RationalFunction, HURWITZ_MARGIN};

const HINF_GRID_POINTS: usize = 2000;
const HINF_OMEGA_MIN: f64 = 1e-3;
const HINF_OMEGA_MAX: f64 = 1e4;
const GOLDEN_REL_TOL: f64 = 1e-6;

pub const DEFAULT_OMEGA_MAX: f64 = 1e4;
const BODE_ABS_TOL: f64 = 1e-6;
const BODE_EXCLUSION: f64 = 1e-12;
const SIMPSON_MAX_DEPTH: u32 = 48;

fn require_stable(tf: &RationalFunction) -> Result<()> {
    if tf.is_stable(HURWITZ_MARGIN)? {
        Ok(())
    } else {
        Err(Error::Domain(format!("{tf} is unstable; the norm is undefined")))
    }
}

fn magnitude(tf: &RationalFunction, omega: f64) -> f64 {
    tf.freq_response(omega).map(|v| v.norm()).unwrap_or(f64::INFINITY)
}

/// `sup_ω |T(jω)|` from a log grid on `[1e-3, 1e4]` rad/s plus DC and the
/// high-frequency limit, refined by golden-section search around the best
/// grid point.
pub fn hinf_norm(tf: &RationalFunction) -> Result<f64> {
    if tf.is_zero() {
        return Ok(0.0);
    }
    require_stable(tf)?;
    let grid: Vec<f64> = (0..HINF_GRID_POINTS)
        .map(|i| {
            let e = HINF_OMEGA_MIN.log10()
                + (HINF_OMEGA_MAX.log10() - HINF_OMEGA_MIN.log10()) * i as f64 / (HINF_GRID_POINTS - 1) as f64;
            10f64.powf(e)
        })
        .collect();
    let mags: Vec<f64> = grid.iter().map(|&w| magnitude(tf, w)).collect();
    let (imax, &gmax) = mags
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is nonempty");

    let dc = magnitude(tf, 0.0);
    let infinity = if tf.num().degree() == tf.den().degree() {
        (tf.num().leading() / tf.den().leading()).abs()
    } else {
        0.0
    };

    let lo = if imax == 0 { 0.0 } else { grid[imax - 1] };
    let hi = grid[(imax + 1).min(grid.len() - 1)];
    let refined = golden_max(|w| magnitude(tf, w), lo, hi);
    Ok(gmax.max(refined).max(dc).max(infinity))
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a) > GOLDEN_REL_TOL * (a.abs() + b.abs()).max(1e-12) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd).max(f(0.5 * (a + b)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BodeIntegral {
    NegInfinity,
    Finite(f64),
}

impl BodeIntegral {
    pub fn value(&self) -> f64 {
        match self {
            BodeIntegral::NegInfinity => f64::NEG_INFINITY,
            BodeIntegral::Finite(v) => *v,
        }
    }
}

impl fmt::Display for BodeIntegral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BodeIntegral::NegInfinity => f.write_str("-inf"),
            BodeIntegral::Finite(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for BodeIntegral {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BodeIntegral::NegInfinity => s.serialize_str("-inf"),
            BodeIntegral::Finite(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for BodeIntegral {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(BodeIntegral::Finite(v)),
            Repr::Text(t) if t == "-inf" => Ok(BodeIntegral::NegInfinity),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("unexpected Bode value '{t}'"))),
        }
    }
}

/// `(1/2π) ∫_{-Ω}^{Ω} ln|T(jω)| dω = (1/π) ∫_0^Ω ln|T(jω)| dω` by adaptive
/// Simpson quadrature. Imaginary-axis zeros of the numerator are excluded
/// by a small radius and used as split points.
pub fn bode_integral(tf: &RationalFunction, omega_max: f64) -> Result<BodeIntegral> {
    if !(omega_max > 0.0 && omega_max.is_finite()) {
        return Err(Error::Domain("omega_max must be positive".into()));
    }
    if tf.is_zero() {
        return Ok(BodeIntegral::NegInfinity);
    }
    require_stable(tf)?;

    let integrand = |w: f64| magnitude(tf, w).ln();

    let mut breaks = vec![0.0, omega_max];
    for z in tf.zeros()? {
        if z.re.abs() <= 1e-9 * (1.0 + z.norm()) && z.im >= 0.0 && z.im < omega_max {
            breaks.push(z.im);
        }
    }
    // decade splits keep each panel's dynamic range modest
    let mut edge = 1e-3;
    while edge < omega_max {
        breaks.push(edge);
        edge *= 10.0;
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= BODE_EXCLUSION);

    let singular: Vec<f64> = tf
        .zeros()?
        .iter()
        .filter(|z| z.re.abs() <= 1e-9 * (1.0 + z.norm()))
        .map(|z| z.im.abs())
        .collect();
    let near_singular = |w: f64| singular.iter().any(|s| (w - s).abs() <= BODE_EXCLUSION * 2.0);

    let panels = breaks.len() - 1;
    let tol = BODE_ABS_TOL * std::f64::consts::PI / panels as f64;
    let mut total = 0.0;
    for win in breaks.windows(2) {
        let (mut a, mut b) = (win[0], win[1]);
        if near_singular(a) {
            a += BODE_EXCLUSION;
        }
        if near_singular(b) {
            b -= BODE_EXCLUSION;
        }
        if b > a {
            total += adaptive_simpson(&integrand, a, b, tol);
        }
    }
    Ok(BodeIntegral::Finite(total / std::f64::consts::PI))
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, SIMPSON_MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
