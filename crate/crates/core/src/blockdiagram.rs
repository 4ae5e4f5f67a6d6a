//! Signal-flow graphs of the three loop topologies and a linear solver over
//! the rational-function field.
//!
//! Every non-exogenous signal has one defining equation
//! `signal = Σ gain_i · signal_i`. Solving `(I − G) x = g_in` by Gaussian
//! elimination gives any input-to-signal transfer function without relying
//! on the closed-form expressions in [`crate::closedloop`], which makes the
//! solver an independent check of them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::closedloop::{CodingScheme, LoopModel, MapName, SixTransferFunctions};
use crate::error::{Error, Result};
use crate::polyrat::{Polynomial, RationalFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signal {
    R,
    W,
    Z,
    U,
    Q,
    QBar,
    UBar,
    YBar,
    V,
    VBar,
    Y,
}

impl Signal {
    pub fn name(&self) -> &'static str {
        match self {
            Signal::R => "r",
            Signal::W => "w",
            Signal::Z => "z",
            Signal::U => "u",
            Signal::Q => "q",
            Signal::QBar => "q_bar",
            Signal::UBar => "u_bar",
            Signal::YBar => "y_bar",
            Signal::V => "v",
            Signal::VBar => "v_bar",
            Signal::Y => "y",
        }
    }

    pub fn is_exogenous(&self) -> bool {
        matches!(self, Signal::R | Signal::W | Signal::Z)
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Signal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "r" => Signal::R,
            "w" => Signal::W,
            "z" => Signal::Z,
            "u" => Signal::U,
            "q" => Signal::Q,
            "q_bar" | "q̄" => Signal::QBar,
            "u_bar" | "ū" => Signal::UBar,
            "y_bar" | "ȳ" => Signal::YBar,
            "v" => Signal::V,
            "v_bar" | "v̄" => Signal::VBar,
            "y" => Signal::Y,
            other => return Err(Error::Domain(format!("unknown signal '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equation {
    pub lhs: Signal,
    pub terms: Vec<(RationalFunction, Signal)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalGraph {
    pub signals: Vec<Signal>,
    pub equations: Vec<Equation>,
    pub exogenous: Vec<Signal>,
}

fn eq(lhs: Signal, terms: Vec<(RationalFunction, Signal)>) -> Equation {
    Equation { lhs, terms }
}

fn k(c: f64) -> RationalFunction {
    RationalFunction::constant(c)
}

/// Canonical wiring of the uncoded, one-way and two-way loops. Attacks are
/// additive: `q̄ = q + w` (or `ū = u + w`) on the forward path and
/// `v = v̄ + z` (or `y = ȳ + z`) on the feedback path.
pub fn build_topology(model: &LoopModel) -> Result<SignalGraph> {
    use Signal::*;
    model.coding().validate()?;
    let p = model.plant().clone();
    let kk = model.controller().clone();
    let equations = match *model.coding() {
        CodingScheme::None => vec![
            eq(U, vec![(kk.clone(), R), (-&kk, Y)]),
            eq(UBar, vec![(k(1.0), U), (k(1.0), W)]),
            eq(YBar, vec![(p, UBar)]),
            eq(Y, vec![(k(1.0), YBar), (k(1.0), Z)]),
        ],
        CodingScheme::OneWay { alpha, beta } => vec![
            eq(U, vec![(kk.clone(), R), (-&kk, Y)]),
            eq(Q, vec![(k(alpha), U)]),
            eq(QBar, vec![(k(1.0), Q), (k(1.0), W)]),
            eq(UBar, vec![(k(1.0 / alpha), QBar)]),
            eq(YBar, vec![(p, UBar)]),
            eq(V, vec![(k(beta), YBar)]),
            eq(VBar, vec![(k(1.0), V), (k(1.0), Z)]),
            eq(Y, vec![(k(1.0 / beta), VBar)]),
        ],
        CodingScheme::TwoWay(m) => {
            let inv = m.inverse()?;
            vec![
                eq(U, vec![(kk.clone(), R), (-&kk, Y)]),
                eq(Q, vec![(k(m.a), U), (k(m.b), V)]),
                eq(Y, vec![(k(m.c), U), (k(m.d), V)]),
                eq(QBar, vec![(k(1.0), Q), (k(1.0), W)]),
                eq(UBar, vec![(k(inv.a_bar), QBar), (k(inv.b_bar), YBar)]),
                eq(VBar, vec![(k(inv.c_bar), QBar), (k(inv.d_bar), YBar)]),
                eq(YBar, vec![(p, UBar)]),
                eq(V, vec![(k(1.0), VBar), (k(1.0), Z)]),
            ]
        }
    };
    let exogenous = vec![R, W, Z];
    let mut signals = exogenous.clone();
    signals.extend(equations.iter().map(|e| e.lhs));
    let graph = SignalGraph { signals, equations, exogenous };
    graph.check()?;
    Ok(graph)
}

impl SignalGraph {
    pub fn unknowns(&self) -> Vec<Signal> {
        self.equations.iter().map(|e| e.lhs).collect()
    }

    fn check(&self) -> Result<()> {
        let unknowns = self.unknowns();
        for (i, s) in unknowns.iter().enumerate() {
            if self.exogenous.contains(s) {
                return Err(Error::Domain(format!("exogenous signal {s} has a defining equation")));
            }
            if unknowns[..i].contains(s) {
                return Err(Error::Domain(format!("signal {s} defined twice")));
            }
        }
        for e in &self.equations {
            for (_, s) in &e.terms {
                if !self.signals.contains(s) {
                    return Err(Error::Domain(format!("equation for {} references undeclared {s}", e.lhs)));
                }
                if !self.exogenous.contains(s) && !unknowns.contains(s) {
                    return Err(Error::Domain(format!("signal {s} has no defining equation")));
                }
            }
        }
        Ok(())
    }

    /// Transfer function from exogenous `input` to `output`, with the other
    /// exogenous inputs held at zero.
    pub fn solve_tf(&self, input: Signal, output: Signal) -> Result<RationalFunction> {
        if !self.exogenous.contains(&input) {
            return Err(Error::Domain(format!("{input} is not an exogenous input")));
        }
        if output == input {
            return Ok(RationalFunction::one());
        }
        if self.exogenous.contains(&output) {
            return Ok(RationalFunction::zero());
        }
        let target = self
            .unknowns()
            .iter()
            .position(|&u| u == output)
            .ok_or_else(|| Error::Domain(format!("signal {output} is not part of the graph")))?;
        Ok(self.solve_all(input)?.swap_remove(target).1)
    }

    /// Transfer functions from `input` to every non-exogenous signal, in
    /// equation order.
    pub fn solve_all(&self, input: Signal) -> Result<Vec<(Signal, RationalFunction)>> {
        if !self.exogenous.contains(&input) {
            return Err(Error::Domain(format!("{input} is not an exogenous input")));
        }
        let unknowns = self.unknowns();
        let col = |s: Signal| unknowns.iter().position(|&u| u == s);
        let n = unknowns.len();
        let mut a = vec![vec![RationalFunction::zero(); n]; n];
        let mut rhs = vec![RationalFunction::zero(); n];
        for (i, e) in self.equations.iter().enumerate() {
            a[i][i] = RationalFunction::one();
            for (gain, s) in &e.terms {
                if *s == input {
                    rhs[i] = &rhs[i] + gain;
                } else if let Some(j) = col(*s) {
                    a[i][j] = &a[i][j] - gain;
                }
            }
        }
        let x = solve_cramer(&a, &rhs, &self.equations)?;
        Ok(unknowns.into_iter().zip(x).collect())
    }
}

/// Clears the denominators of each row: row `i` is multiplied by the product
/// of its distinct entry denominators, giving a polynomial system.
fn polynomial_rows(a: &[Vec<RationalFunction>], rhs: &[RationalFunction]) -> (Vec<Vec<Polynomial>>, Vec<Polynomial>) {
    let mut pa = Vec::with_capacity(a.len());
    let mut pb = Vec::with_capacity(a.len());
    for (row, b) in a.iter().zip(rhs) {
        let mut dens: Vec<&Polynomial> = Vec::new();
        for x in row.iter().chain(std::iter::once(b)) {
            if !x.is_zero() && x.den().degree() > 0 && !dens.contains(&x.den()) {
                dens.push(x.den());
            }
        }
        // entry * lcm = num * (product of the other denominators) * const
        let scaled = |x: &RationalFunction| {
            if x.is_zero() {
                return Polynomial::zero();
            }
            let mut p = x.num().scale(1.0 / x.den().leading());
            for d in &dens {
                if *d != x.den() {
                    p = &p * d;
                }
            }
            p
        };
        pa.push(row.iter().map(scaled).collect());
        pb.push(scaled(b));
    }
    (pa, pb)
}

/// Determinant by cofactor expansion, always along the remaining row with
/// the fewest nonzero entries. The signal-flow matrices are sparse.
fn det(m: &[Vec<Polynomial>], rows: &[usize], cols: &[usize]) -> Polynomial {
    if rows.is_empty() {
        return Polynomial::one();
    }
    let (ri, &r) = rows
        .iter()
        .enumerate()
        .min_by_key(|(_, &r)| cols.iter().filter(|&&c| !m[r][c].is_zero()).count())
        .expect("rows is not empty");
    let sub_rows: Vec<usize> = rows.iter().copied().filter(|&x| x != r).collect();
    let mut total = Polynomial::zero();
    for (ci, &c) in cols.iter().enumerate() {
        if m[r][c].is_zero() {
            continue;
        }
        let sub_cols: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
        let minor = det(m, &sub_rows, &sub_cols);
        if minor.is_zero() {
            continue;
        }
        let term = &m[r][c] * &minor;
        total = if (ri + ci) % 2 == 0 { &total + &term } else { &total - &term };
    }
    total
}

/// Cramer's rule on the denominator-free system. Every solution is a ratio
/// of two polynomials built without division, so the only cancellation is
/// the final normalization.
fn solve_cramer(
    a: &[Vec<RationalFunction>],
    rhs: &[RationalFunction],
    equations: &[Equation],
) -> Result<Vec<RationalFunction>> {
    let n = rhs.len();
    let (m, b) = polynomial_rows(a, rhs);
    let idx: Vec<usize> = (0..n).collect();
    let d = det(&m, &idx, &idx);
    let scale: f64 = m
        .iter()
        .map(|row| row.iter().map(Polynomial::max_abs).fold(0.0, f64::max))
        .product();
    if d.is_zero() || d.max_abs() <= 1e-12 * scale {
        // name the dependent equations through elimination
        solve_full_pivot(a.to_vec(), rhs.to_vec(), equations)?;
        let equations = equations.iter().map(|e| format!("{} = ...", e.lhs)).collect();
        return Err(Error::Structural { equations });
    }
    (0..n)
        .map(|j| {
            if b.iter().all(Polynomial::is_zero) {
                return Ok(RationalFunction::zero());
            }
            let mut mj = m.clone();
            for (row, bi) in mj.iter_mut().zip(&b) {
                row[j] = bi.clone();
            }
            RationalFunction::new(det(&mj, &idx, &idx), d.clone())
        })
        .collect()
}

// Lower is a better pivot: nonzero first, then low total degree, then large
// leading-coefficient ratio.
fn pivot_rank(x: &RationalFunction) -> Option<(usize, f64)> {
    if x.is_zero() {
        return None;
    }
    let lead = (x.num().leading() / x.den().leading()).abs();
    Some((x.num().degree() + x.den().degree(), -lead))
}

fn solve_full_pivot(
    mut a: Vec<Vec<RationalFunction>>,
    mut rhs: Vec<RationalFunction>,
    equations: &[Equation],
) -> Result<Vec<RationalFunction>> {
    let n = rhs.len();
    let mut col_of: Vec<usize> = (0..n).collect();
    let mut row_of: Vec<usize> = (0..n).collect();
    for step in 0..n {
        let mut best: Option<((usize, f64), usize, usize)> = None;
        for i in step..n {
            for j in step..n {
                if let Some(rank) = pivot_rank(&a[i][j]) {
                    let better = match &best {
                        None => true,
                        Some((r, _, _)) => rank.0 < r.0 || (rank.0 == r.0 && rank.1 < r.1),
                    };
                    if better {
                        best = Some((rank, i, j));
                    }
                }
            }
        }
        let Some((_, pi, pj)) = best else {
            let equations = row_of[step..]
                .iter()
                .map(|&r| format!("{} = ...", equations[r].lhs))
                .collect();
            return Err(Error::Structural { equations });
        };
        a.swap(step, pi);
        rhs.swap(step, pi);
        row_of.swap(step, pi);
        for row in a.iter_mut() {
            row.swap(step, pj);
        }
        col_of.swap(step, pj);

        let pivot_inv = a[step][step].inv()?;
        for i in (step + 1)..n {
            if a[i][step].is_zero() {
                continue;
            }
            let factor = &a[i][step] * &pivot_inv;
            for j in step..n {
                if a[step][j].is_zero() {
                    continue;
                }
                let delta = &factor * &a[step][j];
                a[i][j] = &a[i][j] - &delta;
            }
            a[i][step] = RationalFunction::zero();
            let delta = &factor * &rhs[step];
            rhs[i] = &rhs[i] - &delta;
        }
    }

    let mut permuted = vec![RationalFunction::zero(); n];
    for i in (0..n).rev() {
        let mut acc = rhs[i].clone();
        for j in (i + 1)..n {
            if !a[i][j].is_zero() && !permuted[j].is_zero() {
                acc = &acc - &(&a[i][j] * &permuted[j]);
            }
        }
        permuted[i] = acc.checked_div(&a[i][i])?;
    }
    let mut x = vec![RationalFunction::zero(); n];
    for (k, &c) in col_of.iter().enumerate() {
        x[c] = permuted[k].clone();
    }
    Ok(x)
}

pub fn solve_tf(graph: &SignalGraph, input: Signal, output: Signal) -> Result<RationalFunction> {
    graph.solve_tf(input, output)
}

/// The six `{r, w, z} → {ū, ȳ}` maps computed by elimination.
pub fn oracle_tfs(model: &LoopModel) -> Result<SixTransferFunctions> {
    let g = build_topology(model)?;
    let get = |name: MapName| {
        let (input, output) = match name {
            MapName::TUr => (Signal::R, Signal::UBar),
            MapName::TUw => (Signal::W, Signal::UBar),
            MapName::TUz => (Signal::Z, Signal::UBar),
            MapName::TYr => (Signal::R, Signal::YBar),
            MapName::TYw => (Signal::W, Signal::YBar),
            MapName::TYz => (Signal::Z, Signal::YBar),
        };
        g.solve_tf(input, output)
    };
    Ok(SixTransferFunctions {
        t_ur: get(MapName::TUr)?,
        t_uw: get(MapName::TUw)?,
        t_uz: get(MapName::TUz)?,
        t_yr: get(MapName::TYr)?,
        t_yw: get(MapName::TYw)?,
        t_yz: get(MapName::TYz)?,
    })
}

impl fmt::Display for SignalGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.equations {
            write!(f, "{} =", e.lhs)?;
            for (i, (gain, s)) in e.terms.iter().enumerate() {
                let sep = if i == 0 { " " } else { " + " };
                match gain.as_constant() {
                    Some(1.0) => write!(f, "{sep}{s}")?,
                    Some(c) => write!(f, "{sep}{c}*{s}")?,
                    None => write!(f, "{sep}[{gain}]*{s}")?,
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedloop::TwoWayCoding;
    use crate::polyrat::rf_equal;

    fn rf(num: &[f64], den: &[f64]) -> RationalFunction {
        RationalFunction::from_coeffs(num, den).unwrap()
    }

    fn model(k: f64, coding: CodingScheme) -> LoopModel {
        LoopModel::new(rf(&[1.0], &[1.0, 1.0]), RationalFunction::constant(k), coding).unwrap()
    }

    #[test]
    fn uncoded_shape() {
        let g = build_topology(&model(1.0, CodingScheme::None)).unwrap();
        assert_eq!(g.equations.len(), 4);
        assert_eq!(g.unknowns().len(), 4);
        assert_eq!(g.exogenous, vec![Signal::R, Signal::W, Signal::Z]);
    }

    #[test]
    fn two_way_shape() {
        let g = build_topology(&model(1.0, CodingScheme::TwoWay(TwoWayCoding::IDENTITY))).unwrap();
        let mut u = g.unknowns();
        u.sort();
        use Signal::*;
        assert_eq!(u, vec![U, Q, QBar, UBar, YBar, V, VBar, Y]);
    }

    #[test]
    fn one_way_inverse_gain() {
        let g = build_topology(&model(1.0, CodingScheme::OneWay { alpha: 2.0, beta: 3.0 })).unwrap();
        let ubar = g.equations.iter().find(|e| e.lhs == Signal::UBar).unwrap();
        assert_eq!(ubar.terms.len(), 1);
        assert_eq!(ubar.terms[0].0.as_constant(), Some(0.5));
        assert_eq!(ubar.terms[0].1, Signal::QBar);
    }

    #[test]
    fn uncoded_reference_to_output() {
        // PK/(1+PK) with P = 1/(s+1), K = 1
        let g = build_topology(&model(1.0, CodingScheme::None)).unwrap();
        let t = g.solve_tf(Signal::R, Signal::YBar).unwrap();
        assert!(rf_equal(&t, &rf(&[1.0], &[2.0, 1.0]), 1e-12));
        let tw = g.solve_tf(Signal::W, Signal::UBar).unwrap();
        assert!(rf_equal(&tw, &rf(&[1.0, 1.0], &[2.0, 1.0]), 1e-12));
    }

    #[test]
    fn identity_coding_reproduces_uncoded() {
        let a = oracle_tfs(&model(2.5, CodingScheme::None)).unwrap();
        let b = oracle_tfs(&model(2.5, CodingScheme::TwoWay(TwoWayCoding::IDENTITY))).unwrap();
        for name in MapName::ALL {
            assert!(rf_equal(a.get(name), b.get(name), 1e-10), "{}", name.as_str());
        }
    }

    #[test]
    fn z_channel_sign_and_plant_factor() {
        // a=2, b=1, c=0.5, d=1.5, K=3, P=1/(s+1):
        // T_uz = a⁻¹ (b − (ad−bc) K) / (1+KP) = 0.5 (1 − 2.5·3) (s+1)/(s+4)
        let m = TwoWayCoding { a: 2.0, b: 1.0, c: 0.5, d: 1.5 };
        let t = oracle_tfs(&model(3.0, CodingScheme::TwoWay(m))).unwrap();
        let expect = rf(&[-3.25, -3.25], &[4.0, 1.0]);
        assert!(rf_equal(&t.t_uz, &expect, 1e-10), "{}", t.t_uz);
    }

    #[test]
    fn non_exogenous_input_rejected() {
        let g = build_topology(&model(1.0, CodingScheme::None)).unwrap();
        assert!(g.solve_tf(Signal::U, Signal::YBar).is_err());
    }

    #[test]
    fn singular_graph_reports_equations() {
        // y = y has no unique solution once the identity is subtracted
        let g = SignalGraph {
            signals: vec![Signal::R, Signal::Y],
            equations: vec![eq(Signal::Y, vec![(k(1.0), Signal::Y), (k(1.0), Signal::R)])],
            exogenous: vec![Signal::R],
        };
        match g.solve_tf(Signal::R, Signal::Y) {
            Err(Error::Structural { equations }) => assert_eq!(equations, vec!["y = ...".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn listing() {
        let g = build_topology(&model(2.0, CodingScheme::None)).unwrap();
        let text = g.to_string();
        assert!(text.contains("u_bar = u + w"), "{text}");
        assert!(text.contains("y = y_bar + z"), "{text}");
    }
}
