//! Time-domain simulation by realizing each closed-loop map and
//! superposing the responses to `r`, `w` and `z`.
//!
//! Static coding around a static controller forms algebraic loops in the
//! raw interconnection. Integrating the already-solved closed-loop maps
//! avoids them entirely, and a map that is identically zero contributes an
//! exactly-zero response.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attacks::AttackSignal;
use crate::blockdiagram::{build_topology, Signal};
use crate::closedloop::{is_internally_stable, LoopModel};
use crate::error::{Error, Result};
use crate::polyrat::RationalFunction;

pub const DEFAULT_DT: f64 = 1e-3;

/// Single-input single-output state-space model `x' = Ax + Bu`,
/// `y = Cx + Du`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub d: f64,
}

impl StateSpace {
    pub fn order(&self) -> usize {
        self.b.len()
    }

    /// `C (sI - A)⁻¹ B + D`, used to check a realization.
    pub fn transfer_at(&self, s: num_complex::Complex64) -> Option<num_complex::Complex64> {
        use num_complex::Complex64;
        let n = self.order();
        if n == 0 {
            return Some(Complex64::new(self.d, 0.0));
        }
        let m = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
            let diag = if i == j { s } else { Complex64::new(0.0, 0.0) };
            diag - Complex64::new(self.a[(i, j)], 0.0)
        });
        let rhs = DVector::<Complex64>::from_fn(n, |i, _| Complex64::new(self.b[i], 0.0));
        let x = m.lu().solve(&rhs)?;
        let cx: Complex64 = (0..n).map(|i| x[i] * self.c[i]).sum();
        Some(cx + self.d)
    }
}

/// Controllable canonical realization of a proper transfer function.
pub fn realize(tf: &RationalFunction) -> Result<StateSpace> {
    if !tf.is_proper() {
        return Err(Error::Improper(format!("{tf} has more zeros than poles")));
    }
    let den = tf.den();
    let n = den.degree();
    let lead = den.leading();
    let den_c: Vec<f64> = den.coeffs().iter().map(|c| c / lead).collect();
    let mut num_c: Vec<f64> = tf.num().coeffs().iter().map(|c| c / lead).collect();
    num_c.resize(n + 1, 0.0);
    let d = num_c[n];
    let c = DVector::from_fn(n, |i, _| num_c[i] - d * den_c[i]);
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        a[(i, i + 1)] = 1.0;
    }
    if n > 0 {
        for j in 0..n {
            a[(n - 1, j)] = -den_c[j];
        }
    }
    let mut b = DVector::<f64>::zeros(n);
    if n > 0 {
        b[n - 1] = 1.0;
    }
    Ok(StateSpace { a, b, c, d })
}

/// Input samples for an RK4 run over `n` steps: values at every half step
/// `k·dt/2`, plus left limits at the grid points so that a jump landing on
/// a grid point is not felt by the preceding step.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub half: Vec<f64>,
    pub left: Vec<f64>,
}

impl Samples {
    /// Samples of a continuous input.
    pub fn continuous(dt: f64, n: usize, input: impl Fn(f64) -> f64) -> Self {
        let half: Vec<f64> = (0..=2 * n).map(|k| input(k as f64 * dt * 0.5)).collect();
        let left = half.iter().step_by(2).copied().collect();
        Self { half, left }
    }

    pub fn steps(&self) -> usize {
        self.half.len().saturating_sub(1) / 2
    }

    /// Values at the grid points.
    pub fn grid(&self) -> Vec<f64> {
        self.half.iter().step_by(2).copied().collect()
    }
}

pub fn half_step_samples(sig: &AttackSignal, dt: f64, n: usize) -> Samples {
    match sig {
        AttackSignal::Covert { .. } => {
            // the filter output is only defined on its own integration grid
            let half = sig.sample_series(dt * 0.5, 2 * n);
            let left = half.iter().step_by(2).copied().collect();
            Samples { half, left }
        }
        other => Samples {
            half: (0..=2 * n).map(|k| other.sample(k as f64 * dt * 0.5)).collect(),
            left: (0..=n).map(|i| other.sample_left(i as f64 * dt)).collect(),
        },
    }
}

/// Classical fixed-step RK4 on a state-space model with zero initial state.
pub struct Rk4<'a> {
    ss: &'a StateSpace,
    dt: f64,
}

impl<'a> Rk4<'a> {
    pub fn new(ss: &'a StateSpace, dt: f64) -> Self {
        Self { ss, dt }
    }

    /// Outputs at `0, dt, ..., n·dt` for a continuous input.
    pub fn run(&self, n: usize, input: impl Fn(f64) -> f64) -> Vec<f64> {
        self.run_sampled(&Samples::continuous(self.dt, n, input))
    }

    /// Outputs at the grid points.
    pub fn run_sampled(&self, u: &Samples) -> Vec<f64> {
        let n = u.steps();
        let ss = self.ss;
        let order = ss.order();
        if order == 0 {
            return (0..=n).map(|i| ss.d * u.half[2 * i]).collect();
        }
        let dt = self.dt;
        // row-major copy of A and flat buffers keep the inner loop free of
        // allocations
        let a: Vec<f64> = (0..order * order).map(|k| ss.a[(k / order, k % order)]).collect();
        let b: Vec<f64> = ss.b.iter().copied().collect();
        let c: Vec<f64> = ss.c.iter().copied().collect();
        let f = |x: &[f64], u: f64, out: &mut [f64]| {
            for (i, o) in out.iter_mut().enumerate() {
                let row = &a[i * order..(i + 1) * order];
                *o = row.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() + b[i] * u;
            }
        };
        let dot = |x: &[f64]| c.iter().zip(x).map(|(p, q)| p * q).sum::<f64>();
        let mut x = vec![0.0; order];
        let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
            (vec![0.0; order], vec![0.0; order], vec![0.0; order], vec![0.0; order], vec![0.0; order]);
        let mut out = Vec::with_capacity(n + 1);
        out.push(dot(&x) + ss.d * u.half[0]);
        for i in 0..n {
            let (u0, um, u1) = (u.half[2 * i], u.half[2 * i + 1], u.left[i + 1]);
            f(&x, u0, &mut k1);
            for j in 0..order {
                tmp[j] = x[j] + 0.5 * dt * k1[j];
            }
            f(&tmp, um, &mut k2);
            for j in 0..order {
                tmp[j] = x[j] + 0.5 * dt * k2[j];
            }
            f(&tmp, um, &mut k3);
            for j in 0..order {
                tmp[j] = x[j] + dt * k3[j];
            }
            f(&tmp, u1, &mut k4);
            for j in 0..order {
                x[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
            out.push(dot(&x) + ss.d * u.half[2 * i + 2]);
        }
        out
    }
}

/// Response of `tf` to sampled input.
pub fn response(tf: &RationalFunction, u: &Samples, dt: f64) -> Result<Vec<f64>> {
    if tf.is_zero() {
        return Ok(vec![0.0; u.steps() + 1]);
    }
    let ss = realize(tf)?;
    Ok(Rk4::new(&ss, dt).run_sampled(u))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopInputs {
    pub r: AttackSignal,
    pub w: AttackSignal,
    pub z: AttackSignal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimOptions {
    pub t_end: f64,
    pub dt: f64,
    #[serde(skip)]
    pub allow_unstable: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { t_end: 10.0, dt: DEFAULT_DT, allow_unstable: false }
    }
}

impl SimOptions {
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetadata {
    pub model_hash: String,
    pub dt: f64,
    pub t_end: f64,
    pub steps: usize,
    pub signals: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub times: Vec<f64>,
    pub series: Vec<(Signal, Vec<f64>)>,
    pub metadata: SimMetadata,
}

impl SimulationResult {
    pub fn get(&self, s: Signal) -> Option<&[f64]> {
        self.series.iter().find(|(k, _)| *k == s).map(|(_, v)| v.as_slice())
    }

    /// Largest pointwise difference on one signal.
    pub fn max_deviation(&self, other: &SimulationResult, s: Signal) -> Option<f64> {
        let a = self.get(s)?;
        let b = other.get(s)?;
        Some(a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
    }

    /// CSV with a `t,<signal>,...` header and 15 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "t")?;
        for (s, _) in &self.series {
            write!(out, ",{}", s.name())?;
        }
        writeln!(out)?;
        for (i, t) in self.times.iter().enumerate() {
            write!(out, "{}", fmt15(*t))?;
            for (_, v) in &self.series {
                write!(out, ",{}", fmt15(v[i]))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

fn fmt15(x: f64) -> String {
    // normalize -0 so identical runs cannot differ by the sign of zero
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.14e}")
}

pub fn model_hash(model: &LoopModel) -> String {
    let json = serde_json::to_vec(model).expect("loop models serialize");
    hex_digest(&json)
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn simulate(model: &LoopModel, inputs: &LoopInputs, opts: &SimOptions) -> Result<SimulationResult> {
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(Error::Simulation("dt must be positive".into()));
    }
    if !(opts.t_end >= opts.dt && opts.t_end.is_finite()) {
        return Err(Error::Simulation("t_end must be at least dt".into()));
    }
    for (name, sig) in [("r", &inputs.r), ("w", &inputs.w)] {
        if matches!(sig, AttackSignal::Covert { .. }) {
            return Err(Error::Simulation(format!("covert signals belong on z, not {name}")));
        }
    }
    for sig in [&inputs.r, &inputs.w, &inputs.z] {
        sig.validate().map_err(|e| Error::Simulation(e.to_string()))?;
    }
    if !opts.allow_unstable && !is_internally_stable(model) {
        return Err(Error::Simulation("closed loop is not internally stable".into()));
    }

    let n = opts.steps();
    let dt = opts.dt;
    let graph = build_topology(model)?;
    let mut tracked = graph.unknowns();
    tracked.sort();

    let mut series: Vec<(Signal, Vec<f64>)> = Vec::new();
    let mut exo: Vec<(Signal, Vec<f64>)> = Vec::new();
    let mut totals: Vec<Vec<f64>> = vec![vec![0.0; n + 1]; tracked.len()];

    for (input, sig) in [(Signal::R, &inputs.r), (Signal::W, &inputs.w), (Signal::Z, &inputs.z)] {
        let half = half_step_samples(sig, dt, n);
        exo.push((input, half.grid()));
        if sig.is_zero() {
            continue;
        }
        // a covert z is driven by its w component through -plant_model
        let (drive_half, pre) = match sig {
            AttackSignal::Covert { w_component, plant_model } => {
                (half_step_samples(w_component, dt, n), Some(-plant_model))
            }
            _ => (half, None),
        };
        let solved = graph.solve_all(input)?;
        for (k, signal) in tracked.iter().enumerate() {
            let (_, tf) = solved.iter().find(|(s, _)| s == signal).expect("every unknown is solved");
            let tf = match &pre {
                Some(filter) => tf * filter,
                None => tf.clone(),
            };
            if tf.is_zero() {
                continue;
            }
            let y = response(&tf, &drive_half, dt).map_err(|e| {
                Error::Simulation(format!("map {input} -> {signal}: {e}"))
            })?;
            for (acc, v) in totals[k].iter_mut().zip(y) {
                *acc += v;
            }
        }
    }
    series.extend(exo);
    series.extend(tracked.into_iter().zip(totals));

    let times = (0..=n).map(|i| i as f64 * dt).collect();
    let metadata = SimMetadata {
        model_hash: model_hash(model),
        dt,
        t_end: n as f64 * dt,
        steps: n,
        signals: series.iter().map(|(s, _)| s.name().to_string()).collect(),
    };
    Ok(SimulationResult { times, series, metadata })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedloop::CodingScheme;
    use num_complex::Complex64;

    fn rf(num: &[f64], den: &[f64]) -> RationalFunction {
        RationalFunction::from_coeffs(num, den).unwrap()
    }

    #[test]
    fn canonical_form() {
        let ss = realize(&rf(&[3.0, 1.0], &[2.0, 3.0, 1.0])).unwrap();
        assert_eq!(ss.a, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]));
        assert_eq!(ss.b, DVector::from_vec(vec![0.0, 1.0]));
        assert_eq!(ss.c, DVector::from_vec(vec![3.0, 1.0]));
        assert_eq!(ss.d, 0.0);
    }

    #[test]
    fn static_and_zero_maps() {
        let ss = realize(&RationalFunction::constant(5.0)).unwrap();
        assert_eq!((ss.order(), ss.d), (0, 5.0));
        let ss = realize(&RationalFunction::zero()).unwrap();
        assert_eq!((ss.order(), ss.d), (0, 0.0));
    }

    #[test]
    fn improper_rejected() {
        assert!(matches!(realize(&rf(&[0.0, 0.0, 1.0], &[1.0, 1.0])), Err(Error::Improper(_))));
    }

    #[test]
    fn realization_recovers_tf() {
        let tf = rf(&[1.0, -2.0, 0.5, 3.0], &[4.0, 3.0, 2.0, 1.0]);
        let ss = realize(&tf).unwrap();
        for k in 0..20 {
            let s = Complex64::new(-1.5 + 0.37 * k as f64, 2.0 - 0.29 * k as f64);
            let want = tf.eval(s).unwrap();
            let got = ss.transfer_at(s).unwrap();
            assert!((got - want).norm() <= 1e-6 * want.norm().max(1e-12), "{s}");
        }
    }

    #[test]
    fn step_settles_to_dc_gain() {
        let m = LoopModel::new(rf(&[1.0], &[1.0, 1.0]), RationalFunction::constant(2.0), CodingScheme::None).unwrap();
        let inputs = LoopInputs { r: AttackSignal::Step { amplitude: 1.0, start_time: 0.0 }, ..Default::default() };
        let res = simulate(&m, &inputs, &SimOptions::default()).unwrap();
        let y = res.get(Signal::YBar).unwrap();
        assert!((y.last().unwrap() - 2.0 / 3.0).abs() < 1e-4);
        assert_eq!(res.times.len(), 10_001);
    }

    #[test]
    fn unstable_requires_flag() {
        let m = LoopModel::new(rf(&[1.0], &[-1.0, 1.0]), RationalFunction::constant(0.5), CodingScheme::None).unwrap();
        let opts = SimOptions { t_end: 1.0, ..Default::default() };
        assert!(matches!(simulate(&m, &LoopInputs::default(), &opts), Err(Error::Simulation(_))));
        let opts = SimOptions { allow_unstable: true, ..opts };
        assert!(simulate(&m, &LoopInputs::default(), &opts).is_ok());
    }

    #[test]
    fn bad_step_sizes() {
        let m = LoopModel::new(rf(&[1.0], &[1.0, 1.0]), RationalFunction::one(), CodingScheme::None).unwrap();
        for (t_end, dt) in [(1.0, 0.0), (1.0, -1.0), (0.001, 0.01)] {
            let opts = SimOptions { t_end, dt, allow_unstable: false };
            assert!(simulate(&m, &LoopInputs::default(), &opts).is_err());
        }
    }

    #[test]
    fn csv_layout() {
        let m = LoopModel::new(rf(&[1.0], &[1.0, 1.0]), RationalFunction::one(), CodingScheme::None).unwrap();
        let opts = SimOptions { t_end: 0.002, dt: 0.001, allow_unstable: false };
        let res = simulate(&m, &LoopInputs::default(), &opts).unwrap();
        let csv = res.to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,r,w,z,u,u_bar,y_bar,y");
        assert_eq!(lines.next().unwrap().split(',').next().unwrap(), "0.00000000000000e0");
        assert_eq!(csv.lines().count(), 4);
    }
}
