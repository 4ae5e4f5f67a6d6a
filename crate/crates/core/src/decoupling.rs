//! Attack-decoupling checks and the static controller / two-way coding
//! co-design.
//!
//! With a static gain `K`, choosing `c = -1/K` zeroes `1 + cK` and removes
//! the forward attack `w` from plant input and output; choosing
//! `b = (ad - bc)K` zeroes the feedback attack `z`. Both at once would force
//! `adK = 0`, which no valid coding with a nonzero gain satisfies.

use serde::{Deserialize, Serialize};

use crate::closedloop::{closed_form_tfs, is_internally_stable, CodingScheme, LoopModel, SixTransferFunctions, TwoWayCoding};
use crate::error::{Error, Result};
use crate::polyrat::{Polynomial, RationalFunction};

pub const DEFAULT_ZERO_TOL: f64 = 1e-9;
pub const DEFAULT_NONZERO_TOL: f64 = 1e-6;

/// Stability margin demanded of a gain returned by the static search.
pub const GAIN_MARGIN: f64 = 1e-6;

/// Smallest admissible `|1 + K·P(∞)|`, relative to its two terms. Gains
/// closer to an ill-posed loop push a closed-loop pole towards -∞.
pub const WELL_POSED_MARGIN: f64 = 1e-2;

const GRID_POINTS: usize = 400;
const GRID_MIN_EXP: f64 = -3.0;
const GRID_MAX_EXP: f64 = 3.0;
const BISECTION_STEPS: usize = 60;

/// Two-tier threshold for "identically zero" versus "nonzero" maps, applied
/// to the largest coefficient of a normalized numerator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub zero: f64,
    pub nonzero: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { zero: DEFAULT_ZERO_TOL, nonzero: DEFAULT_NONZERO_TOL }
    }
}

impl Thresholds {
    /// Parses `"ZERO"` or `"ZERO,NONZERO"`.
    pub fn parse(text: &str) -> Result<Self> {
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v > 0.0)
                .ok_or_else(|| Error::Domain(format!("bad threshold '{s}'")))
        };
        let mut parts = text.split(',');
        let zero = parse(parts.next().unwrap_or_default())?;
        let nonzero = match parts.next() {
            Some(p) => parse(p)?,
            None => DEFAULT_NONZERO_TOL.max(zero),
        };
        if parts.next().is_some() || nonzero < zero {
            return Err(Error::Domain(format!("bad threshold pair '{text}'")));
        }
        Ok(Self { zero, nonzero })
    }

    pub fn is_zero(&self, t: &RationalFunction) -> bool {
        t.num().max_abs() < self.zero
    }

    pub fn is_nonzero(&self, t: &RationalFunction) -> bool {
        t.num().max_abs() >= self.nonzero
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecouplingTarget {
    #[serde(rename = "w")]
    ForwardAttackW,
    #[serde(rename = "z")]
    FeedbackAttackZ,
    Both,
}

pub fn check_decoupled(tfs: &SixTransferFunctions, target: DecouplingTarget) -> bool {
    check_decoupled_with(tfs, target, &Thresholds::default())
}

pub fn check_decoupled_with(tfs: &SixTransferFunctions, target: DecouplingTarget, th: &Thresholds) -> bool {
    let reference_alive = th.is_nonzero(&tfs.t_ur) && th.is_nonzero(&tfs.t_yr);
    let w_cut = th.is_zero(&tfs.t_uw) && th.is_zero(&tfs.t_yw);
    let z_cut = th.is_zero(&tfs.t_uz) && th.is_zero(&tfs.t_yz);
    reference_alive
        && match target {
            DecouplingTarget::ForwardAttackW => w_cut,
            DecouplingTarget::FeedbackAttackZ => z_cut,
            DecouplingTarget::Both => w_cut && z_cut,
        }
}

fn closed_loop_poly(plant: &RationalFunction, gain: f64) -> Polynomial {
    plant.den() + &plant.num().scale(gain)
}

fn well_posed(plant: &RationalFunction, gain: f64) -> bool {
    let n = plant.den().degree();
    let d = plant.den().leading();
    let k = gain * plant.num().coeffs().get(n).copied().unwrap_or(0.0);
    (d + k).abs() >= WELL_POSED_MARGIN * d.abs().max(k.abs())
}

fn stabilizes(plant: &RationalFunction, gain: f64, margin: f64) -> bool {
    let chi = closed_loop_poly(plant, gain);
    well_posed(plant, gain) && !chi.is_zero() && chi.is_hurwitz(margin).unwrap_or(false)
}

/// Smallest-magnitude static gain that places every closed-loop root of
/// `den(P) + K num(P)` left of `-GAIN_MARGIN` and keeps the loop well posed.
///
/// The signed log grid `±[1e-3, 1e3]` is scanned per sign; when the first
/// stabilizing grid point has a non-stabilizing neighbour below it, the
/// boundary in between is bisected. Ties in `|K|` go to the positive sign.
pub fn find_static_stabilizing_gain(plant: &RationalFunction) -> Option<f64> {
    if !plant.is_proper() || plant.is_zero() {
        return None;
    }
    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|i| {
            let e = GRID_MIN_EXP + (GRID_MAX_EXP - GRID_MIN_EXP) * i as f64 / (GRID_POINTS - 1) as f64;
            10f64.powf(e)
        })
        .collect();

    let search = |sign: f64| -> Option<f64> {
        let first = grid.iter().position(|&m| stabilizes(plant, sign * m, GAIN_MARGIN))?;
        if first == 0 {
            return Some(sign * grid[0]);
        }
        let (mut lo, mut hi) = (grid[first - 1], grid[first]);
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if stabilizes(plant, sign * mid, GAIN_MARGIN) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(sign * hi)
    };

    match (search(1.0), search(-1.0)) {
        (Some(p), Some(n)) => Some(if n.abs() < p.abs() { n } else { p }),
        (p, n) => p.or(n),
    }
}

/// Free entries of the coding matrix. `b` is used for forward-attack
/// designs and `c` for feedback-attack designs; the other is computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreeParams {
    pub a: f64,
    pub d: f64,
    pub b: f64,
    pub c: f64,
}

impl Default for FreeParams {
    fn default() -> Self {
        Self { a: 1.0, d: 1.0, b: 1.0, c: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DesignResult {
    Feasible { gain: f64, coding: TwoWayCoding },
    Infeasible { reason: String },
}

impl DesignResult {
    pub fn is_feasible(&self) -> bool {
        matches!(self, DesignResult::Feasible { .. })
    }

    fn infeasible(reason: impl Into<String>) -> Self {
        DesignResult::Infeasible { reason: reason.into() }
    }

    /// Loop model for a feasible design on `plant`.
    pub fn loop_model(&self, plant: &RationalFunction) -> Option<LoopModel> {
        match self {
            DesignResult::Feasible { gain, coding } => LoopModel::new(
                plant.clone(),
                RationalFunction::constant(*gain),
                CodingScheme::TwoWay(*coding),
            )
            .ok(),
            DesignResult::Infeasible { .. } => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct DesignResultJson {
    feasible: bool,
    #[serde(rename = "K")]
    gain: Option<f64>,
    #[serde(rename = "M")]
    coding: Option<[f64; 4]>,
    reason: Option<String>,
}

impl Serialize for DesignResult {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = match self {
            DesignResult::Feasible { gain, coding } => DesignResultJson {
                feasible: true,
                gain: Some(*gain),
                coding: Some(coding.as_array()),
                reason: None,
            },
            DesignResult::Infeasible { reason } => DesignResultJson {
                feasible: false,
                gain: None,
                coding: None,
                reason: Some(reason.clone()),
            },
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DesignResult {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = DesignResultJson::deserialize(d)?;
        if repr.feasible {
            let gain = repr.gain.ok_or_else(|| D::Error::missing_field("K"))?;
            let [a, b, c, d] = repr.coding.ok_or_else(|| D::Error::missing_field("M"))?;
            Ok(DesignResult::Feasible { gain, coding: TwoWayCoding { a, b, c, d } })
        } else {
            Ok(DesignResult::Infeasible { reason: repr.reason.unwrap_or_default() })
        }
    }
}

pub const REASON_BOTH: &str = "adK = 0 required";
pub const REASON_NO_GAIN: &str = "no static stabilizing gain";

/// Co-designs a static gain and a two-way coding matrix that decouple the
/// chosen attack channel.
pub fn design_decoupling(plant: &RationalFunction, target: DecouplingTarget, free: FreeParams) -> Result<DesignResult> {
    check_free(&free)?;
    if target == DecouplingTarget::Both {
        return Ok(DesignResult::infeasible(REASON_BOTH));
    }
    match find_static_stabilizing_gain(plant) {
        Some(gain) => design_with_gain(plant, target, gain, free),
        None => Ok(DesignResult::infeasible(REASON_NO_GAIN)),
    }
}

fn check_free(free: &FreeParams) -> Result<()> {
    if ![free.a, free.b, free.c, free.d].iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidCoding("free coding parameters must be finite".into()));
    }
    if free.a * free.d == 0.0 {
        return Err(Error::InvalidCoding("free parameters must satisfy ad != 0".into()));
    }
    Ok(())
}

/// Same as [`design_decoupling`] with a caller-chosen static gain. The gain
/// must stabilize the plant.
pub fn design_with_gain(
    plant: &RationalFunction,
    target: DecouplingTarget,
    gain: f64,
    free: FreeParams,
) -> Result<DesignResult> {
    check_free(&free)?;
    if target == DecouplingTarget::Both {
        return Ok(DesignResult::infeasible(REASON_BOTH));
    }
    if gain == 0.0 || !gain.is_finite() {
        return Err(Error::Domain("static gain must be finite and nonzero".into()));
    }
    if !stabilizes(plant, gain, crate::polyrat::HURWITZ_MARGIN) {
        return Ok(DesignResult::infeasible(format!("gain {gain} does not stabilize the plant")));
    }
    let FreeParams { a, d, .. } = free;
    let coding = match target {
        DecouplingTarget::ForwardAttackW => {
            let c = -1.0 / gain;
            let mut b = free.b;
            if a * d - b * c == 0.0 {
                b += 1.0;
            }
            TwoWayCoding { a, b, c, d }
        }
        DecouplingTarget::FeedbackAttackZ => {
            let mut c = free.c;
            if 1.0 + c * gain == 0.0 {
                c += 1.0;
            }
            let b = a * d * gain / (1.0 + c * gain);
            TwoWayCoding { a, b, c, d }
        }
        DecouplingTarget::Both => unreachable!(),
    };
    if coding.validate().is_err() {
        return Ok(DesignResult::infeasible("coding matrix violates ad != 0, ad - bc != 0"));
    }
    let result = DesignResult::Feasible { gain, coding };
    let Some(model) = result.loop_model(plant) else {
        return Ok(DesignResult::infeasible("design does not form a valid loop"));
    };
    if !is_internally_stable(&model) {
        return Ok(DesignResult::infeasible("designed loop is not internally stable"));
    }
    let tfs = closed_form_tfs(&model)?;
    if !check_decoupled(&tfs, target) {
        return Ok(DesignResult::infeasible("designed loop failed the decoupling check"));
    }
    Ok(result)
}

/// Confirms that no gain and coding can decouple both channels: imposing
/// `c = -1/K` turns `b(1 + cK) = adK` into `0 = adK`, inconsistent for
/// `ad != 0`, `K != 0`. Returns `false` only if the residual `adK`
/// underflows to zero.
pub fn verify_impossibility(a: f64, b: f64, c: f64, d: f64, gain: f64) -> Result<bool> {
    TwoWayCoding::new(a, b, c, d)?;
    if gain == 0.0 || !gain.is_finite() {
        return Err(Error::Domain("gain must be finite and nonzero".into()));
    }
    let c_w = -1.0 / gain;
    let coefficient = 1.0 + c_w * gain;
    let residual = a * d * gain;
    let scale = 1.0 + (a * d * gain).abs();
    Ok(coefficient.abs() <= 4.0 * f64::EPSILON * scale && residual != 0.0 && residual.is_finite())
}
