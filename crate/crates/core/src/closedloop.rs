//! Coding schemes, loop models and the closed-form six transfer functions.
//!
//! All three topologies share the reference maps
//! `T_ur = K/(1+KP)` and `T_yr = KP/(1+KP)`. The attack maps are
//!
//! | coding   | `T_uw`                 | `T_uz`                         |
//! |----------|------------------------|--------------------------------|
//! | none     | `1/(1+KP)`             | `-K/(1+KP)`                    |
//! | one-way  | `α⁻¹/(1+KP)`           | `-β⁻¹K/(1+KP)`                 |
//! | two-way  | `a⁻¹(1+cK)/(1+KP)`     | `a⁻¹(b-(ad-bc)K)/(1+KP)`       |
//!
//! and each `T_y·` is `P·T_u·`. The two-way z-channel expression carries a
//! positive sign and no plant factor; this is what the signal-flow solver in
//! [`crate::blockdiagram`] produces for the additive injection `v = v̄ + z`,
//! and it reduces to the uncoded `-K/(1+KP)` under identity coding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polyrat::{RationalFunction, HURWITZ_MARGIN};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CodingScheme {
    #[serde(alias = "no_coding")]
    None,
    OneWay { alpha: f64, beta: f64 },
    TwoWay(TwoWayCoding),
}

/// Static two-way coding `[q; y] = M [u; v]` with `M = [[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoWayCoding {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodingInverse {
    pub a_bar: f64,
    pub b_bar: f64,
    pub c_bar: f64,
    pub d_bar: f64,
}

impl TwoWayCoding {
    pub const IDENTITY: TwoWayCoding = TwoWayCoding { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let m = Self { a, b, c, d };
        m.validate()?;
        Ok(m)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn validate(&self) -> Result<()> {
        let Self { a, b, c, d } = *self;
        if ![a, b, c, d].iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidCoding("coding entries must be finite".into()));
        }
        if a * d == 0.0 {
            return Err(Error::InvalidCoding("two-way coding requires ad != 0".into()));
        }
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::InvalidCoding("two-way coding requires finite ad - bc != 0".into()));
        }
        Ok(())
    }

    pub fn inverse(&self) -> Result<CodingInverse> {
        coding_inverse(self)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }
}

/// `M⁻¹ = [[d, -b], [-c, a]] / (ad - bc)`.
pub fn coding_inverse(m: &TwoWayCoding) -> Result<CodingInverse> {
    m.validate()?;
    let det = m.det();
    Ok(CodingInverse {
        a_bar: m.d / det,
        b_bar: -m.b / det,
        c_bar: -m.c / det,
        d_bar: m.a / det,
    })
}

impl CodingScheme {
    pub fn validate(&self) -> Result<()> {
        match self {
            CodingScheme::None => Ok(()),
            CodingScheme::OneWay { alpha, beta } => {
                for (name, v) in [("alpha", alpha), ("beta", beta)] {
                    if !v.is_finite() || *v == 0.0 {
                        return Err(Error::InvalidCoding(format!(
                            "one-way coding requires 0 < |{name}| < inf"
                        )));
                    }
                }
                Ok(())
            }
            CodingScheme::TwoWay(m) => m.validate(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            CodingScheme::None => "none",
            CodingScheme::OneWay { .. } => "one_way",
            CodingScheme::TwoWay(_) => "two_way",
        }
    }
}

/// Plant, controller and coding of one feedback loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LoopModelRepr", into = "LoopModelRepr")]
pub struct LoopModel {
    plant: RationalFunction,
    controller: RationalFunction,
    coding: CodingScheme,
}

#[derive(Serialize, Deserialize)]
struct LoopModelRepr {
    plant: RationalFunction,
    controller: RationalFunction,
    coding: CodingScheme,
}

impl TryFrom<LoopModelRepr> for LoopModel {
    type Error = Error;

    fn try_from(r: LoopModelRepr) -> Result<Self> {
        LoopModel::new(r.plant, r.controller, r.coding)
    }
}

impl From<LoopModel> for LoopModelRepr {
    fn from(m: LoopModel) -> Self {
        LoopModelRepr { plant: m.plant, controller: m.controller, coding: m.coding }
    }
}

impl LoopModel {
    pub fn new(plant: RationalFunction, controller: RationalFunction, coding: CodingScheme) -> Result<Self> {
        if !plant.is_proper() {
            return Err(Error::Improper(format!("plant {plant} is not proper")));
        }
        if !controller.is_proper() {
            return Err(Error::Improper(format!("controller {controller} is not proper")));
        }
        coding.validate()?;
        Ok(Self { plant, controller, coding })
    }

    pub fn plant(&self) -> &RationalFunction {
        &self.plant
    }

    pub fn controller(&self) -> &RationalFunction {
        &self.controller
    }

    pub fn coding(&self) -> &CodingScheme {
        &self.coding
    }

    pub fn with_plant(&self, plant: RationalFunction) -> Result<Self> {
        Self::new(plant, self.controller.clone(), self.coding)
    }

    /// `den(P)·den(K) + num(P)·num(K)`, the closed-loop characteristic
    /// polynomial of the coprime plant and controller fractions.
    pub fn characteristic_polynomial(&self) -> crate::Polynomial {
        let p = &self.plant;
        let k = &self.controller;
        &(p.den() * k.den()) + &(p.num() * k.num())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapName {
    TUr,
    TUw,
    TUz,
    TYr,
    TYw,
    TYz,
}

impl MapName {
    pub const ALL: [MapName; 6] =
        [MapName::TUr, MapName::TUw, MapName::TUz, MapName::TYr, MapName::TYw, MapName::TYz];

    pub fn as_str(&self) -> &'static str {
        match self {
            MapName::TUr => "t_ur",
            MapName::TUw => "t_uw",
            MapName::TUz => "t_uz",
            MapName::TYr => "t_yr",
            MapName::TYw => "t_yw",
            MapName::TYz => "t_yz",
        }
    }
}

/// Transfer functions from `r`, `w`, `z` to plant input `ū` and plant
/// output `ȳ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SixTransferFunctions {
    pub t_ur: RationalFunction,
    pub t_uw: RationalFunction,
    pub t_uz: RationalFunction,
    pub t_yr: RationalFunction,
    pub t_yw: RationalFunction,
    pub t_yz: RationalFunction,
}

impl SixTransferFunctions {
    pub fn get(&self, name: MapName) -> &RationalFunction {
        match name {
            MapName::TUr => &self.t_ur,
            MapName::TUw => &self.t_uw,
            MapName::TUz => &self.t_uz,
            MapName::TYr => &self.t_yr,
            MapName::TYw => &self.t_yw,
            MapName::TYz => &self.t_yz,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (MapName, &RationalFunction)> {
        MapName::ALL.into_iter().map(move |n| (n, self.get(n)))
    }
}

pub fn closed_form_tfs(model: &LoopModel) -> Result<SixTransferFunctions> {
    let p = &model.plant;
    let k = &model.controller;
    let return_difference = &RationalFunction::one() + &(k * p);
    if return_difference.is_zero() {
        return Err(Error::DegenerateLoop);
    }
    let sensitivity = return_difference.inv()?;

    let t_ur = k * &sensitivity;
    let (w_gain, z_gain) = match model.coding {
        CodingScheme::None => (RationalFunction::one(), -k),
        CodingScheme::OneWay { alpha, beta } => {
            (RationalFunction::constant(1.0 / alpha), k.scale(-1.0 / beta))
        }
        CodingScheme::TwoWay(m) => {
            // scalar forms first so 1 + cK = 0 is hit exactly for static K
            let w = match k.as_constant() {
                Some(kc) => RationalFunction::constant((1.0 + m.c * kc) / m.a),
                None => (&RationalFunction::one() + &k.scale(m.c)).scale(1.0 / m.a),
            };
            let z = match k.as_constant() {
                Some(kc) => RationalFunction::constant((m.b - m.det() * kc) / m.a),
                None => (&RationalFunction::constant(m.b) - &k.scale(m.det())).scale(1.0 / m.a),
            };
            (w, z)
        }
    };
    let t_uw = &w_gain * &sensitivity;
    let t_uz = &z_gain * &sensitivity;
    Ok(SixTransferFunctions {
        t_yr: p * &t_ur,
        t_yw: p * &t_uw,
        t_yz: p * &t_uz,
        t_ur,
        t_uw,
        t_uz,
    })
}

/// Internal stability: the loop is well posed, the characteristic polynomial
/// built from the coprime plant and controller fractions is Hurwitz (this
/// also rules out hidden unstable pole/zero cancellations), and every one of
/// the six maps is proper with a Hurwitz denominator.
pub fn is_internally_stable(model: &LoopModel) -> bool {
    let chi = model.characteristic_polynomial();
    // a degree drop means 1 + K(∞)P(∞) = 0: the loop is not well posed
    let full = model.plant.den().degree() + model.controller.den().degree();
    if chi.is_zero() || chi.degree() != full || !chi.is_hurwitz(HURWITZ_MARGIN).unwrap_or(false) {
        return false;
    }
    match closed_form_tfs(model) {
        Ok(tfs) => tfs
            .iter()
            .all(|(_, t)| t.is_proper() && t.is_stable(HURWITZ_MARGIN).unwrap_or(false)),
        Err(_) => false,
    }
}
