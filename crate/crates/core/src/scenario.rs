//! Scenario configuration and the JSON reports built from it.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::attacks::{zero_dynamics_attack, AttackSignal};
use crate::closedloop::{closed_form_tfs, is_internally_stable, CodingScheme, LoopModel, SixTransferFunctions};
use crate::decoupling::{check_decoupled_with, DecouplingTarget, Thresholds};
use crate::error::{Error, Result};
use crate::metrics::{bode_integral, hinf_norm, BodeIntegral, DEFAULT_OMEGA_MAX};
use crate::polyrat::RationalFunction;
use crate::simulate::{LoopInputs, SimOptions};

/// JSON schema every scenario file is validated against.
pub const SCENARIO_SCHEMA: &str = include_str!("../schema/scenario.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EtaSpec {
    Value(f64),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTag {
    Auto,
}

/// Signal description as written in a scenario; resolved against the plant
/// into an [`AttackSignal`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    #[default]
    Zero,
    Step {
        amplitude: f64,
        #[serde(default)]
        start_time: f64,
    },
    Sinusoid {
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    Exponential {
        gain: f64,
        eta: EtaSpec,
        #[serde(default)]
        start_time: f64,
    },
    /// `plant_model` defaults to the scenario plant.
    Covert {
        w: Box<SignalSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        plant_model: Option<RationalFunction>,
    },
}

impl SignalSpec {
    pub fn resolve(&self, plant: &RationalFunction) -> Result<AttackSignal> {
        let sig = match self {
            SignalSpec::Zero => AttackSignal::Zero,
            SignalSpec::Step { amplitude, start_time } => {
                AttackSignal::Step { amplitude: *amplitude, start_time: *start_time }
            }
            SignalSpec::Sinusoid { amplitude, omega, phase } => {
                AttackSignal::Sinusoid { amplitude: *amplitude, omega: *omega, phase: *phase }
            }
            SignalSpec::Exponential { gain, eta: EtaSpec::Value(eta), start_time } => {
                AttackSignal::Exponential { gain: *gain, eta: *eta, start_time: *start_time }
            }
            SignalSpec::Exponential { gain, eta: EtaSpec::Auto(_), start_time } => {
                match zero_dynamics_attack(plant, *gain) {
                    Some(AttackSignal::Exponential { gain, eta, .. }) => {
                        AttackSignal::Exponential { gain, eta, start_time: *start_time }
                    }
                    _ => {
                        return Err(Error::Domain(
                            "eta \"auto\" needs a real right-half-plane plant zero".into(),
                        ))
                    }
                }
            }
            SignalSpec::Covert { w, plant_model } => {
                if matches!(**w, SignalSpec::Covert { .. }) {
                    return Err(Error::Domain("covert signals cannot be nested".into()));
                }
                AttackSignal::Covert {
                    w_component: Box::new(w.resolve(plant)?),
                    plant_model: plant_model.clone().unwrap_or_else(|| plant.clone()),
                }
            }
        };
        sig.validate()?;
        Ok(sig)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSpecs {
    pub w: SignalSpec,
    pub z: SignalSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreqOptions {
    pub omega_max: f64,
}

impl Default for FreqOptions {
    fn default() -> Self {
        Self { omega_max: DEFAULT_OMEGA_MAX }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metadata: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub plant: RationalFunction,
    pub controller: RationalFunction,
    #[serde(default = "no_coding")]
    pub coding: CodingScheme,
    #[serde(default)]
    pub reference: SignalSpec,
    #[serde(default)]
    pub attacks: AttackSpecs,
    #[serde(default)]
    pub sim: SimOptions,
    #[serde(default)]
    pub freq: FreqOptions,
    #[serde(default)]
    pub outputs: Outputs,
}

fn no_coding() -> CodingScheme {
    CodingScheme::None
}

/// A validated scenario ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub model: LoopModel,
    pub inputs: LoopInputs,
}

/// Semantic error located by a JSON pointer into the scenario document.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let path = if self.path.is_empty() { "/" } else { &self.path };
        write!(f, "config error at {path}: {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

fn at(path: &str) -> impl Fn(Error) -> ConfigError + '_ {
    move |e| ConfigError { path: path.to_string(), message: e.to_string() }
}

impl ScenarioConfig {
    pub fn into_scenario(self) -> std::result::Result<Scenario, ConfigError> {
        if !self.plant.is_proper() {
            return Err(ConfigError { path: "/plant".into(), message: "plant must be proper".into() });
        }
        if !self.controller.is_proper() {
            return Err(ConfigError { path: "/controller".into(), message: "controller must be proper".into() });
        }
        self.coding.validate().map_err(at("/coding"))?;
        let model = LoopModel::new(self.plant.clone(), self.controller.clone(), self.coding).map_err(at(""))?;
        let r = self.reference.resolve(&self.plant).map_err(at("/reference"))?;
        if matches!(r, AttackSignal::Covert { .. }) {
            return Err(ConfigError { path: "/reference".into(), message: "reference cannot be covert".into() });
        }
        let w = self.attacks.w.resolve(&self.plant).map_err(at("/attacks/w"))?;
        if matches!(w, AttackSignal::Covert { .. }) {
            return Err(ConfigError {
                path: "/attacks/w".into(),
                message: "covert signals are injected on z".into(),
            });
        }
        let z = self.attacks.z.resolve(&self.plant).map_err(at("/attacks/z"))?;
        if !(self.sim.dt > 0.0 && self.sim.t_end >= self.sim.dt) {
            return Err(ConfigError { path: "/sim".into(), message: "need dt > 0 and t_end >= dt".into() });
        }
        if !(self.freq.omega_max > 0.0) {
            return Err(ConfigError { path: "/freq/omega_max".into(), message: "must be positive".into() });
        }
        Ok(Scenario { model, inputs: LoopInputs { r, w, z }, config: self })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfsReport {
    pub coding: String,
    pub tfs: SixTransferFunctions,
    pub stable: bool,
    pub decoupled_w: bool,
    pub decoupled_z: bool,
}

pub fn tfs_report(model: &LoopModel, th: &Thresholds) -> Result<TfsReport> {
    let tfs = closed_form_tfs(model)?;
    Ok(TfsReport {
        coding: model.coding().label().to_string(),
        stable: is_internally_stable(model),
        decoupled_w: check_decoupled_with(&tfs, DecouplingTarget::ForwardAttackW, th),
        decoupled_z: check_decoupled_with(&tfs, DecouplingTarget::FeedbackAttackZ, th),
        tfs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMetrics {
    pub map: String,
    pub zero: bool,
    pub hinf: f64,
    pub bode: BodeIntegral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreqReport {
    pub omega_max: f64,
    pub maps: Vec<MapMetrics>,
}

pub fn freq_report(model: &LoopModel, omega_max: f64, th: &Thresholds) -> Result<FreqReport> {
    let tfs = closed_form_tfs(model)?;
    let maps = tfs
        .iter()
        .map(|(name, tf)| {
            Ok(MapMetrics {
                map: name.as_str().to_string(),
                zero: th.is_zero(tf),
                hinf: hinf_norm(tf)?,
                bode: bode_integral(tf, omega_max)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FreqReport { omega_max, maps })
}
