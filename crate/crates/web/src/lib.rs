//! Browser bindings: design a decoupling controller, run a scenario and
//! report its frequency-domain metrics. Every export takes and returns
//! JSON text so the page needs no generated type glue.

use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

use twoway::decoupling::{design_decoupling, DecouplingTarget, FreeParams, Thresholds};
use twoway::scenario::{freq_report, tfs_report, ScenarioConfig};
use twoway::simulate::simulate as run_sim;
use twoway::RationalFunction;

/// Most points returned per series; longer runs are decimated.
pub const MAX_POINTS: usize = 2000;

fn target_from(s: &str) -> Result<DecouplingTarget, String> {
    match s {
        "w" => Ok(DecouplingTarget::ForwardAttackW),
        "z" => Ok(DecouplingTarget::FeedbackAttackZ),
        "both" => Ok(DecouplingTarget::Both),
        other => Err(format!("unknown target '{other}' (expected w, z or both)")),
    }
}

fn to_text<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

fn parse_scenario(text: &str) -> Result<twoway::scenario::Scenario, String> {
    let config: ScenarioConfig = serde_json::from_str(text).map_err(|e| format!("scenario: {e}"))?;
    config.into_scenario().map_err(|e| e.to_string())
}

pub fn design_json(plant: &str, target: &str) -> Result<String, String> {
    let plant: RationalFunction = serde_json::from_str(plant).map_err(|e| format!("plant: {e}"))?;
    if !plant.is_proper() {
        return Err("plant must be proper".into());
    }
    let result = design_decoupling(&plant, target_from(target)?, FreeParams::default()).map_err(|e| e.to_string())?;
    to_text(&result)
}

pub fn simulate_json(scenario: &str) -> Result<String, String> {
    let sc = parse_scenario(scenario)?;
    let res = run_sim(&sc.model, &sc.inputs, &sc.config.sim).map_err(|e| e.to_string())?;
    let stride = res.times.len().div_ceil(MAX_POINTS).max(1);
    let pick = |v: &[f64]| v.iter().step_by(stride).copied().collect::<Vec<_>>();
    let series: serde_json::Map<String, serde_json::Value> =
        res.series.iter().map(|(s, v)| (s.name().to_string(), json!(pick(v)))).collect();
    to_text(&json!({ "t": pick(&res.times), "series": series, "steps": res.metadata.steps }))
}

pub fn analyze_json(scenario: &str) -> Result<String, String> {
    let sc = parse_scenario(scenario)?;
    let th = Thresholds::default();
    let tfs = tfs_report(&sc.model, &th).map_err(|e| e.to_string())?;
    let freq = freq_report(&sc.model, sc.config.freq.omega_max, &th).map_err(|e| e.to_string())?;
    to_text(&json!({ "tfs": tfs, "freq": freq }))
}

/// `plant` is `{"num":[...],"den":[...]}`, `target` one of `w`, `z`, `both`.
#[wasm_bindgen]
pub fn design(plant: &str, target: &str) -> Result<String, JsError> {
    design_json(plant, target).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn simulate(scenario: &str) -> Result<String, JsError> {
    simulate_json(scenario).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn analyze(scenario: &str) -> Result<String, JsError> {
    analyze_json(scenario).map_err(|e| JsError::new(&e))
}
