use serde_json::{json, Value};
use twoway_web::{analyze_json, design_json, simulate_json, MAX_POINTS};

fn scenario(coding: Value, attacks: Value) -> String {
    json!({
        "plant": {"num": [1.0], "den": [2.0, 3.0, 1.0]},
        "controller": {"num": [2.0], "den": [1.0]},
        "coding": coding,
        "reference": {"type": "step", "amplitude": 1.0},
        "attacks": attacks,
        "sim": {"t_end": 5.0, "dt": 0.001},
        "freq": {"omega_max": 100.0}
    })
    .to_string()
}

#[test]
fn design_reports_feasibility() {
    let v: Value = serde_json::from_str(&design_json(r#"{"num":[1],"den":[-1,1]}"#, "w").unwrap()).unwrap();
    assert_eq!(v["feasible"], json!(true));
    let v: Value = serde_json::from_str(&design_json(r#"{"num":[1],"den":[1,1]}"#, "both").unwrap()).unwrap();
    assert_eq!(v["feasible"], json!(false));
    assert!(design_json("{", "w").is_err());
    assert!(design_json(r#"{"num":[1],"den":[1,1]}"#, "x").is_err());
}

#[test]
fn simulation_is_decimated_and_decoupled() {
    let coding = json!({"type": "two_way", "a": 1.0, "b": 1.0, "c": -0.5, "d": 1.0});
    let attacks = json!({"w": {"type": "sinusoid", "amplitude": 100.0, "omega": 5.0}});
    let v: Value = serde_json::from_str(&simulate_json(&scenario(coding.clone(), attacks)).unwrap()).unwrap();
    let clean: Value = serde_json::from_str(&simulate_json(&scenario(coding, json!({}))).unwrap()).unwrap();
    let t = v["t"].as_array().unwrap();
    assert!(t.len() <= MAX_POINTS + 1);
    assert_eq!(v["steps"], json!(5000));
    assert_eq!(v["series"]["y_bar"], clean["series"]["y_bar"]);
    assert_ne!(v["series"]["w"], clean["series"]["w"]);
}

#[test]
fn analysis_has_both_reports() {
    let v: Value = serde_json::from_str(&analyze_json(&scenario(json!({"type": "none"}), json!({}))).unwrap()).unwrap();
    assert_eq!(v["tfs"]["stable"], json!(true));
    assert_eq!(v["freq"]["maps"].as_array().unwrap().len(), 6);
    assert!(analyze_json(r#"{"plant": 1}"#).is_err());
}
