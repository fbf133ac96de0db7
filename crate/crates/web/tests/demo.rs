use lindlift_web::{eternal_nm_json, sin_dephasing_json, tangent_json};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn pure_state_leaving_the_ball_is_rejected() {
    let v = parse(&tangent_json([0.0, 0.0, 1.0], [0.0, 0.0, 1.0]).unwrap());
    assert_eq!(v["member"], Value::Bool(false));
    assert_eq!(v["epsilon_max"].as_f64(), Some(0.0));
    assert!(v["min_rate"].is_null());
}

#[test]
fn mixed_state_relaxation_is_admissible() {
    let v = parse(&tangent_json([0.0, 0.0, 0.0], [0.0, 0.0, -2.0]).unwrap());
    assert_eq!(v["member"], Value::Bool(true));
    let rate = v["min_rate"].as_f64().unwrap();
    assert!((rate - 2.0).abs() <= 4e-3, "{rate}");
    assert!(v["sigma"].is_array());
}

#[test]
fn outside_bloch_ball_is_an_error() {
    assert!(tangent_json([1.0, 1.0, 0.0], [0.0; 3]).is_err());
}

#[test]
fn eternal_nm_tracks_path() {
    let v = parse(&eternal_nm_json(5.0, 2000).unwrap());
    assert!(v["max_deviation"].as_f64().unwrap() <= 1e-6);
    assert_eq!(v["t"].as_array().unwrap().len(), 2001);
    let path = v["path"].as_array().unwrap();
    assert_eq!(path[0].as_f64(), Some(0.5));
    assert!(eternal_nm_json(-1.0, 10).is_err());
}

#[test]
fn sin_dephasing_series_shapes() {
    let v = parse(&sin_dephasing_json(std::f64::consts::TAU, 401).unwrap());
    assert_eq!(v["t"].as_array().unwrap().len(), 401);
    // t = 0 has no coherence to fit and cot diverges.
    assert!(v["fitted_rate"][0].is_null());
    assert!(v["cot"][0].is_null());
    let rate = v["fitted_rate"][50].as_f64().unwrap();
    let t = v["t"][50].as_f64().unwrap();
    assert!((rate + 0.5 * t.cos() / t.sin()).abs() <= 1e-8);
    assert!(sin_dephasing_json(7.0, 10).is_err());
}
