use ametric_web::ops::{classify_json, contraction_factor, iterate_json};
use serde_json::Value;

fn json(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn classifies_two_sevenths() {
    let out = json(&classify_json(r#"{"t": 3, "map": {"kind": "two_sevenths"}}"#).unwrap());
    assert_eq!(out["valid"], true);
    assert!((out["a"].as_f64().unwrap() - 2.0 / 7.0).abs() <= 1e-12);
    assert_eq!(out["b"], 0.0);
    assert_eq!(out["branch_counts"][1], 0);
    assert!(out["witness"].is_null());
}

#[test]
fn shift_gets_a_witness() {
    let out = json(&classify_json(r#"{"t": 2, "map": {"kind": "shift", "by": 1}}"#).unwrap());
    assert_eq!(out["valid"], false);
    assert!(out["delta"].is_null());
    assert_eq!(out["witness"].as_array().unwrap().len(), 2);
}

#[test]
fn iterates_to_the_fixed_point() {
    let req = r#"{"t": 3, "map": {"kind": "affine", "alpha": 0.5, "beta": 1}, "x0": 10}"#;
    let out = json(&iterate_json(req).unwrap());
    assert_eq!(out["status"], "converged");
    assert!((out["limit"].as_f64().unwrap() - 2.0).abs() <= 1e-11);
    let iterates = out["iterates"].as_array().unwrap();
    assert_eq!(iterates[0], 10.0);
    assert_eq!(iterates[1], 6.0);
    let steps = out["steps"].as_array().unwrap();
    let bounds = out["bounds"].as_array().unwrap();
    assert_eq!(steps.len(), bounds.len());
    for (s, b) in steps.iter().zip(bounds) {
        assert!(s.as_f64().unwrap() <= b.as_f64().unwrap());
    }
    assert_eq!(out["tail_bounds"].as_array().unwrap().len(), iterates.len());
}

#[test]
fn uncertified_maps_run_without_bounds() {
    let req = r#"{"t": 2, "map": {"kind": "shift"}, "x0": 0, "max_iter": 5}"#;
    let out = json(&iterate_json(req).unwrap());
    assert_eq!(out["status"], "max_iter");
    assert_eq!(out["iterates"].as_array().unwrap().len(), 6);
    assert!(out["tail_bounds"].as_array().unwrap().is_empty());
    assert!(out["limit"].is_null());
}

#[test]
fn interval_spaces_check_the_map() {
    let ok = r#"{"t": 3, "map": {"kind": "constant", "value": 0.3}, "lo": 0, "hi": 1, "x0": 0.9}"#;
    let out = json(&iterate_json(ok).unwrap());
    assert_eq!(out["limit"], 0.3);
    let escapes = r#"{"t": 3, "map": {"kind": "shift"}, "lo": 0, "hi": 1, "x0": 0.5}"#;
    assert!(iterate_json(escapes).is_err());
    let half = r#"{"t": 3, "map": {"kind": "identity"}, "lo": 0}"#;
    assert!(classify_json(half).unwrap_err().contains("lo and hi"));
}

#[test]
fn bad_requests_are_errors() {
    assert!(classify_json("not json").unwrap_err().starts_with("bad request"));
    assert!(classify_json(r#"{"t": 1, "map": {"kind": "identity"}}"#).is_err());
    assert!(iterate_json(r#"{"t": 2, "map": {"kind": "identity"}, "x0": 0, "max_iter": 1000000}"#).is_err());
}

#[test]
fn contraction_factor_values() {
    assert_eq!(contraction_factor(2.0 / 7.0, 0.0, 0.0, 3).unwrap(), 2.0 / 7.0);
    assert!((contraction_factor(0.0, 1.0 / 3.0, 0.0, 2).unwrap() - 0.5).abs() <= 1e-15);
    assert!(contraction_factor(0.0, 0.5, 0.0, 2).is_err());
    assert!(contraction_factor(0.1, 0.0, 0.0, 1).is_err());
}
