use driftloc_web::{classify_json, decode_json, symbols, track_json};
use serde_json::Value;

const GYRE: &str = r#"{"kind":"double_gyre","amplitude":1,"inflow":2,"core":0.05}"#;

#[test]
fn classify_reports_both_gyres() {
    let v: Value = serde_json::from_str(&classify_json(GYRE, 21, 29).unwrap()).unwrap();
    assert_eq!(v["persistent"], 2);
    assert_eq!(v["labels"], serde_json::json!(["B_1", "B_2", "B(1)", "B(2)", "B(1,2)"]));
    assert_eq!(v["region"].as_array().unwrap().len(), 21 * 29);
    assert_eq!(v["images"].as_array().unwrap().len(), 21 * 29);
}

#[test]
fn noiseless_track_is_recovered() {
    let v: Value = serde_json::from_str(&track_json(GYRE, 21, 29, 1.0, 149, 30, 4, false).unwrap()).unwrap();
    assert_eq!(v["truth"], v["decoded"]);
    assert_eq!(v["final_error"], 0.0);
}

#[test]
fn decode_reports_impossible_histories() {
    let still = r#"{"kind":"uniform","u":0,"v":0}"#;
    let ok: Value = serde_json::from_str(&decode_json(still, 5, 5, 1.0, 12, false, "I I").unwrap()).unwrap();
    assert_eq!(ok["decoded"], serde_json::json!([12, 12, 12]));
    let err = decode_json(still, 5, 5, 1.0, 12, false, "I N").unwrap_err();
    assert!(err.contains("step 2"), "{err}");
}

#[test]
fn bad_input_is_an_error_not_a_panic() {
    assert!(classify_json("{", 10, 10).is_err());
    assert!(classify_json(GYRE, 500, 500).is_err());
    assert!(track_json(GYRE, 21, 29, 0.9, 10_000, 10, 0, false).is_err());
    assert!(track_json(GYRE, 21, 29, 0.0, 0, 10, 0, false).is_err());
    assert!(decode_json(GYRE, 21, 29, 0.9, 0, false, "north").is_err());
    assert_eq!(symbols(), "N NE E SE S SW W NW I");
}
