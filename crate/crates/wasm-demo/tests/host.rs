//! Native tests over the wasm-facing functions; they keep the browser demo
//! honest without needing the wasm toolchain.

use redcohort_wasm::{classify, fuse_gender, parse_title};
use serde_json::Value;

fn parsed(json: String) -> Value {
    serde_json::from_str(&json).unwrap()
}

#[test]
fn classify_reports_decision_and_spans() {
    let v = parsed(classify("", "I was diagnosed with bipolar disorder last month", 55));
    assert_eq!(v["decision"], "matched");
    assert_eq!(v["text"], "i was diagnosed with bipolar disorder last month");
    let kinds: Vec<&str> = v["spans"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["kind"].as_str().unwrap())
        .collect();
    assert!(kinds.contains(&"inclusion"));
    assert!(kinds.contains(&"condition"));
    assert!(v["condition_span"]["start"].is_u64());
    assert!(v["distance_chars"].as_u64().unwrap() < 55);
}

#[test]
fn classify_respects_threshold_and_exclusions() {
    let filler = "q".repeat(80);
    let far = parsed(classify("", &format!("bipolar {filler} i was diagnosed last year"), 55));
    assert_eq!(far["decision"], "proximity_failed");
    let excluded = parsed(classify("", "Not formally diagnosed, but bipolar fits", 55));
    assert_eq!(excluded["decision"], "excluded_by_pattern");
    let title_only = parsed(classify("My bipolar 2 diagnosis", "one year on", 55));
    assert_eq!(title_only["decision"], "matched");
}

#[test]
fn parse_title_finds_bracket_reports() {
    let v = parsed(parse_title("Me [26F] one year after my diagnosis", 1622548800.0));
    let c = &v["candidates"][0];
    assert_eq!(c["age"], 26);
    assert_eq!(c["gender"], "f");
    assert_eq!(c["first_person"], true);
    assert_eq!(c["dob_estimate"], "1995-06-02");

    let none = parsed(parse_title("No numbers here", 0.0));
    assert_eq!(none["candidates"].as_array().unwrap().len(), 0);
}

#[test]
fn fuse_gender_follows_precedence() {
    let v = parsed(fuse_gender(Some(0.95), Some("m".into()), Some(0.1)));
    assert_eq!(v["gender"], "f");
    assert_eq!(v["source"], "username");

    let v = parsed(fuse_gender(Some(0.5), Some("m".into()), Some(0.9)));
    assert_eq!(v["gender"], "m");
    assert_eq!(v["source"], "self_reported");

    let v = parsed(fuse_gender(None, None, Some(0.9)));
    assert_eq!(v["gender"], "f");
    assert_eq!(v["source"], "language_use");

    let v = parsed(fuse_gender(None, None, None));
    assert!(v["gender"].is_null());

    let v = parsed(fuse_gender(None, Some("x".into()), None));
    assert!(v["error"].as_str().unwrap().contains("x"));
}
