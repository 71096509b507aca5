//! Browser bindings for three interactive operations: classify a post
//! against the bundled bipolar-disorder patterns, parse a title for
//! bracketed age/gender self-reports, and fuse gender signals. Every
//! function takes plain values and returns a JSON string so the page needs
//! no generated glue beyond wasm-bindgen's. The crate also compiles
//! natively, which keeps it testable without the wasm toolchain.

use std::sync::OnceLock;

use redcohort::detector::{classify_post, matchable_text};
use redcohort::pattern::{compile_matcher, CompiledMatcher, PatternSet, SpanKind};
use redcohort::profiler::{estimate_dob, extract_self_report, hybrid_gender, Gender};
use serde_json::json;
use wasm_bindgen::prelude::*;

const INCLUSION: &str = include_str!("../../../resources/patterns/inclusion.txt");
const EXCLUSION: &str = include_str!("../../../resources/patterns/exclusion.txt");
const DOCTOR: &str = include_str!("../../../resources/patterns/doctor.txt");
const BD_TERMS: &str = include_str!("../../../resources/patterns/conditions/bd.txt");

fn demo_set() -> &'static PatternSet {
    static SET: OnceLock<PatternSet> = OnceLock::new();
    SET.get_or_init(|| {
        PatternSet::from_texts(INCLUSION, EXCLUSION, DOCTOR, &[("bd", BD_TERMS)])
            .expect("bundled pattern files are well formed")
    })
}

fn demo_matcher() -> &'static CompiledMatcher {
    static MATCHER: OnceLock<CompiledMatcher> = OnceLock::new();
    MATCHER.get_or_init(|| compile_matcher("bd", demo_set()).expect("bundled set compiles"))
}

fn pattern_source(set: &PatternSet, kind: SpanKind, pattern_id: usize) -> &str {
    let list = match kind {
        SpanKind::Inclusion => &set.inclusion,
        SpanKind::Exclusion => &set.exclusion,
        SpanKind::Condition => &set.condition_terms["bd"],
        SpanKind::Doctor => &set.doctor_terms,
    };
    list.get(pattern_id).map_or("", |p| p.raw.as_str())
}

/// Classifies one post (title may be empty) at the given proximity
/// threshold. Returns the decision, the normalized text the spans refer
/// to, every raw match span, and the winning evidence spans.
#[wasm_bindgen]
pub fn classify(title: &str, body: &str, threshold: usize) -> String {
    let post = redcohort::corpus::Post {
        post_id: "demo".into(),
        user_id: "demo".into(),
        kind: if title.is_empty() {
            redcohort::corpus::PostKind::Comment
        } else {
            redcohort::corpus::PostKind::Submission
        },
        title: (!title.is_empty()).then(|| title.to_string()),
        body: body.to_string(),
        subreddit: "demo".into(),
        created_utc: 0,
    };
    let set = demo_set();
    let matcher = demo_matcher();
    let text = matchable_text(&post);
    let spans: Vec<_> = matcher
        .find_matches(&text)
        .into_iter()
        .map(|s| {
            json!({
                "start": s.start,
                "end": s.end,
                "kind": s.kind,
                "pattern": pattern_source(set, s.kind, s.pattern_id),
            })
        })
        .collect();
    let evidence = classify_post(&post, matcher, threshold);
    json!({
        "text": text,
        "decision": evidence.decision,
        "condition_span": evidence.condition_span,
        "inclusion_span": evidence.inclusion_span,
        "distance_chars": evidence.distance_chars,
        "spans": spans,
    })
    .to_string()
}

/// Extracts bracketed age/gender self-reports from a submission title and
/// estimates the birth date each one implies at `posted_utc` (seconds).
#[wasm_bindgen]
pub fn parse_title(title: &str, posted_utc: f64) -> String {
    let candidates: Vec<_> = extract_self_report(title, "demo")
        .into_iter()
        .map(|c| {
            let dob = estimate_dob(c.age, posted_utc as i64)
                .map(|d| d.to_string())
                .ok();
            json!({
                "age": c.age,
                "gender": c.gender,
                "start": c.span.0,
                "end": c.span.1,
                "first_person": c.first_person,
                "dob_estimate": dob,
            })
        })
        .collect();
    json!({ "candidates": candidates }).to_string()
}

/// Fuses the three gender signals in precedence order: username score
/// (decided at <= 0.1 / >= 0.9), self-reported letter ("f"/"m"), language
/// score (decided at 0.5). Pass null/undefined for an absent signal.
#[wasm_bindgen]
pub fn fuse_gender(
    username_score: Option<f64>,
    self_gender: Option<String>,
    language_score: Option<f64>,
) -> String {
    let self_gender = match self_gender.as_deref() {
        None | Some("") => None,
        Some("f") | Some("F") => Some(Gender::F),
        Some("m") | Some("M") => Some(Gender::M),
        Some(other) => {
            return json!({ "error": format!("unknown gender letter `{other}`") }).to_string()
        }
    };
    let (gender, source) = hybrid_gender(username_score, self_gender, language_score);
    json!({ "gender": gender, "source": source }).to_string()
}
