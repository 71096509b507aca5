//! Equivalence between the production matcher and the slow reference
//! matcher on randomized inputs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use redcohort::corpus::normalize_text;
use redcohort::pattern::{compile_matcher, PatternSet};
use redcohort::testkit::{random_matcher_instance, NaiveMatcher};

#[test]
fn matches_reference_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACE5);
    let mut with_spans = 0usize;
    for i in 0..1000 {
        let inst = random_matcher_instance(&mut rng);
        let fast = compile_matcher("bd", &inst.set).unwrap();
        let slow = NaiveMatcher::compile("bd", &inst.set).unwrap();
        let got = fast.find_matches(&inst.text);
        let want = slow.find_matches(&inst.text);
        assert_eq!(got, want, "instance {i}, text {:?}", inst.text);
        if !want.is_empty() {
            with_spans += 1;
        }
    }
    assert!(with_spans > 200, "only {with_spans}/1000 instances had spans");
}

#[test]
fn matches_reference_on_unicode_heavy_texts() {
    let set = PatternSet::from_texts(
        "diagnos* with CONDITION\nmy DOCTOR said",
        "undiagnos*",
        "arzt\nmédecin",
        &[("bd", "bipolar\nbd\nстресс")],
    )
    .unwrap();
    let fast = compile_matcher("bd", &set).unwrap();
    let slow = NaiveMatcher::compile("bd", &set).unwrap();
    for raw in [
        "Mein Arzt said: diagnosed with бипол… bd.",
        "my médecin said diagnosé with bd",
        "стресс диагноз bd undiagnosable",
        "日本語 bd 日本語 diagnosed with стресс",
        "énergie_bd bd_énergie (bd)",
    ] {
        let text = normalize_text(raw);
        assert_eq!(fast.find_matches(&text), slow.find_matches(&text), "{text}");
    }
}

#[test]
fn repeated_scans_are_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..50 {
        let inst = random_matcher_instance(&mut rng);
        let m = compile_matcher("bd", &inst.set).unwrap();
        let first = m.find_matches(&inst.text);
        for _ in 0..3 {
            assert_eq!(m.find_matches(&inst.text), first);
        }
    }
}
