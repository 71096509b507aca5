//! Test support: a slow reference matcher, random matcher instances, and
//! a synthetic corpus generator with planted ground truth. Compiled only
//! with the `testkit` feature.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::detector::Diagnosis;
use crate::pattern::{
    expand_placeholders, is_word_char, MatchSpan, PatternError, PatternSet, SpanKind,
};
use crate::profiler::{Gender, ReportAgeGroup, SECONDS_PER_YEAR};

struct NaiveSegment {
    literal: String,
    wildcard: bool,
}

struct NaiveAlt {
    kind: SpanKind,
    pattern_id: usize,
    segments: Vec<NaiveSegment>,
    starts_word: bool,
    ends_word: bool,
}

impl NaiveAlt {
    fn parse(kind: SpanKind, pattern_id: usize, rendered: &str) -> NaiveAlt {
        let mut segments = Vec::new();
        let mut current = String::new();
        for c in rendered.chars() {
            if c == '*' {
                segments.push(NaiveSegment {
                    literal: std::mem::take(&mut current),
                    wildcard: true,
                });
            } else {
                current.push(c);
            }
        }
        if !current.is_empty() {
            segments.push(NaiveSegment {
                literal: current,
                wildcard: false,
            });
        }
        let starts_word = rendered.chars().next().is_some_and(is_word_char);
        let ends_word = segments
            .last()
            .is_some_and(|s| !s.wildcard && s.literal.chars().next_back().is_some_and(is_word_char));
        NaiveAlt {
            kind,
            pattern_id,
            segments,
            starts_word,
            ends_word,
        }
    }

    fn match_at(&self, text: &str, start: usize) -> Option<usize> {
        if self.starts_word && start > 0 {
            if let Some(prev) = text[..start].chars().next_back() {
                if is_word_char(prev) {
                    return None;
                }
            }
        }
        let mut pos = start;
        for seg in &self.segments {
            if !text[pos..].starts_with(&seg.literal) {
                return None;
            }
            pos += seg.literal.len();
            if seg.wildcard {
                for c in text[pos..].chars() {
                    if !is_word_char(c) {
                        break;
                    }
                    pos += c.len_utf8();
                }
            }
        }
        if self.ends_word {
            if let Some(next) = text[pos..].chars().next() {
                if is_word_char(next) {
                    return None;
                }
            }
        }
        Some(pos)
    }
}

/// Reference matcher: tries every alternative at every character boundary.
/// Same alternative order, dedup rule and span semantics as the production
/// matcher, entirely different scanning algorithm.
pub struct NaiveMatcher {
    alts: Vec<NaiveAlt>,
}

impl NaiveMatcher {
    pub fn compile(label: &str, set: &PatternSet) -> Result<NaiveMatcher, PatternError> {
        let conditions = set
            .condition_terms
            .get(label)
            .ok_or_else(|| PatternError::UnknownLabel(label.to_string()))?;
        let mut alts = Vec::new();
        let mut seen: BTreeSet<(SpanKind, String)> = BTreeSet::new();
        let mut add =
            |kind: SpanKind, id: usize, rendered: Vec<String>, alts: &mut Vec<NaiveAlt>| {
                for text in rendered {
                    if text.is_empty() {
                        continue;
                    }
                    if seen.insert((kind, text.clone())) {
                        alts.push(NaiveAlt::parse(kind, id, &text));
                    }
                }
            };
        for (i, term) in conditions.iter().enumerate() {
            add(SpanKind::Condition, i, expand_placeholders(term, &[], &[])?, &mut alts);
        }
        for (i, pat) in set.inclusion.iter().enumerate() {
            let rendered = expand_placeholders(pat, conditions, &set.doctor_terms)?;
            add(SpanKind::Inclusion, i, rendered, &mut alts);
        }
        for (i, pat) in set.exclusion.iter().enumerate() {
            let rendered = expand_placeholders(pat, conditions, &set.doctor_terms)?;
            add(SpanKind::Exclusion, i, rendered, &mut alts);
        }
        for (i, term) in set.doctor_terms.iter().enumerate() {
            add(SpanKind::Doctor, i, expand_placeholders(term, &[], &[])?, &mut alts);
        }
        Ok(NaiveMatcher { alts })
    }

    pub fn find_matches(&self, text: &str) -> Vec<MatchSpan> {
        let mut spans = Vec::new();
        for alt in &self.alts {
            for (start, _) in text.char_indices() {
                if let Some(end) = alt.match_at(text, start) {
                    spans.push(MatchSpan {
                        start,
                        end,
                        kind: alt.kind,
                        pattern_id: alt.pattern_id,
                    });
                }
            }
        }
        spans.sort_unstable();
        spans.dedup();
        spans
    }
}

const INSTANCE_STEMS: &[&str] = &[
    "diag", "diagnos", "bd", "bip", "bipolar", "dep", "doc", "a", "ab", "b_c", "xé", "ii",
];

fn random_token(rng: &mut impl Rng) -> String {
    let stem = INSTANCE_STEMS.choose(rng).unwrap();
    if rng.gen_bool(0.3) {
        format!("{stem}*")
    } else {
        (*stem).to_string()
    }
}

fn random_line(rng: &mut impl Rng, placeholders: bool, doctors: bool) -> String {
    let n = rng.gen_range(1..=3);
    let mut tokens = Vec::with_capacity(n);
    for _ in 0..n {
        let roll: f64 = rng.gen();
        if placeholders && roll < 0.2 {
            tokens.push("CONDITION".to_string());
        } else if placeholders && doctors && roll < 0.3 {
            tokens.push("DOCTOR".to_string());
        } else {
            tokens.push(random_token(rng));
        }
    }
    tokens.join(" ")
}

/// One randomized matcher test case.
pub struct MatcherInstance {
    pub text: String,
    pub set: PatternSet,
}

/// Generates a small random pattern set plus a text that shares its word
/// pool, so matches actually occur.
pub fn random_matcher_instance(rng: &mut impl Rng) -> MatcherInstance {
    let n_doctor = rng.gen_range(0..=2);
    let doctor: Vec<String> = (0..n_doctor).map(|_| random_token(rng)).collect();
    let has_doctors = !doctor.is_empty();

    let n_cond = rng.gen_range(1..=3);
    let conditions: Vec<String> = (0..n_cond)
        .map(|_| {
            let n = rng.gen_range(1..=2);
            (0..n).map(|_| random_token(rng)).collect::<Vec<_>>().join(" ")
        })
        .collect();

    let n_incl = rng.gen_range(1..=4);
    let inclusion: Vec<String> = (0..n_incl)
        .map(|_| random_line(rng, true, has_doctors))
        .collect();
    let n_excl = rng.gen_range(0..=2);
    let exclusion: Vec<String> = (0..n_excl)
        .map(|_| random_line(rng, true, has_doctors))
        .collect();

    let set = PatternSet::from_texts(
        &inclusion.join("\n"),
        &exclusion.join("\n"),
        &doctor.join("\n"),
        &[("bd", conditions.join("\n").as_str())],
    )
    .expect("generated files are well formed");

    let seps = [" ", " ", " ", ". ", ", ", "-", "_", "'", " é ", "\u{201c}"];
    let mut text = String::new();
    for _ in 0..rng.gen_range(0..=30) {
        let stem = INSTANCE_STEMS.choose(rng).unwrap();
        text.push_str(stem);
        if rng.gen_bool(0.2) {
            text.push_str("ed");
        }
        text.push_str(seps.choose(rng).unwrap());
    }
    MatcherInstance { text, set }
}

const FILLER: &[&str] = &[
    "garden", "river", "stone", "cloud", "song", "winter", "maple", "quiet", "lantern", "harbor",
    "copper", "meadow", "violet", "amber", "willow",
];

fn filler_words(rng: &mut impl Rng, n: usize) -> String {
    (0..n)
        .map(|_| *FILLER.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Pattern files used by the synthetic corpus.
pub fn synth_pattern_files() -> Vec<(&'static str, &'static str)> {
    vec![
        (
            "inclusion.txt",
            "i was diagnos*\ni have been diagnos*\ndiagnos* with CONDITION\nmy DOCTOR diagnosed me\na diagnosis of CONDITION\n",
        ),
        (
            "exclusion.txt",
            "she's diagnos*\nhe's diagnos*\nnot diagnos*\nundiagnos*\nself diagnos*\n",
        ),
        ("doctor.txt", "doctor\npsychiatrist\n"),
        ("conditions/bd.txt", "bipolar\nbipolar disorder\nbd\n"),
        ("conditions/mdd.txt", "major depressive disorder\nmdd\n"),
        ("conditions/anxiety.txt", "anxiety disorder\ngad\n"),
        ("conditions/adhd.txt", "adhd\n"),
        ("conditions/bpd.txt", "borderline personality disorder\nbpd\n"),
        ("conditions/ptsd.txt", "ptsd\n"),
        ("conditions/ocd.txt", "ocd\n"),
        ("conditions/asd.txt", "asd\nautism spectrum\n"),
        ("conditions/ed.txt", "anorexia\nbulimia\n"),
        ("conditions/psychotic.txt", "schizophrenia\npsychosis\n"),
    ]
}

pub fn synth_pattern_set() -> PatternSet {
    let files = synth_pattern_files();
    let get = |name: &str| {
        files
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| *text)
            .unwrap_or("")
    };
    let conditions: Vec<(&str, &str)> = files
        .iter()
        .filter_map(|(name, text)| {
            name.strip_prefix("conditions/")
                .and_then(|n| n.strip_suffix(".txt"))
                .map(|label| (label, *text))
        })
        .collect();
    PatternSet::from_texts(
        get("inclusion.txt"),
        get("exclusion.txt"),
        get("doctor.txt"),
        &conditions,
    )
    .expect("static files are well formed")
}

/// Country grid used by the synthetic corpus: isolated cells far apart so
/// nearest-cell fallbacks are unambiguous.
pub const SYNTH_GRID: &[(f64, f64, &str)] = &[
    (40.0, -100.0, "US"),
    (52.0, 0.0, "GB"),
    (48.0, 10.5, "DE"),
    (-27.5, 140.0, "AU"),
    (56.0, -106.0, "CA"),
    (36.5, 138.5, "JP"),
    (-14.0, -51.5, "BR"),
    (20.5, 78.5, "IN"),
];

pub fn synth_grid_csv() -> String {
    let mut out = String::from("lat,lon,iso2\n");
    for (lat, lon, iso2) in SYNTH_GRID {
        out.push_str(&format!("{lat},{lon},{iso2}\n"));
    }
    out
}

/// Everything one synthetic user should produce downstream.
#[derive(Debug, Clone, Default)]
pub struct PlantedUser {
    pub user_id: String,
    pub username: String,
    /// In the final cohort after bot, manual and psychotic removals.
    pub in_cohort: bool,
    /// Diagnoses beyond bd the pipeline should extract, psychotic included.
    pub comorbidities: BTreeSet<Diagnosis>,
    /// Mdd attribution survives the conservative policy.
    pub conservative_mdd: bool,
    pub dob: Option<chrono::NaiveDate>,
    pub age_group_mean: Option<ReportAgeGroup>,
    pub gender: Option<Gender>,
    pub country: Option<String>,
}

#[derive(Debug, Default)]
pub struct SynthCorpus {
    pub posts_jsonl: String,
    pub accounts_jsonl: String,
    pub predictions_jsonl: String,
    pub review_csv: String,
    pub gold_csv: String,
    pub resolutions_csv: String,
    /// Planted users keyed by user id; bots and removed users included.
    pub users: BTreeMap<String, PlantedUser>,
    pub n_posts: usize,
}

impl SynthCorpus {
    pub fn expected_cohort(&self) -> BTreeSet<String> {
        self.users
            .values()
            .filter(|u| u.in_cohort)
            .map(|u| u.user_id.clone())
            .collect()
    }
}

struct SynthBuilder {
    corpus: SynthCorpus,
    next_post: usize,
}

const BASE_TS: i64 = 1_450_000_000;
const DAY: i64 = 86_400;

impl SynthBuilder {
    fn post(&mut self, user_id: &str, title: Option<&str>, body: &str, ts: i64) {
        let id = format!("p{:06}", self.next_post);
        self.next_post += 1;
        self.corpus.n_posts += 1;
        let (kind, title_json) = match title {
            Some(t) => ("submission", format!("\"title\":{},", serde_json::to_string(t).unwrap())),
            None => ("comment", String::new()),
        };
        self.corpus.posts_jsonl.push_str(&format!(
            "{{\"post_id\":\"{id}\",\"user_id\":\"{user_id}\",\"kind\":\"{kind}\",{title_json}\"body\":{},\"subreddit\":\"synth\",\"created_utc\":{ts}}}\n",
            serde_json::to_string(body).unwrap(),
        ));
    }

    fn account(&mut self, user_id: &str, username: &str, created: i64) {
        self.corpus.accounts_jsonl.push_str(&format!(
            "{{\"user_id\":\"{user_id}\",\"username\":\"{username}\",\"created_utc\":{created}}}\n"
        ));
    }

    fn prediction(&mut self, user_id: &str, attribute: &str, value: &str, score: f64, model: &str) {
        self.corpus.predictions_jsonl.push_str(&format!(
            "{{\"user_id\":\"{user_id}\",\"attribute\":\"{attribute}\",\"value\":{value},\"score\":{score},\"model_id\":\"{model}\"}}\n"
        ));
    }
}

/// Generates a corpus of `n_users` regular users plus a fixed cast of
/// special cases (bots, manual removals, a psychotic-matcher user), with
/// the downstream truth recorded per user.
pub fn generate_synth_corpus(n_users: usize, rng: &mut impl Rng) -> SynthCorpus {
    let mut b = SynthBuilder {
        corpus: SynthCorpus::default(),
        next_post: 0,
    };
    b.corpus.review_csv.push_str("user_id,action,reason\n");
    b.corpus.resolutions_csv.push_str("user_id,variable,label\n");
    b.corpus
        .gold_csv
        .push_str("# sampling: every 8th planted cohort user, both annotators\n");
    b.corpus.gold_csv.push_str("user_id,variable,label,annotator_id\n");

    let bd_terms = ["bipolar", "bipolar disorder", "bd"];
    let comorbid_terms: &[(Diagnosis, &str)] = &[
        (Diagnosis::Mdd, "mdd"),
        (Diagnosis::Anxiety, "gad"),
        (Diagnosis::Adhd, "adhd"),
        (Diagnosis::Bpd, "bpd"),
        (Diagnosis::Ptsd, "ptsd"),
        (Diagnosis::Ocd, "ocd"),
        (Diagnosis::Asd, "asd"),
        (Diagnosis::Ed, "anorexia"),
    ];

    for i in 0..n_users {
        let user_id = format!("u{i:04}");
        let username = format!("{}_{i:04}", FILLER[i % FILLER.len()]);
        let mut planted = PlantedUser {
            user_id: user_id.clone(),
            username: username.clone(),
            ..PlantedUser::default()
        };
        let mut ts = BASE_TS + (i as i64) * DAY;
        let mut post_times = Vec::new();
        let push_post = |b: &mut SynthBuilder, title: Option<&str>, body: &str, ts: &mut i64, times: &mut Vec<i64>| {
            b.post(&user_id, title, body, *ts);
            times.push(*ts);
            *ts += 17 * DAY;
        };

        // cohort membership: 0 matched, 1..=4 the non-member ladder
        let membership = rng.gen_range(0..5);
        let bd_term = bd_terms[rng.gen_range(0..bd_terms.len())];
        let self_report_age: Option<(u32, Gender)> = if membership == 0 && rng.gen_bool(0.5) {
            let age = rng.gen_range(18..=60);
            let gender = if rng.gen_bool(0.5) { Gender::F } else { Gender::M };
            Some((age, gender))
        } else {
            None
        };

        let title = match self_report_age {
            Some((age, g)) => format!("i [{age}{g}] need advice"),
            None => format!("update from {}", filler_words(rng, 2)),
        };
        match membership {
            0 => {
                planted.in_cohort = true;
                let body = match rng.gen_range(0..3) {
                    0 => format!("i was diagnosed with {bd_term} last spring"),
                    1 => format!("my psychiatrist diagnosed me with {bd_term} recently"),
                    _ => format!("after tests came a diagnosis of {bd_term} for me"),
                };
                push_post(&mut b, Some(&title), &body, &mut ts, &mut post_times);
            }
            1 => {
                // condition term far from the inclusion phrase
                let body = format!(
                    "{bd_term} support group met. {} and i was diagnosed by nobody",
                    filler_words(rng, 10)
                );
                push_post(&mut b, Some(&title), &body, &mut ts, &mut post_times);
            }
            2 => {
                let body = format!("she's diagnosed with {bd_term} i think");
                push_post(&mut b, Some(&title), &body, &mut ts, &mut post_times);
            }
            3 => {
                let body = format!("{bd_term} community meetup tonight");
                push_post(&mut b, Some(&title), &body, &mut ts, &mut post_times);
            }
            _ => {
                let body = format!("thinking about {}", filler_words(rng, 4));
                push_post(&mut b, Some(&title), &body, &mut ts, &mut post_times);
            }
        }

        if planted.in_cohort {
            for (diagnosis, term) in comorbid_terms {
                if !rng.gen_bool(0.25) {
                    continue;
                }
                planted.comorbidities.insert(*diagnosis);
                if *diagnosis == Diagnosis::Mdd {
                    // a post that also reports bd does not survive the
                    // conservative policy; a standalone one does
                    let mode = rng.gen_range(0..3);
                    planted.conservative_mdd = mode != 1;
                    if mode != 1 {
                        let body = format!("i was diagnosed with {term} years ago");
                        push_post(&mut b, None, &body, &mut ts, &mut post_times);
                    }
                    if mode != 0 {
                        let body = format!("i was diagnosed with {bd_term} and with mdd");
                        push_post(&mut b, None, &body, &mut ts, &mut post_times);
                    }
                } else {
                    let body = format!("i was diagnosed with {term} years ago");
                    push_post(&mut b, None, &body, &mut ts, &mut post_times);
                }
            }
        }
        for _ in 0..rng.gen_range(0..3) {
            let n_words = rng.gen_range(3..12);
            let body = filler_words(rng, n_words);
            push_post(&mut b, None, &body, &mut ts, &mut post_times);
        }

        b.account(&user_id, &username, post_times[0] - 2 * SECONDS_PER_YEAR);

        // gender signals
        let username_score: Option<f64> = match rng.gen_range(0..4) {
            0 => Some(0.95),
            1 => Some(0.02),
            2 => Some(0.5),
            _ => None,
        };
        let backend_gender: Option<f64> = match rng.gen_range(0..3) {
            0 => Some(0.8),
            1 => Some(0.2),
            _ => None,
        };
        if let Some(s) = username_score {
            b.prediction(&user_id, "gender", &format!("{s}"), 0.9, "username-rf");
        }
        if let Some(s) = backend_gender {
            b.prediction(&user_id, "gender", &format!("{s}"), 0.7, "gender-bert");
        }
        planted.gender = match username_score {
            Some(s) if s >= 0.9 => Some(Gender::F),
            Some(s) if s <= 0.1 => Some(Gender::M),
            _ => match self_report_age {
                Some((_, g)) => Some(g),
                None => backend_gender.map(|s| if s >= 0.5 { Gender::F } else { Gender::M }),
            },
        };

        // age signals
        let backend_group: Option<&str> = if self_report_age.is_none() && rng.gen_bool(0.5) {
            Some(["14-23", "24-45", "46-65"][rng.gen_range(0..3)])
        } else {
            None
        };
        if let Some(label) = backend_group {
            b.prediction(&user_id, "age_group", &format!("\"{label}\""), 0.8, "ham-lm");
        }
        let last_post = *post_times.iter().max().unwrap();
        let dob_secs: Option<i64> = match (self_report_age, backend_group) {
            (Some((age, _)), _) => Some(post_times[0] - i64::from(age) * SECONDS_PER_YEAR),
            (None, Some(label)) => {
                let midpoint = match label {
                    "14-23" => 18.5,
                    "24-45" => 34.5,
                    _ => 55.5,
                };
                Some(last_post - (midpoint * SECONDS_PER_YEAR as f64) as i64)
            }
            (None, None) => None,
        };
        planted.dob = dob_secs
            .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0))
            .map(|dt| dt.date_naive());
        planted.age_group_mean = planted.dob.and_then(|dob| {
            let mean = post_times
                .iter()
                .map(|&t| crate::profiler::age_at(dob, t))
                .sum::<f64>()
                / post_times.len() as f64;
            crate::profiler::bucket_age(mean).ok()
        });

        // country signal
        if rng.gen_bool(0.6) {
            let (lat, lon, iso2) = SYNTH_GRID[rng.gen_range(0..SYNTH_GRID.len())];
            let (lat, lon) = if rng.gen_bool(0.25) {
                (lat + 0.5, lon)
            } else {
                (lat, lon)
            };
            b.prediction(
                &user_id,
                "location",
                &format!("[{lat},{lon}]"),
                0.85,
                "geo-cluster",
            );
            planted.country = Some(iso2.to_string());
        }

        b.corpus.users.insert(user_id, planted);
    }

    plant_special_cases(&mut b, rng);
    plant_gold(&mut b);
    b.corpus
}

fn plant_special_cases(b: &mut SynthBuilder, rng: &mut impl Rng) {
    let bd_body = "i was diagnosed with bipolar disorder in march";
    let mut ts = BASE_TS - 40 * DAY;
    let mut add = |b: &mut SynthBuilder,
                   user_id: &str,
                   username: &str,
                   in_cohort: bool,
                   posts: Vec<(Option<&str>, String)>| {
        let mut times = Vec::new();
        for (title, body) in &posts {
            b.post(user_id, title.as_deref(), body, ts);
            times.push(ts);
            ts += 1800;
        }
        b.account(user_id, username, times[0] - SECONDS_PER_YEAR);
        b.corpus.users.insert(
            user_id.to_string(),
            PlantedUser {
                user_id: user_id.to_string(),
                username: username.to_string(),
                in_cohort,
                ..PlantedUser::default()
            },
        );
    };

    // name-flagged bot, confirmed for removal
    add(
        b,
        "sp_botname",
        "auto_feed",
        false,
        vec![(Some("daily digest"), bd_body.to_string())],
    );
    b.corpus
        .review_csv
        .push_str("sp_botname,remove,confirmed bot\n");

    // volume-flagged bot, confirmed for removal
    let mut volume_posts: Vec<(Option<&str>, String)> = (0..1501)
        .map(|i| (Some("tick"), format!("entry {i} {}", filler_words(rng, 2))))
        .collect();
    volume_posts.push((Some("odd one"), bd_body.to_string()));
    add(b, "sp_volume", "feedstream", false, volume_posts);
    b.corpus
        .review_csv
        .push_str("sp_volume,remove,confirmed bot\n");

    // flagged by name, reviewed and kept
    add(
        b,
        "sp_kept",
        "botanica_lover",
        true,
        vec![(Some("hello"), bd_body.to_string())],
    );
    b.corpus.review_csv.push_str("sp_kept,keep,human account\n");

    // flagged by name, never reviewed: stays
    add(
        b,
        "sp_unreviewed",
        "auto_pilot99",
        true,
        vec![(Some("hello"), bd_body.to_string())],
    );

    // manual removal of an otherwise valid member
    add(
        b,
        "sp_manual",
        "quiet_manual",
        false,
        vec![(Some("hello"), bd_body.to_string())],
    );
    b.corpus
        .review_csv
        .push_str("sp_manual,remove,impersonation account\n");

    // psychotic-matcher user: removed even though reviewed as keep
    add(
        b,
        "sp_psy",
        "harbor_psy",
        false,
        vec![
            (Some("hello"), bd_body.to_string()),
            (None, "i was diagnosed with schizophrenia before".to_string()),
        ],
    );
    b.corpus.review_csv.push_str("sp_psy,keep,looks fine\n");

    // matching text hidden inside a quote block: not a member
    add(
        b,
        "sp_quoted",
        "maple_quoted",
        false,
        vec![(
            Some("sharing a quote"),
            format!("context first\n> {bd_body}\nthat was someone else"),
        )],
    );

    // same text outside the quote marker: member
    add(
        b,
        "sp_unquoted",
        "maple_unquoted",
        true,
        vec![(Some("my own words"), format!("intro line\n{bd_body}\nclosing line"))],
    );
}

fn plant_gold(b: &mut SynthBuilder) {
    let users: Vec<PlantedUser> = b.corpus.users.values().cloned().collect();
    let mut gold = String::new();
    let mut disagreement_planted = false;
    for (i, user) in users.iter().enumerate() {
        if i % 8 != 0 {
            continue;
        }
        let bd = if user.in_cohort { "yes" } else { "no" };
        for annotator in ["a1", "a2"] {
            gold.push_str(&format!("{},bd_diagnosis,{bd},{annotator}\n", user.user_id));
        }
        if let Some(gender) = user.gender {
            for annotator in ["a1", "a2"] {
                gold.push_str(&format!("{},gender,{gender},{annotator}\n", user.user_id));
            }
        }
        if let Some(dob) = user.dob {
            for annotator in ["a1", "a2"] {
                gold.push_str(&format!("{},dob,{dob},{annotator}\n", user.user_id));
            }
        }
        if let Some(country) = &user.country {
            // one planted disagreement, resolved toward the truth
            if !disagreement_planted {
                disagreement_planted = true;
                gold.push_str(&format!("{},country,{country},a1\n", user.user_id));
                gold.push_str(&format!("{},country,ZZ,a2\n", user.user_id));
                b.corpus.resolutions_csv.push_str(&format!(
                    "{},country,{country}\n",
                    user.user_id
                ));
            } else {
                for annotator in ["a1", "a2"] {
                    gold.push_str(&format!("{},country,{country},{annotator}\n", user.user_id));
                }
            }
        }
    }
    b.corpus.gold_csv.push_str(&gold);
}

/// Pattern set with roughly 300 alternatives for throughput runs.
pub fn throughput_pattern_set() -> PatternSet {
    let conditions: Vec<String> = (0..25).map(|i| format!("cond{i:02}")).collect();
    let mut inclusion = String::from("i was diagnos*\nrecently diagnos*\na diagnosis of CONDITION\n");
    for verb in [
        "diagnos* with",
        "treated for",
        "living with",
        "managing",
        "confirmed",
        "battling",
        "fighting",
        "handling",
        "facing",
        "carrying",
    ] {
        inclusion.push_str(&format!("{verb} CONDITION\n"));
    }
    PatternSet::from_texts(
        &inclusion,
        "not diagnos*\nundiagnos*\n",
        "doctor\npsychiatrist\ntherapist\n",
        &[("bd", conditions.join("\n").as_str())],
    )
    .expect("static files are well formed")
}

/// Synthetic post texts for throughput runs; about one in ten contains
/// a planted near-match or match.
pub fn throughput_text(rng: &mut impl Rng) -> String {
    let mut text = filler_words(rng, 12);
    match rng.gen_range(0..10) {
        0 => {
            let term = format!("cond{:02}", rng.gen_range(0..25));
            text.push_str(&format!(" i was diagnosed with {term} last year"));
        }
        1 => {
            text.push_str(" i was diagnosed by someone once");
        }
        2 => {
            let term = format!("cond{:02}", rng.gen_range(0..25));
            text.push_str(&format!(" {term} came up in conversation"));
        }
        _ => {}
    }
    text.push(' ');
    text.push_str(&filler_words(rng, 6));
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::compile_matcher;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reference_matcher_agrees_on_the_demo_text() {
        let set = synth_pattern_set();
        let fast = compile_matcher("bd", &set).unwrap();
        let slow = NaiveMatcher::compile("bd", &set).unwrap();
        for text in [
            "i was diagnosed with bipolar last week",
            "she's diagnosed with bd",
            "undiagnosed bipolar ii",
            "my psychiatrist diagnosed me with bd",
            "",
            "bd",
        ] {
            assert_eq!(fast.find_matches(text), slow.find_matches(text), "{text}");
        }
    }

    #[test]
    fn generated_instances_compile() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let inst = random_matcher_instance(&mut rng);
            assert!(compile_matcher("bd", &inst.set).is_ok());
        }
    }

    #[test]
    fn synth_corpus_is_deterministic() {
        let a = generate_synth_corpus(20, &mut ChaCha8Rng::seed_from_u64(11));
        let b = generate_synth_corpus(20, &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(a.posts_jsonl, b.posts_jsonl);
        assert_eq!(a.predictions_jsonl, b.predictions_jsonl);
        assert_eq!(a.gold_csv, b.gold_csv);
        assert_eq!(a.expected_cohort(), b.expected_cohort());
    }

    #[test]
    fn synth_corpus_has_the_special_cast() {
        let c = generate_synth_corpus(20, &mut ChaCha8Rng::seed_from_u64(11));
        let cohort = c.expected_cohort();
        for id in ["sp_kept", "sp_unreviewed", "sp_unquoted"] {
            assert!(cohort.contains(id), "{id} should be in");
        }
        for id in ["sp_botname", "sp_volume", "sp_manual", "sp_psy", "sp_quoted"] {
            assert!(!cohort.contains(id), "{id} should be out");
        }
        assert!(c.n_posts > 1501);
    }

    #[test]
    fn throughput_set_is_large() {
        let set = throughput_pattern_set();
        let m = compile_matcher("bd", &set).unwrap();
        let total: usize = [
            SpanKind::Condition,
            SpanKind::Inclusion,
            SpanKind::Exclusion,
            SpanKind::Doctor,
        ]
        .iter()
        .map(|k| m.n_alternatives(*k))
        .sum();
        assert!(total >= 300, "only {total} alternatives");
    }
}
