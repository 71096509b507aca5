//! Demographic profiling: self-reported age/gender from submission titles,
//! external model predictions (age group, gender score, coordinates),
//! correction rules, and the fusion into per-user hybrid estimates.

pub mod geo;

use std::collections::BTreeSet;

use chrono::{DateTime, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::normalize_text;
use crate::pattern::is_word_char;
use geo::CountryGrid;

/// Year length used for all age arithmetic: 365.25 days.
pub const SECONDS_PER_YEAR: i64 = 31_557_600;
pub const MIN_SELF_REPORT_AGE: u32 = 13;
pub const MAX_SELF_REPORT_AGE: u32 = 99;
/// Username-model score at or below this means masculine.
pub const USERNAME_MALE_MAX: f64 = 0.1;
/// Username-model score at or above this means feminine.
pub const USERNAME_FEMALE_MIN: f64 = 0.9;
/// Self-reported birth dates spread wider than this leave age unresolved.
pub const MAX_DOB_SPREAD_SECONDS: i64 = 3 * SECONDS_PER_YEAR;
/// Platform minimum sign-up age; backend ages implying less are discarded.
pub const MIN_SIGNUP_AGE_YEARS: f64 = 13.0;
pub const REVIEW_MEAN_AGE_LOW: f64 = 16.0;
pub const REVIEW_MEAN_AGE_HIGH: f64 = 60.0;

#[derive(Debug, Error)]
pub enum ProfilerError {
    #[error("age {0} outside {MIN_SELF_REPORT_AGE}..={MAX_SELF_REPORT_AGE}")]
    AgeOutOfRange(u32),
    #[error("age {0:.2} below the 13+ report range")]
    UnderReportAge(f64),
    #[error("prediction: {0}")]
    Prediction(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gender {
    #[serde(rename = "f")]
    F,
    #[serde(rename = "m")]
    M,
}

impl Gender {
    pub fn label(&self) -> &'static str {
        match self {
            Gender::F => "f",
            Gender::M => "m",
        }
    }
}

impl std::fmt::Display for Gender {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Age groups used by the language-use age backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HamAgeGroup {
    #[serde(rename = "<14")]
    Under14,
    #[serde(rename = "14-23")]
    From14To23,
    #[serde(rename = "24-45")]
    From24To45,
    #[serde(rename = "46-65")]
    From46To65,
    #[serde(rename = "66+")]
    Over65,
}

pub const HAM_AGE_GROUPS: [HamAgeGroup; 5] = [
    HamAgeGroup::Under14,
    HamAgeGroup::From14To23,
    HamAgeGroup::From24To45,
    HamAgeGroup::From46To65,
    HamAgeGroup::Over65,
];

impl HamAgeGroup {
    pub fn label(&self) -> &'static str {
        match self {
            HamAgeGroup::Under14 => "<14",
            HamAgeGroup::From14To23 => "14-23",
            HamAgeGroup::From24To45 => "24-45",
            HamAgeGroup::From46To65 => "46-65",
            HamAgeGroup::Over65 => "66+",
        }
    }

    pub fn from_label(label: &str) -> Option<HamAgeGroup> {
        HAM_AGE_GROUPS.into_iter().find(|g| g.label() == label)
    }

    /// Midpoint of the group's age interval. The open boundary groups
    /// close at 13 and 90.
    pub fn midpoint_age(&self) -> f64 {
        match self {
            HamAgeGroup::Under14 => 13.5,
            HamAgeGroup::From14To23 => 18.5,
            HamAgeGroup::From24To45 => 34.5,
            HamAgeGroup::From46To65 => 55.5,
            HamAgeGroup::Over65 => 78.0,
        }
    }
}

/// Age groups used in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ReportAgeGroup {
    #[serde(rename = "13-17")]
    From13To17,
    #[serde(rename = "18-29")]
    From18To29,
    #[serde(rename = "30-49")]
    From30To49,
    #[serde(rename = "50-64")]
    From50To64,
    #[serde(rename = "65+")]
    Over65,
}

pub const REPORT_AGE_GROUPS: [ReportAgeGroup; 5] = [
    ReportAgeGroup::From13To17,
    ReportAgeGroup::From18To29,
    ReportAgeGroup::From30To49,
    ReportAgeGroup::From50To64,
    ReportAgeGroup::Over65,
];

impl ReportAgeGroup {
    pub fn label(&self) -> &'static str {
        match self {
            ReportAgeGroup::From13To17 => "13-17",
            ReportAgeGroup::From18To29 => "18-29",
            ReportAgeGroup::From30To49 => "30-49",
            ReportAgeGroup::From50To64 => "50-64",
            ReportAgeGroup::Over65 => "65+",
        }
    }
}

/// Buckets an age into the report groups: [13,18), [18,30), [30,50),
/// [50,65), [65,∞). Under-13 ages are rejected; accounts that young are
/// discarded upstream.
pub fn bucket_age(age_years: f64) -> Result<ReportAgeGroup, ProfilerError> {
    if age_years < 13.0 {
        return Err(ProfilerError::UnderReportAge(age_years));
    }
    Ok(if age_years < 18.0 {
        ReportAgeGroup::From13To17
    } else if age_years < 30.0 {
        ReportAgeGroup::From18To29
    } else if age_years < 50.0 {
        ReportAgeGroup::From30To49
    } else if age_years < 65.0 {
        ReportAgeGroup::From50To64
    } else {
        ReportAgeGroup::Over65
    })
}

/// A bracketed age/gender token found in a submission title, e.g. `[17f]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfReportCandidate {
    pub post_id: String,
    pub age: u32,
    pub gender: Gender,
    /// Byte offsets of the token (brackets included) in the normalized title.
    pub span: (usize, usize),
    pub first_person: bool,
}

fn parse_bracket_content(content: &str) -> Option<(u32, Gender)> {
    let gender_of = |b: u8| match b {
        b'f' => Some(Gender::F),
        b'm' => Some(Gender::M),
        _ => None,
    };
    let age_of = |d1: u8, d2: u8| {
        (d1.is_ascii_digit() && d2.is_ascii_digit())
            .then(|| u32::from(d1 - b'0') * 10 + u32::from(d2 - b'0'))
    };
    let shape = |d1: u8, d2: u8, g: u8| Some((age_of(d1, d2)?, gender_of(g)?));
    let sep = |b: u8| b == b' ' || b == b'/';

    match *content.trim().as_bytes() {
        [x, y, z] => shape(x, y, z).or_else(|| shape(y, z, x)),
        [x, y, s, z] if sep(s) => shape(x, y, z),
        [z, s, x, y] if sep(s) => shape(x, y, z),
        _ => None,
    }
}

/// A token is first-person when a whole-word `i`, `me` or `my` ends at most
/// 3 non-space characters before it.
fn is_first_person(prefix: &str) -> bool {
    for pronoun in ["i", "me", "my"] {
        let mut search_end = prefix.len();
        while let Some(pos) = prefix[..search_end].rfind(pronoun) {
            let end = pos + pronoun.len();
            let starts_word = pos == 0
                || !prefix[..pos]
                    .chars()
                    .next_back()
                    .is_some_and(is_word_char);
            let ends_word = !prefix[end..].chars().next().is_some_and(is_word_char);
            if starts_word && ends_word {
                let gap = prefix[end..].chars().filter(|c| !c.is_whitespace()).count();
                if gap <= 3 {
                    return true;
                }
                break;
            }
            search_end = pos;
        }
    }
    false
}

/// Scans a submission title for bracketed or parenthesized age/gender
/// tokens: two digits and a gender letter in either order, optionally
/// separated by a space or slash. Ages outside 13..=99 are dropped.
pub fn extract_self_report(title: &str, post_id: &str) -> Vec<SelfReportCandidate> {
    let norm = normalize_text(title);
    let mut out = Vec::new();
    for (i, c) in norm.char_indices() {
        let close = match c {
            '[' => ']',
            '(' => ')',
            _ => continue,
        };
        let rest = &norm[i + 1..];
        let Some(rel) = rest.find(close) else { continue };
        let Some((age, gender)) = parse_bracket_content(&rest[..rel]) else {
            continue;
        };
        if !(MIN_SELF_REPORT_AGE..=MAX_SELF_REPORT_AGE).contains(&age) {
            continue;
        }
        out.push(SelfReportCandidate {
            post_id: post_id.to_string(),
            age,
            gender,
            span: (i, i + 1 + rel + close.len_utf8()),
            first_person: is_first_person(&norm[..i]),
        });
    }
    out
}

/// Estimated birth date: the post date minus `age_years` × 365.25 days.
pub fn estimate_dob(age_years: u32, post_utc: i64) -> Result<NaiveDate, ProfilerError> {
    if !(MIN_SELF_REPORT_AGE..=MAX_SELF_REPORT_AGE).contains(&age_years) {
        return Err(ProfilerError::AgeOutOfRange(age_years));
    }
    Ok(seconds_to_date(
        post_utc - i64::from(age_years) * SECONDS_PER_YEAR,
    ))
}

fn seconds_to_date(secs: i64) -> NaiveDate {
    DateTime::from_timestamp(secs, 0)
        .expect("timestamp in range")
        .date_naive()
}

fn date_to_seconds(date: NaiveDate) -> i64 {
    date.and_hms_opt(0, 0, 0)
        .expect("midnight exists")
        .and_utc()
        .timestamp()
}

/// Real-valued age at time `t` for someone born on `dob`.
pub fn age_at(dob: NaiveDate, t: i64) -> f64 {
    (t - date_to_seconds(dob)) as f64 / SECONDS_PER_YEAR as f64
}

/// Outcome of merging a user's self-report candidates.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SelfReportChoice {
    pub dob: Option<NaiveDate>,
    pub gender: Option<Gender>,
    /// Candidate birth dates spread over more than 3 years.
    pub age_unresolved: bool,
}

/// Merges candidates across a user's submissions. First-person candidates
/// outrank the rest when any exist. The birth date is the median over the
/// kept candidates; a spread above 3 years leaves age unresolved. Gender is
/// the majority vote, ties unresolved.
pub fn choose_self_report(candidates: &[(SelfReportCandidate, i64)]) -> SelfReportChoice {
    let first_person: Vec<&(SelfReportCandidate, i64)> =
        candidates.iter().filter(|(c, _)| c.first_person).collect();
    let kept: Vec<&(SelfReportCandidate, i64)> = if first_person.is_empty() {
        candidates.iter().collect()
    } else {
        first_person
    };
    if kept.is_empty() {
        return SelfReportChoice::default();
    }

    let mut dob_secs: Vec<i64> = kept
        .iter()
        .map(|(c, ts)| ts - i64::from(c.age) * SECONDS_PER_YEAR)
        .collect();
    dob_secs.sort_unstable();
    let spread = dob_secs.last().unwrap() - dob_secs.first().unwrap();
    let (dob, age_unresolved) = if spread > MAX_DOB_SPREAD_SECONDS {
        (None, true)
    } else {
        let mid = dob_secs.len() / 2;
        let median = if dob_secs.len() % 2 == 1 {
            dob_secs[mid]
        } else {
            (dob_secs[mid - 1] + dob_secs[mid]) / 2
        };
        (Some(seconds_to_date(median)), false)
    };

    let f = kept.iter().filter(|(c, _)| c.gender == Gender::F).count();
    let m = kept.len() - f;
    let gender = match f.cmp(&m) {
        std::cmp::Ordering::Greater => Some(Gender::F),
        std::cmp::Ordering::Less => Some(Gender::M),
        std::cmp::Ordering::Equal => None,
    };

    SelfReportChoice {
        dob,
        gender,
        age_unresolved,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostingAges {
    pub first_post_age: f64,
    pub mean_posting_age: f64,
    /// Some post predates the 13th birthday implied by `dob`.
    pub underage_post: bool,
}

/// Age at the first post and the mean age over all posts. `None` for users
/// without posts.
pub fn posting_ages(dob: NaiveDate, post_times: &[i64]) -> Option<PostingAges> {
    if post_times.is_empty() {
        return None;
    }
    let first = post_times.iter().min().unwrap();
    let ages: Vec<f64> = post_times.iter().map(|&t| age_at(dob, t)).collect();
    Some(PostingAges {
        first_post_age: age_at(dob, *first),
        mean_posting_age: ages.iter().sum::<f64>() / ages.len() as f64,
        underage_post: ages.iter().any(|&a| a < 13.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileFlag {
    AgeReviewLow,
    AgeReviewHigh,
    AgeDiscardedUnder13,
}

/// Review flags for self-reported ages: suspiciously low or high mean
/// posting ages go to manual review while the values stay in place.
pub fn age_review_flag(mean_posting_age: f64) -> Option<ProfileFlag> {
    if mean_posting_age < REVIEW_MEAN_AGE_LOW {
        Some(ProfileFlag::AgeReviewLow)
    } else if mean_posting_age > REVIEW_MEAN_AGE_HIGH {
        Some(ProfileFlag::AgeReviewHigh)
    } else {
        None
    }
}

/// Derives the birth date implied by a backend age group, anchored at the
/// user's most recent post.
pub fn ham_group_dob(group: HamAgeGroup, last_post_utc: i64) -> NaiveDate {
    seconds_to_date(last_post_utc - (group.midpoint_age() * SECONDS_PER_YEAR as f64) as i64)
}

/// A backend age prediction is discarded when the age it implies at account
/// creation falls below the platform's 13-year minimum.
pub fn backend_age_discarded(
    group: HamAgeGroup,
    last_post_utc: i64,
    account_created_utc: i64,
) -> bool {
    age_at(ham_group_dob(group, last_post_utc), account_created_utc) < MIN_SIGNUP_AGE_YEARS
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeSource {
    SelfReported,
    LanguageUse,
    #[default]
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenderSource {
    Username,
    SelfReported,
    LanguageUse,
    #[default]
    None,
}

/// Age fusion: a self-reported birth date always wins; otherwise a
/// surviving backend age group is converted via its interval midpoint.
pub fn hybrid_age(
    self_dob: Option<NaiveDate>,
    backend_group: Option<HamAgeGroup>,
    last_post_utc: i64,
) -> (Option<NaiveDate>, AgeSource) {
    if let Some(dob) = self_dob {
        return (Some(dob), AgeSource::SelfReported);
    }
    if let Some(group) = backend_group {
        return (Some(ham_group_dob(group, last_post_utc)), AgeSource::LanguageUse);
    }
    (None, AgeSource::None)
}

/// Username-model decision: ≤ 0.1 masculine, ≥ 0.9 feminine, otherwise
/// undecided. Both bounds inclusive.
pub fn username_gender_decision(score: f64) -> Option<Gender> {
    if score <= USERNAME_MALE_MAX {
        Some(Gender::M)
    } else if score >= USERNAME_FEMALE_MIN {
        Some(Gender::F)
    } else {
        None
    }
}

/// Gender fusion in precedence order username, self-reported, language use.
/// Backend scores are feminine-probability values decided at 0.5.
/// Disagreements between lower-precedence methods are ignored.
pub fn hybrid_gender(
    username_score: Option<f64>,
    self_gender: Option<Gender>,
    backend_score: Option<f64>,
) -> (Option<Gender>, GenderSource) {
    if let Some(decision) = username_score.and_then(username_gender_decision) {
        return (Some(decision), GenderSource::Username);
    }
    if let Some(gender) = self_gender {
        return (Some(gender), GenderSource::SelfReported);
    }
    if let Some(score) = backend_score {
        let gender = if score >= 0.5 { Gender::F } else { Gender::M };
        return (Some(gender), GenderSource::LanguageUse);
    }
    (None, GenderSource::None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    AgeGroup,
    Gender,
    Location,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PredictionValue {
    AgeGroup(HamAgeGroup),
    /// Feminine-probability score in [0,1].
    Score(f64),
    /// (latitude, longitude) on the 0.5° grid.
    Coordinates(f64, f64),
}

/// One row of a model-prediction file.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendPrediction {
    pub user_id: String,
    pub attribute: Attribute,
    pub value: PredictionValue,
    pub score: f64,
    pub model_id: String,
}

#[derive(Deserialize)]
struct RawPrediction {
    user_id: String,
    attribute: Attribute,
    value: serde_json::Value,
    score: f64,
    model_id: String,
}

/// Parses and validates one prediction JSON object. Value shape depends on
/// the attribute: an age-group label, a score in [0,1], or a `[lat, lon]`
/// pair on the 0.5° grid.
pub fn parse_prediction(json: &str) -> Result<BackendPrediction, ProfilerError> {
    let raw: RawPrediction =
        serde_json::from_str(json).map_err(|e| ProfilerError::Prediction(e.to_string()))?;
    let fail = |msg: String| ProfilerError::Prediction(msg);
    if !(0.0..=1.0).contains(&raw.score) {
        return Err(fail(format!("score {} outside [0,1]", raw.score)));
    }
    let value = match raw.attribute {
        Attribute::AgeGroup => {
            let label = raw
                .value
                .as_str()
                .ok_or_else(|| fail("age_group value must be a string label".into()))?;
            let group = HamAgeGroup::from_label(label)
                .ok_or_else(|| fail(format!("unknown age group `{label}`")))?;
            PredictionValue::AgeGroup(group)
        }
        Attribute::Gender => {
            let score = raw
                .value
                .as_f64()
                .ok_or_else(|| fail("gender value must be a number".into()))?;
            if !(0.0..=1.0).contains(&score) {
                return Err(fail(format!("gender value {score} outside [0,1]")));
            }
            PredictionValue::Score(score)
        }
        Attribute::Location => {
            let pair = raw
                .value
                .as_array()
                .filter(|a| a.len() == 2)
                .and_then(|a| Some((a[0].as_f64()?, a[1].as_f64()?)))
                .ok_or_else(|| fail("location value must be [lat, lon]".into()))?;
            let (lat, lon) = pair;
            if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
                return Err(fail(format!("coordinates ({lat}, {lon}) out of range")));
            }
            if (lat * 2.0).fract() != 0.0 || (lon * 2.0).fract() != 0.0 {
                return Err(fail(format!(
                    "coordinates ({lat}, {lon}) not on the 0.5° grid"
                )));
            }
            PredictionValue::Coordinates(lat, lon)
        }
    };
    Ok(BackendPrediction {
        user_id: raw.user_id,
        attribute: raw.attribute,
        value,
        score: raw.score,
        model_id: raw.model_id,
    })
}

/// Fused per-user profile, the pipeline's main analytical output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dob_estimate: Option<NaiveDate>,
    #[serde(default)]
    pub age_source: AgeSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_post_age: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_posting_age: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age_group_first_post: Option<ReportAgeGroup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age_group_mean: Option<ReportAgeGroup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<Gender>,
    #[serde(default)]
    pub gender_source: GenderSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub flags: BTreeSet<ProfileFlag>,
}

/// Everything known about one user that profiling consumes.
#[derive(Debug, Clone, Default)]
pub struct ProfileInputs<'a> {
    pub user_id: &'a str,
    /// (post_id, title, created_utc) for each submission with a title.
    pub titles: Vec<(&'a str, &'a str, i64)>,
    /// Timestamps of every post by the user; must be non-empty.
    pub post_times: Vec<i64>,
    pub account_created_utc: Option<i64>,
    pub predictions: Vec<&'a BackendPrediction>,
}

fn best_prediction<'a>(
    predictions: &[&'a BackendPrediction],
    attribute: Attribute,
    username_model: Option<bool>,
) -> Option<&'a BackendPrediction> {
    predictions
        .iter()
        .filter(|p| p.attribute == attribute)
        .filter(|p| match username_model {
            Some(want) => p.model_id.to_lowercase().contains("username") == want,
            None => true,
        })
        .min_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.model_id.cmp(&b.model_id))
        })
        .copied()
}

/// The strongest prediction per attribute after routing, as consumed by
/// the profile fusion. Gender predictions route on the model id: ids
/// containing "username" feed the username method, the rest the
/// language-use method.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SelectedPredictions {
    pub age_group: Option<HamAgeGroup>,
    pub username_gender_score: Option<f64>,
    pub language_gender_score: Option<f64>,
    pub coordinates: Option<(f64, f64)>,
}

pub fn select_predictions(predictions: &[&BackendPrediction]) -> SelectedPredictions {
    SelectedPredictions {
        age_group: best_prediction(predictions, Attribute::AgeGroup, None).and_then(|p| {
            match p.value {
                PredictionValue::AgeGroup(g) => Some(g),
                _ => None,
            }
        }),
        username_gender_score: best_prediction(predictions, Attribute::Gender, Some(true))
            .and_then(|p| match p.value {
                PredictionValue::Score(s) => Some(s),
                _ => None,
            }),
        language_gender_score: best_prediction(predictions, Attribute::Gender, Some(false))
            .and_then(|p| match p.value {
                PredictionValue::Score(s) => Some(s),
                _ => None,
            }),
        coordinates: best_prediction(predictions, Attribute::Location, None).and_then(|p| {
            match p.value {
                PredictionValue::Coordinates(lat, lon) => Some((lat, lon)),
                _ => None,
            }
        }),
    }
}

/// Builds the fused profile for one user. Gender predictions split on the
/// model id: ids containing "username" feed the username method, the rest
/// feed the language-use method. Within a method the highest-confidence
/// prediction wins, ties broken by model id.
pub fn build_profile(inputs: &ProfileInputs, grid: Option<&CountryGrid>) -> UserProfile {
    let mut flags = BTreeSet::new();

    let candidates: Vec<(SelfReportCandidate, i64)> = inputs
        .titles
        .iter()
        .flat_map(|(post_id, title, ts)| {
            extract_self_report(title, post_id)
                .into_iter()
                .map(move |c| (c, *ts))
        })
        .collect();
    let choice = choose_self_report(&candidates);

    let last_post = inputs.post_times.iter().max().copied().unwrap_or(0);

    let selected = select_predictions(&inputs.predictions);
    let mut backend_group = selected.age_group;
    if let (Some(group), Some(created)) = (backend_group, inputs.account_created_utc) {
        if backend_age_discarded(group, last_post, created) {
            flags.insert(ProfileFlag::AgeDiscardedUnder13);
            backend_group = None;
        }
    }

    let (dob_estimate, age_source) = hybrid_age(choice.dob, backend_group, last_post);
    let ages = dob_estimate.and_then(|dob| posting_ages(dob, &inputs.post_times));
    if let Some(a) = &ages {
        if age_source == AgeSource::SelfReported {
            if let Some(flag) = age_review_flag(a.mean_posting_age) {
                flags.insert(flag);
            }
            if a.underage_post {
                flags.insert(ProfileFlag::AgeReviewLow);
            }
        }
    }

    let (gender, gender_source) = hybrid_gender(
        selected.username_gender_score,
        choice.gender,
        selected.language_gender_score,
    );

    let country = selected
        .coordinates
        .and_then(|(lat, lon)| grid.and_then(|g| g.lookup(lat, lon)))
        .map(|c| c.to_string());

    UserProfile {
        user_id: inputs.user_id.to_string(),
        dob_estimate,
        age_source,
        first_post_age: ages.as_ref().map(|a| a.first_post_age),
        mean_posting_age: ages.as_ref().map(|a| a.mean_posting_age),
        age_group_first_post: ages
            .as_ref()
            .and_then(|a| bucket_age(a.first_post_age).ok()),
        age_group_mean: ages.as_ref().and_then(|a| bucket_age(a.mean_posting_age).ok()),
        gender,
        gender_source,
        country,
        flags,
    }
}
