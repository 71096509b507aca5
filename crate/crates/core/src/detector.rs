//! Post classification and cohort construction.
//!
//! A post joins the cohort evidence when a condition term and an inclusion
//! pattern co-occur within the proximity threshold and no exclusion pattern
//! fires anywhere in the post. Cohort cleanup removes bot accounts confirmed
//! by manual review and users who also match the psychotic-disorders matcher.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{normalize_text, strip_quotes, Post, UserAccount, UserStats};
use crate::pattern::{closest_pair, CompiledMatcher, MatchSpan, SpanKind};

/// More submissions than this marks a user as a bot candidate.
pub const BOT_MAX_SUBMISSIONS: u64 = 1500;
/// More comments than this marks a user as a bot candidate.
pub const BOT_MAX_COMMENTS: u64 = 200_000;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("cohort is empty")]
    EmptyCohort,
    #[error("review file row {row}: {message}")]
    Review { row: usize, message: String },
}

/// Diagnosis labels tracked by the pipeline. `MddConservative` is the
/// stricter depression variant that requires the qualifying post to not
/// also match the bipolar matcher.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Diagnosis {
    Bd,
    Mdd,
    MddConservative,
    Anxiety,
    Adhd,
    Bpd,
    Ptsd,
    Ocd,
    Asd,
    Ed,
    Psychotic,
}

/// Comorbidity rows reported alongside the cohort, in report order.
pub const REPORT_COMORBIDITIES: [Diagnosis; 8] = [
    Diagnosis::Mdd,
    Diagnosis::Anxiety,
    Diagnosis::Adhd,
    Diagnosis::Bpd,
    Diagnosis::Ptsd,
    Diagnosis::Ocd,
    Diagnosis::Asd,
    Diagnosis::Ed,
];

impl Diagnosis {
    pub fn label(&self) -> &'static str {
        match self {
            Diagnosis::Bd => "bd",
            Diagnosis::Mdd => "mdd",
            Diagnosis::MddConservative => "mdd_conservative",
            Diagnosis::Anxiety => "anxiety",
            Diagnosis::Adhd => "adhd",
            Diagnosis::Bpd => "bpd",
            Diagnosis::Ptsd => "ptsd",
            Diagnosis::Ocd => "ocd",
            Diagnosis::Asd => "asd",
            Diagnosis::Ed => "ed",
            Diagnosis::Psychotic => "psychotic",
        }
    }
}

impl fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Diagnosis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bd" => Ok(Diagnosis::Bd),
            "mdd" => Ok(Diagnosis::Mdd),
            "mdd_conservative" => Ok(Diagnosis::MddConservative),
            "anxiety" => Ok(Diagnosis::Anxiety),
            "adhd" => Ok(Diagnosis::Adhd),
            "bpd" => Ok(Diagnosis::Bpd),
            "ptsd" => Ok(Diagnosis::Ptsd),
            "ocd" => Ok(Diagnosis::Ocd),
            "asd" => Ok(Diagnosis::Asd),
            "ed" => Ok(Diagnosis::Ed),
            "psychotic" => Ok(Diagnosis::Psychotic),
            other => Err(format!("unknown diagnosis label `{other}`")),
        }
    }
}

/// Why a post did or did not count as a self-reported diagnosis. Checks run
/// in declaration order; exclusion wins over everything downstream of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    NoConditionTerm,
    ExcludedByPattern,
    NoInclusion,
    ProximityFailed,
    Matched,
}

/// Classification record for one post against one diagnosis matcher. Spans
/// refer to the normalized `title + " " + quote-stripped body` text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosisEvidence {
    pub post_id: String,
    pub diagnosis_label: String,
    pub decision: Decision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition_span: Option<MatchSpan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inclusion_span: Option<MatchSpan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_chars: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exclusion_pattern_id: Option<usize>,
}

/// The text a post is matched against.
pub fn matchable_text(post: &Post) -> String {
    let mut text = String::new();
    if let Some(title) = &post.title {
        text.push_str(title);
        text.push(' ');
    }
    text.push_str(&strip_quotes(&post.body));
    normalize_text(&text)
}

pub fn classify_post(
    post: &Post,
    matcher: &CompiledMatcher,
    threshold: usize,
) -> DiagnosisEvidence {
    let text = matchable_text(post);
    let spans = matcher.find_matches(&text);
    let mut evidence = DiagnosisEvidence {
        post_id: post.post_id.clone(),
        diagnosis_label: matcher.label().to_string(),
        decision: Decision::NoConditionTerm,
        condition_span: None,
        inclusion_span: None,
        distance_chars: None,
        exclusion_pattern_id: None,
    };

    let conditions: Vec<MatchSpan> = spans
        .iter()
        .filter(|s| s.kind == SpanKind::Condition)
        .copied()
        .collect();
    if conditions.is_empty() {
        return evidence;
    }
    if let Some(excl) = spans.iter().find(|s| s.kind == SpanKind::Exclusion) {
        evidence.decision = Decision::ExcludedByPattern;
        evidence.exclusion_pattern_id = Some(excl.pattern_id);
        return evidence;
    }
    let inclusions: Vec<MatchSpan> = spans
        .iter()
        .filter(|s| s.kind == SpanKind::Inclusion)
        .copied()
        .collect();
    if inclusions.is_empty() {
        evidence.decision = Decision::NoInclusion;
        return evidence;
    }
    let (distance, cond, incl) =
        closest_pair(&text, &conditions, &inclusions).expect("both lists non-empty");
    evidence.condition_span = Some(*cond);
    evidence.inclusion_span = Some(*incl);
    evidence.distance_chars = Some(distance);
    evidence.decision = if distance < threshold {
        Decision::Matched
    } else {
        Decision::ProximityFailed
    };
    evidence
}

/// Bot-candidate and bookkeeping flags attached to cohort entries.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum CohortFlag {
    BotName,
    HighVolume,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortEntry {
    pub user_id: String,
    /// Matched-post evidence, ordered by post time then post id.
    pub evidence: Vec<DiagnosisEvidence>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub flags: BTreeSet<CohortFlag>,
}

/// Runs the matcher over every post and groups matched evidence by user.
/// Users without a single matched post do not appear.
pub fn detect_cohort(
    posts: &[Post],
    matcher: &CompiledMatcher,
    threshold: usize,
) -> BTreeMap<String, CohortEntry> {
    let mut matched: Vec<(&str, i64, DiagnosisEvidence)> = posts
        .par_iter()
        .filter_map(|post| {
            let evidence = classify_post(post, matcher, threshold);
            (evidence.decision == Decision::Matched)
                .then(|| (post.user_id.as_str(), post.created_utc, evidence))
        })
        .collect();
    matched.sort_by(|a, b| {
        (a.0, a.1, a.2.post_id.as_str()).cmp(&(b.0, b.1, b.2.post_id.as_str()))
    });

    let mut cohort: BTreeMap<String, CohortEntry> = BTreeMap::new();
    for (user_id, _, evidence) in matched {
        cohort
            .entry(user_id.to_string())
            .or_insert_with(|| CohortEntry {
                user_id: user_id.to_string(),
                evidence: Vec::new(),
                flags: BTreeSet::new(),
            })
            .evidence
            .push(evidence);
    }
    cohort
}

/// Flags users whose activity volume or username suggests automation.
/// Candidates are only flagged here; removal requires a confirming review
/// row.
pub fn flag_bot_candidates(
    stats: &BTreeMap<String, UserStats>,
    accounts: &[UserAccount],
) -> BTreeMap<String, BTreeSet<CohortFlag>> {
    let mut flags: BTreeMap<String, BTreeSet<CohortFlag>> = BTreeMap::new();
    for (user_id, s) in stats {
        if s.n_submissions > BOT_MAX_SUBMISSIONS || s.n_comments > BOT_MAX_COMMENTS {
            flags
                .entry(user_id.clone())
                .or_default()
                .insert(CohortFlag::HighVolume);
        }
    }
    for account in accounts {
        let name = account.username.to_lowercase();
        if name.contains("bot") || name.contains("auto") {
            flags
                .entry(account.user_id.clone())
                .or_default()
                .insert(CohortFlag::BotName);
        }
    }
    flags
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReviewAction {
    Remove,
    Keep,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewRow {
    pub user_id: String,
    pub action: ReviewAction,
    #[serde(default)]
    pub reason: String,
}

/// Reads a review CSV (`user_id,action,reason`). Any malformed row is fatal:
/// review decisions change the cohort and must not be silently dropped.
pub fn load_review<R: std::io::Read>(reader: R) -> Result<Vec<ReviewRow>, DetectorError> {
    let mut csv = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for (i, record) in csv.deserialize::<ReviewRow>().enumerate() {
        let row = record.map_err(|e| DetectorError::Review {
            row: i + 2,
            message: e.to_string(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ExclusionOutcome {
    pub cohort: BTreeMap<String, CohortEntry>,
    pub removed_psychotic: Vec<String>,
    pub removed_bots: Vec<String>,
    pub removed_manual: Vec<String>,
    /// Review rows that referenced users outside the cohort.
    pub warnings: Vec<String>,
}

/// Cohort cleanup. Psychotic-matcher users are removed unconditionally.
/// Review `remove` rows drop the user, classified as a bot removal when the
/// user carried a bot-candidate flag. Review `keep` rows retain flagged
/// users (the flags stay visible on the entry).
pub fn apply_exclusions(
    cohort: BTreeMap<String, CohortEntry>,
    psychotic_users: &BTreeSet<String>,
    bot_flags: &BTreeMap<String, BTreeSet<CohortFlag>>,
    review: &[ReviewRow],
) -> ExclusionOutcome {
    let mut out = ExclusionOutcome::default();
    let mut removals: BTreeMap<&str, &ReviewRow> = BTreeMap::new();
    for row in review {
        if !cohort.contains_key(&row.user_id) {
            out.warnings
                .push(format!("review row for `{}`: user not in cohort", row.user_id));
            continue;
        }
        removals.insert(row.user_id.as_str(), row);
    }

    for (user_id, mut entry) in cohort {
        if let Some(flags) = bot_flags.get(&user_id) {
            entry.flags.extend(flags.iter().copied());
        }
        if psychotic_users.contains(&user_id) {
            out.removed_psychotic.push(user_id);
            continue;
        }
        match removals.get(user_id.as_str()) {
            Some(row) if row.action == ReviewAction::Remove => {
                if entry.flags.is_empty() {
                    out.removed_manual.push(user_id);
                } else {
                    out.removed_bots.push(user_id);
                }
            }
            _ => {
                out.cohort.insert(user_id, entry);
            }
        }
    }
    out
}

/// Per-user diagnosis sets over the retained cohort. Every user carries the
/// cohort-defining bipolar label; additional labels come from running each
/// comorbidity matcher over the user's posts.
pub fn extract_comorbidities(
    posts: &[Post],
    cohort: &BTreeSet<String>,
    matchers: &BTreeMap<Diagnosis, CompiledMatcher>,
    threshold: usize,
) -> BTreeMap<String, BTreeSet<Diagnosis>> {
    let pairs: Vec<(String, Diagnosis)> = posts
        .par_iter()
        .filter(|p| cohort.contains(&p.user_id))
        .flat_map_iter(|post| {
            matchers.iter().filter_map(move |(diagnosis, matcher)| {
                (classify_post(post, matcher, threshold).decision == Decision::Matched)
                    .then(|| (post.user_id.clone(), *diagnosis))
            })
        })
        .collect();

    let mut out: BTreeMap<String, BTreeSet<Diagnosis>> = cohort
        .iter()
        .map(|u| (u.clone(), BTreeSet::from([Diagnosis::Bd])))
        .collect();
    for (user, diagnosis) in pairs {
        out.get_mut(&user).expect("cohort user").insert(diagnosis);
    }
    out
}

/// Users with at least one post that matches the depression matcher while
/// not simultaneously matching the bipolar matcher. Such posts are stronger
/// evidence that the depression report is not just a restatement of the
/// bipolar diagnosis.
pub fn conservative_mdd(
    posts: &[Post],
    cohort: &BTreeSet<String>,
    mdd_matcher: &CompiledMatcher,
    bd_matcher: &CompiledMatcher,
    threshold: usize,
) -> BTreeSet<String> {
    posts
        .par_iter()
        .filter(|p| cohort.contains(&p.user_id))
        .filter(|post| {
            classify_post(post, mdd_matcher, threshold).decision == Decision::Matched
                && classify_post(post, bd_matcher, threshold).decision != Decision::Matched
        })
        .map(|p| p.user_id.clone())
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// How the depression row of the rates table is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MddPolicy {
    Plain,
    Conservative,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComorbidityRates {
    pub cohort_size: usize,
    pub policy: MddPolicy,
    /// (diagnosis, percentage of cohort) in report order.
    pub rows: Vec<(Diagnosis, f64)>,
    /// Percentage of the cohort with at least one diagnosis beyond the
    /// cohort-defining one.
    pub any_additional_pct: f64,
}

pub fn comorbidity_rates(
    diagnoses: &BTreeMap<String, BTreeSet<Diagnosis>>,
    cohort_size: usize,
    policy: MddPolicy,
) -> Result<ComorbidityRates, DetectorError> {
    if cohort_size == 0 {
        return Err(DetectorError::EmptyCohort);
    }
    let has = |set: &BTreeSet<Diagnosis>, d: Diagnosis| match (policy, d) {
        (MddPolicy::Conservative, Diagnosis::Mdd) => set.contains(&Diagnosis::MddConservative),
        _ => set.contains(&d),
    };
    let pct = |count: usize| 100.0 * count as f64 / cohort_size as f64;

    let rows = REPORT_COMORBIDITIES
        .iter()
        .map(|&d| (d, pct(diagnoses.values().filter(|set| has(set, d)).count())))
        .collect();
    let additional = diagnoses
        .values()
        .filter(|set| {
            REPORT_COMORBIDITIES
                .iter()
                .copied()
                .chain([Diagnosis::Psychotic])
                .any(|d| has(set, d))
        })
        .count();

    Ok(ComorbidityRates {
        cohort_size,
        policy,
        rows,
        any_additional_pct: pct(additional),
    })
}
