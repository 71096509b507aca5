//! Gold-annotation handling and extractor scoring: double-annotation
//! agreement, disagreement resolution, and accuracy/coverage metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("gold row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("reading gold data: {0}")]
    Csv(#[from] csv::Error),
    #[error("population size must be positive")]
    EmptyPopulation,
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
}

/// The manually annotated variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoldVariable {
    BdDiagnosis,
    Dob,
    Country,
    Gender,
}

pub const GOLD_VARIABLES: [GoldVariable; 4] = [
    GoldVariable::BdDiagnosis,
    GoldVariable::Dob,
    GoldVariable::Country,
    GoldVariable::Gender,
];

impl GoldVariable {
    pub fn label(&self) -> &'static str {
        match self {
            GoldVariable::BdDiagnosis => "bd_diagnosis",
            GoldVariable::Dob => "dob",
            GoldVariable::Country => "country",
            GoldVariable::Gender => "gender",
        }
    }

    pub fn from_label(label: &str) -> Option<GoldVariable> {
        GOLD_VARIABLES.into_iter().find(|v| v.label() == label)
    }
}

impl std::fmt::Display for GoldVariable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldAnnotation {
    pub user_id: String,
    pub variable: GoldVariable,
    /// Canonical form: lowercase for gender/bd_diagnosis, uppercase ISO
    /// 3166-1 alpha-2 for country, `YYYY-MM-DD` for dob, `?` for undecidable.
    pub label: String,
    pub annotator_id: String,
}

#[derive(Debug, Clone, Default)]
pub struct GoldSet {
    pub annotations: Vec<GoldAnnotation>,
    /// `#` comment lines found in the file, typically sampling notes.
    pub notes: Vec<String>,
}

/// Undecidable marker accepted for every variable.
pub const UNDECIDABLE: &str = "?";

/// Validates and canonicalizes one label for `variable`: case folding for
/// bd/gender labels, uppercasing for country codes, format checking for
/// dates. `row` seeds the error context.
pub fn canonical_label(
    variable: GoldVariable,
    raw: &str,
    row: usize,
) -> Result<String, EvaluationError> {
    let trimmed = raw.trim();
    if trimmed == UNDECIDABLE {
        return Ok(UNDECIDABLE.to_string());
    }
    let bad = |message: String| EvaluationError::Row { row, message };
    match variable {
        GoldVariable::BdDiagnosis => {
            let lower = trimmed.to_lowercase();
            if lower == "yes" || lower == "no" {
                Ok(lower)
            } else {
                Err(bad(format!("bd_diagnosis label `{trimmed}` not yes/no/?")))
            }
        }
        GoldVariable::Gender => {
            let lower = trimmed.to_lowercase();
            if ["f", "m", "trans"].contains(&lower.as_str()) {
                Ok(lower)
            } else {
                Err(bad(format!("gender label `{trimmed}` not f/m/trans/?")))
            }
        }
        GoldVariable::Country => {
            let upper = trimmed.to_uppercase();
            if upper.len() == 2 && upper.bytes().all(|b| b.is_ascii_uppercase()) {
                Ok(upper)
            } else {
                Err(bad(format!("country label `{trimmed}` not a two-letter code")))
            }
        }
        GoldVariable::Dob => {
            NaiveDate::parse_from_str(trimmed, "%Y-%m-%d")
                .map(|_| trimmed.to_string())
                .map_err(|_| bad(format!("dob label `{trimmed}` not YYYY-MM-DD")))
        }
    }
}

/// Loads a gold CSV with columns user_id, variable, label, annotator_id.
/// Comment lines (leading `#`) are collected as notes. Labels are
/// canonicalized and validated; a repeated (user, variable, annotator)
/// triple is fatal.
pub fn load_gold<R: Read>(reader: R) -> Result<GoldSet, EvaluationError> {
    let mut raw = String::new();
    let mut reader = reader;
    reader
        .read_to_string(&mut raw)
        .map_err(|e| EvaluationError::Row {
            row: 0,
            message: e.to_string(),
        })?;

    let mut notes = Vec::new();
    let mut data = String::new();
    for line in raw.lines() {
        if line.trim_start().starts_with('#') {
            notes.push(line.trim_start().trim_start_matches('#').trim().to_string());
        } else {
            data.push_str(line);
            data.push('\n');
        }
    }

    let mut csv_reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(data.as_bytes());
    let mut annotations = Vec::new();
    let mut seen: BTreeSet<(String, GoldVariable, String)> = BTreeSet::new();
    for (i, record) in csv_reader.records().enumerate() {
        let row = i + 2;
        let record = record?;
        if record.len() != 4 {
            return Err(EvaluationError::Row {
                row,
                message: format!("expected 4 columns, found {}", record.len()),
            });
        }
        let variable = GoldVariable::from_label(&record[1]).ok_or_else(|| EvaluationError::Row {
            row,
            message: format!("unknown variable `{}`", &record[1]),
        })?;
        let label = canonical_label(variable, &record[2], row)?;
        let annotation = GoldAnnotation {
            user_id: record[0].to_string(),
            variable,
            label,
            annotator_id: record[3].to_string(),
        };
        if annotation.user_id.is_empty() || annotation.annotator_id.is_empty() {
            return Err(EvaluationError::Row {
                row,
                message: "empty user_id or annotator_id".into(),
            });
        }
        let key = (
            annotation.user_id.clone(),
            annotation.variable,
            annotation.annotator_id.clone(),
        );
        if !seen.insert(key) {
            return Err(EvaluationError::Row {
                row,
                message: format!(
                    "duplicate annotation for user `{}` variable `{}` by `{}`",
                    annotation.user_id, annotation.variable, annotation.annotator_id
                ),
            });
        }
        annotations.push(annotation);
    }
    Ok(GoldSet { annotations, notes })
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AgreementStats {
    pub n_pairs: usize,
    pub n_agree: usize,
    /// Users skipped because they had one or more than two annotations.
    pub excluded: Vec<String>,
}

impl AgreementStats {
    /// Percent agreement, or `None` when no pairs exist.
    pub fn pct(&self) -> Option<f64> {
        (self.n_pairs > 0).then(|| self.n_agree as f64 / self.n_pairs as f64 * 100.0)
    }
}

fn annotations_by_user(
    annotations: &[GoldAnnotation],
    variable: GoldVariable,
) -> BTreeMap<&str, Vec<&GoldAnnotation>> {
    let mut by_user: BTreeMap<&str, Vec<&GoldAnnotation>> = BTreeMap::new();
    for a in annotations.iter().filter(|a| a.variable == variable) {
        by_user.entry(&a.user_id).or_default().push(a);
    }
    by_user
}

/// Raw inter-annotator agreement for one variable over users with exactly
/// two annotations. Agreement means identical canonical labels, `?` on
/// both sides included.
pub fn raw_agreement(annotations: &[GoldAnnotation], variable: GoldVariable) -> AgreementStats {
    let mut stats = AgreementStats::default();
    for (user, anns) in annotations_by_user(annotations, variable) {
        if anns.len() != 2 {
            stats.excluded.push(user.to_string());
            continue;
        }
        stats.n_pairs += 1;
        if anns[0].label == anns[1].label {
            stats.n_agree += 1;
        }
    }
    stats
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResolvedGold {
    /// Final label per (user, variable).
    pub labels: BTreeMap<(String, GoldVariable), String>,
    /// Disagreements with no resolution row; excluded from scoring.
    pub unresolved: Vec<(String, GoldVariable)>,
}

/// Collapses annotations to one label per (user, variable). Agreeing pairs
/// take the shared label; disagreeing pairs take the resolution label when
/// one exists and are otherwise dropped as unresolved; single annotations
/// stand as final.
pub fn resolve_gold(
    annotations: &[GoldAnnotation],
    resolutions: &BTreeMap<(String, GoldVariable), String>,
) -> ResolvedGold {
    let mut resolved = ResolvedGold::default();
    for variable in GOLD_VARIABLES {
        for (user, anns) in annotations_by_user(annotations, variable) {
            let key = (user.to_string(), variable);
            let label = match anns.as_slice() {
                [a] => Some(a.label.clone()),
                [a, b] if a.label == b.label => Some(a.label.clone()),
                _ => resolutions.get(&key).cloned(),
            };
            match label {
                Some(label) => {
                    resolved.labels.insert(key, label);
                }
                None => resolved.unresolved.push(key),
            }
        }
    }
    resolved
}

/// Final labels usable as scoring targets: `?` rows are dropped for every
/// variable, and `trans` rows for gender, since the extractors only emit
/// binary labels.
pub fn scoring_gold(
    resolved: &ResolvedGold,
    variable: GoldVariable,
) -> BTreeMap<String, String> {
    resolved
        .labels
        .iter()
        .filter(|((_, v), _)| *v == variable)
        .filter(|(_, label)| label.as_str() != UNDECIDABLE)
        .filter(|(_, label)| !(variable == GoldVariable::Gender && label.as_str() == "trans"))
        .map(|((user, _), label)| (user.clone(), label.clone()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationResult {
    pub variable: GoldVariable,
    pub method: String,
    pub n_gold: usize,
    pub n_predicted_on_gold: usize,
    pub n_correct: usize,
    pub n_predicted_total: usize,
    /// Fraction correct over gold users with a prediction; `None` when no
    /// gold user has one.
    pub accuracy_test: Option<f64>,
    /// Fraction of gold users with a prediction.
    pub coverage_test: Option<f64>,
    /// Fraction of the population with a prediction.
    pub coverage_all: f64,
}

/// Two dob labels agree when at most 366 days apart.
fn dob_matches(predicted: &str, gold: &str) -> bool {
    let parse = |s| NaiveDate::parse_from_str(s, "%Y-%m-%d").ok();
    match (parse(predicted), parse(gold)) {
        (Some(p), Some(g)) => (p - g).num_days().abs() <= 366,
        _ => false,
    }
}

/// Scores one extraction method for one variable. Accuracy is measured
/// over gold users the method predicted, coverage_test over all gold
/// users, coverage_all over the whole population.
pub fn score_method(
    predictions: &BTreeMap<String, String>,
    gold: &BTreeMap<String, String>,
    variable: GoldVariable,
    method: &str,
    population_size: usize,
) -> Result<EvaluationResult, EvaluationError> {
    if population_size == 0 {
        return Err(EvaluationError::EmptyPopulation);
    }
    let mut n_predicted_on_gold = 0;
    let mut n_correct = 0;
    for (user, gold_label) in gold {
        let Some(predicted) = predictions.get(user) else {
            continue;
        };
        n_predicted_on_gold += 1;
        let correct = match variable {
            GoldVariable::Dob => dob_matches(predicted, gold_label),
            _ => predicted == gold_label,
        };
        if correct {
            n_correct += 1;
        }
    }
    Ok(EvaluationResult {
        variable,
        method: method.to_string(),
        n_gold: gold.len(),
        n_predicted_on_gold,
        n_correct,
        n_predicted_total: predictions.len(),
        accuracy_test: (n_predicted_on_gold > 0)
            .then(|| n_correct as f64 / n_predicted_on_gold as f64),
        coverage_test: (!gold.is_empty())
            .then(|| n_predicted_on_gold as f64 / gold.len() as f64),
        coverage_all: predictions.len() as f64 / population_size as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub variable: GoldVariable,
    pub joint: AgreementStatsRow,
    pub pairwise: Vec<AgreementStatsRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementStatsRow {
    /// Either "all" or "annotatorA|annotatorB".
    pub annotators: String,
    pub n_pairs: usize,
    pub n_agree: usize,
    pub pct: Option<f64>,
}

/// Joint raw agreement plus a per-annotator-pair breakdown.
pub fn agreement_rate(annotations: &[GoldAnnotation], variable: GoldVariable) -> AgreementReport {
    let joint = raw_agreement(annotations, variable);
    let mut by_pair: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (_, anns) in annotations_by_user(annotations, variable) {
        if let [a, b] = anns.as_slice() {
            let mut ids = [a.annotator_id.as_str(), b.annotator_id.as_str()];
            ids.sort_unstable();
            let entry = by_pair.entry(ids.join("|")).or_default();
            entry.0 += 1;
            if a.label == b.label {
                entry.1 += 1;
            }
        }
    }
    AgreementReport {
        variable,
        joint: AgreementStatsRow {
            annotators: "all".into(),
            n_pairs: joint.n_pairs,
            n_agree: joint.n_agree,
            pct: joint.pct(),
        },
        pairwise: by_pair
            .into_iter()
            .map(|(annotators, (n_pairs, n_agree))| AgreementStatsRow {
                annotators,
                n_pairs,
                n_agree,
                pct: (n_pairs > 0).then(|| n_agree as f64 / n_pairs as f64 * 100.0),
            })
            .collect(),
    }
}
