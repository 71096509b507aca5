//! `evaluate`: score every extraction method against the gold
//! annotations and write `evaluation.tsv`, one row per variable and
//! method, with the gold file's sampling notes carried over as footnotes.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::path::Path;

use serde::Deserialize;

use redcohort::evaluation::{
    canonical_label, load_gold, resolve_gold, score_method, scoring_gold, EvaluationResult,
    GoldVariable,
};

use crate::commands::{pct_cell, read_jsonl, stage_output, CohortRecord, MethodRecord};
use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::store::{atomic_write, read_store, store_exists, STORE_DIR};

use redcohort::profiler::UserProfile;

#[derive(Deserialize)]
struct ResolutionRow {
    user_id: String,
    variable: String,
    label: String,
}

fn load_resolutions(
    path: &Path,
) -> Result<BTreeMap<(String, GoldVariable), String>, CliError> {
    let file = File::open(path).map_err(|e| CliError::data(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut out = BTreeMap::new();
    for (i, record) in reader.deserialize::<ResolutionRow>().enumerate() {
        let row = i + 2;
        let bad = |message: String| CliError::Data(format!("{}:{row}: {message}", path.display()));
        let record = record.map_err(|e| bad(e.to_string()))?;
        let variable = GoldVariable::from_label(&record.variable)
            .ok_or_else(|| bad(format!("unknown variable `{}`", record.variable)))?;
        let label =
            canonical_label(variable, &record.label, row).map_err(|e| bad(e.to_string()))?;
        if out.insert((record.user_id.clone(), variable), label).is_some() {
            return Err(bad(format!(
                "duplicate resolution for ({}, {})",
                record.user_id, record.variable
            )));
        }
    }
    Ok(out)
}

/// Builds a per-user prediction map from one field of the method records.
fn method_map(
    methods: &[MethodRecord],
    value: impl Fn(&MethodRecord) -> Option<String>,
) -> BTreeMap<String, String> {
    methods
        .iter()
        .filter_map(|m| value(m).map(|v| (m.user_id.clone(), v)))
        .collect()
}

pub fn run(config: &PipelineConfig) -> Result<(), CliError> {
    let gold_path = config.gold.as_ref().ok_or_else(|| {
        CliError::Config("evaluate requires a `gold` path in the config".into())
    })?;
    let store_dir = config.output.join(STORE_DIR);
    if !store_exists(&store_dir) {
        return Err(CliError::Config(format!(
            "no store under `{}`; run `redcohort ingest` first",
            store_dir.display()
        )));
    }
    let cohort: Vec<CohortRecord> =
        read_jsonl(&stage_output(&config.output, "cohort.jsonl", "detect")?)?;
    let methods: Vec<MethodRecord> =
        read_jsonl(&stage_output(&config.output, "methods.jsonl", "profile")?)?;
    let profiles: Vec<UserProfile> =
        read_jsonl(&stage_output(&config.output, "profiles.jsonl", "profile")?)?;

    let gold_file = File::open(gold_path).map_err(|e| CliError::data(gold_path, e))?;
    let gold = load_gold(gold_file).map_err(|e| CliError::data(gold_path, e))?;
    let resolutions = match &config.resolutions {
        Some(path) => load_resolutions(path)?,
        None => BTreeMap::new(),
    };
    let resolved = resolve_gold(&gold.annotations, &resolutions);

    let (posts, _, _) = read_store(&store_dir)?;
    let all_users: BTreeSet<&str> = posts.iter().map(|p| p.user_id.as_str()).collect();
    let cohort_ids: BTreeSet<&str> = cohort.iter().map(|r| r.user_id.as_str()).collect();

    let bd_predictions: BTreeMap<String, String> = all_users
        .iter()
        .map(|u| {
            let label = if cohort_ids.contains(u) { "yes" } else { "no" };
            (u.to_string(), label.to_string())
        })
        .collect();

    let date = |d: chrono::NaiveDate| d.format("%Y-%m-%d").to_string();
    let prediction_sets: Vec<(GoldVariable, &str, BTreeMap<String, String>)> = vec![
        (GoldVariable::BdDiagnosis, "pattern-matching", bd_predictions),
        (
            GoldVariable::Dob,
            "self-reported",
            method_map(&methods, |m| m.self_dob.map(date)),
        ),
        (
            GoldVariable::Dob,
            "language-use",
            method_map(&methods, |m| m.language_dob.map(date)),
        ),
        (
            GoldVariable::Dob,
            "hybrid",
            profiles
                .iter()
                .filter_map(|p| p.dob_estimate.map(|d| (p.user_id.clone(), date(d))))
                .collect(),
        ),
        (
            GoldVariable::Gender,
            "username",
            method_map(&methods, |m| {
                m.username_gender.map(|g| g.label().to_string())
            }),
        ),
        (
            GoldVariable::Gender,
            "self-reported",
            method_map(&methods, |m| m.self_gender.map(|g| g.label().to_string())),
        ),
        (
            GoldVariable::Gender,
            "language-use",
            method_map(&methods, |m| {
                m.language_gender.map(|g| g.label().to_string())
            }),
        ),
        (
            GoldVariable::Gender,
            "hybrid",
            profiles
                .iter()
                .filter_map(|p| p.gender.map(|g| (p.user_id.clone(), g.label().to_string())))
                .collect(),
        ),
        (
            GoldVariable::Country,
            "geolocation",
            method_map(&methods, |m| m.country.clone()),
        ),
        (
            GoldVariable::Country,
            "hybrid",
            profiles
                .iter()
                .filter_map(|p| p.country.clone().map(|c| (p.user_id.clone(), c)))
                .collect(),
        ),
    ];

    let mut results: Vec<EvaluationResult> = Vec::new();
    let mut skipped_attribute_rows = false;
    for (variable, method, predictions) in &prediction_sets {
        let population = match variable {
            GoldVariable::BdDiagnosis => all_users.len(),
            _ => cohort.len(),
        };
        if population == 0 {
            skipped_attribute_rows = true;
            continue;
        }
        let gold_labels = scoring_gold(&resolved, *variable);
        let result = score_method(predictions, &gold_labels, *variable, method, population)
            .map_err(|e| CliError::Data(e.to_string()))?;
        results.push(result);
    }
    if results.is_empty() {
        return Err(CliError::Empty(
            "evaluate: no rows; the corpus is empty".into(),
        ));
    }

    let mut out = String::from(
        "variable\tmethod\tn_gold\tn_predicted_on_gold\tn_correct\taccuracy_pct\tcoverage_test_pct\tcoverage_all_pct\n",
    );
    for r in &results {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.variable.label(),
            r.method,
            r.n_gold,
            r.n_predicted_on_gold,
            r.n_correct,
            pct_cell(r.accuracy_test),
            pct_cell(r.coverage_test),
            pct_cell(Some(r.coverage_all)),
        ));
    }
    for note in &gold.notes {
        out.push_str(&format!("# {note}\n"));
    }
    if !resolved.unresolved.is_empty() {
        out.push_str(&format!(
            "# {} gold disagreement(s) had no resolution and were excluded\n",
            resolved.unresolved.len()
        ));
    }
    if skipped_attribute_rows {
        out.push_str("# attribute rows skipped: the cohort is empty\n");
    }

    let path = config.output.join("evaluation.tsv");
    atomic_write(&path, out.as_bytes())?;
    println!("evaluate: {} rows -> {}", results.len(), path.display());
    Ok(())
}
