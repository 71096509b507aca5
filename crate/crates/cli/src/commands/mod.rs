//! One module per subcommand plus the record types the stages exchange
//! through the output directory.

pub mod detect;
pub mod evaluate;
pub mod export;
pub mod ingest;
pub mod profile;
pub mod report;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use redcohort::detector::{CohortFlag, Diagnosis, DiagnosisEvidence};
use redcohort::profiler::Gender;

use crate::error::CliError;
use crate::store::atomic_write;

/// One cohort member as written to `cohort.jsonl` by `detect`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortRecord {
    pub user_id: String,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub flags: BTreeSet<CohortFlag>,
    /// Includes `bd` itself plus every extracted comorbidity; users that
    /// qualify under the stricter depression rule additionally carry
    /// `mdd_conservative`.
    pub diagnoses: BTreeSet<Diagnosis>,
    pub matched_posts: Vec<String>,
}

/// One matched-post evidence row in `evidence.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRecord {
    pub user_id: String,
    #[serde(flatten)]
    pub evidence: DiagnosisEvidence,
}

/// Raw single-method values for one user, written to `methods.jsonl` so
/// `evaluate` can score each extraction method on its own before fusion.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub user_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub self_dob: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub self_gender: Option<Gender>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language_dob: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub username_gender: Option<Gender>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language_gender: Option<Gender>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country: Option<String>,
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut out = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut out, row).map_err(|e| CliError::data(path, e))?;
        out.push(b'\n');
    }
    atomic_write(path, &out)
}

pub(crate) fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::data(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line)
                .map_err(|e| CliError::Data(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Renders rows as a TSV with a header line and writes them atomically.
pub(crate) fn write_tsv(
    path: &Path,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), CliError> {
    let mut out = String::new();
    out.push_str(&header.join("\t"));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Points at an artifact a previous stage should have written, with the
/// stage to run when it is missing.
pub(crate) fn stage_output(dir: &Path, name: &str, produced_by: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(CliError::Config(format!(
            "missing `{}`; run `redcohort {produced_by}` first",
            path.display()
        )));
    }
    Ok(path)
}

/// `{:.1}` percent string, or `n/a` for absent ratios.
pub(crate) fn pct_cell(ratio: Option<f64>) -> String {
    match ratio {
        Some(r) => format!("{:.1}", 100.0 * r),
        None => "n/a".to_string(),
    }
}
