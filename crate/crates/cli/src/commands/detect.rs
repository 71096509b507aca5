//! `detect`: run the matcher over the ingested store, apply bot and
//! review exclusions, extract comorbidities and write the cohort files.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::str::FromStr;

use redcohort::corpus::build_user_stats;
use redcohort::detector::{
    apply_exclusions, conservative_mdd, detect_cohort, extract_comorbidities,
    flag_bot_candidates, load_review, Diagnosis, ReviewRow,
};
use redcohort::pattern::{compile_matcher, CompiledMatcher, PatternSet};

use crate::commands::{write_jsonl, write_tsv, CohortRecord, EvidenceRecord};
use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::store::{read_store, store_exists, STORE_DIR};

fn compile(label: &str, patterns: &PatternSet) -> Result<CompiledMatcher, CliError> {
    compile_matcher(label, patterns).map_err(|e| CliError::Data(format!("patterns: {e}")))
}

/// Compiles one matcher per condition list other than `bd`, which is
/// mandatory and handled separately because it defines the cohort.
fn compile_comorbidities(
    patterns: &PatternSet,
) -> Result<BTreeMap<Diagnosis, CompiledMatcher>, CliError> {
    let mut matchers = BTreeMap::new();
    for label in patterns.condition_terms.keys() {
        let diagnosis = Diagnosis::from_str(label).map_err(CliError::Data)?;
        if diagnosis != Diagnosis::Bd {
            matchers.insert(diagnosis, compile(label, patterns)?);
        }
    }
    Ok(matchers)
}

fn load_review_file(config: &PipelineConfig) -> Result<Vec<ReviewRow>, CliError> {
    let Some(path) = &config.review else {
        return Ok(Vec::new());
    };
    let file = File::open(path).map_err(|e| CliError::data(path, e))?;
    load_review(file).map_err(|e| CliError::data(path, e))
}

pub fn run(config: &PipelineConfig) -> Result<(), CliError> {
    let store_dir = config.output.join(STORE_DIR);
    if !store_exists(&store_dir) {
        return Err(CliError::Config(format!(
            "no store under `{}`; run `redcohort ingest` first",
            store_dir.display()
        )));
    }
    let patterns =
        PatternSet::load_dir(&config.patterns).map_err(|e| CliError::Data(e.to_string()))?;
    if !patterns.condition_terms.contains_key("bd") {
        return Err(CliError::Data(
            "patterns: no `bd` condition list; the cohort diagnosis is required".into(),
        ));
    }
    let bd = compile("bd", &patterns)?;
    let comorbidity_matchers = compile_comorbidities(&patterns)?;
    let review = load_review_file(config)?;
    let (posts, accounts, _) = read_store(&store_dir)?;

    let threshold = config.threshold_chars;
    let candidates = detect_cohort(&posts, &bd, threshold);

    let stats = build_user_stats(&posts);
    let flags = flag_bot_candidates(&stats, &accounts);

    let candidate_ids: BTreeSet<String> = candidates.keys().cloned().collect();
    let psychotic_users: BTreeSet<String> =
        if comorbidity_matchers.contains_key(&Diagnosis::Psychotic) {
            let only = BTreeMap::from([(Diagnosis::Psychotic, compile("psychotic", &patterns)?)]);
            extract_comorbidities(&posts, &candidate_ids, &only, threshold)
                .into_iter()
                .filter(|(_, set)| set.contains(&Diagnosis::Psychotic))
                .map(|(user, _)| user)
                .collect()
        } else {
            BTreeSet::new()
        };

    let outcome = apply_exclusions(candidates, &psychotic_users, &flags, &review);
    for warning in &outcome.warnings {
        eprintln!("warning: {warning}");
    }

    let cohort_ids: BTreeSet<String> = outcome.cohort.keys().cloned().collect();
    let mut diagnoses = extract_comorbidities(&posts, &cohort_ids, &comorbidity_matchers, threshold);
    if let Some(mdd) = comorbidity_matchers.get(&Diagnosis::Mdd) {
        let strict = conservative_mdd(&posts, &cohort_ids, mdd, &bd, threshold);
        for user in strict {
            diagnoses.entry(user).or_default().insert(Diagnosis::MddConservative);
        }
    }

    let mut cohort_rows = Vec::new();
    let mut evidence_rows = Vec::new();
    for (user_id, entry) in &outcome.cohort {
        cohort_rows.push(CohortRecord {
            user_id: user_id.clone(),
            flags: entry.flags.clone(),
            diagnoses: diagnoses.get(user_id).cloned().unwrap_or_default(),
            matched_posts: entry.evidence.iter().map(|e| e.post_id.clone()).collect(),
        });
        for evidence in &entry.evidence {
            evidence_rows.push(EvidenceRecord {
                user_id: user_id.clone(),
                evidence: evidence.clone(),
            });
        }
    }

    let mut removal_rows: Vec<Vec<String>> = Vec::new();
    let review_reason = |user: &str| {
        review
            .iter()
            .find(|r| r.user_id == user)
            .map(|r| r.reason.clone())
            .unwrap_or_default()
    };
    for user in &outcome.removed_bots {
        removal_rows.push(vec!["bot".into(), user.clone(), review_reason(user)]);
    }
    for user in &outcome.removed_manual {
        removal_rows.push(vec!["manual".into(), user.clone(), review_reason(user)]);
    }
    for user in &outcome.removed_psychotic {
        removal_rows.push(vec![
            "psychotic".into(),
            user.clone(),
            "matched a psychotic-disorder self-report".into(),
        ]);
    }
    removal_rows.sort();

    write_jsonl(&config.output.join("cohort.jsonl"), &cohort_rows)?;
    write_jsonl(&config.output.join("evidence.jsonl"), &evidence_rows)?;
    write_tsv(
        &config.output.join("removals.tsv"),
        &["class", "user_id", "reason"],
        &removal_rows,
    )?;

    println!(
        "detect: {} users in cohort ({} removed: {} bot, {} manual, {} psychotic)",
        cohort_rows.len(),
        removal_rows.len(),
        outcome.removed_bots.len(),
        outcome.removed_manual.len(),
        outcome.removed_psychotic.len()
    );
    Ok(())
}
