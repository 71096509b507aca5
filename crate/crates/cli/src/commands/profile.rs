//! `profile`: fuse self-reports, backend predictions and the country grid
//! into one profile per cohort user. Alongside the fused `profiles.jsonl`
//! it writes `methods.jsonl` with each method's raw answer so `evaluate`
//! can score the methods individually.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};

use rayon::prelude::*;

use redcohort::corpus::{Post, PostKind, UserAccount};
use redcohort::profiler::geo::CountryGrid;
use redcohort::profiler::{
    backend_age_discarded, build_profile, choose_self_report, extract_self_report,
    ham_group_dob, parse_prediction, select_predictions, username_gender_decision,
    BackendPrediction, Gender, ProfileInputs, SelfReportCandidate, UserProfile,
};

use crate::commands::{read_jsonl, stage_output, write_jsonl, CohortRecord, MethodRecord};
use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::store::{read_store, store_exists, STORE_DIR};

fn load_predictions(
    config: &PipelineConfig,
) -> Result<BTreeMap<String, Vec<BackendPrediction>>, CliError> {
    let Some(path) = &config.predictions else {
        return Ok(BTreeMap::new());
    };
    let file = File::open(path).map_err(|e| CliError::data(path, e))?;
    let mut grouped: BTreeMap<String, Vec<BackendPrediction>> = BTreeMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::data(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let prediction = parse_prediction(&line)
            .map_err(|e| CliError::Data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        grouped.entry(prediction.user_id.clone()).or_default().push(prediction);
    }
    Ok(grouped)
}

fn load_grid(config: &PipelineConfig) -> Result<Option<CountryGrid>, CliError> {
    let Some(path) = &config.country_grid else {
        return Ok(None);
    };
    let file = File::open(path).map_err(|e| CliError::data(path, e))?;
    CountryGrid::load(file).map(Some).map_err(|e| CliError::data(path, e))
}

/// Raw per-method answers for one user, mirroring the selection and
/// discard steps the fused profile applies.
fn method_record(inputs: &ProfileInputs, grid: Option<&CountryGrid>) -> MethodRecord {
    let candidates: Vec<(SelfReportCandidate, i64)> = inputs
        .titles
        .iter()
        .flat_map(|(post_id, title, ts)| {
            extract_self_report(title, post_id).into_iter().map(move |c| (c, *ts))
        })
        .collect();
    let choice = choose_self_report(&candidates);
    let selected = select_predictions(&inputs.predictions);
    let last_post = inputs.post_times.iter().max().copied().unwrap_or(0);

    let mut backend_group = selected.age_group;
    if let (Some(group), Some(created)) = (backend_group, inputs.account_created_utc) {
        if backend_age_discarded(group, last_post, created) {
            backend_group = None;
        }
    }

    MethodRecord {
        user_id: inputs.user_id.to_string(),
        self_dob: choice.dob,
        self_gender: choice.gender,
        language_dob: backend_group.map(|g| ham_group_dob(g, last_post)),
        username_gender: selected.username_gender_score.and_then(username_gender_decision),
        language_gender: selected
            .language_gender_score
            .map(|s| if s >= 0.5 { Gender::F } else { Gender::M }),
        country: selected
            .coordinates
            .and_then(|(lat, lon)| grid.and_then(|g| g.lookup(lat, lon)))
            .map(str::to_string),
    }
}

pub fn run(config: &PipelineConfig) -> Result<(), CliError> {
    let store_dir = config.output.join(STORE_DIR);
    if !store_exists(&store_dir) {
        return Err(CliError::Config(format!(
            "no store under `{}`; run `redcohort ingest` first",
            store_dir.display()
        )));
    }
    let cohort_path = stage_output(&config.output, "cohort.jsonl", "detect")?;
    let cohort: Vec<CohortRecord> = read_jsonl(&cohort_path)?;
    let predictions = load_predictions(config)?;
    let grid = load_grid(config)?;
    let (posts, accounts, _) = read_store(&store_dir)?;

    let created: BTreeMap<&str, i64> = accounts
        .iter()
        .map(|a: &UserAccount| (a.user_id.as_str(), a.created_utc))
        .collect();
    let mut posts_by_user: BTreeMap<&str, Vec<&Post>> = cohort
        .iter()
        .map(|r| (r.user_id.as_str(), Vec::new()))
        .collect();
    for post in &posts {
        if let Some(list) = posts_by_user.get_mut(post.user_id.as_str()) {
            list.push(post);
        }
    }

    let no_predictions = Vec::new();
    let rows: Vec<(UserProfile, MethodRecord)> = cohort
        .par_iter()
        .map(|record| {
            let user_posts = &posts_by_user[record.user_id.as_str()];
            let titles: Vec<(&str, &str, i64)> = user_posts
                .iter()
                .filter(|p| p.kind == PostKind::Submission)
                .filter_map(|p| {
                    p.title.as_deref().map(|t| (p.post_id.as_str(), t, p.created_utc))
                })
                .collect();
            let inputs = ProfileInputs {
                user_id: &record.user_id,
                titles,
                post_times: user_posts.iter().map(|p| p.created_utc).collect(),
                account_created_utc: created.get(record.user_id.as_str()).copied(),
                predictions: predictions
                    .get(&record.user_id)
                    .unwrap_or(&no_predictions)
                    .iter()
                    .collect(),
            };
            (build_profile(&inputs, grid.as_ref()), method_record(&inputs, grid.as_ref()))
        })
        .collect();

    let (profiles, methods): (Vec<UserProfile>, Vec<MethodRecord>) = rows.into_iter().unzip();
    write_jsonl(&config.output.join("profiles.jsonl"), &profiles)?;
    write_jsonl(&config.output.join("methods.jsonl"), &methods)?;

    let with = |f: &dyn Fn(&UserProfile) -> bool| profiles.iter().filter(|p| f(p)).count();
    println!(
        "profile: {} profiles ({} with age, {} with gender, {} with country)",
        profiles.len(),
        with(&|p| p.dob_estimate.is_some()),
        with(&|p| p.gender.is_some()),
        with(&|p| p.country.is_some())
    );
    Ok(())
}
