//! `report`: aggregate the cohort into the five distribution tables.
//! Percentages are taken over the users assigned a value for the given
//! attribute; every table carries its denominator as an explicit `all`
//! (or `cohort`) row. Configured baselines appear as an extra column.

use std::collections::BTreeMap;
use std::path::Path;

use redcohort::detector::{comorbidity_rates, Diagnosis, MddPolicy};
use redcohort::profiler::{UserProfile, REPORT_AGE_GROUPS};

use crate::commands::{read_jsonl, stage_output, write_tsv, CohortRecord};
use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::store::{read_manifest, store_exists, STORE_DIR};

type Baseline = Option<BTreeMap<String, f64>>;

fn load_baseline(path: Option<&Path>) -> Result<Baseline, CliError> {
    let Some(path) = path else { return Ok(None) };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::data(path, e))?;
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed = line
            .split_once('\t')
            .and_then(|(label, pct)| Some((label.trim(), pct.trim().parse::<f64>().ok()?)));
        let Some((label, pct)) = parsed else {
            return Err(CliError::Data(format!(
                "{}:{}: expected `label<TAB>percent`, got `{line}`",
                path.display(),
                i + 1
            )));
        };
        out.insert(label.to_string(), pct);
    }
    Ok(Some(out))
}

fn baseline_cell(baseline: &Baseline, label: &str) -> Vec<String> {
    match baseline {
        Some(map) => vec![map.get(label).map(|p| format!("{p:.2}")).unwrap_or_default()],
        None => Vec::new(),
    }
}

fn header<'a>(fixed: &[&'a str], baseline: &Baseline) -> Vec<&'a str> {
    let mut cols = fixed.to_vec();
    if baseline.is_some() {
        cols.push("baseline_pct");
    }
    cols
}

fn pct(n: usize, denominator: usize) -> String {
    format!("{:.2}", 100.0 * n as f64 / denominator as f64)
}

/// Whether `user`'s diagnosis set counts for `diagnosis` under the
/// configured depression policy.
fn counts_for(set: &std::collections::BTreeSet<Diagnosis>, d: Diagnosis, policy: MddPolicy) -> bool {
    match (policy, d) {
        (MddPolicy::Conservative, Diagnosis::Mdd) => set.contains(&Diagnosis::MddConservative),
        _ => set.contains(&d),
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
    let manifest = read_manifest(&store_dir)?;
    let cohort: Vec<CohortRecord> =
        read_jsonl(&stage_output(&config.output, "cohort.jsonl", "detect")?)?;
    let profiles: Vec<UserProfile> =
        read_jsonl(&stage_output(&config.output, "profiles.jsonl", "profile")?)?;
    let removals = std::fs::read_to_string(config.output.join("removals.tsv"))
        .map_err(|e| CliError::data(&config.output.join("removals.tsv"), e))?;
    let removed = |class: &str| {
        removals
            .lines()
            .skip(1)
            .filter(|l| l.split('\t').next() == Some(class))
            .count()
    };

    let b = &config.baselines;
    let baselines = (
        load_baseline(b.comorbidity.as_deref())?,
        load_baseline(b.age_groups.as_deref())?,
        load_baseline(b.gender.as_deref())?,
        load_baseline(b.countries.as_deref())?,
    );

    let out = &config.output;
    if cohort.is_empty() {
        write_tsv(
            &out.join("comorbidity.tsv"),
            &header(&["diagnosis", "n_users", "pct_cohort"], &baselines.0),
            &[],
        )?;
        write_tsv(
            &out.join("age_groups.tsv"),
            &header(
                &["age_group", "n_first_post", "pct_first_post", "n_mean", "pct_mean"],
                &baselines.1,
            ),
            &[],
        )?;
        write_tsv(
            &out.join("gender.tsv"),
            &header(&["gender", "n_users", "pct_assigned"], &baselines.2),
            &[],
        )?;
        write_tsv(
            &out.join("countries.tsv"),
            &header(&["country", "n_users", "pct_assigned"], &baselines.3),
            &[],
        )?;
        write_tsv(&out.join("summary.tsv"), &["key", "value"], &[])?;
        return Err(CliError::Empty(
            "cohort is empty; report tables written with zero rows".into(),
        ));
    }

    let policy = config.mdd_policy;
    let diagnoses: BTreeMap<String, _> = cohort
        .iter()
        .map(|r| (r.user_id.clone(), r.diagnoses.clone()))
        .collect();
    let rates = comorbidity_rates(&diagnoses, cohort.len(), policy)
        .map_err(|e| CliError::Data(e.to_string()))?;

    let mut rows = vec![{
        let mut row = vec!["cohort".to_string(), cohort.len().to_string(), "100.00".into()];
        row.extend(baseline_cell(&baselines.0, "cohort"));
        row
    }];
    for (diagnosis, pct_value) in &rates.rows {
        let n = diagnoses.values().filter(|set| counts_for(set, *diagnosis, policy)).count();
        let mut row = vec![
            diagnosis.label().to_string(),
            n.to_string(),
            format!("{pct_value:.2}"),
        ];
        row.extend(baseline_cell(&baselines.0, diagnosis.label()));
        rows.push(row);
    }
    write_tsv(
        &out.join("comorbidity.tsv"),
        &header(&["diagnosis", "n_users", "pct_cohort"], &baselines.0),
        &rows,
    )?;

    let firsts: Vec<_> = profiles.iter().filter_map(|p| p.age_group_first_post).collect();
    let means: Vec<_> = profiles.iter().filter_map(|p| p.age_group_mean).collect();
    let mut rows = Vec::new();
    for group in REPORT_AGE_GROUPS {
        let n_first = firsts.iter().filter(|g| **g == group).count();
        let n_mean = means.iter().filter(|g| **g == group).count();
        let mut row = vec![
            group.label().to_string(),
            n_first.to_string(),
            pct(n_first, firsts.len().max(1)),
            n_mean.to_string(),
            pct(n_mean, means.len().max(1)),
        ];
        row.extend(baseline_cell(&baselines.1, group.label()));
        rows.push(row);
    }
    let mut all_row = vec![
        "all".to_string(),
        firsts.len().to_string(),
        "100.00".into(),
        means.len().to_string(),
        "100.00".into(),
    ];
    all_row.extend(baseline_cell(&baselines.1, "all"));
    rows.push(all_row);
    write_tsv(
        &out.join("age_groups.tsv"),
        &header(
            &["age_group", "n_first_post", "pct_first_post", "n_mean", "pct_mean"],
            &baselines.1,
        ),
        &rows,
    )?;

    let genders: Vec<_> = profiles.iter().filter_map(|p| p.gender).collect();
    let mut rows = Vec::new();
    for gender in [redcohort::profiler::Gender::F, redcohort::profiler::Gender::M] {
        let n = genders.iter().filter(|g| **g == gender).count();
        let label = gender.label();
        let mut row = vec![label.to_string(), n.to_string(), pct(n, genders.len().max(1))];
        row.extend(baseline_cell(&baselines.2, label));
        rows.push(row);
    }
    let mut all_row = vec!["all".to_string(), genders.len().to_string(), "100.00".into()];
    all_row.extend(baseline_cell(&baselines.2, "all"));
    rows.push(all_row);
    write_tsv(
        &out.join("gender.tsv"),
        &header(&["gender", "n_users", "pct_assigned"], &baselines.2),
        &rows,
    )?;

    let mut country_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for profile in &profiles {
        if let Some(country) = &profile.country {
            *country_counts.entry(country.as_str()).or_default() += 1;
        }
    }
    let n_located: usize = country_counts.values().sum();
    let mut ranked: Vec<(&str, usize)> = country_counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let mut rows = Vec::new();
    let mut in_top = 0;
    for (country, n) in ranked.iter().take(config.top_countries) {
        in_top += n;
        let mut row = vec![country.to_string(), n.to_string(), pct(*n, n_located.max(1))];
        row.extend(baseline_cell(&baselines.3, country));
        rows.push(row);
    }
    let other = n_located - in_top;
    if other > 0 {
        let mut row = vec!["other".to_string(), other.to_string(), pct(other, n_located)];
        row.extend(baseline_cell(&baselines.3, "other"));
        rows.push(row);
    }
    let mut all_row = vec!["all".to_string(), n_located.to_string(), "100.00".into()];
    all_row.extend(baseline_cell(&baselines.3, "all"));
    rows.push(all_row);
    write_tsv(
        &out.join("countries.tsv"),
        &header(&["country", "n_users", "pct_assigned"], &baselines.3),
        &rows,
    )?;

    let first_ages: Vec<f64> = profiles.iter().filter_map(|p| p.first_post_age).collect();
    let mean_first_post_age = if first_ages.is_empty() {
        "n/a".to_string()
    } else {
        format!("{:.1}", first_ages.iter().sum::<f64>() / first_ages.len() as f64)
    };
    let policy_label = match policy {
        MddPolicy::Plain => "plain",
        MddPolicy::Conservative => "conservative",
    };
    let kv = |k: &str, v: String| vec![k.to_string(), v];
    let rows = vec![
        kv("n_posts", manifest.n_posts.to_string()),
        kv("n_users", manifest.n_users.to_string()),
        kv("n_accounts", manifest.n_accounts.to_string()),
        kv("cohort_size", cohort.len().to_string()),
        kv("removed_bot", removed("bot").to_string()),
        kv("removed_manual", removed("manual").to_string()),
        kv("removed_psychotic", removed("psychotic").to_string()),
        kv("pct_additional_diagnosis", format!("{:.2}", rates.any_additional_pct)),
        kv("mean_first_post_age", mean_first_post_age),
        kv("n_age_assigned", firsts.len().to_string()),
        kv("n_gender_assigned", genders.len().to_string()),
        kv("n_country_assigned", n_located.to_string()),
        kv("mdd_policy", policy_label.to_string()),
        kv("threshold_chars", config.threshold_chars.to_string()),
    ];
    write_tsv(&out.join("summary.tsv"), &["key", "value"], &rows)?;

    println!(
        "report: cohort {} -> 5 tables under {}",
        cohort.len(),
        out.display()
    );
    Ok(())
}
