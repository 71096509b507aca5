//! End-to-end runs of the `redcohort` binary over a generated corpus with
//! known ground truth.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use redcohort::detector::Diagnosis;
use redcohort::profiler::UserProfile;
use redcohort::testkit::{generate_synth_corpus, synth_grid_csv, synth_pattern_files, SynthCorpus};
use redcohort_cli::commands::CohortRecord;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_redcohort")
}

const CONFIG: &str = "\
posts = posts.jsonl
accounts = accounts.jsonl
patterns = patterns
predictions = predictions.jsonl
country_grid = grid.csv
gold = gold.csv
resolutions = resolutions.csv
review = review.csv
output = out
export_secret = integration-secret
";

fn write_workspace(root: &Path, corpus: &SynthCorpus) {
    fs::write(root.join("posts.jsonl"), &corpus.posts_jsonl).unwrap();
    fs::write(root.join("accounts.jsonl"), &corpus.accounts_jsonl).unwrap();
    fs::write(root.join("predictions.jsonl"), &corpus.predictions_jsonl).unwrap();
    fs::write(root.join("review.csv"), &corpus.review_csv).unwrap();
    fs::write(root.join("gold.csv"), &corpus.gold_csv).unwrap();
    fs::write(root.join("resolutions.csv"), &corpus.resolutions_csv).unwrap();
    fs::write(root.join("grid.csv"), synth_grid_csv()).unwrap();
    for (name, text) in synth_pattern_files() {
        let path = root.join("patterns").join(name);
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, text).unwrap();
    }
    fs::write(root.join("pipeline.conf"), CONFIG).unwrap();
}

fn setup(n_users: usize, seed: u64) -> (tempfile::TempDir, SynthCorpus) {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corpus = generate_synth_corpus(n_users, &mut rng);
    write_workspace(dir.path(), &corpus);
    (dir, corpus)
}

fn run(root: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(root)
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(root: &Path, args: &[&str]) {
    let out = run(root, args);
    assert!(
        out.status.success(),
        "{args:?} -> {:?}\nstdout: {}stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn run_all(root: &Path, extra: &[&str]) {
    for cmd in ["ingest", "detect", "profile", "evaluate", "report"] {
        let mut args = vec![cmd];
        args.extend_from_slice(extra);
        run_ok(root, &args);
    }
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Vec<T> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// (header, data rows, comment lines) of a TSV file.
fn read_tsv(path: &Path) -> (Vec<String>, Vec<Vec<String>>, Vec<String>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap().split('\t').map(str::to_string).collect();
    let mut rows = Vec::new();
    let mut comments = Vec::new();
    for line in lines {
        if let Some(comment) = line.strip_prefix('#') {
            comments.push(comment.trim().to_string());
        } else {
            rows.push(line.split('\t').map(str::to_string).collect());
        }
    }
    (header, rows, comments)
}

#[test]
fn pipeline_recovers_planted_truth() {
    let (dir, corpus) = setup(120, 11);
    let root = dir.path();
    run_all(root, &[]);
    let out = root.join("out");

    let cohort: Vec<CohortRecord> = read_jsonl(&out.join("cohort.jsonl"));
    let detected: BTreeSet<String> = cohort.iter().map(|r| r.user_id.clone()).collect();
    assert_eq!(detected, corpus.expected_cohort());

    for record in &cohort {
        let planted = &corpus.users[&record.user_id];
        let mut expected: BTreeSet<Diagnosis> = planted.comorbidities.clone();
        expected.insert(Diagnosis::Bd);
        if planted.conservative_mdd {
            expected.insert(Diagnosis::MddConservative);
        }
        assert_eq!(record.diagnoses, expected, "diagnoses for {}", record.user_id);
    }

    let removals = fs::read_to_string(out.join("removals.tsv")).unwrap();
    for line in [
        "bot\tsp_botname\tconfirmed bot",
        "bot\tsp_volume\tconfirmed bot",
        "manual\tsp_manual\timpersonation account",
        "psychotic\tsp_psy\tmatched a psychotic-disorder self-report",
    ] {
        assert!(removals.contains(line), "missing removal `{line}`:\n{removals}");
    }
    assert_eq!(removals.lines().count(), 5, "{removals}");

    let profiles: Vec<UserProfile> = read_jsonl(&out.join("profiles.jsonl"));
    assert_eq!(profiles.len(), cohort.len());
    for profile in &profiles {
        let planted = &corpus.users[&profile.user_id];
        assert_eq!(profile.dob_estimate, planted.dob, "dob for {}", profile.user_id);
        assert_eq!(
            profile.age_group_mean, planted.age_group_mean,
            "age group for {}",
            profile.user_id
        );
        assert_eq!(profile.gender, planted.gender, "gender for {}", profile.user_id);
        assert_eq!(profile.country, planted.country, "country for {}", profile.user_id);
    }
}

#[test]
fn evaluation_scores_hybrid_methods_perfectly() {
    let (dir, _corpus) = setup(120, 12);
    let root = dir.path();
    run_all(root, &[]);

    let (header, rows, comments) = read_tsv(&root.join("out/evaluation.tsv"));
    assert_eq!(header[..3], ["variable", "method", "n_gold"]);
    assert_eq!(rows.len(), 10, "{rows:?}");
    assert!(
        comments.iter().any(|c| c.starts_with("sampling:")),
        "sampling footnote missing: {comments:?}"
    );

    let find = |variable: &str, method: &str| {
        rows.iter()
            .find(|r| r[0] == variable && r[1] == method)
            .unwrap_or_else(|| panic!("no row for {variable}/{method}"))
            .clone()
    };
    // gold labels are the planted fused values, so the hybrid methods and
    // the cohort decision must score perfectly
    for (variable, method) in [
        ("bd_diagnosis", "pattern-matching"),
        ("dob", "hybrid"),
        ("gender", "hybrid"),
        ("country", "hybrid"),
        ("country", "geolocation"),
    ] {
        let row = find(variable, method);
        let n_gold: usize = row[2].parse().unwrap();
        assert!(n_gold > 0, "{variable}/{method}: empty gold");
        assert_eq!(row[5], "100.0", "{variable}/{method} accuracy: {row:?}");
    }
    let bd = find("bd_diagnosis", "pattern-matching");
    assert_eq!(bd[6], "100.0", "bd coverage_test: {bd:?}");
    for (variable, method) in [
        ("dob", "self-reported"),
        ("dob", "language-use"),
        ("gender", "username"),
        ("gender", "self-reported"),
        ("gender", "language-use"),
    ] {
        find(variable, method);
    }
}

#[test]
fn report_distributions_sum_to_one_hundred() {
    let (dir, corpus) = setup(150, 13);
    let root = dir.path();
    run_all(root, &[]);
    let out = root.join("out");

    let pct_sum = |rows: &[Vec<String>], label_col: usize, pct_col: usize| -> f64 {
        rows.iter()
            .filter(|r| r[label_col] != "all" && r[label_col] != "cohort")
            .map(|r| r[pct_col].parse::<f64>().unwrap())
            .sum()
    };

    let (_, rows, _) = read_tsv(&out.join("age_groups.tsv"));
    assert!((pct_sum(&rows, 0, 2) - 100.0).abs() < 0.1, "first-post ages: {rows:?}");
    assert!((pct_sum(&rows, 0, 4) - 100.0).abs() < 0.1, "mean ages: {rows:?}");

    let (_, rows, _) = read_tsv(&out.join("gender.tsv"));
    assert!((pct_sum(&rows, 0, 2) - 100.0).abs() < 0.1, "gender: {rows:?}");

    let (_, rows, _) = read_tsv(&out.join("countries.tsv"));
    assert!((pct_sum(&rows, 0, 2) - 100.0).abs() < 0.1, "countries: {rows:?}");

    let (_, rows, _) = read_tsv(&out.join("comorbidity.tsv"));
    assert_eq!(rows[0][0], "cohort");
    assert_eq!(rows[0][1], corpus.expected_cohort().len().to_string());
    assert_eq!(rows.len(), 9, "cohort row plus eight diagnoses: {rows:?}");

    let (header, rows, _) = read_tsv(&out.join("summary.tsv"));
    assert_eq!(header, ["key", "value"]);
    let keys: BTreeSet<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    for key in [
        "cohort_size",
        "pct_additional_diagnosis",
        "mean_first_post_age",
        "removed_bot",
        "removed_psychotic",
    ] {
        assert!(keys.contains(key), "summary missing {key}: {keys:?}");
    }
    let get = |key: &str| &rows.iter().find(|r| r[0] == key).unwrap()[1];
    assert_eq!(get("cohort_size"), &corpus.expected_cohort().len().to_string());
    assert_eq!(get("removed_bot"), "2");
    assert_eq!(get("removed_manual"), "1");
    assert_eq!(get("removed_psychotic"), "1");
}

fn output_digest(out: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(dir: &Path, base: &Path, into: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(&path, base, into);
            } else {
                into.insert(
                    path.strip_prefix(base).unwrap().to_path_buf(),
                    fs::read(&path).unwrap(),
                );
            }
        }
    }
    let mut map = BTreeMap::new();
    walk(out, out, &mut map);
    map
}

#[test]
fn reruns_and_thread_counts_are_byte_identical() {
    let (dir, _corpus) = setup(80, 14);
    let root = dir.path();

    run_all(root, &[]);
    let first = output_digest(&root.join("out"));
    assert!(!first.is_empty());

    run_all(root, &[]);
    let second = output_digest(&root.join("out"));
    assert_eq!(
        first.keys().collect::<Vec<_>>(),
        second.keys().collect::<Vec<_>>()
    );
    for (path, bytes) in &first {
        assert_eq!(bytes, &second[path], "{path:?} changed across reruns");
    }

    fs::remove_dir_all(root.join("out")).unwrap();
    run_all(root, &["--threads", "2"]);
    let threaded = output_digest(&root.join("out"));
    for (path, bytes) in &first {
        assert_eq!(bytes, &threaded[path], "{path:?} changed with --threads 2");
    }
}

#[test]
fn empty_corpus_flows_through_with_empty_results() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let corpus = SynthCorpus::default();
    write_workspace(root, &corpus);
    fs::write(root.join("gold.csv"), "user_id,variable,label,annotator_id\n").unwrap();

    run_ok(root, &["ingest"]);
    run_ok(root, &["detect"]);
    assert_eq!(fs::read_to_string(root.join("out/cohort.jsonl")).unwrap(), "");
    run_ok(root, &["profile"]);

    let out = run(root, &["evaluate"]);
    assert_eq!(out.status.code(), Some(3), "{out:?}");

    let out = run(root, &["report"]);
    assert_eq!(out.status.code(), Some(3), "{out:?}");
    let summary = fs::read_to_string(root.join("out/summary.tsv")).unwrap();
    assert_eq!(summary, "key\tvalue\n");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("warning"), "{stderr}");
}

#[test]
fn config_problems_fail_before_outputs_exist() {
    let (dir, _corpus) = setup(5, 15);
    let root = dir.path();

    let bad = "posts = posts.jsonl\npatterns = patterns\noutput = out\nthresold_chars = 10\n";
    fs::write(root.join("bad.conf"), bad).unwrap();
    let out = run(root, &["ingest", "--config", "bad.conf"]);
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    assert!(!root.join("out").exists(), "output touched on config error");

    let out = run(root, &["detect"]);
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("ingest"), "{stderr}");

    let out = run(root, &["nonsense"]);
    assert_eq!(out.status.code(), Some(1), "{out:?}");
}

#[test]
fn export_leaks_no_original_identifiers() {
    let (dir, corpus) = setup(40, 16);
    let root = dir.path();
    run_ok(root, &["ingest"]);
    run_ok(root, &["export"]);

    let posts = fs::read_to_string(root.join("out/export/posts.jsonl")).unwrap();
    let accounts = fs::read_to_string(root.join("out/export/accounts.jsonl")).unwrap();
    let leakable: Vec<&str> = corpus
        .users
        .values()
        .flat_map(|u| [u.user_id.as_str(), u.username.as_str()])
        .collect();
    for id in leakable {
        assert!(!posts.contains(id), "post export leaks `{id}`");
        assert!(!accounts.contains(id), "account export leaks `{id}`");
    }

    let id_map = fs::read_to_string(root.join("out/export/id_map.tsv")).unwrap();
    for user in corpus.users.keys() {
        assert!(id_map.contains(user), "id map misses `{user}`");
    }

    // same secret, same tokens
    let before = fs::read_to_string(root.join("out/export/posts.jsonl")).unwrap();
    run_ok(root, &["export"]);
    let after = fs::read_to_string(root.join("out/export/posts.jsonl")).unwrap();
    assert_eq!(before, after);
}
