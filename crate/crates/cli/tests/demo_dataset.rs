//! Guards the checked-in demo dataset: the quickstart in the README must
//! keep running end to end as the code evolves.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::Command;

use redcohort::detector::Diagnosis;
use redcohort_cli::commands::CohortRecord;

fn copy_tree(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_tree(&entry.path(), &target);
        } else {
            fs::copy(entry.path(), &target).unwrap();
        }
    }
}

#[test]
fn demo_dataset_runs_end_to_end() {
    let repo = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let tmp = tempfile::tempdir().unwrap();
    // demo/pipeline.conf points at ../resources, so mirror both trees
    copy_tree(&repo.join("demo"), &tmp.path().join("demo"));
    copy_tree(&repo.join("resources"), &tmp.path().join("resources"));

    let root = tmp.path().join("demo");
    for cmd in ["ingest", "detect", "profile", "evaluate", "report", "export"] {
        let out = Command::new(env!("CARGO_BIN_EXE_redcohort"))
            .current_dir(&root)
            .arg(cmd)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{cmd}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }

    let cohort: Vec<CohortRecord> = fs::read_to_string(root.join("out/cohort.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let members: BTreeSet<&str> = cohort.iter().map(|r| r.user_id.as_str()).collect();
    assert_eq!(members, ["u_lena", "u_miles", "u_nora", "u_vera"].into());

    let vera = cohort.iter().find(|r| r.user_id == "u_vera").unwrap();
    assert!(vera.diagnoses.contains(&Diagnosis::Mdd));
    assert!(vera.diagnoses.contains(&Diagnosis::MddConservative));

    let removals = fs::read_to_string(root.join("out/removals.tsv")).unwrap();
    for needle in ["bot\tu_digest", "manual\tu_imposter", "psychotic\tu_theo"] {
        assert!(removals.contains(needle), "missing `{needle}`:\n{removals}");
    }

    let evaluation = fs::read_to_string(root.join("out/evaluation.tsv")).unwrap();
    assert_eq!(evaluation.lines().filter(|l| !l.starts_with(['#', 'v'])).count(), 10);

    let summary = fs::read_to_string(root.join("out/summary.tsv")).unwrap();
    assert!(summary.contains("cohort_size\t4"), "{summary}");

    for file in ["posts.jsonl", "accounts.jsonl", "id_map.tsv"] {
        assert!(root.join("out/export").join(file).is_file(), "missing export {file}");
    }
}
