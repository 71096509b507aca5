//! `export`: write a pseudonymized copy of the corpus. User ids, post
//! ids and usernames are replaced with keyed tokens; the original-to-token
//! map stays in `id_map.tsv` next to the export and must not be shipped
//! with it.

use redcohort::corpus::pseudonymize_export;

use crate::commands::{write_jsonl, write_tsv};
use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::store::{read_store, store_exists, STORE_DIR};

pub fn run(config: &PipelineConfig, seed: Option<u64>) -> Result<(), CliError> {
    let secret: Vec<u8> = match (&config.export_secret, seed) {
        (Some(secret), _) => secret.as_bytes().to_vec(),
        (None, Some(seed)) => format!("seed:{seed}").into_bytes(),
        (None, None) => {
            return Err(CliError::Config(
                "export needs `export_secret` in the config, or --seed as a fallback".into(),
            ))
        }
    };
    let store_dir = config.output.join(STORE_DIR);
    if !store_exists(&store_dir) {
        return Err(CliError::Config(format!(
            "no store under `{}`; run `redcohort ingest` first",
            store_dir.display()
        )));
    }
    let (posts, accounts, _) = read_store(&store_dir)?;
    let export = pseudonymize_export(&posts, &accounts, &secret)
        .map_err(|e| CliError::Data(e.to_string()))?;

    let dir = config.output.join("export");
    std::fs::create_dir_all(&dir).map_err(|e| CliError::data(&dir, e))?;
    write_jsonl(&dir.join("posts.jsonl"), &export.posts)?;
    write_jsonl(&dir.join("accounts.jsonl"), &export.accounts)?;
    let map_rows: Vec<Vec<String>> = export
        .id_map
        .iter()
        .map(|(original, token)| vec![original.clone(), token.clone()])
        .collect();
    write_tsv(&dir.join("id_map.tsv"), &["original", "token"], &map_rows)?;

    println!(
        "export: {} posts, {} accounts, {} identifiers -> {}",
        export.posts.len(),
        export.accounts.len(),
        export.id_map.len(),
        dir.display()
    );
    Ok(())
}
