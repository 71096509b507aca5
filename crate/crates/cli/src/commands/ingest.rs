//! `ingest`: canonicalize the raw JSONL dumps into the columnar store.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use sha2::{Digest, Sha256};

use redcohort::corpus::{
    parse_accounts_stream, parse_posts_stream, AccountSchemaMap, Post, SchemaMap, UserAccount,
};

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::store::{write_store, Manifest, STORE_DIR};

fn sha256_file(path: &Path) -> Result<String, CliError> {
    let file = File::open(path).map_err(|e| CliError::data(path, e))?;
    let mut reader = BufReader::new(file);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = reader.read(&mut buf).map_err(|e| CliError::data(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn read_posts(path: &Path) -> Result<(Vec<Post>, u64), CliError> {
    let file = File::open(path).map_err(|e| CliError::data(path, e))?;
    let mut stream = parse_posts_stream(BufReader::new(file), &SchemaMap::default())
        .map_err(|e| CliError::data(path, e))?;
    let mut posts = Vec::new();
    for post in &mut stream {
        posts.push(post.map_err(|e| CliError::data(path, e))?);
    }
    Ok((posts, stream.skipped()))
}

fn read_accounts(path: &Path) -> Result<(Vec<UserAccount>, u64), CliError> {
    let file = File::open(path).map_err(|e| CliError::data(path, e))?;
    let mut stream = parse_accounts_stream(BufReader::new(file), &AccountSchemaMap::default())
        .map_err(|e| CliError::data(path, e))?;
    let mut accounts = Vec::new();
    for account in &mut stream {
        accounts.push(account.map_err(|e| CliError::data(path, e))?);
    }
    Ok((accounts, stream.skipped()))
}

pub fn run(config: &PipelineConfig) -> Result<(), CliError> {
    let (posts, posts_skipped) = read_posts(&config.posts)?;
    let posts_sha256 = sha256_file(&config.posts)?;
    let (accounts, accounts_skipped, accounts_sha256) = match &config.accounts {
        Some(path) => {
            let (accounts, skipped) = read_accounts(path)?;
            let digest = sha256_file(path)?;
            (accounts, skipped, Some(digest))
        }
        None => (Vec::new(), 0, None),
    };

    let users: BTreeSet<&str> = posts.iter().map(|p| p.user_id.as_str()).collect();
    let manifest = Manifest {
        n_posts: posts.len() as u64,
        n_users: users.len() as u64,
        n_accounts: accounts.len() as u64,
        n_posts_skipped: posts_skipped,
        n_accounts_skipped: accounts_skipped,
        posts_sha256,
        accounts_sha256,
    };

    std::fs::create_dir_all(&config.output).map_err(|e| CliError::data(&config.output, e))?;
    let store_dir = config.output.join(STORE_DIR);
    write_store(&store_dir, &posts, &accounts, &manifest)?;

    println!(
        "ingest: {} posts by {} users ({} lines skipped), {} accounts ({} skipped) -> {}",
        manifest.n_posts,
        manifest.n_users,
        posts_skipped,
        manifest.n_accounts,
        accounts_skipped,
        store_dir.display()
    );
    Ok(())
}
