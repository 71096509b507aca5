//! Columnar corpus store under `<output>/store/`.
//!
//! `ingest` writes one file per field (`posts/user_id.col`, ...) holding
//! one JSON value per line, plus `manifest.json` with row counts and the
//! SHA-256 of each input dump. Every file is staged as `*.tmp` and
//! renamed into place, the manifest last, so a crashed run never leaves a
//! store that parses but lies about its contents.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use redcohort::corpus::{Post, PostKind, UserAccount};

use crate::error::CliError;

/// Store directory name under the configured output directory.
pub const STORE_DIR: &str = "store";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub n_posts: u64,
    pub n_users: u64,
    pub n_accounts: u64,
    /// Input lines dropped during ingest (malformed or invalid records).
    pub n_posts_skipped: u64,
    pub n_accounts_skipped: u64,
    pub posts_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accounts_sha256: Option<String>,
}

const POST_FIELDS: [&str; 7] = [
    "post_id",
    "user_id",
    "kind",
    "title",
    "body",
    "subreddit",
    "created_utc",
];
const ACCOUNT_FIELDS: [&str; 3] = ["user_id", "username", "created_utc"];

/// Writes `bytes` to `path` via a `.tmp` sibling and an atomic rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = tmp_path(path);
    let io = |e: std::io::Error| CliError::data(path, e);
    let mut file = fs::File::create(&tmp).map_err(io)?;
    file.write_all(bytes).map_err(io)?;
    file.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

fn column<T: Serialize>(values: impl Iterator<Item = T>) -> Vec<u8> {
    let mut out = Vec::new();
    for value in values {
        serde_json::to_writer(&mut out, &value).expect("column values serialize");
        out.push(b'\n');
    }
    out
}

pub fn write_store(
    dir: &Path,
    posts: &[Post],
    accounts: &[UserAccount],
    manifest: &Manifest,
) -> Result<(), CliError> {
    let posts_dir = dir.join("posts");
    let accounts_dir = dir.join("accounts");
    for d in [&posts_dir, &accounts_dir] {
        fs::create_dir_all(d).map_err(|e| CliError::data(d, e))?;
    }

    let col = |name: &str| posts_dir.join(format!("{name}.col"));
    atomic_write(&col("post_id"), &column(posts.iter().map(|p| &p.post_id)))?;
    atomic_write(&col("user_id"), &column(posts.iter().map(|p| &p.user_id)))?;
    atomic_write(&col("kind"), &column(posts.iter().map(|p| p.kind)))?;
    atomic_write(&col("title"), &column(posts.iter().map(|p| &p.title)))?;
    atomic_write(&col("body"), &column(posts.iter().map(|p| &p.body)))?;
    atomic_write(&col("subreddit"), &column(posts.iter().map(|p| &p.subreddit)))?;
    atomic_write(&col("created_utc"), &column(posts.iter().map(|p| p.created_utc)))?;

    let col = |name: &str| accounts_dir.join(format!("{name}.col"));
    atomic_write(&col("user_id"), &column(accounts.iter().map(|a| &a.user_id)))?;
    atomic_write(&col("username"), &column(accounts.iter().map(|a| &a.username)))?;
    atomic_write(&col("created_utc"), &column(accounts.iter().map(|a| a.created_utc)))?;

    let json = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
    atomic_write(&dir.join("manifest.json"), &json)
}

fn read_column<T: DeserializeOwned>(
    dir: &Path,
    name: &str,
    expect: u64,
) -> Result<Vec<T>, CliError> {
    let path = dir.join(format!("{name}.col"));
    let text = fs::read_to_string(&path).map_err(|e| CliError::data(&path, e))?;
    let mut out = Vec::with_capacity(expect as usize);
    for (i, line) in text.lines().enumerate() {
        out.push(
            serde_json::from_str(line)
                .map_err(|e| CliError::Data(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    if out.len() as u64 != expect {
        return Err(CliError::Data(format!(
            "{}: {} rows, manifest says {expect}",
            path.display(),
            out.len()
        )));
    }
    Ok(out)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, CliError> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| CliError::data(&path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(&path, e))
}

pub fn read_store(dir: &Path) -> Result<(Vec<Post>, Vec<UserAccount>, Manifest), CliError> {
    let manifest = read_manifest(dir)?;
    let pd = dir.join("posts");
    let n = manifest.n_posts;
    let post_ids: Vec<String> = read_column(&pd, "post_id", n)?;
    let user_ids: Vec<String> = read_column(&pd, "user_id", n)?;
    let kinds: Vec<PostKind> = read_column(&pd, "kind", n)?;
    let titles: Vec<Option<String>> = read_column(&pd, "title", n)?;
    let bodies: Vec<String> = read_column(&pd, "body", n)?;
    let subreddits: Vec<String> = read_column(&pd, "subreddit", n)?;
    let times: Vec<i64> = read_column(&pd, "created_utc", n)?;

    let mut posts = Vec::with_capacity(n as usize);
    let rows = post_ids
        .into_iter()
        .zip(user_ids)
        .zip(kinds)
        .zip(titles)
        .zip(bodies)
        .zip(subreddits)
        .zip(times);
    for ((((((post_id, user_id), kind), title), body), subreddit), created_utc) in rows {
        posts.push(Post {
            post_id,
            user_id,
            kind,
            title,
            body,
            subreddit,
            created_utc,
        });
    }

    let ad = dir.join("accounts");
    let n = manifest.n_accounts;
    let user_ids: Vec<String> = read_column(&ad, "user_id", n)?;
    let usernames: Vec<String> = read_column(&ad, "username", n)?;
    let times: Vec<i64> = read_column(&ad, "created_utc", n)?;
    let accounts = user_ids
        .into_iter()
        .zip(usernames)
        .zip(times)
        .map(|((user_id, username), created_utc)| UserAccount {
            user_id,
            username,
            created_utc,
        })
        .collect();

    Ok((posts, accounts, manifest))
}

/// True once `ingest` has produced a complete store under `dir`.
pub fn store_exists(dir: &Path) -> bool {
    dir.join("manifest.json").is_file()
}

/// Names of every file a complete store contains, relative to the store
/// directory.
pub fn store_files() -> Vec<PathBuf> {
    let mut files = vec![PathBuf::from("manifest.json")];
    files.extend(POST_FIELDS.iter().map(|f| PathBuf::from(format!("posts/{f}.col"))));
    files.extend(
        ACCOUNT_FIELDS
            .iter()
            .map(|f| PathBuf::from(format!("accounts/{f}.col"))),
    );
    files
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (Vec<Post>, Vec<UserAccount>, Manifest) {
        let posts = vec![
            Post {
                post_id: "p1".into(),
                user_id: "u1".into(),
                kind: PostKind::Submission,
                title: Some("multi\nline title".into()),
                body: "body\nwith newline\tand tab".into(),
                subreddit: "bipolar".into(),
                created_utc: 1_500_000_000,
            },
            Post {
                post_id: "p2".into(),
                user_id: "u2".into(),
                kind: PostKind::Comment,
                title: None,
                body: String::new(),
                subreddit: "aww".into(),
                created_utc: 1_500_000_100,
            },
        ];
        let accounts = vec![UserAccount {
            user_id: "u1".into(),
            username: "quiet_one".into(),
            created_utc: 1_400_000_000,
        }];
        let manifest = Manifest {
            n_posts: 2,
            n_users: 2,
            n_accounts: 1,
            n_posts_skipped: 0,
            n_accounts_skipped: 0,
            posts_sha256: "00".into(),
            accounts_sha256: Some("11".into()),
        };
        (posts, accounts, manifest)
    }

    #[test]
    fn round_trips_including_newlines() {
        let dir = tempfile::tempdir().unwrap();
        let (posts, accounts, manifest) = sample();
        write_store(dir.path(), &posts, &accounts, &manifest).unwrap();
        let (p, a, m) = read_store(dir.path()).unwrap();
        assert_eq!(p, posts);
        assert_eq!(a, accounts);
        assert_eq!(m, manifest);
    }

    #[test]
    fn no_tmp_files_survive() {
        let dir = tempfile::tempdir().unwrap();
        let (posts, accounts, manifest) = sample();
        write_store(dir.path(), &posts, &accounts, &manifest).unwrap();
        for file in store_files() {
            assert!(dir.path().join(&file).is_file(), "{file:?}");
        }
        for entry in walk(dir.path()) {
            assert!(!entry.to_string_lossy().ends_with(".tmp"), "{entry:?}");
        }
    }

    fn walk(dir: &Path) -> Vec<PathBuf> {
        let mut out = Vec::new();
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                out.extend(walk(&path));
            } else {
                out.push(path);
            }
        }
        out
    }

    #[test]
    fn row_count_mismatch_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let (posts, accounts, mut manifest) = sample();
        manifest.n_posts = 3;
        write_store(dir.path(), &posts, &accounts, &manifest).unwrap();
        let err = read_store(dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("manifest says 3"), "{err}");
    }

    #[test]
    fn rewrite_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (posts, accounts, manifest) = sample();
        write_store(dir.path(), &posts, &accounts, &manifest).unwrap();
        let before: Vec<Vec<u8>> = store_files()
            .iter()
            .map(|f| fs::read(dir.path().join(f)).unwrap())
            .collect();
        write_store(dir.path(), &posts, &accounts, &manifest).unwrap();
        let after: Vec<Vec<u8>> = store_files()
            .iter()
            .map(|f| fs::read(dir.path().join(f)).unwrap())
            .collect();
        assert_eq!(before, after);
    }
}
