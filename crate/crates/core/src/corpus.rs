//! Corpus ingestion: JSONL post/account streams, text normalization, user
//! activity statistics, and pseudonymized export.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Earliest plausible post timestamp (2005-06-22T00:00:00Z). Anything older
/// predates the platform and is treated as malformed.
pub const MIN_CREATED_UTC: i64 = 1_119_398_400;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("schema map field `{0}` has no source names")]
    EmptySchemaField(&'static str),
    #[error("read failed at line {line}: {source}")]
    Read {
        line: u64,
        #[source]
        source: std::io::Error,
    },
    #[error("pseudonymization secret is empty")]
    EmptySecret,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PostKind {
    Submission,
    Comment,
}

/// One post (submission or comment) in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub post_id: String,
    pub user_id: String,
    pub kind: PostKind,
    /// Submissions only; comments never carry a title.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    /// May be empty (e.g. link submissions).
    pub body: String,
    pub subreddit: String,
    pub created_utc: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserAccount {
    pub user_id: String,
    pub username: String,
    pub created_utc: i64,
}

/// Aggregate activity per user, built from the post stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserStats {
    pub n_submissions: u64,
    pub n_comments: u64,
    pub first_post_utc: i64,
    pub last_post_utc: i64,
}

/// Maps canonical post fields to source field names, tried in order. The
/// default covers both the canonical names and the common dump aliases
/// (`id`, `author`, `selftext`, ...).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemaMap {
    pub post_id: Vec<String>,
    pub user_id: Vec<String>,
    pub kind: Vec<String>,
    pub title: Vec<String>,
    pub body: Vec<String>,
    pub subreddit: Vec<String>,
    pub created_utc: Vec<String>,
}

fn names(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

impl Default for SchemaMap {
    fn default() -> Self {
        SchemaMap {
            post_id: names(&["post_id", "id"]),
            user_id: names(&["user_id", "author_id", "author"]),
            kind: names(&["kind"]),
            title: names(&["title"]),
            body: names(&["body", "selftext"]),
            subreddit: names(&["subreddit"]),
            created_utc: names(&["created_utc", "created"]),
        }
    }
}

impl SchemaMap {
    /// `kind` may be empty (it is then inferred from title presence); every
    /// other field needs at least one source name.
    pub fn validate(&self) -> Result<(), CorpusError> {
        for (field, list) in [
            ("post_id", &self.post_id),
            ("user_id", &self.user_id),
            ("title", &self.title),
            ("body", &self.body),
            ("subreddit", &self.subreddit),
            ("created_utc", &self.created_utc),
        ] {
            if list.is_empty() {
                return Err(CorpusError::EmptySchemaField(field));
            }
        }
        Ok(())
    }
}

/// Account-file counterpart of [`SchemaMap`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AccountSchemaMap {
    pub user_id: Vec<String>,
    pub username: Vec<String>,
    pub created_utc: Vec<String>,
}

impl Default for AccountSchemaMap {
    fn default() -> Self {
        AccountSchemaMap {
            user_id: names(&["user_id", "id", "author_id"]),
            username: names(&["username", "name", "author"]),
            created_utc: names(&["created_utc", "created"]),
        }
    }
}

impl AccountSchemaMap {
    pub fn validate(&self) -> Result<(), CorpusError> {
        for (field, list) in [
            ("user_id", &self.user_id),
            ("username", &self.username),
            ("created_utc", &self.created_utc),
        ] {
            if list.is_empty() {
                return Err(CorpusError::EmptySchemaField(field));
            }
        }
        Ok(())
    }
}

fn pick<'a>(
    obj: &'a serde_json::Map<String, serde_json::Value>,
    sources: &[String],
) -> Option<&'a serde_json::Value> {
    sources
        .iter()
        .filter_map(|name| obj.get(name))
        .find(|v| !v.is_null())
}

fn as_string(v: &serde_json::Value) -> Option<String> {
    v.as_str().map(|s| s.to_string())
}

fn as_epoch(v: &serde_json::Value) -> Option<i64> {
    if let Some(n) = v.as_i64() {
        return Some(n);
    }
    if let Some(f) = v.as_f64() {
        return (f.fract() == 0.0).then_some(f as i64);
    }
    v.as_str().and_then(|s| s.trim().parse::<i64>().ok())
}

fn parse_post(json: &str, schema: &SchemaMap) -> Option<Post> {
    let value: serde_json::Value = serde_json::from_str(json).ok()?;
    let obj = value.as_object()?;

    let post_id = pick(obj, &schema.post_id).and_then(as_string)?;
    let user_id = pick(obj, &schema.user_id).and_then(as_string)?;
    if post_id.is_empty() || user_id.is_empty() {
        return None;
    }
    let subreddit = pick(obj, &schema.subreddit).and_then(as_string)?;
    if subreddit.is_empty() {
        return None;
    }
    let created_utc = pick(obj, &schema.created_utc).and_then(as_epoch)?;
    if created_utc < MIN_CREATED_UTC {
        return None;
    }

    let title = pick(obj, &schema.title)
        .and_then(as_string)
        .filter(|t| !t.is_empty());
    let kind = match pick(obj, &schema.kind) {
        Some(v) => match v.as_str()?.to_ascii_lowercase().as_str() {
            "submission" => PostKind::Submission,
            "comment" => PostKind::Comment,
            _ => return None,
        },
        None => {
            if title.is_some() {
                PostKind::Submission
            } else {
                PostKind::Comment
            }
        }
    };
    if kind == PostKind::Comment && title.is_some() {
        return None;
    }

    let body = match pick(obj, &schema.body).map(as_string) {
        Some(Some(b)) => b,
        Some(None) => return None,
        None if kind == PostKind::Submission => String::new(),
        None => return None,
    };

    Some(Post {
        post_id,
        user_id,
        kind,
        title,
        body,
        subreddit,
        created_utc,
    })
}

fn parse_account(json: &str, schema: &AccountSchemaMap) -> Option<UserAccount> {
    let value: serde_json::Value = serde_json::from_str(json).ok()?;
    let obj = value.as_object()?;
    let user_id = pick(obj, &schema.user_id).and_then(as_string)?;
    let username = pick(obj, &schema.username).and_then(as_string)?;
    if user_id.is_empty() || username.is_empty() {
        return None;
    }
    let created_utc = pick(obj, &schema.created_utc).and_then(as_epoch)?;
    if created_utc < MIN_CREATED_UTC {
        return None;
    }
    Some(UserAccount {
        user_id,
        username,
        created_utc,
    })
}

/// Streaming JSONL reader. Lines that fail to parse or validate are counted
/// and skipped; only I/O failures surface as errors. Blank lines are ignored.
pub struct JsonlStream<R, T> {
    reader: R,
    parse: Box<dyn Fn(&str) -> Option<T> + Send>,
    line: u64,
    skipped: u64,
    done: bool,
}

impl<R: BufRead, T> JsonlStream<R, T> {
    /// Records dropped so far (malformed JSON or failed validation).
    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    /// Lines consumed so far, including skipped and blank ones.
    pub fn lines_read(&self) -> u64 {
        self.line
    }
}

impl<R: BufRead, T> Iterator for JsonlStream<R, T> {
    type Item = Result<T, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut buf = String::new();
        loop {
            buf.clear();
            match self.reader.read_line(&mut buf) {
                Ok(0) => {
                    self.done = true;
                    return None;
                }
                Ok(_) => {}
                Err(e) => {
                    self.done = true;
                    return Some(Err(CorpusError::Read {
                        line: self.line + 1,
                        source: e,
                    }));
                }
            }
            self.line += 1;
            let text = buf.trim();
            if text.is_empty() {
                continue;
            }
            match (self.parse)(text) {
                Some(record) => return Some(Ok(record)),
                None => self.skipped += 1,
            }
        }
    }
}

/// Opens a post stream over `reader`. Fails only if the schema map itself is
/// unusable; per-line problems are handled by skipping.
pub fn parse_posts_stream<R: BufRead>(
    reader: R,
    schema: &SchemaMap,
) -> Result<JsonlStream<R, Post>, CorpusError> {
    schema.validate()?;
    let schema = schema.clone();
    Ok(JsonlStream {
        reader,
        parse: Box::new(move |line| parse_post(line, &schema)),
        line: 0,
        skipped: 0,
        done: false,
    })
}

pub fn parse_accounts_stream<R: BufRead>(
    reader: R,
    schema: &AccountSchemaMap,
) -> Result<JsonlStream<R, UserAccount>, CorpusError> {
    schema.validate()?;
    let schema = schema.clone();
    Ok(JsonlStream {
        reader,
        parse: Box::new(move |line| parse_account(line, &schema)),
        line: 0,
        skipped: 0,
        done: false,
    })
}

/// Drops every line whose first non-whitespace character is `>` (quoted
/// reply text). Other lines pass through byte-for-byte.
pub fn strip_quotes(text: &str) -> String {
    text.split('\n')
        .filter(|line| !line.trim_start().starts_with('>'))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Canonical matching form: typographic quotes folded to ASCII, lowercased,
/// whitespace runs collapsed to single spaces, ends trimmed.
pub fn normalize_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars() {
        let c = match c {
            '\u{2018}' | '\u{2019}' => '\'',
            '\u{201C}' | '\u{201D}' => '"',
            c => c,
        };
        if c.is_whitespace() {
            if !out.is_empty() {
                pending_space = true;
            }
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        out.extend(c.to_lowercase());
    }
    out
}

/// Tallies submissions/comments and the first/last activity timestamp for
/// every user seen in `posts`.
pub fn build_user_stats<'a, I>(posts: I) -> BTreeMap<String, UserStats>
where
    I: IntoIterator<Item = &'a Post>,
{
    let mut stats: BTreeMap<String, UserStats> = BTreeMap::new();
    for post in posts {
        let entry = stats.entry(post.user_id.clone()).or_insert(UserStats {
            n_submissions: 0,
            n_comments: 0,
            first_post_utc: post.created_utc,
            last_post_utc: post.created_utc,
        });
        match post.kind {
            PostKind::Submission => entry.n_submissions += 1,
            PostKind::Comment => entry.n_comments += 1,
        }
        entry.first_post_utc = entry.first_post_utc.min(post.created_utc);
        entry.last_post_utc = entry.last_post_utc.max(post.created_utc);
    }
    stats
}

/// Pseudonymized copies of posts and accounts plus the id map needed to
/// reverse them. The map must be stored separately from the export.
#[derive(Debug, Clone)]
pub struct PseudonymizedExport {
    pub posts: Vec<Post>,
    pub accounts: Vec<UserAccount>,
    /// original identifier -> replacement token
    pub id_map: BTreeMap<String, String>,
}

fn pseudo_token(secret: &[u8], id: &str, salt: u64) -> String {
    let mut hasher = Sha256::new();
    hasher.update(secret);
    hasher.update([0u8]);
    hasher.update(id.as_bytes());
    if salt > 0 {
        hasher.update([0u8]);
        hasher.update(salt.to_le_bytes());
    }
    hex::encode(&hasher.finalize()[..8])
}

/// Replaces post ids, user ids and usernames with keyed-hash tokens
/// (16 hex chars). Identifiers share one namespace: the same string always
/// maps to the same token, and distinct strings never collide (salted
/// rehash on the astronomically rare collision, applied in sorted id order
/// so output is deterministic).
pub fn pseudonymize_export(
    posts: &[Post],
    accounts: &[UserAccount],
    secret: &[u8],
) -> Result<PseudonymizedExport, CorpusError> {
    if secret.is_empty() {
        return Err(CorpusError::EmptySecret);
    }

    let mut ids: BTreeSet<&str> = BTreeSet::new();
    for p in posts {
        ids.insert(&p.post_id);
        ids.insert(&p.user_id);
    }
    for a in accounts {
        ids.insert(&a.user_id);
        ids.insert(&a.username);
    }

    let mut id_map: BTreeMap<String, String> = BTreeMap::new();
    let mut used: BTreeSet<String> = BTreeSet::new();
    for id in ids {
        let mut salt = 0u64;
        let token = loop {
            let t = pseudo_token(secret, id, salt);
            if used.insert(t.clone()) {
                break t;
            }
            salt += 1;
        };
        id_map.insert(id.to_string(), token);
    }

    let posts = posts
        .iter()
        .map(|p| Post {
            post_id: id_map[&p.post_id].clone(),
            user_id: id_map[&p.user_id].clone(),
            ..p.clone()
        })
        .collect();
    let accounts = accounts
        .iter()
        .map(|a| UserAccount {
            user_id: id_map[&a.user_id].clone(),
            username: id_map[&a.username].clone(),
            created_utc: a.created_utc,
        })
        .collect();

    Ok(PseudonymizedExport {
        posts,
        accounts,
        id_map,
    })
}
