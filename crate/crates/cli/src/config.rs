//! Pipeline configuration: a flat `key = value` file.
//!
//! Blank lines and `#` comments are ignored; values may be wrapped in
//! double quotes. Every path resolves relative to the directory holding
//! the config file. Unknown keys are rejected so typos fail loudly.
//!
//! ```text
//! posts = data/posts.jsonl
//! patterns = resources/patterns
//! output = out
//! threshold_chars = 55
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use redcohort::detector::MddPolicy;
use redcohort::pattern::DEFAULT_PROXIMITY_THRESHOLD;

use crate::error::CliError;

/// Baseline distribution tables (`label<TAB>percent` files) merged into
/// the report output as extra columns.
#[derive(Debug, Clone, Default)]
pub struct Baselines {
    pub comorbidity: Option<PathBuf>,
    pub age_groups: Option<PathBuf>,
    pub gender: Option<PathBuf>,
    pub countries: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// JSONL post dump consumed by `ingest`.
    pub posts: PathBuf,
    /// Optional JSONL account dump (usernames, creation times).
    pub accounts: Option<PathBuf>,
    /// Directory holding the pattern lists.
    pub patterns: PathBuf,
    /// Optional JSONL backend prediction file consumed by `profile`.
    pub predictions: Option<PathBuf>,
    /// Optional country grid CSV.
    pub country_grid: Option<PathBuf>,
    /// Gold annotation CSV, required by `evaluate`.
    pub gold: Option<PathBuf>,
    /// Resolutions for gold disagreements (`user_id,variable,label`).
    pub resolutions: Option<PathBuf>,
    /// Manual review decisions (`user_id,action,reason`).
    pub review: Option<PathBuf>,
    /// Directory receiving every artifact the pipeline writes.
    pub output: PathBuf,
    pub threshold_chars: usize,
    pub mdd_policy: MddPolicy,
    /// Country rows listed individually in the report before the rest is
    /// folded into `other`.
    pub top_countries: usize,
    /// Secret keying the pseudonymization; `export` requires it (or a
    /// `--seed` fallback).
    pub export_secret: Option<String>,
    pub baselines: Baselines,
}

fn unquote(value: &str) -> &str {
    value
        .strip_prefix('"')
        .and_then(|v| v.strip_suffix('"'))
        .unwrap_or(value)
}

fn parse_pairs(text: &str, path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let mut pairs = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!(
                "{}:{}: expected `key = value`, got `{line}`",
                path.display(),
                i + 1
            )));
        };
        let key = key.trim().to_string();
        let value = unquote(value.trim()).to_string();
        if pairs.insert(key.clone(), value).is_some() {
            return Err(CliError::Config(format!(
                "{}:{}: duplicate key `{key}`",
                path.display(),
                i + 1
            )));
        }
    }
    Ok(pairs)
}

const KNOWN_KEYS: [&str; 17] = [
    "posts",
    "accounts",
    "patterns",
    "predictions",
    "country_grid",
    "gold",
    "resolutions",
    "review",
    "output",
    "threshold_chars",
    "mdd_policy",
    "top_countries",
    "export_secret",
    "baseline_comorbidity",
    "baseline_age_groups",
    "baseline_gender",
    "baseline_countries",
];

impl PipelineConfig {
    /// Reads and fully validates a config file. All referenced input paths
    /// must exist; only the output directory may be missing.
    pub fn load(path: &Path) -> Result<PipelineConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let pairs = parse_pairs(&text, path)?;

        if let Some(key) = pairs.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(CliError::Config(format!(
                "{}: unknown key `{key}`",
                path.display()
            )));
        }

        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |value: &String| base.join(value);
        let required = |key: &str| {
            pairs
                .get(key)
                .map(resolve)
                .ok_or_else(|| CliError::Config(format!("{}: missing key `{key}`", path.display())))
        };
        let optional = |key: &str| pairs.get(key).map(resolve);

        let threshold_chars = match pairs.get("threshold_chars") {
            None => DEFAULT_PROXIMITY_THRESHOLD,
            Some(raw) => raw
                .parse::<usize>()
                .ok()
                .filter(|n| *n >= 1)
                .ok_or_else(|| {
                    CliError::Config(format!(
                        "threshold_chars must be an integer >= 1, got `{raw}`"
                    ))
                })?,
        };
        let mdd_policy = match pairs.get("mdd_policy").map(String::as_str) {
            None | Some("plain") => MddPolicy::Plain,
            Some("conservative") => MddPolicy::Conservative,
            Some(other) => {
                return Err(CliError::Config(format!(
                    "mdd_policy must be `plain` or `conservative`, got `{other}`"
                )))
            }
        };
        let top_countries = match pairs.get("top_countries") {
            None => 5,
            Some(raw) => raw
                .parse::<usize>()
                .ok()
                .filter(|n| *n >= 1)
                .ok_or_else(|| {
                    CliError::Config(format!("top_countries must be an integer >= 1, got `{raw}`"))
                })?,
        };

        let config = PipelineConfig {
            posts: required("posts")?,
            accounts: optional("accounts"),
            patterns: required("patterns")?,
            predictions: optional("predictions"),
            country_grid: optional("country_grid"),
            gold: optional("gold"),
            resolutions: optional("resolutions"),
            review: optional("review"),
            output: required("output")?,
            threshold_chars,
            mdd_policy,
            top_countries,
            export_secret: pairs.get("export_secret").cloned(),
            baselines: Baselines {
                comorbidity: optional("baseline_comorbidity"),
                age_groups: optional("baseline_age_groups"),
                gender: optional("baseline_gender"),
                countries: optional("baseline_countries"),
            },
        };
        config.check_paths()?;
        Ok(config)
    }

    fn check_paths(&self) -> Result<(), CliError> {
        let mut referenced: Vec<(&str, &Path, bool)> = vec![
            ("posts", &self.posts, false),
            ("patterns", &self.patterns, true),
        ];
        let optionals: [(&str, &Option<PathBuf>); 10] = [
            ("accounts", &self.accounts),
            ("predictions", &self.predictions),
            ("country_grid", &self.country_grid),
            ("gold", &self.gold),
            ("resolutions", &self.resolutions),
            ("review", &self.review),
            ("baseline_comorbidity", &self.baselines.comorbidity),
            ("baseline_age_groups", &self.baselines.age_groups),
            ("baseline_gender", &self.baselines.gender),
            ("baseline_countries", &self.baselines.countries),
        ];
        for (key, path) in optionals {
            if let Some(path) = path {
                referenced.push((key, path, false));
            }
        }
        for (key, path, want_dir) in referenced {
            if !path.exists() {
                return Err(CliError::Config(format!(
                    "{key}: no such path `{}`",
                    path.display()
                )));
            }
            if want_dir && !path.is_dir() {
                return Err(CliError::Config(format!(
                    "{key}: `{}` is not a directory",
                    path.display()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write_config(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("pipeline.conf");
        fs::write(&path, body).unwrap();
        path
    }

    fn scaffold(dir: &Path) {
        fs::write(dir.join("posts.jsonl"), "").unwrap();
        fs::create_dir_all(dir.join("patterns")).unwrap();
    }

    const MINIMAL: &str = "posts = posts.jsonl\npatterns = patterns\noutput = out\n";

    #[test]
    fn minimal_config_fills_defaults() {
        let dir = tempfile::tempdir().unwrap();
        scaffold(dir.path());
        let path = write_config(dir.path(), MINIMAL);
        let config = PipelineConfig::load(&path).unwrap();
        assert_eq!(config.threshold_chars, 55);
        assert_eq!(config.mdd_policy, MddPolicy::Plain);
        assert_eq!(config.top_countries, 5);
        assert_eq!(config.posts, dir.path().join("posts.jsonl"));
        assert!(config.accounts.is_none());
    }

    #[test]
    fn quotes_and_comments_are_tolerated() {
        let dir = tempfile::tempdir().unwrap();
        scaffold(dir.path());
        let body = format!("# header\n{MINIMAL}export_secret = \"spaced value\"\n");
        let config = PipelineConfig::load(&write_config(dir.path(), &body)).unwrap();
        assert_eq!(config.export_secret.as_deref(), Some("spaced value"));
    }

    #[test]
    fn unknown_and_duplicate_keys_fail() {
        let dir = tempfile::tempdir().unwrap();
        scaffold(dir.path());
        let err =
            PipelineConfig::load(&write_config(dir.path(), &format!("{MINIMAL}outputs = x\n")))
                .unwrap_err();
        assert!(err.to_string().contains("unknown key `outputs`"), "{err}");

        let err = PipelineConfig::load(&write_config(
            dir.path(),
            &format!("{MINIMAL}posts = again.jsonl\n"),
        ))
        .unwrap_err();
        assert!(err.to_string().contains("duplicate key `posts`"), "{err}");
    }

    #[test]
    fn missing_required_key_fails() {
        let dir = tempfile::tempdir().unwrap();
        scaffold(dir.path());
        let err = PipelineConfig::load(&write_config(dir.path(), "posts = posts.jsonl\n"))
            .unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("missing key `patterns`"), "{err}");
    }

    #[test]
    fn dangling_input_path_fails_validation() {
        let dir = tempfile::tempdir().unwrap();
        scaffold(dir.path());
        let body = format!("{MINIMAL}gold = gold.csv\n");
        let err = PipelineConfig::load(&write_config(dir.path(), &body)).unwrap_err();
        assert!(err.to_string().contains("gold: no such path"), "{err}");
    }

    #[test]
    fn bad_scalar_values_fail() {
        let dir = tempfile::tempdir().unwrap();
        scaffold(dir.path());
        for (line, needle) in [
            ("threshold_chars = 0\n", "threshold_chars"),
            ("threshold_chars = soon\n", "threshold_chars"),
            ("mdd_policy = strict\n", "mdd_policy"),
            ("top_countries = -2\n", "top_countries"),
        ] {
            let err = PipelineConfig::load(&write_config(dir.path(), &format!("{MINIMAL}{line}")))
                .unwrap_err();
            assert_eq!(err.exit_code(), 1, "{line}");
            assert!(err.to_string().contains(needle), "{line}: {err}");
        }
    }

    #[test]
    fn absolute_paths_survive_resolution() {
        let dir = tempfile::tempdir().unwrap();
        scaffold(dir.path());
        let abs = dir.path().join("posts.jsonl");
        let body = format!(
            "posts = {}\npatterns = patterns\noutput = out\n",
            abs.display()
        );
        let config = PipelineConfig::load(&write_config(dir.path(), &body)).unwrap();
        assert_eq!(config.posts, abs);
    }
}
