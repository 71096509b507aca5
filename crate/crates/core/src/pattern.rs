//! Pattern language and matcher.
//!
//! Patterns are whitespace-separated token sequences. A token may be a
//! literal word, a literal with a trailing `*` (matches any run of extra
//! word characters), or one of the placeholders `CONDITION` / `DOCTOR`,
//! which expand over the corresponding term lists. Matching operates on
//! normalized text (see [`crate::corpus::normalize_text`]) and reports
//! byte-offset spans.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::normalize_text;

/// Characters a `*` wildcard may consume, and the alphabet used for the
/// word-boundary checks at pattern edges.
pub fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Matches whose condition/inclusion spans sit further apart than this many
/// characters are rejected unless configured otherwise.
pub const DEFAULT_PROXIMITY_THRESHOLD: usize = 55;

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("line {line}: `*` is only valid at the end of a word")]
    WildcardPlacement { line: usize },
    #[error("line {line}: `*` needs a non-empty stem")]
    EmptyStem { line: usize },
    #[error("line {line}: unknown placeholder `{token}`")]
    UnknownPlaceholder { line: usize, token: String },
    #[error("placeholder `{0}` has no terms to expand")]
    NoTerms(&'static str),
    #[error("term used in expansion may not itself contain a placeholder")]
    NestedPlaceholder,
    #[error("pattern list `{0}` is empty")]
    EmptyList(String),
    #[error("no condition terms for label `{0}`")]
    UnknownLabel(String),
    #[error("matcher construction failed: {0}")]
    Build(String),
    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<PatternError>,
    },
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum PatternToken {
    Literal { text: String, wildcard: bool },
    Condition,
    Doctor,
}

/// One parsed pattern line. `raw` keeps the trimmed source text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Pattern {
    pub raw: String,
    pub tokens: Vec<PatternToken>,
}

fn looks_like_placeholder(token: &str) -> bool {
    token.len() >= 2 && token.chars().all(|c| c.is_ascii_uppercase())
}

fn parse_token(token: &str, line: usize, placeholders: bool) -> Result<PatternToken, PatternError> {
    if placeholders {
        match token {
            "CONDITION" => return Ok(PatternToken::Condition),
            "DOCTOR" => return Ok(PatternToken::Doctor),
            t if looks_like_placeholder(t) => {
                return Err(PatternError::UnknownPlaceholder {
                    line,
                    token: t.to_string(),
                })
            }
            _ => {}
        }
    }
    match token.find('*') {
        None => Ok(PatternToken::Literal {
            text: token.to_string(),
            wildcard: false,
        }),
        Some(i) if i == token.len() - 1 => {
            if i == 0 {
                Err(PatternError::EmptyStem { line })
            } else {
                Ok(PatternToken::Literal {
                    text: token[..i].to_string(),
                    wildcard: true,
                })
            }
        }
        Some(_) => Err(PatternError::WildcardPlacement { line }),
    }
}

fn parse_lines(text: &str, placeholders: bool) -> Result<Vec<Pattern>, PatternError> {
    let mut out = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw_line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens = trimmed
            .split_whitespace()
            .map(|t| parse_token(t, line, placeholders))
            .collect::<Result<Vec<_>, _>>()?;
        out.push(Pattern {
            raw: trimmed.to_string(),
            tokens,
        });
    }
    Ok(out)
}

/// Parses a pattern file: one pattern per line, `#` lines are comments,
/// blank lines are skipped. Placeholders are recognized; any other token of
/// two or more ASCII capitals is rejected as an unknown placeholder.
pub fn parse_pattern_file(text: &str) -> Result<Vec<Pattern>, PatternError> {
    parse_lines(text, true)
}

/// Parses a term file (condition or doctor terms). Same line format, but
/// every token is taken literally, so all-caps terms like `BD-II` are fine.
pub fn parse_term_file(text: &str) -> Result<Vec<Pattern>, PatternError> {
    parse_lines(text, false)
}

/// Inclusion/exclusion patterns plus the term lists they expand over.
/// Condition terms are keyed by diagnosis label.
#[derive(Debug, Clone, Default)]
pub struct PatternSet {
    pub inclusion: Vec<Pattern>,
    pub exclusion: Vec<Pattern>,
    pub doctor_terms: Vec<Pattern>,
    pub condition_terms: BTreeMap<String, Vec<Pattern>>,
}

impl PatternSet {
    pub fn from_texts(
        inclusion: &str,
        exclusion: &str,
        doctor: &str,
        conditions: &[(&str, &str)],
    ) -> Result<PatternSet, PatternError> {
        let mut condition_terms = BTreeMap::new();
        for (label, text) in conditions {
            condition_terms.insert(label.to_string(), parse_term_file(text)?);
        }
        Ok(PatternSet {
            inclusion: parse_pattern_file(inclusion)?,
            exclusion: parse_pattern_file(exclusion)?,
            doctor_terms: parse_term_file(doctor)?,
            condition_terms,
        })
    }

    /// Loads `inclusion.txt`, `exclusion.txt`, `doctor.txt` and
    /// `conditions/<label>.txt` from a directory. The exclusion and doctor
    /// files are optional; inclusion patterns and at least one condition
    /// file are required.
    pub fn load_dir(dir: &Path) -> Result<PatternSet, PatternError> {
        let read = |name: &str, required: bool| -> Result<String, PatternError> {
            let path = dir.join(name);
            match std::fs::read_to_string(&path) {
                Ok(s) => Ok(s),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound && !required => {
                    Ok(String::new())
                }
                Err(e) => Err(PatternError::Io { path, source: e }),
            }
        };
        let in_file = |name: &str, r: Result<Vec<Pattern>, PatternError>| {
            r.map_err(|e| PatternError::InFile {
                path: dir.join(name),
                source: Box::new(e),
            })
        };

        let inclusion = in_file("inclusion.txt", parse_pattern_file(&read("inclusion.txt", true)?))?;
        let exclusion = in_file("exclusion.txt", parse_pattern_file(&read("exclusion.txt", false)?))?;
        let doctor_terms = in_file("doctor.txt", parse_term_file(&read("doctor.txt", false)?))?;

        let cond_dir = dir.join("conditions");
        let mut entries: Vec<PathBuf> = std::fs::read_dir(&cond_dir)
            .map_err(|e| PatternError::Io {
                path: cond_dir.clone(),
                source: e,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        entries.sort();

        let mut condition_terms = BTreeMap::new();
        for path in entries {
            let label = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            let text = std::fs::read_to_string(&path).map_err(|e| PatternError::Io {
                path: path.clone(),
                source: e,
            })?;
            let terms = parse_term_file(&text).map_err(|e| PatternError::InFile {
                path: path.clone(),
                source: Box::new(e),
            })?;
            condition_terms.insert(label, terms);
        }
        if condition_terms.is_empty() {
            return Err(PatternError::EmptyList("conditions".into()));
        }
        Ok(PatternSet {
            inclusion,
            exclusion,
            doctor_terms,
            condition_terms,
        })
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.condition_terms.keys().map(|s| s.as_str())
    }
}

type AltTokens = Vec<(String, bool)>;

fn expand_tokens(
    pattern: &Pattern,
    conditions: &[Pattern],
    doctors: &[Pattern],
) -> Result<Vec<AltTokens>, PatternError> {
    fn splice(alts: &mut Vec<AltTokens>, terms: &[Pattern], name: &'static str) -> Result<(), PatternError> {
        if terms.is_empty() {
            return Err(PatternError::NoTerms(name));
        }
        let mut next = Vec::with_capacity(alts.len() * terms.len());
        for prefix in alts.iter() {
            for term in terms {
                let mut alt = prefix.clone();
                for tok in &term.tokens {
                    match tok {
                        PatternToken::Literal { text, wildcard } => {
                            alt.push((text.clone(), *wildcard))
                        }
                        _ => return Err(PatternError::NestedPlaceholder),
                    }
                }
                next.push(alt);
            }
        }
        *alts = next;
        Ok(())
    }

    let mut alts: Vec<AltTokens> = vec![Vec::new()];
    for token in &pattern.tokens {
        match token {
            PatternToken::Literal { text, wildcard } => {
                for alt in &mut alts {
                    alt.push((text.clone(), *wildcard));
                }
            }
            PatternToken::Condition => splice(&mut alts, conditions, "CONDITION")?,
            PatternToken::Doctor => splice(&mut alts, doctors, "DOCTOR")?,
        }
    }
    Ok(alts)
}

/// A maximal literal run of an alternative; `wildcard` marks a trailing `*`.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Segment {
    literal: String,
    wildcard: bool,
}

fn to_segments(tokens: &AltTokens) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut current = String::new();
    for (i, (text, wildcard)) in tokens.iter().enumerate() {
        if i > 0 {
            current.push(' ');
        }
        current.push_str(&normalize_text(text));
        if *wildcard {
            segments.push(Segment {
                literal: std::mem::take(&mut current),
                wildcard: true,
            });
        }
    }
    if !current.is_empty() {
        segments.push(Segment {
            literal: current,
            wildcard: false,
        });
    }
    segments
}

fn render(segments: &[Segment]) -> String {
    let mut out = String::new();
    for seg in segments {
        out.push_str(&seg.literal);
        if seg.wildcard {
            out.push('*');
        }
    }
    out
}

/// Expands a pattern into its literal alternatives, normalized, with `*`
/// wildcards kept in place. The cross product runs left to right: for each
/// existing alternative, every term of the next placeholder in file order.
pub fn expand_placeholders(
    pattern: &Pattern,
    conditions: &[Pattern],
    doctors: &[Pattern],
) -> Result<Vec<String>, PatternError> {
    Ok(expand_tokens(pattern, conditions, doctors)?
        .iter()
        .map(|alt| render(&to_segments(alt)))
        .collect())
}

/// What a span matched: an inclusion pattern, an exclusion pattern, a
/// condition term, or a doctor term.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum SpanKind {
    Inclusion,
    Exclusion,
    Condition,
    Doctor,
}

/// Byte-offset span into the matched (normalized) text. `pattern_id` is the
/// index into the pattern or term list of the given kind.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct MatchSpan {
    pub start: usize,
    pub end: usize,
    pub kind: SpanKind,
    pub pattern_id: usize,
}

#[derive(Debug, Clone)]
struct CompiledAlt {
    kind: SpanKind,
    pattern_id: usize,
    segments: Vec<Segment>,
    starts_word: bool,
    ends_word: bool,
}

fn end_of_word_run(text: &str, mut pos: usize) -> usize {
    for c in text[pos..].chars() {
        if !is_word_char(c) {
            break;
        }
        pos += c.len_utf8();
    }
    pos
}

impl CompiledAlt {
    fn new(kind: SpanKind, pattern_id: usize, segments: Vec<Segment>) -> CompiledAlt {
        let starts_word = segments
            .first()
            .and_then(|s| s.literal.chars().next())
            .is_some_and(is_word_char);
        let last = segments.last();
        let ends_word = match last {
            Some(s) if s.wildcard => false,
            Some(s) => s.literal.chars().next_back().is_some_and(is_word_char),
            None => false,
        };
        CompiledAlt {
            kind,
            pattern_id,
            segments,
            starts_word,
            ends_word,
        }
    }

    /// Checks a candidate whose first segment occupies `start..first_end`.
    /// Returns the span end on success.
    fn verify(&self, text: &str, start: usize, first_end: usize) -> Option<usize> {
        if self.starts_word && start > 0 {
            let prev = text[..start].chars().next_back()?;
            if is_word_char(prev) {
                return None;
            }
        }
        let mut pos = first_end;
        let mut rest = self.segments.iter();
        if rest.next().is_some_and(|first| first.wildcard) {
            pos = end_of_word_run(text, pos);
        }
        for seg in rest {
            if !text[pos..].starts_with(&seg.literal) {
                return None;
            }
            pos += seg.literal.len();
            if seg.wildcard {
                pos = end_of_word_run(text, pos);
            }
        }
        if self.ends_word {
            if let Some(next) = text[pos..].chars().next() {
                if is_word_char(next) {
                    return None;
                }
            }
        }
        Some(pos)
    }
}

/// All alternatives for one diagnosis label, compiled into a single
/// automaton pass plus per-candidate verification.
pub struct CompiledMatcher {
    label: String,
    alts: Vec<CompiledAlt>,
    automaton: aho_corasick::AhoCorasick,
}

impl fmt::Debug for CompiledMatcher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompiledMatcher")
            .field("label", &self.label)
            .field("n_alts", &self.alts.len())
            .finish()
    }
}

/// Compiles inclusion, exclusion, condition and doctor alternatives for
/// `label`. Alternatives with identical text within a kind collapse onto
/// the smallest pattern id.
pub fn compile_matcher(label: &str, set: &PatternSet) -> Result<CompiledMatcher, PatternError> {
    let conditions = set
        .condition_terms
        .get(label)
        .ok_or_else(|| PatternError::UnknownLabel(label.to_string()))?;
    if conditions.is_empty() {
        return Err(PatternError::EmptyList(format!("conditions/{label}")));
    }
    if set.inclusion.is_empty() {
        return Err(PatternError::EmptyList("inclusion".into()));
    }

    let mut alts: Vec<CompiledAlt> = Vec::new();
    let mut seen: BTreeMap<(SpanKind, String), ()> = BTreeMap::new();
    let mut add = |kind: SpanKind,
                   pattern_id: usize,
                   expansions: Vec<AltTokens>,
                   alts: &mut Vec<CompiledAlt>| {
        for alt in &expansions {
            let segments = to_segments(alt);
            if segments.is_empty() {
                continue;
            }
            let text = render(&segments);
            if seen.insert((kind, text), ()).is_none() {
                alts.push(CompiledAlt::new(kind, pattern_id, segments));
            }
        }
    };

    for (i, term) in conditions.iter().enumerate() {
        add(SpanKind::Condition, i, expand_tokens(term, &[], &[])?, &mut alts);
    }
    for (i, pat) in set.inclusion.iter().enumerate() {
        add(
            SpanKind::Inclusion,
            i,
            expand_tokens(pat, conditions, &set.doctor_terms)?,
            &mut alts,
        );
    }
    for (i, pat) in set.exclusion.iter().enumerate() {
        add(
            SpanKind::Exclusion,
            i,
            expand_tokens(pat, conditions, &set.doctor_terms)?,
            &mut alts,
        );
    }
    for (i, term) in set.doctor_terms.iter().enumerate() {
        add(SpanKind::Doctor, i, expand_tokens(term, &[], &[])?, &mut alts);
    }

    let automaton = aho_corasick::AhoCorasick::new(
        alts.iter().map(|a| a.segments[0].literal.as_str()),
    )
    .map_err(|e| PatternError::Build(e.to_string()))?;

    Ok(CompiledMatcher {
        label: label.to_string(),
        alts,
        automaton,
    })
}

impl CompiledMatcher {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn n_alternatives(&self, kind: SpanKind) -> usize {
        self.alts.iter().filter(|a| a.kind == kind).count()
    }

    /// Finds every pattern occurrence in `text`, including overlapping
    /// ones. `text` is matched as-is and is expected to be in normalized
    /// form. Output is sorted by (start, end, kind, pattern id) and free of
    /// exact duplicates.
    pub fn find_matches(&self, text: &str) -> Vec<MatchSpan> {
        let mut out = Vec::new();
        for m in self.automaton.find_overlapping_iter(text) {
            let alt = &self.alts[m.pattern().as_usize()];
            if let Some(end) = alt.verify(text, m.start(), m.end()) {
                out.push(MatchSpan {
                    start: m.start(),
                    end,
                    kind: alt.kind,
                    pattern_id: alt.pattern_id,
                });
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Characters strictly between two spans; overlapping or adjacent spans are
/// at distance 0.
pub fn char_distance(text: &str, a: &MatchSpan, b: &MatchSpan) -> usize {
    if a.start < b.end && b.start < a.end {
        return 0;
    }
    let (lo, hi) = if a.end <= b.start {
        (a.end, b.start)
    } else {
        (b.end, a.start)
    };
    text[lo..hi].chars().count()
}

/// The closest (condition, inclusion) pair, ties broken by the earlier
/// condition span then the earlier inclusion span.
pub fn closest_pair<'a>(
    text: &str,
    conditions: &'a [MatchSpan],
    inclusions: &'a [MatchSpan],
) -> Option<(usize, &'a MatchSpan, &'a MatchSpan)> {
    let mut best: Option<(usize, &MatchSpan, &MatchSpan)> = None;
    for c in conditions {
        for i in inclusions {
            let d = char_distance(text, c, i);
            let better = match best {
                None => true,
                Some((bd, bc, bi)) => {
                    (d, c.start, c.end, i.start, i.end) < (bd, bc.start, bc.end, bi.start, bi.end)
                }
            };
            if better {
                best = Some((d, c, i));
            }
        }
    }
    best
}

/// True when some condition span lies strictly closer than `threshold`
/// characters to some inclusion span. A threshold of 0 can never be
/// satisfied.
pub fn proximity_satisfied(
    text: &str,
    conditions: &[MatchSpan],
    inclusions: &[MatchSpan],
    threshold: usize,
) -> bool {
    closest_pair(text, conditions, inclusions).is_some_and(|(d, _, _)| d < threshold)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lit(text: &str, wildcard: bool) -> PatternToken {
        PatternToken::Literal {
            text: text.into(),
            wildcard,
        }
    }

    #[test]
    fn parses_tokens_and_placeholders() {
        let pats = parse_pattern_file("diagnosed with CONDITION\nmy DOCTOR diagnos* me").unwrap();
        assert_eq!(
            pats[0].tokens,
            vec![lit("diagnosed", false), lit("with", false), PatternToken::Condition]
        );
        assert_eq!(
            pats[1].tokens,
            vec![
                lit("my", false),
                PatternToken::Doctor,
                lit("diagnos", true),
                lit("me", false)
            ]
        );
        assert_eq!(pats[0].raw, "diagnosed with CONDITION");
    }

    #[test]
    fn skips_comments_and_blanks() {
        let pats = parse_pattern_file("# header\n\n  diagnosed\n   # another\n").unwrap();
        assert_eq!(pats.len(), 1);
        assert_eq!(pats[0].raw, "diagnosed");
    }

    #[test]
    fn rejects_bad_wildcards_with_line_numbers() {
        match parse_pattern_file("fine\nfine too\nbro*ken") {
            Err(PatternError::WildcardPlacement { line: 3 }) => {}
            other => panic!("unexpected: {other:?}"),
        }
        assert!(matches!(
            parse_pattern_file("a *"),
            Err(PatternError::EmptyStem { line: 1 })
        ));
        assert!(matches!(
            parse_pattern_file("dou** ble"),
            Err(PatternError::WildcardPlacement { line: 1 })
        ));
    }

    #[test]
    fn rejects_unknown_placeholders() {
        match parse_pattern_file("prescribed MEDS today") {
            Err(PatternError::UnknownPlaceholder { line: 1, token }) => {
                assert_eq!(token, "MEDS")
            }
            other => panic!("unexpected: {other:?}"),
        }
        // single capitals and mixed case are ordinary literals
        assert!(parse_pattern_file("I was diagnosed").is_ok());
    }

    #[test]
    fn term_files_take_capitals_literally() {
        let terms = parse_term_file("BD-II\nBipolar\nmanic depression").unwrap();
        assert_eq!(terms.len(), 3);
        assert_eq!(terms[0].tokens, vec![lit("BD-II", false)]);
        assert_eq!(
            terms[2].tokens,
            vec![lit("manic", false), lit("depression", false)]
        );
    }

    fn terms(src: &str) -> Vec<Pattern> {
        parse_term_file(src).unwrap()
    }

    fn pat(src: &str) -> Pattern {
        parse_pattern_file(src).unwrap().remove(0)
    }

    #[test]
    fn expands_condition_terms() {
        let alts =
            expand_placeholders(&pat("diagnosed with CONDITION"), &terms("bipolar\nbd"), &[])
                .unwrap();
        assert_eq!(alts, vec!["diagnosed with bipolar", "diagnosed with bd"]);
    }

    #[test]
    fn expands_cross_product_in_order() {
        let alts = expand_placeholders(
            &pat("my DOCTOR diagnosed me with CONDITION"),
            &terms("bipolar\nbd"),
            &terms("doctor\npsychiatrist\ndr."),
        )
        .unwrap();
        assert_eq!(
            alts,
            vec![
                "my doctor diagnosed me with bipolar",
                "my doctor diagnosed me with bd",
                "my psychiatrist diagnosed me with bipolar",
                "my psychiatrist diagnosed me with bd",
                "my dr. diagnosed me with bipolar",
                "my dr. diagnosed me with bd",
            ]
        );
    }

    #[test]
    fn expansion_counts_scale_with_term_lists() {
        let conds: String = (0..92).map(|i| format!("term{i}\n")).collect();
        let docs: String = (0..18).map(|i| format!("doc{i}\n")).collect();
        let alts =
            expand_placeholders(&pat("my recent CONDITION diagnos*"), &terms(&conds), &[]).unwrap();
        assert_eq!(alts.len(), 92);
        assert_eq!(alts[0], "my recent term0 diagnos*");
        let alts = expand_placeholders(
            &pat("DOCTOR says i have CONDITION"),
            &terms(&conds),
            &terms(&docs),
        )
        .unwrap();
        assert_eq!(alts.len(), 18 * 92);
    }

    #[test]
    fn expansion_without_placeholders_normalizes() {
        let alts = expand_placeholders(&pat("She\u{2019}s Diagnos* with it"), &[], &[]).unwrap();
        assert_eq!(alts, vec!["she's diagnos* with it"]);
    }

    #[test]
    fn expansion_requires_terms() {
        assert!(matches!(
            expand_placeholders(&pat("with CONDITION"), &[], &[]),
            Err(PatternError::NoTerms("CONDITION"))
        ));
        assert!(matches!(
            expand_placeholders(&pat("by DOCTOR"), &terms("bd"), &[]),
            Err(PatternError::NoTerms("DOCTOR"))
        ));
    }

    #[test]
    fn repeated_placeholder_multiplies() {
        let alts =
            expand_placeholders(&pat("CONDITION or CONDITION"), &terms("a\nb"), &[]).unwrap();
        assert_eq!(alts, vec!["a or a", "a or b", "b or a", "b or b"]);
    }

    fn demo_set() -> PatternSet {
        PatternSet::from_texts(
            "i was diagnos*\na diagnosis of\ndiagnos* with CONDITION\nmy DOCTOR diagnosed me",
            "she's diagnos*\nundiagnos*",
            "doctor\npsychiatrist",
            &[
                ("bd", "bipolar\nmanic depression\nbd\nbd-ii"),
                ("mdd", "depression\nmdd"),
            ],
        )
        .unwrap()
    }

    fn spans_of<'a>(text: &'a str, spans: &[MatchSpan], kind: SpanKind) -> Vec<&'a str> {
        spans
            .iter()
            .filter(|s| s.kind == kind)
            .map(|s| &text[s.start..s.end])
            .collect()
    }

    #[test]
    fn matches_plain_inclusion_and_condition() {
        let m = compile_matcher("bd", &demo_set()).unwrap();
        let text = "as someone with a diagnosis of bipolar disorder";
        let spans = m.find_matches(text);
        assert_eq!(
            spans_of(text, &spans, SpanKind::Inclusion),
            vec!["a diagnosis of"]
        );
        assert_eq!(spans_of(text, &spans, SpanKind::Condition), vec!["bipolar"]);
    }

    #[test]
    fn wildcard_extends_over_word_characters() {
        let m = compile_matcher("bd", &demo_set()).unwrap();
        for (text, want) in [
            ("i was diagnosed last year", "i was diagnosed"),
            ("i was diagnosable maybe", "i was diagnosable"),
            ("i was diagnos", "i was diagnos"),
        ] {
            let spans = m.find_matches(text);
            assert_eq!(
                spans_of(text, &spans, SpanKind::Inclusion),
                vec![want],
                "text: {text}"
            );
        }
    }

    #[test]
    fn wildcard_stops_at_non_word_characters() {
        let m = compile_matcher("bd", &demo_set()).unwrap();
        let text = "diagnostic-testing with bipolar";
        // the wildcard run ends at `-`, so ` with bipolar` cannot follow
        let spans = m.find_matches(text);
        assert!(spans_of(text, &spans, SpanKind::Inclusion).is_empty());
        let text = "diagnosed with bipolar";
        let spans = m.find_matches(text);
        assert_eq!(
            spans_of(text, &spans, SpanKind::Inclusion),
            vec!["diagnosed with bipolar"]
        );
    }

    #[test]
    fn start_anchor_blocks_mid_word_hits() {
        let m = compile_matcher("bd", &demo_set()).unwrap();
        let spans = m.find_matches("undiagnosed so far");
        assert!(spans.iter().all(|s| s.kind == SpanKind::Exclusion));
        assert_eq!(spans.len(), 1);
        let spans = m.find_matches("misdiagnosed with bipolar");
        assert!(spans_of("misdiagnosed with bipolar", &spans, SpanKind::Inclusion).is_empty());
    }

    #[test]
    fn end_anchor_blocks_longer_words() {
        let m = compile_matcher("bd", &demo_set()).unwrap();
        for text in ["bds are here", "abd here", "bd_tag", "bd9"] {
            let spans = m.find_matches(text);
            assert!(
                spans_of(text, &spans, SpanKind::Condition).is_empty(),
                "text: {text}"
            );
        }
        for text in ["bd", "bd.", "my bd flared", "(bd)"] {
            let spans = m.find_matches(text);
            assert_eq!(
                spans_of(text, &spans, SpanKind::Condition),
                vec!["bd"],
                "text: {text}"
            );
        }
    }

    #[test]
    fn hyphenated_terms_anchor_on_word_edges() {
        let m = compile_matcher("bd", &demo_set()).unwrap();
        let text = "i have bd-ii now";
        let spans = m.find_matches(text);
        assert_eq!(
            spans_of(text, &spans, SpanKind::Condition),
            vec!["bd", "bd-ii"]
        );
        let text = "bd-iii maybe";
        let spans = m.find_matches(text);
        assert_eq!(spans_of(text, &spans, SpanKind::Condition), vec!["bd"]);
    }

    #[test]
    fn multiword_terms_match() {
        let m = compile_matcher("bd", &demo_set()).unwrap();
        let text = "living with manic depression daily";
        let spans = m.find_matches(text);
        assert_eq!(
            spans_of(text, &spans, SpanKind::Condition),
            vec!["manic depression"]
        );
    }

    #[test]
    fn overlapping_spans_are_all_reported() {
        let set = PatternSet::from_texts(
            "a diagnosis of",
            "",
            "",
            &[("bd", "bipolar\nbipolar ii")],
        )
        .unwrap();
        let m = compile_matcher("bd", &set).unwrap();
        let text = "a diagnosis of bipolar ii";
        let conds: Vec<MatchSpan> = m
            .find_matches(text)
            .into_iter()
            .filter(|s| s.kind == SpanKind::Condition)
            .collect();
        assert_eq!(conds.len(), 2);
        assert_eq!(&text[conds[0].start..conds[0].end], "bipolar");
        assert_eq!(&text[conds[1].start..conds[1].end], "bipolar ii");
        assert_eq!(conds[0].start, conds[1].start);
    }

    #[test]
    fn unfolded_curly_text_matches_after_normalization() {
        let m = compile_matcher("bd", &demo_set()).unwrap();
        let raw = "She\u{2019}s diagnosed with bipolar";
        let text = normalize_text(raw);
        let spans = m.find_matches(&text);
        assert_eq!(
            spans_of(&text, &spans, SpanKind::Exclusion),
            vec!["she's diagnosed"]
        );
    }

    #[test]
    fn matching_is_case_sensitive_on_purpose() {
        // callers normalize first; raw uppercase text does not match
        let m = compile_matcher("bd", &demo_set()).unwrap();
        assert!(m.find_matches("I WAS DIAGNOSED WITH BIPOLAR").is_empty());
        assert!(!m
            .find_matches(&normalize_text("I WAS DIAGNOSED WITH BIPOLAR"))
            .is_empty());
    }

    #[test]
    fn doctor_terms_surface_as_spans() {
        let m = compile_matcher("bd", &demo_set()).unwrap();
        let text = "my psychiatrist diagnosed me with bd";
        let spans = m.find_matches(text);
        assert_eq!(
            spans_of(text, &spans, SpanKind::Doctor),
            vec!["psychiatrist"]
        );
        // `diagnos* with bd` needs adjacency; `diagnosed me with bd` has
        // an extra word between the wildcard run and ` with`
        assert_eq!(
            spans_of(text, &spans, SpanKind::Inclusion),
            vec!["my psychiatrist diagnosed me"]
        );
    }

    #[test]
    fn duplicate_alternatives_keep_smallest_id() {
        let set = PatternSet::from_texts(
            "a diagnosis of\na diagnosis of",
            "",
            "",
            &[("bd", "bd")],
        )
        .unwrap();
        let m = compile_matcher("bd", &set).unwrap();
        let spans = m.find_matches("a diagnosis of bd");
        let incl: Vec<&MatchSpan> = spans
            .iter()
            .filter(|s| s.kind == SpanKind::Inclusion)
            .collect();
        assert_eq!(incl.len(), 1);
        assert_eq!(incl[0].pattern_id, 0);
    }

    #[test]
    fn output_is_sorted_and_unique() {
        let m = compile_matcher("bd", &demo_set()).unwrap();
        let text = "i was diagnosed with bipolar and bd after a diagnosis of manic depression";
        let spans = m.find_matches(text);
        let mut sorted = spans.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(spans, sorted);
        assert!(spans.len() >= 5);
    }

    #[test]
    fn alternative_counts_per_kind() {
        let m = compile_matcher("bd", &demo_set()).unwrap();
        assert_eq!(m.n_alternatives(SpanKind::Condition), 4);
        // 1 + 1 + 4 (CONDITION) + 2 (DOCTOR)
        assert_eq!(m.n_alternatives(SpanKind::Inclusion), 8);
        assert_eq!(m.n_alternatives(SpanKind::Exclusion), 2);
        assert_eq!(m.n_alternatives(SpanKind::Doctor), 2);
        assert_eq!(m.label(), "bd");
    }

    #[test]
    fn compile_rejects_missing_or_empty_lists() {
        let set = demo_set();
        assert!(matches!(
            compile_matcher("nope", &set),
            Err(PatternError::UnknownLabel(_))
        ));
        let empty_incl = PatternSet {
            inclusion: vec![],
            ..demo_set()
        };
        assert!(matches!(
            compile_matcher("bd", &empty_incl),
            Err(PatternError::EmptyList(_))
        ));
    }

    fn span(start: usize, end: usize) -> MatchSpan {
        MatchSpan {
            start,
            end,
            kind: SpanKind::Condition,
            pattern_id: 0,
        }
    }

    #[test]
    fn distance_counts_chars_between_spans() {
        let text = "abcdefghij";
        assert_eq!(char_distance(text, &span(0, 2), &span(5, 7)), 3);
        assert_eq!(char_distance(text, &span(5, 7), &span(0, 2)), 3);
        assert_eq!(char_distance(text, &span(0, 5), &span(5, 7)), 0);
    }

    #[test]
    fn distance_is_zero_for_overlap_and_nesting() {
        let text = "abcdefghij";
        assert_eq!(char_distance(text, &span(0, 6), &span(4, 8)), 0);
        assert_eq!(char_distance(text, &span(0, 9), &span(2, 4)), 0);
        assert_eq!(char_distance(text, &span(2, 4), &span(0, 9)), 0);
    }

    #[test]
    fn distance_counts_chars_not_bytes() {
        let text = "aé ééé xb";
        let a = span(0, 1);
        let b = span(text.find('x').unwrap(), text.find('x').unwrap() + 1);
        // between: "é ééé " = 6 chars, 10 bytes
        assert_eq!(char_distance(text, &a, &b), 6);
    }

    #[test]
    fn proximity_threshold_is_strict() {
        let text = "abcdefghij";
        let conds = [span(0, 2)];
        let incls = [span(7, 9)];
        assert!(proximity_satisfied(text, &conds, &incls, 6));
        assert!(!proximity_satisfied(text, &conds, &incls, 5));
        assert!(!proximity_satisfied(text, &conds, &incls, 0));
        assert!(!proximity_satisfied(text, &[], &incls, 55));
        assert!(!proximity_satisfied(text, &conds, &[], 55));
    }

    #[test]
    fn closest_pair_prefers_smaller_distance_then_position() {
        let text = "abcdefghijklmnopqrstuvwxyz";
        let conds = [span(0, 1), span(10, 11)];
        let incls = [span(13, 14), span(20, 21)];
        let (d, c, i) = closest_pair(text, &conds, &incls).unwrap();
        assert_eq!(d, 2);
        assert_eq!(c.start, 10);
        assert_eq!(i.start, 13);
    }
}
