//! Typed CoNLL-U document model.
//!
//! Parsing is strict about structure (column count, id sequence, multiword
//! ranges, head bounds) and lenient about annotation: any column except ID
//! and FORM may be `_`, so partial-task predictions still load. Gold-level
//! requirements are checked separately by [`validate_treebank`].

mod parse;
mod validate;
mod write;

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

pub use parse::{parse_conllu, ParseError};
pub use validate::{validate_treebank, ValidationIssue, ValidationMode, ValidationReport};
pub use write::serialize_conllu;

/// The `_` placeholder used for unannotated columns.
pub const UNDERSCORE: &str = "_";

/// Machine-readable problem codes shared by the parser and the validator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorCode {
    MalformedLine,
    BadIdSequence,
    BadHead,
    BadRange,
    EmptyFile,
    EmptyForm,
    MissingAnnotation,
    NoRoot,
    MultipleRoots,
    Cycle,
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A parsed treebank, in input order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TreebankFile {
    pub source_name: String,
    pub sentences: Vec<Sentence>,
}

impl TreebankFile {
    pub fn new(source_name: impl Into<String>, sentences: Vec<Sentence>) -> Self {
        Self {
            source_name: source_name.into(),
            sentences,
        }
    }

    pub fn word_count(&self) -> usize {
        self.sentences.iter().map(Sentence::word_count).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Sentence {
    /// Full comment lines, including the leading `#`.
    pub comments: Vec<String>,
    pub tokens: Vec<TokenLine>,
}

impl Sentence {
    pub fn words(&self) -> impl Iterator<Item = &Word> + '_ {
        self.tokens.iter().filter_map(|t| match t {
            TokenLine::Word(w) => Some(w),
            _ => None,
        })
    }

    pub fn word_count(&self) -> usize {
        self.words().count()
    }

    /// Value of a `# key = value` comment, if present.
    pub fn comment_value(&self, key: &str) -> Option<&str> {
        self.comments.iter().find_map(|line| comment_value(line, key))
    }

    /// True when a `# key` or `# key = ...` comment is present.
    pub fn has_comment_key(&self, key: &str) -> bool {
        self.comments.iter().any(|line| {
            let body = line.trim_start_matches('#').trim();
            body == key || comment_value(line, key).is_some()
        })
    }
}

fn comment_value<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let body = line.strip_prefix('#')?.trim_start();
    let (k, v) = body.split_once('=')?;
    (k.trim() == key).then(|| v.trim())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenLine {
    Word(Word),
    Multiword(MultiwordToken),
    Empty(EmptyNode),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word {
    pub id: u32,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    pub feats: Feats,
    /// `None` when the column is `_` (allowed in predictions only).
    pub head: Option<u32>,
    pub deprel: String,
    pub deps: String,
    pub misc: String,
}

impl Word {
    /// A word with every annotation column set to `_`.
    pub fn bare(id: u32, form: impl Into<String>) -> Self {
        Self {
            id,
            form: form.into(),
            lemma: UNDERSCORE.into(),
            upos: UNDERSCORE.into(),
            xpos: UNDERSCORE.into(),
            feats: Feats::default(),
            head: None,
            deprel: UNDERSCORE.into(),
            deps: UNDERSCORE.into(),
            misc: UNDERSCORE.into(),
        }
    }
}

/// An orthographic token spanning words `first..=last`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiwordToken {
    pub first: u32,
    pub last: u32,
    pub form: String,
    /// Columns LEMMA through DEPS, normally all `_`.
    pub other: [String; 7],
    pub misc: String,
}

impl MultiwordToken {
    pub fn new(first: u32, last: u32, form: impl Into<String>) -> Self {
        Self {
            first,
            last,
            form: form.into(),
            other: std::array::from_fn(|_| UNDERSCORE.to_string()),
            misc: UNDERSCORE.into(),
        }
    }
}

/// An enhanced-graph empty node (`k.m`), kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmptyNode {
    pub major: u32,
    pub minor: u32,
    /// Columns FORM through MISC.
    pub columns: [String; 9],
}

/// FEATS column text plus a lazily computed canonical pair list.
#[derive(Clone, Default)]
pub struct Feats {
    raw: String,
    pairs: OnceLock<Vec<(String, String)>>,
}

impl Feats {
    pub fn new(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        Self {
            raw: if raw.is_empty() { UNDERSCORE.into() } else { raw },
            pairs: OnceLock::new(),
        }
    }

    pub fn as_str(&self) -> &str {
        if self.raw.is_empty() {
            UNDERSCORE
        } else {
            &self.raw
        }
    }

    pub fn is_empty(&self) -> bool {
        self.as_str() == UNDERSCORE
    }

    /// `Key=Value` pairs sorted case-insensitively by key, then by key and value.
    pub fn pairs(&self) -> &[(String, String)] {
        self.pairs.get_or_init(|| {
            if self.is_empty() {
                return Vec::new();
            }
            let mut pairs: Vec<(String, String)> = self
                .raw
                .split('|')
                .map(|item| match item.split_once('=') {
                    Some((k, v)) => (k.to_string(), v.to_string()),
                    None => (item.to_string(), String::new()),
                })
                .collect();
            pairs.sort_by(|a, b| {
                a.0.to_lowercase()
                    .cmp(&b.0.to_lowercase())
                    .then_with(|| a.0.cmp(&b.0))
                    .then_with(|| a.1.cmp(&b.1))
            });
            pairs
        })
    }
}

impl PartialEq for Feats {
    fn eq(&self, other: &Self) -> bool {
        self.as_str() == other.as_str()
    }
}

impl Eq for Feats {}

impl fmt::Debug for Feats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Feats({:?})", self.as_str())
    }
}

impl fmt::Display for Feats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<&str> for Feats {
    fn from(raw: &str) -> Self {
        Feats::new(raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feats_canonical_order_ignores_key_case() {
        let f = Feats::new("Number=Sing|case=Nom|Aspect=Imp");
        let keys: Vec<_> = f.pairs().iter().map(|(k, _)| k.as_str()).collect();
        assert_eq!(keys, ["Aspect", "case", "Number"]);
    }

    #[test]
    fn empty_feats_normalise_to_underscore() {
        assert_eq!(Feats::new("").as_str(), "_");
        assert!(Feats::new("_").pairs().is_empty());
    }

    #[test]
    fn comment_lookup() {
        let s = Sentence {
            comments: vec!["# newpar id = p1".into(), "# newdoc".into()],
            tokens: vec![],
        };
        assert_eq!(s.comment_value("newpar id"), Some("p1"));
        assert!(s.has_comment_key("newdoc"));
        assert!(!s.has_comment_key("sent_id"));
    }
}
