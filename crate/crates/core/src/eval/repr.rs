use serde::{Deserialize, Serialize};

use super::ud::{is_content, is_functional, is_space_separator, universal_part, UNIVERSAL_FEATURES};
use super::EvalError;
use crate::conllu::{TokenLine, TreebankFile, Word, UNDERSCORE};

/// Half-open character range over the space-free surface text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

impl CharSpan {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }
}

/// How FEATS are normalised before UFeats, AllTags and MLAS comparisons.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatsMode {
    /// Keep only the universal feature inventory, sorted; the reference behaviour.
    #[default]
    Universal,
    /// Keep every pair, sorted case-insensitively by key.
    AllSorted,
    /// Compare the column text as written.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EvalHead {
    Root,
    Word(usize),
    /// HEAD was `_`; never counts as correct.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalWord {
    /// For multiword parts, the span of the whole token.
    pub span: CharSpan,
    pub is_multiword_part: bool,
    pub form: String,
    pub(crate) folded_form: String,
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    /// Normalised according to the [`FeatsMode`] in use.
    pub feats: String,
    /// Index into the representation's `words`.
    pub head: EvalHead,
    pub deprel: String,
    /// DEPREL up to the first `:`.
    pub content_deprel: String,
    pub is_content: bool,
    pub is_functional: bool,
    /// Functional-relation dependents, in word order.
    pub functional_children: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalRepresentation {
    pub characters: Vec<char>,
    pub token_spans: Vec<CharSpan>,
    pub sentence_spans: Vec<CharSpan>,
    pub words: Vec<EvalWord>,
}

/// Builds the span and word view of a treebank that every metric works on.
/// Empty nodes are skipped.
pub fn build_representation(file: &TreebankFile, feats_mode: FeatsMode) -> Result<EvalRepresentation, EvalError> {
    let mut repr = EvalRepresentation {
        characters: Vec::new(),
        token_spans: Vec::new(),
        sentence_spans: Vec::new(),
        words: Vec::new(),
    };

    for (s_idx, sentence) in file.sentences.iter().enumerate() {
        let sentence_start_char = repr.characters.len();
        let first_word = repr.words.len();
        let sentence_len = sentence.word_count();
        // Span of the open multiword token and the last word id it covers.
        let mut open_range: Option<(CharSpan, u32)> = None;

        for token in &sentence.tokens {
            match token {
                TokenLine::Empty(_) => {}
                TokenLine::Multiword(m) => {
                    let span = push_surface(&mut repr, &m.form).ok_or(EvalError::EmptyForm {
                        sentence: s_idx + 1,
                        token: m.form.clone(),
                    })?;
                    open_range = Some((span, m.last));
                }
                TokenLine::Word(w) => {
                    let (span, is_part, form) = match open_range {
                        Some((span, last)) => {
                            if w.id >= last {
                                open_range = None;
                            }
                            (span, true, w.form.clone())
                        }
                        None => {
                            let span = push_surface(&mut repr, &w.form).ok_or(EvalError::EmptyForm {
                                sentence: s_idx + 1,
                                token: w.form.clone(),
                            })?;
                            let stripped: String = w.form.chars().filter(|&c| !is_space_separator(c)).collect();
                            (span, false, stripped)
                        }
                    };
                    repr.words.push(make_word(w, span, is_part, form, (first_word, sentence_len), feats_mode));
                }
            }
        }
        if repr.words.len() > first_word {
            repr.sentence_spans.push(CharSpan::new(sentence_start_char, repr.characters.len()));
        }
        link_functional_children(&mut repr.words[first_word..], first_word);
    }

    if repr.words.is_empty() {
        return Err(EvalError::EmptyRepresentation);
    }
    Ok(repr)
}

fn push_surface(repr: &mut EvalRepresentation, form: &str) -> Option<CharSpan> {
    let start = repr.characters.len();
    repr.characters.extend(form.chars().filter(|&c| !is_space_separator(c)));
    let end = repr.characters.len();
    if end == start {
        return None;
    }
    repr.token_spans.push(CharSpan::new(start, end));
    Some(CharSpan::new(start, end))
}

fn make_word(w: &Word, span: CharSpan, is_part: bool, form: String, sentence: (usize, usize), mode: FeatsMode) -> EvalWord {
    let (offset, len) = sentence;
    let content_deprel = universal_part(&w.deprel).to_string();
    EvalWord {
        span,
        is_multiword_part: is_part,
        folded_form: form.to_lowercase(),
        form,
        lemma: w.lemma.clone(),
        upos: w.upos.clone(),
        xpos: w.xpos.clone(),
        feats: normalise_feats(w, mode),
        head: match w.head {
            None => EvalHead::Unknown,
            Some(0) => EvalHead::Root,
            Some(h) if h as usize <= len => EvalHead::Word(offset + h as usize - 1),
            Some(_) => EvalHead::Unknown,
        },
        deprel: w.deprel.clone(),
        is_content: is_content(&content_deprel),
        is_functional: is_functional(&content_deprel),
        content_deprel,
        functional_children: Vec::new(),
    }
}

fn normalise_feats(w: &Word, mode: FeatsMode) -> String {
    match mode {
        FeatsMode::Raw => w.feats.as_str().to_string(),
        FeatsMode::AllSorted => w
            .feats
            .pairs()
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join("|"),
        FeatsMode::Universal => {
            if w.feats.as_str() == UNDERSCORE {
                return String::new();
            }
            let mut kept: Vec<&str> = w
                .feats
                .as_str()
                .split('|')
                .filter(|f| UNIVERSAL_FEATURES.contains(&f.split('=').next().unwrap_or(f)))
                .collect();
            kept.sort_unstable();
            kept.join("|")
        }
    }
}

fn link_functional_children(words: &mut [EvalWord], offset: usize) {
    for i in 0..words.len() {
        if let EvalHead::Word(parent) = words[i].head {
            if words[i].is_functional {
                words[parent - offset].functional_children.push(offset + i);
            }
        }
    }
}
