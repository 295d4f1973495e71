//! Relation and feature inventories of the CoNLL 2018 shared-task evaluator
//! (conll18_ud_eval.py v1.2), copied verbatim.

pub const CONTENT_DEPRELS: &[&str] = &[
    "nsubj", "obj", "iobj", "csubj", "ccomp", "xcomp", "obl", "vocative", "expl", "dislocated",
    "advcl", "advmod", "discourse", "nmod", "appos", "nummod", "acl", "amod", "conj", "fixed",
    "flat", "compound", "list", "parataxis", "orphan", "goeswith", "reparandum", "root", "dep",
];

pub const FUNCTIONAL_DEPRELS: &[&str] = &["aux", "cop", "mark", "det", "clf", "case", "cc"];

pub const UNIVERSAL_FEATURES: &[&str] = &[
    "PronType", "NumType", "Poss", "Reflex", "Foreign", "Abbr", "Gender", "Animacy", "Number",
    "Case", "Definite", "Degree", "VerbForm", "Mood", "Tense", "Aspect", "Voice", "Evident",
    "Polarity", "Person", "Polite",
];

/// Unicode general category Zs; removed from forms before building characters.
pub(crate) fn is_space_separator(c: char) -> bool {
    matches!(
        c,
        '\u{0020}' | '\u{00A0}' | '\u{1680}' | '\u{2000}'..='\u{200A}' | '\u{202F}' | '\u{205F}' | '\u{3000}'
    )
}

pub(crate) fn universal_part(deprel: &str) -> &str {
    deprel.split(':').next().unwrap_or(deprel)
}

pub(crate) fn is_content(universal_deprel: &str) -> bool {
    CONTENT_DEPRELS.contains(&universal_deprel)
}

pub(crate) fn is_functional(universal_deprel: &str) -> bool {
    FUNCTIONAL_DEPRELS.contains(&universal_deprel)
}
