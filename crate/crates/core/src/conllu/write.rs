use std::fmt::Write;

use super::{TokenLine, TreebankFile};

/// Emits CoNLL-U text: comments, token lines, and a blank line after each sentence.
pub fn serialize_conllu(file: &TreebankFile) -> String {
    let mut out = String::new();
    for sentence in &file.sentences {
        for comment in &sentence.comments {
            out.push_str(comment);
            out.push('\n');
        }
        for token in &sentence.tokens {
            write_token(&mut out, token);
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

fn write_token(out: &mut String, token: &TokenLine) {
    // Writing into a String cannot fail.
    match token {
        TokenLine::Word(w) => {
            let head = w.head.map(|h| h.to_string());
            let _ = write!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                w.id,
                w.form,
                w.lemma,
                w.upos,
                w.xpos,
                w.feats,
                head.as_deref().unwrap_or("_"),
                w.deprel,
                w.deps,
                w.misc
            );
        }
        TokenLine::Multiword(m) => {
            let _ = write!(out, "{}-{}\t{}", m.first, m.last, m.form);
            for col in &m.other {
                out.push('\t');
                out.push_str(col);
            }
            out.push('\t');
            out.push_str(&m.misc);
        }
        TokenLine::Empty(e) => {
            let _ = write!(out, "{}.{}", e.major, e.minor);
            for col in &e.columns {
                out.push('\t');
                out.push_str(col);
            }
        }
    }
}
