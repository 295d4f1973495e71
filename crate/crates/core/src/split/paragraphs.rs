use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::SplitError;
use crate::conllu::{Sentence, TreebankFile};

/// An indivisible sampling unit: consecutive sentences between paragraph markers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Paragraph {
    pub id: String,
    pub document_id: String,
    pub document_type: String,
    /// Number of syntactic words in `payload`.
    pub segment_count: usize,
    pub payload: Vec<Sentence>,
}

/// Comment keys that mark paragraphs, documents and document types.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryKeys {
    pub paragraph: String,
    pub document: String,
    pub document_type: String,
}

impl Default for BoundaryKeys {
    fn default() -> Self {
        Self {
            paragraph: "newpar".into(),
            document: "newdoc".into(),
            document_type: "doc_type".into(),
        }
    }
}

/// `# key`, `# key id = X` or `# key = X`; yields the optional identifier.
fn marker(line: &str, key: &str) -> Option<Option<String>> {
    let body = line.strip_prefix('#')?.trim();
    let rest = body.strip_prefix(key)?;
    if !(rest.is_empty() || rest.starts_with(char::is_whitespace) || rest.starts_with('=')) {
        return None;
    }
    let rest = rest.trim_start();
    let rest = rest.strip_prefix("id").map(str::trim_start).unwrap_or(rest);
    Some(rest.strip_prefix('=').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()))
}

fn find_marker(sentence: &Sentence, key: &str) -> Option<Option<String>> {
    sentence.comments.iter().find_map(|c| marker(c, key))
}

/// Groups sentences into paragraphs. A new document also starts a new paragraph.
pub fn extract_paragraphs(corpus: &TreebankFile, keys: &BoundaryKeys) -> Result<Vec<Paragraph>, SplitError> {
    let mut paragraphs: Vec<Paragraph> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut doc_id = String::new();
    let mut doc_type = String::new();
    let mut doc_count = 0usize;
    let has_markers = corpus
        .sentences
        .iter()
        .any(|s| find_marker(s, &keys.paragraph).is_some());
    if !has_markers {
        return Err(SplitError::MissingBoundaryMetadata(keys.paragraph.clone()));
    }

    for (idx, sentence) in corpus.sentences.iter().enumerate() {
        let new_doc = find_marker(sentence, &keys.document);
        if let Some(id) = &new_doc {
            doc_count += 1;
            doc_id = id.clone().unwrap_or_else(|| format!("doc{doc_count}"));
            doc_type.clear();
        }
        if let Some(t) = find_marker(sentence, &keys.document_type).flatten() {
            doc_type = t;
        }
        let new_par = find_marker(sentence, &keys.paragraph);

        if new_par.is_some() || new_doc.is_some() {
            let id = new_par
                .flatten()
                .unwrap_or_else(|| format!("{doc_id}-p{}", paragraphs.len() + 1));
            if !seen.insert(id.clone()) {
                return Err(SplitError::DuplicateParagraphId(id));
            }
            paragraphs.push(Paragraph {
                id,
                document_id: doc_id.clone(),
                document_type: doc_type.clone(),
                segment_count: 0,
                payload: Vec::new(),
            });
        }
        let Some(current) = paragraphs.last_mut() else {
            return Err(SplitError::UnboundedSentence(idx + 1));
        };
        if current.document_type.is_empty() {
            current.document_type = doc_type.clone();
        }
        current.segment_count += sentence.word_count();
        current.payload.push(sentence.clone());
    }

    if paragraphs.is_empty() {
        return Err(SplitError::EmptyCorpus);
    }
    Ok(paragraphs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::{TokenLine, Word};

    fn sentence(comments: &[&str], words: usize) -> Sentence {
        Sentence {
            comments: comments.iter().map(|c| c.to_string()).collect(),
            tokens: (1..=words as u32).map(|i| TokenLine::Word(Word::bare(i, "x"))).collect(),
        }
    }

    fn corpus(sentences: Vec<Sentence>) -> TreebankFile {
        TreebankFile::new("c", sentences)
    }

    #[test]
    fn marker_forms() {
        assert_eq!(marker("# newpar id = p1", "newpar"), Some(Some("p1".into())));
        assert_eq!(marker("# newpar", "newpar"), Some(None));
        assert_eq!(marker("# newpar = p2", "newpar"), Some(Some("p2".into())));
        assert_eq!(marker("# newparagraph", "newpar"), None);
        assert_eq!(marker("# doc_type = publ", "doc_type"), Some(Some("publ".into())));
    }

    #[test]
    fn one_marker_three_sentences() {
        let c = corpus(vec![sentence(&["# newpar id = a"], 2), sentence(&[], 3), sentence(&[], 1)]);
        let p = extract_paragraphs(&c, &BoundaryKeys::default()).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].payload.len(), 3);
        assert_eq!(p[0].segment_count, 6);
    }

    #[test]
    fn two_markers() {
        let c = corpus(vec![
            sentence(&["# newdoc id = d1", "# doc_type = publ", "# newpar"], 2),
            sentence(&[], 3),
            sentence(&["# newpar"], 1),
        ]);
        let p = extract_paragraphs(&c, &BoundaryKeys::default()).unwrap();
        assert_eq!(p.iter().map(|p| p.payload.len()).collect::<Vec<_>>(), [2, 1]);
        assert_eq!(p[1].id, "d1-p2");
        assert!(p.iter().all(|p| p.document_type == "publ" && p.document_id == "d1"));
    }

    #[test]
    fn no_markers() {
        let c = corpus(vec![sentence(&["# sent_id = 1"], 2)]);
        assert_eq!(
            extract_paragraphs(&c, &BoundaryKeys::default()).unwrap_err(),
            SplitError::MissingBoundaryMetadata("newpar".into())
        );
    }

    #[test]
    fn leading_unmarked_sentence() {
        let c = corpus(vec![sentence(&[], 2), sentence(&["# newpar"], 1)]);
        assert_eq!(
            extract_paragraphs(&c, &BoundaryKeys::default()).unwrap_err(),
            SplitError::UnboundedSentence(1)
        );
    }

    #[test]
    fn duplicate_ids() {
        let c = corpus(vec![sentence(&["# newpar id = a"], 1), sentence(&["# newpar id = a"], 1)]);
        assert!(matches!(
            extract_paragraphs(&c, &BoundaryKeys::default()),
            Err(SplitError::DuplicateParagraphId(_))
        ));
    }
}
