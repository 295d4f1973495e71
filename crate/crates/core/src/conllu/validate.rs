use serde::{Deserialize, Serialize};

use super::{ErrorCode, Sentence, TokenLine, TreebankFile, UNDERSCORE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidationMode {
    /// Structure only; task columns may be `_`.
    Surface,
    /// Structure plus UPOS/HEAD/DEPREL and a well-formed tree.
    Full,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    /// 1-based sentence number.
    pub sentence: usize,
    /// 1-based line within the sentence block, comments included.
    pub line: usize,
    pub code: ErrorCode,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn first_code(&self) -> Option<ErrorCode> {
        self.errors.first().map(|e| e.code)
    }
}

/// Checks a document built in memory or parsed from text.
pub fn validate_treebank(file: &TreebankFile, mode: ValidationMode) -> ValidationReport {
    let mut report = ValidationReport::default();
    if file.sentences.is_empty() {
        report.errors.push(ValidationIssue {
            sentence: 0,
            line: 0,
            code: ErrorCode::EmptyFile,
            message: "no sentences".into(),
        });
        return report;
    }
    for (idx, sentence) in file.sentences.iter().enumerate() {
        let mut ctx = Ctx {
            sentence: idx + 1,
            offset: sentence.comments.len(),
            errors: &mut report.errors,
        };
        let structural_ok = check_structure(sentence, &mut ctx);
        if mode == ValidationMode::Full && structural_ok {
            check_annotation(sentence, &mut ctx);
        }
    }
    report
}

struct Ctx<'a> {
    sentence: usize,
    offset: usize,
    errors: &'a mut Vec<ValidationIssue>,
}

impl Ctx<'_> {
    fn push(&mut self, token_idx: usize, code: ErrorCode, message: String) {
        self.errors.push(ValidationIssue {
            sentence: self.sentence,
            line: self.offset + token_idx + 1,
            code,
            message,
        });
    }
}

fn check_structure(sentence: &Sentence, ctx: &mut Ctx<'_>) -> bool {
    let before = ctx.errors.len();
    let n = sentence.word_count() as u32;
    if n == 0 {
        ctx.push(0, ErrorCode::BadIdSequence, "sentence has no words".into());
        return false;
    }
    let mut next_id = 1u32;
    let mut range_end = 0u32;
    for (i, token) in sentence.tokens.iter().enumerate() {
        match token {
            TokenLine::Word(w) => {
                if w.id != next_id {
                    ctx.push(i, ErrorCode::BadIdSequence, format!("expected word id {next_id}, found {}", w.id));
                }
                next_id = w.id.max(next_id) + 1;
                if w.form.is_empty() {
                    ctx.push(i, ErrorCode::EmptyForm, "empty FORM".into());
                }
                if let Some(h) = w.head {
                    if h > n {
                        ctx.push(i, ErrorCode::BadHead, format!("head {h} outside 0..{n}"));
                    }
                }
            }
            TokenLine::Multiword(m) => {
                if m.first > m.last || m.first <= range_end || m.first != next_id || m.last > n {
                    ctx.push(i, ErrorCode::BadRange, format!("invalid range {}-{}", m.first, m.last));
                }
                if m.form.is_empty() {
                    ctx.push(i, ErrorCode::EmptyForm, "empty FORM".into());
                }
                range_end = range_end.max(m.last);
            }
            TokenLine::Empty(e) => {
                if e.major + 1 != next_id || e.minor == 0 {
                    ctx.push(i, ErrorCode::BadIdSequence, format!("misplaced empty node {}.{}", e.major, e.minor));
                }
            }
        }
    }
    ctx.errors.len() == before
}

fn check_annotation(sentence: &Sentence, ctx: &mut Ctx<'_>) {
    let mut heads = Vec::new();
    let mut roots = Vec::new();
    let mut complete = true;
    for (i, token) in sentence.tokens.iter().enumerate() {
        let TokenLine::Word(w) = token else { continue };
        for (name, value) in [("UPOS", w.upos.as_str()), ("DEPREL", w.deprel.as_str())] {
            if value == UNDERSCORE || value.is_empty() {
                ctx.push(i, ErrorCode::MissingAnnotation, format!("word {} has no {name}", w.id));
            }
        }
        match w.head {
            None => {
                ctx.push(i, ErrorCode::MissingAnnotation, format!("word {} has no HEAD", w.id));
                complete = false;
            }
            Some(0) => roots.push(i),
            Some(_) => {}
        }
        heads.push((i, w.head.unwrap_or(0) as usize));
    }
    if !complete {
        return;
    }
    match roots.len() {
        0 => ctx.push(0, ErrorCode::NoRoot, "sentence has no root".into()),
        1 => {}
        _ => ctx.push(roots[1], ErrorCode::MultipleRoots, format!("{} roots", roots.len())),
    }
    // Every word must reach the root within n steps.
    let n = heads.len();
    for start in 0..n {
        let mut node = start + 1;
        let mut steps = 0;
        while node != 0 && steps <= n {
            node = heads[node - 1].1;
            steps += 1;
        }
        if node != 0 {
            ctx.push(heads[start].0, ErrorCode::Cycle, format!("word {} is on or under a cycle", start + 1));
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_conllu;
    use super::*;

    fn parse(text: &str) -> TreebankFile {
        parse_conllu(text).unwrap()
    }

    #[test]
    fn gold_full_ok() {
        let f = parse("1\tKot\tkot\tNOUN\tsubst\t_\t2\tnsubj\t_\t_\n2\tśpi\tspać\tVERB\tfin\t_\t0\troot\t_\t_\n");
        assert!(validate_treebank(&f, ValidationMode::Full).ok());
    }

    #[test]
    fn partial_prediction_passes_surface_only() {
        let f = parse("1\tKot\t_\tNOUN\t_\t_\t_\t_\t_\t_\n2\tśpi\t_\tVERB\t_\t_\t_\t_\t_\t_\n");
        assert!(validate_treebank(&f, ValidationMode::Surface).ok());
        let full = validate_treebank(&f, ValidationMode::Full);
        assert_eq!(full.first_code(), Some(ErrorCode::MissingAnnotation));
    }

    #[test]
    fn duplicated_id() {
        let mut f = parse("1\ta\t_\tX\t_\t_\t0\troot\t_\t_\n2\tb\t_\tX\t_\t_\t1\tdep\t_\t_\n");
        if let TokenLine::Word(w) = &mut f.sentences[0].tokens[1] {
            w.id = 1;
        }
        let report = validate_treebank(&f, ValidationMode::Surface);
        assert!(!report.ok());
        assert_eq!(report.first_code(), Some(ErrorCode::BadIdSequence));
    }

    #[test]
    fn tree_shape_errors() {
        let two_roots = parse("1\ta\t_\tX\t_\t_\t0\troot\t_\t_\n2\tb\t_\tX\t_\t_\t0\troot\t_\t_\n");
        assert_eq!(validate_treebank(&two_roots, ValidationMode::Full).first_code(), Some(ErrorCode::MultipleRoots));
        let cycle = parse("1\ta\t_\tX\t_\t_\t0\troot\t_\t_\n2\tb\t_\tX\t_\t_\t3\tdep\t_\t_\n3\tc\t_\tX\t_\t_\t2\tdep\t_\t_\n");
        assert_eq!(validate_treebank(&cycle, ValidationMode::Full).first_code(), Some(ErrorCode::Cycle));
        assert!(validate_treebank(&cycle, ValidationMode::Surface).ok());
    }

    #[test]
    fn line_numbers_count_comments() {
        let f = parse("# a\n# b\n1\ta\t_\t_\t_\t_\t0\troot\t_\t_\n");
        let report = validate_treebank(&f, ValidationMode::Full);
        assert_eq!(report.errors[0].line, 3);
    }
}
