use super::{EmptyNode, ErrorCode, Feats, MultiwordToken, Sentence, TokenLine, TreebankFile, Word};

/// A structural error with the 1-based input line it was detected on.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {code}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub code: ErrorCode,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            line,
            code,
            message: message.into(),
        }
    }
}

/// Parses CoNLL-U text. Accepts `\n` and `\r\n` line endings and a missing
/// final blank line.
pub fn parse_conllu(text: &str) -> Result<TreebankFile, ParseError> {
    let mut sentences = Vec::new();
    let mut builder = SentenceBuilder::default();
    let mut last_line = 0;

    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        last_line = line_no;
        if line.trim().is_empty() {
            if !builder.tokens.is_empty() {
                sentences.push(std::mem::take(&mut builder).finish()?);
            }
            continue;
        }
        if line.starts_with('#') {
            if !builder.tokens.is_empty() {
                return Err(ParseError::new(
                    line_no,
                    ErrorCode::MalformedLine,
                    "comment line inside a sentence",
                ));
            }
            builder.comments.push(line.to_string());
            continue;
        }
        builder.push_line(line_no, line)?;
    }
    if !builder.tokens.is_empty() {
        sentences.push(builder.finish()?);
    }
    if sentences.is_empty() {
        return Err(ParseError::new(
            last_line.max(1),
            ErrorCode::EmptyFile,
            "no sentences found",
        ));
    }
    Ok(TreebankFile {
        source_name: String::new(),
        sentences,
    })
}

#[derive(Default)]
struct SentenceBuilder {
    comments: Vec<String>,
    tokens: Vec<TokenLine>,
    /// Line numbers of word lines, for head errors reported at sentence end.
    word_lines: Vec<usize>,
    /// Last word id covered by the most recent multiword range.
    range_end: u32,
    range_line: usize,
}

impl SentenceBuilder {
    fn next_word_id(&self) -> u32 {
        self.word_lines.len() as u32 + 1
    }

    fn push_line(&mut self, line_no: usize, line: &str) -> Result<(), ParseError> {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(ParseError::new(
                line_no,
                ErrorCode::MalformedLine,
                format!("expected 10 tab-separated columns, found {}", cols.len()),
            ));
        }
        if cols[1].is_empty() {
            return Err(ParseError::new(line_no, ErrorCode::EmptyForm, "empty FORM column"));
        }
        let id = cols[0];
        if let Some((a, b)) = id.split_once('-') {
            self.push_range(line_no, a, b, &cols)
        } else if let Some((a, b)) = id.split_once('.') {
            self.push_empty(line_no, a, b, &cols)
        } else {
            self.push_word(line_no, id, &cols)
        }
    }

    fn push_word(&mut self, line_no: usize, id: &str, cols: &[&str]) -> Result<(), ParseError> {
        let expected = self.next_word_id();
        let id: u32 = parse_id(id).ok_or_else(|| {
            ParseError::new(line_no, ErrorCode::MalformedLine, format!("invalid word id '{id}'"))
        })?;
        if id != expected {
            return Err(ParseError::new(
                line_no,
                ErrorCode::BadIdSequence,
                format!("expected word id {expected}, found {id}"),
            ));
        }
        let head = match cols[6] {
            "_" => None,
            h => Some(parse_id_or_zero(h).ok_or_else(|| {
                ParseError::new(line_no, ErrorCode::BadHead, format!("invalid head '{h}'"))
            })?),
        };
        self.tokens.push(TokenLine::Word(Word {
            id,
            form: cols[1].to_string(),
            lemma: cols[2].to_string(),
            upos: cols[3].to_string(),
            xpos: cols[4].to_string(),
            feats: Feats::new(cols[5]),
            head,
            deprel: cols[7].to_string(),
            deps: cols[8].to_string(),
            misc: cols[9].to_string(),
        }));
        self.word_lines.push(line_no);
        Ok(())
    }

    fn push_range(&mut self, line_no: usize, a: &str, b: &str, cols: &[&str]) -> Result<(), ParseError> {
        let bad = |msg: String| ParseError::new(line_no, ErrorCode::BadRange, msg);
        let (first, last) = match (parse_id(a), parse_id(b)) {
            (Some(first), Some(last)) => (first, last),
            _ => return Err(bad(format!("invalid range '{a}-{b}'"))),
        };
        if first > last {
            return Err(bad(format!("range {first}-{last} is ill-ordered")));
        }
        if first <= self.range_end {
            return Err(bad(format!(
                "range {first}-{last} overlaps the previous range ending at {}",
                self.range_end
            )));
        }
        let expected = self.next_word_id();
        if first != expected {
            return Err(bad(format!(
                "range {first}-{last} must start at the next word id {expected}"
            )));
        }
        self.range_end = last;
        self.range_line = line_no;
        self.tokens.push(TokenLine::Multiword(MultiwordToken {
            first,
            last,
            form: cols[1].to_string(),
            other: std::array::from_fn(|i| cols[2 + i].to_string()),
            misc: cols[9].to_string(),
        }));
        Ok(())
    }

    fn push_empty(&mut self, line_no: usize, a: &str, b: &str, cols: &[&str]) -> Result<(), ParseError> {
        let (major, minor) = match (parse_id_or_zero(a), parse_id(b)) {
            (Some(major), Some(minor)) => (major, minor),
            _ => {
                return Err(ParseError::new(
                    line_no,
                    ErrorCode::MalformedLine,
                    format!("invalid empty node id '{a}.{b}'"),
                ))
            }
        };
        let current = self.next_word_id() - 1;
        if major != current {
            return Err(ParseError::new(
                line_no,
                ErrorCode::BadIdSequence,
                format!("empty node {major}.{minor} must follow word {major}, not word {current}"),
            ));
        }
        self.tokens.push(TokenLine::Empty(EmptyNode {
            major,
            minor,
            columns: std::array::from_fn(|i| cols[1 + i].to_string()),
        }));
        Ok(())
    }

    fn finish(self) -> Result<Sentence, ParseError> {
        let n = self.word_lines.len() as u32;
        if n == 0 {
            let line = self.range_line.max(1);
            return Err(ParseError::new(line, ErrorCode::BadIdSequence, "sentence has no words"));
        }
        if self.range_end > n {
            return Err(ParseError::new(
                self.range_line,
                ErrorCode::BadRange,
                format!("range ends at word {} but the sentence has {n} words", self.range_end),
            ));
        }
        for (token, &line) in self
            .tokens
            .iter()
            .filter_map(|t| match t {
                TokenLine::Word(w) => Some(w),
                _ => None,
            })
            .zip(&self.word_lines)
        {
            if let Some(h) = token.head {
                if h > n {
                    return Err(ParseError::new(
                        line,
                        ErrorCode::BadHead,
                        format!("head {h} outside 0..{n}"),
                    ));
                }
            }
        }
        Ok(Sentence {
            comments: self.comments,
            tokens: self.tokens,
        })
    }
}

/// Positive decimal integer without sign or leading zeros.
fn parse_id(s: &str) -> Option<u32> {
    if s.is_empty() || s.starts_with('0') || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

fn parse_id_or_zero(s: &str) -> Option<u32> {
    if s == "0" {
        Some(0)
    } else {
        parse_id(s)
    }
}
