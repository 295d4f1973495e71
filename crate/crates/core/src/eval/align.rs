use super::repr::{CharSpan, EvalRepresentation, EvalWord};
use super::EvalError;

/// Counts spans present with identical bounds in both sorted lists.
pub fn align_spans(gold: &[CharSpan], system: &[CharSpan]) -> usize {
    let (mut gi, mut si, mut correct) = (0, 0, 0);
    while gi < gold.len() && si < system.len() {
        if system[si].start < gold[gi].start {
            si += 1;
        } else if gold[gi].start < system[si].start {
            gi += 1;
        } else {
            correct += usize::from(gold[gi].end == system[si].end);
            gi += 1;
            si += 1;
        }
    }
    correct
}

/// Monotone, injective gold↔system word pairing.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Alignment {
    matched_pairs: Vec<(usize, usize)>,
    system_to_gold: Vec<Option<usize>>,
}

impl Alignment {
    pub fn new(system_len: usize) -> Self {
        Self {
            matched_pairs: Vec::new(),
            system_to_gold: vec![None; system_len],
        }
    }

    fn push(&mut self, gold: usize, system: usize) {
        self.matched_pairs.push((gold, system));
        self.system_to_gold[system] = Some(gold);
    }

    /// `(gold index, system index)` pairs, increasing in both coordinates.
    pub fn matched_pairs(&self) -> &[(usize, usize)] {
        &self.matched_pairs
    }

    pub fn gold_for_system(&self, system: usize) -> Option<usize> {
        self.system_to_gold.get(system).copied().flatten()
    }
}

/// Fails with the first differing character offset. The gold text itself is
/// never echoed, since gold files are confidential on the server.
pub fn check_characters(gold: &EvalRepresentation, system: &EvalRepresentation) -> Result<(), EvalError> {
    if gold.characters == system.characters {
        return Ok(());
    }
    let offset = gold
        .characters
        .iter()
        .zip(&system.characters)
        .take_while(|(g, s)| g == s)
        .count();
    Err(EvalError::MismatchedCharacters { offset })
}

/// Pairs words outside multiword tokens by identical spans and words inside a
/// multiword region by longest common subsequence over lowercased forms.
pub fn align_words(gold: &EvalRepresentation, system: &EvalRepresentation) -> Result<Alignment, EvalError> {
    check_characters(gold, system)?;
    let (g, s) = (&gold.words, &system.words);
    let mut alignment = Alignment::new(s.len());
    let (mut gi, mut si) = (0, 0);
    while gi < g.len() && si < s.len() {
        if g[gi].is_multiword_part || s[si].is_multiword_part {
            let (gs, ss, ge, se) = multiword_region(g, s, gi, si);
            if ge > gs && se > ss {
                align_lcs(&g[gs..ge], &s[ss..se], gs, ss, &mut alignment);
            }
            gi = ge;
            si = se;
        } else if g[gi].span == s[si].span {
            alignment.push(gi, si);
            gi += 1;
            si += 1;
        } else if g[gi].span.start <= s[si].span.start {
            gi += 1;
        } else {
            si += 1;
        }
    }
    Ok(alignment)
}

fn beyond_end(words: &[EvalWord], i: usize, end: usize) -> bool {
    match words.get(i) {
        None => true,
        Some(w) if w.is_multiword_part => w.span.start >= end,
        Some(w) => w.span.end > end,
    }
}

fn extend_end(word: &EvalWord, end: usize) -> usize {
    if word.is_multiword_part {
        end.max(word.span.end)
    } else {
        end
    }
}

/// Delimits the region starting at a multiword part on either side; returns
/// `(gold start, system start, gold end, system end)` word indices.
fn multiword_region(g: &[EvalWord], s: &[EvalWord], mut gi: usize, mut si: usize) -> (usize, usize, usize, usize) {
    let mut end;
    if g[gi].is_multiword_part {
        end = g[gi].span.end;
        if !s[si].is_multiword_part && s[si].span.start < g[gi].span.start {
            si += 1;
        }
    } else {
        end = s[si].span.end;
        if !g[gi].is_multiword_part && g[gi].span.start < s[si].span.start {
            gi += 1;
        }
    }
    let (gs, ss) = (gi, si);
    while !beyond_end(g, gi, end) || !beyond_end(s, si, end) {
        if gi < g.len() && (si >= s.len() || g[gi].span.start <= s[si].span.start) {
            end = extend_end(&g[gi], end);
            gi += 1;
        } else {
            end = extend_end(&s[si], end);
            si += 1;
        }
    }
    (gs, ss, gi, si)
}

fn align_lcs(g: &[EvalWord], s: &[EvalWord], g_off: usize, s_off: usize, alignment: &mut Alignment) {
    let (n, m) = (g.len(), s.len());
    // lcs[i][j] = LCS length of g[i..] and s[j..], padded with a zero row and column.
    let mut lcs = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            lcs[i][j] = if g[i].folded_form == s[j].folded_form {
                1 + lcs[i + 1][j + 1]
            } else {
                lcs[i + 1][j].max(lcs[i][j + 1])
            };
        }
    }
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if g[i].folded_form == s[j].folded_form {
            alignment.push(g_off + i, s_off + j);
            i += 1;
            j += 1;
        } else if lcs[i][j] == lcs[i + 1][j] {
            i += 1;
        } else {
            j += 1;
        }
    }
}
