use super::align::{align_spans, Alignment};
use super::metric::{MetricCounts, MetricId, MetricScore};
use super::repr::{EvalHead, EvalRepresentation, EvalWord};
use crate::conllu::UNDERSCORE;

/// A head expressed in gold indices, so gold and system keys compare directly.
#[derive(Debug, Clone, Copy)]
enum HeadKey {
    Root,
    Gold(usize),
    NotAligned,
    Unknown,
}

impl PartialEq for HeadKey {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (HeadKey::Root, HeadKey::Root) => true,
            (HeadKey::Gold(a), HeadKey::Gold(b)) => a == b,
            (HeadKey::NotAligned, HeadKey::NotAligned) => true,
            _ => false,
        }
    }
}

struct Side<'a> {
    words: &'a [EvalWord],
    /// Maps this side's word index to a gold index.
    to_gold: &'a dyn Fn(usize) -> Option<usize>,
}

impl Side<'_> {
    fn head(&self, w: &EvalWord) -> HeadKey {
        match w.head {
            EvalHead::Root => HeadKey::Root,
            EvalHead::Unknown => HeadKey::Unknown,
            EvalHead::Word(i) => (self.to_gold)(i).map_or(HeadKey::NotAligned, HeadKey::Gold),
        }
    }

    fn attachment_eq(&self, w: &EvalWord, other: &Side<'_>, o: &EvalWord) -> bool {
        self.head(w) == other.head(o) && w.content_deprel == o.content_deprel
    }

    fn children_eq(&self, w: &EvalWord, other: &Side<'_>, o: &EvalWord) -> bool {
        w.functional_children.len() == o.functional_children.len()
            && w.functional_children.iter().zip(&o.functional_children).all(|(&a, &b)| {
                let (ca, cb) = (&self.words[a], &other.words[b]);
                (self.to_gold)(a).map_or(HeadKey::NotAligned, HeadKey::Gold)
                    == (other.to_gold)(b).map_or(HeadKey::NotAligned, HeadKey::Gold)
                    && ca.content_deprel == cb.content_deprel
                    && ca.upos == cb.upos
                    && ca.feats == cb.feats
            })
    }
}

fn lemma_eq(gold: &EvalWord, system: &EvalWord) -> bool {
    gold.lemma == UNDERSCORE || gold.lemma == system.lemma
}

/// Scores one metric over an existing alignment of `gold` and `system`.
pub fn score_metric(
    metric: MetricId,
    gold: &EvalRepresentation,
    system: &EvalRepresentation,
    alignment: &Alignment,
) -> MetricScore {
    let spans = |g: &[_], s: &[_]| {
        MetricScore::from_counts(MetricCounts {
            correct: align_spans(g, s),
            gold_total: g.len(),
            system_total: s.len(),
            aligned_total: None,
        })
    };
    match metric {
        MetricId::Tokens => return spans(&gold.token_spans, &system.token_spans),
        MetricId::Sentences => return spans(&gold.sentence_spans, &system.sentence_spans),
        MetricId::Words => {
            return MetricScore::from_counts(MetricCounts {
                correct: alignment.matched_pairs().len(),
                gold_total: gold.words.len(),
                system_total: system.words.len(),
                aligned_total: None,
            })
        }
        _ => {}
    }

    let gold_map = |i: usize| Some(i);
    let system_map = |i: usize| alignment.gold_for_system(i);
    let g_side = Side {
        words: &gold.words,
        to_gold: &gold_map,
    };
    let s_side = Side {
        words: &system.words,
        to_gold: &system_map,
    };

    let content_only = matches!(metric, MetricId::CLAS | MetricId::MLAS | MetricId::BLEX);
    let matches = |g: &EvalWord, s: &EvalWord| -> bool {
        match metric {
            MetricId::UPOS => g.upos == s.upos,
            MetricId::XPOS => g.xpos == s.xpos,
            MetricId::UFeats => g.feats == s.feats,
            MetricId::AllTags => g.upos == s.upos && g.xpos == s.xpos && g.feats == s.feats,
            MetricId::Lemmas => lemma_eq(g, s),
            MetricId::UAS => g_side.head(g) == s_side.head(s),
            MetricId::LAS | MetricId::CLAS => g_side.attachment_eq(g, &s_side, s),
            MetricId::MLAS => {
                g_side.attachment_eq(g, &s_side, s)
                    && g.upos == s.upos
                    && g.feats == s.feats
                    && g_side.children_eq(g, &s_side, s)
            }
            MetricId::BLEX => g_side.attachment_eq(g, &s_side, s) && lemma_eq(g, s),
            MetricId::Tokens | MetricId::Sentences | MetricId::Words => unreachable!("handled above"),
        }
    };

    let counted = |w: &&EvalWord| !content_only || w.is_content;
    let gold_total = gold.words.iter().filter(counted).count();
    let system_total = system.words.iter().filter(counted).count();
    let mut aligned = 0;
    let mut correct = 0;
    for &(gi, si) in alignment.matched_pairs() {
        let (g, s) = (&gold.words[gi], &system.words[si]);
        if content_only && !g.is_content {
            continue;
        }
        aligned += 1;
        correct += usize::from(matches(g, s));
    }
    MetricScore::from_counts(MetricCounts {
        correct,
        gold_total,
        system_total,
        aligned_total: Some(aligned),
    })
}
