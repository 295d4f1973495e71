//! Inputs shared by the criterion benches.

use nlpre_core::split::Paragraph;
use nlpre_core::synth::{random_prediction, random_treebank};
use nlpre_core::{serialize_conllu, TreebankFile};

/// A synthetic gold file, a perturbed prediction for it, and the gold text.
pub struct EvalInput {
    pub gold: TreebankFile,
    pub system: TreebankFile,
    pub gold_text: String,
}

pub fn eval_input(sentences: usize) -> EvalInput {
    let gold = random_treebank(7, sentences);
    let (system, _) = random_prediction(&gold, 11);
    let gold_text = serialize_conllu(&gold);
    EvalInput { gold, system, gold_text }
}

/// Paragraphs with lengths cycling through 5..=84 words and no payload.
pub fn paragraphs(n: usize) -> Vec<Paragraph> {
    (0..n)
        .map(|i| Paragraph {
            id: format!("p{i:06}"),
            document_id: format!("d{}", i / 6),
            document_type: ["news", "fiction", "web"][(i / 6) % 3].to_string(),
            segment_count: 5 + (i * 31) % 80,
            payload: Vec::new(),
        })
        .collect()
}
