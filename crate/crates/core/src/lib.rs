//! Core library for NLPre benchmarking: a CoNLL-U document model, CoNLL 2018
//! shared-task scoring, paragraph-atomic corpus splitting, and correlation
//! analytics over published scores.

pub mod analytics;
pub mod conllu;
pub mod eval;
pub mod split;
pub mod synth;

pub use conllu::{parse_conllu, serialize_conllu, validate_treebank, Sentence, TokenLine, TreebankFile, Word};
pub use eval::{
    average_reports, evaluate, EvalError, EvalOptions, EvaluationReport, Evaluator, FeatsMode, MetricId,
    MetricScore, TaskSet,
};
