//! CoNLL 2018 shared-task scoring: character spans, word alignment and the
//! 13-metric suite with F1 and aligned accuracy.

mod align;
mod metric;
mod render;
mod repr;
mod score;
pub mod ud;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use align::{align_spans, align_words, check_characters, Alignment};
pub use metric::{
    format_percent, percent, round_hundredths, MetricCounts, MetricId, MetricScore, TaskSet, UnknownMetric,
};
pub use render::render_table;
pub use repr::{build_representation, CharSpan, EvalHead, EvalRepresentation, EvalWord, FeatsMode};
pub use score::score_metric;

use crate::conllu::TreebankFile;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("the file contains no words")]
    EmptyRepresentation,
    #[error("sentence {sentence}: token {token:?} has no characters after removing spaces")]
    EmptyForm { sentence: usize, token: String },
    #[error("gold and system texts differ starting at character {offset}")]
    MismatchedCharacters { offset: usize },
    #[error("metric {0} is not configured for this benchmark")]
    UnsupportedMetric(MetricId),
    #[error("reports cover different task sets")]
    InconsistentTaskSets,
    #[error("no reports to average")]
    NoReports,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub scores: BTreeMap<MetricId, MetricScore>,
    /// Metrics whose F1 values enter `average_f1`, in display order.
    pub average_metrics: Vec<MetricId>,
    /// `None` when no listed metric was evaluated.
    pub average_f1: Option<f64>,
}

impl EvaluationReport {
    /// Builds a report and derives `average_f1` from `average_metrics`.
    pub fn new(scores: BTreeMap<MetricId, MetricScore>, average_metrics: &[MetricId]) -> Self {
        let average_metrics: Vec<MetricId> = average_metrics
            .iter()
            .copied()
            .filter(|m| scores.contains_key(m))
            .collect();
        let average_f1 = (!average_metrics.is_empty()).then(|| {
            average_metrics.iter().map(|m| scores[m].f1).sum::<f64>() / average_metrics.len() as f64
        });
        Self {
            scores,
            average_metrics,
            average_f1,
        }
    }

    pub fn tasks_evaluated(&self) -> TaskSet {
        self.scores.keys().copied().collect()
    }

    pub fn get(&self, metric: MetricId) -> Option<&MetricScore> {
        self.scores.get(&metric)
    }

    pub fn f1(&self, metric: MetricId) -> Option<f64> {
        self.scores.get(&metric).map(|s| s.f1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub feats_mode: FeatsMode,
    /// Metrics this benchmark accepts; requests outside it fail.
    pub supported: TaskSet,
    /// Overrides [`MetricId::default_average`].
    pub average_metrics: Option<Vec<MetricId>>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            feats_mode: FeatsMode::default(),
            supported: MetricId::all(),
            average_metrics: None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Evaluator {
    options: EvalOptions,
}

impl Evaluator {
    pub fn new(options: EvalOptions) -> Self {
        Self { options }
    }

    pub fn options(&self) -> &EvalOptions {
        &self.options
    }

    pub fn representation(&self, file: &TreebankFile) -> Result<EvalRepresentation, EvalError> {
        build_representation(file, self.options.feats_mode)
    }

    pub fn evaluate(
        &self,
        gold: &TreebankFile,
        system: &TreebankFile,
        tasks: &TaskSet,
    ) -> Result<EvaluationReport, EvalError> {
        self.check_tasks(tasks)?;
        let gold = self.representation(gold)?;
        let system = self.representation(system)?;
        self.evaluate_representations(&gold, &system, tasks)
    }

    /// Scores prebuilt representations; both must come from this evaluator's
    /// FEATS mode.
    pub fn evaluate_representations(
        &self,
        gold: &EvalRepresentation,
        system: &EvalRepresentation,
        tasks: &TaskSet,
    ) -> Result<EvaluationReport, EvalError> {
        self.check_tasks(tasks)?;
        let alignment = align_words(gold, system)?;
        let mut requested = tasks.clone();
        requested.extend(MetricId::SEGMENTATION);
        let scores = requested
            .iter()
            .map(|&m| (m, score_metric(m, gold, system, &alignment)))
            .collect();
        let average = match &self.options.average_metrics {
            Some(list) => list.clone(),
            None => MetricId::default_average(tasks),
        };
        Ok(EvaluationReport::new(scores, &average))
    }

    fn check_tasks(&self, tasks: &TaskSet) -> Result<(), EvalError> {
        match tasks.iter().find(|m| !self.options.supported.contains(m)) {
            Some(&m) => Err(EvalError::UnsupportedMetric(m)),
            None => Ok(()),
        }
    }
}

/// Scores `system` against `gold` with reference settings.
pub fn evaluate(gold: &TreebankFile, system: &TreebankFile, tasks: &TaskSet) -> Result<EvaluationReport, EvalError> {
    Evaluator::default().evaluate(gold, system, tasks)
}

/// Uniform mean of per-dataset reports. Counts are dropped; precision and
/// recall survive only when every input has them.
pub fn average_reports(reports: &[EvaluationReport]) -> Result<EvaluationReport, EvalError> {
    let first = reports.first().ok_or(EvalError::NoReports)?;
    let tasks = first.tasks_evaluated();
    if reports.iter().any(|r| r.tasks_evaluated() != tasks) {
        return Err(EvalError::InconsistentTaskSets);
    }
    let n = reports.len() as f64;
    let mean = |f: &dyn Fn(&MetricScore) -> Option<f64>, m: MetricId| -> Option<f64> {
        reports
            .iter()
            .map(|r| f(&r.scores[&m]))
            .sum::<Option<f64>>()
            .map(|total| total / n)
    };
    let scores = tasks
        .iter()
        .map(|&m| {
            let score = MetricScore {
                counts: None,
                precision: mean(&|s| s.precision, m),
                recall: mean(&|s| s.recall, m),
                f1: reports.iter().map(|r| r.scores[&m].f1).sum::<f64>() / n,
                aligned_accuracy: mean(&|s| s.aligned_accuracy, m),
            };
            (m, score)
        })
        .collect();
    Ok(EvaluationReport::new(scores, &first.average_metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::parse_conllu;

    const GOLD: &str = "1\tKot\tkot\tNOUN\tsubst\tCase=Nom\t2\tnsubj\t_\t_\n\
                        2\tśpi\tspać\tVERB\tfin\tAspect=Imp\t0\troot\t_\t_\n\
                        3\tna\tna\tADP\tprep\t_\t4\tcase\t_\t_\n\
                        4\tmacie\tmata\tNOUN\tsubst\tCase=Loc\t2\tobl\t_\tSpaceAfter=No\n\
                        5\t.\t.\tPUNCT\tinterp\t_\t2\tpunct\t_\t_\n";

    fn file(text: &str) -> TreebankFile {
        parse_conllu(text).unwrap()
    }

    #[test]
    fn identity_is_perfect() {
        let g = file(GOLD);
        let report = evaluate(&g, &g, &MetricId::all()).unwrap();
        assert_eq!(report.scores.len(), 13);
        for (m, s) in &report.scores {
            assert_eq!(s.f1, 1.0, "{m}");
            assert_eq!(s.precision, Some(1.0));
            assert_eq!(s.recall, Some(1.0));
            if m.has_aligned_accuracy() {
                assert_eq!(s.aligned_accuracy, Some(1.0));
            } else {
                assert_eq!(s.aligned_accuracy, None);
            }
        }
        assert_eq!(report.average_f1, Some(1.0));
        assert_eq!(report.average_metrics.len(), 13);
    }

    #[test]
    fn merged_tokens_keep_sentences() {
        let g = file("1\ta\t_\tX\t_\t_\t0\troot\t_\t_\n2\tb\t_\tX\t_\t_\t1\tdep\t_\t_\n");
        let s = file("1\tab\t_\tX\t_\t_\t0\troot\t_\t_\n");
        let r = evaluate(&g, &s, &TaskSet::new()).unwrap();
        assert_eq!(r.f1(MetricId::Tokens), Some(0.0));
        assert_eq!(r.f1(MetricId::Sentences), Some(1.0));
    }

    #[test]
    fn task_subset() {
        let g = file(GOLD);
        let tasks: TaskSet = [MetricId::UPOS, MetricId::Lemmas].into();
        let r = evaluate(&g, &g, &tasks).unwrap();
        let keys: Vec<_> = r.scores.keys().copied().collect();
        assert_eq!(
            keys,
            [MetricId::Tokens, MetricId::Sentences, MetricId::Words, MetricId::UPOS, MetricId::Lemmas]
        );
        assert_eq!(r.average_metrics, keys);
    }

    #[test]
    fn unsupported_metric() {
        let g = file(GOLD);
        let ev = Evaluator::new(EvalOptions {
            supported: MetricId::TAGGING_AVERAGE.into_iter().collect(),
            ..EvalOptions::default()
        });
        let err = ev.evaluate(&g, &g, &[MetricId::LAS].into()).unwrap_err();
        assert_eq!(err, EvalError::UnsupportedMetric(MetricId::LAS));
    }

    #[test]
    fn lemma_wildcard_and_unknown_heads() {
        let g = file(&GOLD.replace("\tmata\t", "\t_\t"));
        let s = file(
            &GOLD
                .replace("\tmata\t", "\tmat\t")
                .replace("\t2\tnsubj\t", "\t_\tnsubj\t"),
        );
        let r = evaluate(&g, &s, &MetricId::all()).unwrap();
        assert_eq!(r.f1(MetricId::Lemmas), Some(1.0));
        assert_eq!(r.scores[&MetricId::UAS].counts.unwrap().correct, 4);
    }

    #[test]
    fn average_of_two() {
        let mk = |f1: f64| {
            let scores = [(MetricId::Tokens, MetricScore::from_f1(f1, None))].into_iter().collect();
            EvaluationReport::new(scores, &[MetricId::Tokens])
        };
        let avg = average_reports(&[mk(0.9975), mk(0.9973)]).unwrap();
        assert_eq!(format_percent(avg.scores[&MetricId::Tokens].f1), "99.74");
        let single = average_reports(&[mk(0.5)]).unwrap();
        assert_eq!(single, mk(0.5));
    }

    #[test]
    fn average_rejects_mixed_tasks() {
        let g = file(GOLD);
        let a = evaluate(&g, &g, &MetricId::all()).unwrap();
        let b = evaluate(&g, &g, &TaskSet::new()).unwrap();
        assert_eq!(average_reports(&[a, b]).unwrap_err(), EvalError::InconsistentTaskSets);
        assert_eq!(average_reports(&[]).unwrap_err(), EvalError::NoReports);
    }
}
