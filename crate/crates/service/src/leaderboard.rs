//! Leaderboard rows. Values are percentages rounded to two decimals. An
//! entry's average is the mean of its rounded per-dataset averages, so rows
//! agree with the per-dataset tables they summarise.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::str::FromStr;

use nlpre_core::eval::{percent, round_hundredths, EvaluationReport, MetricId};
use serde::{Deserialize, Serialize};

use crate::model::Submission;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortOrder {
    #[default]
    Desc,
    Asc,
}

impl FromStr for SortOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "desc" => Ok(SortOrder::Desc),
            "asc" => Ok(SortOrder::Asc),
            other => Err(format!("sort must be asc or desc, got '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LeaderboardQuery {
    pub tagset: String,
    /// Restricts the view to one dataset instead of the cross-dataset mean.
    pub dataset: Option<String>,
    /// Sort key; `None` sorts by the average.
    pub metric: Option<MetricId>,
    pub sort: SortOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreColumns {
    pub f1: BTreeMap<MetricId, f64>,
    pub aligned_accuracy: BTreeMap<MetricId, f64>,
    pub average_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    /// Competition rank by `average_f1`; entries without one rank last.
    pub rank: usize,
    pub submission_id: String,
    pub model_name: String,
    pub embeddings_label: Option<String>,
    pub tagset_id: String,
    pub average_f1: Option<f64>,
    /// The columns of the requested view.
    pub scores: ScoreColumns,
    pub datasets: BTreeMap<String, ScoreColumns>,
}

fn pct(fraction: f64) -> f64 {
    round_hundredths(percent(fraction))
}

fn mean_rounded(values: &[f64]) -> f64 {
    round_hundredths(values.iter().sum::<f64>() / values.len() as f64)
}

pub fn dataset_columns(report: &EvaluationReport) -> ScoreColumns {
    ScoreColumns {
        f1: report.scores.iter().map(|(&m, s)| (m, pct(s.f1))).collect(),
        aligned_accuracy: report
            .scores
            .iter()
            .filter_map(|(&m, s)| s.aligned_accuracy.map(|aa| (m, pct(aa))))
            .collect(),
        average_f1: report.average_f1.map(pct),
    }
}

/// Cross-dataset view: metrics present in every dataset, averaged.
pub fn averaged_columns(datasets: &BTreeMap<String, ScoreColumns>) -> ScoreColumns {
    let Some(first) = datasets.values().next() else {
        return ScoreColumns {
            f1: BTreeMap::new(),
            aligned_accuracy: BTreeMap::new(),
            average_f1: None,
        };
    };
    let common = |select: fn(&ScoreColumns) -> &BTreeMap<MetricId, f64>| -> BTreeMap<MetricId, f64> {
        select(first)
            .keys()
            .filter_map(|m| {
                let values: Option<Vec<f64>> = datasets.values().map(|c| select(c).get(m).copied()).collect();
                values.map(|v| (*m, mean_rounded(&v)))
            })
            .collect()
    };
    let averages: Option<Vec<f64>> = datasets.values().map(|c| c.average_f1).collect();
    ScoreColumns {
        f1: common(|c| &c.f1),
        aligned_accuracy: common(|c| &c.aligned_accuracy),
        average_f1: averages.map(|v| mean_rounded(&v)),
    }
}

pub fn entry_for(sub: &Submission, dataset: Option<&str>) -> LeaderboardEntry {
    let datasets: BTreeMap<String, ScoreColumns> =
        sub.reports.iter().map(|(d, r)| (d.clone(), dataset_columns(r))).collect();
    let scores = match dataset {
        Some(d) => datasets.get(d).cloned().unwrap_or_else(|| averaged_columns(&BTreeMap::new())),
        None => averaged_columns(&datasets),
    };
    LeaderboardEntry {
        rank: 0,
        submission_id: sub.id.clone(),
        model_name: sub.metadata.model_name.clone(),
        embeddings_label: sub.metadata.embeddings_label.clone(),
        tagset_id: sub.tagset_id.clone(),
        average_f1: scores.average_f1,
        scores,
        datasets,
    }
}

/// Ranks and sorts `published` (already filtered to one tagset). The sort is
/// stable, so ties keep publication order.
pub fn build(published: &[Submission], query: &LeaderboardQuery) -> Vec<LeaderboardEntry> {
    let mut entries: Vec<LeaderboardEntry> =
        published.iter().map(|s| entry_for(s, query.dataset.as_deref())).collect();
    let averages: Vec<Option<f64>> = entries.iter().map(|e| e.average_f1).collect();
    let ranked = averages.iter().filter(|a| a.is_some()).count();
    for entry in &mut entries {
        entry.rank = 1 + match entry.average_f1 {
            Some(a) => averages.iter().flatten().filter(|&&b| b > a).count(),
            None => ranked,
        };
    }
    let key = |e: &LeaderboardEntry| match query.metric {
        Some(m) => e.scores.f1.get(&m).copied(),
        None => e.average_f1,
    };
    entries.sort_by(|a, b| match (key(a), key(b)) {
        (Some(x), Some(y)) => match query.sort {
            SortOrder::Desc => y.total_cmp(&x),
            SortOrder::Asc => x.total_cmp(&y),
        },
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    });
    entries
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SubmissionStatus, SubmitterMetadata};
    use nlpre_core::eval::MetricScore;

    fn report(values: &[(MetricId, f64)]) -> EvaluationReport {
        let scores = values.iter().map(|&(m, v)| (m, MetricScore::from_f1(v / 100.0, Some(v / 100.0)))).collect();
        let avg: Vec<MetricId> = values.iter().map(|&(m, _)| m).collect();
        EvaluationReport::new(scores, &avg)
    }

    fn sub(id: &str, datasets: &[(&str, EvaluationReport)]) -> Submission {
        Submission {
            id: id.into(),
            metadata: SubmitterMetadata {
                model_name: id.into(),
                embeddings_label: None,
                contact: None,
            },
            tagset_id: "t".into(),
            declared_tasks: Default::default(),
            archive_digest: String::new(),
            status: SubmissionStatus::Published,
            rejection: vec![],
            reports: datasets.iter().map(|(d, r)| (d.to_string(), r.clone())).collect(),
            created_at: 0,
            updated_at: 0,
            published_at: Some(0),
        }
    }

    #[test]
    fn averages_round_per_dataset_first() {
        use MetricId::*;
        // Dataset means 96.665 and 81.0667 round to 96.67 and 81.07 before the
        // entry mean is taken.
        let a = report(&[(Tokens, 96.66), (UPOS, 96.67)]);
        let b = report(&[(Tokens, 96.6), (UPOS, 96.6), (LAS, 50.0)]);
        let e = entry_for(&sub("x", &[("a", a), ("b", b)]), None);
        assert_eq!(e.datasets["a"].average_f1, Some(96.67));
        assert_eq!(e.average_f1, Some(88.87));
        assert!(!e.scores.f1.contains_key(&LAS), "LAS is not common to both datasets");
        assert_eq!(e.scores.f1[&Tokens], 96.63);
    }

    #[test]
    fn competition_ranks_and_missing_last() {
        use MetricId::*;
        let subs = [
            sub("low", &[("a", report(&[(Tokens, 90.0)]))]),
            sub("tie1", &[("a", report(&[(Tokens, 95.0)]))]),
            sub("tie2", &[("a", report(&[(Tokens, 95.0), (UPOS, 95.0)]))]),
            sub("top", &[("a", report(&[(Tokens, 99.0)]))]),
        ];
        let query = LeaderboardQuery {
            tagset: "t".into(),
            ..Default::default()
        };
        let rows = build(&subs, &query);
        let order: Vec<_> = rows.iter().map(|r| (r.submission_id.as_str(), r.rank)).collect();
        assert_eq!(order, [("top", 1), ("tie1", 2), ("tie2", 2), ("low", 4)]);

        let by_upos = build(&subs, &LeaderboardQuery { metric: Some(UPOS), ..query });
        assert_eq!(by_upos[0].submission_id, "tie2");
    }
}
