use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The 13 scored metrics, in table display order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MetricId {
    Tokens,
    Sentences,
    Words,
    UPOS,
    XPOS,
    UFeats,
    AllTags,
    Lemmas,
    UAS,
    LAS,
    CLAS,
    MLAS,
    BLEX,
}

pub type TaskSet = BTreeSet<MetricId>;

impl MetricId {
    pub const ALL: [MetricId; 13] = [
        MetricId::Tokens,
        MetricId::Sentences,
        MetricId::Words,
        MetricId::UPOS,
        MetricId::XPOS,
        MetricId::UFeats,
        MetricId::AllTags,
        MetricId::Lemmas,
        MetricId::UAS,
        MetricId::LAS,
        MetricId::CLAS,
        MetricId::MLAS,
        MetricId::BLEX,
    ];

    /// Always scored: they define the alignment every other metric rests on.
    pub const SEGMENTATION: [MetricId; 3] = [MetricId::Tokens, MetricId::Sentences, MetricId::Words];

    /// Default average set for tagging benchmarks.
    pub const TAGGING_AVERAGE: [MetricId; 8] = [
        MetricId::Tokens,
        MetricId::Sentences,
        MetricId::Words,
        MetricId::UPOS,
        MetricId::XPOS,
        MetricId::UFeats,
        MetricId::AllTags,
        MetricId::Lemmas,
    ];

    pub const PARSING: [MetricId; 5] = [MetricId::UAS, MetricId::LAS, MetricId::CLAS, MetricId::MLAS, MetricId::BLEX];

    pub fn name(self) -> &'static str {
        match self {
            MetricId::Tokens => "Tokens",
            MetricId::Sentences => "Sentences",
            MetricId::Words => "Words",
            MetricId::UPOS => "UPOS",
            MetricId::XPOS => "XPOS",
            MetricId::UFeats => "UFeats",
            MetricId::AllTags => "AllTags",
            MetricId::Lemmas => "Lemmas",
            MetricId::UAS => "UAS",
            MetricId::LAS => "LAS",
            MetricId::CLAS => "CLAS",
            MetricId::MLAS => "MLAS",
            MetricId::BLEX => "BLEX",
        }
    }

    /// Span metrics carry no aligned accuracy.
    pub fn has_aligned_accuracy(self) -> bool {
        !Self::SEGMENTATION.contains(&self)
    }

    pub fn all() -> TaskSet {
        Self::ALL.into_iter().collect()
    }

    /// The average set implied by a task set: all 13 metrics once any parsing
    /// metric is requested, the eight segmentation and tagging metrics otherwise.
    pub fn default_average(tasks: &TaskSet) -> Vec<MetricId> {
        if Self::PARSING.iter().any(|m| tasks.contains(m)) {
            Self::ALL.to_vec()
        } else {
            Self::TAGGING_AVERAGE.to_vec()
        }
    }

    /// Parses a comma-separated list such as `UPOS,Lemmas`.
    pub fn parse_list(s: &str) -> Result<TaskSet, UnknownMetric> {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect()
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown metric '{0}'")]
pub struct UnknownMetric(pub String);

impl FromStr for MetricId {
    type Err = UnknownMetric;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricId::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownMetric(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricCounts {
    pub correct: usize,
    pub gold_total: usize,
    pub system_total: usize,
    /// `None` for span metrics and for Words.
    pub aligned_total: Option<usize>,
}

/// One metric's result. Fractions are in [0, 1]; rendering multiplies by 100.
///
/// `counts`, `precision` and `recall` are absent on averaged reports and on
/// entries imported from published tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub counts: Option<MetricCounts>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: f64,
    pub aligned_accuracy: Option<f64>,
}

impl MetricScore {
    pub fn from_counts(counts: MetricCounts) -> Self {
        let MetricCounts {
            correct,
            gold_total,
            system_total,
            aligned_total,
        } = counts;
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        Self {
            counts: Some(counts),
            precision: Some(ratio(correct, system_total)),
            recall: Some(ratio(correct, gold_total)),
            f1: ratio(2 * correct, gold_total + system_total),
            aligned_accuracy: aligned_total.map(|a| ratio(correct, a)),
        }
    }

    /// A score known only by its F1 (and optionally aligned accuracy).
    pub fn from_f1(f1: f64, aligned_accuracy: Option<f64>) -> Self {
        Self {
            counts: None,
            precision: None,
            recall: None,
            f1,
            aligned_accuracy,
        }
    }
}

/// Rounds a fraction to a percentage with two decimals, half away from zero.
///
/// The hundredths value is snapped to 1e-6 first so that binary noise such
/// as 97.41499999 (the mean of 97.42 and 97.41) still rounds up.
pub fn percent(fraction: f64) -> f64 {
    round_hundredths(fraction * 100.0)
}

/// Rounds a percentage to two decimals, half away from zero, with snapping.
pub fn round_hundredths(pct: f64) -> f64 {
    let hundredths = pct * 100.0;
    let snapped = (hundredths * 1e6).round() / 1e6;
    snapped.round() / 100.0
}

pub fn format_percent(fraction: f64) -> String {
    format!("{:.2}", percent(fraction))
}
