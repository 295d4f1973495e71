//! Score vectors, Pearson/Spearman correlation matrices and five-number
//! dispersion summaries over published results.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::eval::{round_hundredths, EvaluationReport, MetricId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("at least two values are required")]
    TooFewValues,
    #[error("a vector has zero variance")]
    ZeroVariance,
    #[error("metric {metric} missing for {key}")]
    MissingMetric { key: String, metric: MetricId },
    #[error("no published entries match {0}")]
    NoMatchingEntries(String),
    #[error("at least two vectors are required")]
    TooFewVectors,
    #[error("vectors use different metric lists")]
    InconsistentMetrics,
    #[error("empty vector for {0}")]
    EmptyVector(String),
}

/// Metric list of the correlation analysis.
pub const VECTOR_METRICS: [MetricId; 6] = [
    MetricId::Tokens,
    MetricId::Sentences,
    MetricId::Words,
    MetricId::UPOS,
    MetricId::XPOS,
    MetricId::Lemmas,
];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VectorKey {
    pub model: String,
    pub tagset: String,
    /// `None` averages over every embedding of the model.
    pub embedding: Option<String>,
}

impl VectorKey {
    pub fn label(&self) -> String {
        match &self.embedding {
            Some(e) => format!("{}+{} ({})", self.model, e, self.tagset),
            None => format!("{} ({})", self.model, self.tagset),
        }
    }
}

/// A published submission's per-dataset reports.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredEntry {
    pub model: String,
    pub embedding: Option<String>,
    pub tagset: String,
    pub datasets: BTreeMap<String, EvaluationReport>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AveragingOrder {
    /// Mean over datasets per entry, then over embeddings.
    #[default]
    DatasetsFirst,
    /// Mean over embeddings per dataset, then over datasets.
    EmbeddingsFirst,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VectorOptions {
    pub order: AveragingOrder,
    /// Restricts the datasets averaged over; `None` uses all of them.
    pub datasets: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub key: VectorKey,
    pub metrics: Vec<MetricId>,
    /// F1 fractions, one per metric.
    pub values: Vec<f64>,
}

/// Dataset means are quantised to the displayed precision (0.01 points), so
/// vectors built from published tables reproduce their rows.
pub fn score_vector(
    entries: &[ScoredEntry],
    key: &VectorKey,
    metrics: &[MetricId],
    options: &VectorOptions,
) -> Result<ScoreVector, AnalyticsError> {
    let selected: Vec<&ScoredEntry> = entries
        .iter()
        .filter(|e| e.model == key.model && e.tagset == key.tagset)
        .filter(|e| key.embedding.is_none() || e.embedding == key.embedding)
        .collect();
    if selected.is_empty() {
        return Err(AnalyticsError::NoMatchingEntries(key.label()));
    }
    let wanted = |name: &str| options.datasets.as_ref().map_or(true, |d| d.iter().any(|x| x == name));
    let f1 = |e: &ScoredEntry, dataset: &str, metric: MetricId| -> Result<f64, AnalyticsError> {
        e.datasets[dataset]
            .f1(metric)
            .ok_or_else(|| AnalyticsError::MissingMetric {
                key: key.label(),
                metric,
            })
    };
    let quantise = |v: f64| round_hundredths(v * 100.0) / 100.0;

    let mut values = Vec::with_capacity(metrics.len());
    for &metric in metrics {
        let value = match options.order {
            AveragingOrder::DatasetsFirst => {
                let mut per_entry = Vec::new();
                for e in &selected {
                    let names: Vec<&String> = e.datasets.keys().filter(|d| wanted(d)).collect();
                    if names.is_empty() {
                        return Err(AnalyticsError::NoMatchingEntries(key.label()));
                    }
                    let scores = names.iter().map(|d| f1(e, d, metric)).collect::<Result<Vec<_>, _>>()?;
                    per_entry.push(quantise(mean(&scores)));
                }
                mean(&per_entry)
            }
            AveragingOrder::EmbeddingsFirst => {
                let mut names: Vec<&String> = selected.iter().flat_map(|e| e.datasets.keys()).filter(|d| wanted(d)).collect();
                names.sort();
                names.dedup();
                if names.is_empty() {
                    return Err(AnalyticsError::NoMatchingEntries(key.label()));
                }
                let mut per_dataset = Vec::new();
                for d in names {
                    let scores = selected
                        .iter()
                        .filter(|e| e.datasets.contains_key(d))
                        .map(|e| f1(e, d, metric))
                        .collect::<Result<Vec<_>, _>>()?;
                    per_dataset.push(mean(&scores));
                }
                quantise(mean(&per_dataset))
            }
        };
        values.push(value);
    }
    Ok(ScoreVector {
        key: key.clone(),
        metrics: metrics.to_vec(),
        values,
    })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), AnalyticsError> {
    if x.len() != y.len() {
        return Err(AnalyticsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(AnalyticsError::TooFewValues);
    }
    Ok(())
}

/// Product-moment correlation, clamped to [-1, 1].
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, AnalyticsError> {
    check_pair(x, y)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalyticsError::ZeroVariance);
    }
    // sqrt of the product keeps pearson(x, x) at exactly 1.
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, AnalyticsError> {
    check_pair(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Pairwise coefficients; `None` cells are undefined (zero variance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<VectorKey>,
    pub pearson: Vec<Vec<Option<f64>>>,
    pub spearman: Vec<Vec<Option<f64>>>,
}

pub fn correlation_matrix(vectors: &[ScoreVector]) -> Result<CorrelationMatrix, AnalyticsError> {
    if vectors.len() < 2 {
        return Err(AnalyticsError::TooFewVectors);
    }
    if vectors.iter().any(|v| v.metrics != vectors[0].metrics || v.values.len() != v.metrics.len()) {
        return Err(AnalyticsError::InconsistentMetrics);
    }
    let n = vectors.len();
    let mut p = vec![vec![None; n]; n];
    let mut s = vec![vec![None; n]; n];
    for i in 0..n {
        for j in i..n {
            let cell = |f: fn(&[f64], &[f64]) -> Result<f64, AnalyticsError>| match f(&vectors[i].values, &vectors[j].values) {
                Ok(v) => Ok(Some(if i == j { 1.0 } else { v })),
                Err(AnalyticsError::ZeroVariance) => Ok(None),
                Err(e) => Err(e),
            };
            p[i][j] = cell(pearson)?;
            s[i][j] = cell(spearman)?;
            p[j][i] = p[i][j];
            s[j][i] = s[i][j];
        }
    }
    Ok(CorrelationMatrix {
        labels: vectors.iter().map(|v| v.key.clone()).collect(),
        pearson: p,
        spearman: s,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionSummary {
    pub key: VectorKey,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear interpolation between order statistics at `h = (n - 1) p`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn dispersion_summary(vectors: &[ScoreVector]) -> Result<Vec<DispersionSummary>, AnalyticsError> {
    vectors
        .iter()
        .map(|v| {
            if v.values.is_empty() {
                return Err(AnalyticsError::EmptyVector(v.key.label()));
            }
            let mut sorted = v.values.clone();
            sorted.sort_by(f64::total_cmp);
            Ok(DispersionSummary {
                key: v.key.clone(),
                min: sorted[0],
                q1: quantile(&sorted, 0.25),
                median: quantile(&sorted, 0.5),
                q3: quantile(&sorted, 0.75),
                max: sorted[sorted.len() - 1],
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::MetricScore;
    use approx::assert_abs_diff_eq;

    fn key(model: &str) -> VectorKey {
        VectorKey {
            model: model.into(),
            tagset: "t".into(),
            embedding: None,
        }
    }

    fn vector(model: &str, values: &[f64]) -> ScoreVector {
        ScoreVector {
            key: key(model),
            metrics: VECTOR_METRICS[..values.len()].to_vec(),
            values: values.to_vec(),
        }
    }

    fn report(pairs: &[(MetricId, f64)]) -> EvaluationReport {
        let scores = pairs.iter().map(|&(m, f)| (m, MetricScore::from_f1(f, None))).collect();
        EvaluationReport::new(scores, &[])
    }

    #[test]
    fn pearson_basics() {
        let x = [1.0, 2.0, 4.0, 8.0];
        assert_abs_diff_eq!(pearson(&x, &x).unwrap(), 1.0, epsilon = 1e-12);
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v).collect();
        assert_abs_diff_eq!(pearson(&x, &y).unwrap(), -1.0, epsilon = 1e-12);
        assert_eq!(pearson(&[1.0, 1.0], &[1.0, 2.0]), Err(AnalyticsError::ZeroVariance));
        assert_eq!(pearson(&[1.0], &[1.0, 2.0]), Err(AnalyticsError::LengthMismatch(1, 2)));
        assert_eq!(pearson(&[1.0], &[1.0]), Err(AnalyticsError::TooFewValues));
    }

    #[test]
    fn spearman_basics() {
        let x = [0.1, 0.5, 0.3, 0.9];
        let cubed: Vec<f64> = x.iter().map(|v| v * v * v + 1.0).collect();
        assert_abs_diff_eq!(spearman(&x, &cubed).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0, epsilon = 1e-12);
        // Ranks of [1,1,2] are [1.5,1.5,3]; against [1,2,3] that is sqrt(3)/2.
        assert_eq!(average_ranks(&[1.0, 1.0, 2.0]), [1.5, 1.5, 3.0]);
        assert_abs_diff_eq!(spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(), 3f64.sqrt() / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn matrix_shape() {
        let v = [0.99, 0.93, 0.98, 0.97];
        let m = correlation_matrix(&[vector("a", &v), vector("b", &v)]).unwrap();
        for row in m.pearson.iter().chain(&m.spearman) {
            assert!(row.iter().all(|c| *c == Some(1.0)));
        }
        assert_eq!(correlation_matrix(&[vector("a", &v)]).unwrap_err(), AnalyticsError::TooFewVectors);
        let flat = correlation_matrix(&[vector("a", &v), vector("c", &[0.5; 4])]).unwrap();
        assert_eq!(flat.pearson[0][1], None);
        assert_eq!(flat.pearson[1][1], None);
    }

    #[test]
    fn dispersion() {
        let s = dispersion_summary(&[vector("c", &[0.7; 3]), vector("d", &[0.0, 1.0])]).unwrap();
        assert_eq!((s[0].min, s[0].q1, s[0].median, s[0].q3, s[0].max), (0.7, 0.7, 0.7, 0.7, 0.7));
        assert_eq!(s[1].median, 0.5);
        assert_eq!((s[1].q1, s[1].q3), (0.25, 0.75));
    }

    #[test]
    fn vectors_average_datasets_then_embeddings() {
        let entry = |emb: &str, a: f64, b: f64| ScoredEntry {
            model: "m".into(),
            embedding: Some(emb.into()),
            tagset: "t".into(),
            datasets: [
                ("x".to_string(), report(&[(MetricId::UPOS, a)])),
                ("y".to_string(), report(&[(MetricId::UPOS, b)])),
            ]
            .into(),
        };
        let entries = [entry("e1", 0.9, 0.8), entry("e2", 0.7, 0.6)];
        let v = score_vector(&entries, &key("m"), &[MetricId::UPOS], &VectorOptions::default()).unwrap();
        assert_abs_diff_eq!(v.values[0], 0.75, epsilon = 1e-12);
        let only_x = VectorOptions {
            datasets: Some(vec!["x".into()]),
            ..VectorOptions::default()
        };
        let v = score_vector(&entries, &key("m"), &[MetricId::UPOS], &only_x).unwrap();
        assert_abs_diff_eq!(v.values[0], 0.8, epsilon = 1e-12);
        let err = score_vector(&entries, &key("m"), &[MetricId::Lemmas], &VectorOptions::default()).unwrap_err();
        assert!(matches!(err, AnalyticsError::MissingMetric { metric: MetricId::Lemmas, .. }));
    }
}
