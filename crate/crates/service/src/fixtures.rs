//! Bundled published results used to populate a demo leaderboard.

use std::collections::BTreeMap;

use nlpre_core::eval::{EvaluationReport, MetricId, MetricScore, TaskSet};
use serde::Deserialize;

use crate::config::BenchmarkConfig;
use crate::error::{ConfigError, ServiceError};
use crate::model::SubmitterMetadata;

const RESULTS: &str = include_str!("../fixtures/published_results.json");

#[derive(Deserialize)]
struct ResultsFile {
    tagsets: Vec<TagsetResults>,
}

#[derive(Deserialize)]
struct TagsetResults {
    tagset: String,
    entries: Vec<EntryResults>,
}

#[derive(Deserialize)]
struct EntryResults {
    model_name: String,
    embeddings_label: Option<String>,
    datasets: BTreeMap<String, DatasetResults>,
}

/// Percentages as printed in result tables.
#[derive(Deserialize)]
struct DatasetResults {
    f1: BTreeMap<MetricId, f64>,
    #[serde(default)]
    aligned_accuracy: BTreeMap<MetricId, f64>,
}

pub struct FixtureEntry {
    pub id: String,
    pub metadata: SubmitterMetadata,
    pub tagset_id: String,
    pub tasks: TaskSet,
    pub reports: BTreeMap<String, EvaluationReport>,
}

/// Entries for tagsets present in `config`; datasets the config lacks are
/// skipped. Ids are deterministic so seeding is idempotent.
pub fn fixture_entries(config: &BenchmarkConfig) -> Result<Vec<FixtureEntry>, ServiceError> {
    let file: ResultsFile =
        serde_json::from_str(RESULTS).map_err(|e| ConfigError::Invalid(format!("bundled results: {e}")))?;
    let mut out = Vec::new();
    for tagset in file.tagsets {
        let Some(configured) = config.tagset(&tagset.tagset) else {
            continue;
        };
        for entry in tagset.entries {
            let mut reports = BTreeMap::new();
            let mut tasks = TaskSet::new();
            for (dataset_id, results) in entry.datasets {
                let Some(dataset) = configured.datasets.iter().find(|d| d.id == dataset_id) else {
                    continue;
                };
                let scores: BTreeMap<MetricId, MetricScore> = results
                    .f1
                    .iter()
                    .map(|(&m, &f1)| {
                        let aa = results.aligned_accuracy.get(&m).map(|v| v / 100.0);
                        (m, MetricScore::from_f1(f1 / 100.0, aa))
                    })
                    .collect();
                tasks.extend(scores.keys().copied());
                reports.insert(dataset_id, EvaluationReport::new(scores, &dataset.effective_average()));
            }
            if reports.is_empty() {
                continue;
            }
            let suffix = entry.embeddings_label.as_deref().unwrap_or("none");
            out.push(FixtureEntry {
                id: format!("fixture-{}-{}-{}", tagset.tagset, entry.model_name, suffix),
                metadata: SubmitterMetadata {
                    model_name: entry.model_name,
                    embeddings_label: entry.embeddings_label,
                    contact: None,
                },
                tagset_id: tagset.tagset.clone(),
                tasks,
                reports,
            });
        }
    }
    Ok(out)
}
