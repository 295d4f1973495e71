//! Benchmark configuration: tagsets, datasets with hidden gold files, metric
//! lists and static content pages.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nlpre_core::conllu::{parse_conllu, validate_treebank, ValidationMode};
use nlpre_core::eval::{build_representation, EvalOptions, EvalRepresentation, Evaluator, FeatsMode, MetricId, TaskSet};
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

pub const DEFAULT_UPLOAD_LIMIT: u64 = 64 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub benchmark_name: String,
    pub language_code: String,
    pub tagsets: Vec<TagsetConfig>,
    #[serde(default)]
    pub content_pages: BTreeMap<String, PathBuf>,
    #[serde(default = "default_upload_limit")]
    pub upload_limit_bytes: u64,
    /// Archives and the SQLite database live here.
    #[serde(default = "default_data_dir")]
    pub data_dir: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub feats_mode: FeatsMode,
    /// Days before unpublished submissions are purged; absent keeps them.
    #[serde(default)]
    pub retention_days: Option<u32>,
}

fn default_upload_limit() -> u64 {
    DEFAULT_UPLOAD_LIMIT
}

fn default_data_dir() -> PathBuf {
    PathBuf::from("data")
}

fn default_workers() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagsetConfig {
    pub id: String,
    pub label: String,
    pub datasets: Vec<DatasetConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub id: String,
    pub label: String,
    /// Server-local; never exposed through the API.
    pub gold_path: PathBuf,
    pub tasks: TaskSet,
    /// Defaults to the tagging or parsing average implied by `tasks`.
    #[serde(default)]
    pub average_metrics: Option<Vec<MetricId>>,
}

impl DatasetConfig {
    /// Configured tasks plus the always-scored segmentation metrics.
    pub fn effective_tasks(&self) -> TaskSet {
        let mut tasks = self.tasks.clone();
        tasks.extend(MetricId::SEGMENTATION);
        tasks
    }

    /// The explicit list, or the default list restricted to configured tasks.
    pub fn effective_average(&self) -> Vec<MetricId> {
        match &self.average_metrics {
            Some(list) => list.clone(),
            None => {
                let tasks = self.effective_tasks();
                MetricId::default_average(&self.tasks)
                    .into_iter()
                    .filter(|m| tasks.contains(m))
                    .collect()
            }
        }
    }
}

impl BenchmarkConfig {
    pub fn tagset(&self, id: &str) -> Option<&TagsetConfig> {
        self.tagsets.iter().find(|t| t.id == id)
    }

    /// Structural checks that need no file access.
    pub fn check(&self) -> Result<(), ConfigError> {
        let mut tagsets = BTreeSet::new();
        for tagset in &self.tagsets {
            if !tagsets.insert(tagset.id.as_str()) {
                return Err(ConfigError::DuplicateId(format!("tagset '{}'", tagset.id)));
            }
            if tagset.datasets.is_empty() {
                return Err(ConfigError::Invalid(format!("tagset '{}' has no datasets", tagset.id)));
            }
            let mut datasets = BTreeSet::new();
            for dataset in &tagset.datasets {
                if !datasets.insert(dataset.id.as_str()) {
                    return Err(ConfigError::DuplicateId(format!("dataset '{}' in tagset '{}'", dataset.id, tagset.id)));
                }
                if !is_safe_id(&dataset.id) {
                    return Err(ConfigError::Invalid(format!("dataset id '{}' must be [A-Za-z0-9._-]", dataset.id)));
                }
                let tasks = dataset.effective_tasks();
                if let Some(m) = dataset.effective_average().iter().find(|m| !tasks.contains(m)) {
                    return Err(ConfigError::Invalid(format!(
                        "dataset '{}': average metric {m} is not among its tasks",
                        dataset.id
                    )));
                }
            }
        }
        if self.workers == 0 {
            return Err(ConfigError::Invalid("workers must be at least 1".into()));
        }
        Ok(())
    }
}

fn is_safe_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
}

/// A gold test set held in memory for the life of the service.
#[derive(Debug)]
pub struct GoldSet {
    pub representation: EvalRepresentation,
    pub evaluator: Evaluator,
    pub tasks: TaskSet,
}

/// A validated configuration with resolved paths and cached gold data.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: Arc<BenchmarkConfig>,
    pub base_dir: PathBuf,
    gold: Arc<HashMap<(String, String), Arc<GoldSet>>>,
}

impl LoadedConfig {
    pub fn gold(&self, tagset: &str, dataset: &str) -> Option<&Arc<GoldSet>> {
        self.gold.get(&(tagset.to_string(), dataset.to_string()))
    }

    pub fn data_dir(&self) -> PathBuf {
        self.base_dir.join(&self.config.data_dir)
    }

    pub fn page_path(&self, slug: &str) -> Option<PathBuf> {
        self.config.content_pages.get(slug).map(|p| self.base_dir.join(p))
    }
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
    let config: BenchmarkConfig = serde_yaml::from_str(&text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    from_config(config, &base_dir)
}

/// Validates `config`, resolving relative paths against `base_dir`.
pub fn from_config(config: BenchmarkConfig, base_dir: &Path) -> Result<LoadedConfig, ConfigError> {
    config.check()?;
    let mut gold = HashMap::new();
    for tagset in &config.tagsets {
        for dataset in &tagset.datasets {
            let set = load_gold(base_dir, dataset, config.feats_mode)?;
            gold.insert((tagset.id.clone(), dataset.id.clone()), Arc::new(set));
        }
    }
    for (slug, page) in &config.content_pages {
        if !base_dir.join(page).is_file() {
            return Err(ConfigError::MissingPage(slug.clone()));
        }
    }
    Ok(LoadedConfig {
        config: Arc::new(config),
        base_dir: base_dir.to_path_buf(),
        gold: Arc::new(gold),
    })
}

fn load_gold(base_dir: &Path, dataset: &DatasetConfig, feats_mode: FeatsMode) -> Result<GoldSet, ConfigError> {
    let path = base_dir.join(&dataset.gold_path);
    let text = std::fs::read_to_string(&path).map_err(|_| ConfigError::MissingGold(dataset.id.clone()))?;
    // Messages carry codes and line numbers only; gold content stays private.
    let invalid = |detail: String| ConfigError::InvalidGold {
        dataset: dataset.id.clone(),
        detail,
    };
    let file = parse_conllu(&text).map_err(|e| invalid(format!("line {}: {}", e.line, e.code)))?;
    let report = validate_treebank(&file, ValidationMode::Full);
    if let Some(issue) = report.errors.first() {
        return Err(invalid(format!("sentence {}, line {}: {}", issue.sentence, issue.line, issue.code)));
    }
    let representation = build_representation(&file, feats_mode).map_err(|e| invalid(e.to_string()))?;
    let tasks = dataset.effective_tasks();
    let evaluator = Evaluator::new(EvalOptions {
        feats_mode,
        supported: tasks.clone(),
        average_metrics: Some(dataset.effective_average()),
    });
    Ok(GoldSet {
        representation,
        evaluator,
        tasks,
    })
}

/// Config as served to clients: gold paths and server directories removed.
#[derive(Debug, Clone, Serialize)]
pub struct PublicConfig {
    pub benchmark_name: String,
    pub language_code: String,
    pub upload_limit_bytes: u64,
    pub pages: Vec<String>,
    pub tagsets: Vec<PublicTagset>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PublicTagset {
    pub id: String,
    pub label: String,
    pub datasets: Vec<PublicDataset>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PublicDataset {
    pub id: String,
    pub label: String,
    pub tasks: TaskSet,
    pub average_metrics: Vec<MetricId>,
}

impl From<&BenchmarkConfig> for PublicConfig {
    fn from(c: &BenchmarkConfig) -> Self {
        Self {
            benchmark_name: c.benchmark_name.clone(),
            language_code: c.language_code.clone(),
            upload_limit_bytes: c.upload_limit_bytes,
            pages: c.content_pages.keys().cloned().collect(),
            tagsets: c
                .tagsets
                .iter()
                .map(|t| PublicTagset {
                    id: t.id.clone(),
                    label: t.label.clone(),
                    datasets: t
                        .datasets
                        .iter()
                        .map(|d| PublicDataset {
                            id: d.id.clone(),
                            label: d.label.clone(),
                            tasks: d.effective_tasks(),
                            average_metrics: d.effective_average(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}
