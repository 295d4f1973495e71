//! Submission lifecycle on top of the store: ingest, validate, evaluate,
//! publish, and the read-side queries behind the API.
//!
//! Methods are synchronous and may be CPU heavy; async callers run them on a
//! blocking thread.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use nlpre_core::analytics::{
    correlation_matrix, dispersion_summary, score_vector, AveragingOrder, CorrelationMatrix, DispersionSummary,
    ScoreVector, ScoredEntry, VectorKey, VectorOptions, VECTOR_METRICS,
};
use nlpre_core::conllu::{parse_conllu, validate_treebank, ValidationMode};
use nlpre_core::eval::{check_characters, EvalError, EvaluationReport, MetricId, TaskSet};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::archive::{self, ArchiveContents, ArchiveError, Manifest};
use crate::config::{LoadedConfig, PublicConfig, TagsetConfig};
use crate::error::ServiceError;
use crate::fixtures;
use crate::leaderboard::{self, LeaderboardEntry, LeaderboardQuery};
use crate::model::{
    now_millis, Receipt, Rejection, RejectionCode, StatusChange, Submission, SubmissionStatus, SubmitterMetadata,
};
use crate::store::{NewSubmission, Store};

/// Inflated archives may be this many times larger than the upload limit.
const EXPANSION_FACTOR: u64 = 16;

pub struct BenchmarkService {
    config: LoadedConfig,
    store: Store,
    archive_dir: PathBuf,
}

/// What a client sees of a submission. Reports are fractions, as produced
/// by the engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionView {
    pub id: String,
    pub status: SubmissionStatus,
    pub model_name: String,
    pub embeddings_label: Option<String>,
    /// Only shown to the token holder.
    pub contact: Option<String>,
    pub tagset_id: String,
    pub declared_tasks: TaskSet,
    pub reports: BTreeMap<String, EvaluationReport>,
    pub rejection: Vec<Rejection>,
    pub history: Vec<StatusChange>,
    pub created_at: i64,
    pub updated_at: i64,
    pub published_at: Option<i64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnalyticsQuery {
    /// Empty means every tagset.
    pub tagsets: Vec<String>,
    /// Empty means the default vector metrics.
    pub metrics: Vec<MetricId>,
    pub datasets: Option<Vec<String>>,
    pub order: AveragingOrder,
    /// One vector per model and embedding instead of per model.
    pub by_embedding: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationResponse {
    pub vectors: Vec<ScoreVector>,
    pub matrix: CorrelationMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersionResponse {
    pub vectors: Vec<ScoreVector>,
    pub summaries: Vec<DispersionSummary>,
}

/// What a worker should do next with a submission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Validate,
    Evaluate,
    Done,
}

impl BenchmarkService {
    /// Opens (or creates) the store and archive directory under the
    /// configured data directory.
    pub fn open(config: LoadedConfig) -> Result<Self, ServiceError> {
        let data_dir = config.data_dir();
        let archive_dir = data_dir.join("archives");
        std::fs::create_dir_all(&archive_dir)?;
        let store = Store::open(&data_dir.join("bench.sqlite3"))?;
        Ok(Self {
            config,
            store,
            archive_dir,
        })
    }

    pub fn config(&self) -> &LoadedConfig {
        &self.config
    }

    pub fn public_config(&self) -> PublicConfig {
        PublicConfig::from(self.config.config.as_ref())
    }

    fn tagset(&self, id: &str) -> Result<&TagsetConfig, ServiceError> {
        self.config
            .config
            .tagset(id)
            .ok_or_else(|| ServiceError::UnknownTagset(id.to_string()))
    }

    fn archive_path(&self, digest: &str) -> PathBuf {
        self.archive_dir.join(format!("{digest}.zip"))
    }

    // Ingest

    pub fn create_submission(&self, bytes: &[u8]) -> Result<Receipt, ServiceError> {
        let limit = self.config.config.upload_limit_bytes;
        if bytes.len() as u64 > limit {
            return Err(ServiceError::TooLarge { limit });
        }
        if !archive::is_zip(bytes) {
            return Err(ServiceError::NotAZip);
        }
        let digest = archive::digest(bytes);
        let done = [SubmissionStatus::Evaluated, SubmissionStatus::Published];
        if let Some(existing_id) = self.store.find_by_digest(&digest, &done)? {
            return Err(ServiceError::DuplicateArchive { existing_id });
        }
        write_atomically(&self.archive_path(&digest), bytes)?;

        // Best effort: a broken manifest is reported by validation instead.
        let manifest = archive::read_archive(bytes, limit * EXPANSION_FACTOR)
            .ok()
            .and_then(|c| c.manifest)
            .and_then(|m| archive::parse_manifest(&m).ok());
        let metadata = manifest.as_ref().map(metadata_of).unwrap_or_else(|| SubmitterMetadata {
            model_name: String::new(),
            embeddings_label: None,
            contact: None,
        });
        let tagset_id = manifest.map(|m| m.tagset).unwrap_or_default();

        let id = uuid::Uuid::new_v4().to_string();
        let token = new_token();
        self.store.insert_submission(
            &NewSubmission {
                id: &id,
                token_hash: &hash_token(&token),
                metadata: &metadata,
                tagset_id: &tagset_id,
                declared_tasks: &TaskSet::new(),
                archive_digest: &digest,
            },
            SubmissionStatus::Received,
        )?;
        tracing::info!(submission = %id, "received");
        Ok(Receipt {
            id,
            access_token: token,
            status: SubmissionStatus::Received,
        })
    }

    // Background steps

    pub fn next_step(&self, id: &str) -> Result<Step, ServiceError> {
        Ok(match self.store.status(id)? {
            Some(SubmissionStatus::Received) => Step::Validate,
            Some(SubmissionStatus::Validated) => Step::Evaluate,
            _ => Step::Done,
        })
    }

    /// Runs validation and evaluation as far as the submission allows.
    pub fn process(&self, id: &str) -> Result<SubmissionStatus, ServiceError> {
        loop {
            match self.next_step(id)? {
                Step::Validate => {
                    self.validate_submission(id)?;
                }
                Step::Evaluate => {
                    self.evaluate_submission(id)?;
                }
                Step::Done => return self.store.status(id)?.ok_or(ServiceError::WrongToken),
            }
        }
    }

    fn load_contents(&self, digest: &str) -> Result<ArchiveContents, ArchiveError> {
        let bytes = std::fs::read(self.archive_path(digest)).map_err(|_| ArchiveError::Unreadable(digest.into()))?;
        archive::read_archive(&bytes, self.config.config.upload_limit_bytes * EXPANSION_FACTOR)
    }

    /// received -> validated | rejected. A no-op if another caller already
    /// moved the submission on.
    pub fn validate_submission(&self, id: &str) -> Result<SubmissionStatus, ServiceError> {
        let sub = self.store.get(id)?.ok_or(ServiceError::WrongToken)?;
        if sub.status != SubmissionStatus::Received {
            return Ok(sub.status);
        }
        let (outcome, manifest) = match self.load_contents(&sub.archive_digest) {
            Ok(contents) => self.check_contents(&contents),
            Err(e) => (Err(vec![archive_rejection(e)]), None),
        };
        if let Some((meta, tagset, tasks)) = &manifest {
            self.store.update_manifest(id, meta, tagset, tasks)?;
        }
        let (next, reasons) = match outcome {
            Ok(()) => (SubmissionStatus::Validated, None),
            Err(reasons) => (SubmissionStatus::Rejected, Some(reasons)),
        };
        self.store
            .transition(id, SubmissionStatus::Received, next, reasons.as_deref())?;
        let status = self.store.status(id)?.ok_or(ServiceError::WrongToken)?;
        tracing::info!(submission = %id, %status, "validated");
        Ok(status)
    }

    /// Every check runs so that a rejection lists all problems at once.
    #[allow(clippy::type_complexity)]
    fn check_contents(
        &self,
        contents: &ArchiveContents,
    ) -> (Result<(), Vec<Rejection>>, Option<(SubmitterMetadata, String, TaskSet)>) {
        let reject = |code, dataset: Option<&str>, message: String| Rejection {
            code,
            dataset: dataset.map(str::to_string),
            message,
        };
        let Some(text) = &contents.manifest else {
            let r = reject(RejectionCode::MissingManifest, None, format!("{} is missing", archive::MANIFEST_NAME));
            return (Err(vec![r]), None);
        };
        let manifest = match archive::parse_manifest(text) {
            Ok(m) => m,
            Err(e) => return (Err(vec![reject(RejectionCode::BadManifest, None, e)]), None),
        };
        let meta = metadata_of(&manifest);
        let Ok(tagset) = self.tagset(&manifest.tagset) else {
            let r = reject(
                RejectionCode::UnknownTagset,
                None,
                format!("tagset '{}' is not part of this benchmark", manifest.tagset),
            );
            return (Err(vec![r]), Some((meta, manifest.tagset.clone(), TaskSet::new())));
        };

        let mut reasons = Vec::new();
        let offered: TaskSet = tagset.datasets.iter().flat_map(|d| d.effective_tasks()).collect();
        let tasks: TaskSet = match &manifest.tasks {
            None => offered.clone(),
            Some(names) => {
                let mut tasks = TaskSet::new();
                for name in names {
                    match name.parse::<MetricId>() {
                        Ok(m) if offered.contains(&m) => {
                            tasks.insert(m);
                        }
                        Ok(m) => reasons.push(reject(
                            RejectionCode::UnsupportedTask,
                            None,
                            format!("task {m} is not offered for tagset '{}'", tagset.id),
                        )),
                        Err(e) => reasons.push(reject(RejectionCode::UnsupportedTask, None, e.to_string())),
                    }
                }
                tasks
            }
        };

        let expected: BTreeSet<&str> = tagset.datasets.iter().map(|d| d.id.as_str()).collect();
        for name in &contents.unexpected {
            reasons.push(reject(RejectionCode::UnexpectedFile, None, format!("unexpected entry '{name}'")));
        }
        for name in contents.predictions.keys().filter(|d| !expected.contains(d.as_str())) {
            reasons.push(reject(
                RejectionCode::UnexpectedFile,
                None,
                format!("'{name}{}' is not a dataset of tagset '{}'", archive::PREDICTION_SUFFIX, tagset.id),
            ));
        }
        for dataset in &tagset.datasets {
            let Some(text) = contents.predictions.get(&dataset.id) else {
                reasons.push(reject(
                    RejectionCode::MissingDataset,
                    Some(&dataset.id),
                    format!("{}{} is missing", dataset.id, archive::PREDICTION_SUFFIX),
                ));
                continue;
            };
            let gold = self.config.gold(&tagset.id, &dataset.id).expect("gold loaded for every dataset");
            if let Err((code, message)) = check_prediction(text, gold) {
                reasons.push(reject(code, Some(&dataset.id), message));
            }
        }
        let outcome = if reasons.is_empty() { Ok(()) } else { Err(reasons) };
        (outcome, Some((meta, tagset.id.clone(), tasks)))
    }

    /// validated -> evaluating -> evaluated | rejected. Reports and the final
    /// status are written in one transaction.
    pub fn evaluate_submission(&self, id: &str) -> Result<SubmissionStatus, ServiceError> {
        if !self
            .store
            .transition(id, SubmissionStatus::Validated, SubmissionStatus::Evaluating, None)?
        {
            return self.store.status(id)?.ok_or(ServiceError::WrongToken);
        }
        let sub = self.store.get(id)?.ok_or(ServiceError::WrongToken)?;
        match self.score(&sub) {
            Ok(reports) => {
                self.store.complete_evaluation(id, &reports)?;
            }
            Err(message) => {
                let reason = [Rejection {
                    code: RejectionCode::EngineError,
                    dataset: None,
                    message,
                }];
                self.store
                    .transition(id, SubmissionStatus::Evaluating, SubmissionStatus::Rejected, Some(&reason))?;
            }
        }
        let status = self.store.status(id)?.ok_or(ServiceError::WrongToken)?;
        tracing::info!(submission = %id, %status, "evaluated");
        Ok(status)
    }

    fn score(&self, sub: &Submission) -> Result<BTreeMap<String, EvaluationReport>, String> {
        let contents = self.load_contents(&sub.archive_digest).map_err(|e| e.to_string())?;
        let tagset = self.tagset(&sub.tagset_id).map_err(|e| e.to_string())?;
        let mut reports = BTreeMap::new();
        for dataset in &tagset.datasets {
            let gold = self.config.gold(&tagset.id, &dataset.id).expect("gold loaded for every dataset");
            let text = contents
                .predictions
                .get(&dataset.id)
                .ok_or_else(|| format!("{} disappeared from the archive", dataset.id))?;
            let file = parse_conllu(text).map_err(|e| format!("{}: line {}: {}", dataset.id, e.line, e.code))?;
            let system = gold.evaluator.representation(&file).map_err(|e| engine_message(&dataset.id, &e))?;
            let tasks: TaskSet = sub.declared_tasks.intersection(&gold.tasks).copied().collect();
            let report = gold
                .evaluator
                .evaluate_representations(&gold.representation, &system, &tasks)
                .map_err(|e| engine_message(&dataset.id, &e))?;
            reports.insert(dataset.id.clone(), report);
        }
        Ok(reports)
    }

    /// Marks a submission whose evaluation died unexpectedly as rejected.
    pub fn abandon(&self, id: &str, message: &str) -> Result<(), ServiceError> {
        let reason = [Rejection {
            code: RejectionCode::EngineError,
            dataset: None,
            message: message.to_string(),
        }];
        for from in [SubmissionStatus::Received, SubmissionStatus::Validated, SubmissionStatus::Evaluating] {
            if self.store.transition(id, from, SubmissionStatus::Rejected, Some(&reason))? {
                break;
            }
        }
        Ok(())
    }

    /// Startup recovery: interrupted evaluations go back to validated. Returns
    /// every id that still needs work, oldest first.
    pub fn recover(&self) -> Result<Vec<String>, ServiceError> {
        for id in self.store.ids_with_status(SubmissionStatus::Evaluating)? {
            self.store
                .transition(&id, SubmissionStatus::Evaluating, SubmissionStatus::Validated, None)?;
            tracing::warn!(submission = %id, "requeued interrupted evaluation");
        }
        let mut pending = self.store.ids_with_status(SubmissionStatus::Received)?;
        pending.extend(self.store.ids_with_status(SubmissionStatus::Validated)?);
        Ok(pending)
    }

    // Client operations

    fn authorise(&self, id: &str, token: Option<&str>) -> Result<bool, ServiceError> {
        let stored = self.store.token_hash(id)?.ok_or(ServiceError::WrongToken)?;
        Ok(token.is_some_and(|t| constant_time_eq(hash_token(t).as_bytes(), stored.as_bytes())))
    }

    /// Published submissions are public; anything else needs the token.
    pub fn get_submission(&self, id: &str, token: Option<&str>) -> Result<SubmissionView, ServiceError> {
        let authorised = self.authorise(id, token)?;
        let sub = self.store.get(id)?.ok_or(ServiceError::WrongToken)?;
        if !authorised && sub.status != SubmissionStatus::Published {
            return Err(ServiceError::WrongToken);
        }
        let history = self.store.history(id)?;
        Ok(SubmissionView {
            id: sub.id,
            status: sub.status,
            model_name: sub.metadata.model_name,
            embeddings_label: sub.metadata.embeddings_label,
            contact: sub.metadata.contact.filter(|_| authorised),
            tagset_id: sub.tagset_id,
            declared_tasks: sub.declared_tasks,
            reports: sub.reports,
            rejection: sub.rejection,
            history,
            created_at: sub.created_at,
            updated_at: sub.updated_at,
            published_at: sub.published_at,
        })
    }

    /// evaluated -> published. Publishing twice returns the same entry.
    pub fn publish(&self, id: &str, token: &str) -> Result<LeaderboardEntry, ServiceError> {
        if !self.authorise(id, Some(token))? {
            return Err(ServiceError::WrongToken);
        }
        let status = self.store.status(id)?.ok_or(ServiceError::WrongToken)?;
        match status {
            SubmissionStatus::Published => {}
            SubmissionStatus::Evaluated => {
                self.store
                    .transition(id, SubmissionStatus::Evaluated, SubmissionStatus::Published, None)?;
                tracing::info!(submission = %id, "published");
            }
            other => {
                return Err(ServiceError::WrongState {
                    expected: SubmissionStatus::Evaluated.to_string(),
                    actual: other.to_string(),
                })
            }
        }
        let tagset = self.store.get(id)?.ok_or(ServiceError::WrongToken)?.tagset_id;
        let rows = self.leaderboard(&LeaderboardQuery {
            tagset,
            ..Default::default()
        })?;
        rows.into_iter()
            .find(|e| e.submission_id == id)
            .ok_or(ServiceError::WrongToken)
    }

    pub fn leaderboard(&self, query: &LeaderboardQuery) -> Result<Vec<LeaderboardEntry>, ServiceError> {
        let tagset = self.tagset(&query.tagset)?;
        if let Some(d) = &query.dataset {
            if !tagset.datasets.iter().any(|x| &x.id == d) {
                return Err(ServiceError::UnknownDataset(d.clone()));
            }
        }
        let published = self.store.published(&tagset.id)?;
        Ok(leaderboard::build(&published, query))
    }

    pub fn page(&self, slug: &str) -> Result<String, ServiceError> {
        let path = self
            .config
            .page_path(slug)
            .ok_or_else(|| ServiceError::UnknownPage(slug.to_string()))?;
        Ok(std::fs::read_to_string(path)?)
    }

    // Analytics

    fn scored_entries(&self, tagsets: &[String]) -> Result<Vec<ScoredEntry>, ServiceError> {
        let ids: Vec<String> = if tagsets.is_empty() {
            self.config.config.tagsets.iter().map(|t| t.id.clone()).collect()
        } else {
            for t in tagsets {
                self.tagset(t)?;
            }
            tagsets.to_vec()
        };
        let mut entries = Vec::new();
        for tagset in ids {
            for sub in self.store.published(&tagset)? {
                entries.push(ScoredEntry {
                    model: sub.metadata.model_name,
                    embedding: sub.metadata.embeddings_label,
                    tagset: sub.tagset_id,
                    datasets: sub.reports,
                });
            }
        }
        Ok(entries)
    }

    pub fn score_vectors(&self, query: &AnalyticsQuery) -> Result<Vec<ScoreVector>, ServiceError> {
        let entries = self.scored_entries(&query.tagsets)?;
        let metrics: Vec<MetricId> = if query.metrics.is_empty() {
            VECTOR_METRICS.to_vec()
        } else {
            query.metrics.clone()
        };
        let keys: BTreeSet<VectorKey> = entries
            .iter()
            .map(|e| VectorKey {
                model: e.model.clone(),
                tagset: e.tagset.clone(),
                embedding: e.embedding.clone().filter(|_| query.by_embedding),
            })
            .collect();
        let options = VectorOptions {
            order: query.order,
            datasets: query.datasets.clone(),
        };
        keys.iter()
            .map(|k| score_vector(&entries, k, &metrics, &options).map_err(ServiceError::from))
            .collect()
    }

    pub fn correlation(&self, query: &AnalyticsQuery) -> Result<CorrelationResponse, ServiceError> {
        let vectors = self.score_vectors(query)?;
        let matrix = correlation_matrix(&vectors)?;
        Ok(CorrelationResponse { vectors, matrix })
    }

    pub fn dispersion(&self, query: &AnalyticsQuery) -> Result<DispersionResponse, ServiceError> {
        let vectors = self.score_vectors(query)?;
        let summaries = dispersion_summary(&vectors)?;
        Ok(DispersionResponse { vectors, summaries })
    }

    // Maintenance

    /// Inserts the bundled published results for configured tagsets. Returns
    /// how many entries were new.
    pub fn seed_fixtures(&self) -> Result<usize, ServiceError> {
        let mut inserted = 0;
        for seed in fixtures::fixture_entries(&self.config.config)? {
            let new = NewSubmission {
                id: &seed.id,
                token_hash: "",
                metadata: &seed.metadata,
                tagset_id: &seed.tagset_id,
                declared_tasks: &seed.tasks,
                archive_digest: "",
            };
            if self.store.insert_published(&new, &seed.reports)? {
                inserted += 1;
            }
        }
        Ok(inserted)
    }

    /// Deletes unpublished submissions older than the retention window, if
    /// one is configured, along with archives no longer referenced.
    pub fn purge_expired(&self, now: i64) -> Result<usize, ServiceError> {
        let Some(days) = self.config.config.retention_days else {
            return Ok(0);
        };
        let cutoff = now - i64::from(days) * 86_400_000;
        let digests = self.store.purge_unpublished_before(cutoff)?;
        let removed = digests.len();
        for digest in digests.into_iter().collect::<BTreeSet<_>>() {
            if !self.store.digest_in_use(&digest)? {
                let _ = std::fs::remove_file(self.archive_path(&digest));
            }
        }
        if removed > 0 {
            tracing::info!(removed, "purged expired submissions");
        }
        Ok(removed)
    }

    pub fn purge_expired_now(&self) -> Result<usize, ServiceError> {
        self.purge_expired(now_millis())
    }
}

fn metadata_of(m: &Manifest) -> SubmitterMetadata {
    SubmitterMetadata {
        model_name: m.model_name.clone(),
        embeddings_label: m.embeddings.clone(),
        contact: m.contact.clone(),
    }
}

/// Surface validity plus character identity with the gold text. Messages
/// describe the prediction only.
fn check_prediction(text: &str, gold: &crate::config::GoldSet) -> Result<(), (RejectionCode, String)> {
    let file = parse_conllu(text).map_err(|e| (RejectionCode::ParseError, format!("line {}: {}", e.line, e.message)))?;
    let report = validate_treebank(&file, ValidationMode::Surface);
    if let Some(issue) = report.errors.first() {
        return Err((
            RejectionCode::InvalidPrediction,
            format!("sentence {}, line {}: {}", issue.sentence, issue.line, issue.message),
        ));
    }
    let system = gold
        .evaluator
        .representation(&file)
        .map_err(|e| (RejectionCode::InvalidPrediction, e.to_string()))?;
    check_characters(&gold.representation, &system).map_err(|e| match e {
        EvalError::MismatchedCharacters { offset } => (
            RejectionCode::TextMismatch,
            format!("text differs from the input at character {offset}"),
        ),
        other => (RejectionCode::InvalidPrediction, other.to_string()),
    })
}

fn archive_rejection(e: ArchiveError) -> Rejection {
    let code = match e {
        ArchiveError::NotUtf8(_) | ArchiveError::Unreadable(_) => RejectionCode::ParseError,
        ArchiveError::NotAZip | ArchiveError::TooLargeUncompressed(_) => RejectionCode::InvalidPrediction,
    };
    Rejection {
        code,
        dataset: None,
        message: e.to_string(),
    }
}

fn engine_message(dataset: &str, e: &EvalError) -> String {
    match e {
        // The offset is safe; gold text is not.
        EvalError::MismatchedCharacters { offset } => format!("{dataset}: text differs at character {offset}"),
        other => format!("{dataset}: {other}"),
    }
}

fn new_token() -> String {
    let mut bytes = [0u8; 32];
    rand::thread_rng().fill_bytes(&mut bytes);
    hex::encode(bytes)
}

fn hash_token(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

fn write_atomically(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if path.exists() {
        return Ok(());
    }
    let tmp = path.with_extension(format!("tmp-{}", uuid::Uuid::new_v4()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}
