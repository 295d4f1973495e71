use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nlpre_core::eval::{EvaluationReport, TaskSet};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubmissionStatus {
    Received,
    Validated,
    Evaluating,
    Evaluated,
    Published,
    Rejected,
}

impl SubmissionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SubmissionStatus::Received => "received",
            SubmissionStatus::Validated => "validated",
            SubmissionStatus::Evaluating => "evaluating",
            SubmissionStatus::Evaluated => "evaluated",
            SubmissionStatus::Published => "published",
            SubmissionStatus::Rejected => "rejected",
        }
    }

    /// Edges of the lifecycle graph. `Evaluating -> Rejected` records engine
    /// failures and `Evaluating -> Validated` is crash recovery.
    pub fn can_transition_to(self, next: SubmissionStatus) -> bool {
        use SubmissionStatus::*;
        matches!(
            (self, next),
            (Received, Validated)
                | (Received, Rejected)
                | (Validated, Evaluating)
                | (Validated, Rejected)
                | (Evaluating, Evaluated)
                | (Evaluating, Rejected)
                | (Evaluating, Validated)
                | (Evaluated, Published)
        )
    }

    pub fn has_reports(self) -> bool {
        matches!(self, SubmissionStatus::Evaluated | SubmissionStatus::Published)
    }
}

impl fmt::Display for SubmissionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SubmissionStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use SubmissionStatus::*;
        [Received, Validated, Evaluating, Evaluated, Published, Rejected]
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown status '{s}'"))
    }
}

/// Why a submission was rejected; `code` is stable for clients.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub code: RejectionCode,
    pub dataset: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectionCode {
    MissingManifest,
    BadManifest,
    UnknownTagset,
    UnsupportedTask,
    MissingDataset,
    UnexpectedFile,
    ParseError,
    InvalidPrediction,
    TextMismatch,
    EngineError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitterMetadata {
    pub model_name: String,
    pub embeddings_label: Option<String>,
    pub contact: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub id: String,
    pub metadata: SubmitterMetadata,
    pub tagset_id: String,
    pub declared_tasks: TaskSet,
    pub archive_digest: String,
    pub status: SubmissionStatus,
    pub rejection: Vec<Rejection>,
    /// Present iff the status is evaluated or published.
    pub reports: BTreeMap<String, EvaluationReport>,
    pub created_at: i64,
    pub updated_at: i64,
    pub published_at: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusChange {
    pub status: SubmissionStatus,
    pub at: i64,
}

/// Returned once from a successful upload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub id: String,
    pub access_token: String,
    pub status: SubmissionStatus,
}

pub fn now_millis() -> i64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as i64)
        .unwrap_or(0)
}
