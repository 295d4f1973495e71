//! Submission, evaluation and leaderboard service for a treebank benchmark.
//!
//! Predictions arrive as ZIP archives, are checked against hidden gold data,
//! scored in the background and become public only when their submitter
//! publishes them.

pub mod api;
pub mod archive;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod leaderboard;
pub mod model;
pub mod service;
pub mod store;
pub mod worker;

pub use api::{router, AppState};
pub use config::{load_config, BenchmarkConfig, LoadedConfig, PublicConfig};
pub use error::{ConfigError, ServiceError};
pub use leaderboard::{LeaderboardEntry, LeaderboardQuery, SortOrder};
pub use model::{Receipt, Rejection, RejectionCode, Submission, SubmissionStatus};
pub use service::{AnalyticsQuery, BenchmarkService, SubmissionView};
pub use worker::{serve, serve_listener, start, WorkerPool};
