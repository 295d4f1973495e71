//! SQLite persistence. Every status change and the report write that goes
//! with it happen in one transaction, so readers never see a torn state.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Mutex, MutexGuard};

use nlpre_core::eval::{EvaluationReport, TaskSet};
use rusqlite::{params, Connection, OptionalExtension, Row, Transaction};

use crate::model::{now_millis, Rejection, StatusChange, Submission, SubmissionStatus, SubmitterMetadata};

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS submissions (
    id TEXT PRIMARY KEY,
    token_hash TEXT NOT NULL,
    model_name TEXT NOT NULL,
    embeddings_label TEXT,
    contact TEXT,
    tagset_id TEXT NOT NULL,
    declared_tasks TEXT NOT NULL,
    archive_digest TEXT NOT NULL,
    status TEXT NOT NULL,
    rejection TEXT NOT NULL DEFAULT '[]',
    created_at INTEGER NOT NULL,
    updated_at INTEGER NOT NULL,
    published_at INTEGER
);
CREATE INDEX IF NOT EXISTS submissions_digest ON submissions(archive_digest);
CREATE INDEX IF NOT EXISTS submissions_tagset ON submissions(tagset_id, status);
CREATE TABLE IF NOT EXISTS reports (
    submission_id TEXT NOT NULL REFERENCES submissions(id) ON DELETE CASCADE,
    dataset_id TEXT NOT NULL,
    report TEXT NOT NULL,
    PRIMARY KEY (submission_id, dataset_id)
);
CREATE TABLE IF NOT EXISTS status_history (
    submission_id TEXT NOT NULL REFERENCES submissions(id) ON DELETE CASCADE,
    seq INTEGER NOT NULL,
    status TEXT NOT NULL,
    at INTEGER NOT NULL,
    PRIMARY KEY (submission_id, seq)
);
";

pub struct Store {
    conn: Mutex<Connection>,
}

/// Everything needed to insert a submission row.
pub struct NewSubmission<'a> {
    pub id: &'a str,
    pub token_hash: &'a str,
    pub metadata: &'a SubmitterMetadata,
    pub tagset_id: &'a str,
    pub declared_tasks: &'a TaskSet,
    pub archive_digest: &'a str,
}

impl Store {
    pub fn open(path: &Path) -> rusqlite::Result<Self> {
        let conn = Connection::open(path)?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        Self::init(conn)
    }

    pub fn open_in_memory() -> rusqlite::Result<Self> {
        Self::init(Connection::open_in_memory()?)
    }

    fn init(conn: Connection) -> rusqlite::Result<Self> {
        conn.pragma_update(None, "foreign_keys", "ON")?;
        conn.pragma_update(None, "busy_timeout", 5000)?;
        conn.execute_batch(SCHEMA)?;
        Ok(Self { conn: Mutex::new(conn) })
    }

    fn lock(&self) -> MutexGuard<'_, Connection> {
        // A panic while holding the lock cannot leave a transaction open:
        // rusqlite rolls back on drop.
        self.conn.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn insert_submission(&self, new: &NewSubmission<'_>, status: SubmissionStatus) -> rusqlite::Result<()> {
        let mut conn = self.lock();
        let tx = conn.transaction()?;
        insert_row(&tx, new, status, now_millis())?;
        push_history(&tx, new.id, status)?;
        tx.commit()
    }

    /// Inserts a published entry with reports unless the id exists.
    /// Returns false when it was already present.
    pub fn insert_published(
        &self,
        new: &NewSubmission<'_>,
        reports: &BTreeMap<String, EvaluationReport>,
    ) -> rusqlite::Result<bool> {
        let mut conn = self.lock();
        let tx = conn.transaction()?;
        let exists: bool = tx.query_row("SELECT COUNT(*) FROM submissions WHERE id = ?1", [new.id], |r| r.get::<_, i64>(0))? > 0;
        if exists {
            return Ok(false);
        }
        let now = now_millis();
        insert_row(&tx, new, SubmissionStatus::Published, now)?;
        tx.execute("UPDATE submissions SET published_at = ?2 WHERE id = ?1", params![new.id, now])?;
        write_reports(&tx, new.id, reports)?;
        push_history(&tx, new.id, SubmissionStatus::Published)?;
        tx.commit()?;
        Ok(true)
    }

    pub fn token_hash(&self, id: &str) -> rusqlite::Result<Option<String>> {
        self.lock()
            .query_row("SELECT token_hash FROM submissions WHERE id = ?1", [id], |r| r.get(0))
            .optional()
    }

    pub fn find_by_digest(&self, digest: &str, statuses: &[SubmissionStatus]) -> rusqlite::Result<Option<String>> {
        let conn = self.lock();
        let mut stmt = conn.prepare("SELECT id, status FROM submissions WHERE archive_digest = ?1 ORDER BY created_at")?;
        let rows = stmt.query_map([digest], |r| Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?)))?;
        for row in rows {
            let (id, status) = row?;
            if statuses.iter().any(|s| s.as_str() == status) {
                return Ok(Some(id));
            }
        }
        Ok(None)
    }

    pub fn get(&self, id: &str) -> rusqlite::Result<Option<Submission>> {
        let conn = self.lock();
        let Some(mut sub) = conn
            .query_row(&format!("{SELECT_SUBMISSION} WHERE id = ?1"), [id], read_submission)
            .optional()?
        else {
            return Ok(None);
        };
        sub.reports = read_reports(&conn, id)?;
        Ok(Some(sub))
    }

    pub fn status(&self, id: &str) -> rusqlite::Result<Option<SubmissionStatus>> {
        let status: Option<String> = self
            .lock()
            .query_row("SELECT status FROM submissions WHERE id = ?1", [id], |r| r.get(0))
            .optional()?;
        Ok(status.and_then(|s| s.parse().ok()))
    }

    /// Moves `id` from `from` to `to` if it is still in `from`. Returns false
    /// when another worker got there first or the edge is not allowed.
    pub fn transition(
        &self,
        id: &str,
        from: SubmissionStatus,
        to: SubmissionStatus,
        rejection: Option<&[Rejection]>,
    ) -> rusqlite::Result<bool> {
        if !from.can_transition_to(to) {
            return Ok(false);
        }
        let mut conn = self.lock();
        let tx = conn.transaction()?;
        let changed = tx.execute(
            "UPDATE submissions SET status = ?3, updated_at = ?4 WHERE id = ?1 AND status = ?2",
            params![id, from.as_str(), to.as_str(), now_millis()],
        )?;
        if changed == 0 {
            return Ok(false);
        }
        if let Some(reasons) = rejection {
            let json = serde_json::to_string(reasons).expect("rejections serialise");
            tx.execute("UPDATE submissions SET rejection = ?2 WHERE id = ?1", params![id, json])?;
        }
        if to == SubmissionStatus::Published {
            tx.execute("UPDATE submissions SET published_at = ?2 WHERE id = ?1", params![id, now_millis()])?;
        }
        push_history(&tx, id, to)?;
        tx.commit()?;
        Ok(true)
    }

    pub fn update_manifest(
        &self,
        id: &str,
        metadata: &SubmitterMetadata,
        tagset_id: &str,
        tasks: &TaskSet,
    ) -> rusqlite::Result<()> {
        self.lock().execute(
            "UPDATE submissions SET model_name = ?2, embeddings_label = ?3, contact = ?4, tagset_id = ?5, declared_tasks = ?6 WHERE id = ?1",
            params![
                id,
                metadata.model_name,
                metadata.embeddings_label,
                metadata.contact,
                tagset_id,
                serde_json::to_string(tasks).expect("tasks serialise")
            ],
        )?;
        Ok(())
    }

    /// Stores reports and flips evaluating to evaluated in one transaction.
    pub fn complete_evaluation(&self, id: &str, reports: &BTreeMap<String, EvaluationReport>) -> rusqlite::Result<bool> {
        let mut conn = self.lock();
        let tx = conn.transaction()?;
        let changed = tx.execute(
            "UPDATE submissions SET status = 'evaluated', updated_at = ?2 WHERE id = ?1 AND status = 'evaluating'",
            params![id, now_millis()],
        )?;
        if changed == 0 {
            return Ok(false);
        }
        tx.execute("DELETE FROM reports WHERE submission_id = ?1", [id])?;
        write_reports(&tx, id, reports)?;
        push_history(&tx, id, SubmissionStatus::Evaluated)?;
        tx.commit()?;
        Ok(true)
    }

    pub fn published(&self, tagset_id: &str) -> rusqlite::Result<Vec<Submission>> {
        let conn = self.lock();
        let mut stmt = conn.prepare(&format!(
            "{SELECT_SUBMISSION} WHERE tagset_id = ?1 AND status = 'published' ORDER BY published_at, id"
        ))?;
        let mut subs: Vec<Submission> = stmt.query_map([tagset_id], read_submission)?.collect::<Result<_, _>>()?;
        for sub in &mut subs {
            sub.reports = read_reports(&conn, &sub.id)?;
        }
        Ok(subs)
    }

    pub fn history(&self, id: &str) -> rusqlite::Result<Vec<StatusChange>> {
        let conn = self.lock();
        let mut stmt = conn.prepare("SELECT status, at FROM status_history WHERE submission_id = ?1 ORDER BY seq")?;
        let rows = stmt.query_map([id], |r| {
            let status: String = r.get(0)?;
            Ok(StatusChange {
                status: status.parse().map_err(|e: String| {
                    rusqlite::Error::FromSqlConversionFailure(0, rusqlite::types::Type::Text, e.into())
                })?,
                at: r.get(1)?,
            })
        })?;
        rows.collect()
    }

    /// Ids in `status`, oldest first.
    pub fn ids_with_status(&self, status: SubmissionStatus) -> rusqlite::Result<Vec<String>> {
        let conn = self.lock();
        let mut stmt = conn.prepare("SELECT id FROM submissions WHERE status = ?1 ORDER BY created_at, id")?;
        let rows = stmt.query_map([status.as_str()], |r| r.get(0))?;
        rows.collect()
    }

    /// Deletes unpublished submissions created before `cutoff` (ms since epoch).
    /// Returns the digests of the removed archives.
    pub fn purge_unpublished_before(&self, cutoff: i64) -> rusqlite::Result<Vec<String>> {
        let mut conn = self.lock();
        let tx = conn.transaction()?;
        let digests: Vec<String> = {
            let mut stmt = tx.prepare(
                "SELECT archive_digest FROM submissions WHERE status != 'published' AND created_at < ?1",
            )?;
            let rows = stmt.query_map([cutoff], |r| r.get(0))?;
            rows.collect::<Result<_, _>>()?
        };
        tx.execute(
            "DELETE FROM submissions WHERE status != 'published' AND created_at < ?1",
            [cutoff],
        )?;
        tx.commit()?;
        Ok(digests)
    }

    pub fn digest_in_use(&self, digest: &str) -> rusqlite::Result<bool> {
        let n: i64 = self
            .lock()
            .query_row("SELECT COUNT(*) FROM submissions WHERE archive_digest = ?1", [digest], |r| r.get(0))?;
        Ok(n > 0)
    }

    #[cfg(test)]
    pub(crate) fn force_status(&self, id: &str, status: SubmissionStatus) {
        self.lock()
            .execute("UPDATE submissions SET status = ?2 WHERE id = ?1", params![id, status.as_str()])
            .unwrap();
    }
}

const SELECT_SUBMISSION: &str = "SELECT id, model_name, embeddings_label, contact, tagset_id, declared_tasks, archive_digest, status, rejection, created_at, updated_at, published_at FROM submissions";

fn conversion(e: impl std::error::Error + Send + Sync + 'static) -> rusqlite::Error {
    rusqlite::Error::FromSqlConversionFailure(0, rusqlite::types::Type::Text, Box::new(e))
}

fn read_submission(r: &Row<'_>) -> rusqlite::Result<Submission> {
    let tasks: String = r.get(5)?;
    let status: String = r.get(7)?;
    let rejection: String = r.get(8)?;
    Ok(Submission {
        id: r.get(0)?,
        metadata: SubmitterMetadata {
            model_name: r.get(1)?,
            embeddings_label: r.get(2)?,
            contact: r.get(3)?,
        },
        tagset_id: r.get(4)?,
        declared_tasks: serde_json::from_str(&tasks).map_err(conversion)?,
        archive_digest: r.get(6)?,
        status: status
            .parse()
            .map_err(|e: String| conversion(std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?,
        rejection: serde_json::from_str(&rejection).map_err(conversion)?,
        reports: BTreeMap::new(),
        created_at: r.get(9)?,
        updated_at: r.get(10)?,
        published_at: r.get(11)?,
    })
}

fn read_reports(conn: &Connection, id: &str) -> rusqlite::Result<BTreeMap<String, EvaluationReport>> {
    let mut stmt = conn.prepare("SELECT dataset_id, report FROM reports WHERE submission_id = ?1 ORDER BY dataset_id")?;
    let rows = stmt.query_map([id], |r| Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?)))?;
    let mut out = BTreeMap::new();
    for row in rows {
        let (dataset, json) = row?;
        out.insert(dataset, serde_json::from_str(&json).map_err(conversion)?);
    }
    Ok(out)
}

fn insert_row(tx: &Transaction<'_>, new: &NewSubmission<'_>, status: SubmissionStatus, now: i64) -> rusqlite::Result<()> {
    tx.execute(
        "INSERT INTO submissions (id, token_hash, model_name, embeddings_label, contact, tagset_id, declared_tasks, archive_digest, status, created_at, updated_at)
         VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?10)",
        params![
            new.id,
            new.token_hash,
            new.metadata.model_name,
            new.metadata.embeddings_label,
            new.metadata.contact,
            new.tagset_id,
            serde_json::to_string(new.declared_tasks).expect("tasks serialise"),
            new.archive_digest,
            status.as_str(),
            now
        ],
    )?;
    Ok(())
}

fn write_reports(tx: &Transaction<'_>, id: &str, reports: &BTreeMap<String, EvaluationReport>) -> rusqlite::Result<()> {
    for (dataset, report) in reports {
        tx.execute(
            "INSERT INTO reports (submission_id, dataset_id, report) VALUES (?1, ?2, ?3)",
            params![id, dataset, serde_json::to_string(report).expect("reports serialise")],
        )?;
    }
    Ok(())
}

fn push_history(tx: &Transaction<'_>, id: &str, status: SubmissionStatus) -> rusqlite::Result<()> {
    tx.execute(
        "INSERT INTO status_history (submission_id, seq, status, at)
         VALUES (?1, (SELECT COALESCE(MAX(seq), 0) + 1 FROM status_history WHERE submission_id = ?1), ?2, ?3)",
        params![id, status.as_str(), now_millis()],
    )?;
    Ok(())
}
