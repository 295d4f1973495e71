//! Submission ZIP layout: `manifest.yaml` plus one `<dataset_id>.conllu` per
//! dataset, all at the archive root.

use std::collections::BTreeMap;
use std::io::{Cursor, Read};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use zip::ZipArchive;

pub const MANIFEST_NAME: &str = "manifest.yaml";
pub const PREDICTION_SUFFIX: &str = ".conllu";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tagset: String,
    /// Metric names; absent means every task the tagset offers.
    #[serde(default)]
    pub tasks: Option<Vec<String>>,
    pub model_name: String,
    #[serde(default)]
    pub embeddings: Option<String>,
    #[serde(default)]
    pub contact: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ArchiveError {
    #[error("not a ZIP archive")]
    NotAZip,
    #[error("entry '{0}' is not readable")]
    Unreadable(String),
    #[error("entry '{0}' is not valid UTF-8")]
    NotUtf8(String),
    #[error("archive expands beyond {0} bytes")]
    TooLargeUncompressed(u64),
}

/// Root-level entries of an archive, decoded as text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ArchiveContents {
    pub manifest: Option<String>,
    /// Dataset id to prediction text.
    pub predictions: BTreeMap<String, String>,
    /// Entries that fit neither slot, in archive order.
    pub unexpected: Vec<String>,
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn is_zip(bytes: &[u8]) -> bool {
    ZipArchive::new(Cursor::new(bytes)).is_ok()
}

/// Reads every entry, refusing to inflate more than `max_uncompressed` bytes
/// in total. Directory entries are skipped.
pub fn read_archive(bytes: &[u8], max_uncompressed: u64) -> Result<ArchiveContents, ArchiveError> {
    let mut zip = ZipArchive::new(Cursor::new(bytes)).map_err(|_| ArchiveError::NotAZip)?;
    let mut contents = ArchiveContents::default();
    let mut budget = max_uncompressed;
    for i in 0..zip.len() {
        let entry = zip.by_index(i).map_err(|_| ArchiveError::Unreadable(format!("#{i}")))?;
        if entry.is_dir() {
            continue;
        }
        let name = entry.name().to_string();
        let mut raw = Vec::new();
        // The declared size is untrusted; bound the actual read instead.
        let read = entry
            .take(budget + 1)
            .read_to_end(&mut raw)
            .map_err(|_| ArchiveError::Unreadable(name.clone()))? as u64;
        if read > budget {
            return Err(ArchiveError::TooLargeUncompressed(max_uncompressed));
        }
        budget -= read;
        let slot = if name == MANIFEST_NAME {
            Some(None)
        } else {
            name.strip_suffix(PREDICTION_SUFFIX)
                .filter(|stem| !stem.is_empty() && !stem.contains('/'))
                .map(|stem| Some(stem.to_string()))
        };
        match slot {
            None => contents.unexpected.push(name),
            Some(target) => {
                let text = String::from_utf8(raw).map_err(|_| ArchiveError::NotUtf8(name.clone()))?;
                match target {
                    None => contents.manifest = Some(text),
                    Some(dataset) => {
                        contents.predictions.insert(dataset, text);
                    }
                }
            }
        }
    }
    Ok(contents)
}

pub fn parse_manifest(text: &str) -> Result<Manifest, String> {
    serde_yaml::from_str(text).map_err(|e| e.to_string())
}

/// Builds an archive in memory; used by tests, the CLI and demo tooling.
pub fn build_archive(manifest: &Manifest, predictions: &BTreeMap<String, String>) -> Vec<u8> {
    use std::io::Write;
    use zip::write::SimpleFileOptions;

    let mut out = zip::ZipWriter::new(Cursor::new(Vec::new()));
    // Fixed timestamps keep the digest a function of the content only.
    let options = SimpleFileOptions::default()
        .compression_method(zip::CompressionMethod::Deflated)
        .last_modified_time(zip::DateTime::default());
    let manifest_text = serde_yaml::to_string(manifest).expect("manifest serialises");
    out.start_file(MANIFEST_NAME, options).expect("in-memory zip");
    out.write_all(manifest_text.as_bytes()).expect("in-memory zip");
    for (dataset, text) in predictions {
        out.start_file(format!("{dataset}{PREDICTION_SUFFIX}"), options).expect("in-memory zip");
        out.write_all(text.as_bytes()).expect("in-memory zip");
    }
    out.finish().expect("in-memory zip").into_inner()
}
