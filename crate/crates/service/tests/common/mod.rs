#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nlpre_service::archive::{build_archive, Manifest};
use nlpre_service::config::from_config;
use nlpre_service::{BenchmarkConfig, LoadedConfig};

/// A lemma that exists only in the gold files written by [`private_config`].
pub const SENTINEL: &str = "zzgoldsentinelzz";

const SAMPLE: &str = include_str!("../../../core/tests/fixtures/pl_sample.gold.conllu");

pub fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo")
}

/// The demo config with its data directory moved into `data_dir`.
pub fn demo_config(data_dir: &Path) -> LoadedConfig {
    let text = std::fs::read_to_string(demo_dir().join("benchmark.yaml")).unwrap();
    let mut config: BenchmarkConfig = serde_yaml::from_str(&text).unwrap();
    config.data_dir = data_dir.to_path_buf();
    from_config(config, &demo_dir()).unwrap()
}

fn blocks() -> Vec<String> {
    SAMPLE.trim_end().split("\n\n").map(|b| format!("{b}\n")).collect()
}

/// Gold for dataset `a` (sentences 1-12, full parsing) and `b` (9-20,
/// tagging only), with one lemma replaced by [`SENTINEL`].
pub fn private_gold() -> BTreeMap<String, String> {
    let b = blocks();
    let join = |s: &[String]| s.join("\n");
    let a = join(&b[..12]).replacen("\tcisza\t", &format!("\t{SENTINEL}\t"), 1);
    assert!(a.contains(SENTINEL));
    [("a".to_string(), a), ("b".to_string(), join(&b[8..]))].into()
}

/// Predictions identical to the gold apart from the sentinel lemma.
pub fn perfect_predictions() -> BTreeMap<String, String> {
    private_gold()
        .into_iter()
        .map(|(k, v)| (k, v.replace(SENTINEL, "cisza")))
        .collect()
}

pub fn private_config(root: &Path) -> LoadedConfig {
    let gold_dir = root.join("gold");
    std::fs::create_dir_all(&gold_dir).unwrap();
    for (id, text) in private_gold() {
        std::fs::write(gold_dir.join(format!("{id}.conllu")), text).unwrap();
    }
    std::fs::write(root.join("about.md"), "# About\n").unwrap();
    let yaml = "
benchmark_name: test
language_code: pl
data_dir: data
content_pages:
  about: about.md
tagsets:
  - id: ud
    label: UD
    datasets:
      - id: a
        label: A
        gold_path: gold/a.conllu
        tasks: [UPOS, XPOS, UFeats, AllTags, Lemmas, UAS, LAS, CLAS, MLAS, BLEX]
      - id: b
        label: B
        gold_path: gold/b.conllu
        tasks: [UPOS, XPOS, UFeats, AllTags, Lemmas]
";
    std::fs::write(root.join("benchmark.yaml"), yaml).unwrap();
    nlpre_service::load_config(&root.join("benchmark.yaml")).unwrap()
}

pub fn manifest(model: &str, tasks: Option<&[&str]>) -> Manifest {
    Manifest {
        tagset: "ud".into(),
        tasks: tasks.map(|t| t.iter().map(|s| s.to_string()).collect()),
        model_name: model.into(),
        embeddings: Some("H".into()),
        contact: Some("team@example.org".into()),
    }
}

pub fn archive(model: &str, predictions: &BTreeMap<String, String>) -> Vec<u8> {
    build_archive(&manifest(model, None), predictions)
}
