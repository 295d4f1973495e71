#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

use nlpre_service::BenchmarkConfig;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nlpre"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

pub fn core_fixture(name: &str) -> PathBuf {
    repo_root().join("crates/core/tests/fixtures").join(name)
}

/// Writes a copy of the demo config into `dir` with absolute gold and page
/// paths and a private data directory.
pub fn demo_config_in(dir: &Path) -> PathBuf {
    let demo = repo_root().join("demo");
    let text = std::fs::read_to_string(demo.join("benchmark.yaml")).unwrap();
    let mut config: BenchmarkConfig = serde_yaml::from_str(&text).unwrap();
    config.data_dir = dir.join("data");
    for tagset in &mut config.tagsets {
        for dataset in &mut tagset.datasets {
            dataset.gold_path = demo.join(&dataset.gold_path);
        }
    }
    for page in config.content_pages.values_mut() {
        *page = demo.join(&*page);
    }
    let path = dir.join("benchmark.yaml");
    std::fs::write(&path, serde_yaml::to_string(&config).unwrap()).unwrap();
    path
}

/// A `serve` child process; killed on drop.
pub struct Server {
    child: Child,
    pub base_url: String,
}

impl Server {
    pub fn start(config: &Path, extra: &[&str]) -> Server {
        Self::spawn(config, extra, Stdio::null())
    }

    /// Like [`Server::start`], with the server log appended to `log`.
    pub fn start_logged(config: &Path, extra: &[&str], log: &Path) -> Server {
        let file = std::fs::File::create(log).unwrap();
        Self::spawn(config, extra, Stdio::from(file))
    }

    fn spawn(config: &Path, extra: &[&str], stderr: Stdio) -> Server {
        let mut child = bin()
            .args(["serve", "--config", config.to_str().unwrap(), "--listen", "127.0.0.1:0"])
            .args(extra)
            .env("RUST_LOG", "debug")
            .stdout(Stdio::piped())
            .stderr(stderr)
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let base_url = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected serve output: {line:?}"))
            .to_string();
        Server { child, base_url }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.base_url, path)
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
