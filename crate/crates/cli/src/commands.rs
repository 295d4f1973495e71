use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nlpre_core::conllu::{parse_conllu, serialize_conllu, validate_treebank, TreebankFile, ValidationMode};
use nlpre_core::eval::{render_table, EvalError, EvalOptions, Evaluator, FeatsMode, MetricId, TaskSet};
use nlpre_core::split::{self, extract_paragraphs, BoundaryKeys, SplitError, SplitSpec, Subset};
use nlpre_service::{BenchmarkService, ConfigError, ServiceError};
use serde::Serialize;

use crate::args::{Cli, Command, EvalArgs, FeatsArg, ModeArg, OutputFormat, ServeArgs, SplitArgs, SplitBy, ValidateArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}: {source}")]
    Engine { path: PathBuf, source: EvalError },
    #[error("{0}")]
    Eval(EvalError),
    #[error("{path}: {count} validation error(s)")]
    Invalid { path: PathBuf, count: usize },
    #[error("{0}")]
    Split(#[from] SplitError),
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Service(#[from] ServiceError),
    #[error("{0}")]
    Http(String),
    #[error("{0}")]
    Output(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Eval(args) => eval(&args),
        Command::Split(args) => split_corpus(&args),
        Command::Validate(args) => validate(&args),
        Command::Serve(args) => serve(&args),
        Command::SeedFixtures(args) => {
            let config = nlpre_service::load_config(&args.config)?;
            let inserted = BenchmarkService::open(config)?.seed_fixtures()?;
            println!("seeded {inserted} new entries");
            Ok(())
        }
        Command::Analyze(args) => crate::analyze::run(&args),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_treebank(path: &Path) -> Result<TreebankFile, CliError> {
    let mut file = parse_conllu(&read(path)?).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line,
        message: format!("{} ({})", e.message, e.code),
    })?;
    file.source_name = path.display().to_string();
    Ok(file)
}

fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let tasks: TaskSet = match &args.tasks {
        Some(list) => MetricId::parse_list(list).map_err(|e| CliError::Usage(e.to_string()))?,
        None => MetricId::all(),
    };
    let evaluator = Evaluator::new(EvalOptions {
        feats_mode: match args.feats {
            FeatsArg::Universal => FeatsMode::Universal,
            FeatsArg::AllSorted => FeatsMode::AllSorted,
            FeatsArg::Raw => FeatsMode::Raw,
        },
        ..EvalOptions::default()
    });
    let represent = |path: &Path| {
        let file = load_treebank(path)?;
        evaluator.representation(&file).map_err(|source| CliError::Engine {
            path: path.to_path_buf(),
            source,
        })
    };
    let gold = represent(&args.gold)?;
    let system = represent(&args.system)?;
    let report = evaluator
        .evaluate_representations(&gold, &system, &tasks)
        .map_err(CliError::Eval)?;
    match args.format {
        OutputFormat::Table => print!("{}", render_table(&report)),
        OutputFormat::Json => println!("{}", to_json(&report)?),
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))
}

fn parse_ratios(text: &str) -> Result<[f64; 3], CliError> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("--ratios: {e}")))?;
    <[f64; 3]>::try_from(parts).map_err(|_| CliError::Usage("--ratios needs three values".into()))
}

#[derive(Serialize)]
struct SplitManifest<'a> {
    input: String,
    spec: &'a SplitSpec,
    files: BTreeMap<Subset, String>,
    assignment: &'a BTreeMap<String, Subset>,
    diagnostics: &'a split::SplitDiagnostics,
}

fn split_corpus(args: &SplitArgs) -> Result<(), CliError> {
    let spec = SplitSpec {
        bucket_count: args.k,
        ratios: parse_ratios(&args.ratios)?,
        seed: args.seed,
        stratify_by_type: args.by == SplitBy::Type,
    };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let corpus = load_treebank(&args.input)?;
    let paragraphs = extract_paragraphs(&corpus, &BoundaryKeys::default())?;
    let result = split::split(&paragraphs, &spec)?;
    let parts = split::partition_corpus(&paragraphs, &result.assignment)?;

    fs::create_dir_all(&args.out_dir).map_err(|source| CliError::Io {
        path: args.out_dir.clone(),
        source,
    })?;
    let mut files = BTreeMap::new();
    for (subset, file) in &parts {
        let name = format!("{}.conllu", subset.name());
        write(&args.out_dir.join(&name), serialize_conllu(file).as_bytes())?;
        files.insert(*subset, name);
    }
    let manifest = SplitManifest {
        input: args
            .input
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        spec: &spec,
        files,
        assignment: &result.assignment,
        diagnostics: &result.diagnostics,
    };
    write(&args.out_dir.join("split-manifest.json"), (to_json(&manifest)? + "\n").as_bytes())?;
    for subset in Subset::ALL {
        let t = &result.diagnostics.totals[&subset];
        println!(
            "{:<5} {:>7} paragraphs {:>8} sentences {:>9} words",
            subset.name(),
            t.paragraphs,
            t.sentences,
            t.words
        );
    }
    Ok(())
}

fn validate(args: &ValidateArgs) -> Result<(), CliError> {
    let file = load_treebank(&args.file)?;
    let mode = match args.mode {
        ModeArg::Surface => ValidationMode::Surface,
        ModeArg::Full => ValidationMode::Full,
    };
    let report = validate_treebank(&file, mode);
    for issue in &report.errors {
        eprintln!(
            "{}: sentence {}, line {}: {} ({})",
            args.file.display(),
            issue.sentence,
            issue.line,
            issue.message,
            issue.code
        );
    }
    if report.ok() {
        println!("{}: {} sentences, {} words, valid", args.file.display(), file.sentences.len(), file.word_count());
        Ok(())
    } else {
        Err(CliError::Invalid {
            path: args.file.clone(),
            count: report.errors.len(),
        })
    }
}

fn serve(args: &ServeArgs) -> Result<(), CliError> {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .try_init();
    let config = nlpre_service::load_config(&args.config)?;
    if args.seed_fixtures {
        let inserted = BenchmarkService::open(config.clone())?.seed_fixtures()?;
        eprintln!("seeded {inserted} new entries");
    }
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Output(e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(args.listen)
            .await
            .map_err(ServiceError::from)?;
        let addr = listener.local_addr().map_err(ServiceError::from)?;
        // Scripts read this line to find the port.
        println!("listening on http://{addr}");
        use std::io::Write;
        let _ = std::io::stdout().flush();
        nlpre_service::serve_listener(config, listener).await?;
        Ok(())
    })
}
