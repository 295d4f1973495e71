//! CSV export of the service's analytics endpoints.

use std::io::Write;

use nlpre_core::analytics::{CorrelationMatrix, DispersionSummary, VectorKey};
use serde::Deserialize;

use crate::args::{AnalyzeArgs, AnalyzeKind, Coefficient, OrderArg};
use crate::commands::CliError;

#[derive(Deserialize)]
struct Correlation {
    matrix: CorrelationMatrix,
}

#[derive(Deserialize)]
struct Dispersion {
    summaries: Vec<DispersionSummary>,
}

#[derive(Deserialize)]
struct ApiError {
    error: ApiErrorBody,
}

#[derive(Deserialize)]
struct ApiErrorBody {
    code: String,
    message: String,
}

fn fetch<T: for<'de> Deserialize<'de>>(url: &str, query: &[(&str, String)]) -> Result<T, CliError> {
    let http = |e: reqwest::Error| CliError::Http(format!("{url}: {e}"));
    let response = reqwest::blocking::Client::new().get(url).query(query).send().map_err(http)?;
    let status = response.status();
    let body = response.text().map_err(http)?;
    if !status.is_success() {
        let detail = serde_json::from_str::<ApiError>(&body)
            .map(|e| format!("{}: {}", e.error.code, e.error.message))
            .unwrap_or(body);
        return Err(CliError::Http(format!("{url}: {status}: {detail}")));
    }
    serde_json::from_str(&body).map_err(|e| CliError::Http(format!("{url}: unexpected response: {e}")))
}

/// Undefined coefficients are written as empty cells.
fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn run(args: &AnalyzeArgs) -> Result<(), CliError> {
    let base = args.leaderboard_url.trim_end_matches('/');
    let mut query = Vec::new();
    for (key, value) in [("tagsets", &args.tagsets), ("metrics", &args.metrics), ("datasets", &args.datasets)] {
        if let Some(v) = value {
            query.push((key, v.clone()));
        }
    }
    let order = match args.order {
        OrderArg::DatasetsFirst => "datasets_first",
        OrderArg::EmbeddingsFirst => "embeddings_first",
    };
    query.push(("order", order.to_string()));
    query.push(("by_embedding", args.by_embedding.to_string()));

    let out = std::io::stdout();
    let mut csv = csv::Writer::from_writer(out.lock());
    let io = |e: csv::Error| CliError::Output(e.to_string());
    match args.kind {
        AnalyzeKind::Correlation => {
            let data: Correlation = fetch(&format!("{base}/api/v1/analytics/correlation"), &query)?;
            let labels: Vec<String> = data.matrix.labels.iter().map(VectorKey::label).collect();
            let rows = match args.coefficient {
                Coefficient::Pearson => &data.matrix.pearson,
                Coefficient::Spearman => &data.matrix.spearman,
            };
            let mut header = vec![String::new()];
            header.extend(labels.iter().cloned());
            csv.write_record(&header).map_err(io)?;
            for (label, row) in labels.iter().zip(rows) {
                let mut record = vec![label.clone()];
                record.extend(row.iter().map(|&v| cell(v)));
                csv.write_record(&record).map_err(io)?;
            }
        }
        AnalyzeKind::Dispersion => {
            let data: Dispersion = fetch(&format!("{base}/api/v1/analytics/dispersion"), &query)?;
            csv.write_record(["label", "min", "q1", "median", "q3", "max"]).map_err(io)?;
            for s in &data.summaries {
                let values = [s.min, s.q1, s.median, s.q3, s.max].map(|v| v.to_string());
                let mut record = vec![s.key.label()];
                record.extend(values);
                csv.write_record(&record).map_err(io)?;
            }
        }
    }
    csv.flush().map_err(|e| CliError::Output(e.to_string()))?;
    let _ = std::io::stdout().flush();
    Ok(())
}
