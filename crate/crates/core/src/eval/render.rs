use std::fmt::Write;

use super::metric::{percent, MetricId};
use super::EvaluationReport;

/// Renders the evaluator's verbose table: one row per scored metric, with an
/// empty AligndAcc cell for span metrics.
pub fn render_table(report: &EvaluationReport) -> String {
    let mut out = String::new();
    out.push_str("Metric     | Precision |    Recall |  F1 Score | AligndAcc\n");
    out.push_str("-----------+-----------+-----------+-----------+-----------\n");
    let cell = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{:10.2}", percent(v)));
    for metric in MetricId::ALL {
        let Some(s) = report.scores.get(&metric) else { continue };
        let _ = writeln!(
            out,
            "{:11}|{:>10} |{:>10} |{:10.2} |{}",
            metric.name(),
            cell(s.precision),
            cell(s.recall),
            percent(s.f1),
            cell(s.aligned_accuracy)
        );
    }
    out
}
