//! Markdown views of experiment results.

use std::collections::HashMap;
use std::fmt::Write as _;

use taintlab_learners::ClassifierKind;

use crate::results::{parse_results, GainDirection, RunResult};
use crate::spec::format_p;
use crate::Result;

fn column_label(p: f64, mode: &str) -> String {
    format!("F1@{}% ({mode})", format_p(p * 100.0))
}

/// One table per error kind: a row per (classifier, feature), a column per
/// (rate, mode), each cell the f1 with its direction against the baseline.
pub fn gains_markdown(results: &[RunResult]) -> String {
    let base: HashMap<ClassifierKind, f64> = results
        .iter()
        .filter(|r| r.is_baseline())
        .map(|r| (r.classifier, r.metrics.f1))
        .collect();
    let mut errors: Vec<&str> = Vec::new();
    for r in results.iter().filter(|r| !r.is_baseline()) {
        if !errors.contains(&r.error.as_str()) {
            errors.push(&r.error);
        }
    }
    let mut s = String::new();
    if errors.is_empty() {
        s.push_str("No corrupted runs.\n");
    }
    for error in errors {
        let rows: Vec<&RunResult> = results.iter().filter(|r| r.error == error).collect();
        let mut columns: Vec<(f64, &str)> = Vec::new();
        let mut lines: Vec<(ClassifierKind, &str)> = Vec::new();
        for r in &rows {
            if !columns.iter().any(|(p, m)| *p == r.p && *m == r.mode) {
                columns.push((r.p, &r.mode));
            }
            if !lines.contains(&(r.classifier, r.feature.as_str())) {
                lines.push((r.classifier, &r.feature));
            }
        }
        let _ = writeln!(s, "### {error}\n");
        let heads: Vec<String> = columns.iter().map(|(p, m)| column_label(*p, m)).collect();
        let _ = writeln!(s, "| Model | Feature | Clean F1 | {} |", heads.join(" | "));
        let _ = writeln!(s, "|---|---|---|{}", "---|".repeat(columns.len()));
        for (kind, feature) in lines {
            let clean = base.get(&kind).copied();
            let cells: Vec<String> = columns
                .iter()
                .map(|(p, m)| {
                    rows.iter()
                        .find(|r| r.classifier == kind && r.feature == feature && r.p == *p && r.mode == *m)
                        .map_or_else(
                            || "-".to_string(),
                            |r| match clean {
                                Some(b) => format!("{:.4} {}", r.metrics.f1, GainDirection::of(r.metrics.f1, b).arrow()),
                                None => format!("{:.4}", r.metrics.f1),
                            },
                        )
                })
                .collect();
            let clean = clean.map_or_else(|| "-".to_string(), |b| format!("{b:.4}"));
            let _ = writeln!(s, "| {kind} | {feature} | {clean} | {} |", cells.join(" | "));
        }
        s.push('\n');
    }
    s
}

/// The `k` best results by f1.
pub fn topk_markdown(results: &[RunResult], k: usize) -> String {
    let mut s = String::from("| Model | Feature | Error | Percentage | F1 |\n|---|---|---|---|---|\n");
    for r in crate::top_k(results, k) {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {:.4} |",
            r.classifier,
            r.feature,
            r.error,
            format_p(r.p * 100.0),
            r.metrics.f1
        );
    }
    s
}

/// Renders a `results.csv` text as gain tables or a top-k table.
pub fn render(results_csv: &str, mode: ReportMode, k: usize) -> Result<String> {
    let results = parse_results(results_csv)?;
    Ok(match mode {
        ReportMode::Gains => gains_markdown(&results),
        ReportMode::TopK => {
            let corrupted: Vec<RunResult> = results.into_iter().filter(|r| !r.is_baseline()).collect();
            topk_markdown(&corrupted, k)
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportMode {
    Gains,
    TopK,
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "kind,error,feature,p,mode,accuracy,precision,recall,f1,gain
lda,none,none,0,none,0.9,0.96,0.71,0.8256,flat
lda,mislabel,loan_status,0.3,new,0.8,0.7,0.5,0.6237,down
lda,mislabel,loan_status,0.5,extended,0.7,0.6,0.4,0.5,down
lda,duplicate,all,0.5,extended,0.9,0.9,0.9,0.9675,up
";

    #[test]
    fn every_gain_cell_has_a_marker() {
        let md = render(CSV, ReportMode::Gains, 0).unwrap();
        assert!(md.contains("### mislabel"));
        assert!(md.contains("| lda | loan_status | 0.8256 | 0.6237 ↓ | 0.5000 ↓ |"), "{md}");
        assert!(md.contains("0.9675 ↑"));
    }

    #[test]
    fn topk_single_row() {
        let md = render(CSV, ReportMode::TopK, 1).unwrap();
        assert_eq!(md.lines().count(), 3);
        assert!(md.contains("| lda | all | duplicate | 50 | 0.9675 |"));
    }

    #[test]
    fn missing_column_is_an_error() {
        let broken = CSV.replace(",recall", "");
        assert!(render(&broken, ReportMode::Gains, 1).is_err());
    }
}
