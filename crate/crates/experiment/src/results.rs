use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::time::Duration;

use taintlab_learners::{ClassifierKind, Metrics};

use crate::spec::format_p;
use crate::{ExperimentError, Result};

/// Label used in the error, feature and mode columns of baseline rows.
pub const BASELINE: &str = "none";

const COLUMNS: [&str; 10] = [
    "kind", "error", "feature", "p", "mode", "accuracy", "precision", "recall", "f1", "gain",
];

/// Scores of one classifier trained on one (possibly corrupted) training set.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub classifier: ClassifierKind,
    pub error: String,
    pub feature: String,
    pub p: f64,
    pub mode: String,
    pub metrics: Metrics,
    /// Encoded feature count of the training matrix.
    pub dim: usize,
    pub train_rows: usize,
    pub duration: Duration,
}

impl RunResult {
    pub fn is_baseline(&self) -> bool {
        self.error == BASELINE
    }
}

/// A cell or classifier that failed; the rest of the grid carries on.
#[derive(Debug, Clone, PartialEq)]
pub struct CellError {
    /// `None` when the failure happened before any classifier ran.
    pub classifier: Option<ClassifierKind>,
    pub error: String,
    pub feature: String,
    pub p: f64,
    pub mode: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainDirection {
    Up,
    Down,
    Flat,
}

impl GainDirection {
    pub fn of(f1: f64, baseline: f64) -> Self {
        let delta = f1 - baseline;
        if delta.abs() < 1e-9 {
            GainDirection::Flat
        } else if delta > 0.0 {
            GainDirection::Up
        } else {
            GainDirection::Down
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GainDirection::Up => "up",
            GainDirection::Down => "down",
            GainDirection::Flat => "flat",
        }
    }

    pub fn arrow(self) -> &'static str {
        match self {
            GainDirection::Up => "↑",
            GainDirection::Down => "↓",
            GainDirection::Flat => "=",
        }
    }
}

impl fmt::Display for GainDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainEntry<'a> {
    pub result: &'a RunResult,
    pub baseline_f1: f64,
    pub direction: GainDirection,
}

/// Gain of every result against the same classifier's baseline f1.
pub fn compare<'a>(results: &'a [RunResult], baseline: &[RunResult]) -> Result<Vec<GainEntry<'a>>> {
    let base: HashMap<ClassifierKind, f64> = baseline.iter().map(|r| (r.classifier, r.metrics.f1)).collect();
    results
        .iter()
        .map(|r| {
            let baseline_f1 = *base
                .get(&r.classifier)
                .ok_or_else(|| ExperimentError::MissingBaseline(r.classifier.to_string()))?;
            Ok(GainEntry {
                result: r,
                baseline_f1,
                direction: GainDirection::of(r.metrics.f1, baseline_f1),
            })
        })
        .collect()
}

/// The `k` best results by f1; ties fall back to classifier, error, feature,
/// rate and mode.
pub fn top_k(results: &[RunResult], k: usize) -> Vec<&RunResult> {
    let mut sorted: Vec<&RunResult> = results.iter().collect();
    sorted.sort_by(|a, b| {
        b.metrics
            .f1
            .total_cmp(&a.metrics.f1)
            .then_with(|| a.classifier.as_str().cmp(b.classifier.as_str()))
            .then_with(|| a.error.cmp(&b.error))
            .then_with(|| a.feature.cmp(&b.feature))
            .then_with(|| a.p.total_cmp(&b.p))
            .then_with(|| a.mode.cmp(&b.mode))
    });
    sorted.truncate(k.max(1));
    sorted
}

/// Renders `results.csv`. Gains are computed against the baseline rows in
/// `results`; a classifier without a baseline gets `n/a`.
pub fn results_csv(results: &[RunResult]) -> String {
    let base: HashMap<ClassifierKind, f64> = results
        .iter()
        .filter(|r| r.is_baseline())
        .map(|r| (r.classifier, r.metrics.f1))
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS).expect("writing to memory");
    for r in results {
        let gain = base
            .get(&r.classifier)
            .map_or("n/a", |b| GainDirection::of(r.metrics.f1, *b).as_str());
        let m = &r.metrics;
        w.write_record([
            r.classifier.as_str(),
            &r.error,
            &r.feature,
            &format_p(r.p),
            &r.mode,
            &format!("{:.6}", m.accuracy),
            &format!("{:.6}", m.precision),
            &format!("{:.6}", m.recall),
            &format!("{:.6}", m.f1),
            gain,
        ])
        .expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("CSV output is UTF-8")
}

pub(crate) fn errors_csv(errors: &[CellError]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["kind", "error", "feature", "p", "mode", "message"])
        .expect("writing to memory");
    for e in errors {
        w.write_record([
            e.classifier.map_or("*", ClassifierKind::as_str),
            &e.error,
            &e.feature,
            &format_p(e.p),
            &e.mode,
            &e.message,
        ])
        .expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("CSV output is UTF-8")
}

/// Parses a `results.csv` written by [`results_csv`].
pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<RunResult>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
    parse_results(&text)
}

pub(crate) fn parse_results(text: &str) -> Result<Vec<RunResult>> {
    let bad = |m: String| ExperimentError::Results(m);
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    let idx: Vec<usize> = COLUMNS
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h == *c)
                .ok_or_else(|| bad(format!("missing column '{c}'")))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let line = line + 2;
        let field = |i: usize| rec.get(idx[i]).unwrap_or_default();
        let number = |i: usize| {
            field(i)
                .parse::<f64>()
                .map_err(|_| bad(format!("line {line}: {} is not a number: '{}'", COLUMNS[i], field(i))))
        };
        let classifier: ClassifierKind = field(0).parse().map_err(|e| bad(format!("line {line}: {e}")))?;
        out.push(RunResult {
            classifier,
            error: field(1).to_string(),
            feature: field(2).to_string(),
            p: number(3)?,
            mode: field(4).to_string(),
            metrics: Metrics {
                accuracy: number(5)?,
                precision: number(6)?,
                recall: number(7)?,
                f1: number(8)?,
            },
            dim: 0,
            train_rows: 0,
            duration: Duration::ZERO,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(classifier: ClassifierKind, error: &str, feature: &str, p: f64, f1: f64) -> RunResult {
        RunResult {
            classifier,
            error: error.into(),
            feature: feature.into(),
            p,
            mode: if error == BASELINE { BASELINE.into() } else { "new".into() },
            metrics: Metrics {
                accuracy: 0.9,
                precision: 0.9,
                recall: 0.8,
                f1,
            },
            dim: 14,
            train_rows: 100,
            duration: Duration::ZERO,
        }
    }

    #[test]
    fn gain_directions() {
        let base = vec![result(ClassifierKind::Lda, BASELINE, BASELINE, 0.0, 0.8256)];
        let runs = vec![
            result(ClassifierKind::Lda, "mislabel", "loan_status", 0.3, 0.6237),
            result(ClassifierKind::Lda, "duplicate", "all", 0.5, 0.9626),
            result(ClassifierKind::Lda, "missing", "person_age", 0.3, 0.8256),
        ];
        let gains: Vec<GainDirection> = compare(&runs, &base).unwrap().iter().map(|g| g.direction).collect();
        assert_eq!(gains, [GainDirection::Down, GainDirection::Up, GainDirection::Flat]);
        let knn = vec![result(ClassifierKind::Knn, "missing", "x", 0.3, 0.5)];
        let err = compare(&knn, &base).unwrap_err();
        assert!(err.to_string().contains("knn"));
    }

    #[test]
    fn top_k_order() {
        let rows = vec![
            result(ClassifierKind::Lda, "duplicate", "all", 0.5, 0.9675),
            result(ClassifierKind::LogReg, "noise", "loan_grade", 0.3, 0.9),
            result(ClassifierKind::Knn, "noise", "loan_grade", 0.3, 0.9),
            result(ClassifierKind::DecisionTree, "noise", "b", 0.3, 0.9),
            result(ClassifierKind::DecisionTree, "noise", "a", 0.3, 0.9),
        ];
        let top = top_k(&rows, 1);
        assert_eq!((top.len(), top[0].error.as_str(), top[0].p), (1, "duplicate", 0.5));
        let all = top_k(&rows, 50);
        assert_eq!(all.len(), 5);
        let order: Vec<(&str, &str)> = all.iter().map(|r| (r.classifier.as_str(), r.feature.as_str())).collect();
        assert_eq!(
            order,
            [
                ("lda", "all"),
                ("decision_tree", "a"),
                ("decision_tree", "b"),
                ("knn", "loan_grade"),
                ("logreg", "loan_grade")
            ]
        );
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            result(ClassifierKind::Lda, BASELINE, BASELINE, 0.0, 0.8),
            result(ClassifierKind::Lda, "mislabel", "loan_status", 0.3, 0.7),
        ];
        let text = results_csv(&rows);
        assert!(text.starts_with("kind,error,feature,p,mode,accuracy,precision,recall,f1,gain\n"));
        assert!(text.contains("lda,mislabel,loan_status,0.3,new,0.900000,0.900000,0.800000,0.700000,down"));
        let back = parse_results(&text).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].metrics.f1, 0.7);
        let missing = text.replace(",gain", "");
        assert!(parse_results(&missing).is_err());
    }
}
