use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use taintlab_core::injectors::{apply, dataset_fingerprint, CorruptionManifest};
use taintlab_core::preprocess::{bin_feature, drop_missing_rows, stratified_split, BinningSpec, Encoder};
use taintlab_core::tabular::{read_csv, Dataset};
use taintlab_learners::{confusion, fit_with, metrics, ClassifierKind, Hyperparameters};

use crate::results::{errors_csv, CellError, RunResult, BASELINE};
use crate::spec::{CellKey, Chain, ExperimentSpec};
use crate::{report, results_csv, ExperimentError, Result};

/// Clean train and test splits after cleaning and binning.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
    pub loaded_rows: usize,
    pub clean_rows: usize,
    pub bins: Vec<BinningSpec>,
}

/// Loads the dataset, drops incomplete rows, splits, then bins both sides
/// with cut points resolved on the clean training split.
pub fn prepare(spec: &ExperimentSpec) -> Result<Prepared> {
    let raw = read_csv(&spec.dataset, None, Some(&spec.target))?;
    prepare_dataset(spec, raw)
}

pub(crate) fn prepare_dataset(spec: &ExperimentSpec, raw: Dataset) -> Result<Prepared> {
    let loaded_rows = raw.n_rows();
    let clean = if spec.drop_missing { drop_missing_rows(&raw) } else { raw };
    let split = stratified_split(&clean, spec.split.ratio, spec.split_seed())?;
    let (mut train, mut test) = (split.train, split.test);
    let mut bins = Vec::new();
    for entry in &spec.binning {
        let b = entry.resolve(&train)?;
        train = bin_feature(&train, &b)?;
        test = bin_feature(&test, &b)?;
        bins.push(b);
    }
    Ok(Prepared {
        train,
        test,
        loaded_rows,
        clean_rows: clean.n_rows(),
        bins,
    })
}

struct Coordinates<'a> {
    error: &'a str,
    feature: &'a str,
    p: f64,
    mode: &'a str,
}

impl Coordinates<'_> {
    fn fail(&self, classifier: Option<ClassifierKind>, message: String) -> CellError {
        CellError {
            classifier,
            error: self.error.to_string(),
            feature: self.feature.to_string(),
            p: self.p,
            mode: self.mode.to_string(),
            message,
        }
    }
}

/// Trains every classifier on `train` (after dropping incomplete rows) and
/// scores it on `test`.
fn evaluate(
    train: &Dataset,
    test: &Dataset,
    kinds: &[ClassifierKind],
    hyper: &Hyperparameters,
    at: &Coordinates<'_>,
) -> (Vec<RunResult>, Vec<CellError>) {
    let mut results = Vec::new();
    let mut errors = Vec::new();
    let train = drop_missing_rows(train);
    let encoded = Encoder::fit(&train).and_then(|enc| Ok((enc.transform(&train)?, enc.transform(test)?)));
    let (tr, te) = match encoded {
        Ok(m) => m,
        Err(e) => {
            errors.push(at.fail(None, e.to_string()));
            return (results, errors);
        }
    };
    for &kind in kinds {
        let start = Instant::now();
        let scored = fit_with(kind, &tr, hyper)
            .and_then(|c| c.predict(&te.x))
            .and_then(|pred| confusion(&te.y, &pred));
        match scored {
            Ok(cm) => results.push(RunResult {
                classifier: kind,
                error: at.error.to_string(),
                feature: at.feature.to_string(),
                p: at.p,
                mode: at.mode.to_string(),
                metrics: metrics(&cm),
                dim: tr.x.cols(),
                train_rows: tr.len(),
                duration: start.elapsed(),
            }),
            Err(e) => errors.push(at.fail(Some(kind), e.to_string())),
        }
    }
    (results, errors)
}

/// Clean-train, clean-test scores for every classifier.
pub fn run_baseline(
    prepared: &Prepared,
    kinds: &[ClassifierKind],
    hyper: &Hyperparameters,
) -> (Vec<RunResult>, Vec<CellError>) {
    let at = Coordinates {
        error: BASELINE,
        feature: BASELINE,
        p: 0.0,
        mode: BASELINE,
    };
    evaluate(&prepared.train, &prepared.test, kinds, hyper, &at)
}

/// What one grid cell produced.
#[derive(Debug, Clone)]
pub struct CellInfo {
    pub key: CellKey,
    pub manifest: CorruptionManifest,
    /// Fingerprint of the corrupted training split.
    pub train_fingerprint: String,
    /// Fingerprint of the test split this cell was scored on.
    pub test_fingerprint: String,
    pub train_rows: usize,
    pub skipped: usize,
}

#[derive(Debug, Default)]
struct ChainOutcome {
    cells: Vec<CellInfo>,
    results: Vec<RunResult>,
    errors: Vec<CellError>,
}

fn run_chain(prepared: &Prepared, chain: &Chain, kinds: &[ClassifierKind], hyper: &Hyperparameters) -> ChainOutcome {
    let mut out = ChainOutcome::default();
    let mut prior: Option<CorruptionManifest> = None;
    for cell in &chain.cells {
        let error = cell.key.error.as_str();
        let at = Coordinates {
            error,
            feature: &cell.key.feature,
            p: cell.model.p,
            mode: cell.key.mode.as_str(),
        };
        let injected = match apply(&prepared.train, &cell.model, prior.as_ref()) {
            Ok(inj) => inj,
            Err(e) => {
                out.errors.push(at.fail(None, e.to_string()));
                prior = None;
                continue;
            }
        };
        let (results, errors) = evaluate(&injected.dataset, &prepared.test, kinds, hyper, &at);
        out.results.extend(results);
        out.errors.extend(errors);
        out.cells.push(CellInfo {
            key: cell.key.clone(),
            train_fingerprint: dataset_fingerprint(&injected.dataset),
            test_fingerprint: dataset_fingerprint(&prepared.test),
            train_rows: injected.dataset.n_rows(),
            skipped: injected.skipped.len(),
            manifest: injected.manifest.clone(),
        });
        prior = Some(injected.manifest);
    }
    out
}

/// Runs every chain, up to `jobs` at a time. Output order follows the chain
/// order regardless of scheduling.
pub fn run_grid(
    prepared: &Prepared,
    chains: &[Chain],
    kinds: &[ClassifierKind],
    hyper: &Hyperparameters,
    jobs: usize,
) -> Result<(Vec<CellInfo>, Vec<RunResult>, Vec<CellError>)> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| ExperimentError::Spec(format!("cannot start {jobs} workers: {e}")))?;
    let outcomes: Vec<ChainOutcome> =
        pool.install(|| chains.par_iter().map(|c| run_chain(prepared, c, kinds, hyper)).collect());
    let mut cells = Vec::new();
    let mut results = Vec::new();
    let mut errors = Vec::new();
    for o in outcomes {
        cells.extend(o.cells);
        results.extend(o.results);
        errors.extend(o.errors);
    }
    Ok((cells, results, errors))
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub prepared: Prepared,
    pub hyper: Hyperparameters,
    pub baseline: Vec<RunResult>,
    pub cells: Vec<CellInfo>,
    /// Grid results, in grid order.
    pub results: Vec<RunResult>,
    pub errors: Vec<CellError>,
    /// Feature names of the encoded matrix.
    pub features: Vec<String>,
}

impl ExperimentOutcome {
    /// Baseline rows followed by grid rows.
    pub fn all_results(&self) -> Vec<RunResult> {
        self.baseline.iter().chain(&self.results).cloned().collect()
    }

    /// Number of distinct corrupted training sets that were produced.
    pub fn distinct_training_sets(&self) -> usize {
        let set: std::collections::BTreeSet<&str> =
            self.cells.iter().map(|c| c.train_fingerprint.as_str()).collect();
        set.len()
    }
}

/// Baseline plus grid.
pub fn run(spec: &ExperimentSpec, jobs: usize) -> Result<ExperimentOutcome> {
    let prepared = prepare(spec)?;
    run_prepared(spec, prepared, jobs)
}

pub(crate) fn run_prepared(spec: &ExperimentSpec, prepared: Prepared, jobs: usize) -> Result<ExperimentOutcome> {
    let kinds = spec.classifier_kinds()?;
    let hyper = Hyperparameters::default();
    let chains = spec.chains(&prepared.train)?;
    let features = match Encoder::fit(&prepared.train) {
        Ok(enc) => enc.feature_names(),
        Err(_) => Vec::new(),
    };
    let (baseline, mut errors) = run_baseline(&prepared, &kinds, &hyper);
    let (cells, results, grid_errors) = run_grid(&prepared, &chains, &kinds, &hyper, jobs)?;
    errors.extend(grid_errors);
    Ok(ExperimentOutcome {
        prepared,
        hyper,
        baseline,
        cells,
        results,
        errors,
        features,
    })
}

/// Writes `results.csv`, `errors.csv`, `summary.md` and one manifest per cell.
pub fn write_outputs(outcome: &ExperimentOutcome, spec: &ExperimentSpec, dir: &Path) -> Result<()> {
    let manifests = dir.join("manifests");
    fs::create_dir_all(&manifests).map_err(|e| ExperimentError::io(&manifests, e))?;
    let write = |name: &Path, text: &str| fs::write(name, text).map_err(|e| ExperimentError::io(name, e));
    write(&dir.join("results.csv"), &results_csv(&outcome.all_results()))?;
    write(&dir.join("errors.csv"), &errors_csv(&outcome.errors))?;
    write(&dir.join("summary.md"), &summary(outcome, spec))?;
    for cell in &outcome.cells {
        let path = manifests.join(format!("{}.jsonl", cell.key.file_stem()));
        write(&path, &cell.manifest.to_jsonl())?;
    }
    Ok(())
}

fn summary(o: &ExperimentOutcome, spec: &ExperimentSpec) -> String {
    let p = &o.prepared;
    let mut s = String::new();
    let name = spec.dataset.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    let _ = writeln!(s, "# Experiment summary\n");
    let _ = writeln!(s, "- dataset: `{name}`, target `{}`", spec.target);
    let _ = writeln!(s, "- rows loaded: {}, after dropping incomplete rows: {}", p.loaded_rows, p.clean_rows);
    let _ = writeln!(
        s,
        "- split: ratio {}, seed {}; train {} rows, test {} rows",
        spec.split.ratio,
        spec.split_seed(),
        p.train.n_rows(),
        p.test.n_rows()
    );
    let _ = writeln!(s, "- master seed: {}", spec.seed);
    for b in &p.bins {
        let cuts: Vec<String> = b.cuts.iter().map(|c| format!("{c}")).collect();
        let _ = writeln!(
            s,
            "- bins for `{}` -> `{}`: cuts [{}]",
            b.feature,
            b.output.as_deref().unwrap_or(&b.feature),
            cuts.join(", ")
        );
    }
    let _ = writeln!(s, "- encoded features ({}): {}", o.features.len(), o.features.join(", "));
    let _ = writeln!(s, "- hyperparameters: {}", o.hyper);
    let _ = writeln!(
        s,
        "- corrupted training sets: {} distinct of {} cells; failures recorded: {}\n",
        o.distinct_training_sets(),
        o.cells.len(),
        o.errors.len()
    );
    let _ = writeln!(s, "## Clean baseline\n");
    let _ = writeln!(s, "| Model | Accuracy | Precision | Recall | F1 |");
    let _ = writeln!(s, "|---|---|---|---|---|");
    for r in &o.baseline {
        let m = &r.metrics;
        let _ = writeln!(
            s,
            "| {} | {:.4} | {:.4} | {:.4} | {:.4} |",
            r.classifier, m.accuracy, m.precision, m.recall, m.f1
        );
    }
    let all = o.all_results();
    let _ = writeln!(s, "\n## Gains against the clean baseline\n");
    s.push_str(&report::gains_markdown(&all));
    let _ = writeln!(s, "\n## Top results\n");
    s.push_str(&report::topk_markdown(&o.results, 10));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    fn spec(grid: &str) -> ExperimentSpec {
        ExperimentSpec::from_json(&format!(
            r#"{{"dataset": "unused.csv", "target": "loan_status", "seed": 5,
                "classifiers": ["lda", "gaussian_nb", "decision_tree"],
                "binning": [{{"feature": "person_age", "cuts": [25, 35, 50], "output": "age_group"}}],
                "grid": {grid}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn zero_rate_cell_matches_baseline() {
        let spec = spec(r#"[{"kind": "missing", "features": ["loan_int_rate"], "p": [0.0]}]"#);
        let prepared = prepare_dataset(&spec, synthetic::credit_like(600, 1)).unwrap();
        let o = run_prepared(&spec, prepared, 1).unwrap();
        assert_eq!(o.results.len(), 3);
        for (a, b) in o.baseline.iter().zip(&o.results) {
            assert_eq!(a.metrics, b.metrics);
        }
    }

    #[test]
    fn extended_chain_keeps_its_prefix() {
        let spec = spec(r#"[{"kind": "noise", "features": ["loan_grade"], "p": [0.3, 0.5], "mode": "extended"}]"#);
        let prepared = prepare_dataset(&spec, synthetic::credit_like(600, 2)).unwrap();
        let o = run_prepared(&spec, prepared, 1).unwrap();
        let [first, second] = &o.cells[..] else { panic!("two cells expected") };
        assert_eq!(&second.manifest.records[..first.manifest.len()], &first.manifest.records[..]);
        assert_eq!(second.key.mode.as_str(), "extended");
        assert_eq!(first.test_fingerprint, second.test_fingerprint);
    }

    #[test]
    fn failing_cells_are_recorded() {
        let spec = spec(r#"[{"kind": "outlier", "features": ["loan_grade"], "p": [0.3]}]"#);
        let prepared = prepare_dataset(&spec, synthetic::credit_like(300, 3)).unwrap();
        let o = run_prepared(&spec, prepared, 1).unwrap();
        assert!(o.results.is_empty());
        assert_eq!(o.errors.len(), 1);
        assert!(o.errors[0].message.contains("loan_grade"));
        assert_eq!(o.baseline.len(), 3);
    }

    #[test]
    fn empty_classifier_list() {
        let mut spec = spec("[]");
        spec.classifiers.clear();
        let prepared = prepare_dataset(&spec, synthetic::credit_like(300, 4)).unwrap();
        let o = run_prepared(&spec, prepared, 1).unwrap();
        assert!(o.baseline.is_empty() && o.results.is_empty());
    }
}
