use std::collections::HashSet;
use std::path::Path;

use taintlab_core::injectors::dataset_fingerprint;
use taintlab_experiment::{prepare, results_csv, run, synthetic, write_outputs, ExperimentSpec};

fn spec_in(dir: &Path, rows: usize, body: &str) -> ExperimentSpec {
    std::fs::write(dir.join("credit.csv"), synthetic::credit_like_csv(rows, 11)).unwrap();
    let path = dir.join("spec.json");
    std::fs::write(
        &path,
        format!(r#"{{"dataset": "credit.csv", "target": "loan_status", "seed": 3, {body}}}"#),
    )
    .unwrap();
    ExperimentSpec::load(&path).unwrap()
}

#[test]
fn mislabel_chain_gives_one_row_per_classifier_and_rate() {
    let dir = tempfile::tempdir().unwrap();
    let spec = spec_in(
        dir.path(),
        800,
        r#""grid": [{"kind": "mislabel", "features": ["loan_status"], "p": [0.3, 0.5], "mode": "extended"}]"#,
    );
    let o = run(&spec, 1).unwrap();
    assert_eq!(o.baseline.len(), 6);
    assert_eq!(o.results.len(), 12);
    assert!(o.errors.is_empty());
    let at_half: Vec<_> = o.results.iter().filter(|r| r.p == 0.5).collect();
    assert!(at_half.iter().all(|r| r.mode == "extended"));
    for (r, b) in at_half.iter().zip(&o.baseline) {
        assert!(r.metrics.f1 < b.metrics.f1, "{} did not degrade", r.classifier);
    }
}

#[test]
fn test_split_is_never_touched() {
    let dir = tempfile::tempdir().unwrap();
    let spec = spec_in(
        dir.path(),
        600,
        r#""classifiers": ["gaussian_nb"], "grid": [
            {"kind": "missing", "features": ["loan_grade", "loan_amnt"], "p": [0.5]},
            {"kind": "duplicate", "p": [0.3]},
            {"kind": "mislabel", "p": [0.3]}]"#,
    );
    let prepared = prepare(&spec).unwrap();
    let test_fp = dataset_fingerprint(&prepared.test);
    let test_ids: HashSet<u64> = prepared.test.row_ids().iter().copied().collect();
    let o = run(&spec, 1).unwrap();
    assert_eq!(o.cells.len(), 4);
    for cell in &o.cells {
        assert_eq!(cell.test_fingerprint, test_fp);
        for rec in &cell.manifest.records {
            assert!(!test_ids.contains(&rec.row_id), "{:?} touched test row", cell.key);
        }
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let spec = spec_in(
        dir.path(),
        500,
        r#""classifiers": ["lda", "decision_tree"], "grid": [
            {"kind": "noise", "features": ["loan_grade", "person_income", "loan_intent"], "p": [0.3, 0.5], "mode": "extended"},
            {"kind": "outlier", "features": ["loan_amnt"], "p": [0.3, 0.5]}]"#,
    );
    let one = run(&spec, 1).unwrap();
    let three = run(&spec, 3).unwrap();
    assert_eq!(results_csv(&one.all_results()), results_csv(&three.all_results()));
    let keys = |o: &taintlab_experiment::ExperimentOutcome| -> Vec<String> {
        o.cells.iter().map(|c| c.key.file_stem()).collect()
    };
    assert_eq!(keys(&one), keys(&three));
    assert_eq!(one.distinct_training_sets(), 8);
}

#[test]
fn zero_rate_reproduces_the_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let spec = spec_in(
        dir.path(),
        500,
        r#""grid": [{"kind": "noise", "features": ["loan_intent"], "p": [0]}, {"kind": "duplicate", "p": [0]}]"#,
    );
    let o = run(&spec, 1).unwrap();
    assert_eq!(o.results.len(), 12);
    for (i, r) in o.results.iter().enumerate() {
        assert_eq!(r.metrics, o.baseline[i % 6].metrics, "{} at p=0", r.classifier);
    }
}

#[test]
fn empty_grid_writes_baseline_only() {
    let dir = tempfile::tempdir().unwrap();
    let spec = spec_in(dir.path(), 400, r#""grid": []"#);
    let o = run(&spec, 2).unwrap();
    let out = dir.path().join("out");
    write_outputs(&o, &spec, &out).unwrap();
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.lines().skip(1).all(|l| l.contains(",none,none,0,none,")));
    assert_eq!(std::fs::read_dir(out.join("manifests")).unwrap().count(), 0);
    let summary = std::fs::read_to_string(out.join("summary.md")).unwrap();
    assert!(summary.contains("`credit.csv`"));
    assert!(!summary.contains(dir.path().to_str().unwrap()));
}

#[test]
fn extended_manifests_are_prefixes_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let spec = spec_in(
        dir.path(),
        400,
        r#""classifiers": ["knn"], "grid": [{"kind": "missing", "features": ["loan_int_rate"], "p": [0.1, 0.3, 0.5], "mode": "extended"}]"#,
    );
    let o = run(&spec, 1).unwrap();
    let out = dir.path().join("out");
    write_outputs(&o, &spec, &out).unwrap();
    let read = |stem: &str| std::fs::read_to_string(out.join("manifests").join(format!("{stem}.jsonl"))).unwrap();
    let a = read("missing__loan_int_rate__p0.1__new");
    let b = read("missing__loan_int_rate__p0.3__extended");
    let c = read("missing__loan_int_rate__p0.5__extended");
    let body = |s: &str| s.lines().skip(1).map(str::to_string).collect::<Vec<_>>();
    assert!(body(&b).starts_with(&body(&a)));
    assert!(body(&c).starts_with(&body(&b)));
    assert!(body(&a).len() < body(&b).len() && body(&b).len() < body(&c).len());
}

#[test]
fn bad_specs_are_rejected() {
    for body in [
        r#""split": {"ratio": 1.0}"#,
        r#""classifiers": ["svm"]"#,
        r#""grid": [{"kind": "noise", "features": "all", "p": [0.5, 0.3], "mode": "extended"}]"#,
        r#""grid": [{"kind": "noise", "features": "some", "p": [0.5]}]"#,
        r#""unknown": 1"#,
    ] {
        let text = format!(r#"{{"dataset": "x.csv", "target": "loan_status", {body}}}"#);
        assert!(ExperimentSpec::from_json(&text).is_err(), "{body}");
    }
}
