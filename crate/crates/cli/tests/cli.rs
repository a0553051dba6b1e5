use std::path::Path;
use std::process::{Command, Output};

use taintlab_core::tabular::{read_csv, Value};
use taintlab_experiment::synthetic;

fn taintlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_taintlab"))
        .args(args)
        .current_dir(dir)
        .env_remove("TAINTLAB_SEED")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("credit.csv"), synthetic::credit_like_csv(300, 5)).unwrap();
    dir
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn cells(dir: &Path, name: &str) -> Vec<Vec<Value>> {
    read_csv(dir.join(name), None, None).unwrap().rows().to_vec()
}

#[test]
fn stats_reports_rows_and_balance() {
    let dir = setup();
    let out = taintlab(&["stats", "credit.csv", "--target", "loan_status"], dir.path());
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.starts_with("rows: 300\n"));
    assert!(text.contains("target: loan_status"));
    assert!(text.contains("| loan_grade | categorical | 300 | 0 |"));

    let out = taintlab(&["stats", "credit.csv"], dir.path());
    assert_eq!(code(&out), 0);
    assert!(!stdout(&out).contains("target:"));
}

#[test]
fn stats_rejects_empty_and_ragged_files() {
    let dir = setup();
    write(dir.path(), "empty.csv", "");
    assert_eq!(code(&taintlab(&["stats", "empty.csv"], dir.path())), 2);
    write(dir.path(), "ragged.csv", "a,b\n1,2\n3\n");
    let out = taintlab(&["stats", "ragged.csv"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 1"));
}

#[test]
fn corrupt_at_zero_rate_copies_the_input() {
    let dir = setup();
    write(dir.path(), "zero.json", r#"{"kind": "outlier", "features": ["person_income"], "p": 0}"#);
    let out = taintlab(
        &["corrupt", "credit.csv", "--config", "zero.json", "--out", "o.csv", "--manifest-out", "m.jsonl"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(cells(dir.path(), "credit.csv"), cells(dir.path(), "o.csv"));
}

#[test]
fn mislabel_diff_matches_the_manifest() {
    let dir = setup();
    write(dir.path(), "flip.json", r#"{"kind": "mislabel", "features": ["loan_status"], "p": 0.3, "seed": 4}"#);
    let args = [
        "corrupt", "credit.csv", "--config", "flip.json", "--out", "o.csv", "--manifest-out", "m.jsonl", "--target",
        "loan_status",
    ];
    assert_eq!(code(&taintlab(&args, dir.path())), 0);
    let (a, b) = (cells(dir.path(), "credit.csv"), cells(dir.path(), "o.csv"));
    let changed = a.iter().zip(&b).filter(|(x, y)| x[8] != y[8]).count();
    let others = a.iter().zip(&b).filter(|(x, y)| x[..8] != y[..8] || x[9..] != y[9..]).count();
    assert_eq!((changed, others), (90, 0));
    let manifest = std::fs::read_to_string(dir.path().join("m.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 91);

    let first = std::fs::read(dir.path().join("o.csv")).unwrap();
    assert_eq!(code(&taintlab(&args, dir.path())), 0);
    assert_eq!(std::fs::read(dir.path().join("o.csv")).unwrap(), first);
}

#[test]
fn extended_mode_needs_the_right_manifest() {
    let dir = setup();
    write(dir.path(), "ext.json", r#"{"kind": "missing", "features": ["loan_grade"], "p": 0.5, "mode": "extended"}"#);
    let ext = ["corrupt", "credit.csv", "--config", "ext.json", "--out", "o.csv", "--manifest-out", "m2.jsonl"];
    assert_eq!(code(&taintlab(&ext, dir.path())), 3);

    write(dir.path(), "new.json", r#"{"kind": "missing", "features": ["loan_grade"], "p": 0.3}"#);
    let new = ["corrupt", "credit.csv", "--config", "new.json", "--out", "n.csv", "--manifest-out", "m1.jsonl"];
    assert_eq!(code(&taintlab(&new, dir.path())), 0);
    let mut chained = ext.to_vec();
    chained.extend(["--manifest-in", "m1.jsonl"]);
    assert_eq!(code(&taintlab(&chained, dir.path())), 0);
    let m2 = std::fs::read_to_string(dir.path().join("m2.jsonl")).unwrap();
    assert_eq!(m2.lines().count(), 151);

    std::fs::write(dir.path().join("other.csv"), synthetic::credit_like_csv(300, 6)).unwrap();
    let mut wrong = chained.clone();
    wrong[1] = "other.csv";
    assert_eq!(code(&taintlab(&wrong, dir.path())), 3);
}

#[test]
fn bad_configs_exit_with_two() {
    let dir = setup();
    for (i, config) in [
        r#"{"kind": "noise", "features": ["nope"], "p": 0.3}"#,
        r#"{"kind": "noise", "features": ["loan_grade"], "p": 1.5}"#,
        r#"{"kind": "teleport", "p": 0.3}"#,
        "not json",
    ]
    .iter()
    .enumerate()
    {
        let name = format!("bad{i}.json");
        write(dir.path(), &name, config);
        let out = taintlab(
            &["corrupt", "credit.csv", "--config", &name, "--out", "o.csv", "--manifest-out", "m.jsonl"],
            dir.path(),
        );
        assert_eq!(code(&out), 2, "{config}");
    }
    assert_eq!(code(&taintlab(&["corrupt", "credit.csv"], dir.path())), 2);
}

#[test]
fn seed_override_changes_the_draw() {
    let dir = setup();
    write(dir.path(), "noise.json", r#"{"kind": "noise", "features": ["loan_intent"], "p": 0.2}"#);
    let run = |seed: &str, out: &str| {
        let o = taintlab(
            &["corrupt", "credit.csv", "--config", "noise.json", "--out", out, "--manifest-out", "m.jsonl", "--seed", seed],
            dir.path(),
        );
        assert_eq!(code(&o), 0);
        std::fs::read(dir.path().join(out)).unwrap()
    };
    assert_eq!(run("1", "a.csv"), run("1", "b.csv"));
    assert_ne!(run("1", "a.csv"), run("2", "c.csv"));

    let env = Command::new(env!("CARGO_BIN_EXE_taintlab"))
        .args(["corrupt", "credit.csv", "--config", "noise.json", "--out", "d.csv", "--manifest-out", "m.jsonl"])
        .current_dir(dir.path())
        .env("TAINTLAB_SEED", "2")
        .output()
        .unwrap();
    assert_eq!(code(&env), 0);
    assert_eq!(std::fs::read(dir.path().join("d.csv")).unwrap(), run("2", "c.csv"));
}

#[test]
fn experiment_and_report_round_trip() {
    let dir = setup();
    write(
        dir.path(),
        "spec.json",
        r#"{"dataset": "credit.csv", "target": "loan_status", "classifiers": ["lda", "gaussian_nb"],
            "grid": [{"kind": "mislabel", "p": [0.3, 0.5], "mode": "extended"}]}"#,
    );
    let out = taintlab(&["experiment", "--spec", "spec.json", "--out-dir", "out"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["results.csv", "errors.csv", "summary.md", "manifests/mislabel__loan_status__p0.5__extended.jsonl"] {
        assert!(dir.path().join("out").join(f).is_file(), "{f}");
    }
    let gains = taintlab(&["report", "out/results.csv", "--mode", "gains"], dir.path());
    assert_eq!(code(&gains), 0);
    let gains = stdout(&gains);
    assert!(gains.contains("F1@50% (extended)"));
    let rows: Vec<&str> = gains.lines().filter(|l| l.starts_with("| lda") || l.starts_with("| gaussian_nb")).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|l| l.matches(['↑', '↓', '=']).count() == 2), "{gains}");

    let top = taintlab(&["report", "out/results.csv", "--mode", "topk", "--k", "1"], dir.path());
    assert_eq!(stdout(&top).lines().count(), 3);

    let text = std::fs::read_to_string(dir.path().join("out/results.csv")).unwrap();
    write(dir.path(), "broken.csv", &text.replace("precision,", ""));
    assert_eq!(code(&taintlab(&["report", "broken.csv"], dir.path())), 2);
}

#[test]
fn bad_spec_exits_with_two() {
    let dir = setup();
    write(dir.path(), "spec.json", r#"{"dataset": "credit.csv", "target": "loan_status", "classifiers": ["svm"]}"#);
    let out = taintlab(&["experiment", "--spec", "spec.json", "--out-dir", "out"], dir.path());
    assert_eq!(code(&out), 2);
    assert_eq!(code(&taintlab(&["experiment", "--spec", "missing.json", "--out-dir", "out"], dir.path())), 2);
}
