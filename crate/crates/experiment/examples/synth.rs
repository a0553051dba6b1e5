//! Writes a synthetic credit-like CSV.
//!
//! ```text
//! cargo run -p taintlab-experiment --example synth -- out.csv 5000 7
//! ```

use std::process::ExitCode;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(path) = args.first() else {
        eprintln!("usage: synth <out.csv> [rows] [seed]");
        return ExitCode::from(2);
    };
    let rows = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(5000);
    let seed = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(7);
    if let Err(e) = std::fs::write(path, taintlab_experiment::synthetic::credit_like_csv(rows, seed)) {
        eprintln!("{path}: {e}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
