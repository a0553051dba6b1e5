use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use taintlab_core::error_model::parse_error_models;
use taintlab_core::injectors::{apply, dataset_fingerprint, replay, CorruptionManifest};
use taintlab_core::tabular::{column_stats, read_csv, write_csv, ColumnType};
use taintlab_experiment::report::{render, ReportMode};
use taintlab_experiment::{run, write_outputs, ExperimentError, ExperimentSpec};

/// Deterministic tabular data corruption and classifier robustness runs.
#[derive(Debug, Parser)]
#[command(name = "taintlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Row count, class balance and per-column statistics of a CSV.
    Stats {
        csv: PathBuf,
        #[arg(long)]
        target: Option<String>,
    },
    /// Apply error models to a clean CSV and write the result with its manifest.
    Corrupt {
        csv: PathBuf,
        /// Error-model JSON: one model, an array, or {"models": [...]}.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Manifest of an earlier run on the same clean CSV, required by extended models.
        #[arg(long)]
        manifest_in: Option<PathBuf>,
        #[arg(long)]
        manifest_out: PathBuf,
        /// Replaces the seed of every model.
        #[arg(long, env = "TAINTLAB_SEED")]
        seed: Option<u64>,
        #[arg(long)]
        target: Option<String>,
    },
    /// Run a baseline plus corruption grid described by a JSON spec.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        /// Defaults to the spec's output_dir.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Replaces the spec's master seed.
        #[arg(long, env = "TAINTLAB_SEED")]
        seed: Option<u64>,
    },
    /// Render a results.csv as markdown.
    Report {
        results: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Gains)]
        mode: Mode,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Gains,
    Topk,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Stats { csv, target } => stats(&csv, target.as_deref()),
        Command::Corrupt {
            csv,
            config,
            out,
            manifest_in,
            manifest_out,
            seed,
            target,
        } => corrupt(&csv, &config, &out, manifest_in.as_deref(), &manifest_out, seed, target.as_deref()),
        Command::Experiment {
            spec,
            out_dir,
            jobs,
            seed,
        } => experiment(&spec, out_dir, jobs, seed),
        Command::Report { results, mode, k } => report(&results, mode, k),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 3 when the inputs are well formed but not in the state the operation
/// needs (wrong dataset for a manifest, extended run without a prior), 2 for
/// everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    use taintlab_core::Error as Core;
    let state = |e: &Core| matches!(e, Core::Precondition(_) | Core::Manifest(_));
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Core>() {
            if state(e) {
                return 3;
            }
        }
        if let Some(ExperimentError::Core(e)) = cause.downcast_ref::<ExperimentError>() {
            if state(e) {
                return 3;
            }
        }
    }
    2
}

fn stats(csv: &Path, target: Option<&str>) -> anyhow::Result<()> {
    let ds = read_csv(csv, None, target).with_context(|| format!("reading {}", csv.display()))?;
    if ds.schema().is_empty() {
        return Err(anyhow!("{}: no columns", csv.display()));
    }
    let mut s = String::new();
    writeln!(s, "rows: {}", ds.n_rows())?;
    writeln!(s, "columns: {}", ds.schema().len())?;
    if let Some(t) = ds.schema().target_index() {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for v in ds.column_values(t) {
            *counts.entry(v.render()).or_default() += 1;
        }
        writeln!(s, "target: {}", ds.schema().column(t).name)?;
        for (label, n) in counts {
            let share = if ds.is_empty() { 0.0 } else { 100.0 * n as f64 / ds.n_rows() as f64 };
            let label = if label.is_empty() { "<missing>".to_string() } else { label };
            writeln!(s, "  {label}: {n} ({share:.1}%)")?;
        }
    }
    writeln!(s, "\n| column | type | present | missing | mean | std | min | max | distinct |")?;
    writeln!(s, "|---|---|---|---|---|---|---|---|---|")?;
    for col in ds.schema().columns() {
        let st = column_stats(&ds, &col.name)?;
        let numeric = matches!(col.ty, ColumnType::Integer | ColumnType::Float | ColumnType::Boolean | ColumnType::Date);
        let num = |x: f64| if numeric && !st.is_empty() { format!("{x:.4}") } else { "-".into() };
        writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} |",
            col.name,
            col.ty.name(),
            st.count,
            ds.n_rows() - st.count,
            num(st.mean),
            num(st.std),
            num(st.min),
            num(st.max),
            st.distinct.len()
        )?;
    }
    print!("{s}");
    Ok(())
}

fn corrupt(
    csv: &Path,
    config: &Path,
    out: &Path,
    manifest_in: Option<&Path>,
    manifest_out: &Path,
    seed: Option<u64>,
    target: Option<&str>,
) -> anyhow::Result<()> {
    let clean = read_csv(csv, None, target).with_context(|| format!("reading {}", csv.display()))?;
    let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let mut models = parse_error_models(&text).with_context(|| config.display().to_string())?;
    if let Some(seed) = seed {
        for m in &mut models {
            m.seed = seed;
        }
    }
    let mut manifest = match manifest_in {
        Some(path) => Some(
            CorruptionManifest::read(path, clean.schema()).with_context(|| format!("reading {}", path.display()))?,
        ),
        None => None,
    };
    let mut corrupted = match &manifest {
        Some(m) => replay(&clean, m).with_context(|| format!("replaying {}", manifest_in.unwrap().display()))?,
        None => clean.clone(),
    };
    for (i, model) in models.iter().enumerate() {
        let inj = apply(&clean, model, manifest.as_ref()).with_context(|| format!("model {i} ({})", model.kind))?;
        for skip in &inj.skipped {
            eprintln!("skipped row {} column {}: {}", skip.row_id, skip.column, skip.reason);
        }
        corrupted = inj.dataset;
        manifest = Some(inj.manifest);
    }
    let manifest = manifest.unwrap_or_else(|| CorruptionManifest::new(dataset_fingerprint(&clean)));
    write_csv(&corrupted, out).with_context(|| format!("writing {}", out.display()))?;
    manifest
        .write(manifest_out)
        .with_context(|| format!("writing {}", manifest_out.display()))?;
    println!(
        "{} records, {} rows written to {}",
        manifest.len(),
        corrupted.n_rows(),
        out.display()
    );
    Ok(())
}

fn experiment(spec_path: &Path, out_dir: Option<PathBuf>, jobs: usize, seed: Option<u64>) -> anyhow::Result<()> {
    let mut spec = ExperimentSpec::load(spec_path)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let dir = out_dir
        .or_else(|| spec.output_dir.clone())
        .ok_or_else(|| anyhow!("no output directory: pass --out-dir or set output_dir in the spec"))?;
    let outcome = run(&spec, jobs)?;
    write_outputs(&outcome, &spec, &dir)?;
    println!(
        "{} baseline and {} grid results over {} corrupted training sets ({} failures) written to {}",
        outcome.baseline.len(),
        outcome.results.len(),
        outcome.cells.len(),
        outcome.errors.len(),
        dir.display()
    );
    Ok(())
}

fn report(results: &Path, mode: Mode, k: usize) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(results).with_context(|| format!("reading {}", results.display()))?;
    let mode = match mode {
        Mode::Gains => ReportMode::Gains,
        Mode::Topk => ReportMode::TopK,
    };
    let md = render(&text, mode, k).with_context(|| results.display().to_string())?;
    print!("{md}");
    Ok(())
}
