//! The five corruption families.
//!
//! Every injector reads statistics and candidate rows from the clean dataset,
//! emits [`CorruptionRecord`]s, and produces its output by applying those
//! records to the clean data (after the prior manifest, if any). The output is
//! therefore always `replay(clean, manifest)`.

mod manifest;

use std::collections::{HashMap, HashSet};

use rand::distr::Alphanumeric;
use rand::Rng as _;

pub use manifest::{dataset_fingerprint, replay, Change, CorruptionManifest, CorruptionRecord};

use crate::error::{Error, Result};
use crate::error_model::{draw_ranks, eval_predicate, select_from, BoundPredicate, ErrorKind, ErrorModel, Mode};
use crate::rng::{derive_seed, rng_from_seed, round_half_up, Rng};
use crate::tabular::{date_from_days, days_from_epoch, stats_for_column, ColumnType, Dataset, FeatureStats, RowId, Value};

/// Redraws allowed before a noise or outlier value falls back.
const MAX_REDRAWS: usize = 16;

/// A selected cell the injector could not change.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedCell {
    pub row_id: RowId,
    pub column: String,
    pub reason: String,
}

/// Output of one injection run.
#[derive(Debug, Clone)]
pub struct Injection {
    pub dataset: Dataset,
    /// Prior records followed by this run's records.
    pub manifest: CorruptionManifest,
    /// Selected cells left unchanged (e.g. single-value categorical domain).
    pub skipped: Vec<SkippedCell>,
}

/// Applies `model` to the clean dataset `ds`, on top of `prior` when given.
///
/// Extended mode requires a prior manifest produced for `ds`; new mode
/// rejects a prior whose fingerprint does not match `ds`.
pub fn apply(ds: &Dataset, model: &ErrorModel, prior: Option<&CorruptionManifest>) -> Result<Injection> {
    match model.kind {
        ErrorKind::Missing => inject_missing(ds, model, prior),
        ErrorKind::Noise => inject_noise(ds, model, prior),
        ErrorKind::Outlier => inject_outliers(ds, model, prior),
        ErrorKind::Duplicate => inject_duplicates(ds, model, prior),
        ErrorKind::Mislabel => inject_mislabels(ds, model, prior),
    }
}

pub fn inject_missing(ds: &Dataset, model: &ErrorModel, prior: Option<&CorruptionManifest>) -> Result<Injection> {
    let mut run = Run::start(ds, model, prior, ErrorKind::Missing)?;
    for feature in &model.features {
        let col = run.clean.schema().require(feature)?;
        for (row_id, original) in run.select_cells(col) {
            run.push_cell(row_id, feature, original, Value::Missing);
        }
    }
    run.finish()
}

pub fn inject_noise(ds: &Dataset, model: &ErrorModel, prior: Option<&CorruptionManifest>) -> Result<Injection> {
    let mut run = Run::start(ds, model, prior, ErrorKind::Noise)?;
    for feature in &model.features {
        let col = run.clean.schema().require(feature)?;
        let sampler = NoiseSampler::new(run.clean, col);
        let mut rng = run.value_rng(feature);
        for (row_id, original) in run.select_cells(col) {
            match sampler.draw(&original, &mut rng) {
                Some(v) => run.push_cell(row_id, feature, original, v),
                None => run.skip(row_id, feature, sampler.why_not()),
            }
        }
    }
    run.finish()
}

pub fn inject_outliers(ds: &Dataset, model: &ErrorModel, prior: Option<&CorruptionManifest>) -> Result<Injection> {
    let mut run = Run::start(ds, model, prior, ErrorKind::Outlier)?;
    for feature in &model.features {
        let col = run.clean.schema().require(feature)?;
        let ty = &run.clean.schema().column(col).ty;
        if !ty.is_numeric() {
            return Err(Error::InvalidModel(format!(
                "outliers need a numeric column but '{feature}' is {}",
                ty.name()
            )));
        }
        let integer = matches!(ty, ColumnType::Integer);
        let stats = stats_for_column(run.clean, col);
        if stats.std <= 0.0 {
            return Err(Error::InvalidModel(format!(
                "column '{feature}' has zero standard deviation; outliers are undefined"
            )));
        }
        let mut rng = run.value_rng(feature);
        for (row_id, original) in run.select_cells(col) {
            let drawn = (0..MAX_REDRAWS)
                .map(|_| outlier_value(stats.mean, stats.std, integer, &mut rng))
                .find(|v| *v != original);
            match drawn {
                Some(v) => run.push_cell(row_id, feature, original, v),
                None => run.skip(row_id, feature, "every outlier draw equalled the original value".into()),
            }
        }
    }
    run.finish()
}

pub fn inject_duplicates(ds: &Dataset, model: &ErrorModel, prior: Option<&CorruptionManifest>) -> Result<Injection> {
    let mut run = Run::start(ds, model, prior, ErrorKind::Duplicate)?;
    let rho = run.rho_rows(None);
    let prior_copies = run.prior.map_or(0, |m| m.count(ErrorKind::Duplicate, None));
    let n_new = round_half_up(model.p, rho.len())
        .saturating_sub(prior_copies)
        .min(rho.len());
    let mut select_rng = rng_from_seed(derive_seed(model.seed, &["select", "duplicate", "*"]));
    let parents: Vec<RowId> = draw_ranks(rho.len(), n_new, model.distribution, &mut select_rng)
        .into_iter()
        .map(|r| rho[r])
        .collect();

    let perturbed: Vec<(usize, &String, NoiseSampler)> = model
        .features
        .iter()
        .map(|f| {
            let col = run.clean.schema().require(f)?;
            Ok((col, f, NoiseSampler::new(run.clean, col)))
        })
        .collect::<Result<_>>()?;
    let mut value_rng = run.value_rng("*");
    for (new_id, parent) in (run.base.next_row_id()..).zip(parents) {
        run.records.push(CorruptionRecord {
            row_id: new_id,
            kind: ErrorKind::Duplicate,
            change: Change::RowCopy { parent },
            model: run.model_fp.clone(),
        });
        let parent_pos = run.base_pos[&parent];
        for (col, feature, sampler) in &perturbed {
            let original = run.base.cell(parent_pos, *col).clone();
            match sampler.draw(&original, &mut value_rng) {
                Some(v) => run.push_cell(new_id, feature, original, v),
                None => run.skip(new_id, feature, sampler.why_not()),
            }
        }
    }
    run.touched.insert(CorruptionManifest::key(ErrorKind::Duplicate, None));
    run.finish()
}

pub fn inject_mislabels(ds: &Dataset, model: &ErrorModel, prior: Option<&CorruptionManifest>) -> Result<Injection> {
    let mut run = Run::start(ds, model, prior, ErrorKind::Mislabel)?;
    let target = &model.features[0];
    let col = run.clean.schema().require(target)?;
    let ty = &run.clean.schema().column(col).ty;
    if !matches!(ty, ColumnType::Categorical(_) | ColumnType::Integer | ColumnType::Boolean | ColumnType::String) {
        return Err(Error::InvalidModel(format!(
            "mislabel needs a categorical or integer-coded target but '{target}' is {}",
            ty.name()
        )));
    }
    let mut classes: Vec<Value> = run.clean.column_values(col).filter(|v| !v.is_missing()).cloned().collect();
    classes.sort_by(|a, b| a.compare(b).unwrap_or(std::cmp::Ordering::Equal));
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::InvalidModel(format!(
            "target '{target}' has {} class(es); mislabeling needs at least two",
            classes.len()
        )));
    }
    let mut rng = run.value_rng(target);
    for (row_id, original) in run.select_cells(col) {
        let others: Vec<&Value> = classes.iter().filter(|c| **c != original).collect();
        let new = others[rng.random_range(0..others.len())].clone();
        run.push_cell(row_id, target, original, new);
    }
    run.finish()
}

/// Shared state of one injection run.
struct Run<'a> {
    clean: &'a Dataset,
    base: Dataset,
    base_pos: HashMap<RowId, usize>,
    model: &'a ErrorModel,
    model_fp: String,
    predicate: BoundPredicate,
    prior: Option<&'a CorruptionManifest>,
    fingerprint: String,
    records: Vec<CorruptionRecord>,
    skipped: Vec<SkippedCell>,
    touched: HashSet<String>,
}

impl<'a> Run<'a> {
    fn start(clean: &'a Dataset, model: &'a ErrorModel, prior: Option<&'a CorruptionManifest>, kind: ErrorKind) -> Result<Self> {
        if model.kind != kind {
            return Err(Error::InvalidModel(format!("expected a {kind} model, got {}", model.kind)));
        }
        let predicate = model.validate(clean.schema())?;
        let fingerprint = dataset_fingerprint(clean);
        match (model.mode, prior) {
            (Mode::Extended, None) => {
                return Err(Error::Precondition("extended mode requires a prior manifest".into()));
            }
            (Mode::Extended, Some(m)) if m.dataset_fingerprint != fingerprint => {
                return Err(Error::Precondition(format!(
                    "extended mode: prior manifest belongs to dataset {} but the input is {fingerprint}",
                    m.dataset_fingerprint
                )));
            }
            (Mode::New, Some(m)) if m.dataset_fingerprint != fingerprint => {
                return Err(Error::Precondition(format!(
                    "new mode requires the clean dataset (fingerprint {}), got {fingerprint}",
                    m.dataset_fingerprint
                )));
            }
            _ => {}
        }
        let base = match prior {
            Some(m) => replay(clean, m)?,
            None => clean.clone(),
        };
        Ok(Self {
            clean,
            base_pos: base.positions(),
            base,
            model,
            model_fp: model.fingerprint(),
            predicate,
            prior,
            fingerprint,
            records: Vec::new(),
            skipped: Vec::new(),
            touched: HashSet::new(),
        })
    }

    /// Clean rows satisfying the predicate, in row order; with `col`, only
    /// rows whose clean cell is present.
    fn rho_rows(&self, col: Option<usize>) -> Vec<RowId> {
        self.clean
            .rows()
            .iter()
            .zip(self.clean.row_ids())
            .filter(|(row, _)| col.is_none_or(|c| !row[c].is_missing()))
            .filter(|(row, _)| eval_predicate(row, &self.predicate))
            .map(|(_, id)| *id)
            .collect()
    }

    /// Selects cells of `col` for this run and returns them with their
    /// current values. Extended mode excludes rows the prior already
    /// corrupted with the same kind on this column.
    fn select_cells(&mut self, col: usize) -> Vec<(RowId, Value)> {
        let column = self.clean.schema().column(col).name.clone();
        self.touched.insert(CorruptionManifest::key(self.model.kind, Some(&column)));
        let rho = self.rho_rows(Some(col));
        let exclusions: HashSet<RowId> = match (self.model.mode, self.prior) {
            (Mode::Extended, Some(m)) => m
                .records
                .iter()
                .filter(|r| r.kind == self.model.kind && r.column() == Some(column.as_str()))
                .map(|r| r.row_id)
                .collect(),
            _ => HashSet::new(),
        };
        let seed = derive_seed(self.model.seed, &["select", self.model.kind.as_str(), &column]);
        let selection = select_from(&rho, self.model.p, self.model.distribution, &exclusions, seed);
        selection
            .ids
            .into_iter()
            .map(|id| (id, self.base.cell(self.base_pos[&id], col).clone()))
            .collect()
    }

    fn value_rng(&self, feature: &str) -> Rng {
        rng_from_seed(derive_seed(self.model.seed, &["values", self.model.kind.as_str(), feature]))
    }

    fn push_cell(&mut self, row_id: RowId, column: &str, original: Value, corrupted: Value) {
        self.records.push(CorruptionRecord {
            row_id,
            kind: self.model.kind,
            change: Change::Cell {
                column: column.to_string(),
                original,
                corrupted,
            },
            model: self.model_fp.clone(),
        });
    }

    fn skip(&mut self, row_id: RowId, column: &str, reason: String) {
        self.skipped.push(SkippedCell {
            row_id,
            column: column.to_string(),
            reason,
        });
    }

    fn finish(self) -> Result<Injection> {
        let mut dataset = self.base;
        manifest::apply_records(&mut dataset, &self.records)?;
        let mut manifest = match self.prior {
            Some(m) => m.clone(),
            None => CorruptionManifest::new(self.fingerprint),
        };
        if !manifest.models.contains(&self.model_fp) {
            manifest.models.push(self.model_fp);
        }
        for key in self.touched {
            manifest.cumulative_p.insert(key, self.model.p);
        }
        manifest.records.extend(self.records);
        Ok(Injection {
            dataset,
            manifest,
            skipped: self.skipped,
        })
    }
}

/// Replacement-value sampler for one clean column.
struct NoiseSampler {
    ty: ColumnType,
    stats: FeatureStats,
    domain: Vec<Value>,
}

impl NoiseSampler {
    fn new(clean: &Dataset, col: usize) -> Self {
        let stats = stats_for_column(clean, col);
        let ty = clean.schema().column(col).ty.clone();
        let domain = match &ty {
            ColumnType::Categorical(_) => stats.distinct.iter().map(|s| Value::Text(s.clone())).collect(),
            _ => Vec::new(),
        };
        Self { ty, stats, domain }
    }

    fn why_not(&self) -> String {
        match self.ty {
            ColumnType::Categorical(_) => format!("categorical domain has {} value(s)", self.domain.len()),
            _ => "clean column has no alternative value in range".into(),
        }
    }

    /// A value different from `original`: numbers and dates uniform in the
    /// clean range, categories uniform over the other observed values,
    /// strings random alphanumeric of the same length, booleans flipped.
    fn draw(&self, original: &Value, rng: &mut Rng) -> Option<Value> {
        let s = &self.stats;
        match &self.ty {
            ColumnType::Boolean => Some(match original {
                Value::Bool(b) => Value::Bool(!b),
                _ => Value::Bool(rng.random_bool(0.5)),
            }),
            ColumnType::Categorical(_) => {
                let others: Vec<&Value> = self.domain.iter().filter(|v| *v != original).collect();
                (!others.is_empty()).then(|| others[rng.random_range(0..others.len())].clone())
            }
            ColumnType::String => {
                let len = match original {
                    Value::Text(t) => t.chars().count().max(1),
                    _ => 1,
                };
                (0..MAX_REDRAWS)
                    .map(|_| Value::Text((0..len).map(|_| rng.sample(Alphanumeric) as char).collect()))
                    .find(|v| v != original)
            }
            _ if s.count == 0 => None,
            ColumnType::Integer => {
                let (lo, hi) = (s.min.ceil(), s.max.floor());
                let draw = |rng: &mut Rng| Value::Int(rng.random_range(s.min..=s.max).round() as i64);
                redraw(original, rng, draw).or_else(|| {
                    let Value::Int(o) = original else { return None };
                    [*o + 1, *o - 1]
                        .into_iter()
                        .find(|c| (lo..=hi).contains(&(*c as f64)))
                        .map(Value::Int)
                })
            }
            ColumnType::Float => {
                let draw = |rng: &mut Rng| Value::Float(rng.random_range(s.min..=s.max));
                redraw(original, rng, draw).or_else(|| {
                    let Value::Float(o) = original else { return None };
                    [o.next_up(), o.next_down()]
                        .into_iter()
                        .find(|c| (s.min..=s.max).contains(c))
                        .map(Value::Float)
                })
            }
            ColumnType::Date => {
                let lo = days_from_epoch(s.date_min?);
                let hi = days_from_epoch(s.date_max?);
                let draw = |rng: &mut Rng| Value::Date(date_from_days(rng.random_range(lo..=hi)).expect("in range"));
                redraw(original, rng, draw).or_else(|| {
                    let Value::Date(o) = original else { return None };
                    let d = days_from_epoch(*o);
                    [d + 1, d - 1]
                        .into_iter()
                        .find(|c| (lo..=hi).contains(c))
                        .and_then(date_from_days)
                        .map(Value::Date)
                })
            }
        }
    }
}

fn redraw(original: &Value, rng: &mut Rng, mut draw: impl FnMut(&mut Rng) -> Value) -> Option<Value> {
    (0..MAX_REDRAWS).map(|_| draw(rng)).find(|v| v != original)
}

/// `mean ± u` with `u` uniform in `[3 std, 5 std]` and the sign chosen with
/// equal probability. Integer results are rounded, stepping one unit outward
/// if rounding fell inside the 3 std band.
fn outlier_value(mean: f64, std: f64, integer: bool, rng: &mut Rng) -> Value {
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let offset = rng.random_range(3.0 * std..=5.0 * std);
    let v = mean + sign * offset;
    if integer {
        let mut r = v.round();
        if (r - mean).abs() < 3.0 * std {
            r += sign;
        }
        Value::Int(r as i64)
    } else {
        Value::Float(v)
    }
}
