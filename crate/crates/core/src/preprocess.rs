//! Preparation of datasets for learning: dropping incomplete rows, binning,
//! numeric encoding and stratified splitting.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, round_half_up};
use crate::tabular::{ColumnType, Dataset, RowId, Value};

/// Removes every row holding at least one missing cell. Order is preserved.
pub fn drop_missing_rows(ds: &Dataset) -> Dataset {
    ds.filter_rows(|i| !ds.row(i).iter().any(Value::is_missing))
}

/// Interval binning of one numeric feature.
///
/// A value `v` falls in bin `i` when `cuts[i-1] <= v < cuts[i]`; the outer
/// bins are unbounded.
#[derive(Debug, Clone, PartialEq)]
pub struct BinningSpec {
    pub feature: String,
    pub cuts: Vec<f64>,
    pub labels: Vec<String>,
    /// When set, the bin index is appended as a new integer column with this
    /// name and the source column is kept. Otherwise the source column is
    /// replaced by a categorical column of labels.
    pub output: Option<String>,
}

impl BinningSpec {
    pub fn new(feature: impl Into<String>, cuts: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        let spec = Self {
            feature: feature.into(),
            cuts,
            labels,
            output: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn appended_as(mut self, name: impl Into<String>) -> Self {
        self.output = Some(name.into());
        self
    }

    /// Cuts at the given quantiles of the feature's non-missing values,
    /// labelled `q1..qn`. Coinciding cuts are merged.
    pub fn from_quantiles(ds: &Dataset, feature: &str, probs: &[f64]) -> Result<Self> {
        let col = ds.schema().require(feature)?;
        let mut values: Vec<f64> = ds.column_values(col).filter_map(numeric).collect();
        if values.is_empty() {
            return Err(Error::Preprocess(format!("'{feature}' has no numeric values to bin")));
        }
        values.sort_by(f64::total_cmp);
        let mut cuts: Vec<f64> = probs.iter().map(|&q| quantile(&values, q)).collect();
        cuts.dedup();
        let labels = (1..=cuts.len() + 1).map(|i| format!("q{i}")).collect();
        Self::new(feature, cuts, labels)
    }

    pub fn quartiles(ds: &Dataset, feature: &str) -> Result<Self> {
        Self::from_quantiles(ds, feature, &[0.25, 0.5, 0.75])
    }

    pub fn validate(&self) -> Result<()> {
        if self.cuts.iter().any(|c| !c.is_finite()) {
            return Err(Error::Preprocess(format!("bins for '{}': cuts must be finite", self.feature)));
        }
        if self.cuts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Preprocess(format!(
                "bins for '{}': cuts must be strictly increasing",
                self.feature
            )));
        }
        if self.labels.len() != self.cuts.len() + 1 {
            return Err(Error::Preprocess(format!(
                "bins for '{}': {} cuts need {} labels, got {}",
                self.feature,
                self.cuts.len(),
                self.cuts.len() + 1,
                self.labels.len()
            )));
        }
        if self.labels.iter().collect::<BTreeSet<_>>().len() != self.labels.len() {
            return Err(Error::Preprocess(format!("bins for '{}': labels must be unique", self.feature)));
        }
        Ok(())
    }

    /// Index of the bin holding `v`.
    pub fn bin_index(&self, v: f64) -> usize {
        self.cuts.partition_point(|&c| c <= v)
    }
}

fn numeric(v: &Value) -> Option<f64> {
    match v {
        Value::Int(i) => Some(*i as f64),
        Value::Float(f) => Some(*f),
        _ => None,
    }
}

/// Linear-interpolation quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Bins one numeric feature. Missing cells stay missing.
pub fn bin_feature(ds: &Dataset, spec: &BinningSpec) -> Result<Dataset> {
    spec.validate()?;
    let col = ds.schema().require(&spec.feature)?;
    let ty = &ds.schema().column(col).ty;
    if !matches!(ty, ColumnType::Integer | ColumnType::Float) {
        return Err(Error::Preprocess(format!(
            "cannot bin '{}': column is {}, not numeric",
            spec.feature,
            ty.name()
        )));
    }
    let bins: Vec<Option<usize>> = ds
        .column_values(col)
        .map(|v| numeric(v).map(|x| spec.bin_index(x)))
        .collect();
    let mut out = ds.clone();
    match &spec.output {
        Some(name) => {
            let values = bins
                .iter()
                .map(|b| b.map_or(Value::Missing, |i| Value::Int(i as i64)))
                .collect();
            out.append_column(name.clone(), ColumnType::Integer, values)?;
        }
        None => {
            let values = bins
                .iter()
                .map(|b| b.map_or(Value::Missing, |i| Value::Text(spec.labels[i].clone())))
                .collect();
            let domain = spec.labels.iter().cloned().collect();
            out.replace_column(col, ColumnType::Categorical(domain), values);
        }
    }
    Ok(out)
}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Preprocess(format!(
                "matrix of {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::Preprocess(format!("row {bad} has {} values, expected {cols}", rows[bad].len())));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        // chunks_exact would yield nothing for zero columns.
        (0..self.rows).map(move |i| self.row(i))
    }
}

/// Numeric view of a dataset ready for a classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    pub x: Matrix,
    /// Class codes in `0..n_classes`.
    pub y: Vec<usize>,
    pub n_classes: usize,
    pub feature_names: Vec<String>,
    pub row_ids: Vec<RowId>,
    /// Categorical cells absent from the fitted vocabulary; encoded as -1.
    pub unseen: Vec<UnseenCategory>,
}

impl EncodedMatrix {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnseenCategory {
    pub row_id: RowId,
    pub column: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq)]
enum FeatureCoding {
    Scale { min: f64, max: f64 },
    Flag,
    Codes(BTreeMap<String, usize>),
}

/// Encoding parameters fitted on one dataset and applied to others.
///
/// Numeric and date columns are min-max scaled with the fitted bounds, a
/// constant column becomes all zeros, booleans map to 0/1 and text columns
/// get ordinal codes in sorted-name order. Columns keep schema order.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    features: Vec<(String, FeatureCoding)>,
    target: String,
    classes: Vec<Value>,
}

impl Encoder {
    pub fn fit(ds: &Dataset) -> Result<Self> {
        let schema = ds.schema();
        let target_idx = schema
            .target_index()
            .ok_or_else(|| Error::Preprocess("encoding requires a target column".into()))?;
        let mut features = Vec::new();
        for (j, col) in schema.columns().iter().enumerate() {
            if j == target_idx {
                continue;
            }
            let present = ds.column_values(j).filter(|v| !v.is_missing());
            let coding = match col.ty {
                ColumnType::Boolean => FeatureCoding::Flag,
                ColumnType::Categorical(_) | ColumnType::String => {
                    let names: BTreeSet<&str> = present.filter_map(Value::as_text).collect();
                    FeatureCoding::Codes(names.into_iter().enumerate().map(|(i, s)| (s.to_string(), i)).collect())
                }
                _ => {
                    let (min, max) = present
                        .filter_map(Value::as_f64)
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
                    if min > max {
                        FeatureCoding::Scale { min: 0.0, max: 0.0 }
                    } else {
                        FeatureCoding::Scale { min, max }
                    }
                }
            };
            features.push((col.name.clone(), coding));
        }
        let mut classes: Vec<Value> = ds
            .column_values(target_idx)
            .filter(|v| !v.is_missing())
            .cloned()
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        classes.sort_by(label_order);
        if classes.is_empty() {
            return Err(Error::Preprocess("target column has no values".into()));
        }
        Ok(Self {
            features,
            target: schema.column(target_idx).name.clone(),
            classes,
        })
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Target values in code order.
    pub fn classes(&self) -> &[Value] {
        &self.classes
    }

    pub fn class_code(&self, label: &Value) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    /// Ordinal code of a category of `feature`.
    pub fn category_code(&self, feature: &str, name: &str) -> Option<usize> {
        match self.coding(feature)? {
            FeatureCoding::Codes(codes) => codes.get(name).copied(),
            _ => None,
        }
    }

    /// Category behind an ordinal code of `feature`.
    pub fn decode_category(&self, feature: &str, code: usize) -> Option<&str> {
        match self.coding(feature)? {
            FeatureCoding::Codes(codes) => codes.iter().find(|(_, c)| **c == code).map(|(s, _)| s.as_str()),
            _ => None,
        }
    }

    fn coding(&self, feature: &str) -> Option<&FeatureCoding> {
        self.features.iter().find(|(n, _)| n == feature).map(|(_, c)| c)
    }

    /// Encodes `ds`, which must have the fitted columns and no missing cells.
    pub fn transform(&self, ds: &Dataset) -> Result<EncodedMatrix> {
        let schema = ds.schema();
        let cols: Vec<usize> = self
            .features
            .iter()
            .map(|(n, _)| schema.require(n))
            .collect::<Result<_>>()?;
        let target = schema.require(&self.target)?;
        let d = cols.len();
        let mut data = Vec::with_capacity(ds.n_rows() * d);
        let mut y = Vec::with_capacity(ds.n_rows());
        let mut unseen = Vec::new();
        for (i, row) in ds.rows().iter().enumerate() {
            let id = ds.row_ids()[i];
            for ((name, coding), &j) in self.features.iter().zip(&cols) {
                let cell = &row[j];
                if cell.is_missing() {
                    return Err(Error::Preprocess(format!("row {id}: '{name}' is missing")));
                }
                let x = match coding {
                    FeatureCoding::Scale { min, max } => {
                        let v = cell
                            .as_f64()
                            .ok_or_else(|| Error::Preprocess(format!("row {id}: '{name}' is not numeric")))?;
                        if max > min {
                            (v - min) / (max - min)
                        } else {
                            0.0
                        }
                    }
                    FeatureCoding::Flag => match cell {
                        Value::Bool(b) => f64::from(u8::from(*b)),
                        _ => return Err(Error::Preprocess(format!("row {id}: '{name}' is not boolean"))),
                    },
                    FeatureCoding::Codes(codes) => {
                        let text = cell.render();
                        match codes.get(&text) {
                            Some(c) => *c as f64,
                            None => {
                                unseen.push(UnseenCategory {
                                    row_id: id,
                                    column: name.clone(),
                                    value: text,
                                });
                                -1.0
                            }
                        }
                    }
                };
                data.push(x);
            }
            let label = &row[target];
            let code = self.class_code(label).ok_or_else(|| {
                Error::Preprocess(format!("row {id}: target value {label} was not seen when fitting"))
            })?;
            y.push(code);
        }
        Ok(EncodedMatrix {
            x: Matrix::new(ds.n_rows(), d, data)?,
            y,
            n_classes: self.classes.len(),
            feature_names: self.feature_names(),
            row_ids: ds.row_ids().to_vec(),
            unseen,
        })
    }
}

/// Fits an encoder on `ds` and encodes it.
pub fn encode(ds: &Dataset) -> Result<EncodedMatrix> {
    Encoder::fit(ds)?.transform(ds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    pub ratio: f64,
    pub seed: u64,
}

/// Per-class split: each class sends `round_half_up(ratio * count)` rows to
/// train (at least one, and at least one left for test), chosen by a seeded
/// shuffle. Both sides keep the input row order.
pub fn stratified_split(ds: &Dataset, ratio: f64, seed: u64) -> Result<SplitPair> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Preprocess(format!("split ratio must lie in (0, 1), got {ratio}")));
    }
    let target = ds
        .schema()
        .target_index()
        .ok_or_else(|| Error::Preprocess("stratified split requires a target column".into()))?;
    let mut by_class: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, row) in ds.rows().iter().enumerate() {
        let label = &row[target];
        if label.is_missing() {
            return Err(Error::Preprocess(format!("row {}: target is missing", ds.row_ids()[i])));
        }
        by_class.entry(label.render()).or_default().push(i);
    }
    let mut in_train = vec![false; ds.n_rows()];
    for (label, mut members) in by_class {
        if members.len() < 2 {
            return Err(Error::Preprocess(format!(
                "class '{label}' has a single row; every class needs at least 2 to split"
            )));
        }
        let n = round_half_up(ratio, members.len()).clamp(1, members.len() - 1);
        let mut rng = rng_from_seed(derive_seed(seed, &["split", &label]));
        members.shuffle(&mut rng);
        for &i in &members[..n] {
            in_train[i] = true;
        }
    }
    Ok(SplitPair {
        train: ds.filter_rows(|i| in_train[i]),
        test: ds.filter_rows(|i| !in_train[i]),
        ratio,
        seed,
    })
}

/// Orders class labels; integers compare numerically.
fn label_order(a: &Value, b: &Value) -> Ordering {
    a.compare(b).unwrap_or_else(|| a.render().cmp(&b.render()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{Column, Schema};

    fn ages(values: &[Option<i64>]) -> Dataset {
        let schema = Schema::new(
            vec![Column::new("age", ColumnType::Integer), Column::new("y", ColumnType::Integer)],
            Some("y".into()),
        )
        .unwrap();
        let rows = values
            .iter()
            .enumerate()
            .map(|(i, v)| vec![v.map_or(Value::Missing, Value::Int), Value::Int(i as i64 % 2)])
            .collect();
        Dataset::from_rows(schema, rows).unwrap()
    }

    fn age_bins() -> BinningSpec {
        BinningSpec::new(
            "age",
            vec![25.0, 35.0, 50.0],
            ["18-24", "25-34", "35-49", "50+"].map(String::from).to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn drop_missing() {
        let ds = ages(&[Some(1), None, Some(3)]);
        let out = drop_missing_rows(&ds);
        assert_eq!(out.row_ids(), &[0, 2]);
        let clean = ages(&[Some(1), Some(2)]);
        assert_eq!(drop_missing_rows(&clean), clean);
        assert!(drop_missing_rows(&ages(&[None, None])).is_empty());
    }

    #[test]
    fn age_groups() {
        let ds = ages(&[Some(22), Some(25), Some(90), None, Some(35), Some(49)]);
        let out = bin_feature(&ds, &age_bins()).unwrap();
        let got: Vec<String> = out.column_values(0).map(Value::render).collect();
        assert_eq!(got, ["18-24", "25-34", "50+", "", "35-49", "35-49"]);
        assert!(matches!(out.schema().column(0).ty, ColumnType::Categorical(_)));
        assert_eq!(out.row_ids(), ds.row_ids());
        assert!(out.column_values(1).eq(ds.column_values(1)));
    }

    #[test]
    fn appended_bin_index() {
        let ds = ages(&[Some(22), Some(25), Some(90), None]);
        let out = bin_feature(&ds, &age_bins().appended_as("age_bin")).unwrap();
        assert_eq!(out.schema().names().collect::<Vec<_>>(), ["age", "y", "age_bin"]);
        let got: Vec<Value> = out.column_values(2).cloned().collect();
        assert_eq!(got, [Value::Int(0), Value::Int(1), Value::Int(3), Value::Missing]);
        assert!(out.column_values(0).eq(ds.column_values(0)));
    }

    #[test]
    fn bad_specs() {
        let labels = |n: usize| (0..n).map(|i| i.to_string()).collect::<Vec<_>>();
        assert!(BinningSpec::new("a", vec![2.0, 1.0], labels(3)).is_err());
        assert!(BinningSpec::new("a", vec![1.0, 1.0], labels(3)).is_err());
        assert!(BinningSpec::new("a", vec![1.0], labels(3)).is_err());
        assert!(BinningSpec::new("a", vec![1.0], vec!["x".into(), "x".into()]).is_err());
        let ds = bin_feature(&ages(&[Some(1)]), &age_bins()).unwrap();
        assert!(bin_feature(&ds, &age_bins()).is_err());
    }

    #[test]
    fn quartile_cuts_interpolate() {
        let ds = ages(&(1..=9).map(Some).collect::<Vec<_>>());
        let spec = BinningSpec::quartiles(&ds, "age").unwrap();
        assert_eq!(spec.cuts, [3.0, 5.0, 7.0]);
        let ds = ages(&[Some(1), Some(2), Some(3), Some(4)]);
        assert_eq!(BinningSpec::quartiles(&ds, "age").unwrap().cuts, [1.75, 2.5, 3.25]);
        let constant = ages(&[Some(4); 5]);
        let spec = BinningSpec::quartiles(&constant, "age").unwrap();
        assert_eq!((spec.cuts.len(), spec.labels.len()), (1, 2));
    }

    fn loans() -> Dataset {
        let schema = Schema::new(
            vec![
                Column::new("grade", ColumnType::Categorical(BTreeSet::new())),
                Column::new("default", ColumnType::Boolean),
                Column::new("amount", ColumnType::Float),
                Column::new("flat", ColumnType::Integer),
                Column::new("status", ColumnType::Integer),
            ],
            Some("status".into()),
        )
        .unwrap();
        let rows = ["C", "A", "G", "B", "F", "D", "E"]
            .iter()
            .enumerate()
            .map(|(i, g)| {
                vec![
                    Value::Text(g.to_string()),
                    Value::Bool(i % 2 == 0),
                    Value::Float(100.0 * (i + 1) as f64),
                    Value::Int(3),
                    Value::Int(if i < 3 { 10 } else { 2 }),
                ]
            })
            .collect();
        Dataset::from_rows(schema, rows).unwrap()
    }

    #[test]
    fn encoding_rules() {
        let ds = loans();
        let enc = Encoder::fit(&ds).unwrap();
        let m = enc.transform(&ds).unwrap();
        assert_eq!(m.feature_names, ["grade", "default", "amount", "flat"]);
        let grades: Vec<f64> = m.x.iter_rows().map(|r| r[0]).collect();
        assert_eq!(grades, [2.0, 0.0, 6.0, 1.0, 5.0, 3.0, 4.0]);
        let flags: Vec<f64> = m.x.iter_rows().map(|r| r[1]).collect();
        assert_eq!(flags, [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        assert_eq!(m.x.get(0, 2), 0.0);
        assert_eq!(m.x.get(6, 2), 1.0);
        assert!(m.x.iter_rows().all(|r| r[3] == 0.0));
        // Targets are coded numerically: 2 < 10.
        assert_eq!(m.y, [1, 1, 1, 0, 0, 0, 0]);
        assert_eq!(m.n_classes, 2);
        for g in ["A", "B", "C", "D", "E", "F", "G"] {
            let code = enc.category_code("grade", g).unwrap();
            assert_eq!(enc.decode_category("grade", code), Some(g));
        }
    }

    #[test]
    fn unseen_categories_are_reported() {
        let ds = loans();
        let train = ds.filter_rows(|i| i != 2);
        let enc = Encoder::fit(&train).unwrap();
        let m = enc.transform(&ds).unwrap();
        assert_eq!(m.x.get(2, 0), -1.0);
        assert_eq!(
            m.unseen,
            [UnseenCategory {
                row_id: 2,
                column: "grade".into(),
                value: "G".into()
            }]
        );
        // Train-side bounds: the held-out row still scales relative to them.
        assert!(m.x.iter_rows().all(|r| r[2] >= 0.0));
    }

    #[test]
    fn encode_rejects_missing_and_untargeted() {
        assert!(encode(&ages(&[Some(1), None])).is_err());
        let ds = loans().with_target(None).unwrap();
        assert!(encode(&ds).is_err());
    }

    fn balanced(pos: usize, neg: usize) -> Dataset {
        let schema = Schema::new(
            vec![Column::new("x", ColumnType::Integer), Column::new("y", ColumnType::Integer)],
            Some("y".into()),
        )
        .unwrap();
        let rows = (0..pos + neg)
            .map(|i| vec![Value::Int(i as i64), Value::Int(i64::from(i < pos))])
            .collect();
        Dataset::from_rows(schema, rows).unwrap()
    }

    #[test]
    fn split_78_22() {
        let ds = balanced(22, 78);
        let s = stratified_split(&ds, 0.8, 1).unwrap();
        assert_eq!((s.train.n_rows(), s.test.n_rows()), (80, 20));
        let pos = s.train.column_values(1).filter(|v| **v == Value::Int(1)).count();
        assert_eq!(pos, 18);
        let again = stratified_split(&ds, 0.8, 1).unwrap();
        assert_eq!(s, again);
        assert!(s.train.row_ids().windows(2).all(|w| w[0] < w[1]));
        assert_ne!(stratified_split(&ds, 0.8, 2).unwrap().train, s.train);
    }

    #[test]
    fn split_preconditions() {
        let ds = balanced(2, 5);
        assert!(stratified_split(&ds, 1.0, 0).is_err());
        assert!(stratified_split(&ds, 0.0, 0).is_err());
        let err = stratified_split(&balanced(1, 5), 0.8, 0).unwrap_err();
        assert!(err.to_string().contains("class '1'"));
    }
}
