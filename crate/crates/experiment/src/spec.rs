use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::{json, Value as Json};
use taintlab_core::error_model::{parse_model, ErrorKind, ErrorModel, Mode};
use taintlab_core::preprocess::BinningSpec;
use taintlab_core::tabular::{ColumnType, Dataset};
use taintlab_learners::ClassifierKind;

use crate::{ExperimentError, Result};

/// Experiment description, read from JSON.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub dataset: PathBuf,
    pub target: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub split: SplitSpec,
    /// Drop rows with missing cells before splitting.
    #[serde(default = "yes")]
    pub drop_missing: bool,
    #[serde(default)]
    pub binning: Vec<BinningEntry>,
    #[serde(default = "all_classifiers")]
    pub classifiers: Vec<String>,
    #[serde(default)]
    pub grid: Vec<GridEntry>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn yes() -> bool {
    true
}

fn all_classifiers() -> Vec<String> {
    ClassifierKind::ALL.iter().map(|k| k.as_str().to_string()).collect()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    /// Defaults to the master seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_ratio() -> f64 {
    0.8
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            ratio: default_ratio(),
            seed: None,
        }
    }
}

/// Either explicit cuts and labels, or quantiles of the clean training split.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinningEntry {
    pub feature: String,
    #[serde(default)]
    pub cuts: Option<Vec<f64>>,
    #[serde(default)]
    pub labels: Option<Vec<String>>,
    #[serde(default)]
    pub quantiles: Option<Vec<f64>>,
    /// Append the bin index under this name instead of replacing the column.
    #[serde(default)]
    pub output: Option<String>,
}

impl BinningEntry {
    pub fn resolve(&self, train: &Dataset) -> Result<BinningSpec> {
        let spec = match (&self.cuts, &self.quantiles) {
            (Some(cuts), None) => {
                let labels = self.labels.clone().unwrap_or_else(|| interval_labels(cuts));
                BinningSpec::new(&self.feature, cuts.clone(), labels)?
            }
            (None, Some(q)) => {
                let mut spec = BinningSpec::from_quantiles(train, &self.feature, q)?;
                if let Some(labels) = &self.labels {
                    spec.labels = labels.clone();
                    spec.validate()?;
                }
                spec
            }
            _ => {
                return Err(ExperimentError::Spec(format!(
                    "binning for '{}' needs exactly one of cuts or quantiles",
                    self.feature
                )))
            }
        };
        Ok(match &self.output {
            Some(name) => spec.appended_as(name),
            None => spec,
        })
    }
}

fn interval_labels(cuts: &[f64]) -> Vec<String> {
    let mut labels = Vec::with_capacity(cuts.len() + 1);
    labels.push(format!("<{}", cuts.first().copied().unwrap_or(0.0)));
    for w in cuts.windows(2) {
        labels.push(format!("[{},{})", w[0], w[1]));
    }
    if let Some(last) = cuts.last() {
        labels.push(format!(">={last}"));
    }
    labels
}

/// Which columns a grid entry corrupts.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum FeatureSelector {
    Named(Vec<String>),
    /// `"all"` (every non-target column) or `"numeric"` (integer and float columns).
    Group(String),
}

impl Default for FeatureSelector {
    fn default() -> Self {
        FeatureSelector::Named(Vec::new())
    }
}

/// One error-model template swept over features and rates.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridEntry {
    pub kind: String,
    #[serde(default)]
    pub features: FeatureSelector,
    /// One chain per feature. Defaults to true except for duplicates.
    #[serde(default)]
    pub per_feature: Option<bool>,
    /// Rates, applied in order.
    pub p: Vec<f64>,
    /// `new`: every rate is a fresh injection. `extended`: the first rate is
    /// fresh and each later one tops up its predecessor.
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default)]
    pub eta: Option<Json>,
    #[serde(default)]
    pub predicate: Option<Json>,
}

fn default_mode() -> String {
    "new".into()
}

/// Coordinates of one corrupted training set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub error: ErrorKind,
    /// Corrupted feature, `all` for multi-feature or row-level models.
    pub feature: String,
    /// Rate rendered in shortest form, e.g. `0.3`.
    pub p: String,
    pub mode: Mode,
}

impl CellKey {
    pub fn file_stem(&self) -> String {
        let feature: String = self
            .feature
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
            .collect();
        format!("{}__{}__p{}__{}", self.error, feature, self.p, self.mode.as_str())
    }
}

/// One step of a chain: the model to apply and whether it extends the
/// previous step's manifest.
#[derive(Debug, Clone)]
pub struct Cell {
    pub key: CellKey,
    pub model: ErrorModel,
}

/// Sequential steps over one (kind, feature) pair.
#[derive(Debug, Clone)]
pub struct Chain {
    pub cells: Vec<Cell>,
}

pub(crate) fn format_p(p: f64) -> String {
    format!("{p}")
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| ExperimentError::Spec(e.to_string()))?;
        spec.check()?;
        Ok(spec)
    }

    /// Reads a spec file; a relative dataset path is resolved against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        let mut spec = Self::from_json(&text).map_err(|e| match e {
            ExperimentError::Spec(m) => ExperimentError::Spec(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if spec.dataset.is_relative() {
            if let Some(dir) = path.parent() {
                spec.dataset = dir.join(&spec.dataset);
            }
        }
        Ok(spec)
    }

    fn check(&self) -> Result<()> {
        if !(self.split.ratio > 0.0 && self.split.ratio < 1.0) {
            return Err(ExperimentError::Spec(format!(
                "split.ratio must lie in (0, 1), got {}",
                self.split.ratio
            )));
        }
        self.classifier_kinds()?;
        for (i, g) in self.grid.iter().enumerate() {
            if g.p.is_empty() {
                return Err(ExperimentError::Spec(format!("grid[{i}].p is empty")));
            }
            let mode: Mode = g
                .mode
                .parse()
                .map_err(|e| ExperimentError::Spec(format!("grid[{i}].mode: {e}")))?;
            if mode == Mode::Extended && g.p.windows(2).any(|w| w[0] >= w[1]) {
                return Err(ExperimentError::Spec(format!(
                    "grid[{i}].p must be strictly ascending for an extended chain"
                )));
            }
            if let FeatureSelector::Group(name) = &g.features {
                if name != "all" && name != "numeric" {
                    return Err(ExperimentError::Spec(format!(
                        "grid[{i}].features: expected a list, \"all\" or \"numeric\", got \"{name}\""
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn classifier_kinds(&self) -> Result<Vec<ClassifierKind>> {
        self.classifiers
            .iter()
            .map(|c| c.parse().map_err(|e: taintlab_learners::LearnError| ExperimentError::Spec(e.to_string())))
            .collect()
    }

    pub fn split_seed(&self) -> u64 {
        self.split.seed.unwrap_or(self.seed)
    }

    /// Expands the grid into chains against the prepared training schema.
    pub fn chains(&self, train: &Dataset) -> Result<Vec<Chain>> {
        let schema = train.schema();
        let mut chains = Vec::new();
        for (i, g) in self.grid.iter().enumerate() {
            let root = format!("$.grid[{i}]");
            let kind: ErrorKind = g
                .kind
                .parse()
                .map_err(|e: String| ExperimentError::Spec(format!("{root}.kind: {e}")))?;
            let features: Vec<String> = match &g.features {
                FeatureSelector::Named(v) if v.is_empty() && kind == ErrorKind::Mislabel => vec![self.target.clone()],
                FeatureSelector::Named(v) => v.clone(),
                FeatureSelector::Group(group) => schema
                    .columns()
                    .iter()
                    .filter(|c| c.name != self.target)
                    .filter(|c| group == "all" || matches!(c.ty, ColumnType::Integer | ColumnType::Float))
                    .map(|c| c.name.clone())
                    .collect(),
            };
            let per_feature = g.per_feature.unwrap_or(kind != ErrorKind::Duplicate);
            let groups: Vec<Vec<String>> = if per_feature && !features.is_empty() {
                features.iter().map(|f| vec![f.clone()]).collect()
            } else {
                vec![features]
            };
            let mode: Mode = g.mode.parse().map_err(ExperimentError::Spec)?;
            for group in groups {
                let label = match group.as_slice() {
                    [one] => one.clone(),
                    _ => "all".to_string(),
                };
                let mut cells = Vec::new();
                for (step, &p) in g.p.iter().enumerate() {
                    let step_mode = if mode == Mode::Extended && step > 0 {
                        Mode::Extended
                    } else {
                        Mode::New
                    };
                    let key = CellKey {
                        error: kind,
                        feature: label.clone(),
                        p: format_p(p),
                        mode: step_mode,
                    };
                    let seed = taintlab_core::rng::derive_seed(
                        self.seed,
                        &["cell", kind.as_str(), &key.feature, &key.p, step_mode.as_str()],
                    );
                    let mut doc = json!({
                        "kind": kind.as_str(),
                        "features": group,
                        "p": p,
                        "mode": step_mode.as_str(),
                        "seed": seed,
                    });
                    if let Some(eta) = &g.eta {
                        doc["eta"] = eta.clone();
                    }
                    if let Some(pred) = &g.predicate {
                        doc["predicate"] = pred.clone();
                    }
                    let model = parse_model(&doc, &root)?;
                    cells.push(Cell { key, model });
                }
                chains.push(Chain { cells });
            }
        }
        Ok(chains)
    }
}
