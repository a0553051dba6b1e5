//! Six classifiers behind one fit/predict contract, plus binary metrics.
//!
//! Every learner is deterministic: the same encoded training data always
//! yields the same fitted model and predictions.

use std::fmt;
use std::str::FromStr;

use taintlab_core::preprocess::{EncodedMatrix, Matrix};

mod discriminant;
mod knn;
mod logreg;
pub mod metrics;
mod tree;

pub use logreg::loss_and_gradient;
pub use metrics::{confusion, metrics, ConfusionMatrix, Metrics};

pub type Result<T, E = LearnError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum LearnError {
    #[error("cannot fit {kind}: {message}")]
    Fit { kind: ClassifierKind, message: String },

    #[error("expected {expected} features, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("length mismatch: {0} true labels vs {1} predictions")]
    Length(usize, usize),

    #[error("label {0} is not binary")]
    Label(usize),

    #[error("unknown classifier '{0}'")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassifierKind {
    Lda,
    Qda,
    LogReg,
    GaussianNb,
    DecisionTree,
    Knn,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 6] = [
        ClassifierKind::Lda,
        ClassifierKind::Qda,
        ClassifierKind::LogReg,
        ClassifierKind::GaussianNb,
        ClassifierKind::DecisionTree,
        ClassifierKind::Knn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::Lda => "lda",
            ClassifierKind::Qda => "qda",
            ClassifierKind::LogReg => "logreg",
            ClassifierKind::GaussianNb => "gaussian_nb",
            ClassifierKind::DecisionTree => "decision_tree",
            ClassifierKind::Knn => "knn",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierKind {
    type Err = LearnError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| LearnError::UnknownKind(s.to_string()))
    }
}

/// Fixed training constants for every family.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparameters {
    /// Covariance ridge as a fraction of `trace / d`.
    pub ridge: f64,
    pub var_floor: f64,
    pub l2: f64,
    pub step: f64,
    pub max_epochs: usize,
    /// Gradient infinity-norm below which descent stops.
    pub tolerance: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub k: usize,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            ridge: 1e-6,
            var_floor: 1e-9,
            l2: 1e-4,
            step: 0.1,
            max_epochs: 1000,
            tolerance: 1e-6,
            max_depth: 12,
            min_leaf: 5,
            k: 5,
        }
    }
}

impl fmt::Display for Hyperparameters {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "lda/qda ridge {:e}*trace/d; gaussian_nb variance floor {:e}; \
             logreg l2 {:e}, step {}, max {} epochs, tolerance {:e}; \
             decision_tree gini, max depth {}, min leaf {}; knn k={}",
            self.ridge,
            self.var_floor,
            self.l2,
            self.step,
            self.max_epochs,
            self.tolerance,
            self.max_depth,
            self.min_leaf,
            self.k
        )
    }
}

#[derive(Debug, Clone)]
enum Model {
    Lda(discriminant::Lda),
    Qda(discriminant::Qda),
    GaussianNb(discriminant::GaussianNb),
    LogReg(logreg::LogReg),
    Tree(tree::Tree),
    Knn(knn::Knn),
}

/// A fitted model. Immutable and shareable across threads.
#[derive(Debug, Clone)]
pub struct Classifier {
    kind: ClassifierKind,
    n_features: usize,
    n_classes: usize,
    model: Model,
}

pub fn fit(kind: ClassifierKind, data: &EncodedMatrix) -> Result<Classifier> {
    fit_with(kind, data, &Hyperparameters::default())
}

pub fn fit_with(kind: ClassifierKind, data: &EncodedMatrix, hyper: &Hyperparameters) -> Result<Classifier> {
    let fail = |message: String| LearnError::Fit { kind, message };
    let x = &data.x;
    let d = x.cols();
    if d == 0 {
        return Err(fail("no features".into()));
    }
    if x.rows() != data.y.len() {
        return Err(fail(format!("{} rows but {} labels", x.rows(), data.y.len())));
    }
    let k = data.n_classes.max(data.y.iter().max().map_or(0, |m| m + 1));
    let mut counts = vec![0usize; k];
    for &c in &data.y {
        counts[c] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(fail("training data must contain at least two classes".into()));
    }
    if let Some(bad) = x.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(fail(format!("non-finite feature value at row {}", bad / d)));
    }
    let model = match kind {
        ClassifierKind::Lda => Model::Lda(discriminant::Lda::fit(x, &data.y, &counts, hyper).map_err(fail)?),
        ClassifierKind::Qda => Model::Qda(discriminant::Qda::fit(x, &data.y, &counts, hyper).map_err(fail)?),
        ClassifierKind::GaussianNb => Model::GaussianNb(discriminant::GaussianNb::fit(x, &data.y, &counts, hyper)),
        ClassifierKind::LogReg => Model::LogReg(logreg::LogReg::fit(x, &data.y, k, hyper)),
        ClassifierKind::DecisionTree => Model::Tree(tree::Tree::fit(x, &data.y, k, hyper)),
        ClassifierKind::Knn => Model::Knn(knn::Knn::fit(x, &data.y, k, hyper)),
    };
    Ok(Classifier {
        kind,
        n_features: d,
        n_classes: k,
        model,
    })
}

impl Classifier {
    pub fn kind(&self) -> ClassifierKind {
        self.kind
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Tree depth for decision trees, `None` otherwise.
    pub fn depth(&self) -> Option<usize> {
        match &self.model {
            Model::Tree(t) => Some(t.depth()),
            _ => None,
        }
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        if x.rows() > 0 && x.cols() != self.n_features {
            return Err(LearnError::Dimension {
                expected: self.n_features,
                found: x.cols(),
            });
        }
        Ok(())
    }

    /// One score per class; the predicted class is the first maximum.
    fn scores(&self, row: &[f64]) -> Vec<f64> {
        match &self.model {
            Model::Lda(m) => m.log_scores(row),
            Model::Qda(m) => m.log_scores(row),
            Model::GaussianNb(m) => m.log_scores(row),
            Model::LogReg(m) => m.logits(row),
            Model::Tree(m) => m.distribution(row).to_vec(),
            Model::Knn(_) => unreachable!("knn predicts in batches"),
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        self.check(x)?;
        if let Model::Knn(m) = &self.model {
            return Ok(m.votes(x).iter().map(|v| argmax(v)).collect());
        }
        Ok(x.iter_rows().map(|row| argmax(&self.scores(row))).collect())
    }

    /// Class membership probabilities, one row per input row.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<Vec<f64>>> {
        self.check(x)?;
        if let Model::Knn(m) = &self.model {
            return Ok(m.votes(x));
        }
        Ok(x.iter_rows()
            .map(|row| {
                let s = self.scores(row);
                match self.model {
                    Model::Tree(_) => s,
                    _ => softmax(&s),
                }
            })
            .collect())
    }
}

/// Index of the first maximum.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}
