use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use taintlab_core::preprocess::Matrix;

use crate::Hyperparameters;

fn class_means(x: &Matrix, y: &[usize], counts: &[usize]) -> Vec<DVector<f64>> {
    let d = x.cols();
    let mut means = vec![DVector::zeros(d); counts.len()];
    for (row, &c) in x.iter_rows().zip(y) {
        for (j, v) in row.iter().enumerate() {
            means[c][j] += v;
        }
    }
    for (m, &n) in means.iter_mut().zip(counts) {
        if n > 0 {
            *m /= n as f64;
        }
    }
    means
}

fn log_priors(counts: &[usize]) -> Vec<f64> {
    let n: usize = counts.iter().sum();
    counts.iter().map(|&c| (c as f64 / n as f64).ln()).collect()
}

/// Scatter matrix of the rows of class `class` (or all classes) around their means.
fn scatter(x: &Matrix, y: &[usize], means: &[DVector<f64>], class: Option<usize>) -> DMatrix<f64> {
    let d = x.cols();
    let mut s = DMatrix::zeros(d, d);
    let mut centred = DVector::zeros(d);
    for (row, &c) in x.iter_rows().zip(y) {
        if class.is_some_and(|k| k != c) {
            continue;
        }
        for j in 0..d {
            centred[j] = row[j] - means[c][j];
        }
        s.ger(1.0, &centred, &centred, 1.0);
    }
    s
}

/// Adds `ridge * trace / d` to the diagonal and factorises.
fn regularised_cholesky(mut cov: DMatrix<f64>, ridge: f64) -> Option<Cholesky<f64, Dyn>> {
    let d = cov.nrows();
    let lambda = ridge * cov.trace() / d as f64;
    for j in 0..d {
        cov[(j, j)] += lambda;
    }
    Cholesky::new(cov)
}

/// Linear discriminant analysis with a pooled covariance.
#[derive(Debug, Clone)]
pub(crate) struct Lda {
    /// Per class: Σ⁻¹μ, constant term -½μᵀΣ⁻¹μ + ln π.
    coef: Vec<Option<(DVector<f64>, f64)>>,
}

impl Lda {
    pub(crate) fn fit(x: &Matrix, y: &[usize], counts: &[usize], hyper: &Hyperparameters) -> Result<Self, String> {
        let means = class_means(x, y, counts);
        let cov = scatter(x, y, &means, None) / x.rows() as f64;
        let chol = regularised_cholesky(cov, hyper.ridge)
            .ok_or_else(|| "pooled covariance is singular even after ridge".to_string())?;
        let priors = log_priors(counts);
        let coef = means
            .iter()
            .zip(counts)
            .zip(priors)
            .map(|((mu, &n), prior)| {
                (n > 0).then(|| {
                    let w = chol.solve(mu);
                    let b = -0.5 * mu.dot(&w) + prior;
                    (w, b)
                })
            })
            .collect();
        Ok(Self { coef })
    }

    pub(crate) fn log_scores(&self, row: &[f64]) -> Vec<f64> {
        self.coef
            .iter()
            .map(|c| match c {
                Some((w, b)) => w.iter().zip(row).map(|(a, v)| a * v).sum::<f64>() + b,
                None => f64::NEG_INFINITY,
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
struct QdaClass {
    mean: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    /// -½ ln|Σ| + ln π.
    offset: f64,
}

/// Quadratic discriminant analysis with per-class covariances.
#[derive(Debug, Clone)]
pub(crate) struct Qda {
    classes: Vec<Option<QdaClass>>,
}

impl Qda {
    pub(crate) fn fit(x: &Matrix, y: &[usize], counts: &[usize], hyper: &Hyperparameters) -> Result<Self, String> {
        let means = class_means(x, y, counts);
        let priors = log_priors(counts);
        let mut classes = Vec::with_capacity(counts.len());
        for (c, &n) in counts.iter().enumerate() {
            if n == 0 {
                classes.push(None);
                continue;
            }
            let cov = scatter(x, y, &means, Some(c)) / n as f64;
            let chol = regularised_cholesky(cov, hyper.ridge)
                .ok_or_else(|| format!("covariance of class {c} is singular even after ridge"))?;
            let log_det: f64 = chol.l_dirty().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
            if !log_det.is_finite() {
                return Err(format!("covariance of class {c} is singular even after ridge"));
            }
            classes.push(Some(QdaClass {
                mean: means[c].clone(),
                offset: -0.5 * log_det + priors[c],
                chol,
            }));
        }
        Ok(Self { classes })
    }

    pub(crate) fn log_scores(&self, row: &[f64]) -> Vec<f64> {
        self.classes
            .iter()
            .map(|c| match c {
                Some(q) => {
                    let diff = DVector::from_iterator(row.len(), row.iter().zip(q.mean.iter()).map(|(a, b)| a - b));
                    let z = q
                        .chol
                        .l_dirty()
                        .solve_lower_triangular(&diff)
                        .expect("Cholesky factor has a positive diagonal");
                    q.offset - 0.5 * z.norm_squared()
                }
                None => f64::NEG_INFINITY,
            })
            .collect()
    }
}

/// Per class: means, variances and log prior.
type NbClass = (Vec<f64>, Vec<f64>, f64);

/// Gaussian naive Bayes with a variance floor.
#[derive(Debug, Clone)]
pub(crate) struct GaussianNb {
    classes: Vec<Option<NbClass>>,
}

impl GaussianNb {
    pub(crate) fn fit(x: &Matrix, y: &[usize], counts: &[usize], hyper: &Hyperparameters) -> Self {
        let d = x.cols();
        let means = class_means(x, y, counts);
        let mut vars = vec![vec![0.0; d]; counts.len()];
        for (row, &c) in x.iter_rows().zip(y) {
            for j in 0..d {
                let e = row[j] - means[c][j];
                vars[c][j] += e * e;
            }
        }
        let priors = log_priors(counts);
        let classes = counts
            .iter()
            .enumerate()
            .map(|(c, &n)| {
                (n > 0).then(|| {
                    let var = vars[c].iter().map(|v| (v / n as f64).max(hyper.var_floor)).collect();
                    (means[c].iter().copied().collect(), var, priors[c])
                })
            })
            .collect();
        Self { classes }
    }

    pub(crate) fn log_scores(&self, row: &[f64]) -> Vec<f64> {
        const LN_2PI: f64 = 1.837_877_066_409_345_5;
        self.classes
            .iter()
            .map(|c| match c {
                Some((mean, var, prior)) => {
                    prior
                        + row
                            .iter()
                            .zip(mean)
                            .zip(var)
                            .map(|((v, m), s)| -0.5 * (LN_2PI + s.ln() + (v - m) * (v - m) / s))
                            .sum::<f64>()
                }
                None => f64::NEG_INFINITY,
            })
            .collect()
    }
}
