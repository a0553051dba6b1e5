use taintlab_core::preprocess::Matrix;

use crate::Hyperparameters;

/// Multinomial logistic regression trained by full-batch gradient descent.
#[derive(Debug, Clone)]
pub(crate) struct LogReg {
    /// Row-major `k x (d + 1)`; the last entry of each row is the bias.
    params: Vec<f64>,
    d: usize,
}

impl LogReg {
    pub(crate) fn fit(x: &Matrix, y: &[usize], k: usize, hyper: &Hyperparameters) -> Self {
        let mut params = vec![0.0; k * (x.cols() + 1)];
        for _ in 0..hyper.max_epochs {
            let (_, grad) = loss_and_gradient(&params, x, y, k, hyper.l2);
            if grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) < hyper.tolerance {
                break;
            }
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= hyper.step * g;
            }
        }
        Self { params, d: x.cols() }
    }

    pub(crate) fn logits(&self, row: &[f64]) -> Vec<f64> {
        logits(&self.params, self.d, row)
    }
}

fn logits(params: &[f64], d: usize, row: &[f64]) -> Vec<f64> {
    params
        .chunks_exact(d + 1)
        .map(|w| w[..d].iter().zip(row).map(|(a, b)| a * b).sum::<f64>() + w[d])
        .collect()
}

/// Mean negative log-likelihood of the softmax model plus `l2 / 2 * |W|²`
/// (biases unpenalised), and its gradient in the same `k x (d + 1)` layout as
/// `params`.
pub fn loss_and_gradient(params: &[f64], x: &Matrix, y: &[usize], k: usize, l2: f64) -> (f64, Vec<f64>) {
    let d = x.cols();
    assert_eq!(params.len(), k * (d + 1), "parameter vector has the wrong length");
    let n = x.rows().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; params.len()];
    let mut z = vec![0.0; k];
    for (row, &label) in x.iter_rows().zip(y) {
        for (zc, w) in z.iter_mut().zip(params.chunks_exact(d + 1)) {
            *zc = w[..d].iter().zip(row).map(|(a, b)| a * b).sum::<f64>() + w[d];
        }
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = z.iter().map(|v| (v - m).exp()).sum();
        loss -= z[label] - (m + sum.ln());
        for (c, zc) in z.iter().enumerate() {
            let err = (zc - m).exp() / sum - f64::from(u8::from(c == label));
            let g = &mut grad[c * (d + 1)..(c + 1) * (d + 1)];
            for (gj, xj) in g[..d].iter_mut().zip(row) {
                *gj += err * xj;
            }
            g[d] += err;
        }
    }
    loss /= n;
    for g in &mut grad {
        *g /= n;
    }
    for c in 0..k {
        for j in 0..d {
            let i = c * (d + 1) + j;
            loss += 0.5 * l2 * params[i] * params[i];
            grad[i] += l2 * params[i];
        }
    }
    (loss, grad)
}
