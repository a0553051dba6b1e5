use rayon::prelude::*;
use taintlab_core::preprocess::Matrix;

use crate::Hyperparameters;

/// k-nearest neighbours under Euclidean distance.
#[derive(Debug, Clone)]
pub(crate) struct Knn {
    x: Matrix,
    y: Vec<usize>,
    n_classes: usize,
    k: usize,
}

impl Knn {
    pub(crate) fn fit(x: &Matrix, y: &[usize], n_classes: usize, hyper: &Hyperparameters) -> Self {
        Self {
            x: x.clone(),
            y: y.to_vec(),
            n_classes,
            k: hyper.k.clamp(1, x.rows()),
        }
    }

    /// Vote shares of the k nearest training rows; equal distances favour the
    /// lower training index.
    pub(crate) fn votes(&self, queries: &Matrix) -> Vec<Vec<f64>> {
        let rows: Vec<&[f64]> = queries.iter_rows().collect();
        rows.par_iter()
            .map_init(Vec::new, |dist: &mut Vec<(f64, usize)>, q| {
                dist.clear();
                dist.extend(self.x.iter_rows().enumerate().map(|(i, t)| {
                    let d2: f64 = t.iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                    (d2, i)
                }));
                let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                if self.k < dist.len() {
                    dist.select_nth_unstable_by(self.k - 1, cmp);
                }
                let mut share = vec![0.0; self.n_classes];
                for &(_, i) in &dist[..self.k] {
                    share[self.y[i]] += 1.0 / self.k as f64;
                }
                share
            })
            .collect()
    }
}
