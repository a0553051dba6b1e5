use taintlab_core::preprocess::Matrix;

use crate::Hyperparameters;

#[derive(Debug, Clone)]
enum Node {
    Leaf(Vec<f64>),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// CART classification tree grown on Gini impurity.
#[derive(Debug, Clone)]
pub(crate) struct Tree {
    nodes: Vec<Node>,
    depth: usize,
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    k: usize,
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
    depth: usize,
}

fn gini(counts: impl Iterator<Item = usize>, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.map(|c| (c as f64 / n).powi(2)).sum::<f64>()
}

impl Tree {
    pub(crate) fn fit(x: &Matrix, y: &[usize], k: usize, hyper: &Hyperparameters) -> Self {
        let mut b = Builder {
            x,
            y,
            k,
            max_depth: hyper.max_depth,
            min_leaf: hyper.min_leaf.max(1),
            nodes: Vec::new(),
            depth: 0,
        };
        let all: Vec<usize> = (0..x.rows()).collect();
        b.grow(all, 0);
        Self {
            nodes: b.nodes,
            depth: b.depth,
        }
    }

    pub(crate) fn depth(&self) -> usize {
        self.depth
    }

    /// Class frequencies at the leaf reached by `row`.
    pub(crate) fn distribution(&self, row: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(dist) => return dist,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

impl Builder<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        self.depth = self.depth.max(depth);
        let mut counts = vec![0usize; self.k];
        for &r in &rows {
            counts[self.y[r]] += 1;
        }
        let id = self.nodes.len();
        let n = rows.len();
        let dist: Vec<f64> = counts.iter().map(|&c| c as f64 / n.max(1) as f64).collect();
        self.nodes.push(Node::Leaf(dist));
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.max_depth || n < 2 * self.min_leaf {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&rows, &counts) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| self.x.get(i, feature) <= threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// Lowest weighted Gini over every feature and midpoint threshold; ties go
    /// to the lower feature index, then the lower threshold.
    fn best_split(&self, rows: &[usize], counts: &[usize]) -> Option<(usize, f64)> {
        let n = rows.len();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = rows.to_vec();
        for j in 0..self.x.cols() {
            order.sort_by(|&a, &b| self.x.get(a, j).total_cmp(&self.x.get(b, j)).then(a.cmp(&b)));
            let mut left = vec![0usize; self.k];
            for pos in 0..n - 1 {
                left[self.y[order[pos]]] += 1;
                let nl = pos + 1;
                let nr = n - nl;
                let lo = self.x.get(order[pos], j);
                let hi = self.x.get(order[pos + 1], j);
                if lo == hi || nl < self.min_leaf || nr < self.min_leaf {
                    continue;
                }
                let right = counts.iter().zip(&left).map(|(t, l)| t - l);
                let score = (nl as f64 * gini(left.iter().copied(), nl) + nr as f64 * gini(right, nr)) / n as f64;
                if best.is_none_or(|(s, _, _)| score < s) {
                    let mut t = lo + (hi - lo) / 2.0;
                    if t >= hi {
                        t = lo;
                    }
                    best = Some((score, j, t));
                }
            }
        }
        best.map(|(_, j, t)| (j, t))
    }
}
