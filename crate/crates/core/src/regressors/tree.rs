use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{design, Predictor};
use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small to split.
    #[serde(default)]
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_split < 2 {
            return Err(Error::invalid("min_samples_split", "must be at least 2"));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::invalid("min_samples_leaf", "must be at least 1"));
        }
        Ok(())
    }
}

/// Samples with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum TreeNode {
    Leaf {
        value: f64,
        n: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaves() + right.leaves(),
        }
    }
}

/// CART regression tree with squared-error splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub dim: usize,
    pub root: TreeNode,
}

impl RegressionTree {
    pub fn fit(data: &Dataset, params: &TreeParams) -> Result<Self> {
        let rows: Vec<usize> = (0..data.len()).collect();
        Self::fit_rows(data, &rows, params)
    }

    /// Trains on `rows`, which may repeat indices (bootstrap draws).
    pub fn fit_rows(data: &Dataset, rows: &[usize], params: &TreeParams) -> Result<Self> {
        params.validate()?;
        super::check_trainable(data)?;
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let (x, y) = design(data);
        let dim = data.dim();
        let mut b = Builder {
            x: &x,
            y: &y,
            dim,
            rows,
            params,
            goes_left: vec![false; rows.len()],
        };
        // sorted[j] lists positions into `rows`, ordered by feature j then position.
        let sorted: Vec<Vec<usize>> = (0..dim)
            .map(|j| {
                let mut order: Vec<usize> = (0..rows.len()).collect();
                order.sort_by(|&a, &c| b.value(a, j).total_cmp(&b.value(c, j)).then(a.cmp(&c)));
                order
            })
            .collect();
        let all: Vec<usize> = (0..rows.len()).collect();
        let root = b.grow(&all, sorted, 0);
        Ok(Self { dim, root })
    }
}

impl Predictor for RegressionTree {
    fn dim(&self) -> usize {
        self.dim
    }

    fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { left } else { right },
            }
        }
    }
}

struct Builder<'a> {
    x: &'a [f64],
    y: &'a [f64],
    dim: usize,
    rows: &'a [usize],
    params: &'a TreeParams,
    goes_left: Vec<bool>,
}

struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn value(&self, pos: usize, j: usize) -> f64 {
        self.x[self.rows[pos] * self.dim + j]
    }

    fn target(&self, pos: usize) -> f64 {
        self.y[self.rows[pos]]
    }

    fn grow(&mut self, members: &[usize], sorted: Vec<Vec<usize>>, depth: usize) -> TreeNode {
        let n = members.len();
        let sum: f64 = members.iter().map(|&p| self.target(p)).sum();
        let value = sum / n as f64;
        let leaf = TreeNode::Leaf { value, n };

        let depth_capped = self.params.max_depth.is_some_and(|d| depth >= d);
        if depth_capped || n < self.params.min_samples_split || n < 2 * self.params.min_samples_leaf {
            return leaf;
        }
        let (sse, sum_sq) = members.iter().fold((0.0, 0.0), |(e, q), &p| {
            let t = self.target(p);
            (e + (t - value) * (t - value), q + t * t)
        });
        if sse <= 1e-24 * (1.0 + sum_sq) {
            return leaf;
        }

        let Some(best) = self.best_split(&sorted, value) else {
            return leaf;
        };
        if best.gain <= 1e-12 * sse {
            return leaf;
        }

        for &p in &sorted[best.feature] {
            self.goes_left[p] = self.value(p, best.feature) <= best.threshold;
        }
        let mut left_sorted = Vec::with_capacity(self.dim);
        let mut right_sorted = Vec::with_capacity(self.dim);
        for list in sorted {
            let (l, r): (Vec<usize>, Vec<usize>) = list.into_iter().partition(|&p| self.goes_left[p]);
            left_sorted.push(l);
            right_sorted.push(r);
        }
        let (left_members, right_members): (Vec<usize>, Vec<usize>) =
            members.iter().partition(|&&p| self.goes_left[p]);

        let left = self.grow(&left_members, left_sorted, depth + 1);
        let right = self.grow(&right_members, right_sorted, depth + 1);
        TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// Scans every feature in ascending order and keeps the first strictly
    /// better split, so ties resolve to the lowest feature then threshold.
    /// Targets are centred on the node mean to keep the gain well conditioned.
    fn best_split(&self, sorted: &[Vec<usize>], centre: f64) -> Option<Best> {
        let n = sorted[0].len();
        let total: f64 = sorted[0].iter().map(|&p| self.target(p) - centre).sum();
        let min_leaf = self.params.min_samples_leaf;
        let parent = total * total / n as f64;
        let mut best: Option<Best> = None;
        for (j, order) in sorted.iter().enumerate() {
            let mut left_sum = 0.0;
            for i in 0..n - 1 {
                left_sum += self.target(order[i]) - centre;
                let nl = i + 1;
                let nr = n - nl;
                if nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let (a, c) = (self.value(order[i], j), self.value(order[i + 1], j));
                if a == c {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / nl as f64 + right_sum * right_sum / nr as f64 - parent;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = a + (c - a) / 2.0;
                    if threshold >= c {
                        threshold = a;
                    }
                    best = Some(Best {
                        gain,
                        feature: j,
                        threshold,
                    });
                }
            }
        }
        best
    }
}
