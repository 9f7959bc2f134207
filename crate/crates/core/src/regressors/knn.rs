use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{design, Predictor};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Uniform-weight k-nearest-neighbour regression under Euclidean distance.
///
/// Neighbours are ranked by `(squared distance, training index)`, which
/// makes the selection deterministic on ties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnRegressor {
    pub k: usize,
    pub dim: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl KnnRegressor {
    pub fn fit(data: &Dataset, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k", "must be at least 1"));
        }
        super::check_trainable(data)?;
        if k > data.len() {
            return Err(Error::TooFewSamples {
                needed: k,
                have: data.len(),
            });
        }
        let (x, y) = design(data);
        Ok(Self {
            k,
            dim: data.dim(),
            x,
            y,
        })
    }

    pub fn neighbours(&self, q: &[f64]) -> Vec<usize> {
        let mut ranked: Vec<(f64, usize)> = self
            .x
            .chunks_exact(self.dim)
            .enumerate()
            .map(|(i, row)| (row.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < ranked.len() {
            ranked.select_nth_unstable_by(self.k - 1, cmp);
            ranked.truncate(self.k);
        }
        ranked.sort_unstable_by(cmp);
        ranked.into_iter().map(|(_, i)| i).collect()
    }
}

impl Predictor for KnnRegressor {
    fn dim(&self) -> usize {
        self.dim
    }

    fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.neighbours(x).iter().map(|&i| self.y[i]).sum();
        sum / self.k as f64
    }
}
