//! Ordinary least-squares probe used by diagnostics.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::regressors::Predictor;

/// `y ~ intercept + coef . x`, fit by the normal equations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProbe {
    pub intercept: f64,
    pub coef: Vec<f64>,
}

impl LinearProbe {
    pub fn fit(data: &Dataset) -> Result<Self> {
        let m = data.dim();
        if data.len() < m + 1 {
            return Err(Error::TooFewSamples { needed: m + 1, have: data.len() });
        }
        let p = m + 1;
        let mut gram = vec![vec![0.0; p]; p];
        let mut rhs = vec![0.0; p];
        let mut row = vec![1.0; p];
        for s in data.samples() {
            row[1..].copy_from_slice(&s.features);
            for a in 0..p {
                rhs[a] += row[a] * s.target;
                for b in a..p {
                    gram[a][b] += row[a] * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                gram[a][b] = gram[b][a];
            }
        }
        let beta = solve(gram, rhs)?;
        Ok(Self { intercept: beta[0], coef: beta[1..].to_vec() })
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    pub fn predict_all(&self, data: &Dataset) -> Vec<f64> {
        data.samples().iter().map(|s| self.predict_row(&s.features)).collect()
    }

    pub fn mse(&self, data: &Dataset) -> f64 {
        let sse: f64 = data
            .samples()
            .iter()
            .map(|s| {
                let r = s.target - self.predict_row(&s.features);
                r * r
            })
            .sum();
        sse / data.len() as f64
    }
}

impl Predictor for LinearProbe {
    fn dim(&self) -> usize {
        self.coef.len()
    }

    fn predict_unchecked(&self, x: &[f64]) -> f64 {
        self.predict_row(x)
    }
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if a[pivot][col].abs() < 1e-12 {
            return Err(Error::invalid("features", "design matrix is singular"));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - tail) / a[r][r];
    }
    Ok(x)
}
