use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Predictor, RegressionTree, TreeParams};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed::SeedSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub tree: TreeParams,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            bootstrap: true,
            tree: TreeParams::default(),
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::invalid("n_trees", "must be at least 1"));
        }
        self.tree.validate()
    }
}

/// Bagged trees; the prediction is the arithmetic mean over trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<RegressionTree>,
}

impl RandomForest {
    /// Tree `t` draws its bootstrap sample from the substream `tree:<t>`.
    pub fn fit(data: &Dataset, params: &ForestParams, seed: &SeedSpec) -> Result<Self> {
        params.validate()?;
        super::check_trainable(data)?;
        let n = data.len();
        let identity: Vec<usize> = (0..n).collect();
        let trees = (0..params.n_trees)
            .map(|t| {
                if params.bootstrap {
                    let mut rng = seed.child(alloc::format!("tree:{t}")).rng();
                    let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                    RegressionTree::fit_rows(data, &rows, &params.tree)
                } else {
                    RegressionTree::fit_rows(data, &identity, &params.tree)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { trees })
    }

    pub fn from_trees(trees: Vec<RegressionTree>) -> Result<Self> {
        match trees.first() {
            None => Err(Error::invalid("trees", "forest needs at least one tree")),
            Some(first) if trees.iter().any(|t| t.dim != first.dim) => Err(Error::DimensionMismatch {
                expected: first.dim,
                got: trees.iter().find(|t| t.dim != first.dim).map_or(0, |t| t.dim),
            }),
            Some(_) => Ok(Self { trees }),
        }
    }
}

impl Predictor for RandomForest {
    fn dim(&self) -> usize {
        self.trees[0].dim
    }

    fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_unchecked(x)).sum();
        sum / self.trees.len() as f64
    }
}
