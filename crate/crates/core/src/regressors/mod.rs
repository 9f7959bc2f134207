//! Four regressors behind one fit/predict contract.

mod forest;
mod knn;
mod scale;
mod svr;
mod tree;

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

pub use forest::{ForestParams, RandomForest};
pub use knn::KnnRegressor;
pub use scale::Standardizer;
pub use svr::{Gamma, SvrModel, SvrParams, SvrTrace};
pub use tree::{RegressionTree, TreeNode, TreeParams};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed::SeedSpec;

/// Anything that maps a feature vector to a prediction.
pub trait Predictor {
    fn dim(&self) -> usize;

    /// Caller guarantees `x.len() == self.dim()`.
    fn predict_unchecked(&self, x: &[f64]) -> f64;

    fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.predict_unchecked(x))
    }

    fn predict_dataset(&self, data: &Dataset) -> Result<Vec<f64>> {
        data.samples().iter().map(|s| self.predict(&s.features)).collect()
    }
}

/// Something that can be trained on a dataset with a given random stream.
pub trait Learner {
    type Model: Predictor;

    fn fit(&self, train: &Dataset, seed: &SeedSpec) -> Result<Self::Model>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dt,
    Rf,
    Knn,
    Svr,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Dt, ModelKind::Rf, ModelKind::Knn, ModelKind::Svr];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Dt => "dt",
            ModelKind::Rf => "rf",
            ModelKind::Knn => "knn",
            ModelKind::Svr => "svr",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Dt => "Decision Tree",
            ModelKind::Rf => "Random Forest",
            ModelKind::Knn => "KNN",
            ModelKind::Svr => "SVR",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dt" => Ok(ModelKind::Dt),
            "rf" => Ok(ModelKind::Rf),
            "knn" => Ok(ModelKind::Knn),
            "svr" => Ok(ModelKind::Svr),
            other => Err(Error::invalid("model_kind", alloc::format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Dt(TreeParams),
    Rf(ForestParams),
    Knn { k: usize },
    Svr(SvrParams),
}

impl ModelSpec {
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Dt => ModelSpec::Dt(TreeParams::default()),
            ModelKind::Rf => ModelSpec::Rf(ForestParams::default()),
            ModelKind::Knn => ModelSpec::Knn { k: 5 },
            ModelKind::Svr => ModelSpec::Svr(SvrParams::default()),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Dt(_) => ModelKind::Dt,
            ModelSpec::Rf(_) => ModelKind::Rf,
            ModelSpec::Knn { .. } => ModelKind::Knn,
            ModelSpec::Svr(_) => ModelKind::Svr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Dt(p) => p.validate(),
            ModelSpec::Rf(p) => p.validate(),
            ModelSpec::Knn { k } if *k == 0 => Err(Error::invalid("k", "must be at least 1")),
            ModelSpec::Knn { .. } => Ok(()),
            ModelSpec::Svr(p) => p.validate(),
        }
    }
}

/// Model choice plus options shared by all kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub model: ModelSpec,
    /// Standardize features before any model (SVR always standardizes).
    #[serde(default)]
    pub standardize: bool,
    pub seed: SeedSpec,
}

impl Hyperparams {
    pub fn new(model: ModelSpec, seed: SeedSpec) -> Self {
        Self {
            model,
            standardize: false,
            seed,
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.model.kind()
    }

    /// Trains with the configured seed.
    pub fn train(&self, data: &Dataset) -> Result<FittedModel> {
        self.fit(data, &self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_kind", rename_all = "lowercase")]
pub enum ModelState {
    Dt(RegressionTree),
    Rf(RandomForest),
    Knn(KnnRegressor),
    Svr(SvrModel),
}

/// A trained regressor. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub state: ModelState,
    pub input_scaler: Option<Standardizer>,
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        match self.state {
            ModelState::Dt(_) => ModelKind::Dt,
            ModelState::Rf(_) => ModelKind::Rf,
            ModelState::Knn(_) => ModelKind::Knn,
            ModelState::Svr(_) => ModelKind::Svr,
        }
    }

    /// Whether training stopped on its budget rather than its tolerance.
    pub fn convergence_warning(&self) -> bool {
        matches!(&self.state, ModelState::Svr(m) if !m.converged)
    }

    fn inner(&self) -> &dyn Predictor {
        match &self.state {
            ModelState::Dt(m) => m,
            ModelState::Rf(m) => m,
            ModelState::Knn(m) => m,
            ModelState::Svr(m) => m,
        }
    }
}

impl Predictor for FittedModel {
    fn dim(&self) -> usize {
        self.inner().dim()
    }

    fn predict_unchecked(&self, x: &[f64]) -> f64 {
        match &self.input_scaler {
            Some(s) => self.inner().predict_unchecked(&s.transform(x)),
            None => self.inner().predict_unchecked(x),
        }
    }
}

impl Learner for Hyperparams {
    type Model = FittedModel;

    fn fit(&self, train: &Dataset, seed: &SeedSpec) -> Result<FittedModel> {
        self.model.validate()?;
        check_trainable(train)?;
        let (input_scaler, scaled);
        let data = if self.standardize {
            let s = Standardizer::fit(train);
            scaled = s.transform_dataset(train)?;
            input_scaler = Some(s);
            &scaled
        } else {
            input_scaler = None;
            train
        };
        let state = match &self.model {
            ModelSpec::Dt(p) => ModelState::Dt(RegressionTree::fit(data, p)?),
            ModelSpec::Rf(p) => ModelState::Rf(RandomForest::fit(data, p, seed)?),
            ModelSpec::Knn { k } => ModelState::Knn(KnnRegressor::fit(data, *k)?),
            ModelSpec::Svr(p) => ModelState::Svr(SvrModel::fit(data, p)?),
        };
        Ok(FittedModel { state, input_scaler })
    }
}

pub(crate) fn check_trainable(data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.dim() == 0 {
        return Err(Error::invalid("features", "at least one feature column is required"));
    }
    Ok(())
}

/// Row-major copy of the features plus targets.
pub(crate) fn design(data: &Dataset) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(data.len() * data.dim());
    for s in data.samples() {
        x.extend_from_slice(&s.features);
    }
    (x, data.targets())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Sample;
    use alloc::vec;

    fn line(n: usize) -> Dataset {
        let samples = (0..n)
            .map(|i| Sample::new(vec![i as f64, (i * 3 % 5) as f64], 2.0 * i as f64 + 1.0, None))
            .collect();
        Dataset::new(vec!["a".into(), "b".into()], "y", samples).unwrap()
    }

    #[test]
    fn every_kind_trains_and_predicts_finite() {
        let d = line(30);
        for kind in ModelKind::ALL {
            let hp = Hyperparams::new(ModelSpec::default_for(kind), SeedSpec::new(1, "model"));
            let m = hp.train(&d).unwrap();
            assert_eq!(m.kind(), kind);
            for s in d.samples() {
                assert!(m.predict(&s.features).unwrap().is_finite());
            }
            assert_eq!(m.predict(&[1.0]), Err(Error::DimensionMismatch { expected: 2, got: 1 }));
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let d = line(40);
        for kind in ModelKind::ALL {
            let hp = Hyperparams::new(ModelSpec::default_for(kind), SeedSpec::new(9, "model"));
            assert_eq!(hp.train(&d).unwrap(), hp.train(&d).unwrap());
        }
    }

    #[test]
    fn empty_training_set_is_rejected() {
        let d = line(0);
        for kind in ModelKind::ALL {
            let hp = Hyperparams::new(ModelSpec::default_for(kind), SeedSpec::new(1, "model"));
            assert_eq!(hp.train(&d), Err(Error::EmptyDataset));
        }
    }

    #[test]
    fn standardize_all_wraps_inputs() {
        let d = line(25);
        let mut hp = Hyperparams::new(ModelSpec::Knn { k: 1 }, SeedSpec::new(1, "model"));
        hp.standardize = true;
        let m = hp.train(&d).unwrap();
        assert!(m.input_scaler.is_some());
        assert_eq!(m.predict(&d.samples()[7].features).unwrap(), d.samples()[7].target);
    }

    #[test]
    fn kind_round_trips_through_str() {
        for kind in ModelKind::ALL {
            assert_eq!(kind.as_str().parse::<ModelKind>().unwrap(), kind);
        }
        assert!("nn".parse::<ModelKind>().is_err());
    }
}
