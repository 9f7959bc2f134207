use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::metrics::mse;
use super::stats::{neumaier_sum, sem_errorbar};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::regressors::{Learner, Predictor};
use crate::seed::SeedSpec;

/// Shuffles `0..n` and cuts it into `k` folds whose sizes differ by at most
/// one; the first `n % k` folds take the extra element.
pub fn kfold_split(n: usize, k: usize, seed: &SeedSpec) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::invalid("k", "need at least 2 folds"));
    }
    if k > n {
        return Err(Error::TooFewSamples { needed: k, have: n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed.rng());
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub k: usize,
    pub fold_mses: Vec<f64>,
    pub mean_mse: f64,
    pub sem: f64,
    pub error_bar: f64,
}

impl CvResult {
    pub fn from_fold_mses(fold_mses: Vec<f64>) -> Result<Self> {
        let (sem, error_bar) = sem_errorbar(&fold_mses)?;
        Ok(Self {
            k: fold_mses.len(),
            mean_mse: neumaier_sum(&fold_mses) / fold_mses.len() as f64,
            fold_mses,
            sem,
            error_bar,
        })
    }
}

/// Where each fold's model is scored.
#[derive(Debug, Clone, Copy, Default)]
pub enum EvalTarget<'a> {
    /// The held-out fold of the same dataset.
    #[default]
    OwnFold,
    /// A fixed external dataset shared by every fold.
    Holdout(&'a Dataset),
}

pub type TrainTransform<'a> = &'a dyn Fn(&Dataset, &SeedSpec) -> Result<Dataset>;

pub struct CvOptions<'a> {
    pub k: usize,
    pub seed: SeedSpec,
    pub target: EvalTarget<'a>,
    /// Applied to each training split only, e.g. augmentation.
    pub train_transform: Option<TrainTransform<'a>>,
    /// Processing order of the folds; results are stored by fold index.
    pub fold_order: Option<&'a [usize]>,
}

impl<'a> CvOptions<'a> {
    pub fn new(k: usize, seed: SeedSpec) -> Self {
        Self {
            k,
            seed,
            target: EvalTarget::OwnFold,
            train_transform: None,
            fold_order: None,
        }
    }
}

pub fn cross_validate<L: Learner>(learner: &L, data: &Dataset, k: usize, seed: &SeedSpec) -> Result<CvResult> {
    cross_validate_with(learner, data, &CvOptions::new(k, seed.clone()))
}

/// Fold assignment comes from the `folds` substream and fold `i` trains with
/// the `fold:<i>` substream, so results do not depend on processing order.
pub fn cross_validate_with<L: Learner>(learner: &L, data: &Dataset, opts: &CvOptions<'_>) -> Result<CvResult> {
    let folds = kfold_split(data.len(), opts.k, &opts.seed.child("folds"))?;
    let default_order: Vec<usize> = (0..opts.k).collect();
    let order = opts.fold_order.unwrap_or(&default_order);
    let mut check = order.to_vec();
    check.sort_unstable();
    if check != default_order {
        return Err(Error::invalid("fold_order", "must be a permutation of the fold indices"));
    }

    let mut in_test = vec![false; data.len()];
    let mut fold_mses = vec![0.0; opts.k];
    for &f in order {
        in_test.iter_mut().for_each(|b| *b = false);
        for &i in &folds[f] {
            in_test[i] = true;
        }
        let train_idx: Vec<usize> = (0..data.len()).filter(|&i| !in_test[i]).collect();
        fold_mses[f] = run_fold(learner, data, &train_idx, &folds[f], f, opts)
            .map_err(|e| Error::Fold { fold: f, source: Box::new(e) })?;
    }
    CvResult::from_fold_mses(fold_mses)
}

fn run_fold<L: Learner>(
    learner: &L,
    data: &Dataset,
    train_idx: &[usize],
    test_idx: &[usize],
    fold: usize,
    opts: &CvOptions<'_>,
) -> Result<f64> {
    let fold_seed = opts.seed.child(format!("fold:{fold}"));
    let mut train = data.subset(train_idx);
    if let Some(transform) = opts.train_transform {
        train = transform(&train, &fold_seed.child("transform"))?;
    }
    let model = learner.fit(&train, &fold_seed)?;
    let test = match opts.target {
        EvalTarget::OwnFold => data.subset(test_idx),
        EvalTarget::Holdout(h) => h.clone(),
    };
    let yhat = model.predict_dataset(&test)?;
    mse(&test.targets(), &yhat)
}
