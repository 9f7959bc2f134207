//! Dataset model shared by every stage.
//!
//! A [`Dataset`] is an ordered list of [`Sample`]s with a fixed feature
//! schema. Region tags are metadata carried next to the features; no stage
//! reads a tag as a model input.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::SeedSpec;

/// Region identifier attached to a sample.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Region(String);

impl Region {
    pub fn new(tag: impl Into<String>) -> Self {
        Region(tag.into())
    }

    /// Tag written on convex-blend output rows.
    pub fn mixed() -> Self {
        Region::new("mixed")
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Region {
    fn from(s: &str) -> Self {
        Region::new(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub target: f64,
    pub region: Option<Region>,
}

impl Sample {
    pub fn new(features: Vec<f64>, target: f64, region: Option<Region>) -> Self {
        Self {
            features,
            target,
            region,
        }
    }

    pub fn tagged(features: Vec<f64>, target: f64, region: impl Into<Region>) -> Self {
        Self::new(features, target, Some(region.into()))
    }
}

/// Feature matrix with aligned targets and per-sample region tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    feature_names: Vec<String>,
    target_name: String,
    samples: Vec<Sample>,
}

impl Dataset {
    /// Validates dimensions and finiteness. An empty sample list is allowed;
    /// training and evaluation reject it later.
    pub fn new(
        feature_names: Vec<String>,
        target_name: impl Into<String>,
        samples: Vec<Sample>,
    ) -> Result<Self> {
        let m = feature_names.len();
        for (row, s) in samples.iter().enumerate() {
            if s.features.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: s.features.len(),
                });
            }
            if !s.target.is_finite() || s.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row });
            }
        }
        Ok(Self {
            feature_names,
            target_name: target_name.into(),
            samples,
        })
    }

    /// Dataset with the same schema as `self` and the given samples.
    pub fn with_samples(&self, samples: Vec<Sample>) -> Result<Self> {
        Self::new(self.feature_names.clone(), self.target_name.clone(), samples)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    /// Exact set of region tags present.
    pub fn regions(&self) -> BTreeSet<Region> {
        self.samples.iter().filter_map(|s| s.region.clone()).collect()
    }

    pub fn is_tagged(&self) -> bool {
        !self.samples.is_empty() && self.samples.iter().all(|s| s.region.is_some())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.features[j]).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.target).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    /// Same samples, region tags replaced one-for-one.
    pub fn with_regions(&self, tags: Vec<Region>) -> Result<Dataset> {
        if tags.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: tags.len(),
            });
        }
        let samples = self
            .samples
            .iter()
            .zip(tags)
            .map(|(s, r)| Sample::new(s.features.clone(), s.target, Some(r)))
            .collect();
        self.with_samples(samples)
    }

    pub fn same_schema(&self, other: &Dataset) -> Result<()> {
        if self.feature_names != other.feature_names {
            return Err(Error::FeatureMismatch(alloc::format!(
                "{:?} vs {:?}",
                self.feature_names,
                other.feature_names
            )));
        }
        Ok(())
    }

    /// Splits by region tag; untagged samples are an error.
    pub fn by_region(&self) -> Result<BTreeMap<Region, Dataset>> {
        let mut groups: BTreeMap<Region, Vec<Sample>> = BTreeMap::new();
        for s in &self.samples {
            let r = s.region.clone().ok_or(Error::Untagged)?;
            groups.entry(r).or_default().push(s.clone());
        }
        groups
            .into_iter()
            .map(|(r, samples)| Ok((r, self.with_samples(samples)?)))
            .collect()
    }

    /// Concatenates datasets sharing one schema, preserving order.
    pub fn concat(parts: &[Dataset]) -> Result<Dataset> {
        let first = parts.first().ok_or(Error::EmptyDataset)?;
        let mut samples = Vec::with_capacity(parts.iter().map(Dataset::len).sum());
        for p in parts {
            first.same_schema(p)?;
            samples.extend_from_slice(&p.samples);
        }
        first.with_samples(samples)
    }
}

/// Shuffles `0..n` and cuts off `round(n * test_fraction)` test indices.
pub fn holdout_indices(n: usize, test_fraction: f64, seed: &SeedSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid("test_fraction", "must lie in (0, 1)"));
    }
    let n_test = libm::round(n as f64 * test_fraction) as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::invalid(
            "test_fraction",
            alloc::format!("{test_fraction} of {n} samples leaves one side empty"),
        ));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed.rng());
    let test = idx.split_off(n - n_test);
    Ok((idx, test))
}

pub fn split_holdout(dataset: &Dataset, test_fraction: f64, seed: &SeedSpec) -> Result<(Dataset, Dataset)> {
    let (train, test) = holdout_indices(dataset.len(), test_fraction, seed)?;
    Ok((dataset.subset(&train), dataset.subset(&test)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub name: String,
    pub mean: f64,
    /// Sample variance (n - 1); absent when n < 2.
    pub variance: Option<f64>,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub features: Vec<FeatureStats>,
    pub region_counts: BTreeMap<Region, usize>,
    pub untagged: usize,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Two-pass sample variance with the n - 1 denominator.
pub fn sample_variance(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let mu = mean(xs);
    Some(xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (xs.len() - 1) as f64)
}

pub fn summary_stats(dataset: &Dataset) -> Result<Summary> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let features = (0..dataset.dim())
        .map(|j| {
            let col = dataset.column(j);
            FeatureStats {
                name: dataset.feature_names()[j].to_string(),
                mean: mean(&col),
                variance: sample_variance(&col),
                min: col.iter().copied().fold(f64::INFINITY, f64::min),
                max: col.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();
    let mut region_counts = BTreeMap::new();
    let mut untagged = 0;
    for s in dataset.samples() {
        match &s.region {
            Some(r) => *region_counts.entry(r.clone()).or_insert(0) += 1,
            None => untagged += 1,
        }
    }
    Ok(Summary {
        n: dataset.len(),
        features,
        region_counts,
        untagged,
    })
}
