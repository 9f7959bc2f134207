//! Comparison techniques: per-region SMOTE oversampling and inverse-frequency
//! reweighting realized as weighted bootstrap resampling. Both read the
//! region tag explicitly.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Region, Sample};
use crate::error::{Error, Result};
use crate::seed::SeedSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    pub seed: SeedSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReweightConfig {
    pub seed: SeedSpec,
}

/// Where a synthetic row came from: `x = base + lambda (neighbor - base)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticOrigin {
    /// Position of the synthetic row in the shuffled output.
    pub output_index: usize,
    pub region: usize,
    pub base: usize,
    pub neighbor: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoteOutcome {
    pub dataset: Dataset,
    pub synthetic: Vec<SyntheticOrigin>,
}

fn region_tag(d: &Dataset, r: usize) -> Region {
    d.regions()
        .into_iter()
        .next()
        .unwrap_or_else(|| Region::new(alloc::format!("input{r}")))
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// The `k` rows of `d` nearest to row `i`, excluding `i`, ordered by
/// `(distance, index)`.
pub fn nearest_in_region(d: &Dataset, i: usize, k: usize) -> Vec<usize> {
    let q = &d.samples()[i].features;
    let mut cand: Vec<(f64, usize)> = d
        .samples()
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, s)| (squared_distance(q, &s.features), j))
        .collect();
    let by_key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, by_key);
        cand.truncate(k);
    }
    cand.sort_unstable_by(by_key);
    cand.into_iter().map(|(_, j)| j).collect()
}

pub fn interpolate(base: &Sample, neighbor: &Sample, lambda: f64) -> Sample {
    let features = base
        .features
        .iter()
        .zip(&neighbor.features)
        .map(|(x, n)| x + lambda * (n - x))
        .collect();
    Sample::new(
        features,
        base.target + lambda * (neighbor.target - base.target),
        base.region.clone(),
    )
}

pub fn smote_balance(regions: &[Dataset], config: &SmoteConfig) -> Result<SmoteOutcome> {
    let k = config.k_neighbors;
    if k == 0 {
        return Err(Error::invalid("k_neighbors", "must be at least 1"));
    }
    let first = regions.first().ok_or(Error::TooFewRegions { needed: 1, have: 0 })?;
    for d in regions {
        first.same_schema(d)?;
        if d.len() <= k {
            return Err(Error::TooFewSamples { needed: k + 1, have: d.len() });
        }
    }
    let target = regions.iter().map(Dataset::len).max().unwrap_or(0);

    let mut rows: Vec<Sample> = regions.iter().flat_map(|d| d.samples().iter().cloned()).collect();
    let mut origins: Vec<Option<SyntheticOrigin>> = alloc::vec![None; rows.len()];
    for (r, d) in regions.iter().enumerate() {
        let mut rng = config.seed.child(alloc::format!("region:{}", region_tag(d, r))).rng();
        let mut cache: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for _ in d.len()..target {
            let base = rng.random_range(0..d.len());
            let nbrs = cache.entry(base).or_insert_with(|| nearest_in_region(d, base, k));
            let neighbor = nbrs[rng.random_range(0..nbrs.len())];
            let lambda: f64 = rng.random();
            rows.push(interpolate(&d.samples()[base], &d.samples()[neighbor], lambda));
            origins.push(Some(SyntheticOrigin {
                output_index: 0,
                region: r,
                base,
                neighbor,
                lambda,
            }));
        }
    }

    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(&mut config.seed.child("shuffle").rng());
    let mut samples = Vec::with_capacity(rows.len());
    let mut synthetic = Vec::new();
    for (pos, &src) in order.iter().enumerate() {
        samples.push(rows[src].clone());
        if let Some(o) = &origins[src] {
            synthetic.push(SyntheticOrigin { output_index: pos, ..o.clone() });
        }
    }
    Ok(SmoteOutcome {
        dataset: first.with_samples(samples)?,
        synthetic,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReweightOutcome {
    pub dataset: Dataset,
    /// `w_r = N / (R n_r)` per input region.
    pub weights: Vec<(Region, f64)>,
}

pub fn inverse_frequency_weights(sizes: &[usize]) -> Vec<f64> {
    let total: usize = sizes.iter().sum();
    let r = sizes.len() as f64;
    sizes.iter().map(|&n| total as f64 / (r * n as f64)).collect()
}

pub fn reweight_resample(regions: &[Dataset], config: &ReweightConfig) -> Result<ReweightOutcome> {
    if regions.len() < 2 {
        return Err(Error::TooFewRegions { needed: 2, have: regions.len() });
    }
    let first = &regions[0];
    for (r, d) in regions.iter().enumerate() {
        first.same_schema(d)?;
        if d.is_empty() {
            return Err(Error::EmptyRegion(region_tag(d, r)));
        }
    }
    let sizes: Vec<usize> = regions.iter().map(Dataset::len).collect();
    let weights = inverse_frequency_weights(&sizes);
    let pool: Vec<&Sample> = regions.iter().flat_map(|d| d.samples()).collect();
    let per_sample: Vec<f64> = sizes
        .iter()
        .zip(&weights)
        .flat_map(|(&n, &w)| core::iter::repeat_n(w, n))
        .collect();
    let dist = WeightedIndex::new(&per_sample).map_err(|e| Error::invalid("weights", alloc::format!("{e}")))?;
    let mut rng = config.seed.rng();
    let samples = (0..pool.len()).map(|_| pool[dist.sample(&mut rng)].clone()).collect();
    Ok(ReweightOutcome {
        dataset: first.with_samples(samples)?,
        weights: regions
            .iter()
            .enumerate()
            .map(|(r, d)| region_tag(d, r))
            .zip(weights)
            .collect(),
    })
}
