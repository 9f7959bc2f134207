//! Building the mixed dataset from per-region datasets.
//!
//! Two readings are supported. [`MixMode::ConvexBlend`] emits rows
//! `x = sum_r alpha_r x_r + N(0, s^2)` from one uniformly drawn row per
//! region, with matching target `y = sum_r alpha_r y_r`. [`MixMode::Pooled`]
//! resamples `round(alpha_r * N)` rows from each region and shuffles the union.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{mean, sample_variance, Dataset, Region, Sample};
use crate::error::{Error, Result};
use crate::seed::SeedSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixMode {
    ConvexBlend,
    Pooled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixConfig {
    pub alpha: Vec<f64>,
    pub mix_noise_sd: f64,
    pub mode: MixMode,
    /// Rows emitted (convex blend) or `N_total` (pooled).
    pub output_n: usize,
    pub seed: SeedSpec,
}

impl MixConfig {
    pub fn equal(regions: usize, mix_noise_sd: f64, mode: MixMode, output_n: usize, seed: SeedSpec) -> Self {
        Self {
            alpha: vec![1.0 / regions as f64; regions],
            mix_noise_sd,
            mode,
            output_n,
            seed,
        }
    }

    pub fn validate(&self, regions: usize) -> Result<()> {
        if self.alpha.len() != regions {
            return Err(Error::DimensionMismatch {
                expected: regions,
                got: self.alpha.len(),
            });
        }
        if self.alpha.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(Error::invalid("alpha", "weights must be nonnegative"));
        }
        let total: f64 = self.alpha.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("alpha", alloc::format!("weights sum to {total}, not 1")));
        }
        if !(self.mix_noise_sd >= 0.0 && self.mix_noise_sd.is_finite()) {
            return Err(Error::invalid("mix_noise_sd", "must be finite and nonnegative"));
        }
        if self.output_n == 0 {
            return Err(Error::invalid("output_n", "must be at least 1"));
        }
        Ok(())
    }
}

/// `scale` times the mean over features of the pooled feature sd.
pub fn relative_noise_sd(regions: &[Dataset], scale: f64) -> Result<f64> {
    let pooled = Dataset::concat(regions)?;
    let m = pooled.dim();
    if m == 0 {
        return Ok(0.0);
    }
    let mean_sd = (0..m)
        .map(|j| libm::sqrt(sample_variance(&pooled.column(j)).unwrap_or(0.0)))
        .sum::<f64>()
        / m as f64;
    Ok(scale * mean_sd)
}

/// Mixed rows plus, per row, the source region used by covariance
/// diagnostics. Convex-blend rows take the region with the largest weight,
/// ties broken uniformly at random; pooled rows keep their own tag.
#[derive(Debug, Clone, PartialEq)]
pub struct MixOutcome {
    pub dataset: Dataset,
    pub sources: Vec<Region>,
}

impl MixOutcome {
    pub fn diagnostic_view(&self) -> Result<Dataset> {
        self.dataset.with_regions(self.sources.clone())
    }
}

fn check_regions(regions: &[Dataset], config: &MixConfig) -> Result<Vec<Region>> {
    config.validate(regions.len())?;
    let first = regions.first().ok_or(Error::TooFewRegions { needed: 1, have: 0 })?;
    regions
        .iter()
        .enumerate()
        .map(|(r, d)| {
            first.same_schema(d)?;
            let tag = d
                .regions()
                .into_iter()
                .next()
                .unwrap_or_else(|| Region::new(alloc::format!("input{r}")));
            if d.is_empty() {
                return Err(Error::EmptyRegion(tag));
            }
            Ok(tag)
        })
        .collect()
}

pub fn mix(regions: &[Dataset], config: &MixConfig) -> Result<MixOutcome> {
    match config.mode {
        MixMode::ConvexBlend => mix_convex(regions, config),
        MixMode::Pooled => mix_pooled(regions, config),
    }
}

pub fn mix_convex(regions: &[Dataset], config: &MixConfig) -> Result<MixOutcome> {
    if config.mode != MixMode::ConvexBlend {
        return Err(Error::invalid("mode", "mix_convex requires convex_blend"));
    }
    let tags = check_regions(regions, config)?;
    let m = regions[0].dim();
    let top = config.alpha.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let leaders: Vec<usize> = (0..regions.len()).filter(|&r| config.alpha[r] == top).collect();

    let mut rng = config.seed.rng();
    let mut samples = Vec::with_capacity(config.output_n);
    let mut sources = Vec::with_capacity(config.output_n);
    for _ in 0..config.output_n {
        let mut x = vec![0.0; m];
        let mut y = 0.0;
        for (d, &a) in regions.iter().zip(&config.alpha) {
            let s = &d.samples()[rng.random_range(0..d.len())];
            for (acc, v) in x.iter_mut().zip(&s.features) {
                *acc += a * v;
            }
            y += a * s.target;
        }
        if config.mix_noise_sd > 0.0 {
            for acc in &mut x {
                let z: f64 = StandardNormal.sample(&mut rng);
                *acc += config.mix_noise_sd * z;
            }
        }
        let leader = if leaders.len() == 1 {
            leaders[0]
        } else {
            leaders[rng.random_range(0..leaders.len())]
        };
        sources.push(tags[leader].clone());
        samples.push(Sample::new(x, y, Some(Region::mixed())));
    }
    Ok(MixOutcome {
        dataset: regions[0].with_samples(samples)?,
        sources,
    })
}

pub fn pooled_counts(alpha: &[f64], total: usize) -> Vec<usize> {
    alpha.iter().map(|a| libm::round(a * total as f64) as usize).collect()
}

pub fn mix_pooled(regions: &[Dataset], config: &MixConfig) -> Result<MixOutcome> {
    if config.mode != MixMode::Pooled {
        return Err(Error::invalid("mode", "mix_pooled requires pooled"));
    }
    check_regions(regions, config)?;
    let mut rng = config.seed.rng();
    let mut samples = Vec::new();
    for (d, count) in regions.iter().zip(pooled_counts(&config.alpha, config.output_n)) {
        for _ in 0..count {
            samples.push(d.samples()[rng.random_range(0..d.len())].clone());
        }
    }
    samples.shuffle(&mut rng);
    let sources = samples
        .iter()
        .map(|s| s.region.clone().unwrap_or_else(|| Region::new("untagged")))
        .collect();
    Ok(MixOutcome {
        dataset: regions[0].with_samples(samples)?,
        sources,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentPrediction {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// Per-feature `E = sum alpha_r mu_r`, `Var = sum alpha_r^2 sigma_r^2 + s^2`.
pub fn predict_moments(region_stats: &[(Vec<f64>, Vec<f64>)], config: &MixConfig) -> Result<MomentPrediction> {
    if config.mode == MixMode::Pooled {
        return Err(Error::PooledMoments);
    }
    config.validate(region_stats.len())?;
    let m = region_stats[0].0.len();
    let mut mean = vec![0.0; m];
    let mut variance = vec![config.mix_noise_sd * config.mix_noise_sd; m];
    for ((mu, sigma2), &a) in region_stats.iter().zip(&config.alpha) {
        for len in [mu.len(), sigma2.len()] {
            if len != m {
                return Err(Error::DimensionMismatch { expected: m, got: len });
            }
        }
        for j in 0..m {
            mean[j] += a * mu[j];
            variance[j] += a * a * sigma2[j];
        }
    }
    Ok(MomentPrediction { mean, variance })
}

/// Empirical `(mu, sigma2)` per feature, the input shape of [`predict_moments`].
pub fn empirical_moments(d: &Dataset) -> Result<(Vec<f64>, Vec<f64>)> {
    if d.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, have: d.len() });
    }
    let cols: Vec<Vec<f64>> = (0..d.dim()).map(|j| d.column(j)).collect();
    Ok((
        cols.iter().map(|c| mean(c)).collect(),
        cols.iter().map(|c| sample_variance(c).unwrap_or(0.0)).collect(),
    ))
}

/// Sample covariance (n - 1) between each feature and `1[region == tag]`.
pub fn context_feature_covariance(dataset: &Dataset, region: &Region) -> Result<Vec<f64>> {
    if !dataset.is_tagged() {
        return Err(Error::Untagged);
    }
    if !dataset.regions().contains(region) {
        return Err(Error::EmptyRegion(region.clone()));
    }
    if dataset.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, have: dataset.len() });
    }
    let indicator: Vec<f64> = dataset
        .samples()
        .iter()
        .map(|s| if s.region.as_ref() == Some(region) { 1.0 } else { 0.0 })
        .collect();
    let c_mean = mean(&indicator);
    let denom = (dataset.len() - 1) as f64;
    Ok((0..dataset.dim())
        .map(|j| {
            let col = dataset.column(j);
            let x_mean = mean(&col);
            col.iter()
                .zip(&indicator)
                .map(|(x, c)| (x - x_mean) * (c - c_mean))
                .sum::<f64>()
                / denom
        })
        .collect())
}

/// `max_j max_r |Cov(x_j, 1[region == r])|` over all tags present.
pub fn max_context_covariance(dataset: &Dataset) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for r in dataset.regions() {
        for c in context_feature_covariance(dataset, &r)? {
            worst = worst.max(c.abs());
        }
    }
    Ok(worst)
}
