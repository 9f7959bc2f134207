//! Replicate-then-noise expansion and its distributional fidelity check.
//!
//! Every input row spawns `expansion_factor` copies; feature `j` of each copy
//! receives independent `N(0, (c * sd_j)^2)` noise, where `sd_j` is the input
//! column's sample standard deviation.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{sample_variance, Dataset, Sample};
use crate::error::{Error, Result};
use crate::ks::ks_two_sample;
use crate::seed::SeedSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub expansion_factor: usize,
    /// Feature noise sd as a multiple of each feature's sd.
    pub noise_scale: f64,
    pub noise_target: bool,
    pub target_noise_scale: f64,
    pub seed: SeedSpec,
}

impl AugmentConfig {
    pub fn new(seed: SeedSpec) -> Self {
        Self {
            expansion_factor: 31,
            noise_scale: 0.05,
            noise_target: false,
            target_noise_scale: 0.02,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.expansion_factor == 0 {
            return Err(Error::invalid("expansion_factor", "must be at least 1"));
        }
        for (name, v) in [("noise_scale", self.noise_scale), ("target_noise_scale", self.target_noise_scale)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be finite and nonnegative"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentOutcome {
    pub dataset: Dataset,
    /// Human-readable notes, e.g. zero-variance columns left unperturbed.
    pub log: Vec<String>,
}

pub fn augment(dataset: &Dataset, config: &AugmentConfig) -> Result<AugmentOutcome> {
    config.validate()?;
    if dataset.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, have: dataset.len() });
    }
    let mut log = Vec::new();
    let feature_sd: Vec<f64> = (0..dataset.dim())
        .map(|j| {
            let sd = libm::sqrt(sample_variance(&dataset.column(j)).unwrap_or(0.0));
            if sd == 0.0 && config.noise_scale > 0.0 {
                log.push(format!(
                    "feature `{}` has zero variance; copied unchanged",
                    dataset.feature_names()[j]
                ));
            }
            config.noise_scale * sd
        })
        .collect();
    let target_sd = if config.noise_target {
        config.target_noise_scale * libm::sqrt(sample_variance(&dataset.targets()).unwrap_or(0.0))
    } else {
        0.0
    };

    let mut rng = config.seed.rng();
    let mut out = Vec::with_capacity(dataset.len() * config.expansion_factor);
    for s in dataset.samples() {
        for _ in 0..config.expansion_factor {
            let features = s
                .features
                .iter()
                .zip(&feature_sd)
                .map(|(&x, &sd)| {
                    if sd > 0.0 {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        x + sd * z
                    } else {
                        x
                    }
                })
                .collect();
            let target = if target_sd > 0.0 {
                let z: f64 = StandardNormal.sample(&mut rng);
                s.target + target_sd * z
            } else {
                s.target
            };
            out.push(Sample::new(features, target, s.region.clone()));
        }
    }
    Ok(AugmentOutcome {
        dataset: dataset.with_samples(out)?,
        log,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureKs {
    pub feature: String,
    pub d: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub features: Vec<FeatureKs>,
    pub overall_max_d: f64,
}

impl KsReport {
    pub fn min_p(&self) -> f64 {
        self.features.iter().map(|f| f.p).fold(1.0, f64::min)
    }
}

pub fn fidelity_report(original: &Dataset, augmented: &Dataset) -> Result<KsReport> {
    original.same_schema(augmented)?;
    let features = (0..original.dim())
        .map(|j| {
            let (d, p) = ks_two_sample(&original.column(j), &augmented.column(j))?;
            Ok(FeatureKs {
                feature: original.feature_names()[j].clone(),
                d,
                p,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let overall_max_d = features.iter().map(|f| f.d).fold(0.0, f64::max);
    Ok(KsReport { features, overall_max_d })
}
