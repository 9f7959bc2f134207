use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{mean, sample_variance, Dataset, Sample};
use crate::error::Result;

/// Per-feature affine map to zero mean and unit sample variance. Constant
/// columns keep scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &Dataset) -> Self {
        let (mut mu, mut scale) = (Vec::new(), Vec::new());
        for j in 0..data.dim() {
            let col = data.column(j);
            mu.push(mean(&col));
            let sd = libm::sqrt(sample_variance(&col).unwrap_or(0.0));
            scale.push(if sd > 0.0 { sd } else { 1.0 });
        }
        Self { mean: mu, scale }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn transform_dataset(&self, data: &Dataset) -> Result<Dataset> {
        data.with_samples(
            data.samples()
                .iter()
                .map(|s| Sample::new(self.transform(&s.features), s.target, s.region.clone()))
                .collect(),
        )
    }
}
