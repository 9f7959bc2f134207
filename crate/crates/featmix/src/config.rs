//! Pipeline configuration: one JSON document with a section per stage.
//!
//! Every field has a default, so `{}` is a valid config. Seeds are never
//! configured per stage; they derive from `master_seed` and a stage label.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use featmix_core::augment::AugmentConfig;
use featmix_core::baselines::{ReweightConfig, SmoteConfig};
use featmix_core::mixing::{relative_noise_sd, MixConfig, MixMode};
use featmix_core::regressors::{Hyperparams, ModelKind, ModelSpec};
use featmix_core::synthgen::{GeneratorConfig, RegionSpec, DEFAULT_OFFSET_UNITS};
use featmix_core::{Dataset, Region, SeedSpec};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Base rows per region in the default suite; 31-fold augmentation takes
/// this to 23715.
pub const DEFAULT_BASE_N: usize = 765;
/// Base rows per region under `--quick`.
pub const QUICK_BASE_N: usize = 40;
pub const QUICK_TREES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub master_seed: u64,
    pub generator: GeneratorSection,
    pub augment: AugmentSection,
    pub mix: MixSection,
    pub smote: SmoteSection,
    pub reweight: ReweightSection,
    pub models: Vec<ModelSpec>,
    /// Standardize features for every model, not only SVR.
    pub standardize_all: bool,
    pub evaluation: EvaluationSection,
    pub techniques: Vec<Technique>,
    #[serde(skip_serializing)]
    pub out_dir: PathBuf,
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            master_seed: 42,
            generator: GeneratorSection::default(),
            augment: AugmentSection::default(),
            mix: MixSection::default(),
            smote: SmoteSection::default(),
            reweight: ReweightSection::default(),
            models: ModelKind::ALL.into_iter().map(ModelSpec::default_for).collect(),
            standardize_all: false,
            evaluation: EvaluationSection::default(),
            techniques: Technique::default_grid(3),
            out_dir: PathBuf::from("out"),
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSection {
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub theta: Vec<f64>,
    pub target_noise_sd: f64,
    pub regions: Vec<RegionSpec>,
}

impl Default for GeneratorSection {
    fn default() -> Self {
        Self::from_config(GeneratorConfig::default_suite(DEFAULT_BASE_N, DEFAULT_OFFSET_UNITS, SeedSpec::new(0, "")))
    }
}

impl GeneratorSection {
    pub fn from_config(c: GeneratorConfig) -> Self {
        Self {
            feature_names: c.feature_names,
            target_name: c.target_name,
            theta: c.theta,
            target_noise_sd: c.target_noise_sd,
            regions: c.regions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    pub enabled: bool,
    pub expansion_factor: usize,
    pub noise_scale: f64,
    pub noise_target: bool,
    pub target_noise_scale: f64,
}

impl Default for AugmentSection {
    fn default() -> Self {
        let c = AugmentConfig::new(SeedSpec::new(0, ""));
        Self {
            enabled: true,
            expansion_factor: c.expansion_factor,
            noise_scale: c.noise_scale,
            noise_target: c.noise_target,
            target_noise_scale: c.target_noise_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixSection {
    /// Defaults to equal weights.
    pub alpha: Option<Vec<f64>>,
    pub mode: MixMode,
    /// Absolute noise sd; overrides `noise_scale` when set.
    pub noise_sd: Option<f64>,
    /// Noise sd as a multiple of the mean pooled feature sd.
    pub noise_scale: f64,
    /// Defaults to the largest region (convex) or the sum of regions (pooled).
    pub output_n: Option<usize>,
}

impl Default for MixSection {
    fn default() -> Self {
        Self {
            alpha: None,
            mode: MixMode::ConvexBlend,
            noise_sd: None,
            noise_scale: 0.05,
            output_n: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoteSection {
    pub k_neighbors: usize,
}

impl Default for SmoteSection {
    fn default() -> Self {
        Self { k_neighbors: 5 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReweightSection {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Each technique is cross-validated on its own dataset.
    PaperFaithful,
    /// Every fold model is scored on one pooled holdout of regional data.
    CrossContext,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::PaperFaithful => "paper_faithful",
            Protocol::CrossContext => "cross_context",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub k: usize,
    pub test_fraction: f64,
    pub protocol: Protocol,
    /// Augment inside each training fold instead of before splitting.
    pub leak_safe: bool,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self {
            k: 10,
            test_fraction: 0.2,
            protocol: Protocol::PaperFaithful,
            leak_safe: false,
        }
    }
}

/// How a training set is built from the regional data.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Technique {
    Single(Region),
    Mixed,
    Pooled,
    Smote,
    Reweight,
}

impl Technique {
    /// One single-region cell per region `r0..`, then mixed, SMOTE and
    /// reweighting.
    pub fn default_grid(regions: usize) -> Vec<Technique> {
        let mut v: Vec<Technique> = (0..regions).map(|r| Technique::Single(Region::new(format!("r{r}")))).collect();
        v.extend([Technique::Mixed, Technique::Smote, Technique::Reweight]);
        v
    }

    pub fn region(&self) -> Option<&Region> {
        match self {
            Technique::Single(r) => Some(r),
            _ => None,
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Technique::Single(r) => write!(f, "single:{r}"),
            Technique::Mixed => f.write_str("mixed"),
            Technique::Pooled => f.write_str("pooled"),
            Technique::Smote => f.write_str("smote"),
            Technique::Reweight => f.write_str("reweight"),
        }
    }
}

impl FromStr for Technique {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mixed" => Ok(Technique::Mixed),
            "pooled" => Ok(Technique::Pooled),
            "smote" => Ok(Technique::Smote),
            "reweight" => Ok(Technique::Reweight),
            other => match other.strip_prefix("single:") {
                Some(tag) if !tag.is_empty() => Ok(Technique::Single(Region::new(tag))),
                _ => Err(format!(
                    "unknown technique `{other}` (expected mixed, pooled, smote, reweight or single:<region>)"
                )),
            },
        }
    }
}

impl TryFrom<String> for Technique {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl From<Technique> for String {
    fn from(t: Technique) -> String {
        t.to_string()
    }
}

fn core_field(section: &str, e: featmix_core::Error) -> Error {
    match e {
        featmix_core::Error::InvalidParameter { name, reason } => Error::Config(format!("{section}.{name}: {reason}")),
        other => Error::Config(format!("{section}: {other}")),
    }
}

impl PipelineConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path.is_empty() || path == "." {
                Error::Config(inner.to_string())
            } else {
                Error::Config(format!("{path}: {inner}"))
            }
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Input {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg = Self::from_json_str(&text)?;
        Ok(cfg)
    }

    /// Smaller suite and forests for smoke runs.
    pub fn apply_quick(&mut self) {
        for r in &mut self.generator.regions {
            r.n = QUICK_BASE_N;
        }
        for m in &mut self.models {
            if let ModelSpec::Rf(p) = m {
                p.n_trees = p.n_trees.min(QUICK_TREES);
            }
        }
    }

    pub fn seed(&self, label: &str) -> SeedSpec {
        SeedSpec::new(self.master_seed, label)
    }

    pub fn generator_config(&self) -> GeneratorConfig {
        let g = &self.generator;
        GeneratorConfig {
            feature_names: g.feature_names.clone(),
            target_name: g.target_name.clone(),
            theta: g.theta.clone(),
            target_noise_sd: g.target_noise_sd,
            regions: g.regions.clone(),
            seed: self.seed("generate"),
        }
    }

    pub fn region_tags(&self) -> Vec<Region> {
        self.generator.regions.iter().map(|r| r.region_id.clone()).collect()
    }

    pub fn augment_config(&self, region: &Region) -> AugmentConfig {
        let a = &self.augment;
        AugmentConfig {
            expansion_factor: a.expansion_factor,
            noise_scale: a.noise_scale,
            noise_target: a.noise_target,
            target_noise_scale: a.target_noise_scale,
            seed: self.seed("augment").child(region),
        }
    }

    pub fn mix_config(&self, regions: &[Dataset], mode: MixMode) -> Result<MixConfig> {
        let m = &self.mix;
        let alpha = m
            .alpha
            .clone()
            .unwrap_or_else(|| vec![1.0 / regions.len().max(1) as f64; regions.len()]);
        let noise = match m.noise_sd {
            Some(sd) => sd,
            None => relative_noise_sd(regions, m.noise_scale)?,
        };
        let output_n = m.output_n.unwrap_or_else(|| match mode {
            MixMode::ConvexBlend => regions.iter().map(Dataset::len).max().unwrap_or(0),
            MixMode::Pooled => regions.iter().map(Dataset::len).sum(),
        });
        let cfg = MixConfig {
            alpha,
            mix_noise_sd: noise,
            mode,
            output_n,
            seed: self.seed("mix"),
        };
        cfg.validate(regions.len()).map_err(|e| core_field("mix", e))?;
        Ok(cfg)
    }

    pub fn smote_config(&self) -> SmoteConfig {
        SmoteConfig {
            k_neighbors: self.smote.k_neighbors,
            seed: self.seed("smote"),
        }
    }

    pub fn reweight_config(&self) -> ReweightConfig {
        ReweightConfig {
            seed: self.seed("reweight"),
        }
    }

    pub fn hyperparams(&self, spec: &ModelSpec) -> Hyperparams {
        Hyperparams {
            model: spec.clone(),
            standardize: self.standardize_all,
            seed: self.seed("model").child(spec.kind()),
        }
    }

    /// Replaces the model list by the given kinds, keeping any configured
    /// parameters for kinds already present.
    pub fn select_models(&mut self, kinds: &[ModelKind]) {
        self.models = kinds
            .iter()
            .map(|&k| {
                self.models
                    .iter()
                    .find(|m| m.kind() == k)
                    .cloned()
                    .unwrap_or_else(|| ModelSpec::default_for(k))
            })
            .collect();
    }

    /// Checks every section; messages name the offending field.
    pub fn validate(&self) -> Result<()> {
        self.generator_config().validate().map_err(|e| core_field("generator", e))?;
        if self.augment.enabled {
            if let Some(r) = self.region_tags().first() {
                self.augment_config(r).validate().map_err(|e| core_field("augment", e))?;
            }
        }
        let m = &self.mix;
        if let Some(alpha) = &m.alpha {
            if alpha.len() != self.generator.regions.len() {
                return Err(Error::Config(format!(
                    "mix.alpha: {} weights for {} regions",
                    alpha.len(),
                    self.generator.regions.len()
                )));
            }
        }
        if !(m.noise_scale >= 0.0 && m.noise_scale.is_finite()) {
            return Err(Error::Config("mix.noise_scale: must be finite and nonnegative".into()));
        }
        if let Some(sd) = m.noise_sd {
            if !(sd >= 0.0 && sd.is_finite()) {
                return Err(Error::Config("mix.noise_sd: must be finite and nonnegative".into()));
            }
        }
        if m.output_n == Some(0) {
            return Err(Error::Config("mix.output_n: must be at least 1".into()));
        }
        if self.smote.k_neighbors == 0 {
            return Err(Error::Config("smote.k_neighbors: must be at least 1".into()));
        }
        if self.models.is_empty() {
            return Err(Error::Config("models: at least one model is required".into()));
        }
        for (i, spec) in self.models.iter().enumerate() {
            spec.validate().map_err(|e| core_field(&format!("models[{i}]"), e))?;
        }
        let e = &self.evaluation;
        if e.k < 2 {
            return Err(Error::Config("evaluation.k: need at least 2 folds".into()));
        }
        if !(e.test_fraction > 0.0 && e.test_fraction < 1.0) {
            return Err(Error::Config("evaluation.test_fraction: must lie in (0, 1)".into()));
        }
        if self.techniques.is_empty() {
            return Err(Error::Config("techniques: at least one technique is required".into()));
        }
        let tags = self.region_tags();
        for t in &self.techniques {
            if let Some(r) = t.region() {
                if !tags.contains(r) {
                    return Err(Error::Config(format!("techniques: `{t}` names an unknown region")));
                }
            }
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads: must be at least 1".into()));
        }
        Ok(())
    }
}
