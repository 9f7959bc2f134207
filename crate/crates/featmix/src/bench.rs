//! End-to-end benchmark: generate, split, augment, build one training set per
//! technique, then cross-validate every (model, technique) cell.

use std::collections::BTreeMap;
use std::time::Instant;

use featmix_core::augment::{augment, fidelity_report, AugmentConfig, KsReport};
use featmix_core::baselines::{reweight_resample, smote_balance};
use featmix_core::data::split_holdout;
use featmix_core::eval::{
    cross_validate_with, delta_bias, intervals_overlap, mse, paired_t_test, residual_region_means, BiasReduction,
    CvOptions, CvResult, EvalTarget,
};
use featmix_core::mixing::{empirical_moments, max_context_covariance, mix, predict_moments, MixMode};
use featmix_core::regressors::{Learner, ModelKind, Predictor};
use featmix_core::synthgen::generate_suite;
use featmix_core::{Dataset, Region, SeedSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{PipelineConfig, Protocol, Technique};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub label: String,
    pub seconds: f64,
}

/// Runs `f` and reports its wall time, floored at one nanosecond so that a
/// recorded stage never shows zero.
pub fn time_stage<T>(label: impl Into<String>, f: impl FnOnce() -> T) -> (T, StageTiming) {
    let start = Instant::now();
    let out = f();
    let seconds = start.elapsed().as_secs_f64().max(1e-9);
    (out, StageTiming { label: label.into(), seconds })
}

/// Regional data after splitting and augmentation.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub regions: Vec<Region>,
    /// Training splits before augmentation.
    pub base_train: Vec<Dataset>,
    /// Training splits used to build technique datasets.
    pub train: Vec<Dataset>,
    pub holdouts: Vec<Dataset>,
    /// All regional holdouts concatenated.
    pub pooled_holdout: Dataset,
    pub ks: Vec<RegionKs>,
    pub stages: Vec<StageTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionKs {
    pub region: Region,
    pub report: KsReport,
}

/// Augmentation happens up front unless it is disabled or deferred to the
/// training folds (leak-safe mode).
fn augments_up_front(cfg: &PipelineConfig) -> bool {
    cfg.augment.enabled && !cfg.evaluation.leak_safe
}

pub fn prepare(cfg: &PipelineConfig) -> Result<Prepared> {
    let mut stages = Vec::new();
    let (suite, t) = time_stage("generate", || generate_suite(&cfg.generator_config()));
    stages.push(t);
    let suite = suite.map_err(Error::stage("generate"))?;
    let regions = cfg.region_tags();

    let mut base_train = Vec::with_capacity(suite.len());
    let mut holdouts = Vec::with_capacity(suite.len());
    for (d, r) in suite.iter().zip(&regions) {
        let (train, test) = split_holdout(d, cfg.evaluation.test_fraction, &cfg.seed("holdout").child(r))
            .map_err(Error::stage(format!("holdout split for {r}")))?;
        base_train.push(train);
        holdouts.push(test);
    }
    let pooled_holdout = Dataset::concat(&holdouts).map_err(Error::stage("pooled holdout"))?;

    let mut train = base_train.clone();
    let mut ks = Vec::new();
    if augments_up_front(cfg) {
        let (res, t) = time_stage("augment", || -> Result<()> {
            for (i, r) in regions.iter().enumerate() {
                let stage = || format!("augment {r}");
                let out = augment(&base_train[i], &cfg.augment_config(r)).map_err(Error::stage(stage()))?;
                let report = fidelity_report(&base_train[i], &out.dataset).map_err(Error::stage(stage()))?;
                ks.push(RegionKs { region: r.clone(), report });
                train[i] = out.dataset;
            }
            Ok(())
        });
        stages.push(t);
        res?;
    }
    Ok(Prepared {
        regions,
        base_train,
        train,
        holdouts,
        pooled_holdout,
        ks,
        stages,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub predicted_mean: Vec<f64>,
    pub predicted_variance: Vec<f64>,
    pub empirical_mean: Vec<f64>,
    pub empirical_variance: Vec<f64>,
    /// Largest `|empirical - predicted| / predicted` over the variances.
    pub max_relative_variance_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechniqueSummary {
    pub technique: Technique,
    pub rows: usize,
    /// Largest |Cov(feature, region indicator)|; absent for one-region sets.
    pub max_context_covariance: Option<f64>,
    pub moment_check: Option<MomentCheck>,
}

#[derive(Debug, Clone)]
pub struct TechniqueData {
    pub dataset: Dataset,
    pub summary: TechniqueSummary,
}

pub fn check_moments(train: &[Dataset], mixed: &Dataset, cfg: &featmix_core::mixing::MixConfig) -> Result<MomentCheck> {
    let stats: Vec<_> = train.iter().map(empirical_moments).collect::<std::result::Result<_, _>>()?;
    let predicted = predict_moments(&stats, cfg)?;
    let (empirical_mean, empirical_variance) = empirical_moments(mixed)?;
    let max_relative_variance_error = predicted
        .variance
        .iter()
        .zip(&empirical_variance)
        .map(|(p, e)| (e - p).abs() / p.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    Ok(MomentCheck {
        predicted_mean: predicted.mean,
        predicted_variance: predicted.variance,
        empirical_mean,
        empirical_variance,
        max_relative_variance_error,
    })
}

pub fn build_technique(cfg: &PipelineConfig, prepared: &Prepared, technique: &Technique) -> Result<TechniqueData> {
    let stage = || format!("build {technique}");
    let train = &prepared.train;
    let mut moment_check = None;
    let (dataset, diag) = match technique {
        Technique::Single(r) => {
            let i = prepared
                .regions
                .iter()
                .position(|x| x == r)
                .ok_or_else(|| Error::Config(format!("techniques: `{technique}` names an unknown region")))?;
            (train[i].clone(), None)
        }
        Technique::Mixed | Technique::Pooled => {
            let mode = if *technique == Technique::Pooled { MixMode::Pooled } else { cfg.mix.mode };
            let mc = cfg.mix_config(train, mode)?;
            let out = mix(train, &mc).map_err(Error::stage(stage()))?;
            if mode == MixMode::ConvexBlend {
                moment_check = Some(check_moments(train, &out.dataset, &mc).map_err(Error::stage(stage()))?);
            }
            let view = out.diagnostic_view().map_err(Error::stage(stage()))?;
            (out.dataset, Some(view))
        }
        Technique::Smote => {
            let out = smote_balance(train, &cfg.smote_config()).map_err(Error::stage(stage()))?;
            (out.dataset, None)
        }
        Technique::Reweight => {
            let out = reweight_resample(train, &cfg.reweight_config()).map_err(Error::stage(stage()))?;
            (out.dataset, None)
        }
    };
    let view = diag.as_ref().unwrap_or(&dataset);
    let max_context_covariance = if view.regions().len() > 1 {
        Some(max_context_covariance(view).map_err(Error::stage(stage()))?)
    } else {
        None
    };
    Ok(TechniqueData {
        summary: TechniqueSummary {
            technique: technique.clone(),
            rows: dataset.len(),
            max_context_covariance,
            moment_check,
        },
        dataset,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub model: ModelKind,
    pub technique: Technique,
    pub cv: CvResult,
    /// MSE on the pooled regional holdout of a model fit on the whole
    /// technique dataset.
    pub holdout_mse: f64,
    /// Mean holdout residual per region for that same model.
    pub holdout_residual_means: BTreeMap<Region, f64>,
    pub convergence_warning: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaCell {
    pub model: ModelKind,
    pub region: Region,
    pub reduction: BiasReduction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceCell {
    pub model: ModelKind,
    pub a: Technique,
    pub b: Technique,
    /// Absent when the fold differences have zero spread.
    pub t: Option<f64>,
    pub p: f64,
    pub df: usize,
    pub intervals_overlap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTiming {
    pub model: ModelKind,
    pub technique: Technique,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub stages: Vec<StageTiming>,
    pub cells: Vec<CellTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub augmentation_ks: Vec<RegionKs>,
    pub techniques: Vec<TechniqueSummary>,
    pub holdout_rows: usize,
}

/// Everything one benchmark run produced. Field order is the JSON order;
/// `timings` comes last and is the only run-to-run varying part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub protocol: Protocol,
    pub leak_safe: bool,
    pub master_seed: u64,
    pub models: Vec<ModelKind>,
    pub techniques: Vec<Technique>,
    pub regions: Vec<Region>,
    pub grid: Vec<GridCell>,
    pub delta_bias: Vec<DeltaCell>,
    pub significance: Vec<SignificanceCell>,
    pub diagnostics: Diagnostics,
    pub config: PipelineConfig,
    pub timings: Timings,
}

impl BenchmarkReport {
    pub fn cell(&self, model: ModelKind, technique: &Technique) -> Option<&GridCell> {
        self.grid.iter().find(|c| c.model == model && &c.technique == technique)
    }

    pub fn cell_seconds(&self, model: ModelKind, technique: &Technique) -> Option<f64> {
        self.timings
            .cells
            .iter()
            .find(|c| c.model == model && &c.technique == technique)
            .map(|c| c.seconds)
    }

    pub fn delta(&self, model: ModelKind, region: &Region) -> Option<&BiasReduction> {
        self.delta_bias
            .iter()
            .find(|d| d.model == model && &d.region == region)
            .map(|d| &d.reduction)
    }

    pub fn significance(&self, model: ModelKind, a: &Technique, b: &Technique) -> Option<&SignificanceCell> {
        self.significance
            .iter()
            .find(|s| s.model == model && ((&s.a == a && &s.b == b) || (&s.a == b && &s.b == a)))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Format {
            source_name: "report".into(),
            message: e.to_string(),
        })?;
        s.push('\n');
        Ok(s)
    }

    /// The report without its timings block; identical across reruns and
    /// thread counts for a fixed config.
    pub fn to_json_without_timings(&self) -> Result<String> {
        let mut v = serde_json::to_value(self).map_err(|e| Error::Format {
            source_name: "report".into(),
            message: e.to_string(),
        })?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timings");
        }
        let mut s = serde_json::to_string_pretty(&v).expect("a JSON value always serializes");
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Format {
            source_name: "report".into(),
            message: format!("{}: {}", e.path(), e.inner()),
        })
    }
}

fn evaluate_cell(
    cfg: &PipelineConfig,
    prepared: &Prepared,
    data: &TechniqueData,
    spec: &featmix_core::regressors::ModelSpec,
) -> Result<(GridCell, f64)> {
    let technique = &data.summary.technique;
    let hp = cfg.hyperparams(spec);
    let start = Instant::now();

    let leak_safe_cfg: Option<AugmentConfig> = (cfg.augment.enabled && cfg.evaluation.leak_safe)
        .then(|| cfg.augment_config(&Region::new("fold")));
    let transform = |train: &Dataset, seed: &SeedSpec| -> featmix_core::Result<Dataset> {
        let base = leak_safe_cfg.as_ref().expect("transform is only installed in leak-safe mode");
        let c = AugmentConfig { seed: seed.clone(), ..base.clone() };
        Ok(augment(train, &c)?.dataset)
    };
    let mut opts = CvOptions::new(cfg.evaluation.k, cfg.seed("cv").child(technique));
    if cfg.evaluation.protocol == Protocol::CrossContext {
        opts.target = EvalTarget::Holdout(&prepared.pooled_holdout);
    }
    if leak_safe_cfg.is_some() {
        opts.train_transform = Some(&transform);
    }
    let cv = cross_validate_with(&hp, &data.dataset, &opts)?;

    let full = match &leak_safe_cfg {
        Some(_) => transform(&data.dataset, &cfg.seed("augment").child(technique))?,
        None => data.dataset.clone(),
    };
    let model = hp.fit(&full, &hp.seed)?;
    let yhat = model.predict_dataset(&prepared.pooled_holdout)?;
    let holdout_mse = mse(&prepared.pooled_holdout.targets(), &yhat)?;
    let holdout_residual_means = residual_region_means(&model, &prepared.holdouts)?;
    let seconds = start.elapsed().as_secs_f64().max(1e-9);
    Ok((
        GridCell {
            model: spec.kind(),
            technique: technique.clone(),
            cv,
            holdout_mse,
            holdout_residual_means,
            convergence_warning: model.convergence_warning(),
        },
        seconds,
    ))
}

/// Runs the whole grid. Cells run in parallel on the current rayon pool;
/// results do not depend on the pool size.
pub fn run_benchmark(cfg: &PipelineConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let prepared = prepare(cfg)?;
    let mut stages = prepared.stages.clone();

    let mut datasets = Vec::with_capacity(cfg.techniques.len());
    for t in &cfg.techniques {
        let (d, timing) = time_stage(format!("build {t}"), || build_technique(cfg, &prepared, t));
        stages.push(timing);
        datasets.push(d?);
    }

    let jobs: Vec<(usize, usize)> = (0..cfg.models.len())
        .flat_map(|m| (0..datasets.len()).map(move |t| (m, t)))
        .collect();
    let results: Vec<(GridCell, f64)> = jobs
        .par_iter()
        .map(|&(m, t)| {
            evaluate_cell(cfg, &prepared, &datasets[t], &cfg.models[m]).map_err(Error::stage(format!(
                "evaluate {} on {}",
                cfg.models[m].kind(),
                cfg.techniques[t]
            )))
        })
        .collect::<Result<_>>()?;

    let mut grid = Vec::with_capacity(results.len());
    let mut cells = Vec::with_capacity(results.len());
    for (cell, seconds) in results {
        cells.push(CellTiming {
            model: cell.model,
            technique: cell.technique.clone(),
            seconds,
        });
        grid.push(cell);
    }

    let diagnostics = Diagnostics {
        augmentation_ks: prepared.ks.clone(),
        techniques: datasets.into_iter().map(|d| d.summary).collect(),
        holdout_rows: prepared.pooled_holdout.len(),
    };
    assemble(cfg, prepared.regions.clone(), grid, diagnostics, Timings { stages, cells })
}

/// Builds the report from a finished grid: bias reductions of every single
/// region against mixed, and a paired t-test for every technique pair.
/// Fails when a (model, technique) cell of `cfg` is missing.
pub fn assemble(
    cfg: &PipelineConfig,
    regions: Vec<Region>,
    grid: Vec<GridCell>,
    diagnostics: Diagnostics,
    timings: Timings,
) -> Result<BenchmarkReport> {
    let models: Vec<ModelKind> = cfg.models.iter().map(|m| m.kind()).collect();
    let find = |m: ModelKind, t: &Technique| {
        grid.iter()
            .find(|c| c.model == m && &c.technique == t)
            .ok_or_else(|| Error::Format {
                source_name: "grid".into(),
                message: format!("missing cell for {m} on {t}"),
            })
    };
    for &m in &models {
        for t in &cfg.techniques {
            find(m, t)?;
        }
    }

    let mut deltas = Vec::new();
    if cfg.techniques.contains(&Technique::Mixed) {
        for &m in &models {
            let mixed = find(m, &Technique::Mixed)?;
            for r in &regions {
                let single = Technique::Single(r.clone());
                if !cfg.techniques.contains(&single) {
                    continue;
                }
                let reduction = delta_bias(find(m, &single)?.cv.mean_mse, mixed.cv.mean_mse)
                    .map_err(Error::stage(format!("delta {m} {r}")))?;
                deltas.push(DeltaCell {
                    model: m,
                    region: r.clone(),
                    reduction,
                });
            }
        }
    }

    let mut significance = Vec::new();
    for &m in &models {
        for (i, a) in cfg.techniques.iter().enumerate() {
            for b in &cfg.techniques[i + 1..] {
                let (ca, cb) = (find(m, a)?, find(m, b)?);
                let tt = paired_t_test(&ca.cv.fold_mses, &cb.cv.fold_mses)
                    .map_err(Error::stage(format!("t-test {m} {a} vs {b}")))?;
                significance.push(SignificanceCell {
                    model: m,
                    a: a.clone(),
                    b: b.clone(),
                    t: tt.t.is_finite().then_some(tt.t),
                    p: tt.p,
                    df: tt.df,
                    intervals_overlap: intervals_overlap(
                        ca.cv.mean_mse,
                        ca.cv.error_bar,
                        cb.cv.mean_mse,
                        cb.cv.error_bar,
                    ),
                });
            }
        }
    }

    Ok(BenchmarkReport {
        protocol: cfg.evaluation.protocol,
        leak_safe: cfg.evaluation.leak_safe,
        master_seed: cfg.master_seed,
        models,
        techniques: cfg.techniques.clone(),
        regions,
        grid,
        delta_bias: deltas,
        significance,
        diagnostics,
        config: cfg.clone(),
        timings,
    })
}

/// Runs the benchmark on a dedicated pool of `threads` workers (rayon's
/// default when `None`).
pub fn run_benchmark_with_threads(cfg: &PipelineConfig, threads: Option<usize>) -> Result<BenchmarkReport> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("threads: cannot start worker pool: {e}")))?;
    pool.install(|| run_benchmark(cfg))
}
