#![allow(dead_code)]

use featmix::bench::{assemble, CellTiming, Diagnostics, GridCell, Timings};
use featmix::{BenchmarkReport, PipelineConfig, Technique};
use featmix_core::eval::CvResult;
use featmix_core::regressors::{ModelKind, ModelSpec};
use featmix_core::Region;

/// Reference MSE grid: rows DT, RF, SVR, KNN; columns three regions then mixed.
pub const TABLE2: [[f64; 4]; 4] = [
    [0.054, 0.084, 0.212, 0.046],
    [0.032, 0.050, 0.125, 0.027],
    [0.094, 0.113, 0.164, 0.076],
    [0.031, 0.049, 0.125, 0.027],
];

/// Reductions implied by [`TABLE2`]: three regions then the row average.
pub const TABLE1: [[f64; 4]; 4] = [
    [14.81, 45.24, 78.30, 46.12],
    [15.63, 46.00, 78.40, 46.68],
    [19.15, 32.74, 53.66, 35.18],
    [12.90, 44.90, 78.40, 45.40],
];

pub const TABLE_MODELS: [ModelKind; 4] = [ModelKind::Dt, ModelKind::Rf, ModelKind::Svr, ModelKind::Knn];

/// Ten folds alternating `mean +- a`, with `a` chosen so the error bar
/// (twice the SEM) equals `bar`.
pub fn cv(mean: f64, bar: f64) -> CvResult {
    let a = 1.5 * bar;
    let folds = (0..10).map(|i| if i % 2 == 0 { mean + a } else { mean - a }).collect();
    CvResult::from_fold_mses(folds).unwrap()
}

/// A report over `models` x `techniques` whose cell `(i, j)` has
/// `cells[i][j] = (mean, bar)`.
pub fn fixture_report(models: &[ModelKind], techniques: &[Technique], cells: &[Vec<(f64, f64)>]) -> BenchmarkReport {
    let cfg = PipelineConfig {
        models: models.iter().map(|&m| ModelSpec::default_for(m)).collect(),
        techniques: techniques.to_vec(),
        ..PipelineConfig::default()
    };
    let mut grid = Vec::new();
    let mut timing = Vec::new();
    for (i, &m) in models.iter().enumerate() {
        for (j, t) in techniques.iter().enumerate() {
            let (mean, bar) = cells[i][j];
            grid.push(GridCell {
                model: m,
                technique: t.clone(),
                cv: cv(mean, bar),
                holdout_mse: mean,
                holdout_residual_means: Default::default(),
                convergence_warning: false,
            });
            timing.push(CellTiming {
                model: m,
                technique: t.clone(),
                seconds: 0.25 * (1 + i + j) as f64,
            });
        }
    }
    let diagnostics = Diagnostics {
        augmentation_ks: vec![],
        techniques: vec![],
        holdout_rows: 0,
    };
    let timings = Timings {
        stages: vec![],
        cells: timing,
    };
    assemble(&cfg, regions(), grid, diagnostics, timings).unwrap()
}

pub fn regions() -> Vec<Region> {
    (0..3).map(|r| Region::new(format!("r{r}"))).collect()
}

pub fn six_techniques() -> Vec<Technique> {
    Technique::default_grid(3)
}

/// [`TABLE2`] laid out over the six default techniques; SMOTE and
/// reweighting get arbitrary distinct values.
pub fn table_fixture() -> BenchmarkReport {
    let cells: Vec<Vec<(f64, f64)>> = TABLE2
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut v: Vec<(f64, f64)> = row.iter().map(|&m| (m, 0.004)).collect();
            v.push((0.06 + 0.01 * i as f64, 0.003));
            v.push((0.02 + 0.01 * i as f64, 0.005));
            v
        })
        .collect();
    fixture_report(&TABLE_MODELS, &six_techniques(), &cells)
}

/// One CSV body as rows of strings, header first.
pub fn parse_csv(text: &str) -> Vec<Vec<String>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    rdr.records().map(|r| r.unwrap().iter().map(str::to_string).collect()).collect()
}
