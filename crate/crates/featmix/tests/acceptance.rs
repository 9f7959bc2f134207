//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use common::{parse_csv, table_fixture, TABLE1, TABLE_MODELS};
use featmix::emit::{render_bias_table, OUTPUT_FILES};
use featmix::{run_benchmark, run_benchmark_with_threads, BenchmarkReport, PipelineConfig, Protocol, Technique};
use featmix_core::augment::{augment, fidelity_report, AugmentConfig};
use featmix_core::data::split_holdout;
use featmix_core::eval::{intervals_overlap, kfold_split, paired_t_test, residual_region_means, CvResult};
use featmix_core::mixing::{empirical_moments, mix, mix_convex, predict_moments, MixConfig, MixMode};
use featmix_core::probe::LinearProbe;
use featmix_core::regressors::{
    ForestParams, Hyperparams, KnnRegressor, ModelKind, ModelSpec, Predictor, RandomForest, RegressionTree,
    SvrModel, SvrParams, TreeParams,
};
use featmix_core::synthgen::{generate_suite, GeneratorConfig, CENTERED_OFFSET_UNITS, DEFAULT_OFFSET_UNITS};
use featmix_core::{Dataset, Region, Sample, SeedSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let took = start.elapsed();
    if took > limit {
        Err(format!("took {:.1} s, limit {:.0} s", took.as_secs_f64(), limit.as_secs_f64()))
    } else {
        Ok(())
    }
}

fn default_suite(n: usize, units: [f64; 3], seed: u64) -> Vec<Dataset> {
    generate_suite(&GeneratorConfig::default_suite(n, units, SeedSpec::new(seed, "generate"))).unwrap()
}

// 1 ------------------------------------------------------------------------

fn reference_arithmetic() -> Outcome {
    let start = Instant::now();
    let rows = parse_csv(&render_bias_table(&table_fixture()).map_err(|e| e.to_string())?.csv);
    let mut worst: f64 = 0.0;
    for (i, expected) in TABLE1.iter().enumerate() {
        let row = &rows[i + 1];
        ensure!(row[0] == TABLE_MODELS[i].as_str(), "row {i} is {}", row[0]);
        for (cell, e) in row[1..].iter().zip(expected) {
            let v: f64 = cell.parse().map_err(|_| format!("bad cell {cell}"))?;
            worst = worst.max((v - e).abs());
        }
    }
    ensure!(worst <= 0.01, "largest deviation {worst:.4} pp");
    within(Duration::from_secs(1), start)?;
    Ok(format!("12 cells and 4 averages, largest deviation {worst:.4} pp"))
}

// 2 ------------------------------------------------------------------------

fn moment_identity() -> Outcome {
    let start = Instant::now();
    let regions = default_suite(765, DEFAULT_OFFSET_UNITS, 7);
    let noise = featmix_core::mixing::relative_noise_sd(&regions, 0.05).unwrap();
    let cfg = MixConfig::equal(3, noise, MixMode::ConvexBlend, 100_000, SeedSpec::new(7, "mix"));
    let mixed = mix_convex(&regions, &cfg).unwrap().dataset;
    let stats: Vec<_> = regions.iter().map(|d| empirical_moments(d).unwrap()).collect();
    let predicted = predict_moments(&stats, &cfg).unwrap();
    let (mean, var) = empirical_moments(&mixed).unwrap();
    let mut worst: f64 = 0.0;
    for j in 0..mean.len() {
        worst = worst.max((mean[j] - predicted.mean[j]).abs() / predicted.mean[j].abs());
        worst = worst.max((var[j] - predicted.variance[j]).abs() / predicted.variance[j]);
    }
    ensure!(worst <= 0.01, "largest relative error {worst:.4}");
    within(Duration::from_secs(10), start)?;
    Ok(format!("1e5 blended rows, largest relative error {:.3}%", worst * 100.0))
}

// 3 ------------------------------------------------------------------------

fn augmentation_fidelity() -> Outcome {
    let start = Instant::now();
    let regions = default_suite(765, DEFAULT_OFFSET_UNITS, 11);
    let (mut max_d, mut min_p): (f64, f64) = (0.0, 1.0);
    for (r, d) in regions.iter().enumerate() {
        let cfg = AugmentConfig::new(SeedSpec::new(11, format!("augment/r{r}")));
        let out = augment(d, &cfg).unwrap().dataset;
        let ks = fidelity_report(d, &out).unwrap();
        max_d = max_d.max(ks.overall_max_d);
        min_p = min_p.min(ks.min_p());
    }
    ensure!(max_d <= 0.05, "overall max D {max_d:.4}");
    ensure!(min_p > 0.05, "smallest p {min_p:.4}");
    within(Duration::from_secs(10), start)?;
    Ok(format!("max D {max_d:.4}, min p {min_p:.3} over 3 regions x 2 features"))
}

// 4 ------------------------------------------------------------------------

fn quick_models() -> Vec<ModelSpec> {
    let mut cfg = PipelineConfig::default();
    cfg.apply_quick();
    cfg.models
}

fn directional_config(n: usize, units: [f64; 3], seed: u64, protocol: Protocol) -> PipelineConfig {
    let mut cfg = PipelineConfig {
        master_seed: seed,
        models: quick_models(),
        techniques: vec![Technique::Single(Region::new("r2")), Technique::Mixed],
        ..PipelineConfig::default()
    };
    let g = GeneratorConfig::default_suite(n, units, SeedSpec::new(seed, ""));
    cfg.generator = featmix::config::GeneratorSection::from_config(g);
    cfg.augment.enabled = false;
    cfg.evaluation.protocol = protocol;
    cfg
}

fn worst_region_deltas(report: &BenchmarkReport) -> Vec<(ModelKind, f64)> {
    report
        .models
        .iter()
        .map(|&m| (m, report.delta(m, &Region::new("r2")).unwrap().delta_percent))
        .collect()
}

fn directional_bias_reduction() -> Outcome {
    let start = Instant::now();
    let seeds: Vec<u64> = (1..=10).collect();

    let mut positive = 0;
    let mut worst_seen = f64::INFINITY;
    for &s in &seeds {
        let cfg = directional_config(2000, DEFAULT_OFFSET_UNITS, s, Protocol::PaperFaithful);
        let report = run_benchmark(&cfg).map_err(|e| e.to_string())?;
        let deltas = worst_region_deltas(&report);
        worst_seen = deltas.iter().map(|d| d.1).fold(worst_seen, f64::min);
        if deltas.iter().all(|d| d.1 > 0.0) {
            positive += 1;
        }
    }
    ensure!(positive >= 8, "all four models positive in only {positive} of 10 seeds");

    let scales = [0.5, 1.0, 2.0];
    let mut monotone: BTreeMap<ModelKind, usize> = BTreeMap::new();
    for &s in &seeds {
        let mut series: BTreeMap<ModelKind, Vec<f64>> = BTreeMap::new();
        for scale in scales {
            let units = DEFAULT_OFFSET_UNITS.map(|u| u * scale);
            let cfg = directional_config(2000, units, s, Protocol::CrossContext);
            let report = run_benchmark(&cfg).map_err(|e| e.to_string())?;
            for (m, d) in worst_region_deltas(&report) {
                series.entry(m).or_default().push(d);
            }
        }
        for (m, v) in series {
            if v.windows(2).all(|w| w[1] >= w[0]) {
                *monotone.entry(m).or_default() += 1;
            }
        }
    }
    for m in ModelKind::ALL {
        let c = monotone.get(&m).copied().unwrap_or(0);
        ensure!(2 * c > seeds.len(), "{m}: nondecreasing in only {c} of 10 seeds");
    }
    within(Duration::from_secs(600), start)?;
    let counts: Vec<String> = monotone.iter().map(|(m, c)| format!("{m} {c}/10")).collect();
    Ok(format!(
        "positive for all models in {positive}/10 seeds (smallest {worst_seen:.1}%); monotone in offset: {}",
        counts.join(", ")
    ))
}

// 5 ------------------------------------------------------------------------

fn sd(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn residual_centering() -> Outcome {
    let start = Instant::now();
    let n = 10_000;
    let suite = default_suite(n, CENTERED_OFFSET_UNITS, 21);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (r, d) in suite.iter().enumerate() {
        let (a, b) = split_holdout(d, 0.2, &SeedSpec::new(21, format!("holdout/r{r}"))).unwrap();
        train.push(a);
        test.push(b);
    }
    let noise = featmix_core::mixing::relative_noise_sd(&train, 0.05).unwrap();
    let fit_cfg = MixConfig::equal(3, noise, MixMode::ConvexBlend, n, SeedSpec::new(21, "mix/train"));
    let mixed_train = mix(&train, &fit_cfg).unwrap().dataset;
    // Fresh blends of held-out rows only, labelled by diagnostic source.
    let eval_cfg = MixConfig::equal(3, noise, MixMode::ConvexBlend, 4 * n, SeedSpec::new(21, "mix/eval"));
    let eval = mix(&test, &eval_cfg).unwrap().diagnostic_view().unwrap();
    let sigma_y = sd(&eval.targets());
    let limit = 0.05 * sigma_y;

    let mut models: Vec<(String, Box<dyn Predictor>)> =
        vec![("linear probe".into(), Box::new(LinearProbe::fit(&mixed_train).unwrap()))];
    for spec in quick_models() {
        let model = Hyperparams::new(spec.clone(), SeedSpec::new(21, "model")).train(&mixed_train).unwrap();
        models.push((spec.kind().to_string(), Box::new(model)));
    }
    let mut worst: f64 = 0.0;
    for (name, model) in &models {
        for (region, m) in residual_region_means(model.as_ref(), std::slice::from_ref(&eval)).unwrap() {
            ensure!(m.abs() <= limit, "{name} residual mean {m:.4} in {region} exceeds {limit:.4}");
            worst = worst.max(m.abs());
        }
    }
    within(Duration::from_secs(120), start)?;
    Ok(format!("largest |mean residual| {worst:.4} <= 0.05 sd_y = {limit:.4} (probe and 4 models x 3 regions)"))
}

// 6 ------------------------------------------------------------------------

fn random_dataset(n: usize, m: usize, grid: bool, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..m)
                .map(|_| {
                    let v: f64 = rng.random_range(-3.0..3.0);
                    if grid {
                        v.round()
                    } else {
                        v
                    }
                })
                .collect();
            let y = x.iter().map(|v| v.sin()).sum::<f64>() + rng.random_range(-0.2..0.2);
            Sample::new(x, y, None)
        })
        .collect();
    Dataset::new((0..m).map(|j| format!("f{j}")).collect(), "y", samples).unwrap()
}

fn oracle_equivalences() -> Outcome {
    let start = Instant::now();
    let train = random_dataset(300, 3, true, 1);
    let queries = random_dataset(200, 3, false, 2);
    let k = 5;
    let knn = KnnRegressor::fit(&train, k).unwrap();
    for q in queries.samples() {
        let mut all: Vec<(f64, usize)> = train
            .samples()
            .iter()
            .enumerate()
            .map(|(i, s)| (s.features.iter().zip(&q.features).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let expect = all[..k].iter().map(|&(_, i)| train.samples()[i].target).sum::<f64>() / k as f64;
        ensure!(knn.predict(&q.features).unwrap() == expect, "KNN differs from exhaustive search");
    }

    let params = ForestParams {
        n_trees: 1,
        bootstrap: false,
        tree: TreeParams::default(),
    };
    let rf = RandomForest::fit(&train, &params, &SeedSpec::new(1, "rf")).unwrap();
    let dt = RegressionTree::fit(&train, &TreeParams::default()).unwrap();
    for q in queries.samples() {
        ensure!(rf.predict(&q.features).unwrap() == dt.predict(&q.features).unwrap(), "RF(1) differs from DT");
    }

    let samples = (0..20)
        .map(|i| {
            let x = -2.0 + 4.0 * i as f64 / 19.0;
            Sample::new(vec![x], x, None)
        })
        .collect();
    let line = Dataset::new(vec!["x".into()], "y", samples).unwrap();
    let svr_params = SvrParams {
        c: 100.0,
        epsilon: 0.05,
        ..SvrParams::default()
    };
    let (svr, trace) = SvrModel::fit_traced(&line, &svr_params).unwrap();
    let mut worst_resid: f64 = 0.0;
    for s in line.samples() {
        worst_resid = worst_resid.max((svr.predict(&s.features).unwrap() - s.target).abs());
    }
    ensure!(worst_resid <= svr_params.epsilon + 1e-3, "SVR residual {worst_resid}");
    let mut balance = 0.0;
    for (a, b) in trace.alpha.iter().zip(&trace.alpha_star) {
        ensure!((0.0..=svr_params.c).contains(a) && (0.0..=svr_params.c).contains(b), "box violated");
        ensure!(a * b == 0.0, "complementary slackness violated");
        balance += a - b;
    }
    ensure!(balance.abs() <= 1e-6, "sum(alpha - alpha*) = {balance}");
    within(Duration::from_secs(30), start)?;
    Ok(format!(
        "KNN 200/200 exact, RF(1) == DT exact, SVR max residual {worst_resid:.4}, |sum| {:.1e}",
        balance.abs()
    ))
}

// 7 ------------------------------------------------------------------------

fn cv_machinery() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..500 {
        let n = rng.random_range(2..400usize);
        let k = rng.random_range(2..=n.min(60));
        let folds = kfold_split(n, k, &SeedSpec::new(case, "folds")).unwrap();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        ensure!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1, "unbalanced folds n={n} k={k}");
        let mut all = folds.concat();
        all.sort_unstable();
        ensure!(all == (0..n).collect::<Vec<_>>(), "not a partition for n={n} k={k}");
    }
    for _ in 0..500 {
        let len = rng.random_range(2..30usize);
        let xs: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..10.0)).collect();
        let r = CvResult::from_fold_mses(xs.clone()).unwrap();
        let mean = xs.iter().sum::<f64>() / len as f64;
        let sem = sd(&xs) / (len as f64).sqrt();
        ensure!((r.mean_mse - mean).abs() <= 1e-12, "mean {} vs {mean}", r.mean_mse);
        ensure!((r.sem - sem).abs() <= 1e-12, "sem {} vs {sem}", r.sem);
        ensure!((r.error_bar - 2.0 * sem).abs() <= 1e-12, "bar {} vs {}", r.error_bar, 2.0 * sem);
    }
    let fx = CvResult::from_fold_mses(vec![1.0, 1.0, 3.0, 3.0]).unwrap();
    ensure!((fx.sem - 0.5774).abs() < 5e-5 && (fx.error_bar - 1.1547).abs() < 5e-5, "fixture {fx:?}");
    within(Duration::from_secs(10), start)?;
    Ok(format!("500 partitions, 500 brute-force checks, [1,1,3,3] -> sem {:.4}, bar {:.4}", fx.sem, fx.error_bar))
}

// 8 ------------------------------------------------------------------------

fn statistical_reporting() -> Outcome {
    let t = paired_t_test(&[1.0, 2.0, 3.0, 4.0], &[0.0; 4]).unwrap();
    ensure!((t.t - 3.873).abs() <= 1e-3, "t = {}", t.t);
    ensure!((t.p - 0.0305).abs() <= 5e-4, "p = {}", t.p);
    ensure!(t.df == 3, "df = {}", t.df);

    let run = quick_run()?;
    let start = Instant::now();
    let text = std::fs::read_to_string(run.dir.join("fig3_errorbars.csv")).map_err(|e| e.to_string())?;
    let rows = parse_csv(&text);
    let mut cells = BTreeMap::new();
    for r in rows.iter().filter(|r| r[0] == "cell") {
        let parse = |s: &str| s.parse::<f64>().map_err(|e| e.to_string());
        cells.insert((r[1].clone(), r[2].clone()), (parse(&r[3])?, parse(&r[4])?));
    }
    let mut pairs = 0;
    for r in rows.iter().filter(|r| r[0] == "pair") {
        let a = cells[&(r[1].clone(), r[2].clone())];
        let b = cells[&(r[1].clone(), r[5].clone())];
        let flag = r[6] == "true";
        ensure!(flag == intervals_overlap(a.0, a.1, b.0, b.1), "flag mismatch {:?}", r);
        let m: ModelKind = r[1].parse().map_err(|e: featmix_core::Error| e.to_string())?;
        let sig = run
            .report
            .significance(m, &r[2].parse()?, &r[5].parse()?)
            .ok_or("pair missing from report")?;
        ensure!(sig.intervals_overlap == flag, "report flag differs for {:?}", r);
        pairs += 1;
    }
    ensure!(cells.len() == 24 && pairs == 4 * 15, "{} cells, {pairs} pairs", cells.len());
    within(Duration::from_secs(1), start)?;
    Ok(format!("t {:.3}, p {:.4}, df 3; {pairs} overlap flags agree", t.t, t.p))
}

// 9 ------------------------------------------------------------------------

fn determinism_and_scaling() -> Outcome {
    let start = Instant::now();
    let mut cfg = PipelineConfig::default();
    cfg.apply_quick();
    cfg.master_seed = 2024;
    let one = run_benchmark_with_threads(&cfg, Some(1)).map_err(|e| e.to_string())?;
    let two = run_benchmark_with_threads(&cfg, Some(2)).map_err(|e| e.to_string())?;
    let (a, b) = (one.to_json_without_timings().unwrap(), two.to_json_without_timings().unwrap());
    ensure!(a == b, "reports differ between 1 and 2 threads");
    let run = quick_run()?;
    let shared = std::fs::read_to_string(run.dir.join("report.json")).map_err(|e| e.to_string())?;
    let shared = BenchmarkReport::from_json(&shared).map_err(|e| e.to_string())?;
    let mut quick = PipelineConfig::default();
    quick.apply_quick();
    let again = run_benchmark_with_threads(&quick, Some(2)).map_err(|e| e.to_string())?;
    ensure!(
        shared.to_json_without_timings().unwrap() == again.to_json_without_timings().unwrap(),
        "CLI report differs from an in-process rerun"
    );

    let time_mix = |n: usize| -> f64 {
        let regions = default_suite(n, DEFAULT_OFFSET_UNITS, 3);
        let cfg = MixConfig::equal(3, 0.05, MixMode::ConvexBlend, n, SeedSpec::new(3, "mix"));
        (0..5)
            .map(|_| {
                let t = Instant::now();
                let out = mix_convex(&regions, &cfg).unwrap();
                let e = t.elapsed().as_secs_f64();
                assert_eq!(out.dataset.len(), n);
                e
            })
            .fold(f64::INFINITY, f64::min)
    };
    let n = 100_000;
    let (t1, t2) = (time_mix(n), time_mix(2 * n));
    let ratio = t2 / t1;
    ensure!(ratio <= 2.6, "mix_convex 2N/N time ratio {ratio:.2}");
    within(Duration::from_secs(120), start)?;
    Ok(format!(
        "identical reports at 1 and 2 threads and from the CLI; mix_convex 2N/N ratio {ratio:.2}"
    ))
}

// 10 -----------------------------------------------------------------------

struct QuickRun {
    dir: PathBuf,
    report: BenchmarkReport,
    seconds: f64,
    _tmp: tempfile::TempDir,
}

static QUICK: OnceLock<Result<QuickRun, String>> = OnceLock::new();

fn quick_run() -> Result<&'static QuickRun, String> {
    QUICK
        .get_or_init(|| {
            let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
            let dir = tmp.path().join("out");
            let start = Instant::now();
            let out = Command::new(env!("CARGO_BIN_EXE_featmix"))
                .args(["benchmark", "--quick", "--out"])
                .arg(&dir)
                .output()
                .map_err(|e| e.to_string())?;
            let seconds = start.elapsed().as_secs_f64();
            if !out.status.success() {
                return Err(format!(
                    "exit {:?}: {}",
                    out.status.code(),
                    String::from_utf8_lossy(&out.stderr)
                ));
            }
            let text = std::fs::read_to_string(dir.join("report.json")).map_err(|e| e.to_string())?;
            let report = BenchmarkReport::from_json(&text).map_err(|e| e.to_string())?;
            Ok(QuickRun {
                dir,
                report,
                seconds,
                _tmp: tmp,
            })
        })
        .as_ref()
        .map_err(Clone::clone)
}

fn end_to_end_smoke() -> Outcome {
    let run = quick_run()?;
    for f in OUTPUT_FILES {
        ensure!(run.dir.join(f).is_file(), "missing {f}");
    }
    let r = &run.report;
    ensure!(r.models.len() == 4 && r.techniques.len() == 6, "{}x{} grid", r.models.len(), r.techniques.len());
    for &m in &r.models {
        for t in &r.techniques {
            ensure!(r.cell(m, t).is_some(), "missing cell {m} {t}");
            ensure!(r.cell_seconds(m, t).is_some_and(|s| s > 0.0), "no positive timing for {m} {t}");
        }
    }
    ensure!(r.grid.len() == 24, "{} grid cells", r.grid.len());
    ensure!(run.seconds < 60.0, "took {:.1} s", run.seconds);
    Ok(format!("exit 0 in {:.1} s, {} files, 4x6 grid", run.seconds, OUTPUT_FILES.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("reference arithmetic", reference_arithmetic),
        ("moment identity", moment_identity),
        ("augmentation fidelity", augmentation_fidelity),
        ("directional bias reduction", directional_bias_reduction),
        ("residual centering", residual_centering),
        ("oracle equivalences", oracle_equivalences),
        ("cv and sem machinery", cv_machinery),
        ("statistical reporting", statistical_reporting),
        ("determinism and scaling", determinism_and_scaling),
        ("end-to-end smoke", end_to_end_smoke),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != i + 1) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.1} s]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
