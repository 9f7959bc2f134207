//! The `featmix` command line.
//!
//! Exit codes: 0 on success, 2 for usage, config and input errors, 1 when a
//! pipeline stage fails at run time.

use std::ffi::OsString;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use featmix_core::augment::{augment, fidelity_report, KsReport};
use featmix_core::baselines::{reweight_resample, smote_balance};
use featmix_core::eval::{cross_validate, CvResult};
use featmix_core::mixing::{mix, MixMode};
use featmix_core::regressors::{Learner, ModelKind};
use featmix_core::synthgen::generate_suite;
use featmix_core::{Dataset, Region, SeedSpec};
use serde::Serialize;

use crate::bench::{check_moments, run_benchmark_with_threads, MomentCheck};
use crate::config::{GeneratorSection, PipelineConfig, Protocol, Technique};
use crate::csv_io::{load_csv, write_csv, Sidecar, REGION_COLUMN};
use crate::emit;
use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "featmix", version, about = "Feature-mixing bias mitigation pipelines and benchmarks")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON pipeline config; every field is optional.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed for every stage.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for the benchmark grid.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Small suite and forests for smoke runs.
    #[arg(long, global = true)]
    pub quick: bool,
    /// Mixing mode.
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
    /// Technique(s): single:<region>, mixed, pooled, smote, reweight.
    #[arg(long, global = true, value_delimiter = ',')]
    pub technique: Vec<Technique>,
    /// Model(s): dt, rf, knn, svr.
    #[arg(long, global = true, value_delimiter = ',')]
    pub model: Vec<ModelKind>,
    /// Augment inside each training fold instead of before splitting.
    #[arg(long, global = true)]
    pub leak_safe: bool,
    /// Standardize features for every model.
    #[arg(long, global = true)]
    pub standardize_all: bool,
    /// Evaluation protocol.
    #[arg(long, global = true, value_enum)]
    pub protocol: Option<ProtocolArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Convex,
    Pooled,
}

impl From<ModeArg> for MixMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Convex => MixMode::ConvexBlend,
            ModeArg::Pooled => MixMode::Pooled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    PaperFaithful,
    CrossContext,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::PaperFaithful => Protocol::PaperFaithful,
            ProtocolArg::CrossContext => Protocol::CrossContext,
        }
    }
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Input CSV file(s). Rows without a region column are tagged with the
    /// file stem.
    #[arg(long = "input", short = 'i', required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Target column name (default: the generator's target name).
    #[arg(long)]
    pub target: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write one synthetic CSV per region.
    Generate,
    /// Noise-augment each input CSV.
    Augment {
        #[command(flatten)]
        input: InputArgs,
        /// Copies per original row.
        #[arg(long)]
        factor: Option<usize>,
        /// Feature noise as a multiple of the column sd.
        #[arg(long)]
        noise_scale: Option<f64>,
    },
    /// Mix the regions found in the input CSVs.
    Mix {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Run a SMOTE or reweighting baseline (`--technique smote|reweight`).
    Baseline {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Cross-validate the configured models on the input CSVs.
    Train {
        #[command(flatten)]
        input: InputArgs,
        /// Also write each model fit on all rows as JSON.
        #[arg(long)]
        save_models: bool,
    },
    /// Run the full benchmark grid and write every table and figure.
    Benchmark,
    /// Re-render tables and figures from a saved report.json.
    Report {
        /// A report.json written by `benchmark`.
        #[arg(long)]
        input: PathBuf,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code().clamp(0, 255) as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// File, then `--quick`, then the other flags.
pub fn resolve_config(g: &GlobalArgs) -> Result<PipelineConfig> {
    let mut cfg = match &g.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if g.quick {
        cfg.apply_quick();
    }
    if let Some(s) = g.seed {
        cfg.master_seed = s;
    }
    if let Some(o) = &g.out {
        cfg.out_dir = o.clone();
    }
    if g.threads.is_some() {
        cfg.threads = g.threads;
    }
    if let Some(m) = g.mode {
        cfg.mix.mode = m.into();
    }
    if !g.model.is_empty() {
        cfg.select_models(&g.model);
    }
    if g.leak_safe {
        cfg.evaluation.leak_safe = true;
    }
    if g.standardize_all {
        cfg.standardize_all = true;
    }
    if let Some(p) = g.protocol {
        cfg.evaluation.protocol = p.into();
    }
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = resolve_config(&cli.global)?;
    match cli.command {
        Command::Generate => {
            cfg.validate()?;
            cmd_generate(&cfg)
        }
        Command::Augment {
            input,
            factor,
            noise_scale,
        } => {
            if let Some(f) = factor {
                cfg.augment.expansion_factor = f;
            }
            if let Some(c) = noise_scale {
                cfg.augment.noise_scale = c;
            }
            cfg.validate()?;
            cmd_augment(&cfg, &input)
        }
        Command::Mix { input } => {
            cfg.validate()?;
            cmd_mix(&cfg, &input)
        }
        Command::Baseline { input } => {
            cfg.validate()?;
            let technique = match cli.global.technique.as_slice() {
                [t @ (Technique::Smote | Technique::Reweight)] => t.clone(),
                _ => {
                    return Err(Error::Usage(
                        "baseline needs exactly one `--technique`, smote or reweight".into(),
                    ))
                }
            };
            cmd_baseline(&cfg, &input, &technique)
        }
        Command::Train { input, save_models } => {
            cfg.validate()?;
            cmd_train(&cfg, &input, save_models)
        }
        Command::Benchmark => {
            if !cli.global.technique.is_empty() {
                cfg.techniques = cli.global.technique.clone();
            }
            cfg.validate()?;
            emit::check_techniques(&cfg.techniques)?;
            cmd_benchmark(&cfg)
        }
        Command::Report { input } => cmd_report(&cfg, &input),
    }
}

fn csv_text(dataset: &Dataset) -> String {
    let mut buf = Vec::new();
    write_csv(dataset, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

fn json_text<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn finish(dir: &Path, files: Vec<(String, String)>) -> Result<()> {
    for p in emit::write_all(dir, files)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into())
}

fn has_region_column(path: &Path) -> Result<bool> {
    let f = fs::File::open(path).map_err(|source| Error::Input {
        path: path.to_path_buf(),
        source,
    })?;
    let mut first = String::new();
    BufReader::new(f).read_line(&mut first).map_err(|source| Error::Input {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(first.trim_end().split(',').any(|h| h.trim().trim_matches('"') == REGION_COLUMN))
}

/// Loads a CSV, tagging every row with the file stem when the file has no
/// region column.
pub fn load_input(path: &Path, target: &str) -> Result<Dataset> {
    if has_region_column(path)? {
        return load_csv(path, target, Some(REGION_COLUMN));
    }
    let d = load_csv(path, target, None)?;
    let tag = Region::new(stem(path));
    Ok(d.with_regions(vec![tag; d.len()])?)
}

fn target_name<'a>(cfg: &'a PipelineConfig, input: &'a InputArgs) -> &'a str {
    input.target.as_deref().unwrap_or(&cfg.generator.target_name)
}

/// All rows of all inputs split by region tag, in tag order.
fn load_regions(cfg: &PipelineConfig, input: &InputArgs) -> Result<Vec<Dataset>> {
    let parts = input
        .inputs
        .iter()
        .map(|p| load_input(p, target_name(cfg, input)))
        .collect::<Result<Vec<_>>>()?;
    let all = Dataset::concat(&parts)?;
    Ok(all.by_region()?.into_values().collect())
}

#[derive(Serialize)]
struct GenerateReport<'a> {
    master_seed: u64,
    generator: &'a GeneratorSection,
    seed: SeedSpec,
    files: Vec<GeneratedFile>,
}

#[derive(Serialize)]
struct GeneratedFile {
    file: String,
    sidecar: Sidecar,
}

fn cmd_generate(cfg: &PipelineConfig) -> Result<()> {
    let gen = cfg.generator_config();
    let suite = generate_suite(&gen).map_err(Error::stage("generate"))?;
    let mut files = Vec::new();
    let mut listed = Vec::new();
    for d in &suite {
        let tag = d.regions().into_iter().next().map(|r| r.to_string()).unwrap_or_else(|| "region".into());
        let name = format!("{tag}.csv");
        listed.push(GeneratedFile {
            file: name.clone(),
            sidecar: Sidecar::describe(d, "generate", Some(gen.seed.child(&tag))),
        });
        files.push((name, csv_text(d)));
    }
    let report = GenerateReport {
        master_seed: cfg.master_seed,
        generator: &cfg.generator,
        seed: gen.seed.clone(),
        files: listed,
    };
    files.push(("generate.json".into(), json_text(&report)));
    finish(&cfg.out_dir, files)
}

#[derive(Serialize)]
struct AugmentEntry {
    input: PathBuf,
    output: String,
    rows_in: usize,
    rows_out: usize,
    seed: SeedSpec,
    ks: KsReport,
    log: Vec<String>,
}

fn cmd_augment(cfg: &PipelineConfig, input: &InputArgs) -> Result<()> {
    let mut files = Vec::new();
    let mut entries = Vec::new();
    for path in &input.inputs {
        let d = load_input(path, target_name(cfg, input))?;
        let label = Region::new(stem(path));
        let ac = cfg.augment_config(&label);
        let out = augment(&d, &ac).map_err(Error::stage(format!("augment {}", path.display())))?;
        let ks = fidelity_report(&d, &out.dataset).map_err(Error::stage(format!("fidelity {}", path.display())))?;
        for line in &out.log {
            eprintln!("{}: {line}", path.display());
        }
        let name = format!("{}_augmented.csv", stem(path));
        files.push((name.clone(), csv_text(&out.dataset)));
        entries.push(AugmentEntry {
            input: path.clone(),
            output: name,
            rows_in: d.len(),
            rows_out: out.dataset.len(),
            seed: ac.seed,
            ks,
            log: out.log,
        });
    }
    files.push(("augment_report.json".into(), json_text(&entries)));
    finish(&cfg.out_dir, files)
}

#[derive(Serialize)]
struct MixReport {
    mode: MixMode,
    regions: Vec<Region>,
    alpha: Vec<f64>,
    mix_noise_sd: f64,
    rows: usize,
    seed: SeedSpec,
    moment_check: Option<MomentCheck>,
}

fn cmd_mix(cfg: &PipelineConfig, input: &InputArgs) -> Result<()> {
    let regions = load_regions(cfg, input)?;
    let mc = cfg.mix_config(&regions, cfg.mix.mode)?;
    let out = mix(&regions, &mc)?;
    let moment_check = match mc.mode {
        MixMode::ConvexBlend => Some(check_moments(&regions, &out.dataset, &mc).map_err(Error::stage("moment check"))?),
        MixMode::Pooled => None,
    };
    let report = MixReport {
        mode: mc.mode,
        regions: regions.iter().flat_map(|d| d.regions()).collect(),
        alpha: mc.alpha.clone(),
        mix_noise_sd: mc.mix_noise_sd,
        rows: out.dataset.len(),
        seed: mc.seed.clone(),
        moment_check,
    };
    finish(
        &cfg.out_dir,
        vec![
            ("mixed.csv".into(), csv_text(&out.dataset)),
            ("mix_report.json".into(), json_text(&report)),
        ],
    )
}

#[derive(Serialize)]
struct BaselineReport {
    technique: Technique,
    regions: Vec<Region>,
    rows: usize,
    seed: SeedSpec,
    synthetic_rows: Option<usize>,
    weights: Option<Vec<(Region, f64)>>,
}

fn cmd_baseline(cfg: &PipelineConfig, input: &InputArgs, technique: &Technique) -> Result<()> {
    let regions = load_regions(cfg, input)?;
    let tags: Vec<Region> = regions.iter().flat_map(|d| d.regions()).collect();
    let (dataset, report) = match technique {
        Technique::Smote => {
            let c = cfg.smote_config();
            let out = smote_balance(&regions, &c)?;
            let report = BaselineReport {
                technique: technique.clone(),
                regions: tags,
                rows: out.dataset.len(),
                seed: c.seed,
                synthetic_rows: Some(out.synthetic.len()),
                weights: None,
            };
            (out.dataset, report)
        }
        _ => {
            let c = cfg.reweight_config();
            let out = reweight_resample(&regions, &c)?;
            let report = BaselineReport {
                technique: technique.clone(),
                regions: tags,
                rows: out.dataset.len(),
                seed: c.seed,
                synthetic_rows: None,
                weights: Some(out.weights),
            };
            (out.dataset, report)
        }
    };
    finish(
        &cfg.out_dir,
        vec![
            (format!("{technique}.csv"), csv_text(&dataset)),
            ("baseline_report.json".into(), json_text(&report)),
        ],
    )
}

#[derive(Serialize)]
struct TrainEntry {
    model: ModelKind,
    cv: CvResult,
    convergence_warning: bool,
}

#[derive(Serialize)]
struct TrainReport {
    rows: usize,
    k: usize,
    results: Vec<TrainEntry>,
}

fn cmd_train(cfg: &PipelineConfig, input: &InputArgs, save_models: bool) -> Result<()> {
    let parts = input
        .inputs
        .iter()
        .map(|p| load_input(p, target_name(cfg, input)))
        .collect::<Result<Vec<_>>>()?;
    let data = Dataset::concat(&parts)?;
    let mut files = Vec::new();
    let mut results = Vec::new();
    for spec in &cfg.models {
        let hp = cfg.hyperparams(spec);
        let stage = || format!("train {}", spec.kind());
        let cv = cross_validate(&hp, &data, cfg.evaluation.k, &cfg.seed("cv")).map_err(Error::stage(stage()))?;
        let model = hp.fit(&data, &hp.seed).map_err(Error::stage(stage()))?;
        if save_models {
            files.push((format!("model_{}.json", spec.kind()), json_text(&model)));
        }
        results.push(TrainEntry {
            model: spec.kind(),
            cv,
            convergence_warning: model.convergence_warning(),
        });
    }
    let report = TrainReport {
        rows: data.len(),
        k: cfg.evaluation.k,
        results,
    };
    files.push(("train_report.json".into(), json_text(&report)));
    finish(&cfg.out_dir, files)
}

fn cmd_benchmark(cfg: &PipelineConfig) -> Result<()> {
    let report = run_benchmark_with_threads(cfg, cfg.threads)?;
    for p in emit::emit_all(&report, &cfg.out_dir)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_report(cfg: &PipelineConfig, input: &Path) -> Result<()> {
    let text = fs::read_to_string(input).map_err(|source| Error::Input {
        path: input.to_path_buf(),
        source,
    })?;
    let report = crate::bench::BenchmarkReport::from_json(&text)?;
    let mut files: Vec<(String, String)> = Vec::new();
    let t1 = emit::render_bias_table(&report)?;
    let t2 = emit::render_mse_table(&report)?;
    let t3 = emit::render_timing_table(&report)?;
    for (name, body) in [
        (emit::TABLE1_CSV, t1.csv),
        (emit::TABLE1_MD, t1.markdown),
        (emit::TABLE2_CSV, t2.csv),
        (emit::TABLE2_MD, t2.markdown),
        (emit::TABLE3_CSV, t3.csv),
        (emit::TABLE3_MD, t3.markdown),
        (emit::HEATMAP_SVG, emit::render_heatmap_svg(&report)?),
        (emit::ERRORBARS_CSV, emit::render_errorbar_csv(&report)?),
    ] {
        files.push((name.to_string(), body));
    }
    finish(&cfg.out_dir, files)
}
