//! Renders a [`BenchmarkReport`] as CSV and markdown tables, an SVG heatmap
//! and the error-bar data file.
//!
//! Every renderer works in memory; files are written only once all of them
//! succeeded, and a failed write removes whatever this call already wrote.

use std::fs;
use std::path::{Path, PathBuf};

use featmix_core::eval::intervals_overlap;
use featmix_core::regressors::ModelKind;
use featmix_core::Region;

use crate::bench::BenchmarkReport;
use crate::config::Technique;
use crate::error::{Error, Result};

pub const REPORT_JSON: &str = "report.json";
pub const TABLE1_CSV: &str = "table1_bias_reduction.csv";
pub const TABLE1_MD: &str = "table1_bias_reduction.md";
pub const TABLE2_CSV: &str = "table2_mse.csv";
pub const TABLE2_MD: &str = "table2_mse.md";
pub const TABLE3_CSV: &str = "table3_timing.csv";
pub const TABLE3_MD: &str = "table3_timing.md";
pub const HEATMAP_SVG: &str = "fig2_heatmap.svg";
pub const ERRORBARS_CSV: &str = "fig3_errorbars.csv";

/// Every file [`emit_all`] writes, in write order.
pub const OUTPUT_FILES: [&str; 9] = [
    REPORT_JSON,
    TABLE1_CSV,
    TABLE1_MD,
    TABLE2_CSV,
    TABLE2_MD,
    TABLE3_CSV,
    TABLE3_MD,
    HEATMAP_SVG,
    ERRORBARS_CSV,
];

/// Techniques with a column in the timing table.
pub const TIMED: [Technique; 2] = [Technique::Mixed, Technique::Reweight];

/// Low end of the heatmap ramp (dark blue).
pub const RAMP_LOW: [u8; 3] = [8, 48, 107];
/// High end of the heatmap ramp (red).
pub const RAMP_HIGH: [u8; 3] = [203, 24, 29];

/// A rendered table in both formats.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub csv: String,
    pub markdown: String,
}

/// The single-region techniques present, in region order.
fn single_regions(report: &BenchmarkReport) -> Vec<Region> {
    report
        .regions
        .iter()
        .filter(|r| report.techniques.contains(&Technique::Single((*r).clone())))
        .cloned()
        .collect()
}

/// Fails unless every table can be rendered from a grid over `techniques`.
pub fn check_techniques(techniques: &[Technique]) -> Result<()> {
    if !techniques.contains(&Technique::Mixed) {
        return Err(Error::Usage("the report tables need the `mixed` technique".into()));
    }
    if !techniques.iter().any(|t| matches!(t, Technique::Single(_))) {
        return Err(Error::Usage(
            "the report tables need at least one `single:<region>` technique".into(),
        ));
    }
    Ok(())
}

fn csv_string(header: &[String], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory cannot fail");
    for r in rows {
        w.write_record(r).expect("writing to memory cannot fail");
    }
    String::from_utf8(w.into_inner().expect("writing to memory cannot fail")).expect("CSV of UTF-8 fields")
}

fn markdown(header: &[String], rows: &[Vec<String>]) -> String {
    let esc = |s: &str| s.replace('|', "\\|");
    let mut out = String::new();
    out.push_str(&format!("| {} |\n", header.iter().map(|h| esc(h)).collect::<Vec<_>>().join(" | ")));
    let align: Vec<&str> = (0..header.len()).map(|i| if i == 0 { "---" } else { "---:" }).collect();
    out.push_str(&format!("|{}|\n", align.join("|")));
    for r in rows {
        out.push_str(&format!("| {} |\n", r.iter().map(|c| esc(c)).collect::<Vec<_>>().join(" | ")));
    }
    out
}

/// Builds both renderings from one numeric grid. CSV keeps full precision,
/// markdown rounds to `decimals`.
fn numeric_table(first: &str, columns: &[String], rows: &[(ModelKind, Vec<f64>)], decimals: usize) -> Table {
    let header: Vec<String> = std::iter::once(first.to_string()).chain(columns.iter().cloned()).collect();
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|(m, v)| std::iter::once(m.as_str().to_string()).chain(v.iter().map(|x| x.to_string())).collect())
        .collect();
    let md_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|(m, v)| {
            std::iter::once(m.label().to_string())
                .chain(v.iter().map(|x| format!("{x:.decimals$}")))
                .collect()
        })
        .collect();
    Table {
        csv: csv_string(&header, &csv_rows),
        markdown: markdown(&header, &md_rows),
    }
}

fn missing(what: String) -> Error {
    Error::Format {
        source_name: "report".into(),
        message: format!("incomplete report: no {what}"),
    }
}

/// Percentage MSE reduction of mixed against each single region, plus the
/// row average.
pub fn render_bias_table(report: &BenchmarkReport) -> Result<Table> {
    check_techniques(&report.techniques)?;
    let regions = single_regions(report);
    let mut rows = Vec::new();
    for &m in &report.models {
        let mut v = Vec::with_capacity(regions.len() + 1);
        for r in &regions {
            let d = report.delta(m, r).ok_or_else(|| missing(format!("bias reduction for {m} in {r}")))?;
            v.push(d.delta_percent);
        }
        v.push(v.iter().sum::<f64>() / regions.len() as f64);
        rows.push((m, v));
    }
    let mut columns: Vec<String> = regions.iter().map(|r| r.to_string()).collect();
    columns.push("average".into());
    Ok(numeric_table("model", &columns, &rows, 2))
}

/// Cross-validated MSE for each single region and for mixed.
pub fn render_mse_table(report: &BenchmarkReport) -> Result<Table> {
    check_techniques(&report.techniques)?;
    let regions = single_regions(report);
    let techniques: Vec<Technique> = regions
        .iter()
        .map(|r| Technique::Single(r.clone()))
        .chain([Technique::Mixed])
        .collect();
    let mut rows = Vec::new();
    for &m in &report.models {
        let v = techniques
            .iter()
            .map(|t| {
                report
                    .cell(m, t)
                    .map(|c| c.cv.mean_mse)
                    .ok_or_else(|| missing(format!("grid cell for {m} on {t}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((m, v));
    }
    let mut columns: Vec<String> = regions.iter().map(|r| r.to_string()).collect();
    columns.push("mixed".into());
    Ok(numeric_table("model", &columns, &rows, 4))
}

/// Per-cell training and evaluation seconds for the timed techniques present.
pub fn render_timing_table(report: &BenchmarkReport) -> Result<Table> {
    let timed: Vec<&Technique> = TIMED.iter().filter(|t| report.techniques.contains(t)).collect();
    if timed.is_empty() {
        return Err(Error::Usage("the timing table needs the `mixed` or `reweight` technique".into()));
    }
    let mut rows = Vec::new();
    for &m in &report.models {
        let v = timed
            .iter()
            .map(|t| report.cell_seconds(m, t).ok_or_else(|| missing(format!("timing for {m} on {t}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push((m, v));
    }
    let columns: Vec<String> = timed.iter().map(|t| t.to_string()).collect();
    Ok(numeric_table("model", &columns, &rows, 3))
}

/// Linear interpolation between the ramp ends; `t` is clamped to [0, 1].
pub fn ramp_color(t: f64) -> [u8; 3] {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.5 };
    let mut c = [0u8; 3];
    for i in 0..3 {
        let (a, b) = (RAMP_LOW[i] as f64, RAMP_HIGH[i] as f64);
        c[i] = (a + t * (b - a)).round() as u8;
    }
    c
}

pub fn hex(c: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Fill colour of each grid cell, rows = models, columns = techniques.
pub fn heatmap_colors(report: &BenchmarkReport) -> Result<Vec<Vec<[u8; 3]>>> {
    let values = heatmap_values(report)?;
    let flat = values.iter().flatten().copied();
    let lo = flat.clone().fold(f64::INFINITY, f64::min);
    let hi = flat.fold(f64::NEG_INFINITY, f64::max);
    Ok(values
        .iter()
        .map(|row| {
            row.iter()
                .map(|&v| if hi > lo { ramp_color((v - lo) / (hi - lo)) } else { ramp_color(0.5) })
                .collect()
        })
        .collect())
}

fn heatmap_values(report: &BenchmarkReport) -> Result<Vec<Vec<f64>>> {
    if report.techniques.is_empty() || report.models.is_empty() {
        return Err(Error::Usage("the heatmap needs at least one model and one technique".into()));
    }
    report
        .models
        .iter()
        .map(|&m| {
            report
                .techniques
                .iter()
                .map(|t| {
                    report
                        .cell(m, t)
                        .map(|c| c.cv.mean_mse)
                        .ok_or_else(|| missing(format!("grid cell for {m} on {t}")))
                })
                .collect()
        })
        .collect()
}

pub fn render_heatmap_svg(report: &BenchmarkReport) -> Result<String> {
    const CELL_W: usize = 110;
    const CELL_H: usize = 44;
    const LEFT: usize = 130;
    const TOP: usize = 64;
    let values = heatmap_values(report)?;
    let colors = heatmap_colors(report)?;
    let width = LEFT + CELL_W * report.techniques.len() + 20;
    let height = TOP + CELL_H * report.models.len() + 20;

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"13\">\n"
    ));
    s.push_str(&format!(
        "  <text x=\"{LEFT}\" y=\"22\" font-size=\"15\">Cross-validated MSE by model and technique</text>\n"
    ));
    for (j, t) in report.techniques.iter().enumerate() {
        let x = LEFT + j * CELL_W + CELL_W / 2;
        s.push_str(&format!(
            "  <text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            TOP - 10,
            xml_escape(&t.to_string())
        ));
    }
    for (i, m) in report.models.iter().enumerate() {
        let y = TOP + i * CELL_H;
        s.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            LEFT - 10,
            y + CELL_H / 2 + 5,
            xml_escape(m.label())
        ));
        for (j, v) in values[i].iter().enumerate() {
            let x = LEFT + j * CELL_W;
            s.push_str(&format!(
                "  <rect class=\"cell\" data-model=\"{m}\" data-technique=\"{}\" x=\"{x}\" y=\"{y}\" width=\"{CELL_W}\" height=\"{CELL_H}\" fill=\"{}\" stroke=\"#ffffff\"/>\n",
                xml_escape(&report.techniques[j].to_string()),
                hex(colors[i][j])
            ));
            s.push_str(&format!(
                "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"#ffffff\">{v:.4}</text>\n",
                x + CELL_W / 2,
                y + CELL_H / 2 + 5
            ));
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// One `cell` record per grid cell, then one `pair` record per technique
/// pair and model with the overlap flag.
pub fn render_errorbar_csv(report: &BenchmarkReport) -> Result<String> {
    let header: Vec<String> = ["record", "model", "technique", "mean_mse", "bar", "versus", "intervals_overlap"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut rows = Vec::new();
    for &m in &report.models {
        for t in &report.techniques {
            let c = report.cell(m, t).ok_or_else(|| missing(format!("grid cell for {m} on {t}")))?;
            rows.push(vec![
                "cell".into(),
                m.to_string(),
                t.to_string(),
                c.cv.mean_mse.to_string(),
                c.cv.error_bar.to_string(),
                String::new(),
                String::new(),
            ]);
        }
    }
    for &m in &report.models {
        for (i, a) in report.techniques.iter().enumerate() {
            for b in &report.techniques[i + 1..] {
                let (ca, cb) = (report.cell(m, a), report.cell(m, b));
                let (ca, cb) = ca.zip(cb).ok_or_else(|| missing(format!("grid cells for {m} on {a} and {b}")))?;
                let overlap = intervals_overlap(ca.cv.mean_mse, ca.cv.error_bar, cb.cv.mean_mse, cb.cv.error_bar);
                rows.push(vec![
                    "pair".into(),
                    m.to_string(),
                    a.to_string(),
                    String::new(),
                    String::new(),
                    b.to_string(),
                    overlap.to_string(),
                ]);
            }
        }
    }
    Ok(csv_string(&header, &rows))
}

/// Writes `files` under `dir`; on the first failure removes the files this
/// call wrote and returns the error.
pub(crate) fn write_all<N: AsRef<str>>(dir: &Path, files: Vec<(N, String)>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| Error::Output {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = dir.join(name.as_ref());
        if let Err(source) = fs::write(&path, body) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            return Err(Error::Output { path, source });
        }
        written.push(path);
    }
    Ok(written)
}

fn table_files(report: &BenchmarkReport) -> Result<Vec<(&'static str, String)>> {
    let t1 = render_bias_table(report)?;
    let t2 = render_mse_table(report)?;
    let t3 = render_timing_table(report)?;
    Ok(vec![
        (TABLE1_CSV, t1.csv),
        (TABLE1_MD, t1.markdown),
        (TABLE2_CSV, t2.csv),
        (TABLE2_MD, t2.markdown),
        (TABLE3_CSV, t3.csv),
        (TABLE3_MD, t3.markdown),
    ])
}

pub fn emit_tables(report: &BenchmarkReport, dir: &Path) -> Result<()> {
    write_all(dir, table_files(report)?).map(|_| ())
}

fn write_one(path: &Path, body: String) -> Result<()> {
    fs::write(path, body).map_err(|source| Error::Output {
        path: path.to_path_buf(),
        source,
    })
}

pub fn emit_heatmap_svg(report: &BenchmarkReport, path: &Path) -> Result<()> {
    write_one(path, render_heatmap_svg(report)?)
}

pub fn emit_errorbar_data(report: &BenchmarkReport, path: &Path) -> Result<()> {
    write_one(path, render_errorbar_csv(report)?)
}

/// The full output layout under `dir`.
pub fn emit_all(report: &BenchmarkReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = vec![(REPORT_JSON, report.to_json()?)];
    files.extend(table_files(report)?);
    files.push((HEATMAP_SVG, render_heatmap_svg(report)?));
    files.push((ERRORBARS_CSV, render_errorbar_csv(report)?));
    write_all(dir, files)
}
