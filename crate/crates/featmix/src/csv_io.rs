//! CSV persistence for datasets plus an optional JSON sidecar.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so
//! `load_csv(save_csv(d)) == d` holds bit for bit.

use std::collections::BTreeSet;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use featmix_core::{Dataset, Region, Sample, SeedSpec};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column written for region tags.
pub const REGION_COLUMN: &str = "region";

pub fn load_csv(path: &Path, target_column: &str, region_column: Option<&str>) -> Result<Dataset> {
    let file = fs::File::open(path).map_err(|source| Error::Input {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, &path.display().to_string(), target_column, region_column)
}

/// Parses CSV from any reader. `source_name` only labels error messages.
/// Rows are numbered from 1, not counting the header.
pub fn read_csv<R: Read>(
    reader: R,
    source_name: &str,
    target_column: &str,
    region_column: Option<&str>,
) -> Result<Dataset> {
    let format_err = |message: String| Error::Format {
        source_name: source_name.to_string(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| format_err(format!("unreadable header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut seen = BTreeSet::new();
    for h in &header {
        if h.is_empty() {
            return Err(format_err("empty column name in header".into()));
        }
        if !seen.insert(h.as_str()) {
            return Err(format_err(format!("duplicate column `{h}`")));
        }
    }
    let find = |name: &str| header.iter().position(|h| h == name);
    let target_idx = find(target_column).ok_or_else(|| format_err(format!("missing target column `{target_column}`")))?;
    let region_idx = match region_column {
        Some(r) => Some(find(r).ok_or_else(|| format_err(format!("missing region column `{r}`")))?),
        None => None,
    };
    let feature_idx: Vec<usize> = (0..header.len())
        .filter(|&i| i != target_idx && Some(i) != region_idx)
        .collect();

    let mut samples = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| format_err(format!("row {row}: {e}")))?;
        if record.len() != header.len() {
            return Err(format_err(format!(
                "row {row}: expected {} fields, found {}",
                header.len(),
                record.len()
            )));
        }
        let cell = |i: usize| -> Result<f64> {
            let raw = record[i].trim();
            let bad = |message: String| Error::Cell {
                source_name: source_name.to_string(),
                row,
                column: header[i].clone(),
                message,
            };
            if raw.is_empty() {
                return Err(bad("empty cell".into()));
            }
            let v: f64 = raw.parse().map_err(|_| bad(format!("`{raw}` is not a number")))?;
            if !v.is_finite() {
                return Err(bad(format!("`{raw}` is not finite")));
            }
            Ok(v)
        };
        let features = feature_idx.iter().map(|&i| cell(i)).collect::<Result<Vec<_>>>()?;
        let target = cell(target_idx)?;
        let region = region_idx.and_then(|i| {
            let tag = record[i].trim();
            (!tag.is_empty()).then(|| Region::new(tag))
        });
        samples.push(Sample::new(features, target, region));
    }
    if samples.is_empty() {
        return Err(format_err("no data rows".into()));
    }
    let names = feature_idx.iter().map(|&i| header[i].clone()).collect();
    Ok(Dataset::new(names, target_column, samples)?)
}

pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(dataset, &mut buf).map_err(|source| Error::Output {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, buf).map_err(|source| Error::Output {
        path: path.to_path_buf(),
        source,
    })
}

/// Header then one line per sample. The region column appears only when
/// some sample is tagged.
pub fn write_csv<W: Write>(dataset: &Dataset, writer: W) -> std::io::Result<()> {
    let tagged = dataset.samples().iter().any(|s| s.region.is_some());
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = dataset.feature_names().iter().map(String::as_str).collect();
    header.push(dataset.target_name());
    if tagged {
        header.push(REGION_COLUMN);
    }
    w.write_record(&header)?;
    let mut fields: Vec<String> = Vec::with_capacity(header.len());
    for s in dataset.samples() {
        fields.clear();
        fields.extend(s.features.iter().map(|v| v.to_string()));
        fields.push(s.target.to_string());
        if tagged {
            fields.push(s.region.as_ref().map(|r| r.as_str().to_string()).unwrap_or_default());
        }
        w.write_record(&fields)?;
    }
    w.flush()
}

/// Metadata written next to a CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub region_labels: Vec<Region>,
    pub rows: usize,
    pub seed: Option<SeedSpec>,
    pub stage: String,
}

impl Sidecar {
    pub fn describe(dataset: &Dataset, stage: &str, seed: Option<SeedSpec>) -> Self {
        Self {
            feature_names: dataset.feature_names().to_vec(),
            target_name: dataset.target_name().to_string(),
            region_labels: dataset.regions().into_iter().collect(),
            rows: dataset.len(),
            seed,
            stage: stage.to_string(),
        }
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Output {
        path: path.to_path_buf(),
        source,
    })
}
