//! CSV input, JSON output, `key = value` configuration files and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::app::density::DensitySample;
use crate::error::{Error, Result};
use crate::hilbert::{FunctionalSeries, Grid, ScalarSeries};

fn parse_cell(s: &str, row: usize, col: usize) -> Result<f64> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Parse {
            row,
            message: format!("missing value in column {}", col + 1),
        });
    }
    let v: f64 = s.parse().map_err(|_| Error::Parse {
        row,
        message: format!("cannot parse '{s}' in column {}", col + 1),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            message: format!("non-finite value in column {}", col + 1),
        });
    }
    Ok(v)
}

/// Header plus numeric rows. Rows are numbered as data rows starting at 1.
fn read_table(path: &Path) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header = rdr
        .headers()?
        .iter()
        .enumerate()
        .map(|(c, h)| parse_cell(h, 0, c))
        .collect::<Result<Vec<f64>>>()?;
    let mut rows = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = r + 1;
        if rec.len() != header.len() {
            return Err(Error::Parse {
                row,
                message: format!("expected {} values, found {}", header.len(), rec.len()),
            });
        }
        rows.push(
            rec.iter()
                .enumerate()
                .map(|(c, v)| parse_cell(v, row, c))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    Ok((header, rows))
}

/// Curves from a CSV whose header holds the grid points and whose rows are
/// periods.
pub fn load_curves(path: impl AsRef<Path>) -> Result<FunctionalSeries> {
    let (header, rows) = read_table(path.as_ref())?;
    if header.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parse {
            row: 0,
            message: "grid header must be strictly increasing".into(),
        });
    }
    let grid = Grid::new(header)?;
    let n = grid.len();
    let mut data = DMatrix::zeros(n, rows.len());
    for (t, row) in rows.iter().enumerate() {
        data.column_mut(t).copy_from_slice(row);
    }
    FunctionalSeries::new(grid, data)
}

/// Densities from a CSV whose header holds the support points.
pub fn load_densities(path: impl AsRef<Path>) -> Result<DensitySample> {
    let (header, rows) = read_table(path.as_ref())?;
    DensitySample::new(header, &rows)
}

/// One value per line. A non-numeric first line is treated as a header.
pub fn load_scalars(path: impl AsRef<Path>) -> Result<ScalarSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let mut values = Vec::new();
    let mut header_seen = false;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if r == 0 && rec.len() == 1 && rec[0].parse::<f64>().is_err() {
            header_seen = true;
            continue;
        }
        let row = if header_seen { r } else { r + 1 };
        if rec.len() != 1 {
            return Err(Error::Parse {
                row,
                message: format!("expected one value, found {}", rec.len()),
            });
        }
        values.push(parse_cell(&rec[0], row, 0)?);
    }
    ScalarSeries::new(values)
}

/// Writes curves in the format read by [`load_curves`]. Values use the
/// shortest representation that parses back to the same float.
pub fn write_curves(path: impl AsRef<Path>, series: &FunctionalSeries) -> Result<()> {
    write_curves_to(fs::File::create(path.as_ref())?, series)
}

pub fn write_curves_to<W: Write>(out: W, series: &FunctionalSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(series.grid().points().iter().map(|p| p.to_string()))?;
    for t in 0..series.len() {
        w.write_record(series.values(t).iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_scalars(path: impl AsRef<Path>, series: &ScalarSeries) -> Result<()> {
    let mut f = fs::File::create(path.as_ref())?;
    writeln!(f, "y")?;
    for v in series.values() {
        writeln!(f, "{v}")?;
    }
    Ok(())
}

/// `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            row: i + 1,
            message: format!("expected 'key = value', found '{line}'"),
        })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Parse {
                row: i + 1,
                message: "empty key".into(),
            });
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn read_config(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    parse_config(&fs::read_to_string(path.as_ref())?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: impl AsRef<Path>) -> Result<String> {
    Ok(sha256_hex(&fs::read(path.as_ref())?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Digest256 {
    pub path: String,
    pub sha256: String,
}

/// What a run read, how it was configured, and what it produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<Digest256>,
    pub outputs: Vec<Digest256>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: BTreeMap<String, String>) -> RunManifest {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(Digest256 {
            path: path.display().to_string(),
            sha256: file_digest(path)?,
        });
        Ok(())
    }

    /// Records an output by content; `name` is a path or `"stdout"`.
    pub fn add_output(&mut self, name: &str, bytes: &[u8]) {
        self.outputs.push(Digest256 {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `<out>.manifest.json` next to an output file.
pub fn manifest_path_for(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}
