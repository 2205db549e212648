//! Sample-set writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::samplers::{Provenance, SampleSet};

/// JSON sidecar written next to the sample CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub variables: Vec<String>,
    pub records: usize,
    pub provenance: Provenance,
    /// Effective configuration after flag overrides, as YAML.
    pub config: String,
}

/// Shortest round-trip text for a float, switching to exponent form for
/// very small or very large magnitudes.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

/// CSV columns: `t,i,j,k,x,y,z` then one per variable.
pub fn csv_header(set: &SampleSet) -> String {
    let mut h = String::from("t,i,j,k,x,y,z");
    for v in &set.variables {
        h.push(',');
        h.push_str(v);
    }
    h
}

pub fn write_samples_csv(set: &SampleSet, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", csv_header(set)).map_err(io)?;
    for r in &set.records {
        write!(
            w,
            "{},{},{},{},{},{},{}",
            r.timestep,
            r.index[0],
            r.index[1],
            r.index[2],
            format_float(r.coords[0]),
            format_float(r.coords[1]),
            format_float(r.coords[2])
        )
        .map_err(io)?;
        for v in &r.values {
            write!(w, ",{}", format_float(*v)).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Headerless little-endian f64 rows in CSV column order.
pub fn write_samples_binary(set: &SampleSet, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in &set.records {
        let head = [
            r.timestep as f64,
            r.index[0] as f64,
            r.index[1] as f64,
            r.index[2] as f64,
            r.coords[0],
            r.coords[1],
            r.coords[2],
        ];
        for v in head.iter().chain(&r.values) {
            w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_sidecar(set: &SampleSet, config_yaml: &str, path: &Path) -> Result<()> {
    let sidecar = Sidecar {
        variables: set.variables.clone(),
        records: set.len(),
        provenance: set.provenance.clone(),
        config: config_yaml.to_string(),
    };
    let text = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Invariant(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes `<prefix>.csv`, `<prefix>.json` and optionally `<prefix>.bin`
/// into `dir`, creating it if needed.
pub fn write_sample_outputs(
    set: &SampleSet,
    dir: &Path,
    prefix: &str,
    config_yaml: &str,
    binary: bool,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = dir.join(format!("{prefix}.csv"));
    let json = dir.join(format!("{prefix}.json"));
    write_samples_csv(set, &csv)?;
    write_sidecar(set, config_yaml, &json)?;
    let mut paths = vec![csv, json];
    if binary {
        let bin = dir.join(format!("{prefix}.bin"));
        write_samples_binary(set, &bin)?;
        paths.push(bin);
    }
    Ok(paths)
}
