//! Dataset readers and writers.
//!
//! Raw binary: one headerless file per variable per timestep named
//! `<var>_<timestep>.bin`, little-endian IEEE-754 reals (4 or 8 bytes),
//! x-fastest, exactly `nx * ny * nz * element_size` bytes.
//!
//! CSV (2D): a header row of variable names and one row per grid point in
//! x-fastest order. `path` is either a single file (one timestep, label 0)
//! or a directory of `step_<timestep>.csv` files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::{DataFormat, Precision, RunConfig, TimestepSelector};
use crate::error::{Error, Result};
use crate::grid::{GridDataset, GridDims};

pub fn raw_file_name(var: &str, timestep: u64) -> String {
    format!("{var}_{timestep}.bin")
}

pub fn csv_file_name(timestep: u64) -> String {
    format!("step_{timestep}.csv")
}

/// Loads every role variable named by the config, applying skip strides.
pub fn load_dataset(config: &RunConfig) -> Result<GridDataset> {
    let d = &config.dataset;
    let path = d
        .path
        .as_ref()
        .ok_or_else(|| Error::MissingKey("path".into()))?;
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset path does not exist"),
        ));
    }
    let mut roles: Vec<String> = Vec::new();
    for v in d
        .input_vars
        .iter()
        .chain(&d.output_vars)
        .chain(std::iter::once(&d.cluster_var))
    {
        if !roles.contains(v) {
            roles.push(v.clone());
        }
    }

    let raw = [d.nx, d.ny, d.nz];
    let (labels, snapshots) = match d.dtype {
        DataFormat::SstBinary => {
            let labels = resolve_raw_timesteps(path, &d.cluster_var, &d.timesteps)?;
            let mut snapshots: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
            for var in &roles {
                for &t in &labels {
                    let file = path.join(raw_file_name(var, t));
                    let values = read_raw(&file, raw, d.precision)?;
                    snapshots.entry(var.clone()).or_default().push(values);
                }
            }
            (labels, snapshots)
        }
        DataFormat::Csv => {
            let files = resolve_csv_files(path, &d.timesteps)?;
            let mut snapshots: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
            for (_, file) in &files {
                let table = read_csv_grid(file, raw[0] * raw[1] * raw[2])?;
                for var in &roles {
                    let col = table.get(var).ok_or_else(|| Error::Parse {
                        path: file.clone(),
                        message: format!("no column `{var}`"),
                    })?;
                    snapshots.entry(var.clone()).or_default().push(col.clone());
                }
            }
            (files.into_iter().map(|(t, _)| t).collect(), snapshots)
        }
    };

    let strided = d.strided_extents();
    let dims = GridDims::validated(GridDims {
        nx: strided[0],
        ny: strided[1],
        nz: strided[2],
        nt: labels.len(),
        dims: d.dims,
    })?;
    let mut fields = BTreeMap::new();
    for (var, snaps) in snapshots {
        let mut flat = Vec::with_capacity(dims.len());
        for (t, snap) in snaps.iter().enumerate() {
            if let Some(index) = snap.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    var,
                    timestep: t,
                    index,
                });
            }
            apply_skip(snap, raw, d.skip, &mut flat);
        }
        fields.insert(var, flat);
    }
    GridDataset::with_timesteps(
        dims,
        fields,
        labels,
        d.input_vars.clone(),
        d.output_vars.clone(),
        d.cluster_var.clone(),
    )
}

/// Timestep labels the config selects from its dataset path.
pub fn discover_timesteps(config: &RunConfig) -> Result<Vec<u64>> {
    let d = &config.dataset;
    let path = d
        .path
        .as_ref()
        .ok_or_else(|| Error::MissingKey("path".into()))?;
    match d.dtype {
        DataFormat::SstBinary => resolve_raw_timesteps(path, &d.cluster_var, &d.timesteps),
        DataFormat::Csv => Ok(resolve_csv_files(path, &d.timesteps)?
            .into_iter()
            .map(|(t, _)| t)
            .collect()),
    }
}

fn apply_skip(snap: &[f64], raw: [usize; 3], skip: [usize; 3], out: &mut Vec<f64>) {
    if skip == [1, 1, 1] {
        out.extend_from_slice(snap);
        return;
    }
    for k in (0..raw[2]).step_by(skip[2]) {
        for j in (0..raw[1]).step_by(skip[1]) {
            let row = raw[0] * (j + raw[1] * k);
            out.extend((0..raw[0]).step_by(skip[0]).map(|i| snap[row + i]));
        }
    }
}

fn resolve_raw_timesteps(dir: &Path, probe_var: &str, sel: &TimestepSelector) -> Result<Vec<u64>> {
    match sel {
        TimestepSelector::List(l) => Ok(l.clone()),
        TimestepSelector::All => {
            let prefix = format!("{probe_var}_");
            let mut found: Vec<u64> = fs::read_dir(dir)
                .map_err(|e| Error::io(dir, e))?
                .filter_map(|e| e.ok())
                .filter_map(|e| {
                    let name = e.file_name().into_string().ok()?;
                    name.strip_prefix(&prefix)?
                        .strip_suffix(".bin")?
                        .parse::<u64>()
                        .ok()
                })
                .collect();
            found.sort_unstable();
            if found.is_empty() {
                return Err(Error::io(
                    dir.join(raw_file_name(probe_var, 0)),
                    std::io::Error::new(std::io::ErrorKind::NotFound, "no timestep files"),
                ));
            }
            Ok(found)
        }
    }
}

fn resolve_csv_files(path: &Path, sel: &TimestepSelector) -> Result<Vec<(u64, PathBuf)>> {
    if path.is_file() {
        return Ok(vec![(0, path.to_path_buf())]);
    }
    let labels = match sel {
        TimestepSelector::List(l) => l.clone(),
        TimestepSelector::All => {
            let mut found: Vec<u64> = fs::read_dir(path)
                .map_err(|e| Error::io(path, e))?
                .filter_map(|e| e.ok())
                .filter_map(|e| {
                    let name = e.file_name().into_string().ok()?;
                    name.strip_prefix("step_")?
                        .strip_suffix(".csv")?
                        .parse::<u64>()
                        .ok()
                })
                .collect();
            found.sort_unstable();
            found
        }
    };
    Ok(labels
        .into_iter()
        .map(|t| (t, path.join(csv_file_name(t))))
        .collect())
}

/// Reads one raw snapshot of `dims` points.
pub fn read_raw(path: &Path, dims: [usize; 3], precision: Precision) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let count: usize = dims.iter().product();
    let expected = (count * precision.bytes()) as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            path: path.to_path_buf(),
            expected,
            actual: bytes.len() as u64,
        });
    }
    Ok(match precision {
        Precision::F64 => bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
        Precision::F32 => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
    })
}

pub fn write_raw(path: &Path, values: &[f64], precision: Precision) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * precision.bytes());
    for &v in values {
        match precision {
            Precision::F64 => buf.extend_from_slice(&v.to_le_bytes()),
            Precision::F32 => buf.extend_from_slice(&(v as f32).to_le_bytes()),
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Writes every field of `dataset` as `<var>_<label>.bin` under `dir`.
/// Returns the written paths.
pub fn write_dataset_raw(dataset: &GridDataset, dir: &Path, precision: Precision) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for name in dataset.fields().keys() {
        for (t, &label) in dataset.timesteps().iter().enumerate() {
            let file = dir.join(raw_file_name(name, label));
            write_raw(&file, dataset.snapshot(name, t)?, precision)?;
            written.push(file);
        }
    }
    Ok(written)
}

fn read_csv_grid(path: &Path, expected_rows: usize) -> Result<BTreeMap<String, Vec<f64>>> {
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => parse_err(format!("{other:?}")),
    })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(expected_rows); headers.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("row {}: `{field}` is not a number", row + 1)))?;
            cols[c].push(v);
        }
    }
    let rows = cols.first().map_or(0, Vec::len);
    if rows != expected_rows {
        return Err(parse_err(format!(
            "expected {expected_rows} rows for the configured grid, found {rows}"
        )));
    }
    Ok(headers.into_iter().zip(cols).collect())
}

/// Writes one snapshot of a 2D dataset in the CSV point-cloud format.
pub fn write_csv_snapshot(dataset: &GridDataset, t: usize, path: &Path) -> Result<()> {
    let names: Vec<&String> = dataset.fields().keys().collect();
    let mut out = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut text = names.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(",");
    text.push('\n');
    let snaps = names
        .iter()
        .map(|n| dataset.snapshot(n, t))
        .collect::<Result<Vec<_>>>()?;
    for p in 0..dataset.dims().spatial_len() {
        let row: Vec<String> = snaps.iter().map(|s| s[p].to_string()).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    out.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
