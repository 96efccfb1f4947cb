//! Field dumps: raw little-endian f64 payload plus a JSON sidecar header,
//! bit-exact across platforms.

use super::{MapField, ScalarField, VectorField};
use crate::error::Result;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

/// Sidecar header written next to each raw payload.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldHeader {
    pub dim: usize,
    pub n: usize,
    pub layout: String,
    pub name: String,
    pub time: f64,
}

fn write_raw(path: &Path, values: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn write_pair(base: &Path, header: &FieldHeader, values: &[f64]) -> Result<()> {
    if let Some(parent) = base.parent() {
        fs::create_dir_all(parent)?;
    }
    write_raw(&base.with_extension("f64"), values)?;
    let json = serde_json::to_string_pretty(header).expect("header serializes");
    fs::write(base.with_extension("json"), json)?;
    Ok(())
}

/// Dump a cell scalar as `<base>.f64` + `<base>.json`.
pub fn dump_scalar(base: &Path, name: &str, time: f64, f: &ScalarField) -> Result<()> {
    let header = FieldHeader {
        dim: f.grid.dim(),
        n: f.grid.n(),
        layout: "cell".into(),
        name: name.into(),
        time,
    };
    write_pair(base, &header, &f.values)
}

/// Dump a node map (components concatenated, row-major per component).
pub fn dump_map(base: &Path, name: &str, time: f64, z: &MapField) -> Result<()> {
    let header = FieldHeader {
        dim: z.grid.dim(),
        n: z.grid.n(),
        layout: "node".into(),
        name: name.into(),
        time,
    };
    write_pair(base, &header, &z.values)
}

/// Dump a MAC velocity, one file pair per component.
pub fn dump_velocity(base: &Path, name: &str, time: f64, v: &VectorField) -> Result<()> {
    for (c, comp) in v.comps.iter().enumerate() {
        let header = FieldHeader {
            dim: v.grid.dim(),
            n: v.grid.n(),
            layout: format!("face-{c}"),
            name: name.into(),
            time,
        };
        let stem = base
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let comp_base = base.with_file_name(format!("{stem}_{c}"));
        write_pair(&comp_base, &header, comp)?;
    }
    Ok(())
}
