//! `.fld` snapshots and solve sidecars.
//!
//! A snapshot is a single JSON line `{"n":..,"L":..,"label":..}` followed by
//! `n³` little-endian `f64` values in x-major order.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HartreeError, Result};
use crate::grid::{make_grid, Field};
use crate::solver::GroundStateResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub n: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    pub label: String,
}

pub fn write_field<W: Write>(mut w: W, u: &Field, label: &str) -> Result<()> {
    let header = FieldHeader {
        n: u.grid().points_per_dim(),
        half_width: u.grid().half_width(),
        label: label.to_string(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    let mut bytes = Vec::with_capacity(8 * u.values().len());
    for v in u.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)?;
    Ok(())
}

/// Read a snapshot; the label is returned alongside the field.
pub fn read_field<R: Read>(r: R) -> Result<(Field, String)> {
    let mut r = BufReader::new(r);
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(HartreeError::Format("missing header line".into()));
    }
    let header: FieldHeader = serde_json::from_slice(&line)
        .map_err(|e| HartreeError::Format(format!("bad header: {e}")))?;
    let grid = make_grid(header.half_width, header.n)?;
    let len = grid.len();
    let mut bytes = Vec::with_capacity(8 * len);
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * len {
        return Err(HartreeError::Format(format!(
            "expected {} payload bytes, found {}",
            8 * len,
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let field = Field::new(grid, values).map_err(|e| HartreeError::Format(e.to_string()))?;
    Ok((field, header.label))
}

pub fn save_field(path: &Path, u: &Field, label: &str) -> Result<()> {
    let f = fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_field(&mut w, u, label)?;
    w.flush()?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<(Field, String)> {
    read_field(fs::File::open(path)?)
}

/// Summary written next to a solved snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub family: String,
    pub m: Option<f64>,
    pub c: Option<f64>,
    #[serde(rename = "N")]
    pub total_mass: f64,
    pub energy: f64,
    pub multiplier: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl Sidecar {
    pub fn from_result(r: &GroundStateResult) -> Self {
        Self {
            family: r.spec.name().to_string(),
            m: r.spec.m(),
            c: r.spec.c(),
            total_mass: crate::grid::mass(&r.state),
            energy: r.energy.total,
            multiplier: r.multiplier,
            residual: r.residual_norm,
            iterations: r.iterations,
            converged: r.converged,
        }
    }
}
