//! Files written by a run: the `curve.csv` table and raw field dumps.
//!
//! A field dump is `field_<λ>.f64`, the grid values as little-endian `f64`
//! in row-major order, next to a `field_<λ>.meta` TOML sidecar describing
//! the grid. Both are written to a temporary name and renamed into place so
//! an interrupted run never leaves a half-written file behind.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use soliton_core::{power, CurvePoint, Field, Grid};

use crate::error::{CliError, CliResult};

pub const CURVE_HEADER: &str = "lambda,power,newton_iters,mean_gmres_iters,converged";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldMeta {
    pub d: usize,
    pub n: usize,
    pub box_len: f64,
    pub centered: bool,
    pub lambda: f64,
    pub power: f64,
    pub model: String,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let result = (|| {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::io(path, e)
    })
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Renders curve points as CSV, one row per point, with floats in full
/// round-trip precision.
pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::with_capacity(64 * (points.len() + 1));
    out.push_str(CURVE_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{:.16e},{:.16e},{},{:.16e},{}\n",
            p.lambda, p.power, p.newton_iters, p.mean_gmres_iters, p.converged
        ));
    }
    out
}

pub fn write_curve(dir: &Path, points: &[CurvePoint]) -> CliResult<PathBuf> {
    let path = dir.join("curve.csv");
    write_atomic(&path, curve_csv(points).as_bytes())?;
    Ok(path)
}

/// `field_<λ>` with a sign-explicit fixed-precision λ, so dumps sort and never
/// collide for distinct points of a sweep.
pub fn field_stem(lambda: f64) -> String {
    format!("field_{lambda:+.6}")
}

/// Writes the field and its sidecar into `dir`; returns the `.f64` path.
pub fn write_field(dir: &Path, field: &Field, lambda: f64, model: &str) -> CliResult<PathBuf> {
    let stem = field_stem(lambda);
    let data = dir.join(format!("{stem}.f64"));
    let meta_path = dir.join(format!("{stem}.meta"));
    let grid = field.grid();
    let meta = FieldMeta {
        d: grid.dim(),
        n: grid.n(),
        box_len: grid.box_len(),
        centered: grid.is_centered(),
        lambda,
        power: power(field),
        model: model.to_string(),
    };
    let bytes: Vec<u8> = field.values().iter().flat_map(|v| v.to_le_bytes()).collect();
    write_atomic(&data, &bytes)?;
    let text = toml::to_string(&meta).map_err(|e| CliError::FieldFile {
        path: meta_path.clone(),
        reason: e.to_string(),
    })?;
    write_atomic(&meta_path, text.as_bytes())?;
    Ok(data)
}

/// Reads a field dump back, using its sidecar for the grid.
pub fn read_field(path: &Path) -> CliResult<(Field, FieldMeta)> {
    let meta_path = path.with_extension("meta");
    let text = fs::read_to_string(&meta_path).map_err(|e| CliError::io(&meta_path, e))?;
    let meta: FieldMeta = toml::from_str(&text).map_err(|source| CliError::Toml {
        path: meta_path.clone(),
        source,
    })?;
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let malformed = |reason: String| CliError::FieldFile {
        path: path.to_path_buf(),
        reason,
    };
    let grid = Grid::new(meta.d, meta.n, meta.box_len, meta.centered)
        .map_err(|e| malformed(format!("sidecar describes an invalid grid: {e}")))?;
    if bytes.len() != 8 * grid.len() {
        return Err(malformed(format!(
            "expected {} bytes for a {}-dimensional grid of {} points per axis, found {}",
            8 * grid.len(),
            meta.d,
            meta.n,
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let field = Field::new(grid, values).map_err(|e| malformed(e.to_string()))?;
    Ok((field, meta))
}
