//! Grid-function files: a CSV form for plotting and a raw binary dump.
//!
//! Binary layout (little endian): magic `FCGF`, `u32` dim, `f64` L,
//! `u64` N, then `N^dim` values as `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};

const MAGIC: &[u8; 4] = b"FCGF";

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    node: usize,
    x: f64,
    y: f64,
    value: f64,
}

/// Writes `node,x,y,value` rows (`y = 0` in 1D) after a `#` metadata line.
pub fn write_grid_csv(f: &GridFunction, path: &Path) -> Result<()> {
    let spec = f.spec();
    let mut file = BufWriter::new(File::create(path)?);
    writeln!(
        file,
        "# dim={},L={},N={}",
        spec.dim(),
        spec.half_width(),
        spec.nodes_per_axis()
    )?;
    let mut w = csv::Writer::from_writer(file);
    for (node, &value) in f.values().iter().enumerate() {
        let [x, y] = spec.point(node);
        w.serialize(Row { node, x, y, value })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_grid_csv(path: &Path) -> Result<GridFunction> {
    let text = std::fs::read_to_string(path)?;
    let (meta, body) = text
        .split_once('\n')
        .ok_or_else(|| Error::Format("empty grid file".into()))?;
    let meta = meta
        .strip_prefix("# ")
        .ok_or_else(|| Error::Format("missing metadata line".into()))?;
    let get = |key: &str| -> Result<f64> {
        meta.split(',')
            .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .ok_or_else(|| Error::Format(format!("metadata lacks `{key}`")))?
            .parse()
            .map_err(|e| Error::Format(format!("metadata `{key}`: {e}")))
    };
    let spec = GridSpec::new(get("dim")? as usize, get("L")?, get("N")? as usize)?;
    let mut values = vec![f64::NAN; spec.len()];
    for rec in csv::Reader::from_reader(body.as_bytes()).deserialize() {
        let row: Row = rec?;
        let slot = values
            .get_mut(row.node)
            .ok_or_else(|| Error::Format(format!("node {} outside the grid", row.node)))?;
        *slot = row.value;
    }
    GridFunction::new(spec, values)
}

pub fn write_grid_binary(f: &GridFunction, path: &Path) -> Result<()> {
    let spec = f.spec();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(spec.dim() as u32).to_le_bytes())?;
    w.write_all(&spec.half_width().to_le_bytes())?;
    w.write_all(&(spec.nodes_per_axis() as u64).to_le_bytes())?;
    for v in f.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_grid_binary(path: &Path) -> Result<GridFunction> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a grid-function dump".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let dim = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b8)?;
    let half_width = f64::from_le_bytes(b8);
    r.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    let spec = GridSpec::new(dim, half_width, n)?;
    let mut values = Vec::with_capacity(spec.len());
    for _ in 0..spec.len() {
        r.read_exact(&mut b8)?;
        values.push(f64::from_le_bytes(b8));
    }
    if r.read(&mut b8)? != 0 {
        return Err(Error::Format("trailing bytes after grid values".into()));
    }
    GridFunction::new(spec, values)
}
