//! Flat-binary and CSV dumps of cell fields.
//!
//! Both formats carry a small header (dimension, cells per axis, step
//! index, time, extents, boundary kind) followed by the cell values in
//! row-major order, so a dumped field is geometrically self-describing
//! and can be re-read for ad-hoc distance computations.
//!
//! Binary layout (little endian): magic `UPW1`, `u32` dim, `u32` nx,
//! `u32` ny, `u64` step, `f64` t, `f64` extent_x, `f64` extent_y,
//! `u8` boundary (0 periodic, 1 no-flux), then `nx*ny` `f64` values.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{Boundary, CartesianMesh};
use crate::scheme::CellField;

const MAGIC: &[u8; 4] = b"UPW1";

pub fn write_binary(field: &CellField, t: f64, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    let mesh = field.mesh();
    let [nx, ny] = mesh.cells_per_axis();
    w.write_all(MAGIC)?;
    w.write_all(&(mesh.dim() as u32).to_le_bytes())?;
    w.write_all(&(nx as u32).to_le_bytes())?;
    w.write_all(&(ny as u32).to_le_bytes())?;
    w.write_all(&(field.step() as u64).to_le_bytes())?;
    w.write_all(&t.to_le_bytes())?;
    w.write_all(&mesh.extent()[0].to_le_bytes())?;
    w.write_all(&mesh.extent()[1].to_le_bytes())?;
    w.write_all(&[match mesh.boundary() {
        Boundary::Periodic => 0u8,
        Boundary::NoFlux => 1,
    }])?;
    for v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_binary(path: &Path) -> Result<(CellField, f64)> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::SnapshotFormat("bad magic".into()));
    }
    let dim = read_u32(&mut r)? as usize;
    let nx = read_u32(&mut r)? as usize;
    let ny = read_u32(&mut r)? as usize;
    let step = read_u64(&mut r)? as usize;
    let t = read_f64(&mut r)?;
    let ex = read_f64(&mut r)?;
    let ey = read_f64(&mut r)?;
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    let boundary = match b[0] {
        0 => Boundary::Periodic,
        1 => Boundary::NoFlux,
        other => return Err(Error::SnapshotFormat(format!("bad boundary tag {other}"))),
    };
    let mesh = Arc::new(CartesianMesh::build(dim, [ex, ey], [nx, ny], boundary)?);
    let mut values = Vec::with_capacity(mesh.n_cells());
    for _ in 0..mesh.n_cells() {
        values.push(read_f64(&mut r)?);
    }
    let mut field = CellField::from_values(mesh, values, step)?;
    field.set_step(step);
    Ok((field, t))
}

pub fn write_csv(field: &CellField, t: f64, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    let mesh = field.mesh();
    let [nx, ny] = mesh.cells_per_axis();
    writeln!(w, "dim,nx,ny,n,t,extent_x,extent_y,boundary")?;
    writeln!(
        w,
        "{},{},{},{},{},{},{},{}",
        mesh.dim(),
        nx,
        ny,
        field.step(),
        t,
        mesh.extent()[0],
        mesh.extent()[1],
        match mesh.boundary() {
            Boundary::Periodic => "periodic",
            Boundary::NoFlux => "noflux",
        }
    )?;
    for v in field.values() {
        writeln!(w, "{v}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<(CellField, f64)> {
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::SnapshotFormat("empty file".into()))??;
    if header.trim() != "dim,nx,ny,n,t,extent_x,extent_y,boundary" {
        return Err(Error::SnapshotFormat("unexpected header".into()));
    }
    let meta = lines
        .next()
        .ok_or_else(|| Error::SnapshotFormat("missing metadata row".into()))??;
    let parts: Vec<&str> = meta.trim().split(',').collect();
    if parts.len() != 8 {
        return Err(Error::SnapshotFormat("metadata row must have 8 fields".into()));
    }
    let parse_err = |what: &str| Error::SnapshotFormat(format!("cannot parse {what}"));
    let dim: usize = parts[0].parse().map_err(|_| parse_err("dim"))?;
    let nx: usize = parts[1].parse().map_err(|_| parse_err("nx"))?;
    let ny: usize = parts[2].parse().map_err(|_| parse_err("ny"))?;
    let step: usize = parts[3].parse().map_err(|_| parse_err("n"))?;
    let t: f64 = parts[4].parse().map_err(|_| parse_err("t"))?;
    let ex: f64 = parts[5].parse().map_err(|_| parse_err("extent_x"))?;
    let ey: f64 = parts[6].parse().map_err(|_| parse_err("extent_y"))?;
    let boundary = match parts[7] {
        "periodic" => Boundary::Periodic,
        "noflux" => Boundary::NoFlux,
        other => return Err(Error::SnapshotFormat(format!("bad boundary {other}"))),
    };
    let mesh = Arc::new(CartesianMesh::build(dim, [ex, ey], [nx, ny], boundary)?);
    let mut values = Vec::with_capacity(mesh.n_cells());
    for line in lines {
        let line = line?;
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        values.push(s.parse::<f64>().map_err(|_| parse_err("cell value"))?);
    }
    let mut field = CellField::from_values(mesh, values, step)?;
    field.set_step(step);
    Ok((field, t))
}

/// Reads a snapshot in either format, deciding by the magic bytes.
pub fn read_auto(path: &Path) -> Result<(CellField, f64)> {
    let mut f = std::fs::File::open(path)?;
    let mut magic = [0u8; 4];
    let n = f.read(&mut magic)?;
    drop(f);
    if n == 4 && &magic == MAGIC {
        read_binary(path)
    } else {
        read_csv(path)
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
