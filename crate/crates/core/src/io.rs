//! Plain-text and binary persistence.
//!
//! Flat binary layout (all little-endian):
//!
//! | offset | size | content                       |
//! |--------|------|-------------------------------|
//! | 0      | 8    | magic `b"SHMKVEC1"`           |
//! | 8      | 8    | `u64` number of vectors       |
//! | 16     | 8    | `u64` length of each vector   |
//! | 24     | 8·n·len | `f64` values, vector-major |
//!
//! Floats in CSV files are written with Rust's shortest round-trip
//! formatting, so parsing them back is bit-exact.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::ReservoirModel;

pub const FLAT_MAGIC: &[u8; 8] = b"SHMKVEC1";

pub fn encode_flat(vectors: &[Vec<f64>]) -> Result<Vec<u8>> {
    let len = vectors.first().map_or(0, Vec::len);
    if let Some(bad) = vectors.iter().find(|v| v.len() != len) {
        return Err(Error::DimensionMismatch {
            what: "flat binary vector length",
            expected: len,
            actual: bad.len(),
        });
    }
    let mut out = Vec::with_capacity(24 + 8 * len * vectors.len());
    out.extend_from_slice(FLAT_MAGIC);
    out.extend_from_slice(&(vectors.len() as u64).to_le_bytes());
    out.extend_from_slice(&(len as u64).to_le_bytes());
    for v in vectors {
        for x in v {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_flat(bytes: &[u8]) -> Result<Vec<Vec<f64>>> {
    if bytes.len() < 24 || &bytes[..8] != FLAT_MAGIC {
        return Err(Error::Format("missing flat-binary header".into()));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()) as usize;
    let (count, len) = (word(8), word(16));
    let expected = count
        .checked_mul(len)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(24))
        .ok_or_else(|| Error::Format("flat-binary header overflows".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "flat binary holds {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let mut vectors = Vec::with_capacity(count);
    let mut at = 24;
    for _ in 0..count {
        let mut v = Vec::with_capacity(len);
        for _ in 0..len {
            v.push(f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()));
            at += 8;
        }
        vectors.push(v);
    }
    Ok(vectors)
}

pub fn write_flat(path: &Path, vectors: &[Vec<f64>]) -> Result<()> {
    std::fs::write(path, encode_flat(vectors)?)?;
    Ok(())
}

pub fn read_flat(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_flat(&bytes)
}

/// One row per active cell: `i,j,k,lnKx,phi,lnKz`.
pub fn model_to_csv(model: &ReservoirModel, grid: &Grid) -> String {
    let mut s = String::from("i,j,k,lnKx,phi,lnKz\n");
    for &c in grid.active_cells() {
        let (i, j, k) = grid.ijk(c);
        let _ = writeln!(s, "{i},{j},{k},{},{},{}", model.lnkx[c], model.phi[c], model.lnkz[c]);
    }
    s
}

pub fn model_from_csv(text: &str, grid: &Grid) -> Result<ReservoirModel> {
    let n = grid.cell_count();
    let (mut lnkx, mut phi, mut lnkz) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut seen = vec![false; n];
    for (line_no, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 6 {
            return Err(Error::Format(format!("line {}: expected 6 columns", line_no + 1)));
        }
        let idx = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::Format(format!("line {}: {e}", line_no + 1)))
        };
        let val = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Format(format!("line {}: {e}", line_no + 1)))
        };
        let (i, j, k) = (idx(parts[0])?, idx(parts[1])?, idx(parts[2])?);
        if i >= grid.nx() || j >= grid.ny() || k >= grid.nz() {
            return Err(Error::Format(format!("line {}: cell out of range", line_no + 1)));
        }
        let c = grid.cell(i, j, k);
        if !grid.is_active(c) {
            return Err(Error::Format(format!("line {}: cell is inactive", line_no + 1)));
        }
        lnkx[c] = val(parts[3])?;
        phi[c] = val(parts[4])?;
        lnkz[c] = val(parts[5])?;
        seen[c] = true;
    }
    if grid.active_cells().iter().any(|&c| !seen[c]) {
        return Err(Error::Format("model CSV misses active cells".into()));
    }
    ReservoirModel::new(grid, lnkx, phi, lnkz)
}

/// Row-major matrix as CSV (`rows` lines of `cols` values).
pub fn matrix_to_csv(values: &[f64], rows: usize, cols: usize) -> String {
    let mut s = String::new();
    for r in 0..rows {
        let line: Vec<String> = values[r * cols..(r + 1) * cols]
            .iter()
            .map(|v| v.to_string())
            .collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

pub fn matrix_from_csv(text: &str) -> Result<(Vec<f64>, usize, usize)> {
    let mut values = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let row: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(e.to_string()))?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => return Err(Error::Format("ragged matrix CSV".into())),
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    Ok((values, rows, cols.unwrap_or(0)))
}

/// Binary 8-bit PGM, linearly stretched between the finite min and max.
/// Non-finite pixels are written black.
pub fn write_pgm(path: &Path, values: &[f64], rows: usize, cols: usize) -> Result<()> {
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = finite.fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    for v in values.iter().take(rows * cols) {
        let g = if v.is_finite() {
            (((v - lo) / span) * 255.0).round().clamp(0.0, 255.0) as u8
        } else {
            0
        };
        out.push(g);
    }
    std::fs::File::create(path)?.write_all(&out)?;
    Ok(())
}
