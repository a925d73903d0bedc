//! Binary snapshot container. Layout (all little-endian):
//!
//! | offset | size | content                                        |
//! |--------|------|------------------------------------------------|
//! | 0      | 8    | magic `TORFIELD`                               |
//! | 8      | 2    | version (u16) = 1                              |
//! | 10     | 1    | endianness flag, 1 = little                    |
//! | 11     | 1    | rank: 0 scalar, 1 vector, 2 tensor (9 comps)   |
//! | 12     | 1    | real flag: 1 samples, 0 complex coefficients   |
//! | 13     | 3    | reserved, zero                                 |
//! | 16     | 4    | n per axis (u32)                               |
//! | 20     | 4    | snapshot count S (u32)                         |
//! | 24     | 8    | reserved, zero                                 |
//! | 32     | 8·S  | snapshot times (f64)                           |
//!
//! followed by S blocks of f64 in row-major (n1, n2, n3, component) order; complex blocks
//! store (re, im) pairs as the innermost axis.
use super::field::{PhysicalField, Rank, SpectralField};
use super::grid::Grid3;
use crate::error::{Error, Result};
use num::complex::Complex64;
use std::io::{Read, Write};

pub const MAGIC: &[u8; 8] = b"TORFIELD";
pub const VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshots {
    pub grid: Grid3,
    pub rank: Rank,
    pub times: Vec<f64>,
    pub fields: Vec<PhysicalField>,
}

fn header(out: &mut impl Write, grid: Grid3, rank: Rank, real: bool, count: usize) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&[1, rank.code(), real as u8, 0, 0, 0])?;
    out.write_all(&(grid.n() as u32).to_le_bytes())?;
    out.write_all(&(count as u32).to_le_bytes())?;
    out.write_all(&0u64.to_le_bytes())?;
    Ok(())
}

pub fn write_samples(out: &mut impl Write, times: &[f64], fields: &[PhysicalField]) -> Result<()> {
    if fields.is_empty() || times.len() != fields.len() {
        return Err(Error::Size {
            expected: times.len(),
            got: fields.len(),
        });
    }
    let (grid, rank) = (fields[0].grid, fields[0].rank);
    header(out, grid, rank, true, fields.len())?;
    for t in times {
        out.write_all(&t.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(grid.len() * rank.ncomp() * 8);
    for f in fields {
        if f.grid != grid || f.rank != rank {
            return Err(Error::Format("snapshots must share grid and rank".into()));
        }
        buf.clear();
        for v in f.to_interleaved() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

pub fn write_coefficients(
    out: &mut impl Write,
    times: &[f64],
    fields: &[SpectralField],
) -> Result<()> {
    if fields.is_empty() || times.len() != fields.len() {
        return Err(Error::Size {
            expected: times.len(),
            got: fields.len(),
        });
    }
    let (grid, rank) = (fields[0].grid, fields[0].rank);
    header(out, grid, rank, false, fields.len())?;
    for t in times {
        out.write_all(&t.to_le_bytes())?;
    }
    let nc = rank.ncomp();
    let len = grid.len();
    for f in fields {
        let mut buf = Vec::with_capacity(len * nc * 16);
        for i in 0..len {
            for c in 0..nc {
                let z = f.coeffs[c * len + i];
                buf.extend_from_slice(&z.re.to_le_bytes());
                buf.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

struct Head {
    grid: Grid3,
    rank: Rank,
    real: bool,
    times: Vec<f64>,
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_head(r: &mut impl Read) -> Result<Head> {
    let mut h = [0u8; 32];
    r.read_exact(&mut h)?;
    if &h[0..8] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u16::from_le_bytes([h[8], h[9]]);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    if h[10] != 1 {
        return Err(Error::Format(
            "only little-endian payloads are supported".into(),
        ));
    }
    let rank =
        Rank::from_code(h[11]).ok_or_else(|| Error::Format(format!("bad rank code {}", h[11])))?;
    let real = match h[12] {
        1 => true,
        0 => false,
        x => return Err(Error::Format(format!("bad real flag {x}"))),
    };
    let n = u32::from_le_bytes(h[16..20].try_into().unwrap()) as usize;
    let count = u32::from_le_bytes(h[20..24].try_into().unwrap()) as usize;
    let grid = Grid3::new(n)?;
    let times = (0..count)
        .map(|_| read_f64(r))
        .collect::<Result<Vec<_>>>()?;
    Ok(Head {
        grid,
        rank,
        real,
        times,
    })
}

pub fn read_samples(r: &mut impl Read) -> Result<Snapshots> {
    let h = read_head(r)?;
    if !h.real {
        return Err(Error::Format(
            "container holds coefficients, not samples".into(),
        ));
    }
    let m = h.grid.len() * h.rank.ncomp();
    let mut fields = Vec::with_capacity(h.times.len());
    let mut bytes = vec![0u8; m * 8];
    for _ in 0..h.times.len() {
        r.read_exact(&mut bytes)?;
        let inter: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        fields.push(PhysicalField::from_interleaved(h.grid, h.rank, &inter));
    }
    Ok(Snapshots {
        grid: h.grid,
        rank: h.rank,
        times: h.times,
        fields,
    })
}

pub fn read_coefficients(r: &mut impl Read) -> Result<(Vec<f64>, Vec<SpectralField>)> {
    let h = read_head(r)?;
    if h.real {
        return Err(Error::Format(
            "container holds samples, not coefficients".into(),
        ));
    }
    let nc = h.rank.ncomp();
    let len = h.grid.len();
    let mut out = Vec::with_capacity(h.times.len());
    let mut bytes = vec![0u8; len * nc * 16];
    for _ in 0..h.times.len() {
        r.read_exact(&mut bytes)?;
        let mut f = SpectralField::zeros(h.grid, h.rank);
        for (k, b) in bytes.chunks_exact(16).enumerate() {
            let (i, c) = (k / nc, k % nc);
            let re = f64::from_le_bytes(b[0..8].try_into().unwrap());
            let im = f64::from_le_bytes(b[8..16].try_into().unwrap());
            f.coeffs[c * len + i] = Complex64::new(re, im);
        }
        out.push(f);
    }
    Ok((h.times, out))
}
