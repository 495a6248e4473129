//! Field snapshot files.
//!
//! Binary layout (all little-endian):
//!
//! ```text
//! magic    8 bytes  "VCHESNAP"
//! version  u32      1
//! dims     3 x u32
//! box      3 x f64
//! dealias  f64
//! coeffs   for comp in 0..3, for index in 0..n0*n1*n2: re f64, im f64
//! ```
//!
//! Coefficients follow the canonical order of [`Grid`]: FFT order on each axis
//! (`0, 1, .., n/2-1, -n/2, .., -1`), last axis fastest. The text form lists the same header
//! as `key value` lines followed by one `i0 i1 i2 comp re im` line per nonzero coefficient,
//! written with shortest round-trip float formatting.
//!
//! Control fields use the same header under the magic `VCHECTRL`, followed by `steps` (u32),
//! `dt` (f64) and the nodal values in [`ControlField`] order (step, component, point).

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::control::ControlField;
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::Grid;

const MAGIC: &[u8; 8] = b"VCHESNAP";
const VERSION: u32 = 1;
const CONTROL_MAGIC: &[u8; 8] = b"VCHECTRL";

fn write_header<W: Write>(g: &Grid, magic: &[u8; 8], out: &mut W) -> Result<()> {
    out.write_all(magic)?;
    out.write_all(&VERSION.to_le_bytes())?;
    for n in g.dims() {
        out.write_all(&(n as u32).to_le_bytes())?;
    }
    for l in g.box_length() {
        out.write_all(&l.to_le_bytes())?;
    }
    out.write_all(&g.dealias().to_le_bytes())?;
    Ok(())
}

fn read_header<R: Read>(magic: &[u8; 8], input: &mut R) -> Result<Grid> {
    let mut m = [0u8; 8];
    input.read_exact(&mut m)?;
    if &m != magic {
        return Err(Error::Format("bad magic".into()));
    }
    let version = read_u32(input)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dims = [read_u32(input)? as usize, read_u32(input)? as usize, read_u32(input)? as usize];
    let box_length = [read_f64(input)?, read_f64(input)?, read_f64(input)?];
    let dealias = read_f64(input)?;
    Grid::new(dims, box_length, dealias)
}

pub fn write_binary<W: Write>(f: &SpectralField, mut out: W) -> Result<()> {
    let g = f.grid();
    write_header(g, MAGIC, &mut out)?;
    let mut buf = Vec::with_capacity(16 * g.len());
    for comp in f.coeffs() {
        buf.clear();
        for c in comp {
            buf.extend_from_slice(&c.re.to_le_bytes());
            buf.extend_from_slice(&c.im.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_binary<R: Read>(mut input: R) -> Result<SpectralField> {
    let grid = read_header(MAGIC, &mut input)?;
    let mut coeffs: [Vec<Complex64>; 3] = Default::default();
    for comp in coeffs.iter_mut() {
        comp.reserve(grid.len());
        for _ in 0..grid.len() {
            let re = read_f64(&mut input)?;
            let im = read_f64(&mut input)?;
            comp.push(Complex64::new(re, im));
        }
    }
    SpectralField::from_coeffs(&grid, coeffs)
}

pub fn write_text<W: Write>(f: &SpectralField, mut out: W) -> Result<()> {
    let g = f.grid();
    let [n0, n1, n2] = g.dims();
    let [l0, l1, l2] = g.box_length();
    writeln!(out, "# vche field snapshot v{VERSION}")?;
    writeln!(out, "dims {n0} {n1} {n2}")?;
    writeln!(out, "box_length {l0:?} {l1:?} {l2:?}")?;
    writeln!(out, "dealias {:?}", g.dealias())?;
    for (comp, c) in f.coeffs().iter().enumerate() {
        for (idx, v) in c.iter().enumerate() {
            if v.re == 0.0 && v.im == 0.0 {
                continue;
            }
            let i2 = idx % n2;
            let i1 = (idx / n2) % n1;
            let i0 = idx / (n1 * n2);
            writeln!(out, "{i0} {i1} {i2} {comp} {:?} {:?}", v.re, v.im)?;
        }
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(tok: Option<&str>, what: &str) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Format(format!("could not parse {what}")))
}

pub fn read_text<R: Read>(input: R) -> Result<SpectralField> {
    let mut dims = None;
    let mut box_length = None;
    let mut dealias = None;
    let mut entries = Vec::new();
    for line in BufReader::new(input).lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tok = line.split_whitespace();
        match tok.clone().next() {
            Some("dims") => {
                tok.next();
                dims = Some([
                    parse::<usize>(tok.next(), "dims")?,
                    parse(tok.next(), "dims")?,
                    parse(tok.next(), "dims")?,
                ]);
            }
            Some("box_length") => {
                tok.next();
                box_length = Some([
                    parse::<f64>(tok.next(), "box_length")?,
                    parse(tok.next(), "box_length")?,
                    parse(tok.next(), "box_length")?,
                ]);
            }
            Some("dealias") => {
                tok.next();
                dealias = Some(parse::<f64>(tok.next(), "dealias")?);
            }
            _ => {
                let i0: usize = parse(tok.next(), "index")?;
                let i1: usize = parse(tok.next(), "index")?;
                let i2: usize = parse(tok.next(), "index")?;
                let comp: usize = parse(tok.next(), "component")?;
                let re: f64 = parse(tok.next(), "re")?;
                let im: f64 = parse(tok.next(), "im")?;
                entries.push((i0, i1, i2, comp, Complex64::new(re, im)));
            }
        }
    }
    let dims = dims.ok_or_else(|| Error::Format("missing dims".into()))?;
    let grid = Grid::new(
        dims,
        box_length.ok_or_else(|| Error::Format("missing box_length".into()))?,
        dealias.ok_or_else(|| Error::Format("missing dealias".into()))?,
    )?;
    let mut coeffs: [Vec<Complex64>; 3] = std::array::from_fn(|_| vec![Complex64::new(0.0, 0.0); grid.len()]);
    for (i0, i1, i2, comp, v) in entries {
        if i0 >= dims[0] || i1 >= dims[1] || i2 >= dims[2] || comp >= 3 {
            return Err(Error::Format("coefficient index out of range".into()));
        }
        coeffs[comp][(i0 * dims[1] + i1) * dims[2] + i2] = v;
    }
    SpectralField::from_coeffs(&grid, coeffs)
}

pub fn save(f: &SpectralField, path: &Path) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    if path.extension().is_some_and(|e| e == "txt") {
        write_text(f, file)
    } else {
        write_binary(f, file)
    }
}

pub fn load(path: &Path) -> Result<SpectralField> {
    let file = std::fs::File::open(path)?;
    if path.extension().is_some_and(|e| e == "txt") {
        read_text(file)
    } else {
        read_binary(file)
    }
}

pub fn write_control<W: Write>(u: &ControlField, mut out: W) -> Result<()> {
    write_header(u.grid(), CONTROL_MAGIC, &mut out)?;
    out.write_all(&(u.steps() as u32).to_le_bytes())?;
    out.write_all(&u.dt().to_le_bytes())?;
    let mut buf = Vec::with_capacity(8 * u.values().len());
    for v in u.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_control<R: Read>(mut input: R) -> Result<ControlField> {
    let grid = read_header(CONTROL_MAGIC, &mut input)?;
    let steps = read_u32(&mut input)? as usize;
    let dt = read_f64(&mut input)?;
    let n = steps * 3 * grid.len();
    let mut bytes = vec![0u8; 8 * n];
    input.read_exact(&mut bytes)?;
    let values = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
        .collect();
    ControlField::from_values(&grid, steps, dt, values)
}

pub fn save_control(u: &ControlField, path: &Path) -> Result<()> {
    write_control(u, std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn load_control(path: &Path) -> Result<ControlField> {
    read_control(BufReader::new(std::fs::File::open(path)?))
}
