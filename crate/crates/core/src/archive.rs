//! Binary model archive.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic      8 bytes  "NOTMFAR1"
//! config     rank u64, order u64, season u64, lambda f64, rho f64,
//!            outer_iters u64, cg_iters u64, cg_tol f64, variant u8, seed u64
//! W, X, A    each: rows u64, cols u64, then rows*cols f64 in row-major order
//! trace      len u64, then len f64
//! ```
//!
//! Floats are stored as raw bits, so a round trip is bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{FactorModel, ModelConfig, Variant};
use crate::solvers::VarCoefficients;

const MAGIC: &[u8; 8] = b"NOTMFAR1";

pub fn write_model<W: Write>(out: &mut W, model: &FactorModel) -> Result<()> {
    let c = model.config();
    out.write_all(MAGIC)?;
    for v in [c.rank, c.order, c.season] {
        put_u64(out, v as u64)?;
    }
    put_f64(out, c.lambda)?;
    put_f64(out, c.rho)?;
    put_u64(out, c.outer_iters as u64)?;
    put_u64(out, c.cg_iters as u64)?;
    put_f64(out, c.cg_tol)?;
    out.write_all(&[c.variant.code()])?;
    put_u64(out, c.seed)?;
    for m in [model.w(), model.x(), model.coeffs().stacked()] {
        put_matrix(out, m)?;
    }
    put_u64(out, model.objective_trace().len() as u64)?;
    for v in model.objective_trace() {
        put_f64(out, *v)?;
    }
    Ok(())
}

pub fn read_model<R: Read>(input: &mut R) -> Result<FactorModel> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Archive("bad magic".into()));
    }
    let rank = get_usize(input)?;
    let order = get_usize(input)?;
    let season = get_usize(input)?;
    let lambda = get_f64(input)?;
    let rho = get_f64(input)?;
    let outer_iters = get_usize(input)?;
    let cg_iters = get_usize(input)?;
    let cg_tol = get_f64(input)?;
    let mut code = [0u8; 1];
    input.read_exact(&mut code)?;
    let variant = Variant::from_code(code[0])
        .ok_or_else(|| Error::Archive(format!("unknown variant code {}", code[0])))?;
    let seed = get_u64(input)?;
    let config = ModelConfig {
        rank,
        order,
        season,
        lambda,
        rho,
        outer_iters,
        cg_iters,
        cg_tol,
        variant,
        seed,
    };
    let w = get_matrix(input)?;
    let x = get_matrix(input)?;
    let stacked = get_matrix(input)?;
    let len = get_usize(input)?;
    let trace = (0..len)
        .map(|_| get_f64(input))
        .collect::<Result<Vec<_>>>()?;
    let coeffs = VarCoefficients::new(stacked, order, config.diagonal())?;
    FactorModel::from_parts(w, x, coeffs, config, trace)
}

pub fn save(path: &Path, model: &FactorModel) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_model(&mut out, model)?;
    out.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<FactorModel> {
    read_model(&mut BufReader::new(File::open(path)?))
}

fn put_u64<W: Write>(out: &mut W, v: u64) -> Result<()> {
    out.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64<W: Write>(out: &mut W, v: f64) -> Result<()> {
    put_u64(out, v.to_bits())
}

fn put_matrix<W: Write>(out: &mut W, m: &DMatrix<f64>) -> Result<()> {
    put_u64(out, m.nrows() as u64)?;
    put_u64(out, m.ncols() as u64)?;
    for row in m.row_iter() {
        for v in row.iter() {
            put_f64(out, *v)?;
        }
    }
    Ok(())
}

fn get_u64<R: Read>(input: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    input
        .read_exact(&mut buf)
        .map_err(|e| Error::Archive(format!("truncated archive: {e}")))?;
    Ok(u64::from_le_bytes(buf))
}

fn get_usize<R: Read>(input: &mut R) -> Result<usize> {
    usize::try_from(get_u64(input)?).map_err(|_| Error::Archive("size overflows usize".into()))
}

fn get_f64<R: Read>(input: &mut R) -> Result<f64> {
    Ok(f64::from_bits(get_u64(input)?))
}

fn get_matrix<R: Read>(input: &mut R) -> Result<DMatrix<f64>> {
    let rows = get_usize(input)?;
    let cols = get_usize(input)?;
    let n = rows
        .checked_mul(cols)
        .filter(|n| *n <= 1 << 32)
        .ok_or_else(|| Error::Archive(format!("implausible matrix shape {rows}x{cols}")))?;
    let data = (0..n).map(|_| get_f64(input)).collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}
