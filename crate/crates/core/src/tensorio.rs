//! Flat binary tensors. Layout, all little-endian:
//! `b"FPTN"`, element size in bytes (`u32`, 4 or 8), rank (`u32`),
//! one `u64` per dimension, then the elements in row-major order.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"FPTN";

/// Largest rank accepted on read.
const MAX_RANK: u32 = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n = element_count(&dims)?;
        if n != data.len() {
            return Err(Error::Shape(format!(
                "{} elements for dims {dims:?}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }
}

fn element_count(dims: &[usize]) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, d| acc.checked_mul(*d))
        .ok_or_else(|| Error::TensorFormat(format!("dims {dims:?} overflow")))
}

/// Writes `t` with 8-byte elements.
pub fn write_tensor(mut w: impl Write, t: &Tensor) -> Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&8u32.to_le_bytes())?;
    w.write_all(&(t.dims.len() as u32).to_le_bytes())?;
    for d in &t.dims {
        w.write_all(&(*d as u64).to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(t.data.len() * 8);
    for v in &t.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_array<const N: usize>(r: &mut impl Read, what: &str) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::TensorFormat(format!("truncated {what}")),
        _ => Error::Io(e),
    })?;
    Ok(b)
}

/// Reads a tensor with 4- or 8-byte elements; 4-byte data is widened.
pub fn read_tensor(mut r: impl Read) -> Result<Tensor> {
    if read_array::<4>(&mut r, "magic")? != MAGIC {
        return Err(Error::TensorFormat("bad magic".into()));
    }
    let elem = u32::from_le_bytes(read_array(&mut r, "header")?);
    if elem != 4 && elem != 8 {
        return Err(Error::TensorFormat(format!("unsupported element size {elem}")));
    }
    let rank = u32::from_le_bytes(read_array(&mut r, "header")?);
    if rank > MAX_RANK {
        return Err(Error::TensorFormat(format!("rank {rank} exceeds {MAX_RANK}")));
    }
    let mut dims = Vec::with_capacity(rank as usize);
    for _ in 0..rank {
        let d = u64::from_le_bytes(read_array(&mut r, "dims")?);
        dims.push(usize::try_from(d).map_err(|_| Error::TensorFormat(format!("dim {d} too large")))?);
    }
    let n = element_count(&dims)?;
    let bytes = n
        .checked_mul(elem as usize)
        .ok_or_else(|| Error::TensorFormat("payload size overflows".into()))?;
    let mut payload = Vec::new();
    r.take(bytes as u64).read_to_end(&mut payload)?;
    if payload.len() != bytes {
        return Err(Error::TensorFormat(format!(
            "expected {bytes} payload bytes, found {}",
            payload.len()
        )));
    }
    let data = if elem == 8 {
        payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect()
    } else {
        payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64)
            .collect()
    };
    Ok(Tensor { dims, data })
}

pub fn save(path: impl AsRef<Path>, t: &Tensor) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_tensor(&mut w, t)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Tensor> {
    read_tensor(std::io::BufReader::new(std::fs::File::open(path)?))
}
