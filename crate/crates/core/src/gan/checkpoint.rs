//! `RGAN` checkpoint files.
//!
//! Layout (little-endian): magic `RGAN`, format version `u32`, config JSON
//! length `u32` and bytes, block count `u32`, then per block: name length
//! `u16`, name bytes, rank `u32`, each dimension as `u64`, and the values as
//! `f32`.

use std::io::{Read, Write};

use super::config::GanConfig;
use super::model::CoupledGan;
use crate::nn::Params;
use crate::{Error, Result};

pub const RGAN_MAGIC: &[u8; 4] = b"RGAN";
pub const RGAN_VERSION: u32 = 1;

pub fn save_checkpoint<W: Write>(mut out: W, model: &CoupledGan<f32>) -> Result<()> {
    out.write_all(RGAN_MAGIC)?;
    out.write_all(&RGAN_VERSION.to_le_bytes())?;
    let cfg = serde_json::to_vec(&model.config).map_err(|e| Error::Format(e.to_string()))?;
    out.write_all(&(cfg.len() as u32).to_le_bytes())?;
    out.write_all(&cfg)?;
    let blocks = model.blocks();
    out.write_all(&(blocks.len() as u32).to_le_bytes())?;
    for b in blocks {
        out.write_all(&(b.name.len() as u16).to_le_bytes())?;
        out.write_all(b.name.as_bytes())?;
        out.write_all(&(b.tensor.shape().len() as u32).to_le_bytes())?;
        for &d in b.tensor.shape() {
            out.write_all(&(d as u64).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(b.tensor.len() * 4);
        for v in b.tensor.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    out.flush()?;
    Ok(())
}

pub fn checkpoint_bytes(model: &CoupledGan<f32>) -> Vec<u8> {
    let mut v = Vec::new();
    save_checkpoint(&mut v, model).expect("writing to memory cannot fail");
    v
}

fn read_exact<R: Read>(input: &mut R, n: usize, what: &str) -> Result<Vec<u8>> {
    let mut buf = vec![0u8; n];
    input
        .read_exact(&mut buf)
        .map_err(|_| Error::Format(format!("checkpoint truncated while reading {what}")))?;
    Ok(buf)
}

fn read_u32<R: Read>(input: &mut R, what: &str) -> Result<u32> {
    Ok(u32::from_le_bytes(read_exact(input, 4, what)?.try_into().unwrap()))
}

pub fn load_checkpoint<R: Read>(mut input: R) -> Result<CoupledGan<f32>> {
    if read_exact(&mut input, 4, "magic")? != RGAN_MAGIC {
        return Err(Error::Format("not an RGAN checkpoint (bad magic)".into()));
    }
    let version = read_u32(&mut input, "version")?;
    if version != RGAN_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let n = read_u32(&mut input, "config length")? as usize;
    let cfg: GanConfig =
        serde_json::from_slice(&read_exact(&mut input, n, "config")?).map_err(|e| Error::Format(e.to_string()))?;
    let mut model = CoupledGan::<f32>::new(&cfg)?;
    let count = read_u32(&mut input, "block count")? as usize;
    let mut blocks = model.blocks_mut();
    if count != blocks.len() {
        return Err(Error::Format(format!(
            "checkpoint has {count} blocks, configuration implies {}",
            blocks.len()
        )));
    }
    for (name, tensor) in blocks.iter_mut() {
        let len = u16::from_le_bytes(read_exact(&mut input, 2, "name length")?.try_into().unwrap()) as usize;
        let got = String::from_utf8(read_exact(&mut input, len, "name")?)
            .map_err(|_| Error::Format("block name is not UTF-8".into()))?;
        if &got != name {
            return Err(Error::Format(format!("expected block {name}, found {got}")));
        }
        let rank = read_u32(&mut input, "rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(u64::from_le_bytes(read_exact(&mut input, 8, "shape")?.try_into().unwrap()) as usize);
        }
        if shape != tensor.shape() {
            return Err(Error::Format(format!(
                "block {name} has shape {shape:?}, expected {:?}",
                tensor.shape()
            )));
        }
        let raw = read_exact(&mut input, tensor.len() * 4, name)?;
        for (dst, src) in tensor.data_mut().iter_mut().zip(raw.chunks_exact(4)) {
            *dst = f32::from_le_bytes(src.try_into().unwrap());
        }
    }
    drop(blocks);
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    Ok(model)
}
