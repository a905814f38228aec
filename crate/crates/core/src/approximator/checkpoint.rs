//! Parameter checkpoint files.
//!
//! Layout (all integers and floats little-endian):
//!
//! | offset | size | field                          |
//! |--------|------|--------------------------------|
//! | 0      | 8    | magic `b"ESDQNCK1"`            |
//! | 8      | 4    | input_dim (u32)                |
//! | 12     | 4    | hidden_units (u32)             |
//! | 16     | 4    | num_actions (u32)              |
//! | 20     | 4    | reserved, zero                 |
//! | 24     | 8    | seed (u64)                     |
//! | 32     | 8·P  | parameters (f64), flat layout  |
//!
//! `P = hidden·input + hidden + actions·hidden + actions`, in the order
//! `W1 | b1 | W2 | b2` with row-major weight blocks.

use std::io::{Read, Write};
use std::path::Path;

use super::QNetworkParams;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"ESDQNCK1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub params: QNetworkParams,
}

pub fn write_checkpoint(mut w: impl Write, seed: u64, params: &QNetworkParams) -> Result<()> {
    let dim = |v: usize| -> Result<[u8; 4]> {
        u32::try_from(v)
            .map(u32::to_le_bytes)
            .map_err(|_| Error::Checkpoint("dimension exceeds u32".into()))
    };
    w.write_all(MAGIC)?;
    w.write_all(&dim(params.input_dim())?)?;
    w.write_all(&dim(params.hidden_units())?)?;
    w.write_all(&dim(params.num_actions())?)?;
    w.write_all(&0u32.to_le_bytes())?;
    w.write_all(&seed.to_le_bytes())?;
    for v in params.as_flat() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint(mut r: impl Read) -> Result<Checkpoint> {
    let mut header = [0u8; 32];
    r.read_exact(&mut header)?;
    if &header[..8] != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap()) as usize;
    let (input, hidden, actions) = (u32_at(8), u32_at(12), u32_at(16));
    let seed = u64::from_le_bytes(header[24..32].try_into().unwrap());
    let count = QNetworkParams::param_count(input, hidden, actions);
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::Checkpoint("truncated parameter block".into()))?;
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let params = QNetworkParams::from_flat(input, hidden, actions, data)
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok(Checkpoint { seed, params })
}

pub fn save_checkpoint(path: impl AsRef<Path>, seed: u64, params: &QNetworkParams) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_checkpoint(&mut w, seed, params)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    read_checkpoint(std::io::BufReader::new(std::fs::File::open(path)?))
}
