//! Binary parameter checkpoints.
//!
//! Layout (all integers little-endian `u32`):
//!
//! ```text
//! "VNM1" | k | layers | heads | width
//! repeated until EOF:
//!     name_len | name bytes (UTF-8) | rank | dims[rank] | f64 LE values
//! ```

use super::params::ParamSet;
use super::tensor::Tensor;
use crate::error::{Result, VenomError};

pub const MAGIC: &[u8; 4] = b"VNM1";
const MAX_RANK: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckpointHeader {
    pub k: u32,
    pub layers: u32,
    pub heads: u32,
    pub width: u32,
}

pub fn encode_checkpoint(header: &CheckpointHeader, params: &ParamSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + params.scalar_count() * 8);
    out.extend_from_slice(MAGIC);
    for v in [header.k, header.layers, header.heads, header.width] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for (name, t) in params.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for d in t.shape() {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8], what: &'static str) -> Self {
        Reader { buf, pos: 0, what }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(VenomError::parse(
                self.what,
                format!("truncated at byte {} (wanted {n} more)", self.pos),
            ));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f64(&mut self) -> Result<f64> {
        let b = self.take(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(f64::from_le_bytes(a))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(CheckpointHeader, ParamSet)> {
    let mut r = Reader::new(bytes, "checkpoint");
    if r.take(4)? != MAGIC {
        return Err(VenomError::parse("checkpoint", "bad magic"));
    }
    let header = CheckpointHeader {
        k: r.u32()?,
        layers: r.u32()?,
        heads: r.u32()?,
        width: r.u32()?,
    };
    let mut params = ParamSet::new(0);
    while r.remaining() > 0 {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| VenomError::parse("checkpoint", "parameter name is not UTF-8"))?
            .to_string();
        let rank = r.u32()? as usize;
        if rank == 0 || rank > MAX_RANK {
            return Err(VenomError::parse("checkpoint", format!("{name}: bad rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        let mut count: usize = 1;
        for _ in 0..rank {
            let d = r.u32()? as usize;
            count = count
                .checked_mul(d)
                .filter(|c| *c > 0 && c.saturating_mul(8) <= r.remaining())
                .ok_or_else(|| VenomError::parse("checkpoint", format!("{name}: bad shape")))?;
            shape.push(d);
        }
        let data = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(VenomError::parse("checkpoint", format!("{name}: non-finite value")));
        }
        params
            .insert(name, Tensor::new(shape, data)?)
            .map_err(|e| VenomError::parse("checkpoint", e.to_string()))?;
    }
    Ok((header, params))
}
