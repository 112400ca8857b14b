//! Result wire format between the detection IP and host programs.
//!
//! At `byte_wroffset` the IP writes a little-endian 32-bit point count,
//! then one 5-word record per point: x, y, filter_size, response (Q16.16,
//! two's complement, saturated to 32 bits), laplacian. A count word of
//! `0xFFFF_FFFF` signals that the run was rejected.

use super::qformat;
use super::{InterestPoint, SurfError};
use crate::fabric::{FabricError, FabricMemory};

pub const WORDS_PER_POINT: usize = 5;
pub const ERROR_SENTINEL: u32 = 0xFFFF_FFFF;

/// Bytes the encoded form of `n` points occupies.
pub fn encoded_len(n: usize) -> usize {
    4 * (1 + WORDS_PER_POINT * n)
}

pub fn encode_results(
    points: &[InterestPoint],
    mem: &mut FabricMemory,
    byte_wroffset: u32,
) -> Result<(), FabricError> {
    let end = byte_wroffset as u64 + encoded_len(points.len()) as u64;
    if end > mem.size() as u64 {
        return Err(FabricError::BusError { addr: byte_wroffset });
    }
    let mut off = byte_wroffset;
    mem.write_u32(off, points.len() as u32)?;
    off += 4;
    for p in points {
        for word in [
            p.x,
            p.y,
            p.filter_size,
            p.response as u32,
            p.laplacian as u32,
        ] {
            mem.write_u32(off, word)?;
            off += 4;
        }
    }
    Ok(())
}

/// Writes the error sentinel if there is room for it.
pub fn encode_error(mem: &mut FabricMemory, byte_wroffset: u32) {
    let _ = mem.write_u32(byte_wroffset, ERROR_SENTINEL);
}

pub fn decode_results(words: &[u32]) -> Result<Vec<InterestPoint>, SurfError> {
    let &count = words.first().ok_or(SurfError::ResultsTruncated)?;
    if count == ERROR_SENTINEL {
        return Err(SurfError::ErrorSentinel);
    }
    let count = count as usize;
    if words.len() < 1 + WORDS_PER_POINT * count {
        return Err(SurfError::ResultsTruncated);
    }
    let mut points = Vec::with_capacity(count);
    for rec in words[1..1 + WORDS_PER_POINT * count].chunks_exact(WORDS_PER_POINT) {
        points.push(InterestPoint {
            x: rec[0],
            y: rec[1],
            filter_size: rec[2],
            scale: qformat::scale_for_filter(rec[2]),
            response: rec[3] as i32,
            laplacian: rec[4] as u8,
        });
    }
    Ok(points)
}
