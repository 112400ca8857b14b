//! The SURF detection IP model: register map, parameter decoding, and the
//! execute binding that runs the fixed-point pipeline against fabric
//! memory.
//!
//! Input pixels are stored one per 32-bit word (value in the low byte,
//! upper bytes ignored) starting at BYTE_RDOFFSET; results are encoded at
//! BYTE_WROFFSET per [`super::encoding`].

use super::encoding;
use super::fixed;
use super::integral::{GrayImage, MAX_IMAGE_DIM};
use crate::fabric::FabricMemory;
use crate::ipcore::{Access, IpModel, RegisterDef, RegisterFile, RegisterSpec};

pub const IP_NAME: &str = "SURF_detect";

pub const REG_CTRL: u32 = 0x00;
pub const REG_BYTE_RDOFFSET: u32 = 0x10;
pub const REG_BYTE_WROFFSET: u32 = 0x18;
pub const REG_ROWS: u32 = 0x20;
pub const REG_COLS: u32 = 0x28;
/// Q16.16 threshold.
pub const REG_MIN_HESSIAN: u32 = 0x30;
pub const REG_N_OCTAVES: u32 = 0x38;
pub const REG_INTERVALS: u32 = 0x40;
pub const REG_LEVELS: u32 = 0x48;

/// Cycle model: `rows*cols*(1 + levels*CYCLES_PER_PIXEL_LEVEL)` plus
/// `CYCLES_PER_POINT` per emitted point. Bookkeeping constants; only the
/// scaling behavior is meaningful, never the absolute values.
pub const CYCLES_PER_PIXEL_LEVEL: u64 = 10;
pub const CYCLES_PER_POINT: u64 = 30;

pub fn model_cycles(rows: u64, cols: u64, levels: u64, n_points: u64) -> u64 {
    rows * cols * (1 + levels * CYCLES_PER_PIXEL_LEVEL) + n_points * CYCLES_PER_POINT
}

pub fn register_spec() -> RegisterSpec {
    RegisterSpec {
        registers: vec![
            RegisterDef::new(REG_CTRL, "CTRL", Access::ReadWrite),
            RegisterDef::new(REG_BYTE_RDOFFSET, "BYTE_RDOFFSET", Access::ReadWrite),
            RegisterDef::new(REG_BYTE_WROFFSET, "BYTE_WROFFSET", Access::ReadWrite),
            RegisterDef::new(REG_ROWS, "ROWS", Access::ReadWrite),
            RegisterDef::new(REG_COLS, "COLS", Access::ReadWrite),
            RegisterDef::new(REG_MIN_HESSIAN, "MIN_HESSIAN", Access::ReadWrite),
            RegisterDef::new(REG_N_OCTAVES, "N_OCTAVES", Access::ReadWrite),
            RegisterDef::new(REG_INTERVALS, "INTERVALS", Access::ReadWrite),
            RegisterDef::new(REG_LEVELS, "LEVELS", Access::ReadWrite),
        ],
    }
}

#[derive(Debug, Default)]
pub struct SurfCore;

impl SurfCore {
    pub fn new() -> Self {
        Self
    }
}

struct DecodedRegs {
    rdoffset: u32,
    wroffset: u32,
    rows: usize,
    cols: usize,
    min_hessian_q16: i64,
    n_octaves: u32,
    levels: u32,
}

fn decode_registers(regs: &RegisterFile, mem: &FabricMemory) -> Option<DecodedRegs> {
    let rows = regs.value(REG_ROWS)? as usize;
    let cols = regs.value(REG_COLS)? as usize;
    let rdoffset = regs.value(REG_BYTE_RDOFFSET)?;
    let wroffset = regs.value(REG_BYTE_WROFFSET)?;
    let min_hessian_q16 = regs.value(REG_MIN_HESSIAN)? as i64;
    let n_octaves = regs.value(REG_N_OCTAVES)?;
    let intervals = regs.value(REG_INTERVALS)?;
    let levels = regs.value(REG_LEVELS)?;

    if rows == 0 || cols == 0 || rows > MAX_IMAGE_DIM || cols > MAX_IMAGE_DIM {
        return None;
    }
    if levels < 3 || intervals != levels - 2 || n_octaves == 0 {
        return None;
    }
    // the pixel words must fit in fabric memory
    let pixel_bytes = 4 * rows as u64 * cols as u64;
    if rdoffset as u64 + pixel_bytes > mem.size() as u64 {
        return None;
    }
    if (wroffset as u64 + 4) > mem.size() as u64 {
        return None;
    }
    Some(DecodedRegs {
        rdoffset,
        wroffset,
        rows,
        cols,
        min_hessian_q16,
        n_octaves,
        levels,
    })
}

fn read_pixels(mem: &FabricMemory, offset: u32, rows: usize, cols: usize) -> GrayImage {
    let mut bytes = vec![0u8; 4 * rows * cols];
    mem.read(offset, &mut bytes).expect("range checked by caller");
    let pixels = bytes.chunks_exact(4).map(|w| w[0]).collect();
    GrayImage::new(rows, cols, pixels)
}

impl IpModel for SurfCore {
    fn name(&self) -> &str {
        IP_NAME
    }

    fn register_spec(&self) -> RegisterSpec {
        register_spec()
    }

    fn execute(&self, regs: &RegisterFile, mem: &mut FabricMemory) -> u64 {
        let Some(d) = decode_registers(regs, mem) else {
            // Out-of-range registers: report the sentinel, charge nothing.
            if let Some(wroffset) = regs.value(REG_BYTE_WROFFSET) {
                encoding::encode_error(mem, wroffset);
            }
            return 0;
        };
        let image = read_pixels(mem, d.rdoffset, d.rows, d.cols);
        let Ok(points) = fixed::detect_q16(&image, d.n_octaves, d.levels, d.min_hessian_q16)
        else {
            encoding::encode_error(mem, d.wroffset);
            return 0;
        };
        if encoding::encode_results(&points, mem, d.wroffset).is_err() {
            encoding::encode_error(mem, d.wroffset);
            return 0;
        }
        model_cycles(
            d.rows as u64,
            d.cols as u64,
            d.levels as u64,
            points.len() as u64,
        )
    }
}
