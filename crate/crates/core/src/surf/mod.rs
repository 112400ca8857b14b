//! SURF interest-point detection: the fixed-point datapath used by the
//! fabric IP model and the floating-point host reference.

pub mod encoding;
pub mod fixed;
pub mod host;
pub mod integral;
pub mod ip;
pub mod qformat;

pub use integral::{box_sum, integral_image, GrayImage, IntegralImage, MAX_IMAGE_DIM};

use qformat::Q16;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SurfError {
    #[error("bad image dimensions {rows}x{cols} (must be 1..={max} per side)", max = MAX_IMAGE_DIM)]
    BadImage { rows: usize, cols: usize },
    #[error("filter size {filter_size} exceeds the image, layer skipped")]
    LayerSkipped { filter_size: u32 },
    #[error("scale-space pyramid needs at least 3 layers, got {layers}")]
    BadPyramid { layers: usize },
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("point too close to the border for orientation assignment")]
    OrientationUndefined,
    #[error("point too close to the border for a descriptor window")]
    DescriptorUndefined,
    #[error("result buffer reports the device error sentinel")]
    ErrorSentinel,
    #[error("result buffer truncated")]
    ResultsTruncated,
}

/// A detected feature. `x` is the column, `y` the row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterestPoint {
    pub x: u32,
    pub y: u32,
    /// Box-filter side length the point was detected at.
    pub filter_size: u32,
    /// 1.2 * filter_size / 9 in Q16.16.
    pub scale: Q16,
    /// Hessian determinant response in Q16.16.
    pub response: Q16,
    /// Sign bit of the filter trace (Dxx + Dyy >= 0).
    pub laplacian: u8,
}

/// Detection parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfParams {
    pub min_hessian: f64,
    pub n_octaves: u32,
    pub intervals: u32,
    pub levels: u32,
}

impl Default for SurfParams {
    fn default() -> Self {
        Self {
            min_hessian: 10.0,
            n_octaves: 1,
            intervals: 2,
            levels: 4,
        }
    }
}

impl SurfParams {
    /// Non-maximum suppression needs a scale above and below, so at least
    /// three pyramid levels, and the interval count is the number of
    /// interior levels eligible for maxima.
    pub fn validate(&self) -> Result<(), SurfError> {
        if self.levels < 3 {
            return Err(SurfError::BadParams(format!(
                "levels must be >= 3, got {}",
                self.levels
            )));
        }
        if self.intervals != self.levels - 2 {
            return Err(SurfError::BadParams(format!(
                "intervals must equal levels - 2 ({} != {})",
                self.intervals,
                self.levels - 2
            )));
        }
        if self.n_octaves == 0 {
            return Err(SurfError::BadParams("n_octaves must be >= 1".into()));
        }
        Ok(())
    }

    pub fn min_hessian_q16(&self) -> i64 {
        qformat::from_f64(self.min_hessian) as i64
    }
}
