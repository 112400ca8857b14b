//! Integral image and the four-corner rectangle query.

use super::SurfError;

/// Images larger than this per side would overflow the 32-bit sums
/// (4096 * 4096 * 255 < 2^32).
pub const MAX_IMAGE_DIM: usize = 4096;

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(rows: usize, cols: usize, pixels: Vec<u8>) -> Self {
        assert_eq!(pixels.len(), rows * cols, "pixel buffer does not match dimensions");
        Self { rows, cols, pixels }
    }

    pub fn filled(rows: usize, cols: usize, value: u8) -> Self {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> u8 {
        self.pixels[r * self.cols + c]
    }
}

/// Inclusive 2-D prefix sums: `data[r][c] = sum of pixels[i][j] for i <= r, j <= c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegralImage {
    pub rows: usize,
    pub cols: usize,
    data: Vec<u32>,
}

impl IntegralImage {
    #[inline]
    pub fn at(&self, r: usize, c: usize) -> u32 {
        self.data[r * self.cols + c]
    }
}

/// Builds the integral image. Exact integer arithmetic; sums cannot
/// overflow within the dimension cap.
pub fn integral_image(image: &GrayImage) -> Result<IntegralImage, SurfError> {
    let (rows, cols) = (image.rows, image.cols);
    if rows == 0 || cols == 0 || rows > MAX_IMAGE_DIM || cols > MAX_IMAGE_DIM {
        return Err(SurfError::BadImage { rows, cols });
    }
    let mut data = vec![0u32; rows * cols];
    for r in 0..rows {
        let mut row_sum = 0u32;
        for c in 0..cols {
            row_sum += image.at(r, c) as u32;
            let above = if r > 0 { data[(r - 1) * cols + c] } else { 0 };
            data[r * cols + c] = row_sum + above;
        }
    }
    Ok(IntegralImage { rows, cols, data })
}

/// Sum over the rectangle `[row, row+height) x [col, col+width)` with the
/// corners clamped to the image. Out-of-image rectangles are legal and an
/// empty intersection yields 0.
pub fn box_sum(ii: &IntegralImage, row: i64, col: i64, height: i64, width: i64) -> u64 {
    let r0 = row.clamp(0, ii.rows as i64);
    let r1 = (row + height).clamp(0, ii.rows as i64);
    let c0 = col.clamp(0, ii.cols as i64);
    let c1 = (col + width).clamp(0, ii.cols as i64);
    if r1 <= r0 || c1 <= c0 {
        return 0;
    }
    let (r0, r1, c0, c1) = (r0 as usize, r1 as usize, c0 as usize, c1 as usize);
    let mut sum = ii.at(r1 - 1, c1 - 1) as i64;
    if r0 > 0 {
        sum -= ii.at(r0 - 1, c1 - 1) as i64;
    }
    if c0 > 0 {
        sum -= ii.at(r1 - 1, c0 - 1) as i64;
    }
    if r0 > 0 && c0 > 0 {
        sum += ii.at(r0 - 1, c0 - 1) as i64;
    }
    debug_assert!(sum >= 0);
    sum as u64
}
