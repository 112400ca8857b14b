//! Deterministic synthetic test images: a jittered grid of
//! Gaussian-profile blobs, so detection counts and cycle totals are
//! reproducible from the seed alone.

use crate::surf::GrayImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CELL: usize = 32;

/// Renders one blob per 32x32 grid cell.  Per blob, drawn in fixed order
/// from a ChaCha8 stream seeded with `seed`: center jitter uniform in
/// [-8, 8] pixels per axis, amplitude uniform in [120, 255], sigma uniform
/// in [1.8, 3.2].  Pixel values are the clamped sum of all blob profiles
/// over a black background.
pub fn seeded_blobs(rows: usize, cols: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blobs = Vec::new();
    let grid_r = rows.div_ceil(CELL);
    let grid_c = cols.div_ceil(CELL);
    for gr in 0..grid_r {
        for gc in 0..grid_c {
            let cy = (gr * CELL + CELL / 2) as f64 + rng.gen_range(-8.0..8.0);
            let cx = (gc * CELL + CELL / 2) as f64 + rng.gen_range(-8.0..8.0);
            let amp = rng.gen_range(120.0..255.0);
            let sigma: f64 = rng.gen_range(1.8..3.2);
            blobs.push((cy, cx, amp, sigma));
        }
    }

    let mut pixels = vec![0u8; rows * cols];
    for (cy, cx, amp, sigma) in blobs {
        let reach = (4.0 * sigma).ceil() as i64;
        let r0 = ((cy as i64) - reach).max(0) as usize;
        let r1 = (((cy as i64) + reach + 1).max(0) as usize).min(rows);
        let c0 = ((cx as i64) - reach).max(0) as usize;
        let c1 = (((cx as i64) + reach + 1).max(0) as usize).min(cols);
        for r in r0..r1 {
            for c in c0..c1 {
                let (dy, dx) = (r as f64 - cy, c as f64 - cx);
                let v = amp * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
                let cur = pixels[r * cols + c] as f64;
                pixels[r * cols + c] = (cur + v).min(255.0) as u8;
            }
        }
    }
    GrayImage::new(rows, cols, pixels)
}
