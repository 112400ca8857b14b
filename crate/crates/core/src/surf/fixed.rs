//! Fixed-point detection datapath: box-filter Hessian response layers and
//! 3x3x3 non-maximum suppression, all in Q16.16.

use super::integral::{box_sum, integral_image, GrayImage, IntegralImage};
use super::qformat;
use super::{InterestPoint, SurfError, SurfParams};

/// One scale of the Hessian response pyramid. Responses are Q16.16 in a
/// 64-bit lane, one per image pixel (sample step 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseLayer {
    pub filter_size: u32,
    pub rows: usize,
    pub cols: usize,
    pub responses: Vec<i64>,
    pub laplacian: Vec<u8>,
}

impl ResponseLayer {
    #[inline]
    pub fn at(&self, r: usize, c: usize) -> i64 {
        self.responses[r * self.cols + c]
    }

    #[inline]
    pub fn lap_at(&self, r: usize, c: usize) -> u8 {
        self.laplacian[r * self.cols + c]
    }
}

/// Box-filter side lengths for one octave. Octave 1 with four levels is
/// 9, 15, 21, 27; each further octave doubles the step and starts one step
/// into the previous octave (15, 27, 39, 51, ...).
pub fn filter_sizes(octave: u32, levels: u32) -> Vec<u32> {
    (0..levels)
        .map(|k| 3 * ((1u32 << octave) * (k + 1) + 1))
        .collect()
}

/// Computes one Hessian response layer from the integral image.
///
/// For each pixel, with lobe `l = filter_size / 3` and border
/// `b = (filter_size - 1) / 2`, the three second-derivative box responses
/// are area-normalized into Q16.16 via `(raw << 16) / filter_size^2` and
/// combined as `Dxx*Dyy - w^2*Dxy^2` with products rescaled back to Q16.16
/// by an arithmetic shift.
pub fn hessian_layer(ii: &IntegralImage, filter_size: u32) -> Result<ResponseLayer, SurfError> {
    if filter_size as usize > ii.rows.min(ii.cols) {
        return Err(SurfError::LayerSkipped { filter_size });
    }
    let fs = filter_size as i64;
    let l = fs / 3;
    let b = (fs - 1) / 2;
    let area = fs * fs;

    let mut responses = vec![0i64; ii.rows * ii.cols];
    let mut laplacian = vec![0u8; ii.rows * ii.cols];
    for r in 0..ii.rows as i64 {
        for c in 0..ii.cols as i64 {
            let dxx_raw = box_sum(ii, r - l + 1, c - b, 2 * l - 1, fs) as i64
                - 3 * box_sum(ii, r - l + 1, c - l / 2, 2 * l - 1, l) as i64;
            let dyy_raw = box_sum(ii, r - b, c - l + 1, fs, 2 * l - 1) as i64
                - 3 * box_sum(ii, r - l / 2, c - l + 1, l, 2 * l - 1) as i64;
            let dxy_raw = box_sum(ii, r - l, c + 1, l, l) as i64
                + box_sum(ii, r + 1, c - l, l, l) as i64
                - box_sum(ii, r - l, c - l, l, l) as i64
                - box_sum(ii, r + 1, c + 1, l, l) as i64;

            let dxx = (dxx_raw << qformat::FRAC_BITS) / area;
            let dyy = (dyy_raw << qformat::FRAC_BITS) / area;
            let dxy = (dxy_raw << qformat::FRAC_BITS) / area;

            let dxy_sq = (dxy * dxy) >> qformat::FRAC_BITS;
            let det = ((dxx * dyy) >> qformat::FRAC_BITS)
                - ((qformat::DXY_WEIGHT_SQ * dxy_sq) >> qformat::FRAC_BITS);

            let idx = (r as usize) * ii.cols + c as usize;
            responses[idx] = det;
            laplacian[idx] = (dxx + dyy >= 0) as u8;
        }
    }
    Ok(ResponseLayer {
        filter_size,
        rows: ii.rows,
        cols: ii.cols,
        responses,
        laplacian,
    })
}

/// Pixels closer than this to any edge are excluded from the scan of an
/// interior layer; the margin comes from the next (larger) filter so the
/// whole 3x3x3 cube sits on validly filtered pixels.
pub(crate) fn nms_margin(next_filter_size: u32) -> usize {
    ((next_filter_size + 1) / 2) as usize
}

/// Extracts interest points: a pixel on an interior layer survives iff its
/// response exceeds `min_hessian` (Q16.16) and is strictly greater than all
/// 26 neighbors in the 3x3x3 cube over the adjacent layers. Output is
/// ordered row-major, then by layer.
pub fn nms_extract(
    layers: &[ResponseLayer],
    min_hessian: i64,
) -> Result<Vec<InterestPoint>, SurfError> {
    validate_pyramid(layers.len(), layers.iter().map(|l| (l.rows, l.cols, l.filter_size)))?;
    let (rows, cols) = (layers[0].rows, layers[0].cols);

    let mut points = Vec::new();
    for k in 1..layers.len() - 1 {
        let margin = nms_margin(layers[k + 1].filter_size);
        if rows < 2 * margin || cols < 2 * margin {
            continue;
        }
        for r in margin..rows - margin {
            for c in margin..cols - margin {
                let v = layers[k].at(r, c);
                if v <= min_hessian {
                    continue;
                }
                if is_cube_maximum(layers, k, r, c, v) {
                    points.push(InterestPoint {
                        x: c as u32,
                        y: r as u32,
                        filter_size: layers[k].filter_size,
                        scale: qformat::scale_for_filter(layers[k].filter_size),
                        response: qformat::saturate(v),
                        laplacian: layers[k].lap_at(r, c),
                    });
                }
            }
        }
    }
    points.sort_by_key(|p| (p.y, p.x, p.filter_size));
    Ok(points)
}

fn is_cube_maximum(layers: &[ResponseLayer], k: usize, r: usize, c: usize, v: i64) -> bool {
    for nk in k - 1..=k + 1 {
        for nr in r - 1..=r + 1 {
            for nc in c - 1..=c + 1 {
                if nk == k && nr == r && nc == c {
                    continue;
                }
                if layers[nk].at(nr, nc) >= v {
                    return false;
                }
            }
        }
    }
    true
}

pub(crate) fn validate_pyramid(
    count: usize,
    dims: impl Iterator<Item = (usize, usize, u32)>,
) -> Result<(), SurfError> {
    if count < 3 {
        return Err(SurfError::BadPyramid { layers: count });
    }
    let mut prev: Option<(usize, usize, u32)> = None;
    for (rows, cols, fs) in dims {
        if let Some((pr, pc, pf)) = prev {
            if pr != rows || pc != cols || pf >= fs {
                return Err(SurfError::BadPyramid { layers: count });
            }
        }
        prev = Some((rows, cols, fs));
    }
    Ok(())
}

/// Full fixed-point detection pipeline: integral image, response layers for
/// every octave, suppression, and a final row-major ordering.
///
/// Filters larger than the image are dropped. The first octave must keep at
/// least three layers; later octaves that lose too many are skipped.
pub fn detect(image: &GrayImage, params: &SurfParams) -> Result<Vec<InterestPoint>, SurfError> {
    params.validate()?;
    detect_q16(image, params.n_octaves, params.levels, params.min_hessian_q16())
}

/// [`detect`] with the threshold already in Q16.16, as the IP register
/// carries it.
pub fn detect_q16(
    image: &GrayImage,
    n_octaves: u32,
    levels: u32,
    min_hessian: i64,
) -> Result<Vec<InterestPoint>, SurfError> {
    let ii = integral_image(image)?;
    let mut points = Vec::new();
    for octave in 1..=n_octaves {
        let mut layers = Vec::new();
        for fs in filter_sizes(octave, levels) {
            match hessian_layer(&ii, fs) {
                Ok(layer) => layers.push(layer),
                Err(SurfError::LayerSkipped { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        if layers.len() < 3 {
            if octave == 1 {
                return Err(SurfError::BadPyramid { layers: layers.len() });
            }
            continue;
        }
        points.extend(nms_extract(&layers, min_hessian)?);
    }
    points.sort_by_key(|p| (p.y, p.x, p.filter_size));
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> GrayImage {
        GrayImage::new(rows, cols, (0..rows * cols).map(|_| rng.gen()).collect())
    }

    fn transpose(img: &GrayImage) -> GrayImage {
        let mut pixels = vec![0u8; img.rows * img.cols];
        for r in 0..img.rows {
            for c in 0..img.cols {
                pixels[c * img.rows + r] = img.at(r, c);
            }
        }
        GrayImage::new(img.cols, img.rows, pixels)
    }

    #[test]
    fn octave_filter_schedule() {
        assert_eq!(filter_sizes(1, 4), vec![9, 15, 21, 27]);
        assert_eq!(filter_sizes(2, 4), vec![15, 27, 39, 51]);
        assert_eq!(filter_sizes(3, 4), vec![27, 51, 75, 99]);
    }

    #[test]
    fn constant_image_has_zero_responses() {
        let img = GrayImage::filled(20, 20, 137);
        let ii = integral_image(&img).unwrap();
        let layer = hessian_layer(&ii, 9).unwrap();
        // Second differences of a constant vanish wherever the filter sits
        // fully inside the image (border pixels see clamped boxes).
        let b = 5usize;
        for r in b..20 - b {
            for c in b..20 - b {
                assert_eq!(layer.at(r, c), 0);
                assert_eq!(layer.lap_at(r, c), 1);
            }
        }
    }

    #[test]
    fn transpose_swaps_axes_and_keeps_responses() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x7735);
        let img = random_image(&mut rng, 18, 24);
        let layer = hessian_layer(&integral_image(&img).unwrap(), 9).unwrap();
        let layer_t = hessian_layer(&integral_image(&transpose(&img)).unwrap(), 9).unwrap();
        for r in 0..img.rows {
            for c in 0..img.cols {
                assert_eq!(layer.at(r, c), layer_t.at(c, r));
                assert_eq!(layer.lap_at(r, c), layer_t.lap_at(c, r));
            }
        }
    }

    #[test]
    fn filter_larger_than_image_is_skipped() {
        let img = GrayImage::filled(8, 8, 1);
        let ii = integral_image(&img).unwrap();
        assert_eq!(
            hessian_layer(&ii, 9),
            Err(SurfError::LayerSkipped { filter_size: 9 })
        );
    }

    fn synthetic_layers(dims: usize, fss: &[u32]) -> Vec<ResponseLayer> {
        fss.iter()
            .map(|&fs| ResponseLayer {
                filter_size: fs,
                rows: dims,
                cols: dims,
                responses: vec![0; dims * dims],
                laplacian: vec![0; dims * dims],
            })
            .collect()
    }

    #[test]
    fn constant_volume_yields_nothing() {
        let mut layers = synthetic_layers(32, &[9, 15, 21]);
        for l in &mut layers {
            l.responses.fill(5 << 16);
        }
        assert!(nms_extract(&layers, 0).unwrap().is_empty());
    }

    #[test]
    fn single_spike_is_extracted() {
        let mut layers = synthetic_layers(32, &[9, 15, 21]);
        let (r, c) = (16usize, 13usize);
        layers[1].responses[r * 32 + c] = 12 << 16;
        layers[1].laplacian[r * 32 + c] = 1;
        let pts = nms_extract(&layers, 10 << 16).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!((pts[0].x, pts[0].y), (c as u32, r as u32));
        assert_eq!(pts[0].filter_size, 15);
        assert_eq!(pts[0].laplacian, 1);
    }

    #[test]
    fn spike_below_threshold_is_dropped() {
        let mut layers = synthetic_layers(32, &[9, 15, 21]);
        layers[1].responses[16 * 32 + 16] = 10 << 16;
        // response must be strictly greater than the threshold
        assert!(nms_extract(&layers, 10 << 16).unwrap().is_empty());
    }

    #[test]
    fn spike_in_border_band_is_excluded() {
        let mut layers = synthetic_layers(32, &[9, 15, 21]);
        let margin = nms_margin(21); // 11
        layers[1].responses[(margin - 1) * 32 + 16] = 100 << 16;
        assert!(nms_extract(&layers, 0).unwrap().is_empty());
    }

    #[test]
    fn too_few_layers_is_an_error() {
        let layers = synthetic_layers(32, &[9, 15]);
        assert_eq!(
            nms_extract(&layers, 0),
            Err(SurfError::BadPyramid { layers: 2 })
        );
    }

    /// Exhaustive 26-neighbor comparison, the oracle for `nms_extract`.
    fn nms_oracle(layers: &[ResponseLayer], min_hessian: i64) -> Vec<(usize, usize, u32)> {
        let (rows, cols) = (layers[0].rows, layers[0].cols);
        let mut found = Vec::new();
        for k in 1..layers.len() - 1 {
            let margin = nms_margin(layers[k + 1].filter_size);
            for r in 0..rows {
                for c in 0..cols {
                    if r < margin || c < margin || r >= rows - margin || c >= cols - margin {
                        continue;
                    }
                    let v = layers[k].at(r, c);
                    if v <= min_hessian {
                        continue;
                    }
                    let mut is_max = true;
                    for dk in -1i32..=1 {
                        for dr in -1i32..=1 {
                            for dc in -1i32..=1 {
                                if dk == 0 && dr == 0 && dc == 0 {
                                    continue;
                                }
                                let nk = (k as i32 + dk) as usize;
                                let nr = (r as i32 + dr) as usize;
                                let nc = (c as i32 + dc) as usize;
                                if layers[nk].at(nr, nc) >= v {
                                    is_max = false;
                                }
                            }
                        }
                    }
                    if is_max {
                        found.push((r, c, layers[k].filter_size));
                    }
                }
            }
        }
        found.sort();
        found
    }

    #[test]
    fn random_volume_matches_bruteforce() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xAA);
        for _ in 0..50 {
            let mut layers = synthetic_layers(32, &[9, 15, 21, 27]);
            for l in &mut layers {
                for v in &mut l.responses {
                    *v = rng.gen_range(-(40 << 16)..40 << 16);
                }
            }
            let got: Vec<_> = nms_extract(&layers, 5 << 16)
                .unwrap()
                .iter()
                .map(|p| (p.y as usize, p.x as usize, p.filter_size))
                .collect();
            assert_eq!(got, nms_oracle(&layers, 5 << 16));
        }
    }

    #[test]
    fn threshold_monotonicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xBB);
        let img = random_image(&mut rng, 48, 48);
        let lo = detect(&img, &SurfParams { min_hessian: 1.0, ..Default::default() }).unwrap();
        let hi = detect(&img, &SurfParams { min_hessian: 6.0, ..Default::default() }).unwrap();
        assert!(hi.len() <= lo.len());
        for p in &hi {
            assert!(lo.contains(p), "point {p:?} appeared only at the higher threshold");
        }
    }

    #[test]
    fn detection_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xCC);
        let img = random_image(&mut rng, 40, 40);
        let a = detect(&img, &SurfParams::default()).unwrap();
        let b = detect(&img, &SurfParams::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tiny_image_cannot_build_a_pyramid() {
        let img = GrayImage::filled(8, 8, 3);
        assert_eq!(
            detect(&img, &SurfParams::default()),
            Err(SurfError::BadPyramid { layers: 0 })
        );
    }
}
