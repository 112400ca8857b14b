//! Host-side reference implementation in double precision, plus the
//! feature-description stage (orientation assignment and the 64-component
//! descriptor), which runs on the processor rather than in the fabric.
//!
//! Detection here mirrors the fixed-point pipeline operation for
//! operation — same boxes, same suppression rule — differing only in the
//! arithmetic format, which makes it the differential reference for the
//! IP's Q16.16 datapath.

use super::fixed::{filter_sizes, nms_margin, validate_pyramid};
use super::integral::{box_sum, integral_image, GrayImage, IntegralImage};
use super::qformat;
use super::{InterestPoint, SurfError, SurfParams};

/// One double-precision response scale.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatLayer {
    pub filter_size: u32,
    pub rows: usize,
    pub cols: usize,
    pub responses: Vec<f64>,
    pub laplacian: Vec<u8>,
}

impl FloatLayer {
    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.responses[r * self.cols + c]
    }
}

/// The Dxy weight of the box-filter approximation.
const DXY_WEIGHT: f64 = 0.9;

/// Double-precision response layer over the same integer box sums the
/// fixed datapath uses, normalized by `1 / filter_size^2`.
pub fn hessian_layer_float(
    ii: &IntegralImage,
    filter_size: u32,
) -> Result<FloatLayer, SurfError> {
    if filter_size as usize > ii.rows.min(ii.cols) {
        return Err(SurfError::LayerSkipped { filter_size });
    }
    let fs = filter_size as i64;
    let l = fs / 3;
    let b = (fs - 1) / 2;
    let inv_area = 1.0 / (fs * fs) as f64;

    let mut responses = vec![0.0; ii.rows * ii.cols];
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

            let dxx = dxx_raw as f64 * inv_area;
            let dyy = dyy_raw as f64 * inv_area;
            let dxy = dxy_raw as f64 * inv_area;
            let wdxy = DXY_WEIGHT * dxy;

            let idx = (r as usize) * ii.cols + c as usize;
            responses[idx] = dxx * dyy - wdxy * wdxy;
            laplacian[idx] = (dxx + dyy >= 0.0) as u8;
        }
    }
    Ok(FloatLayer {
        filter_size,
        rows: ii.rows,
        cols: ii.cols,
        responses,
        laplacian,
    })
}

fn nms_extract_float(layers: &[FloatLayer], min_hessian: f64) -> Result<Vec<InterestPoint>, SurfError> {
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
                let mut is_max = true;
                'cube: for nk in k - 1..=k + 1 {
                    for nr in r - 1..=r + 1 {
                        for nc in c - 1..=c + 1 {
                            if nk == k && nr == r && nc == c {
                                continue;
                            }
                            if layers[nk].at(nr, nc) >= v {
                                is_max = false;
                                break 'cube;
                            }
                        }
                    }
                }
                if is_max {
                    points.push(InterestPoint {
                        x: c as u32,
                        y: r as u32,
                        filter_size: layers[k].filter_size,
                        scale: qformat::scale_for_filter(layers[k].filter_size),
                        response: qformat::from_f64(v),
                        laplacian: layers[k].laplacian[r * cols + c],
                    });
                }
            }
        }
    }
    points.sort_by_key(|p| (p.y, p.x, p.filter_size));
    Ok(points)
}

/// Double-precision detection over the whole pyramid; the reference the
/// fixed-point results are compared against.
pub fn detect_float(image: &GrayImage, params: &SurfParams) -> Result<Vec<InterestPoint>, SurfError> {
    params.validate()?;
    let ii = integral_image(image)?;
    let mut points = Vec::new();
    for octave in 1..=params.n_octaves {
        let mut layers = Vec::new();
        for fs in filter_sizes(octave, params.levels) {
            match hessian_layer_float(&ii, fs) {
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
        points.extend(nms_extract_float(&layers, params.min_hessian)?);
    }
    points.sort_by_key(|p| (p.y, p.x, p.filter_size));
    Ok(points)
}

// ---- description stage ---------------------------------------------------

/// 64-component feature vector plus the orientation it was sampled at.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub values: [f64; 64],
    pub orientation: f64,
}

fn point_scale(point: &InterestPoint) -> f64 {
    qformat::to_f64(point.scale)
}

/// Haar wavelet response in x at integer center (px, py), half-side `hs`:
/// right half minus left half of a 2hs x 2hs window.
fn haar_x(ii: &IntegralImage, px: i64, py: i64, hs: i64) -> f64 {
    let right = box_sum(ii, py - hs, px, 2 * hs, hs) as i64;
    let left = box_sum(ii, py - hs, px - hs, 2 * hs, hs) as i64;
    (right - left) as f64
}

/// Haar wavelet response in y: lower half minus upper half.
fn haar_y(ii: &IntegralImage, px: i64, py: i64, hs: i64) -> f64 {
    let lower = box_sum(ii, py, px - hs, hs, 2 * hs) as i64;
    let upper = box_sum(ii, py - hs, px - hs, hs, 2 * hs) as i64;
    (lower - upper) as f64
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut a = a % two_pi;
    if a < 0.0 {
        a += two_pi;
    }
    a
}

/// Angular step between candidate windows and the window width used by the
/// dominant-orientation scan.
pub const ORIENTATION_WINDOW_STEP: f64 = 0.15;
pub const ORIENTATION_WINDOW_WIDTH: f64 = std::f64::consts::FRAC_PI_3;

/// Dominant direction around a point: Haar responses (side `4s`) on the
/// integer grid within radius `6s`, Gaussian-weighted with sigma `2.5s`,
/// scanned by a sliding pi/3 window in 0.15 rad steps; the window with the
/// longest summed vector wins. A featureless neighborhood yields 0.
pub fn assign_orientation(ii: &IntegralImage, point: &InterestPoint) -> Result<f64, SurfError> {
    let s = point_scale(point);
    let radius = 6.0 * s;
    let margin = radius.ceil() as i64;
    let (x, y) = (point.x as i64, point.y as i64);
    if x < margin
        || y < margin
        || x + margin >= ii.cols as i64
        || y + margin >= ii.rows as i64
    {
        return Err(SurfError::OrientationUndefined);
    }

    let hs = (2.0 * s).round().max(1.0) as i64;
    let sigma = 2.5 * s;
    let r_int = radius.floor() as i64;
    let mut samples = Vec::new();
    for dy in -r_int..=r_int {
        for dx in -r_int..=r_int {
            let d2 = (dx * dx + dy * dy) as f64;
            if d2 > radius * radius {
                continue;
            }
            let w = (-d2 / (2.0 * sigma * sigma)).exp();
            let rx = w * haar_x(ii, x + dx, y + dy, hs);
            let ry = w * haar_y(ii, x + dx, y + dy, hs);
            if rx != 0.0 || ry != 0.0 {
                samples.push((wrap_angle(ry.atan2(rx)), rx, ry));
            }
        }
    }

    let mut best_len2 = 0.0;
    let mut best_angle = 0.0;
    let mut start = 0.0;
    while start < 2.0 * std::f64::consts::PI {
        let end = start + ORIENTATION_WINDOW_WIDTH;
        let (mut sx, mut sy) = (0.0, 0.0);
        for &(angle, rx, ry) in &samples {
            let inside = if end <= 2.0 * std::f64::consts::PI {
                angle >= start && angle < end
            } else {
                angle >= start || angle < end - 2.0 * std::f64::consts::PI
            };
            if inside {
                sx += rx;
                sy += ry;
            }
        }
        let len2 = sx * sx + sy * sy;
        if len2 > best_len2 {
            best_len2 = len2;
            best_angle = wrap_angle(sy.atan2(sx));
        }
        start += ORIENTATION_WINDOW_STEP;
    }
    Ok(if best_len2 > 0.0 { best_angle } else { 0.0 })
}

/// Builds the descriptor: a 20s x 20s window oriented along `orientation`,
/// split into 4x4 subregions sampled 5x5 each; per sample the Haar
/// responses (side `2s`) are rotated into the point frame and Gaussian
/// weighted (sigma `3.3s`); each subregion contributes
/// (sum dx, sum |dx|, sum dy, sum |dy|); the 64 values are normalized to
/// unit length (an all-zero vector stays all-zero).
pub fn describe(
    ii: &IntegralImage,
    point: &InterestPoint,
    orientation: f64,
) -> Result<Descriptor, SurfError> {
    let s = point_scale(point);
    let margin = (10.0 * std::f64::consts::SQRT_2 * s).ceil() as i64;
    let (x, y) = (point.x as i64, point.y as i64);
    if x < margin
        || y < margin
        || x + margin >= ii.cols as i64
        || y + margin >= ii.rows as i64
    {
        return Err(SurfError::DescriptorUndefined);
    }

    let (sin_o, cos_o) = orientation.sin_cos();
    let hs = s.round().max(1.0) as i64;
    let sigma = 3.3 * s;
    let mut values = [0.0f64; 64];

    for i in 0..4usize {
        for j in 0..4usize {
            let (mut dx_sum, mut adx_sum, mut dy_sum, mut ady_sum) = (0.0, 0.0, 0.0, 0.0);
            for u in 0..5usize {
                for v in 0..5usize {
                    // sample offsets in the point frame, -9.5s .. 9.5s
                    let ox = ((i * 5 + u) as f64 - 10.0 + 0.5) * s;
                    let oy = ((j * 5 + v) as f64 - 10.0 + 0.5) * s;
                    let gx = x + (ox * cos_o - oy * sin_o).round() as i64;
                    let gy = y + (ox * sin_o + oy * cos_o).round() as i64;
                    let w = (-(ox * ox + oy * oy) / (2.0 * sigma * sigma)).exp();
                    let rx = haar_x(ii, gx, gy, hs);
                    let ry = haar_y(ii, gx, gy, hs);
                    // rotate responses back into the point frame
                    let dx = w * (rx * cos_o + ry * sin_o);
                    let dy = w * (-rx * sin_o + ry * cos_o);
                    dx_sum += dx;
                    adx_sum += dx.abs();
                    dy_sum += dy;
                    ady_sum += dy.abs();
                }
            }
            let base = 4 * (i * 4 + j);
            values[base] = dx_sum;
            values[base + 1] = adx_sum;
            values[base + 2] = dy_sum;
            values[base + 3] = ady_sum;
        }
    }

    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut values {
            *v /= norm;
        }
    }
    Ok(Descriptor {
        values,
        orientation: wrap_angle(orientation),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> GrayImage {
        GrayImage::new(rows, cols, (0..rows * cols).map(|_| rng.gen()).collect())
    }

    fn center_point(filter_size: u32, x: u32, y: u32) -> InterestPoint {
        InterestPoint {
            x,
            y,
            filter_size,
            scale: qformat::scale_for_filter(filter_size),
            response: 0,
            laplacian: 1,
        }
    }

    #[test]
    fn constant_image_detects_nothing() {
        let img = GrayImage::filled(64, 64, 180);
        assert!(detect_float(&img, &SurfParams::default()).unwrap().is_empty());
    }

    #[test]
    fn float_layers_match_fixed_closely() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x515);
        let img = random_image(&mut rng, 32, 32);
        let ii = integral_image(&img).unwrap();
        for fs in [9u32, 15, 21, 27] {
            let fx = super::super::fixed::hessian_layer(&ii, fs).unwrap();
            let fl = hessian_layer_float(&ii, fs).unwrap();
            for r in 0..32 {
                for c in 0..32 {
                    let dev = (qformat::wide_to_f64(fx.at(r, c)) - fl.at(r, c)).abs();
                    assert!(
                        dev <= 1.0 / 256.0,
                        "fs {fs} pixel ({r},{c}) deviates by {dev}"
                    );
                }
            }
        }
    }

    fn synthetic_float_layers(dims: usize, fss: &[u32]) -> Vec<FloatLayer> {
        fss.iter()
            .map(|&fs| FloatLayer {
                filter_size: fs,
                rows: dims,
                cols: dims,
                responses: vec![0.0; dims * dims],
                laplacian: vec![0; dims * dims],
            })
            .collect()
    }

    #[test]
    fn spike_volume_yields_one_point() {
        let mut layers = synthetic_float_layers(32, &[9, 15, 21]);
        layers[1].responses[16 * 32 + 13] = 12.0;
        let pts = nms_extract_float(&layers, 10.0).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!((pts[0].x, pts[0].y, pts[0].filter_size), (13, 16, 15));
        // constant volumes stay empty under the strict comparison
        let mut flat = synthetic_float_layers(32, &[9, 15, 21]);
        for l in &mut flat {
            l.responses.fill(42.0);
        }
        assert!(nms_extract_float(&flat, 0.0).unwrap().is_empty());
    }

    #[test]
    fn float_nms_matches_bruteforce() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xF10A7);
        for _ in 0..25 {
            let mut layers = synthetic_float_layers(24, &[9, 15, 21, 27]);
            for l in &mut layers {
                for v in &mut l.responses {
                    *v = rng.gen_range(-40.0..40.0);
                }
            }
            let got: Vec<_> = nms_extract_float(&layers, 5.0)
                .unwrap()
                .iter()
                .map(|p| (p.y, p.x, p.filter_size))
                .collect();
            // exhaustive 26-neighbor scan
            let mut want = Vec::new();
            let margin_of = |fs: u32| ((fs + 1) / 2) as usize;
            for k in 1..3usize {
                let m = margin_of(layers[k + 1].filter_size);
                for r in m..24 - m {
                    for c in m..24 - m {
                        let v = layers[k].at(r, c);
                        if v <= 5.0 {
                            continue;
                        }
                        let mut is_max = true;
                        for nk in k - 1..=k + 1 {
                            for nr in r - 1..=r + 1 {
                                for nc in c - 1..=c + 1 {
                                    if (nk, nr, nc) != (k, r, c) && layers[nk].at(nr, nc) >= v {
                                        is_max = false;
                                    }
                                }
                            }
                        }
                        if is_max {
                            want.push((r as u32, c as u32, layers[k].filter_size));
                        }
                    }
                }
            }
            want.sort();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn orientation_constant_neighborhood_is_zero() {
        let img = GrayImage::filled(64, 64, 42);
        let ii = integral_image(&img).unwrap();
        let p = center_point(15, 32, 32);
        assert_eq!(assign_orientation(&ii, &p).unwrap(), 0.0);
    }

    #[test]
    fn orientation_near_border_is_undefined() {
        let img = GrayImage::filled(64, 64, 42);
        let ii = integral_image(&img).unwrap();
        let p = center_point(15, 2, 32); // radius 12 > 2
        assert_eq!(
            assign_orientation(&ii, &p),
            Err(SurfError::OrientationUndefined)
        );
    }

    /// Independent exhaustive scan over all window starts, for checking the
    /// window selection inside `assign_orientation`.
    fn orientation_oracle(ii: &IntegralImage, point: &InterestPoint) -> f64 {
        let s = qformat::to_f64(point.scale);
        let radius = 6.0 * s;
        let hs = (2.0 * s).round().max(1.0) as i64;
        let sigma = 2.5 * s;
        let r_int = radius.floor() as i64;
        let (x, y) = (point.x as i64, point.y as i64);
        let mut samples = Vec::new();
        for dy in -r_int..=r_int {
            for dx in -r_int..=r_int {
                let d2 = (dx * dx + dy * dy) as f64;
                if d2 > radius * radius {
                    continue;
                }
                let w = (-d2 / (2.0 * sigma * sigma)).exp();
                let rx = w * haar_x(ii, x + dx, y + dy, hs);
                let ry = w * haar_y(ii, x + dx, y + dy, hs);
                if rx != 0.0 || ry != 0.0 {
                    samples.push((wrap_angle(ry.atan2(rx)), rx, ry));
                }
            }
        }
        let mut k = 0;
        let mut best = (0.0f64, 0.0f64);
        loop {
            let start = k as f64 * ORIENTATION_WINDOW_STEP;
            if start >= 2.0 * std::f64::consts::PI {
                break;
            }
            let (mut sx, mut sy) = (0.0, 0.0);
            for &(a, rx, ry) in &samples {
                let rel = wrap_angle(a - start);
                if rel < ORIENTATION_WINDOW_WIDTH {
                    sx += rx;
                    sy += ry;
                }
            }
            if sx * sx + sy * sy > best.0 {
                best = (sx * sx + sy * sy, wrap_angle(sy.atan2(sx)));
            }
            k += 1;
        }
        if best.0 > 0.0 {
            best.1
        } else {
            0.0
        }
    }

    #[test]
    fn window_selection_matches_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x0413);
        for _ in 0..20 {
            let img = random_image(&mut rng, 64, 64);
            let ii = integral_image(&img).unwrap();
            let p = center_point(15, rng.gen_range(20..44), rng.gen_range(20..44));
            let got = assign_orientation(&ii, &p).unwrap();
            let want = orientation_oracle(&ii, &p);
            assert!(
                (got - want).abs() < 1e-12,
                "orientation {got} vs oracle {want}"
            );
        }
    }

    fn rotate90(img: &GrayImage) -> GrayImage {
        // new(r, c) = old(rows-1-c, r), a pixel-exact quarter turn
        let n = img.rows;
        assert_eq!(img.rows, img.cols);
        let mut pixels = vec![0u8; n * n];
        for r in 0..n {
            for c in 0..n {
                pixels[r * n + c] = img.at(n - 1 - c, r);
            }
        }
        GrayImage::new(n, n, pixels)
    }

    #[test]
    fn orientation_shifts_by_quarter_turn() {
        // Tilted intensity ramp: every Haar sample sees the same gradient
        // direction, so the dominant orientation is sharp and rotates
        // rigidly with the image.
        let n = 65usize;
        let mut img = GrayImage::filled(n, n, 0);
        for r in 0..n {
            for c in 0..n {
                let v = 10.0 + 2.5 * c as f64 + 0.8 * r as f64;
                img.pixels[r * n + c] = v.min(255.0) as u8;
            }
        }
        let p = center_point(15, 32, 32);
        let base = assign_orientation(&integral_image(&img).unwrap(), &p).unwrap();
        let rot = assign_orientation(&integral_image(&rotate90(&img)).unwrap(), &p).unwrap();
        let mut diff = (rot - base).abs();
        if diff > std::f64::consts::PI {
            diff = 2.0 * std::f64::consts::PI - diff;
        }
        assert!(
            (diff - std::f64::consts::FRAC_PI_2).abs() <= 0.2,
            "expected a quarter-turn shift, got {diff} (base {base}, rotated {rot})"
        );
    }

    #[test]
    fn descriptor_is_64_long_and_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xD35C);
        let img = random_image(&mut rng, 96, 96);
        let ii = integral_image(&img).unwrap();
        let p = center_point(15, 48, 48);
        let o = assign_orientation(&ii, &p).unwrap();
        let d = describe(&ii, &p, o).unwrap();
        assert_eq!(d.values.len(), 64);
        let norm: f64 = d.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn descriptor_of_constant_image_is_all_zero() {
        let img = GrayImage::filled(96, 96, 77);
        let ii = integral_image(&img).unwrap();
        let p = center_point(15, 48, 48);
        let d = describe(&ii, &p, 0.0).unwrap();
        assert!(d.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn descriptor_border_violation() {
        let img = GrayImage::filled(96, 96, 77);
        let ii = integral_image(&img).unwrap();
        let p = center_point(15, 10, 48); // margin ceil(10*sqrt(2)*2) = 29
        assert_eq!(describe(&ii, &p, 0.0), Err(SurfError::DescriptorUndefined));
    }

    #[test]
    fn intensity_scaling_leaves_descriptor_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x111);
        let base: Vec<u8> = (0..96 * 96).map(|_| rng.gen_range(0..64)).collect();
        let img1 = GrayImage::new(96, 96, base.clone());
        let p = center_point(15, 48, 48);
        for k in [2u8, 4] {
            let img_k = GrayImage::new(96, 96, base.iter().map(|&v| v * k).collect());
            let ii1 = integral_image(&img1).unwrap();
            let iik = integral_image(&img_k).unwrap();
            let o1 = assign_orientation(&ii1, &p).unwrap();
            let ok = assign_orientation(&iik, &p).unwrap();
            let d1 = describe(&ii1, &p, o1).unwrap();
            let dk = describe(&iik, &p, ok).unwrap();
            for (a, b) in d1.values.iter().zip(dk.values.iter()) {
                assert!((a - b).abs() <= 1e-6, "k={k}: {a} vs {b}");
            }
        }
    }
}

