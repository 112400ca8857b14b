//! Q16.16 signed fixed point. 1.0 <-> 65536.

pub type Q16 = i32;

pub const FRAC_BITS: u32 = 16;
pub const ONE: i64 = 1 << FRAC_BITS;

/// Squared Dxy weight (0.9^2 = 0.81) in Q16.16.
pub const DXY_WEIGHT_SQ: i64 = 53084;

pub fn from_f64(x: f64) -> Q16 {
    let r = (x * ONE as f64).round();
    if r >= i32::MAX as f64 {
        i32::MAX
    } else if r <= i32::MIN as f64 {
        i32::MIN
    } else {
        r as i32
    }
}

pub fn to_f64(x: Q16) -> f64 {
    x as f64 / ONE as f64
}

pub fn wide_to_f64(x: i64) -> f64 {
    x as f64 / ONE as f64
}

/// Saturating narrow from the wide 64-bit response lane to a 32-bit word.
pub fn saturate(x: i64) -> Q16 {
    if x > i32::MAX as i64 {
        i32::MAX
    } else if x < i32::MIN as i64 {
        i32::MIN
    } else {
        x as i32
    }
}

/// Detection scale for a box-filter size: 1.2 * filter_size / 9, truncated.
pub fn scale_for_filter(filter_size: u32) -> Q16 {
    // 1.2 / 9 = 2 / 15
    (filter_size as i64 * 2 * ONE / 15) as Q16
}
