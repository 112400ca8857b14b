//! PGM reader: binary (P5) and ASCII (P2) 8-bit grayscale, maxval 255.
//! Comments (`#` to end of line) and arbitrary whitespace are accepted
//! anywhere in the header, per the format definition.

use fabricsim::surf::GrayImage;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PgmError(pub String);

impl std::fmt::Display for PgmError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "bad PGM: {}", self.0)
    }
}

impl std::error::Error for PgmError {}

pub fn read_pgm(path: &Path) -> Result<GrayImage, PgmError> {
    let bytes = std::fs::read(path).map_err(|e| PgmError(format!("{}: {e}", path.display())))?;
    parse_pgm(&bytes)
}

pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage, PgmError> {
    let mut pos = 0usize;

    let magic = next_token(bytes, &mut pos).ok_or_else(|| PgmError("missing magic".into()))?;
    let binary = match magic.as_slice() {
        b"P5" => true,
        b"P2" => false,
        other => {
            return Err(PgmError(format!(
                "unsupported magic {:?}, want P2 or P5",
                String::from_utf8_lossy(other)
            )))
        }
    };

    let width = next_usize(bytes, &mut pos, "width")?;
    let height = next_usize(bytes, &mut pos, "height")?;
    let maxval = next_usize(bytes, &mut pos, "maxval")?;
    if width == 0 || height == 0 {
        return Err(PgmError(format!("degenerate dimensions {width}x{height}")));
    }
    if maxval != 255 {
        return Err(PgmError(format!("maxval {maxval} unsupported, want 255")));
    }

    let npix = width * height;
    let pixels = if binary {
        // exactly one whitespace byte separates the header from the raster
        if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
            return Err(PgmError("missing raster separator".into()));
        }
        pos += 1;
        let raster = &bytes[pos..];
        if raster.len() < npix {
            return Err(PgmError(format!(
                "truncated raster: {} of {npix} bytes",
                raster.len()
            )));
        }
        if raster.len() > npix {
            return Err(PgmError(format!(
                "trailing bytes after raster: {}",
                raster.len() - npix
            )));
        }
        raster.to_vec()
    } else {
        let mut values = Vec::with_capacity(npix);
        while let Some(tok) = next_token(bytes, &mut pos) {
            let v: usize = std::str::from_utf8(&tok)
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| PgmError(format!("bad sample {:?}", String::from_utf8_lossy(&tok))))?;
            if v > 255 {
                return Err(PgmError(format!("sample {v} exceeds maxval")));
            }
            values.push(v as u8);
        }
        if values.len() != npix {
            return Err(PgmError(format!(
                "expected {npix} samples, found {}",
                values.len()
            )));
        }
        values
    };

    Ok(GrayImage::new(height, width, pixels))
}

/// Next whitespace-delimited token, skipping comments.
fn next_token(bytes: &[u8], pos: &mut usize) -> Option<Vec<u8>> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    if *pos >= bytes.len() {
        return None;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
        *pos += 1;
    }
    Some(bytes[start..*pos].to_vec())
}

fn next_usize(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize, PgmError> {
    let tok = next_token(bytes, pos).ok_or_else(|| PgmError(format!("missing {what}")))?;
    std::str::from_utf8(&tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| {
            PgmError(format!(
                "bad {what} {:?}",
                String::from_utf8_lossy(&tok)
            ))
        })
}
