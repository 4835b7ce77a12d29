//! Grayscale image buffers, affine scale maps between grid values and pixel
//! intensities, and binary PGM (P5) reading/writing.
//!
//! Quantizing a grid to 8 bits loses up to half a gray level per entry;
//! fitting from a PGM therefore carries that quantization as extra noise.
//! Raw grid files (see [`crate::gridfile`]) are the lossless path.

use crate::signal::SignalGrid;
use serde::{Deserialize, Serialize};
use std::fmt;

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, PgmError> {
        if width == 0 || height == 0 {
            return Err(PgmError::BadDimensions { width, height });
        }
        if pixels.len() != width * height {
            return Err(PgmError::PayloadSize { expected: width * height, actual: pixels.len() });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }
}

/// Affine map between grid values and gray levels: `lo` maps to 0 and `hi`
/// to 255.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleMap {
    pub lo: f64,
    pub hi: f64,
}

impl ScaleMap {
    pub fn new(lo: f64, hi: f64) -> Result<Self, PgmError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(PgmError::BadScale { lo, hi });
        }
        Ok(Self { lo, hi })
    }
}

/// A rendered image plus the scale actually used (needed to invert the
/// mapping) and a degeneracy flag.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedImage {
    pub image: ImageBuffer,
    /// The `(lo, hi)` pair applied; in auto mode this is the grid's range.
    pub scale: ScaleMap,
    /// The grid was constant: the image is uniform mid-gray and the recorded
    /// scale is a unit window around the constant.
    pub degenerate: bool,
}

/// Renders a grid to 8-bit grayscale.
///
/// `scale: None` selects auto mode, mapping the grid's own `(min, max)` to
/// `(0, 255)`. Values outside the scale are clamped. A constant grid has no
/// usable range; it renders as uniform mid-gray with `degenerate` set.
pub fn grid_to_image(grid: &SignalGrid, scale: Option<ScaleMap>) -> RenderedImage {
    let (height, width) = (grid.rows(), grid.cols());
    let (scale, degenerate) = match scale {
        Some(s) => (s, false),
        None => {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &v in grid.as_slice() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if lo == hi {
                (ScaleMap { lo: lo - 0.5, hi: lo + 0.5 }, true)
            } else {
                (ScaleMap { lo, hi }, false)
            }
        }
    };
    let span = scale.hi - scale.lo;
    let pixels = grid
        .as_slice()
        .iter()
        .map(|&v| {
            let t = (v - scale.lo) / span;
            (t * 255.0).round().clamp(0.0, 255.0) as u8
        })
        .collect();
    RenderedImage {
        image: ImageBuffer { width, height, pixels },
        scale,
        degenerate,
    }
}

/// Inverse of [`grid_to_image`] under the recorded scale:
/// `value = lo + (pixel / 255) * (hi - lo)`.
pub fn image_to_grid(img: &ImageBuffer, scale: ScaleMap) -> SignalGrid {
    let span = scale.hi - scale.lo;
    let data = img
        .pixels
        .iter()
        .map(|&p| scale.lo + (p as f64 / 255.0) * span)
        .collect();
    SignalGrid::from_data(img.height, img.width, data).expect("pixel data is finite")
}

/// Errors from PGM parsing and image construction, annotated with the byte
/// position where parsing stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum PgmError {
    /// The magic number is not "P5".
    BadMagic { found: String },
    /// "P2" (ASCII PGM) is recognized but deliberately unsupported.
    AsciiUnsupported,
    MissingToken { pos: usize, what: &'static str },
    BadToken { pos: usize, what: &'static str },
    BadDimensions { width: usize, height: usize },
    /// Only maxval 255 (one byte per pixel) is supported.
    BadMaxval { pos: usize, value: u64 },
    PayloadSize { expected: usize, actual: usize },
    BadScale { lo: f64, hi: f64 },
}

impl fmt::Display for PgmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PgmError::BadMagic { found } => write!(f, "not a binary PGM: magic '{found}'"),
            PgmError::AsciiUnsupported => {
                write!(f, "ASCII PGM (P2) is unsupported; only binary P5 is accepted")
            }
            PgmError::MissingToken { pos, what } => {
                write!(f, "truncated header at byte {pos}: missing {what}")
            }
            PgmError::BadToken { pos, what } => write!(f, "invalid {what} at byte {pos}"),
            PgmError::BadDimensions { width, height } => {
                write!(f, "unusable image dimensions {width}x{height}")
            }
            PgmError::BadMaxval { pos, value } => {
                write!(f, "unsupported maxval {value} at byte {pos} (only 255)")
            }
            PgmError::PayloadSize { expected, actual } => {
                write!(f, "pixel payload has {actual} bytes, expected {expected}")
            }
            PgmError::BadScale { lo, hi } => write!(f, "scale ({lo}, {hi}) must satisfy lo < hi"),
        }
    }
}

impl std::error::Error for PgmError {}

/// Serializes an image as binary PGM: `P5\n<width> <height>\n255\n<pixels>`.
pub fn pgm_write(img: &ImageBuffer) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

/// Parses a binary PGM. Header comments (`#` to end of line) are honored;
/// exactly one whitespace byte separates the maxval from the payload.
pub fn pgm_read(bytes: &[u8]) -> Result<ImageBuffer, PgmError> {
    if bytes.starts_with(b"P2") {
        return Err(PgmError::AsciiUnsupported);
    }
    if !bytes.starts_with(b"P5") {
        let found: String = bytes
            .iter()
            .take(2)
            .map(|&b| if b.is_ascii_graphic() { b as char } else { '?' })
            .collect();
        return Err(PgmError::BadMagic { found });
    }
    let mut pos = 2;

    let mut next_token = |what: &'static str| -> Result<(usize, u64), PgmError> {
        // Skip whitespace and comments.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => return Err(PgmError::MissingToken { pos, what }),
            }
        }
        let start = pos;
        let mut value: u64 = 0;
        let mut digits = 0;
        while let Some(&b) = bytes.get(pos) {
            if b.is_ascii_digit() {
                value = value
                    .checked_mul(10)
                    .and_then(|v| v.checked_add((b - b'0') as u64))
                    .ok_or(PgmError::BadToken { pos: start, what })?;
                digits += 1;
                pos += 1;
            } else {
                break;
            }
        }
        if digits == 0 {
            return Err(PgmError::BadToken { pos: start, what });
        }
        Ok((start, value))
    };

    let (wpos, width) = next_token("width")?;
    let (hpos, height) = next_token("height")?;
    let (mpos, maxval) = next_token("maxval")?;
    if maxval != 255 {
        return Err(PgmError::BadMaxval { pos: mpos, value: maxval });
    }
    // A single whitespace byte terminates the header.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(PgmError::MissingToken { pos, what: "header terminator" }),
    }

    const MAX_DIM: u64 = 1 << 20;
    if width == 0 || height == 0 || width > MAX_DIM || height > MAX_DIM {
        return Err(PgmError::BadToken {
            pos: if width == 0 || width > MAX_DIM { wpos } else { hpos },
            what: "dimension",
        });
    }
    let expected = (width * height) as usize;
    let payload = &bytes[pos..];
    if payload.len() != expected {
        return Err(PgmError::PayloadSize { expected, actual: payload.len() });
    }
    ImageBuffer::new(width as usize, height as usize, payload.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_grid_renders_degenerate_mid_gray() {
        let grid = SignalGrid::from_data(3, 3, vec![2.5; 9]).unwrap();
        let rendered = grid_to_image(&grid, None);
        assert!(rendered.degenerate);
        assert!(rendered.image.pixels().iter().all(|&p| p == 128));
        assert!(rendered.scale.lo < 2.5 && rendered.scale.hi > 2.5);
    }

    #[test]
    fn endpoints_map_to_extremes() {
        let grid = SignalGrid::from_data(1, 4, vec![-1.0, 1.0, -1.0, 1.0]).unwrap();
        let rendered = grid_to_image(&grid, None);
        assert_eq!(rendered.image.pixels(), &[0, 255, 0, 255]);
        assert_eq!(rendered.scale, ScaleMap { lo: -1.0, hi: 1.0 });
    }

    #[test]
    fn uniform_mid_gray_maps_back_near_zero() {
        let img = ImageBuffer::new(4, 4, vec![128; 16]).unwrap();
        let grid = image_to_grid(&img, ScaleMap::new(-1.0, 1.0).unwrap());
        let expected = -1.0 + 128.0 / 255.0 * 2.0; // 0.0039215...
        for &v in grid.as_slice() {
            assert!((v - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn checkerboard_round_trip() {
        let px: Vec<u8> = (0..16).map(|i| if i % 2 == 0 { 0 } else { 255 }).collect();
        let img = ImageBuffer::new(4, 4, px).unwrap();
        let grid = image_to_grid(&img, ScaleMap::new(0.0, 1.0).unwrap());
        for (i, &v) in grid.as_slice().iter().enumerate() {
            assert_eq!(v, if i % 2 == 0 { 0.0 } else { 1.0 });
        }
    }

    #[test]
    fn round_trip_error_is_bounded_by_quantization() {
        let data: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
        let grid = SignalGrid::from_data(8, 8, data).unwrap();
        let rendered = grid_to_image(&grid, None);
        let back = image_to_grid(&rendered.image, rendered.scale);
        let bound = (rendered.scale.hi - rendered.scale.lo) / 255.0 / 2.0 + 1e-12;
        for (a, b) in grid.as_slice().iter().zip(back.as_slice()) {
            assert!((a - b).abs() <= bound, "{a} vs {b}");
        }
    }

    #[test]
    fn minimal_pgm_bytes() {
        let img = ImageBuffer::new(1, 1, vec![0]).unwrap();
        assert_eq!(pgm_write(&img), b"P5\n1 1\n255\n\x00");
    }

    #[test]
    fn pgm_round_trip_with_comments() {
        let img = ImageBuffer::new(3, 2, vec![1, 2, 3, 4, 5, 6]).unwrap();
        let bytes = pgm_write(&img);
        assert_eq!(pgm_read(&bytes).unwrap(), img);

        let commented = b"P5\n# made by hand\n3 2\n255\n\x01\x02\x03\x04\x05\x06";
        assert_eq!(pgm_read(commented).unwrap(), img);
    }

    #[test]
    fn pgm_rejects_ascii_and_garbage() {
        assert_eq!(pgm_read(b"P2\n1 1\n255\n0"), Err(PgmError::AsciiUnsupported));
        assert!(matches!(pgm_read(b"JUNK"), Err(PgmError::BadMagic { .. })));
    }

    #[test]
    fn pgm_rejects_truncation_and_overflow() {
        assert!(matches!(pgm_read(b"P5\n2 2\n255\n\x00\x01"), Err(PgmError::PayloadSize { .. })));
        assert!(matches!(pgm_read(b"P5\n2 2\n255"), Err(PgmError::MissingToken { .. })));
        assert!(matches!(
            pgm_read(b"P5\n99999999999999999999 1\n255\n"),
            Err(PgmError::BadToken { .. })
        ));
        assert!(matches!(pgm_read(b"P5\n2 2\n65535\n"), Err(PgmError::BadMaxval { .. })));
    }
}
