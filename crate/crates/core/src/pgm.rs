//! 8-bit grayscale PGM (P5 binary and P2 ASCII).

use std::path::Path;

use crate::error::{Error, Result};

/// Row-major 8-bit image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions(format!("empty image {width}×{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch { expected: width * height, actual: pixels.len() });
        }
        Ok(Self { width, height, pixels })
    }

    /// Column-major signal of a `height × width` matrix, as the sensing and
    /// denoising code expects.
    pub fn to_signal(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.pixels.len());
        for c in 0..self.width {
            for r in 0..self.height {
                out.push(self.pixels[r * self.width + c] as f64);
            }
        }
        out
    }

    /// Inverse of [`to_signal`](Self::to_signal), rounding and clipping to `[0, 255]`.
    pub fn from_signal(signal: &[f64], width: usize, height: usize) -> Result<Self> {
        if signal.len() != width * height {
            return Err(Error::DimensionMismatch { expected: width * height, actual: signal.len() });
        }
        let mut pixels = vec![0u8; signal.len()];
        for c in 0..width {
            for r in 0..height {
                let v = signal[r + c * height];
                pixels[r * width + c] = if v.is_nan() { 0 } else { v.round().clamp(0.0, 255.0) as u8 };
            }
        }
        Self::new(width, height, pixels)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn fail(&self, message: impl Into<String>) -> Error {
        Error::Pgm { offset: self.pos, message: message.into() }
    }

    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.fail(if self.pos >= self.bytes.len() {
                format!("unexpected end of file, expected {what}")
            } else {
                format!("expected {what}")
            }));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Pgm { offset: start, message: format!("{what} out of range") })
    }
}

pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut cur = Cursor { bytes, pos: 0 };
    let binary = match bytes.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => return Err(cur.fail("missing P5/P2 magic number")),
    };
    cur.pos = 2;
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    cur.skip_space();
    let maxval_at = cur.pos;
    let maxval = cur.number("maximum value")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Pgm { offset: maxval_at, message: format!("only 8-bit images are supported, maxval {maxval}") });
    }
    if width == 0 || height == 0 {
        return Err(cur.fail(format!("empty image {width}×{height}")));
    }
    let count = width * height;
    let pixels = if binary {
        if !cur.bytes.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
            return Err(cur.fail("expected whitespace before raster"));
        }
        cur.pos += 1;
        let end = cur.pos + count;
        if end > bytes.len() {
            cur.pos = bytes.len();
            return Err(cur.fail(format!("truncated raster: {} of {count} pixels", bytes.len() - (end - count))));
        }
        bytes[cur.pos..end].to_vec()
    } else {
        let mut px = Vec::with_capacity(count);
        for i in 0..count {
            let at = cur.pos;
            let v = cur.number(&format!("pixel {i}"))?;
            if v > maxval {
                return Err(Error::Pgm { offset: at, message: format!("pixel {v} exceeds maxval {maxval}") });
            }
            px.push(v as u8);
        }
        px
    };
    GrayImage::new(width, height, pixels)
}

/// Binary (P5) encoding.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes)
}

pub fn save_pgm(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_with_comments() {
        let img = parse_pgm(b"P2\n# a comment\n3 2\n# another\n255\n0 1 2\n3 4 255\n").unwrap();
        assert_eq!((img.width, img.height), (3, 2));
        assert_eq!(img.pixels, vec![0, 1, 2, 3, 4, 255]);
        // column-major signal
        assert_eq!(img.to_signal(), vec![0.0, 3.0, 1.0, 4.0, 2.0, 255.0]);
    }

    #[test]
    fn binary_round_trip() {
        let img = GrayImage::new(4, 3, (0..12).map(|v| v * 20).collect()).unwrap();
        assert_eq!(parse_pgm(&encode_pgm(&img)).unwrap(), img);
        let back = GrayImage::from_signal(&img.to_signal(), 4, 3).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn errors_name_offsets() {
        match parse_pgm(b"P5\n4 4\n255\n\x01\x02") {
            Err(Error::Pgm { offset, message }) => {
                assert_eq!(offset, 13);
                assert!(message.contains("truncated"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        match parse_pgm(b"P5\n2 2\n65535\n") {
            Err(Error::Pgm { offset, .. }) => assert_eq!(offset, 7),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_pgm(b"P6\n1 1\n255\n\0"), Err(Error::Pgm { offset: 0, .. })));
        assert!(matches!(parse_pgm(b"P2\n2 1\n255\n7"), Err(Error::Pgm { offset: 12, .. })));
    }

    #[test]
    fn from_signal_clips() {
        let img = GrayImage::from_signal(&[-3.0, 300.0, 12.4, f64::NAN], 2, 2).unwrap();
        assert_eq!(img.pixels, vec![0, 12, 255, 0]);
    }
}
