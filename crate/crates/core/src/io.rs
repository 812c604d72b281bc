//! PGM (P2/P5, maxval 255) and 8-bit PNG reading and writing.
//!
//! Readers sniff the magic bytes; writers pick the format from the file
//! extension, defaulting to binary PGM.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageFormat};

use crate::error::{Error, Result};
use crate::image::{to_grayscale, BinaryMask, GrayImage};

const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

pub fn read_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let bytes = fs::read(path)?;
    decode_image(&bytes)
}

pub fn decode_image(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.starts_with(PNG_MAGIC) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else {
        Err(Error::Format("expected a PGM (P2/P5) or PNG file".into()))
    }
}

pub fn write_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = if is_png_path(path) {
        encode_png(img)?
    } else {
        encode_pgm(img)
    };
    fs::write(path, bytes)?;
    Ok(())
}

/// Writes a mask as a {0, 255} image.
pub fn write_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    write_image(&mask.to_image(), path)
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    BinaryMask::from_image(&read_image(path)?)
}

fn is_png_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

/// Binary P5 with maxval 255.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    out
}

struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn next_token(&mut self) -> Option<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn next_number(&mut self, what: &str) -> Result<usize> {
        let tok = self
            .next_token()
            .ok_or_else(|| Error::Format(format!("PGM header missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("PGM {what} is not a number")))
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut tokens = Tokens { bytes, pos: 0 };
    let magic = tokens.next_token().unwrap_or_default();
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        _ => return Err(Error::Format("not a P2/P5 PGM".into())),
    };
    let width = tokens.next_number("width")?;
    let height = tokens.next_number("height")?;
    let maxval = tokens.next_number("maxval")?;
    if maxval != 255 {
        return Err(Error::Format(format!(
            "PGM maxval {maxval} unsupported, expected 255"
        )));
    }
    if width == 0 || height == 0 {
        return Err(Error::Format("PGM has zero width or height".into()));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| Error::Format("PGM dimensions overflow".into()))?;

    let pixels = if binary {
        // Exactly one whitespace byte separates maxval from the raster.
        let start = tokens.pos + 1;
        let raster = bytes
            .get(start..start + count)
            .ok_or_else(|| Error::Format("PGM raster truncated".into()))?;
        raster.to_vec()
    } else {
        let mut pixels = Vec::with_capacity(count);
        for _ in 0..count {
            let v = tokens.next_number("sample")?;
            let v = u8::try_from(v)
                .map_err(|_| Error::Format(format!("PGM sample {v} exceeds maxval")))?;
            pixels.push(v);
        }
        pixels
    };
    GrayImage::new(width, height, pixels)
}

fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
    let decoded = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| Error::Format(e.to_string()))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    match decoded {
        DynamicImage::ImageLuma8(buf) => GrayImage::new(w, h, buf.into_raw()),
        DynamicImage::ImageRgb8(buf) => {
            let rgb: Vec<[u8; 3]> = buf.pixels().map(|p| p.0).collect();
            to_grayscale(&rgb, w, h)
        }
        other => Err(Error::Format(format!(
            "PNG color type {:?} unsupported; expected 8-bit gray or RGB",
            other.color()
        ))),
    }
}

pub fn encode_png(img: &GrayImage) -> Result<Vec<u8>> {
    let width = u32::try_from(img.width()).map_err(|_| Error::Format("image too wide".into()))?;
    let height = u32::try_from(img.height()).map_err(|_| Error::Format("image too tall".into()))?;
    let buf = image::GrayImage::from_raw(width, height, img.pixels().to_vec())
        .ok_or_else(|| Error::Format("pixel buffer size mismatch".into()))?;
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::Format(e.to_string()))?;
    Ok(out.into_inner())
}
