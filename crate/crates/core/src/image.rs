//! Grayscale images, binary masks and RGB to gray conversion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An 8-bit grayscale image stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        check_len(width, height, pixels.len())?;
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width.saturating_mul(height)])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Result<Self> {
        let pixels = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }
}

fn check_len(width: usize, height: usize, actual: usize) -> Result<()> {
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| Error::InvalidParameter(format!("{width}x{height} overflows")))?;
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// Converts packed RGB triples to gray with BT.601 luma weights, rounding
/// half away from zero.
pub fn to_grayscale(rgb: &[[u8; 3]], width: usize, height: usize) -> Result<GrayImage> {
    check_len(width, height, rgb.len())?;
    let pixels = rgb.iter().map(|&px| luma(px)).collect();
    GrayImage::new(width, height, pixels)
}

fn luma([r, g, b]: [u8; 3]) -> u8 {
    let y = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
    y.round().clamp(0.0, 255.0) as u8
}

/// Which step produced a mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskSource {
    /// Global Otsu threshold on the input image.
    Classic { threshold: u8 },
    /// Otsu threshold after clustering, suppression and smoothing.
    Improved { threshold: u8 },
    /// Membership in one K-means cluster.
    Cluster { cluster: usize },
    /// Noiseless shape membership from the synthetic generator.
    GroundTruth,
    /// Read back from a file; provenance unknown.
    Loaded,
}

/// Binary labelling of an image: `1` is foreground, `0` background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    labels: Vec<u8>,
    source: MaskSource,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, labels: Vec<u8>, source: MaskSource) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        check_len(width, height, labels.len())?;
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidParameter(format!(
                "mask label {bad} is not 0 or 1"
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
            source,
        })
    }

    /// Interprets a {0, 255} image as a mask.
    pub fn from_image(img: &GrayImage) -> Result<Self> {
        let labels = img
            .pixels()
            .iter()
            .map(|&v| match v {
                0 => Ok(0),
                255 => Ok(1),
                other => Err(Error::Format(format!(
                    "mask pixels must be 0 or 255, found {other}"
                ))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::new(img.width(), img.height(), labels, MaskSource::Loaded)
    }

    /// Renders labels as {0, 255} intensities.
    pub fn to_image(&self) -> GrayImage {
        let pixels = self.labels.iter().map(|&l| l * 255).collect();
        GrayImage {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn source(&self) -> MaskSource {
        self.source
    }

    /// Threshold that produced the mask, for threshold-derived masks.
    pub fn threshold_used(&self) -> Option<u8> {
        match self.source {
            MaskSource::Classic { threshold } | MaskSource::Improved { threshold } => {
                Some(threshold)
            }
            _ => None,
        }
    }

    pub fn foreground_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn complement(&self) -> Self {
        Self {
            labels: self.labels.iter().map(|&l| 1 - l).collect(),
            ..self.clone()
        }
    }

    pub fn same_labels(&self, other: &BinaryMask) -> bool {
        self.width == other.width && self.height == other.height && self.labels == other.labels
    }
}
