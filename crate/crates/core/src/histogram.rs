use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;

pub const LEVELS: usize = 256;

/// Intensity counts of an 8-bit image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    bins: Vec<u64>,
    total: u64,
}

impl Histogram {
    pub fn from_image(img: &GrayImage) -> Self {
        let mut bins = vec![0u64; LEVELS];
        for &v in img.pixels() {
            bins[v as usize] += 1;
        }
        Self {
            bins,
            total: img.len() as u64,
        }
    }

    /// Builds a histogram from explicit counts. At least one count must be
    /// non-zero.
    pub fn from_bins(bins: [u64; LEVELS]) -> Result<Self> {
        let total = bins
            .iter()
            .try_fold(0u64, |acc, &c| acc.checked_add(c))
            .ok_or_else(|| Error::InvalidParameter("histogram total overflows".into()))?;
        if total == 0 {
            return Err(Error::EmptyImage);
        }
        Ok(Self {
            bins: bins.to_vec(),
            total,
        })
    }

    /// Shorthand for sparse histograms: `[(intensity, count), ..]`.
    pub fn from_counts(counts: &[(u8, u64)]) -> Result<Self> {
        let mut bins = [0u64; LEVELS];
        for &(v, c) in counts {
            bins[v as usize] += c;
        }
        Self::from_bins(bins)
    }

    pub fn bins(&self) -> &[u64] {
        &self.bins
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, intensity: u8) -> u64 {
        self.bins[intensity as usize]
    }

    pub fn occupied_levels(&self) -> usize {
        self.bins.iter().filter(|&&c| c > 0).count()
    }

    /// Multiplies every count by `factor`.
    pub fn scaled(&self, factor: u64) -> Result<Self> {
        let mut bins = [0u64; LEVELS];
        for (dst, &c) in bins.iter_mut().zip(&self.bins) {
            *dst = c
                .checked_mul(factor)
                .ok_or_else(|| Error::InvalidParameter("scaled histogram overflows".into()))?;
        }
        Self::from_bins(bins)
    }

    /// Population mean and variance of the intensity distribution.
    pub fn mean_variance(&self) -> Result<(f64, f64)> {
        image_mean_variance(self)
    }
}

/// Population mean and variance over the histogram, two-pass.
pub fn image_mean_variance(hist: &Histogram) -> Result<(f64, f64)> {
    if hist.total == 0 {
        return Err(Error::EmptyImage);
    }
    let n = hist.total as f64;
    let weighted: u64 = hist
        .bins
        .iter()
        .enumerate()
        .map(|(v, &c)| v as u64 * c)
        .sum();
    let mean = weighted as f64 / n;
    let variance = hist
        .bins
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(v, &c)| (v as f64 - mean).powi(2) * c as f64)
        .sum::<f64>()
        / n;
    Ok((mean, variance))
}
