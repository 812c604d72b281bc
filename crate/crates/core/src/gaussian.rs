//! Gaussian kernels and separable smoothing.
//!
//! Kernels sample the zero-mean normal density at integer offsets
//! `-r..=r` with `r = ceil(3σ)`, then normalise to unit sum. Smoothing runs a
//! horizontal then a vertical pass with replicated (clamped) borders, keeps
//! the intermediate in `f64` and rounds half-up at the end.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::GrayImage;

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidSigma(sigma))
    }
}

/// `G(x) = exp(-x² / 2σ²) / sqrt(2πσ²)`.
pub fn gaussian_density(x: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    let var = sigma * sigma;
    Ok((-(x * x) / (2.0 * var)).exp() / (TAU * var).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianKernel {
    sigma: f64,
    radius: usize,
    weights: Vec<f64>,
}

impl GaussianKernel {
    pub fn new(sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        let radius = (3.0 * sigma).ceil() as usize;
        let raw = (0..=2 * radius)
            .map(|i| gaussian_density(i as f64 - radius as f64, sigma))
            .collect::<Result<Vec<f64>>>()?;
        let sum: f64 = raw.iter().sum();
        let weights = raw.into_iter().map(|w| w / sum).collect();
        Ok(Self {
            sigma,
            radius,
            weights,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn center_weight(&self) -> f64 {
        self.weights[self.radius]
    }
}

pub fn kernel_1d(sigma: f64) -> Result<GaussianKernel> {
    GaussianKernel::new(sigma)
}

#[inline]
fn clamp_index(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

fn round_to_u8(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Horizontal pass: each output row depends only on the same input row.
fn horizontal(src: &[f64], width: usize, kernel: &GaussianKernel) -> Vec<f64> {
    let r = kernel.radius as isize;
    let mut out = vec![0.0; src.len()];
    out.par_chunks_mut(width)
        .zip(src.par_chunks(width))
        .for_each(|(dst, row)| {
            for (x, d) in dst.iter_mut().enumerate() {
                *d = kernel
                    .weights
                    .iter()
                    .enumerate()
                    .map(|(k, w)| w * row[clamp_index(x as isize + k as isize - r, width)])
                    .sum();
            }
        });
    out
}

fn vertical(src: &[f64], width: usize, height: usize, kernel: &GaussianKernel) -> Vec<f64> {
    let r = kernel.radius as isize;
    let mut out = vec![0.0; src.len()];
    out.par_chunks_mut(width).enumerate().for_each(|(y, dst)| {
        for (x, d) in dst.iter_mut().enumerate() {
            *d = kernel
                .weights
                .iter()
                .enumerate()
                .map(|(k, w)| {
                    let sy = clamp_index(y as isize + k as isize - r, height);
                    w * src[sy * width + x]
                })
                .sum();
        }
    });
    out
}

/// Separable Gaussian blur before rounding, as `f64` samples.
pub fn smooth_f64(img: &GrayImage, sigma: f64) -> Result<Vec<f64>> {
    let kernel = GaussianKernel::new(sigma)?;
    if img.is_empty() {
        return Err(Error::EmptyImage);
    }
    let src: Vec<f64> = img.pixels().iter().map(|&v| f64::from(v)).collect();
    let h = horizontal(&src, img.width(), &kernel);
    Ok(vertical(&h, img.width(), img.height(), &kernel))
}

pub fn smooth(img: &GrayImage, sigma: f64) -> Result<GrayImage> {
    let blurred = smooth_f64(img, sigma)?;
    GrayImage::new(
        img.width(),
        img.height(),
        blurred.into_iter().map(round_to_u8).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_matches_table_values() {
        for (x, expected) in [(0.0, 0.399), (1.0, 0.242), (2.0, 0.05)] {
            let g = gaussian_density(x, 1.0).unwrap();
            assert!((g - expected).abs() <= 5e-3, "G({x}) = {g}");
        }
    }

    #[test]
    fn density_ratio_closed_form() {
        let g0 = gaussian_density(0.0, 1.0).unwrap();
        let g1 = gaussian_density(1.0, 1.0).unwrap();
        assert!((g1 / g0 - (-0.5f64).exp()).abs() < 1e-15);
        assert!((g1 / g0 - 0.6065).abs() < 1e-4);
    }

    #[test]
    fn invalid_sigma() {
        for s in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                gaussian_density(0.0, s),
                Err(Error::InvalidSigma(_))
            ));
            assert!(matches!(kernel_1d(s), Err(Error::InvalidSigma(_))));
        }
    }

    #[test]
    fn kernel_shape() {
        let k = kernel_1d(1.0).unwrap();
        assert_eq!(k.radius(), 3);
        assert_eq!(k.weights().len(), 7);
        assert!((k.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..=3 {
            assert_eq!(k.weights()[3 - i], k.weights()[3 + i]);
        }
        for i in 0..3 {
            assert!(k.weights()[3 + i] > k.weights()[4 + i]);
        }
        let ratio = k.weights()[4] / k.weights()[3];
        assert!((ratio - (-0.5f64).exp()).abs() < 1e-15);

        assert_eq!(kernel_1d(0.5).unwrap().radius(), 2);
        assert_eq!(kernel_1d(0.1).unwrap().radius(), 1);
    }

    #[test]
    fn constant_image_is_fixed() {
        let img = GrayImage::filled(9, 7, 77).unwrap();
        for sigma in [0.3, 1.0, 2.0, 5.5] {
            assert_eq!(smooth(&img, sigma).unwrap(), img);
        }
    }

    #[test]
    fn single_pixel_image() {
        let img = GrayImage::new(1, 1, vec![200]).unwrap();
        assert_eq!(smooth(&img, 2.0).unwrap().pixels(), &[200]);
    }

    #[test]
    fn centered_impulse() {
        let img = GrayImage::from_fn(5, 5, |x, y| if (x, y) == (2, 2) { 255 } else { 0 }).unwrap();
        let out = smooth(&img, 1.0).unwrap();
        let wc = kernel_1d(1.0).unwrap().center_weight();
        assert_eq!(out.get(2, 2), round_to_u8(255.0 * wc * wc));
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(round_to_u8(0.5), 1);
        assert_eq!(round_to_u8(1.4999), 1);
        assert_eq!(round_to_u8(254.5), 255);
        assert_eq!(round_to_u8(-0.2), 0);
    }
}
