//! Synthetic shapes with ground truth, and the classic-vs-improved harness.
//!
//! A pixel `(x, y)` is inside a shape when its centre `(x + 0.5, y + 0.5)`
//! is. Noise is additive Gaussian from [`SplitMix64`] seeded with the
//! generator's seed, one normal per pixel in row-major order, rounded half-up and clamped to `[0, 255]`.
//! With `noise_sigma == 0` the generator draws nothing.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, GrayImage, MaskSource};
use crate::pipeline::{
    binarize_classic, binarize_improved, misclassification_rate, PipelineConfig,
};
use crate::rng::SplitMix64;

/// Three overlapping disks (left, top, right) over a vertical stalk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriLobe {
    /// Point where the lobes meet the stalk.
    pub cx: f64,
    pub cy: f64,
    pub lobe_radius: f64,
    /// Distance from `(cx, cy)` to each lobe centre.
    pub lobe_offset: f64,
    pub stalk_half_width: f64,
    /// Stalk extends from `cy` down to `cy + stalk_length`.
    pub stalk_length: f64,
}

impl TriLobe {
    fn lobe_centres(&self) -> [(f64, f64); 3] {
        let d = self.lobe_offset;
        [
            (self.cx - d, self.cy),
            (self.cx, self.cy - d),
            (self.cx + d, self.cy),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Disk { cx: f64, cy: f64, r: f64 },
    TriLobe(TriLobe),
}

fn in_disk(x: f64, y: f64, cx: f64, cy: f64, r: f64) -> bool {
    (x - cx).powi(2) + (y - cy).powi(2) <= r * r
}

impl Shape {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            Shape::Disk { cx, cy, r } => in_disk(x, y, *cx, *cy, *r),
            Shape::TriLobe(t) => {
                let stalk = (x - t.cx).abs() <= t.stalk_half_width
                    && y >= t.cy
                    && y <= t.cy + t.stalk_length;
                stalk
                    || t.lobe_centres()
                        .iter()
                        .any(|&(lx, ly)| in_disk(x, y, lx, ly, t.lobe_radius))
            }
        }
    }

    /// `(min_x, min_y, max_x, max_y)` of the continuous shape.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        match self {
            Shape::Disk { cx, cy, r } => (cx - r, cy - r, cx + r, cy + r),
            Shape::TriLobe(t) => {
                let r = t.lobe_radius;
                let d = t.lobe_offset;
                (
                    (t.cx - d - r).min(t.cx - t.stalk_half_width),
                    t.cy - d - r,
                    (t.cx + d + r).max(t.cx + t.stalk_half_width),
                    (t.cy + r).max(t.cy + t.stalk_length),
                )
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Shape::Disk { cx, cy, r } => [*cx, *cy, *r].iter().all(|v| v.is_finite()) && *r > 0.0,
            Shape::TriLobe(t) => {
                [
                    t.cx,
                    t.cy,
                    t.lobe_radius,
                    t.lobe_offset,
                    t.stalk_half_width,
                    t.stalk_length,
                ]
                .iter()
                .all(|v| v.is_finite() && *v >= 0.0)
                    && t.lobe_radius > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "invalid shape parameters {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub fg_level: u8,
    pub bg_level: u8,
    pub shape: Shape,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// Centred disk with radius a quarter of the shorter side.
    pub fn disk(width: usize, height: usize) -> Self {
        let side = width.min(height) as f64;
        Self::with_shape(
            width,
            height,
            Shape::Disk {
                cx: (width / 2) as f64,
                cy: (height / 2) as f64,
                r: (side / 4.0).floor(),
            },
        )
    }

    /// Centred tri-lobe scaled to the shorter side (lobe radius 1/8 of it).
    pub fn tri_lobe(width: usize, height: usize) -> Self {
        let s = width.min(height) as f64 / 128.0;
        Self::with_shape(
            width,
            height,
            Shape::TriLobe(TriLobe {
                cx: (width / 2) as f64,
                cy: (height / 2) as f64,
                lobe_radius: (16.0 * s).floor(),
                lobe_offset: (20.0 * s).floor(),
                stalk_half_width: (6.0 * s).floor(),
                stalk_length: (40.0 * s).floor(),
            }),
        )
    }

    fn with_shape(width: usize, height: usize, shape: Shape) -> Self {
        Self {
            width,
            height,
            fg_level: 180,
            bg_level: 60,
            shape,
            noise_sigma: 0.0,
            seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::EmptyImage);
        }
        if self.fg_level == self.bg_level {
            return Err(Error::InvalidParameter(
                "foreground and background levels must differ".into(),
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise sigma {} must be >= 0",
                self.noise_sigma
            )));
        }
        self.shape.validate()?;
        let (x0, y0, x1, y1) = self.shape.bounds();
        if x0 < 0.0 || y0 < 0.0 || x1 > self.width as f64 || y1 > self.height as f64 {
            return Err(Error::ShapeOutOfBounds {
                width: self.width,
                height: self.height,
            });
        }
        Ok(())
    }
}

fn round_clamp(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Renders the noiseless shape membership, sampling each pixel at its
/// centre `(x + 0.5, y + 0.5)`.
pub fn truth_mask(spec: &SynthSpec) -> Result<BinaryMask> {
    spec.validate()?;
    let labels = (0..spec.height)
        .flat_map(|y| (0..spec.width).map(move |x| (x, y)))
        .map(|(x, y)| u8::from(spec.shape.contains(x as f64 + 0.5, y as f64 + 0.5)))
        .collect();
    BinaryMask::new(spec.width, spec.height, labels, MaskSource::GroundTruth)
}

/// Clean image with the truth mask before any noise is added.
pub fn render_clean(spec: &SynthSpec) -> Result<(GrayImage, BinaryMask)> {
    let truth = truth_mask(spec)?;
    let pixels = truth
        .labels()
        .iter()
        .map(|&l| if l == 1 { spec.fg_level } else { spec.bg_level })
        .collect();
    Ok((GrayImage::new(spec.width, spec.height, pixels)?, truth))
}

pub fn generate(spec: &SynthSpec) -> Result<(GrayImage, BinaryMask)> {
    let (clean, truth) = render_clean(spec)?;
    if spec.noise_sigma == 0.0 {
        return Ok((clean, truth));
    }
    let mut rng = SplitMix64::new(spec.seed);
    let pixels = clean
        .pixels()
        .iter()
        .map(|&v| round_clamp(f64::from(v) + spec.noise_sigma * rng.next_normal()))
        .collect();
    Ok((GrayImage::new(spec.width, spec.height, pixels)?, truth))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub classic_rate: f64,
    pub improved_rate: f64,
    pub classic_threshold: u8,
    pub improved_threshold: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Generator settings; `seed` is replaced per run.
    pub spec: SynthSpec,
    pub pipeline: PipelineConfig,
    pub runs: Vec<SeedOutcome>,
    pub classic_mean: f64,
    pub improved_mean: f64,
    /// Seeds where the improved method misclassified strictly fewer pixels.
    pub improved_wins: usize,
    pub classic_wins: usize,
    pub ties: usize,
}

impl ComparisonReport {
    /// `seed,classic_rate,improved_rate` rows with a header line.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["seed", "classic_rate", "improved_rate"])?;
        for run in &self.runs {
            csv.write_record([
                run.seed.to_string(),
                run.classic_rate.to_string(),
                run.improved_rate.to_string(),
            ])?;
        }
        csv.flush()?;
        Ok(())
    }
}

fn run_seed(spec: &SynthSpec, config: &PipelineConfig, seed: u64) -> Result<SeedOutcome> {
    let spec = SynthSpec { seed, ..*spec };
    let (img, truth) = generate(&spec)?;
    let (classic, _) = binarize_classic(&img)?;
    let (improved, _) = binarize_improved(&img, config)?;
    Ok(SeedOutcome {
        seed,
        classic_rate: misclassification_rate(&classic, &truth)?,
        improved_rate: misclassification_rate(&improved, &truth)?,
        classic_threshold: classic.threshold_used().unwrap_or_default(),
        improved_threshold: improved.threshold_used().unwrap_or_default(),
    })
}

/// Runs both methods on seeds `1..=n_seeds`; results are ordered by seed.
pub fn run_comparison(
    spec: &SynthSpec,
    config: &PipelineConfig,
    n_seeds: u64,
) -> Result<ComparisonReport> {
    if n_seeds == 0 {
        return Err(Error::InvalidParameter(
            "at least one seed is required".into(),
        ));
    }
    spec.validate()?;
    let runs = (1..=n_seeds)
        .into_par_iter()
        .map(|seed| run_seed(spec, config, seed))
        .collect::<Result<Vec<_>>>()?;

    let n = runs.len() as f64;
    let classic_mean = runs.iter().map(|r| r.classic_rate).sum::<f64>() / n;
    let improved_mean = runs.iter().map(|r| r.improved_rate).sum::<f64>() / n;
    let improved_wins = runs
        .iter()
        .filter(|r| r.improved_rate < r.classic_rate)
        .count();
    let classic_wins = runs
        .iter()
        .filter(|r| r.classic_rate < r.improved_rate)
        .count();
    Ok(ComparisonReport {
        spec: *spec,
        pipeline: config.clone(),
        ties: runs.len() - improved_wins - classic_wins,
        runs,
        classic_mean,
        improved_mean,
        improved_wins,
        classic_wins,
    })
}
