//! Global Otsu thresholding.
//!
//! A cut `t` splits the histogram into a background class (intensities
//! `<= t`) and a foreground class (`> t`). The chosen threshold minimises the
//! weighted within-class variance `W_b·σ_b² + W_f·σ_f²`, which is the same as
//! maximising the between-class variance `σ² − σ_W² = W_b·W_f·(μ_b − μ_f)²`.
//!
//! Class counts and intensity sums are kept as exact integers; every
//! floating-point quantity is derived from them, so the cumulative scan in
//! [`otsu_threshold`] and the per-cut [`between_class_variance`] produce
//! identical bits for the same cut.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::{image_mean_variance, Histogram};
use crate::image::{BinaryMask, GrayImage, MaskSource};

/// Largest cut considered by the search; `255` leaves the foreground empty.
pub const MAX_CANDIDATE: u8 = 254;

/// Weights, means and population variances of the two classes at one cut.
/// An empty class has weight, mean and variance all zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub w_b: f64,
    pub w_f: f64,
    pub mu_b: f64,
    pub mu_f: f64,
    pub var_b: f64,
    pub var_f: f64,
}

impl ClassStats {
    pub fn within_class_variance(&self) -> f64 {
        self.w_b * self.var_b + self.w_f * self.var_f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub threshold: u8,
    #[serde(flatten)]
    pub stats: ClassStats,
    pub sigma_w2: f64,
    pub sigma_b2_between: f64,
    pub sigma_total2: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct ClassSums {
    count: u64,
    sum: u64,
}

impl ClassSums {
    fn over(bins: &[u64], offset: usize) -> Self {
        bins.iter()
            .enumerate()
            .fold(Self::default(), |acc, (i, &c)| Self {
                count: acc.count + c,
                sum: acc.sum + (offset + i) as u64 * c,
            })
    }

    fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum as f64 / self.count as f64
        }
    }
}

fn ensure_non_empty(hist: &Histogram) -> Result<()> {
    if hist.total() == 0 {
        Err(Error::EmptyImage)
    } else {
        Ok(())
    }
}

fn split(hist: &Histogram, t: u8) -> (&[u64], &[u64]) {
    hist.bins().split_at(t as usize + 1)
}

fn class_variance(bins: &[u64], offset: usize, sums: ClassSums) -> f64 {
    if sums.count == 0 {
        return 0.0;
    }
    let mean = sums.mean();
    bins.iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| ((offset + i) as f64 - mean).powi(2) * c as f64)
        .sum::<f64>()
        / sums.count as f64
}

/// `W_b·W_f·(μ_b − μ_f)²`, zero when either class is empty.
fn between_from_sums(background: ClassSums, total: ClassSums) -> f64 {
    let foreground = ClassSums {
        count: total.count - background.count,
        sum: total.sum - background.sum,
    };
    if background.count == 0 || foreground.count == 0 {
        return 0.0;
    }
    let n = total.count as f64;
    let w_b = background.count as f64 / n;
    let w_f = foreground.count as f64 / n;
    let diff = background.mean() - foreground.mean();
    w_b * w_f * diff * diff
}

pub fn class_stats(hist: &Histogram, t: u8) -> Result<ClassStats> {
    ensure_non_empty(hist)?;
    let (low, high) = split(hist, t);
    let offset_f = t as usize + 1;
    let back = ClassSums::over(low, 0);
    let fore = ClassSums::over(high, offset_f);
    let n = hist.total() as f64;
    Ok(ClassStats {
        w_b: back.count as f64 / n,
        w_f: fore.count as f64 / n,
        mu_b: back.mean(),
        mu_f: fore.mean(),
        var_b: class_variance(low, 0, back),
        var_f: class_variance(high, offset_f, fore),
    })
}

/// `σ_W²(t) = W_b·σ_b² + W_f·σ_f²`.
pub fn within_class_variance(hist: &Histogram, t: u8) -> Result<f64> {
    Ok(class_stats(hist, t)?.within_class_variance())
}

/// `σ_B²(t)`, evaluated from scratch for this cut as `W_b·W_f·(μ_b − μ_f)²`.
/// Equals `σ² − σ_W²(t)` up to rounding.
pub fn between_class_variance(hist: &Histogram, t: u8) -> Result<f64> {
    ensure_non_empty(hist)?;
    let (low, _) = split(hist, t);
    let back = ClassSums::over(low, 0);
    let total = ClassSums::over(hist.bins(), 0);
    Ok(between_from_sums(back, total))
}

/// Exhaustive Otsu search over cuts `0..=254` using running sums. Ties go to
/// the smallest cut.
pub fn otsu_threshold(hist: &Histogram) -> Result<ThresholdReport> {
    ensure_non_empty(hist)?;
    if hist.occupied_levels() == 1 {
        let intensity = hist.bins().iter().position(|&c| c > 0).unwrap_or(0) as u8;
        return Err(Error::DegenerateHistogram { intensity });
    }

    let total = ClassSums::over(hist.bins(), 0);
    let mut back = ClassSums::default();
    let mut best_t = 0u8;
    let mut best = f64::NEG_INFINITY;
    for (t, &count) in hist
        .bins()
        .iter()
        .enumerate()
        .take(MAX_CANDIDATE as usize + 1)
    {
        back.count += count;
        back.sum += t as u64 * count;
        let between = between_from_sums(back, total);
        if between > best {
            best = between;
            best_t = t as u8;
        }
    }

    let stats = class_stats(hist, best_t)?;
    let (_, sigma_total2) = image_mean_variance(hist)?;
    Ok(ThresholdReport {
        threshold: best_t,
        stats,
        sigma_w2: stats.within_class_variance(),
        sigma_b2_between: best,
        sigma_total2,
    })
}

/// Labels pixels `> t` as foreground.
pub fn apply_threshold(img: &GrayImage, t: u8) -> BinaryMask {
    let labels = img.pixels().iter().map(|&v| u8::from(v > t)).collect();
    BinaryMask::new(
        img.width(),
        img.height(),
        labels,
        MaskSource::Classic { threshold: t },
    )
    .expect("image dimensions are valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histogram::LEVELS;
    use crate::rng::SplitMix64;

    fn bimodal() -> Histogram {
        Histogram::from_counts(&[(0, 2), (255, 2)]).unwrap()
    }

    fn random_histogram(rng: &mut SplitMix64) -> Histogram {
        let mut bins = [0u64; LEVELS];
        let occupied = 2 + rng.next_below(60) as usize;
        for _ in 0..occupied {
            bins[rng.next_below(256) as usize] += 1 + rng.next_below(500);
        }
        Histogram::from_bins(bins).unwrap()
    }

    #[test]
    fn class_stats_examples() {
        let s = class_stats(&bimodal(), 0).unwrap();
        assert_eq!(
            (s.w_b, s.w_f, s.mu_b, s.mu_f, s.var_b, s.var_f),
            (0.5, 0.5, 0.0, 255.0, 0.0, 0.0)
        );

        let s = class_stats(&bimodal(), 255).unwrap();
        assert_eq!((s.w_b, s.w_f, s.var_b), (1.0, 0.0, 16256.25));
        assert_eq!((s.mu_f, s.var_f), (0.0, 0.0));

        let h = Histogram::from_counts(&[(10, 3), (20, 1)]).unwrap();
        let s = class_stats(&h, 15).unwrap();
        assert_eq!((s.w_b, s.mu_b, s.var_b), (0.75, 10.0, 0.0));
        assert_eq!((s.w_f, s.mu_f, s.var_f), (0.25, 20.0, 0.0));
    }

    #[test]
    fn within_and_between_examples() {
        assert_eq!(within_class_variance(&bimodal(), 0).unwrap(), 0.0);
        assert_eq!(between_class_variance(&bimodal(), 0).unwrap(), 16256.25);
        let flat = Histogram::from_counts(&[(128, 4)]).unwrap();
        for t in [0, 127, 128, 200, 255] {
            assert_eq!(within_class_variance(&flat, t).unwrap(), 0.0);
            assert_eq!(between_class_variance(&flat, t).unwrap(), 0.0);
        }
    }

    #[test]
    fn within_matches_per_pixel_oracle() {
        let mut rng = SplitMix64::new(2024);
        let pixels: Vec<u8> = (0..64).map(|_| rng.next_below(256) as u8).collect();
        let img = GrayImage::new(8, 8, pixels.clone()).unwrap();
        let hist = Histogram::from_image(&img);

        let t = 100u8;
        let (back, fore): (Vec<f64>, Vec<f64>) = {
            let b = pixels
                .iter()
                .filter(|&&p| p <= t)
                .map(|&p| f64::from(p))
                .collect();
            let f = pixels
                .iter()
                .filter(|&&p| p > t)
                .map(|&p| f64::from(p))
                .collect();
            (b, f)
        };
        let pop_var = |xs: &[f64]| {
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64
        };
        let n = pixels.len() as f64;
        let expected =
            back.len() as f64 / n * pop_var(&back) + fore.len() as f64 / n * pop_var(&fore);
        let got = within_class_variance(&hist, t).unwrap();
        assert!((got - expected).abs() <= 1e-9 * expected);
    }

    #[test]
    fn between_matches_total_minus_within() {
        let mut rng = SplitMix64::new(77);
        for _ in 0..50 {
            let h = random_histogram(&mut rng);
            let (_, total) = image_mean_variance(&h).unwrap();
            for t in 0..=255u8 {
                let w = within_class_variance(&h, t).unwrap();
                let b = between_class_variance(&h, t).unwrap();
                assert!(w >= 0.0 && b >= 0.0);
                assert!((w + b - total).abs() <= 1e-9 * total.max(f64::MIN_POSITIVE));
            }
        }
    }

    #[test]
    fn otsu_examples() {
        let r = otsu_threshold(&bimodal()).unwrap();
        assert_eq!(r.threshold, 0);
        assert_eq!(r.sigma_b2_between, 16256.25);
        assert_eq!(r.sigma_w2, 0.0);
        assert_eq!(r.sigma_total2, 16256.25);

        let flat = Histogram::from_counts(&[(128, 4)]).unwrap();
        assert!(matches!(
            otsu_threshold(&flat),
            Err(Error::DegenerateHistogram { intensity: 128 })
        ));
    }

    #[test]
    fn report_serializes_flat_keys() {
        let r = otsu_threshold(&bimodal()).unwrap();
        let v = serde_json::to_value(r).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "mu_b",
                "mu_f",
                "sigma_b2_between",
                "sigma_total2",
                "sigma_w2",
                "threshold",
                "var_b",
                "var_f",
                "w_b",
                "w_f"
            ]
        );
    }

    #[test]
    fn fast_scan_agrees_with_per_cut_recomputation() {
        let mut rng = SplitMix64::new(4);
        for _ in 0..150 {
            let h = random_histogram(&mut rng);
            let report = otsu_threshold(&h).unwrap();
            let mut best = (0u8, f64::NEG_INFINITY);
            for t in 0..=MAX_CANDIDATE {
                let b = between_class_variance(&h, t).unwrap();
                if b > best.1 {
                    best = (t, b);
                }
            }
            assert_eq!(report.threshold, best.0);
            assert_eq!(report.sigma_b2_between.to_bits(), best.1.to_bits());
        }
    }

    #[test]
    fn apply_threshold_examples() {
        let img = GrayImage::new(4, 1, vec![0, 0, 255, 255]).unwrap();
        let mask = apply_threshold(&img, 0);
        assert_eq!(mask.labels(), &[0, 0, 1, 1]);
        assert_eq!(mask.threshold_used(), Some(0));

        let img = GrayImage::new(1, 1, vec![5]).unwrap();
        assert_eq!(apply_threshold(&img, 255).labels(), &[0]);
    }

    #[test]
    fn label_counts_match_class_weights() {
        let mut rng = SplitMix64::new(31);
        let pixels: Vec<u8> = (0..400).map(|_| rng.next_below(256) as u8).collect();
        let img = GrayImage::new(20, 20, pixels).unwrap();
        let hist = Histogram::from_image(&img);
        let report = otsu_threshold(&hist).unwrap();
        let mask = apply_threshold(&img, report.threshold);
        let fg = mask.foreground_count() as f64;
        assert_eq!(fg, report.stats.w_f * 400.0);
        assert_eq!(400.0 - fg, report.stats.w_b * 400.0);
    }
}
