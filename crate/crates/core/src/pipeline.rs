//! Classic and improved binarization pipelines.
//!
//! The improved method clusters pixel intensities, keeps the selected
//! cluster's pixels, zeroes everything else, smooths the result and then
//! runs global Otsu on the smoothed image's full histogram.

use std::collections::BTreeMap;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::smooth;
use crate::histogram::Histogram;
use crate::image::{BinaryMask, GrayImage, MaskSource};
use crate::kmeans::{cluster_image, select_cluster, Init, KMeansConfig, KMeansSummary, SelectRule};
use crate::otsu::{apply_threshold, otsu_threshold, ThresholdReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Classic,
    Improved,
}

/// Position of the smoothing stage relative to clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageOrder {
    #[default]
    ClusterFirst,
    /// Experimental: smooth, then cluster, select and suppress.
    SmoothFirst,
}

impl FromStr for StageOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cluster-first" => Ok(StageOrder::ClusterFirst),
            "smooth-first" => Ok(StageOrder::SmoothFirst),
            _ => Err(Error::InvalidParameter(format!(
                "unknown stage order {s:?}; expected cluster-first or smooth-first"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub k: usize,
    pub select: SelectRule,
    pub sigma: f64,
    pub init: Init,
    pub max_iter: usize,
    pub tol: f64,
    pub spatial: bool,
    pub order: StageOrder,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k: 3,
            select: SelectRule::Brightest,
            sigma: 2.0,
            init: Init::Spread,
            max_iter: KMeansConfig::DEFAULT_MAX_ITER,
            tol: KMeansConfig::DEFAULT_TOL,
            spatial: false,
            order: StageOrder::ClusterFirst,
        }
    }
}

impl PipelineConfig {
    pub fn kmeans_config(&self) -> KMeansConfig {
        KMeansConfig {
            k: self.k,
            init: self.init,
            max_iter: self.max_iter,
            tol: self.tol,
        }
    }

    /// Cluster count actually used on `img`: intensity-only clustering of
    /// an image with fewer distinct levels than `k` uses one cluster per level.
    pub fn effective_k(&self, img: &GrayImage) -> usize {
        if self.spatial {
            return self.k;
        }
        self.k
            .min(Histogram::from_image(img).occupied_levels())
            .max(1)
    }

    fn kmeans_config_for(&self, img: &GrayImage) -> KMeansConfig {
        KMeansConfig {
            k: self.effective_k(img),
            init: self.init,
            max_iter: self.max_iter,
            tol: self.tol,
        }
    }
}

/// What a pipeline run did and what it found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: Method,
    pub stages: Vec<String>,
    pub threshold_report: ThresholdReport,
    pub kmeans_summary: Option<KMeansSummary>,
    pub sigma: Option<f64>,
    /// Cluster count asked for; may exceed the count in `kmeans_summary`.
    pub requested_k: Option<usize>,
    pub selected_cluster: Option<usize>,
    pub order: Option<StageOrder>,
    /// Otsu always runs over every pixel of the processed image.
    pub otsu_scope: String,
    /// Histogram the threshold was chosen from.
    pub otsu_histogram: Vec<u64>,
    pub timings_ms: Option<BTreeMap<String, f64>>,
}

impl RunReport {
    pub fn without_timings(mut self) -> Self {
        self.timings_ms = None;
        self
    }
}

#[derive(Default)]
struct StageClock {
    stages: Vec<String>,
    timings: BTreeMap<String, f64>,
}

impl StageClock {
    fn run<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings
            .insert(name.to_owned(), start.elapsed().as_secs_f64() * 1e3);
        self.stages.push(name.to_owned());
        out
    }
}

const FULL_IMAGE: &str = "full_image";

fn retag(mask: BinaryMask, source: MaskSource) -> BinaryMask {
    BinaryMask::new(mask.width(), mask.height(), mask.labels().to_vec(), source)
        .expect("mask already valid")
}

pub fn binarize_classic(img: &GrayImage) -> Result<(BinaryMask, RunReport)> {
    let mut clock = StageClock::default();
    let hist = clock.run("histogram", || Histogram::from_image(img));
    let threshold_report = clock.run("otsu", || otsu_threshold(&hist))?;
    let mask = clock.run("apply_threshold", || {
        apply_threshold(img, threshold_report.threshold)
    });
    let report = RunReport {
        method: Method::Classic,
        stages: clock.stages,
        threshold_report,
        kmeans_summary: None,
        sigma: None,
        requested_k: None,
        selected_cluster: None,
        order: None,
        otsu_scope: FULL_IMAGE.into(),
        otsu_histogram: hist.bins().to_vec(),
        timings_ms: Some(clock.timings),
    };
    Ok((mask, report))
}

/// Every intermediate of an improved run.
#[derive(Debug, Clone)]
pub struct ImprovedRun {
    /// Pixels belonging to the selected cluster.
    pub region: BinaryMask,
    /// Image handed to Otsu: suppressed and smoothed.
    pub processed: GrayImage,
    pub mask: BinaryMask,
    pub report: RunReport,
}

fn suppress(img: &GrayImage, region: &BinaryMask) -> GrayImage {
    let pixels = img
        .pixels()
        .iter()
        .zip(region.labels())
        .map(|(&v, &keep)| if keep == 1 { v } else { 0 })
        .collect();
    GrayImage::new(img.width(), img.height(), pixels).expect("same dimensions as input")
}

pub fn run_improved(img: &GrayImage, config: &PipelineConfig) -> Result<ImprovedRun> {
    let mut clock = StageClock::default();
    let cluster_and_select = |clock: &mut StageClock, src: &GrayImage| -> Result<_> {
        let kcfg = config.kmeans_config_for(src);
        let (result, map) = clock.run("cluster", || cluster_image(src, &kcfg, config.spatial))?;
        let region = clock.run("select", || select_cluster(&result, &map, config.select))?;
        let suppressed = clock.run("suppress", || suppress(src, &region));
        Ok((result, region, suppressed))
    };

    let (result, region, processed) = match config.order {
        StageOrder::ClusterFirst => {
            let (result, region, suppressed) = cluster_and_select(&mut clock, img)?;
            let smoothed = clock.run("smooth", || smooth(&suppressed, config.sigma))?;
            (result, region, smoothed)
        }
        StageOrder::SmoothFirst => {
            let smoothed = clock.run("smooth", || smooth(img, config.sigma))?;
            cluster_and_select(&mut clock, &smoothed)?
        }
    };

    let hist = clock.run("histogram", || Histogram::from_image(&processed));
    let threshold_report = clock.run("otsu", || otsu_threshold(&hist))?;
    let threshold = threshold_report.threshold;
    let mask = clock.run("apply_threshold", || {
        retag(
            apply_threshold(&processed, threshold),
            MaskSource::Improved { threshold },
        )
    });
    let selected_cluster = match region.source() {
        MaskSource::Cluster { cluster } => Some(cluster),
        _ => None,
    };

    let report = RunReport {
        method: Method::Improved,
        stages: clock.stages,
        threshold_report,
        kmeans_summary: Some(result.summary()),
        sigma: Some(config.sigma),
        requested_k: Some(config.k),
        selected_cluster,
        order: Some(config.order),
        otsu_scope: FULL_IMAGE.into(),
        otsu_histogram: hist.bins().to_vec(),
        timings_ms: Some(clock.timings),
    };
    Ok(ImprovedRun {
        region,
        processed,
        mask,
        report,
    })
}

pub fn binarize_improved(
    img: &GrayImage,
    config: &PipelineConfig,
) -> Result<(BinaryMask, RunReport)> {
    let run = run_improved(img, config)?;
    Ok((run.mask, run.report))
}

/// Fraction of disagreeing pixels, minimised over label polarity.
pub fn misclassification_rate(mask: &BinaryMask, truth: &BinaryMask) -> Result<f64> {
    if (mask.width(), mask.height()) != (truth.width(), truth.height()) {
        return Err(Error::DimensionMismatch {
            expected: truth.width() * truth.height(),
            actual: mask.width() * mask.height(),
        });
    }
    let n = mask.labels().len();
    let differing = mask
        .labels()
        .iter()
        .zip(truth.labels())
        .filter(|(a, b)| a != b)
        .count();
    Ok(differing.min(n - differing) as f64 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_tone() -> GrayImage {
        GrayImage::from_fn(16, 12, |x, y| {
            if (4..11).contains(&x) && (3..9).contains(&y) {
                255
            } else {
                0
            }
        })
        .unwrap()
    }

    #[test]
    fn classic_on_two_tone() {
        let img = two_tone();
        let (mask, report) = binarize_classic(&img).unwrap();
        let expected: Vec<u8> = img.pixels().iter().map(|&v| u8::from(v == 255)).collect();
        assert_eq!(mask.labels(), expected.as_slice());
        assert_eq!(report.method, Method::Classic);
        assert!(report.kmeans_summary.is_none() && report.sigma.is_none());
        assert_eq!(mask.source(), MaskSource::Classic { threshold: 0 });
    }

    #[test]
    fn classic_on_constant_is_degenerate() {
        let img = GrayImage::filled(4, 4, 9).unwrap();
        assert!(matches!(
            binarize_classic(&img),
            Err(Error::DegenerateHistogram { .. })
        ));
    }

    #[test]
    fn improved_report_shape() {
        let (mask, report) = binarize_improved(&two_tone(), &PipelineConfig::default_k(2)).unwrap();
        assert_eq!(report.method, Method::Improved);
        assert_eq!(report.sigma, Some(2.0));
        assert!(report.kmeans_summary.is_some());
        assert_eq!(
            report.stages,
            [
                "cluster",
                "select",
                "suppress",
                "smooth",
                "histogram",
                "otsu",
                "apply_threshold"
            ]
        );
        assert!(matches!(mask.source(), MaskSource::Improved { .. }));
    }

    #[test]
    fn smooth_first_order() {
        let cfg = PipelineConfig {
            order: StageOrder::SmoothFirst,
            ..PipelineConfig::default_k(2)
        };
        let (_, report) = binarize_improved(&two_tone(), &cfg).unwrap();
        assert_eq!(
            report.stages[..4],
            ["smooth", "cluster", "select", "suppress"]
        );
    }

    #[test]
    fn misclassification_examples() {
        let truth =
            BinaryMask::new(4, 2, vec![0, 1, 0, 1, 1, 0, 1, 0], MaskSource::GroundTruth).unwrap();
        assert_eq!(misclassification_rate(&truth, &truth).unwrap(), 0.0);
        assert_eq!(
            misclassification_rate(&truth.complement(), &truth).unwrap(),
            0.0
        );
        let zeros = BinaryMask::new(4, 2, vec![0; 8], MaskSource::Loaded).unwrap();
        assert_eq!(misclassification_rate(&zeros, &truth).unwrap(), 0.5);
        let other = BinaryMask::new(2, 4, vec![0; 8], MaskSource::Loaded).unwrap();
        assert!(matches!(
            misclassification_rate(&other, &truth),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn order_parsing() {
        assert_eq!(
            "cluster-first".parse::<StageOrder>().unwrap(),
            StageOrder::ClusterFirst
        );
        assert_eq!(
            "smooth-first".parse::<StageOrder>().unwrap(),
            StageOrder::SmoothFirst
        );
        assert!("sideways".parse::<StageOrder>().is_err());
    }

    impl PipelineConfig {
        fn default_k(k: usize) -> Self {
            Self {
                k,
                ..Self::default()
            }
        }
    }
}
