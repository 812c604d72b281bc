//! Grayscale binarization toolkit: global Otsu thresholding, Gaussian
//! smoothing, K-means clustering and a cluster-then-threshold pipeline,
//! plus a synthetic ground-truth generator for comparing the two methods.
//!
//! All operations are pure functions over immutable inputs. Parallel paths
//! (smoothing rows, K-means assignment, per-seed comparison runs, exhaustive
//! ring checks) produce the same bits as a sequential run.

pub mod error;
pub mod gaussian;
pub mod histogram;
pub mod image;
pub mod io;
pub mod kmeans;
pub mod otsu;
pub mod pipeline;
pub mod ringcheck;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use gaussian::{gaussian_density, kernel_1d, smooth, GaussianKernel};
pub use histogram::{image_mean_variance, Histogram};
pub use image::{to_grayscale, BinaryMask, GrayImage, MaskSource};
pub use kmeans::{
    cluster_image, euclidean_distance, kmeans, select_cluster, FeatureVector, Init, KMeansConfig,
    KMeansResult, KMeansSummary, LabelMap, SelectRule,
};
pub use otsu::{
    apply_threshold, between_class_variance, class_stats, otsu_threshold, within_class_variance,
    ClassStats, ThresholdReport,
};
pub use pipeline::{
    binarize_classic, binarize_improved, misclassification_rate, Method, PipelineConfig, RunReport,
    StageOrder,
};
pub use ringcheck::{verify_ring_axioms, AxiomReport, CheckMode, IntensityElement};
pub use synth::{generate, run_comparison, ComparisonReport, Shape, SynthSpec};
