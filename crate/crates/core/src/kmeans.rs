//! Lloyd's K-means and pixel clustering.
//!
//! One run: pick `k` initial centroids from the data, assign every point to
//! its nearest centroid (ties to the lowest index), move each centroid to the
//! mean of its members, and repeat until the centroids stop moving (max
//! movement `<= tol` with an unchanged assignment) or `max_iter` updates
//! have run.
//!
//! Assignment runs in parallel per point; centroid sums and inertia are
//! reduced sequentially in point order so results do not depend on the
//! thread count.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, GrayImage, MaskSource};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    fn key(&self) -> Vec<u64> {
        // +0.0 and -0.0 are the same point.
        self.0.iter().map(|c| (c + 0.0).to_bits()).collect()
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(coords: Vec<f64>) -> Self {
        Self(coords)
    }
}

impl From<f64> for FeatureVector {
    fn from(c: f64) -> Self {
        Self(vec![c])
    }
}

/// `sqrt(Σ (q_i - p_i)²)`.
pub fn euclidean_distance(p: &FeatureVector, q: &FeatureVector) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            actual: q.dim(),
        });
    }
    Ok(squared_distance(p.coords(), q.coords()).sqrt())
}

#[inline]
fn squared_distance(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (b - a) * (b - a)).sum()
}

/// How the initial centroids are drawn from the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// The first `k` distinct points in input order.
    FirstK,
    /// Distinct points sorted lexicographically, taken at `k` evenly spaced
    /// ranks (the median rank when `k == 1`).
    Spread,
    /// `k` distinct points drawn uniformly with [`SplitMix64`].
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub init: Init,
    pub max_iter: usize,
    pub tol: f64,
}

impl KMeansConfig {
    pub const DEFAULT_MAX_ITER: usize = 100;
    pub const DEFAULT_TOL: f64 = 1e-6;

    pub fn new(k: usize, init: Init) -> Self {
        Self {
            k,
            init,
            max_iter: Self::DEFAULT_MAX_ITER,
            tol: Self::DEFAULT_TOL,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter(
                "max_iter must be at least 1".into(),
            ));
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tol {} must be >= 0",
                self.tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centroids: Vec<FeatureVector>,
    pub labels: Vec<usize>,
    pub counts: Vec<usize>,
    /// Number of centroid updates performed.
    pub iterations: usize,
    pub inertia: f64,
    /// Inertia after the initial assignment and after every update.
    pub inertia_history: Vec<f64>,
    pub converged: bool,
}

/// Serializable digest of a [`KMeansResult`], without per-point labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansSummary {
    pub centroids: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
    pub iterations: usize,
    pub inertia: f64,
    pub converged: bool,
}

impl KMeansResult {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn summary(&self) -> KMeansSummary {
        KMeansSummary {
            centroids: self.centroids.iter().map(|c| c.coords().to_vec()).collect(),
            counts: self.counts.clone(),
            iterations: self.iterations,
            inertia: self.inertia,
            converged: self.converged,
        }
    }
}

fn distinct_points(points: &[FeatureVector]) -> Vec<&FeatureVector> {
    let mut seen = HashSet::new();
    points.iter().filter(|p| seen.insert(p.key())).collect()
}

fn initial_centroids(points: &[FeatureVector], config: &KMeansConfig) -> Result<Vec<Vec<f64>>> {
    let mut distinct = distinct_points(points);
    let k = config.k;
    if distinct.len() < k {
        return Err(Error::TooFewDistinctPoints {
            k,
            distinct: distinct.len(),
        });
    }
    let chosen: Vec<&FeatureVector> = match config.init {
        Init::FirstK => distinct[..k].to_vec(),
        Init::Spread => {
            distinct.sort_by(|a, b| {
                a.coords()
                    .iter()
                    .zip(b.coords())
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            let last = distinct.len() - 1;
            if k == 1 {
                vec![distinct[last / 2]]
            } else {
                (0..k)
                    .map(|i| distinct[(i * last + (k - 1) / 2) / (k - 1)])
                    .collect()
            }
        }
        Init::Random { seed } => {
            let mut rng = SplitMix64::new(seed);
            for i in 0..k {
                let j = i + rng.next_below((distinct.len() - i) as u64) as usize;
                distinct.swap(i, j);
            }
            distinct[..k].to_vec()
        }
    };
    Ok(chosen.into_iter().map(|p| p.coords().to_vec()).collect())
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

/// Below this many points the assignment runs on the calling thread.
const PARALLEL_MIN_POINTS: usize = 4096;

fn assign(points: &[FeatureVector], centroids: &[Vec<f64>]) -> Vec<usize> {
    if points.len() < PARALLEL_MIN_POINTS {
        return points
            .iter()
            .map(|p| nearest(p.coords(), centroids))
            .collect();
    }
    points
        .par_iter()
        .map(|p| nearest(p.coords(), centroids))
        .collect()
}

fn counts_of(labels: &[usize], k: usize) -> Vec<usize> {
    let mut counts = vec![0; k];
    for &l in labels {
        counts[l] += 1;
    }
    counts
}

/// Gives every empty cluster the point farthest from its own centroid
/// (taken from a cluster that keeps at least one member) and moves the empty
/// cluster's centroid onto that point.
fn repair_empty(points: &[FeatureVector], labels: &mut [usize], centroids: &mut [Vec<f64>]) {
    let k = centroids.len();
    let mut counts = counts_of(labels, k);
    while let Some(empty) = counts.iter().position(|&c| c == 0) {
        let mut donor_point = None;
        let mut worst = f64::NEG_INFINITY;
        for (i, p) in points.iter().enumerate() {
            let l = labels[i];
            if counts[l] < 2 {
                continue;
            }
            let d = squared_distance(p.coords(), &centroids[l]);
            if d > worst {
                worst = d;
                donor_point = Some(i);
            }
        }
        let Some(i) = donor_point else {
            // Only possible when n < k, which the distinct-point check rules out.
            unreachable!("no cluster can donate a point");
        };
        counts[labels[i]] -= 1;
        counts[empty] += 1;
        labels[i] = empty;
        centroids[empty] = points[i].coords().to_vec();
    }
}

/// Member means, accumulated as offsets from each cluster's first member so
/// that a cluster of identical points reproduces that point exactly.
fn means(points: &[FeatureVector], labels: &[usize], k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut anchors: Vec<Option<&[f64]>> = vec![None; k];
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        let anchor = *anchors[l].get_or_insert(p.coords());
        counts[l] += 1;
        for ((s, c), a) in sums[l].iter_mut().zip(p.coords()).zip(anchor) {
            *s += c - a;
        }
    }
    sums.into_iter()
        .zip(counts)
        .zip(anchors)
        .map(|((s, n), anchor)| {
            let anchor = anchor.expect("clusters are non-empty after repair");
            s.iter()
                .zip(anchor)
                .map(|(d, a)| a + d / n as f64)
                .collect()
        })
        .collect()
}

fn inertia(points: &[FeatureVector], labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| squared_distance(p.coords(), &centroids[l]))
        .sum()
}

pub fn kmeans(points: &[FeatureVector], config: &KMeansConfig) -> Result<KMeansResult> {
    config.validate()?;
    let first = points.first().ok_or(Error::EmptyInput)?;
    let dim = first.dim();
    if dim == 0 {
        return Err(Error::InvalidParameter(
            "feature vectors must have d >= 1".into(),
        ));
    }
    if let Some(bad) = points.iter().find(|p| p.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: bad.dim(),
        });
    }

    let k = config.k;
    let mut centroids = initial_centroids(points, config)?;
    let mut labels = assign(points, &centroids);
    repair_empty(points, &mut labels, &mut centroids);
    let mut history = vec![inertia(points, &labels, &centroids)];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < config.max_iter {
        iterations += 1;
        let updated = means(points, &labels, k, dim);
        let movement = updated
            .iter()
            .zip(&centroids)
            .map(|(a, b)| squared_distance(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = updated;

        let mut next = assign(points, &centroids);
        repair_empty(points, &mut next, &mut centroids);
        history.push(inertia(points, &next, &centroids));
        let changed = next != labels;
        labels = next;
        if movement <= config.tol && !changed {
            converged = true;
            break;
        }
    }

    Ok(KMeansResult {
        centroids: centroids.into_iter().map(FeatureVector).collect(),
        counts: counts_of(&labels, k),
        labels,
        iterations,
        inertia: *history.last().expect("history is never empty"),
        inertia_history: history,
        converged,
    })
}

/// Per-pixel cluster indices, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<usize>,
}

/// Feature vectors for every pixel: intensity / 255, followed by
/// `x / width, y / height` when `spatial` is set.
pub fn pixel_features(img: &GrayImage, spatial: bool) -> Vec<FeatureVector> {
    let (w, h) = (img.width(), img.height());
    img.pixels()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let intensity = f64::from(v) / 255.0;
            if spatial {
                let (x, y) = (i % w, i / w);
                FeatureVector(vec![intensity, x as f64 / w as f64, y as f64 / h as f64])
            } else {
                FeatureVector(vec![intensity])
            }
        })
        .collect()
}

pub fn cluster_image(
    img: &GrayImage,
    config: &KMeansConfig,
    spatial: bool,
) -> Result<(KMeansResult, LabelMap)> {
    let features = pixel_features(img, spatial);
    let result = kmeans(&features, config)?;
    let map = LabelMap {
        width: img.width(),
        height: img.height(),
        labels: result.labels.clone(),
    };
    Ok((result, map))
}

/// Which cluster becomes the foreground region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectRule {
    /// Highest centroid intensity.
    Brightest,
    /// Most members.
    Largest,
    Index(usize),
}

impl fmt::Display for SelectRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectRule::Brightest => f.write_str("brightest"),
            SelectRule::Largest => f.write_str("largest"),
            SelectRule::Index(i) => write!(f, "index:{i}"),
        }
    }
}

impl FromStr for SelectRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brightest" => Ok(SelectRule::Brightest),
            "largest" => Ok(SelectRule::Largest),
            _ => s
                .strip_prefix("index:")
                .and_then(|i| i.parse().ok())
                .map(SelectRule::Index)
                .ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "unknown selection rule {s:?}; expected brightest, largest or index:N"
                    ))
                }),
        }
    }
}

/// Index of the first maximum.
fn first_argmax<T: PartialOrd + Copy>(values: impl Iterator<Item = T>) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (i, v) in values.enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

pub fn selected_cluster(result: &KMeansResult, rule: SelectRule) -> Result<usize> {
    let k = result.k();
    match rule {
        SelectRule::Brightest => first_argmax(result.centroids.iter().map(|c| c.coords()[0])),
        SelectRule::Largest => first_argmax(result.counts.iter().copied()),
        SelectRule::Index(i) if i < k => Some(i),
        SelectRule::Index(i) => return Err(Error::IndexOutOfRange { index: i, len: k }),
    }
    .ok_or(Error::EmptyInput)
}

pub fn select_cluster(
    result: &KMeansResult,
    label_map: &LabelMap,
    rule: SelectRule,
) -> Result<BinaryMask> {
    let cluster = selected_cluster(result, rule)?;
    let labels = label_map
        .labels
        .iter()
        .map(|&l| u8::from(l == cluster))
        .collect();
    BinaryMask::new(
        label_map.width,
        label_map.height,
        labels,
        MaskSource::Cluster { cluster },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalars(values: &[f64]) -> Vec<FeatureVector> {
        values.iter().map(|&v| FeatureVector::from(v)).collect()
    }

    #[test]
    fn distance_examples() {
        let p = FeatureVector::new(vec![0.0, 0.0]);
        let q = FeatureVector::new(vec![3.0, 4.0]);
        assert_eq!(euclidean_distance(&p, &q).unwrap(), 5.0);
        assert_eq!(euclidean_distance(&q, &q).unwrap(), 0.0);
        assert_eq!(euclidean_distance(&10.0.into(), &3.0.into()).unwrap(), 7.0);
        assert!(matches!(
            euclidean_distance(&p, &1.0.into()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn hand_trace_two_clusters() {
        let pts = scalars(&[1.0, 2.0, 10.0, 11.0]);
        let r = kmeans(&pts, &KMeansConfig::new(2, Init::FirstK)).unwrap();
        assert_eq!(r.centroids, vec![1.5.into(), 10.5.into()]);
        assert_eq!(r.labels, vec![0, 0, 1, 1]);
        assert!(r.converged);
        assert!(r.iterations <= 3);
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let pts = scalars(&[3.0, 5.0, 10.0, 2.0]);
        let r = kmeans(&pts, &KMeansConfig::new(1, Init::FirstK)).unwrap();
        assert_eq!(r.centroids, vec![5.0.into()]);
        assert!((1..=2).contains(&r.iterations));
    }

    #[test]
    fn k_equals_distinct_count() {
        let pts = scalars(&[4.0, 1.0, 9.0, 7.0]);
        let r = kmeans(&pts, &KMeansConfig::new(4, Init::FirstK)).unwrap();
        assert_eq!(r.inertia, 0.0);
        for (p, &l) in pts.iter().zip(&r.labels) {
            assert_eq!(&r.centroids[l], p);
        }
    }

    #[test]
    fn errors() {
        let cfg = KMeansConfig::new(2, Init::FirstK);
        assert!(matches!(kmeans(&[], &cfg), Err(Error::EmptyInput)));
        assert!(matches!(
            kmeans(&scalars(&[1.0, 1.0, 1.0]), &cfg),
            Err(Error::TooFewDistinctPoints { k: 2, distinct: 1 })
        ));
        let mixed = vec![FeatureVector::from(1.0), FeatureVector::new(vec![1.0, 2.0])];
        assert!(matches!(
            kmeans(&mixed, &cfg),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(kmeans(&scalars(&[1.0]), &KMeansConfig::new(0, Init::FirstK)).is_err());
    }

    #[test]
    fn spread_init_picks_evenly_spaced_ranks() {
        let pts = scalars(&[5.0, 1.0, 3.0, 2.0, 4.0, 1.0]);
        let cfg = KMeansConfig::new(3, Init::Spread);
        assert_eq!(
            initial_centroids(&pts, &cfg).unwrap(),
            vec![vec![1.0], vec![3.0], vec![5.0]]
        );
        let cfg = KMeansConfig::new(1, Init::Spread);
        assert_eq!(initial_centroids(&pts, &cfg).unwrap(), vec![vec![3.0]]);
    }

    #[test]
    fn random_init_picks_distinct_points() {
        let pts = scalars(&[0.0, 0.0, 1.0, 1.0, 2.0, 3.0]);
        for seed in 0..50 {
            let cfg = KMeansConfig::new(4, Init::Random { seed });
            let mut c = initial_centroids(&pts, &cfg).unwrap();
            c.sort_by(|a, b| a[0].total_cmp(&b[0]));
            c.dedup();
            assert_eq!(c.len(), 4);
        }
    }

    #[test]
    fn empty_cluster_is_repaired() {
        // Centroid 2 starts far away from every point and would stay empty.
        let pts = scalars(&[0.0, 0.1, 0.2, 10.0]);
        let mut centroids = vec![vec![0.1], vec![10.0], vec![100.0]];
        let mut labels = assign(&pts, &centroids);
        assert_eq!(labels, vec![0, 0, 0, 1]);
        repair_empty(&pts, &mut labels, &mut centroids);
        assert_eq!(counts_of(&labels, 3), vec![2, 1, 1]);
        assert_eq!(labels[0], 2);
        assert_eq!(centroids[2], vec![0.0]);
    }

    #[test]
    fn two_tone_image_clusters_by_tone() {
        let img = GrayImage::from_fn(6, 4, |x, _| if x < 2 { 0 } else { 255 }).unwrap();
        let (r, map) = cluster_image(&img, &KMeansConfig::new(2, Init::Spread), false).unwrap();
        let dark = map.labels[0];
        for (i, &l) in map.labels.iter().enumerate() {
            assert_eq!(l == dark, img.pixels()[i] == 0);
        }
        let mask = select_cluster(&r, &map, SelectRule::Brightest).unwrap();
        let expected: Vec<u8> = img.pixels().iter().map(|&v| u8::from(v == 255)).collect();
        assert_eq!(mask.labels(), expected.as_slice());
    }

    #[test]
    fn constant_image_single_cluster() {
        let img = GrayImage::filled(5, 5, 42).unwrap();
        let (r, map) = cluster_image(&img, &KMeansConfig::new(1, Init::Spread), false).unwrap();
        assert_eq!(r.inertia, 0.0);
        for rule in [
            SelectRule::Brightest,
            SelectRule::Largest,
            SelectRule::Index(0),
        ] {
            let mask = select_cluster(&r, &map, rule).unwrap();
            assert_eq!(mask.foreground_count(), 25);
        }
    }

    #[test]
    fn index_rule_out_of_range() {
        let img = GrayImage::from_fn(4, 1, |x, _| x as u8).unwrap();
        let (r, map) = cluster_image(&img, &KMeansConfig::new(2, Init::Spread), false).unwrap();
        assert!(matches!(
            select_cluster(&r, &map, SelectRule::Index(2)),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        ));
    }

    #[test]
    fn select_rule_parsing() {
        assert_eq!(
            "brightest".parse::<SelectRule>().unwrap(),
            SelectRule::Brightest
        );
        assert_eq!(
            "largest".parse::<SelectRule>().unwrap(),
            SelectRule::Largest
        );
        assert_eq!(
            "index:3".parse::<SelectRule>().unwrap(),
            SelectRule::Index(3)
        );
        assert!("index:x".parse::<SelectRule>().is_err());
        assert!("darkest".parse::<SelectRule>().is_err());
        assert_eq!(SelectRule::Index(3).to_string(), "index:3");
    }

    #[test]
    fn spatial_features() {
        let img = GrayImage::from_fn(2, 2, |x, y| (x + 2 * y) as u8 * 85).unwrap();
        let f = pixel_features(&img, true);
        assert_eq!(f[3].coords(), &[1.0, 0.5, 0.5]);
        assert_eq!(pixel_features(&img, false)[3].coords(), &[1.0]);
    }
}
