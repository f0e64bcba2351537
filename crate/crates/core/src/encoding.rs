//! Image sets, Gaussian corruption, Poisson rate coding, and splitting.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::{bernoulli_threshold, stream, Purpose};
use crate::{Error, Real, Result, Tensor};

pub const CLASSES: usize = 10;

/// Sampling frequency of the network; the brightest pixel spikes once per
/// timestep at this rate.
pub const SAMPLE_RATE_HZ: f64 = 10e6;

/// Labelled images with intensities normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSet {
    rows: usize,
    cols: usize,
    pixels: Vec<f32>,
    labels: Vec<u8>,
}

impl ImageSet {
    pub fn new(rows: usize, cols: usize, pixels: Vec<f32>, labels: Vec<u8>) -> Result<Self> {
        let per = rows * cols;
        if per == 0 || pixels.len() != per * labels.len() {
            return Err(Error::Dimension(format!(
                "{} pixels do not hold {} images of {rows}x{cols}",
                pixels.len(),
                labels.len()
            )));
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("pixel intensities must lie in [0, 1]".into()));
        }
        if let Some(&l) = labels.iter().find(|&&l| l as usize >= CLASSES) {
            return Err(Error::LabelOutOfRange {
                label: l as usize,
                classes: CLASSES,
            });
        }
        Ok(Self {
            rows,
            cols,
            pixels,
            labels,
        })
    }

    /// Build from raw 8-bit intensities, normalizing by 255.
    pub fn from_u8(rows: usize, cols: usize, bytes: &[u8], labels: Vec<u8>) -> Result<Self> {
        Self::new(
            rows,
            cols,
            bytes.iter().map(|&b| b as f32 / 255.0).collect(),
            labels,
        )
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pixels_per_image(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, i: usize) -> &[f32] {
        let n = self.pixels_per_image();
        &self.pixels[i * n..(i + 1) * n]
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    /// Quantize back to 8-bit intensities.
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&p| libm_round(p * 255.0).clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let n = self.pixels_per_image();
        let mut pixels = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            pixels.extend_from_slice(self.image(i));
        }
        Self {
            rows: self.rows,
            cols: self.cols,
            pixels,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// The first `n` images after a seeded shuffle.
    pub fn sample(&self, n: usize, seed: u64) -> Self {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut stream(seed, Purpose::Subset, &[]));
        idx.truncate(n.min(self.len()));
        self.subset(&idx)
    }

    pub fn with_labels(&self, labels: Vec<u8>) -> Result<Self> {
        Self::new(self.rows, self.cols, self.pixels.clone(), labels)
    }
}

#[inline]
fn libm_round(x: f32) -> f32 {
    num_traits::Float::round(x)
}

/// Standard deviation of additive Gaussian pixel noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
}

impl NoiseSpec {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::OutOfRange {
                what: "sigma",
                value: sigma,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        Ok(Self { sigma })
    }
}

/// `x' = clamp(x + ε, 0, 1)` with `ε ~ N(0, σ²)` i.i.d. per pixel.
///
/// Image `i` draws from its own stream keyed by `(seed, i)`, so every model
/// evaluated with the same seed sees identical corrupted images.
pub fn add_noise(set: &ImageSet, spec: NoiseSpec, seed: u64) -> ImageSet {
    if spec.sigma == 0.0 {
        return set.clone();
    }
    let n = set.pixels_per_image();
    let mut pixels = set.pixels.clone();
    for (i, img) in pixels.chunks_exact_mut(n).enumerate() {
        let mut rng = stream(seed, Purpose::Noise, &[i as u64]);
        for p in img {
            let eps: f64 = StandardNormal.sample(&mut rng);
            *p = (*p as f64 + spec.sigma * eps).clamp(0.0, 1.0) as f32;
        }
    }
    ImageSet {
        pixels,
        ..set.clone()
    }
}

/// Spike tensor laid out `[steps][batch][units]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeBatch<S> {
    pub steps: usize,
    pub batch: usize,
    pub units: usize,
    /// Seconds per timestep.
    pub timestep_period: f64,
    /// `[steps·batch × units]`, time-major.
    pub spikes: Tensor<S>,
}

/// Poisson rate coding: pixel `p` of image `indices[b]` spikes at each
/// timestep with probability equal to its intensity, so a fully bright pixel
/// fires at every step (the sampling rate).
///
/// Each image draws from the stream `(seed, pass, image index)`; the result
/// does not depend on how images are grouped into batches.
pub fn poisson_encode<S: Real>(
    set: &ImageSet,
    indices: &[usize],
    steps: usize,
    seed: u64,
    pass: u64,
) -> Result<SpikeBatch<S>> {
    if steps == 0 {
        return Err(Error::Config(
            "poisson encoding needs at least one timestep".into(),
        ));
    }
    let units = set.pixels_per_image();
    let batch = indices.len();
    let mut spikes = vec![S::zero(); steps * batch * units];
    let mut thresholds = vec![0u64; units];
    for (b, &i) in indices.iter().enumerate() {
        for (th, &p) in thresholds.iter_mut().zip(set.image(i)) {
            *th = bernoulli_threshold(p as f64);
        }
        let mut rng = stream(seed, Purpose::Encode, &[pass, i as u64]);
        for t in 0..steps {
            let row = &mut spikes[(t * batch + b) * units..(t * batch + b + 1) * units];
            for (s, &th) in row.iter_mut().zip(&thresholds) {
                if th != 0 && (rng.next_u32() as u64) < th {
                    *s = S::one();
                }
            }
        }
    }
    Ok(SpikeBatch {
        steps,
        batch,
        units,
        timestep_period: 1.0 / SAMPLE_RATE_HZ,
        spikes: Tensor::new(vec![steps * batch, units], spikes)?,
    })
}

/// Seeded shuffled partition into `(train, validation)`.
pub fn split(set: &ImageSet, val_fraction: f64, seed: u64) -> Result<(ImageSet, ImageSet)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::OutOfRange {
            what: "val_fraction",
            value: val_fraction,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let mut idx: Vec<usize> = (0..set.len()).collect();
    idx.shuffle(&mut stream(seed, Purpose::Split, &[]));
    let n_val = num_traits::Float::round(set.len() as f64 * val_fraction) as usize;
    let (val, train) = idx.split_at(n_val);
    Ok((set.subset(train), set.subset(val)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_set(n: usize) -> ImageSet {
        let pixels = (0..n * 4).map(|i| (i % 7) as f32 / 6.0).collect();
        let labels = (0..n).map(|i| (i % 10) as u8).collect();
        ImageSet::new(2, 2, pixels, labels).unwrap()
    }

    #[test]
    fn zero_noise_is_identity() {
        let s = ramp_set(20);
        assert_eq!(add_noise(&s, NoiseSpec::new(0.0).unwrap(), 3), s);
    }

    #[test]
    fn heavy_noise_stays_in_range() {
        let s = ramp_set(200);
        let noisy = add_noise(&s, NoiseSpec::new(3.0).unwrap(), 3);
        assert!(noisy.pixels().iter().all(|p| (0.0..=1.0).contains(p)));
        assert_eq!(noisy.labels(), s.labels());
        assert!(NoiseSpec::new(-0.1).is_err());
    }

    #[test]
    fn encode_extremes() {
        let s = ImageSet::new(1, 2, vec![0.0, 1.0], vec![0]).unwrap();
        let b = poisson_encode::<f32>(&s, &[0], 50, 1, 0).unwrap();
        for t in 0..50 {
            assert_eq!(b.spikes.row(t), &[0.0, 1.0]);
        }
        assert!((b.timestep_period - 100e-9).abs() < 1e-20);
    }

    #[test]
    fn encode_independent_of_batching() {
        let s = ramp_set(6);
        let all = poisson_encode::<f32>(&s, &[0, 1, 2], 5, 9, 1).unwrap();
        let one = poisson_encode::<f32>(&s, &[1], 5, 9, 1).unwrap();
        for t in 0..5 {
            assert_eq!(all.spikes.row(t * 3 + 1), one.spikes.row(t));
        }
    }

    #[test]
    fn split_is_deterministic_partition() {
        let s = ramp_set(100);
        let (a, b) = split(&s, 0.1, 42).unwrap();
        let (a2, b2) = split(&s, 0.1, 42).unwrap();
        assert_eq!((a.len(), b.len()), (90, 10));
        assert_eq!((&a, &b), (&a2, &b2));
        let mut all: Vec<u8> = a.labels().iter().chain(b.labels()).copied().collect();
        let mut orig = s.labels().to_vec();
        all.sort();
        orig.sort();
        assert_eq!(all, orig);
        assert!(split(&s, 1.0, 1).is_err());
        assert!(split(&s, 0.0, 1).is_err());
    }

    #[test]
    fn split_seeds_differ() {
        // Label each image by its index so the partition is visible.
        let pixels = vec![0.5; 100];
        let s = ImageSet::new(1, 1, pixels, (0..100).map(|i| (i % 10) as u8).collect()).unwrap();
        let idx_set = |seed| {
            let mut idx: Vec<usize> = (0..100).collect();
            idx.shuffle(&mut stream(seed, Purpose::Split, &[]));
            idx
        };
        assert_ne!(idx_set(1), idx_set(2));
        let _ = split(&s, 0.5, 1).unwrap();
    }

    #[test]
    fn rejects_bad_sets() {
        assert!(ImageSet::new(2, 2, vec![0.0; 5], vec![0]).is_err());
        assert!(ImageSet::new(1, 1, vec![1.5], vec![0]).is_err());
        assert!(ImageSet::new(1, 1, vec![0.5], vec![10]).is_err());
    }
}
