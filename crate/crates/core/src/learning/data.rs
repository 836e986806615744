use rand::Rng;

use crate::{Error, Result};

pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
pub const CLASSES: usize = 10;

/// Grayscale 28×28 images with pixel values in `[0, 1]` and digit labels.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    /// Row-major pixels, `IMAGE_PIXELS` per sample.
    pub images: Vec<f64>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn new(images: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if images.len() != labels.len() * IMAGE_PIXELS {
            return Err(Error::dims("image buffer", labels.len() * IMAGE_PIXELS, images.len()));
        }
        if let Some(l) = labels.iter().find(|&&l| l as usize >= CLASSES) {
            return Err(Error::invalid(format!("label {l} out of range")));
        }
        Ok(Self { images, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[f64] {
        &self.images[i * IMAGE_PIXELS..(i + 1) * IMAGE_PIXELS]
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut images = Vec::with_capacity(indices.len() * IMAGE_PIXELS);
        for &i in indices {
            images.extend_from_slice(self.image(i));
        }
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Dataset { images, labels }
    }

    /// Samples whose label is in `digits`, in original order.
    pub fn filter_digits(&self, digits: &[u8]) -> Dataset {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| digits.contains(&self.labels[i])).collect();
        self.subset(&idx)
    }

    /// At most `per_digit` samples of each digit, in original order.
    pub fn take_per_digit(&self, per_digit: usize) -> Dataset {
        let mut seen = [0usize; CLASSES];
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| {
                let l = self.labels[i] as usize;
                seen[l] += 1;
                seen[l] <= per_digit
            })
            .collect();
        self.subset(&idx)
    }

    pub fn class_counts(&self) -> [usize; CLASSES] {
        let mut counts = [0; CLASSES];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    /// A learnable stand-in for MNIST: each digit gets a random blob template,
    /// and samples are the template plus pixel noise, clipped to `[0, 1]`.
    pub fn synthetic<R: Rng + ?Sized>(digits: &[u8], per_digit: usize, rng: &mut R) -> Dataset {
        let templates: Vec<Vec<f64>> = (0..CLASSES)
            .map(|_| {
                let cy = rng.random_range(6.0..22.0);
                let cx = rng.random_range(6.0..22.0);
                let r: f64 = rng.random_range(3.0..7.0);
                (0..IMAGE_PIXELS)
                    .map(|p| {
                        let (y, x) = ((p / IMAGE_SIDE) as f64, (p % IMAGE_SIDE) as f64);
                        let d2 = (y - cy).powi(2) + (x - cx).powi(2);
                        (-d2 / (2.0 * r * r)).exp()
                    })
                    .collect()
            })
            .collect();
        let mut images = Vec::with_capacity(digits.len() * per_digit * IMAGE_PIXELS);
        let mut labels = Vec::with_capacity(digits.len() * per_digit);
        for &d in digits {
            for _ in 0..per_digit {
                images.extend(
                    templates[d as usize]
                        .iter()
                        .map(|&t| (t + rng.random_range(-0.3..0.3)).clamp(0.0, 1.0)),
                );
                labels.push(d);
            }
        }
        Dataset { images, labels }
    }
}
