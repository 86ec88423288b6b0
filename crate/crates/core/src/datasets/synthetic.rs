use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Label, LabelVector};
use crate::seeded_rng;

/// A multi-mode gaussian pool with a rare positive class living in a few of
/// the modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub positive_rate: f64,
    pub n_modes: usize,
    /// Typical distance between two mode centers.
    pub separation: f64,
    /// Per-coordinate standard deviation inside a mode.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n: 2200,
            d: 20,
            positive_rate: 39.0 / 2200.0,
            n_modes: 12,
            separation: 3.0,
            noise: 0.3,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::config("n", "must be at least 2"));
        }
        if self.d == 0 {
            return Err(Error::config("d", "must be at least 1"));
        }
        if !(self.positive_rate > 0.0 && self.positive_rate < 1.0) {
            return Err(Error::config("positive_rate", "must lie strictly between 0 and 1"));
        }
        if self.n_modes < 2 {
            return Err(Error::config("n_modes", "must be at least 2"));
        }
        if !(self.separation >= 0.0 && self.separation.is_finite()) {
            return Err(Error::config("separation", "must be finite and non-negative"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::config("noise", "must be finite and non-negative"));
        }
        let pos = self.positives();
        if pos == 0 || pos == self.n {
            return Err(Error::config(
                "positive_rate",
                format!("gives {pos} positives out of {}", self.n),
            ));
        }
        Ok(())
    }

    /// Exact positive count, `round(n * positive_rate)`.
    pub fn positives(&self) -> usize {
        (self.n as f64 * self.positive_rate).round() as usize
    }

    /// Modes reserved for positives: one in six, at least one.
    pub fn positive_modes(&self) -> usize {
        (self.n_modes / 6).max(1)
    }
}

/// Draws the pool. Mode centers are gaussian with spread chosen so that two
/// centers are `separation` apart on average. Positives are spread
/// round-robin over the positive modes and negatives over the rest. Samples
/// are shuffled, so the class is not readable from the index.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(Dataset, LabelVector)> {
    spec.validate()?;
    let mut rng = seeded_rng(spec.seed, 0x5359_4e54);
    let center_sd = spec.separation / (2.0 * spec.d as f64).sqrt();
    let centers: Vec<Vec<f64>> = (0..spec.n_modes)
        .map(|_| {
            (0..spec.d)
                .map(|_| center_sd * sample_std_normal(&mut rng))
                .collect()
        })
        .collect();
    let noise = Normal::new(0.0, spec.noise)
        .map_err(|e| Error::config("noise", e.to_string()))?;

    let n_pos = spec.positives();
    let pos_modes = spec.positive_modes();
    let neg_modes = spec.n_modes - pos_modes;
    let mut order: Vec<usize> = (0..spec.n).collect();
    order.shuffle(&mut rng);

    let mut features = vec![0f32; spec.n * spec.d];
    let mut labels = vec![Label::Negative; spec.n];
    for (rank, &slot) in order.iter().enumerate() {
        let mode = if rank < n_pos {
            labels[slot] = Label::Positive;
            rank % pos_modes
        } else {
            pos_modes + (rank - n_pos) % neg_modes
        };
        let row = &mut features[slot * spec.d..(slot + 1) * spec.d];
        for (v, c) in row.iter_mut().zip(&centers[mode]) {
            *v = (c + noise.sample(&mut rng)) as f32;
        }
    }
    let dataset = Dataset::new(features, spec.d, Dataset::sequential_ids(spec.n), None)?;
    Ok((dataset, LabelVector::from_labels(&labels)))
}

fn sample_std_normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}
