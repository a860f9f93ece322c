//! Maps feature vectors onto a small tabular state space: the `k`
//! highest-variance training features, each cut into equal-width bins, read
//! as a mixed-radix number.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type StateId = u64;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Discretizer {
    features: Vec<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    bins: usize,
    width: usize,
}

impl Discretizer {
    /// Picks the `k` features of highest variance (lower index on ties) and
    /// records their training ranges.
    pub fn fit(data: &[&[f64]], k: usize, bins: usize) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        if bins == 0 || k == 0 {
            return Err(Error::InvalidArgument("discretizer needs k >= 1 and bins >= 1".into()));
        }
        let width = data[0].len();
        let n = data.len() as f64;
        let mut stats: Vec<(usize, f64, f64, f64)> = (0..width)
            .map(|f| {
                let mean = data.iter().map(|v| v[f]).sum::<f64>() / n;
                let var = data.iter().map(|v| (v[f] - mean).powi(2)).sum::<f64>() / n;
                let lo = data.iter().map(|v| v[f]).fold(f64::INFINITY, f64::min);
                let hi = data.iter().map(|v| v[f]).fold(f64::NEG_INFINITY, f64::max);
                (f, var, lo, hi)
            })
            .collect();
        stats.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        stats.truncate(k.min(width));
        Ok(Discretizer {
            features: stats.iter().map(|s| s.0).collect(),
            lower: stats.iter().map(|s| s.2).collect(),
            upper: stats.iter().map(|s| s.3).collect(),
            bins,
            width,
        })
    }

    /// A discretizer over explicit features and ranges.
    pub fn with_ranges(width: usize, features: Vec<usize>, lower: Vec<f64>, upper: Vec<f64>, bins: usize) -> Result<Self> {
        if features.len() != lower.len() || features.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                found: lower.len().min(upper.len()),
            });
        }
        if bins == 0 || features.iter().any(|&f| f >= width) {
            return Err(Error::InvalidArgument("bad discretizer ranges".into()));
        }
        Ok(Discretizer {
            features,
            lower,
            upper,
            bins,
            width,
        })
    }

    pub fn features(&self) -> &[usize] {
        &self.features
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// `bins^k`, the size of the id space.
    pub fn state_count(&self) -> u64 {
        (self.bins as u64).saturating_pow(self.features.len() as u32)
    }

    pub fn bin(&self, slot: usize, x: f64) -> usize {
        let (lo, hi) = (self.lower[slot], self.upper[slot]);
        if hi <= lo {
            return 0;
        }
        let t = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
        ((t * self.bins as f64) as usize).min(self.bins - 1)
    }

    pub fn state(&self, v: &[f64]) -> Result<StateId> {
        if self.bins == 0 || self.features.is_empty() {
            return Err(Error::UnfittedSpec);
        }
        if v.len() != self.width {
            return Err(Error::DimensionMismatch {
                expected: self.width,
                found: v.len(),
            });
        }
        Ok(self
            .features
            .iter()
            .enumerate()
            .fold(0u64, |id, (slot, &f)| id * self.bins as u64 + self.bin(slot, v[f]) as u64))
    }
}
