use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A nonempty set of margins `y_i >= 0` below the threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
    max: f64,
}

impl Sample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Argument("sample is empty"));
        }
        let mut max = 0.0f64;
        for &y in &values {
            if !y.is_finite() || y < 0.0 {
                return Err(Error::Domain("margins must be finite and nonnegative"));
            }
            max = max.max(y);
        }
        Ok(Self { values, max })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// True when every margin is the same value.
    pub fn is_degenerate(&self) -> bool {
        self.values.iter().all(|&y| y == self.values[0])
    }

    /// Values sorted ascending.
    pub fn sorted(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|y| y * c).collect())
    }
}

impl AsRef<[f64]> for Sample {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

impl TryFrom<Vec<f64>> for Sample {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}
