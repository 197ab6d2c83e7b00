//! Monte-Carlo mean accumulation with standard errors.

use serde::{Deserialize, Serialize};

/// Sample mean of i.i.d. terms together with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl MeanEstimate {
    /// Welford accumulation in iteration order; the same input sequence
    /// always gives bit-identical output.
    pub fn from_values<I: IntoIterator<Item = f64>>(values: I) -> Self {
        let mut acc = Welford::default();
        for v in values {
            acc.push(v);
        }
        acc.finish()
    }

    /// `|mean − target| ≤ k·SE`, with a floor so that exact zero-variance
    /// estimates compare against rounding noise.
    pub fn within(&self, target: f64, k: f64) -> bool {
        let slack = k * self.std_error + 1e-12 * (1.0 + target.abs());
        (self.mean - target).abs() <= slack
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance (0 for fewer than two samples).
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn finish(&self) -> MeanEstimate {
        let se = if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        };
        MeanEstimate {
            mean: self.mean,
            std_error: se,
            n: self.n,
        }
    }
}
