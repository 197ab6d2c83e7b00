//! Gaussians with diagonal covariance.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::linalg::log_sum_exp;
use crate::rng::RngState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalGaussian {
    mean: Vec<f64>,
    variance: Vec<f64>,
}

impl DiagonalGaussian {
    pub fn new(mean: Vec<f64>, variance: Vec<f64>) -> Result<Self> {
        if mean.is_empty() {
            return Err(invalid("mean", "dimension must be at least 1"));
        }
        check_dim(mean.len(), variance.len())?;
        if let Some(v) = variance.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(invalid(
                "variance",
                format!("must be finite and > 0, got {v}"),
            ));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(invalid("mean", "must be finite"));
        }
        Ok(Self { mean, variance })
    }

    /// N(0, I_d)
    pub fn standard(d: usize) -> Result<Self> {
        Self::new(vec![0.0; d], vec![1.0; d])
    }

    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Result<Self> {
        let d = mean.len();
        Self::new(mean, vec![variance; d])
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    /// −½ Σ_j [log(2πσ_j²) + (x_j − μ_j)²/σ_j²]
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.log_density_unchecked(x))
    }

    pub(crate) fn log_density_unchecked(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((xj, mj), vj) in x.iter().zip(&self.mean).zip(&self.variance) {
            let r = xj - mj;
            acc += (2.0 * PI * vj).ln() + r * r / vj;
        }
        -0.5 * acc
    }

    /// Differential entropy ½ Σ_j (1 + log 2πσ_j²).
    pub fn entropy(&self) -> f64 {
        0.5 * self
            .variance
            .iter()
            .map(|v| 1.0 + (2.0 * PI * v).ln())
            .sum::<f64>()
    }

    pub fn sample_one(&self, rng: &mut RngState) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.variance)
            .map(|(m, v)| m + v.sqrt() * rng.normal())
            .collect()
    }

    pub fn sample(&self, rng: &mut RngState, n: usize) -> Result<Vec<Vec<f64>>> {
        if n == 0 {
            return Err(invalid("n", "need at least one sample"));
        }
        Ok((0..n).map(|_| self.sample_one(rng)).collect())
    }

    /// Moment fit with a variance floor.
    pub fn fit(points: &[Vec<f64>], variance_floor: f64) -> Result<Self> {
        let first = points.first().ok_or_else(|| invalid("points", "empty"))?;
        let d = first.len();
        let n = points.len() as f64;
        let mut mean = vec![0.0; d];
        for p in points {
            check_dim(d, p.len())?;
            for (m, x) in mean.iter_mut().zip(p) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for p in points {
            for ((v, x), m) in var.iter_mut().zip(p).zip(&mean) {
                *v += (x - m).powi(2);
            }
        }
        let denom = if points.len() > 1 { n - 1.0 } else { 1.0 };
        var.iter_mut()
            .for_each(|v| *v = (*v / denom).max(variance_floor));
        Self::new(mean, var)
    }
}

/// Finite mixture of diagonal Gaussians of a common dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    components: Vec<DiagonalGaussian>,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, components: Vec<DiagonalGaussian>) -> Result<Self> {
        if components.is_empty() {
            return Err(invalid(
                "components",
                "mixture needs at least one component",
            ));
        }
        check_dim(components.len(), weights.len())?;
        let d = components[0].dim();
        for c in &components {
            check_dim(d, c.dim())?;
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(invalid(
                "weights",
                "weights must be finite and non-negative",
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(
                "weights",
                format!("weights sum to {total}, expected 1"),
            ));
        }
        Ok(Self {
            weights,
            components,
        })
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[DiagonalGaussian] {
        &self.components
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.log_density_unchecked(x))
    }

    pub(crate) fn log_density_unchecked(&self, x: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.components)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, c)| w.ln() + c.log_density_unchecked(x))
            .collect();
        log_sum_exp(&terms)
    }

    /// Draws a component index and a point from it.
    pub fn sample_one(&self, rng: &mut RngState) -> (usize, Vec<f64>) {
        let k = categorical(&self.weights, rng);
        (k, self.components[k].sample_one(rng))
    }
}

/// Index drawn with probability proportional to `weights`.
pub(crate) fn categorical(weights: &[f64], rng: &mut RngState) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.uniform() * total;
    for (k, w) in weights.iter().enumerate() {
        if u < *w {
            return k;
        }
        u -= w;
    }
    // rounding can leave u a hair above the last weight
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}
