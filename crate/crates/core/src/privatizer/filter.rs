//! The linear generative filter `z̃ = z + A_ε ε + A_y e_y` and its distortion.

use serde::{Deserialize, Serialize};

use crate::dataset::LatentDataset;
use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::Matrix;
use crate::rng::RngState;

/// `A = [A_ε | A_y]`, a `d × (d + K_y)` matrix. The first `d` columns mix
/// standard normal noise, the last `K_y` columns are per-label shifts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterParameters {
    a: Matrix,
    latent_dim: usize,
    classes: usize,
}

impl FilterParameters {
    pub fn new(a: Matrix, latent_dim: usize, classes: usize) -> Result<Self> {
        if latent_dim == 0 || classes == 0 {
            return Err(invalid(
                "shape",
                "latent dimension and class count must be positive",
            ));
        }
        check_dim(latent_dim, a.rows())?;
        check_dim(latent_dim + classes, a.cols())?;
        if !a.is_finite() {
            return Err(Error::NonFinite("filter matrix".into()));
        }
        Ok(Self {
            a,
            latent_dim,
            classes,
        })
    }

    /// The identity filter `A = 0`.
    pub fn zeros(latent_dim: usize, classes: usize) -> Result<Self> {
        Self::new(
            Matrix::zeros(latent_dim, latent_dim + classes),
            latent_dim,
            classes,
        )
    }

    /// Entries drawn i.i.d. `N(0, scale²)`.
    pub fn random(
        latent_dim: usize,
        classes: usize,
        scale: f64,
        rng: &mut RngState,
    ) -> Result<Self> {
        let a = Matrix::from_fn(latent_dim, latent_dim + classes, |_, _| {
            scale * rng.normal()
        });
        Self::new(a, latent_dim, classes)
    }

    /// Builds `[A_ε | A_y]` from its two blocks.
    pub fn from_blocks(noise: &Matrix, label: &Matrix) -> Result<Self> {
        let d = noise.rows();
        check_dim(d, noise.cols())?;
        check_dim(d, label.rows())?;
        let k = label.cols();
        let a = Matrix::from_fn(d, d + k, |i, j| {
            if j < d {
                noise[(i, j)]
            } else {
                label[(i, j - d)]
            }
        });
        Self::new(a, d, k)
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn noise(&self, j: usize, k: usize) -> f64 {
        self.a[(j, k)]
    }

    /// Column `y` of `A_y`.
    pub fn label_shift(&self, y: usize) -> Result<Vec<f64>> {
        self.check_label(y)?;
        Ok((0..self.latent_dim)
            .map(|j| self.a[(j, self.latent_dim + y)])
            .collect())
    }

    /// Diagonal of `A_ε A_εᵀ`.
    pub fn noise_variance(&self) -> Vec<f64> {
        (0..self.latent_dim)
            .map(|j| (0..self.latent_dim).map(|k| self.a[(j, k)].powi(2)).sum())
            .collect()
    }

    fn check_label(&self, y: usize) -> Result<()> {
        if y >= self.classes {
            return Err(invalid(
                "label",
                format!("label {y} out of range for {} classes", self.classes),
            ));
        }
        Ok(())
    }

    /// `z + A_ε ε + A_y e_y` for a given noise draw.
    pub fn apply_with_noise(&self, z: &[f64], y: usize, eps: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.latent_dim, z.len())?;
        check_dim(self.latent_dim, eps.len())?;
        self.check_label(y)?;
        let d = self.latent_dim;
        Ok((0..d)
            .map(|j| {
                let row = self.a.row(j);
                let noise: f64 = row[..d].iter().zip(eps).map(|(a, e)| a * e).sum();
                z[j] + noise + row[d + y]
            })
            .collect())
    }

    /// Draws `ε ~ N(0, I_d)` and applies the filter.
    pub fn apply(&self, z: &[f64], y: usize, rng: &mut RngState) -> Result<Vec<f64>> {
        let eps = rng.normal_vec(self.latent_dim);
        self.apply_with_noise(z, y, &eps)
    }

    /// Privatizes every point of a dataset with fresh noise.
    pub fn privatize(&self, data: &LatentDataset, rng: &mut RngState) -> Result<LatentDataset> {
        check_dim(self.classes, data.private_classes())?;
        let points = data
            .points()
            .iter()
            .zip(data.private_labels())
            .map(|(z, &y)| self.apply(z, y, rng))
            .collect::<Result<Vec<_>>>()?;
        data.with_points(points)
    }

    /// `A ← A + scale · G`.
    pub fn add_scaled(&mut self, scale: f64, grad: &Matrix) {
        self.a.axpy(scale, grad);
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite()
    }
}

fn check_base_variance(filter: &FilterParameters, base_variance: &[f64]) -> Result<()> {
    check_dim(filter.latent_dim, base_variance.len())?;
    if base_variance.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(invalid(
            "base_variance",
            "variances must be positive and finite",
        ));
    }
    Ok(())
}

/// Distortion surrogate for label frequencies `freqs`:
///
/// `Σ_y freq_y · ½ Σ_j A_y[j,y]²/σ_j²  +  ½ Σ_j [s_j − ln(1 + s_j)]`,
/// `s_j = (A_ε A_εᵀ)_jj / σ_j²`.
///
/// The first term is the same-covariance KL of the label shift, the second
/// the exact KL of adding independent noise to a diagonal Gaussian.
pub fn distortion_from_frequencies(
    filter: &FilterParameters,
    freqs: &[f64],
    base_variance: &[f64],
) -> Result<f64> {
    distortion_with_gradient(filter, freqs, base_variance).map(|(v, _)| v)
}

/// [`distortion_from_frequencies`] averaged over the labels of a batch.
pub fn distortion_estimate(
    filter: &FilterParameters,
    labels: &[usize],
    base_variance: &[f64],
) -> Result<f64> {
    if labels.is_empty() {
        return Err(invalid("labels", "empty batch"));
    }
    let mut freqs = vec![0.0; filter.classes];
    for &y in labels {
        filter.check_label(y)?;
        freqs[y] += 1.0 / labels.len() as f64;
    }
    distortion_from_frequencies(filter, &freqs, base_variance)
}

/// Distortion and its gradient with respect to `A`.
pub fn distortion_with_gradient(
    filter: &FilterParameters,
    freqs: &[f64],
    base_variance: &[f64],
) -> Result<(f64, Matrix)> {
    check_base_variance(filter, base_variance)?;
    check_dim(filter.classes, freqs.len())?;
    let d = filter.latent_dim;
    let mut grad = Matrix::zeros(d, d + filter.classes);
    let mut value = 0.0;
    let s = filter.noise_variance();
    for j in 0..d {
        let var = base_variance[j];
        let sj = s[j] / var;
        value += 0.5 * (sj - sj.ln_1p());
        let w = sj / (1.0 + sj) / var;
        for k in 0..d {
            grad[(j, k)] = w * filter.a[(j, k)];
        }
        for (y, f) in freqs.iter().enumerate() {
            let shift = filter.a[(j, d + y)];
            value += f * 0.5 * shift * shift / var;
            grad[(j, d + y)] = f * shift / var;
        }
    }
    Ok((value, grad))
}
