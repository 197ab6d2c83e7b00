//! f-divergences and Rényi divergences between diagonal Gaussians.
//!
//! Closed forms are exact for diagonal covariances. Each has a Monte-Carlo
//! counterpart that only uses log-densities, so the two routes check each
//! other. Log-ratios are kept in log space and exponentiated once.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::gaussian::DiagonalGaussian;
use crate::rng::RngState;
use crate::stats::{MeanEstimate, Welford};

/// Generator `f` of an f-divergence `D_f(P‖Q) = ∫ q f(p/q)`.
///
/// `Kl` and `ReverseKl` use the extended forms `t log t − t + 1` and
/// `−log t + t − 1`, i.e. the α-family at α = 1 and α = 0. Those extra
/// affine terms integrate to zero, so the divergences are unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FGenerator {
    Kl,
    ReverseKl,
    ChiSquare,
    Alpha(f64),
}

impl FGenerator {
    /// Maps `Alpha(1)` to `Kl` and `Alpha(0)` to `ReverseKl`.
    pub fn canonical(self) -> Self {
        match self {
            FGenerator::Alpha(1.0) => FGenerator::Kl,
            FGenerator::Alpha(0.0) => FGenerator::ReverseKl,
            other => other,
        }
    }

    /// α for members of the α-family (χ² is α = 2).
    pub fn alpha(self) -> f64 {
        match self.canonical() {
            FGenerator::Kl => 1.0,
            FGenerator::ReverseKl => 0.0,
            FGenerator::ChiSquare => 2.0,
            FGenerator::Alpha(a) => a,
        }
    }

    pub fn name(self) -> String {
        match self.canonical() {
            FGenerator::Kl => "kl".into(),
            FGenerator::ReverseKl => "reverse-kl".into(),
            FGenerator::ChiSquare => "chi2".into(),
            FGenerator::Alpha(a) => format!("alpha({a})"),
        }
    }

    /// `f'(t)` for `t > 0`.
    pub fn derivative(self, t: f64) -> Result<f64> {
        if t.is_nan() || t <= 0.0 {
            return Err(Error::Domain(format!(
                "f-generator derivative needs t > 0, got {t}"
            )));
        }
        Ok(match self.canonical() {
            FGenerator::Kl => t.ln(),
            FGenerator::ReverseKl => 1.0 - 1.0 / t,
            FGenerator::ChiSquare => t - 1.0,
            FGenerator::Alpha(a) => (t.powf(a - 1.0) - 1.0) / (a - 1.0),
        })
    }

    /// `f(t)`. Defined for `t ≥ 0`; at `t = 0` only where the limit is finite.
    pub fn eval(self, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::Domain(format!("f-generator needs t >= 0, got {t}")));
        }
        let v = match self.canonical() {
            FGenerator::Kl => {
                if t == 0.0 {
                    1.0
                } else {
                    t * t.ln() - t + 1.0
                }
            }
            FGenerator::ReverseKl => {
                if t == 0.0 {
                    return Err(Error::Domain(
                        "reverse-KL generator is infinite at t = 0".into(),
                    ));
                }
                -t.ln() + t - 1.0
            }
            FGenerator::ChiSquare => 0.5 * (t - 1.0) * (t - 1.0),
            FGenerator::Alpha(a) => {
                if t == 0.0 && a < 0.0 {
                    return Err(Error::Domain(format!(
                        "alpha({a}) generator is infinite at t = 0"
                    )));
                }
                (t.powf(a) - a * t + a - 1.0) / (a * (a - 1.0))
            }
        };
        Ok(v)
    }
}

/// Result of a closed form that may legitimately be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DivergenceValue {
    Finite(f64),
    Infinite,
}

impl DivergenceValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            DivergenceValue::Finite(v) => Some(v),
            DivergenceValue::Infinite => None,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

/// Monte-Carlo divergence estimate in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl DivergenceEstimate {
    pub fn within(&self, target: f64, k: f64) -> bool {
        MeanEstimate {
            mean: self.value,
            std_error: self.std_error,
            n: self.n_samples,
        }
        .within(target, k)
    }
}

impl From<MeanEstimate> for DivergenceEstimate {
    fn from(m: MeanEstimate) -> Self {
        Self {
            value: m.mean,
            std_error: m.std_error,
            n_samples: m.n,
        }
    }
}

fn same_dim(p: &DiagonalGaussian, q: &DiagonalGaussian) -> Result<()> {
    check_dim(p.dim(), q.dim())
}

/// D_KL(p‖q) = ½[Σ log(σ_q²/σ_p²) − d + Σ σ_p²/σ_q² + Σ (μ_p − μ_q)²/σ_q²]
pub fn kl_gaussian(p: &DiagonalGaussian, q: &DiagonalGaussian) -> Result<f64> {
    same_dim(p, q)?;
    let mut acc = 0.0;
    for j in 0..p.dim() {
        let (vp, vq) = (p.variance()[j], q.variance()[j]);
        let r = vp / vq;
        let dm = p.mean()[j] - q.mean()[j];
        // r − 1 − ln r is computed as a whole to avoid cancellation near r = 1
        acc += (r - 1.0 - r.ln()) + dm * dm / vq;
    }
    Ok(0.5 * acc)
}

fn equal_variance(p: &DiagonalGaussian, q: &DiagonalGaussian) -> Result<()> {
    same_dim(p, q)?;
    for (a, b) in p.variance().iter().zip(q.variance()) {
        if (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
            return Err(invalid(
                "variance",
                "distributions must share the same covariance",
            ));
        }
    }
    Ok(())
}

/// Squared Mahalanobis distance of the means under `p`'s covariance.
fn mahalanobis_sq(p: &DiagonalGaussian, q: &DiagonalGaussian) -> f64 {
    p.mean()
        .iter()
        .zip(q.mean())
        .zip(p.variance())
        .map(|((a, b), v)| (a - b) * (a - b) / v)
        .sum()
}

/// ½‖μ_p − μ_q‖²_{Σ⁻¹} for a shared covariance Σ.
pub fn kl_same_covariance(p: &DiagonalGaussian, q: &DiagonalGaussian) -> Result<f64> {
    equal_variance(p, q)?;
    Ok(0.5 * mahalanobis_sq(p, q))
}

/// χ²(p‖q) = E_q[½(p/q − 1)²] = ½(∫ p²/q − 1).
///
/// Per coordinate, with a = σ_p², b = σ_q²:
/// ∫ p²/q = b / √(a(2b − a)) · exp(Δμ² / (2b − a)), finite iff 2b > a.
/// For a shared covariance this reduces to ½(e^{2s} − 1) with s = ½‖Δμ‖²_{Σ⁻¹}.
pub fn chi2_gaussian(p: &DiagonalGaussian, q: &DiagonalGaussian) -> Result<DivergenceValue> {
    same_dim(p, q)?;
    let mut log_integral = 0.0;
    for j in 0..p.dim() {
        let (a, b) = (p.variance()[j], q.variance()[j]);
        let denom = 2.0 * b - a;
        if !(denom > 0.0) {
            return Ok(DivergenceValue::Infinite);
        }
        let dm = p.mean()[j] - q.mean()[j];
        log_integral += b.ln() - 0.5 * (a * denom).ln() + dm * dm / denom;
    }
    let v = 0.5 * log_integral.exp_m1();
    if v.is_finite() {
        Ok(DivergenceValue::Finite(v))
    } else {
        Ok(DivergenceValue::Infinite)
    }
}

/// Rényi divergence of order α between Gaussians with a shared covariance:
/// α‖μ_p − μ_q‖²_{Σ⁻¹} / 2.
pub fn renyi_gaussian_equal_cov(
    p: &DiagonalGaussian,
    q: &DiagonalGaussian,
    alpha: f64,
) -> Result<f64> {
    if !(alpha > 0.0) || alpha == 1.0 {
        return Err(invalid(
            "alpha",
            format!("need alpha > 0 and alpha != 1, got {alpha}"),
        ));
    }
    equal_variance(p, q)?;
    Ok(0.5 * alpha * mahalanobis_sq(p, q))
}

/// Monte-Carlo estimate of D_f(p‖q) as the mean of f(exp(log p − log q))
/// over `n` draws from `q`.
pub fn f_divergence_mc(
    generator: FGenerator,
    p: &DiagonalGaussian,
    q: &DiagonalGaussian,
    rng: &mut RngState,
    n: usize,
) -> Result<DivergenceEstimate> {
    same_dim(p, q)?;
    if n < 100 {
        return Err(invalid(
            "n",
            "Monte-Carlo estimate needs at least 100 samples",
        ));
    }
    let mut acc = Welford::default();
    let mut x = vec![0.0; q.dim()];
    for i in 0..n {
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = q.mean()[j] + q.variance()[j].sqrt() * rng.normal();
        }
        let log_ratio = p.log_density_unchecked(&x) - q.log_density_unchecked(&x);
        let ratio = log_ratio.exp();
        let term = if ratio.is_finite() {
            generator.eval(ratio)?
        } else {
            f64::NAN
        };
        if !term.is_finite() {
            return Err(Error::NonFinite(format!(
                "density ratio exp({log_ratio}) at draw {i}"
            )));
        }
        acc.push(term);
    }
    Ok(acc.finish().into())
}

/// Monte-Carlo Rényi divergence (1/(α−1)) log E_p[(p/q)^{α−1}] with draws
/// from `p`. The standard error comes from the delta method on the log.
pub fn renyi_mc(
    p: &DiagonalGaussian,
    q: &DiagonalGaussian,
    alpha: f64,
    rng: &mut RngState,
    n: usize,
) -> Result<DivergenceEstimate> {
    same_dim(p, q)?;
    if !(alpha > 0.0) || alpha == 1.0 {
        return Err(invalid(
            "alpha",
            format!("need alpha > 0 and alpha != 1, got {alpha}"),
        ));
    }
    if n < 100 {
        return Err(invalid(
            "n",
            "Monte-Carlo estimate needs at least 100 samples",
        ));
    }
    let exps: Vec<f64> = (0..n)
        .map(|_| {
            let x = p.sample_one(rng);
            (alpha - 1.0) * (p.log_density_unchecked(&x) - q.log_density_unchecked(&x))
        })
        .collect();
    let shift = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let m = MeanEstimate::from_values(exps.iter().map(|e| (e - shift).exp()));
    if !(m.mean > 0.0) {
        return Err(Error::NonFinite("Rényi moment underflowed".into()));
    }
    Ok(DivergenceEstimate {
        value: (m.mean.ln() + shift) / (alpha - 1.0),
        std_error: m.std_error / m.mean / (alpha - 1.0).abs(),
        n_samples: n,
    })
}
