//! Calibration of additive Gaussian mechanisms on latent vectors.
//!
//! The released statistic is the mean of `n` latent vectors, each first
//! projected onto the ℓ₂ ball of radius τ, so swapping `k` records moves it by
//! at most `2τk/n`. Noise is calibrated either for (ε, δ)-DP or for a Rényi
//! bound at the worst-case shift.

use serde::{Deserialize, Serialize};

use crate::divergences::kl_gaussian;
use crate::error::{invalid, Error, Result};
use crate::gaussian::DiagonalGaussian;
use crate::linalg::norm2;
use crate::rng::RngState;
use crate::stats::MeanEstimate;

/// Projection onto the ℓ₂ ball of radius `tau`.
pub fn project_l2(x: &[f64], tau: f64) -> Vec<f64> {
    let n = norm2(x);
    if n <= tau {
        x.to_vec()
    } else {
        x.iter().map(|v| v * tau / n).collect()
    }
}

/// Mean of `n` projected latents in dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionMechanism {
    tau: f64,
    n: usize,
    d: usize,
}

impl ProjectionMechanism {
    pub fn new(tau: f64, n: usize, d: usize) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(invalid("tau", format!("need tau > 0, got {tau}")));
        }
        if n == 0 {
            return Err(invalid("n", "need at least one sample"));
        }
        if d == 0 {
            return Err(invalid("d", "need dimension >= 1"));
        }
        Ok(Self { tau, n, d })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// ℓ₂ sensitivity for a single swapped record, `2τ/n`.
    pub fn sensitivity(&self) -> f64 {
        2.0 * self.tau / self.n as f64
    }

    /// The released statistic ζ = (1/n) Σ Π(z_i).
    pub fn release(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        crate::error::check_dim(self.n, points.len())?;
        let mut acc = vec![0.0; self.d];
        for p in points {
            crate::error::check_dim(self.d, p.len())?;
            for (a, v) in acc.iter_mut().zip(project_l2(p, self.tau)) {
                *a += v / self.n as f64;
            }
        }
        Ok(acc)
    }
}

/// `‖ζ − ζ′‖ ≤ (2τ/n)·k` when `k` records differ.
pub fn sensitivity_bound(mechanism: &ProjectionMechanism, k_differing: usize) -> Result<f64> {
    if k_differing > mechanism.n {
        return Err(invalid(
            "k_differing",
            format!("{k_differing} exceeds n = {}", mechanism.n),
        ));
    }
    Ok(mechanism.sensitivity() * k_differing as f64)
}

/// (ε, δ) with both strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(invalid(
                "epsilon",
                format!("need 0 < epsilon < 1, got {epsilon}"),
            ));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid("delta", format!("need 0 < delta < 1, got {delta}")));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MechanismKind {
    ApproxDp { epsilon: f64, delta: f64 },
    RenyiDp { alpha: f64, delta_renyi: f64 },
}

/// Calibrated noise level for a Gaussian mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanismCalibration {
    pub sigma: f64,
    pub sensitivity: f64,
    pub kind: MechanismKind,
    /// Rényi path only: the variance `2τ²/(n²δ)` that omits the α factor,
    /// kept for comparison. It is weaker than `sigma²` whenever α > 1.
    pub literal_variance: Option<f64>,
}

impl MechanismCalibration {
    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }
}

/// σ = L √(2 ln(1.25/δ)) / ε.
pub fn calibrate_approx_dp(
    sensitivity: f64,
    budget: PrivacyBudget,
) -> Result<MechanismCalibration> {
    if !(sensitivity > 0.0) || !sensitivity.is_finite() {
        return Err(invalid(
            "sensitivity",
            format!("need L > 0, got {sensitivity}"),
        ));
    }
    let sigma = sensitivity * (2.0 * (1.25 / budget.delta).ln()).sqrt() / budget.epsilon;
    Ok(MechanismCalibration {
        sigma,
        sensitivity,
        kind: MechanismKind::ApproxDp {
            epsilon: budget.epsilon,
            delta: budget.delta,
        },
        literal_variance: None,
    })
}

/// (ε, δ) calibration of the projection mechanism for a single swapped record.
pub fn calibrate_projection(
    mechanism: &ProjectionMechanism,
    budget: PrivacyBudget,
) -> Result<MechanismCalibration> {
    calibrate_approx_dp(mechanism.sensitivity(), budget)
}

/// Variance making the Rényi divergence of order α between the mechanism's
/// outputs at the worst-case shift `2τ/n` exactly `δ_renyi`:
/// `σ² = α (2τ/n)² / (2 δ_renyi)`.
pub fn calibrate_renyi_dp(
    mechanism: &ProjectionMechanism,
    alpha: f64,
    delta_renyi: f64,
) -> Result<MechanismCalibration> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(invalid("alpha", format!("need alpha > 1, got {alpha}")));
    }
    if !(delta_renyi > 0.0) || !delta_renyi.is_finite() {
        return Err(invalid(
            "delta_renyi",
            format!("need delta_renyi > 0, got {delta_renyi}"),
        ));
    }
    let s = mechanism.sensitivity();
    let variance = alpha * s * s / (2.0 * delta_renyi);
    let n = mechanism.n as f64;
    Ok(MechanismCalibration {
        sigma: variance.sqrt(),
        sensitivity: s,
        kind: MechanismKind::RenyiDp { alpha, delta_renyi },
        literal_variance: Some(2.0 * mechanism.tau * mechanism.tau / (n * n * delta_renyi)),
    })
}

/// KL distortion of adding `N(0, σ²I)` to latents distributed as `base`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdditiveKl {
    /// ½ Σ [σ²/σ_j² − ln(1 + σ²/σ_j²)].
    pub exact: f64,
    /// (σ²/2) Σ (1/σ_j² − 1); can be zero or negative.
    pub literal: f64,
}

/// D_KL(N(μ, Σ + σ²I) ‖ N(μ, Σ)) for diagonal Σ, plus the sum-of-variances
/// approximation for comparison.
pub fn kl_of_additive_gaussian(base: &DiagonalGaussian, noise_variance: f64) -> Result<AdditiveKl> {
    if !(noise_variance >= 0.0) || !noise_variance.is_finite() {
        return Err(invalid(
            "noise_variance",
            format!("need sigma^2 >= 0, got {noise_variance}"),
        ));
    }
    let mut exact = 0.0;
    let mut literal = 0.0;
    for v in base.variance() {
        let r = noise_variance / v;
        exact += r - r.ln_1p();
        literal += 1.0 / v - 1.0;
    }
    Ok(AdditiveKl {
        exact: 0.5 * exact,
        literal: 0.5 * noise_variance * literal,
    })
}

/// Isotropic noise variance σ² whose exact additive KL on `base` equals
/// `target`, found by bisection (the KL is increasing in σ²).
pub fn noise_variance_for_kl(base: &DiagonalGaussian, target: f64) -> Result<f64> {
    if !(target >= 0.0) || !target.is_finite() {
        return Err(invalid(
            "target",
            format!("need a finite KL target >= 0, got {target}"),
        ));
    }
    if target == 0.0 {
        return Ok(0.0);
    }
    let kl = |s2: f64| kl_of_additive_gaussian(base, s2).map(|k| k.exact);
    let mut hi = base
        .variance()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    while kl(hi)? < target {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::NonFinite(format!(
                "no finite noise variance reaches KL {target}"
            )));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if kl(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Same quantity via the general Gaussian KL; used as a cross-check.
pub fn kl_of_additive_gaussian_direct(base: &DiagonalGaussian, noise_variance: f64) -> Result<f64> {
    let widened = DiagonalGaussian::new(
        base.mean().to_vec(),
        base.variance().iter().map(|v| v + noise_variance).collect(),
    )?;
    kl_gaussian(&widened, base)
}

/// Whether a distortion budget `b` accommodates the (ε, δ)-DP noise level,
/// under the exact KL and under the sum-of-variances reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpAdmission {
    pub sigma: f64,
    pub exact_kl: f64,
    /// L² ln(1.25/δ)/ε² · Σ(1/σ_j² − 1)
    pub literal_value: f64,
    pub admits_exact: bool,
    pub admits_literal: bool,
}

impl DpAdmission {
    pub fn verdicts_differ(&self) -> bool {
        self.admits_exact != self.admits_literal
    }
}

pub fn budget_admits_dp(
    base: &DiagonalGaussian,
    sensitivity: f64,
    budget: PrivacyBudget,
    b: f64,
) -> Result<DpAdmission> {
    if !(b > 0.0) {
        return Err(invalid("b", format!("need b > 0, got {b}")));
    }
    let cal = calibrate_approx_dp(sensitivity, budget)?;
    let kl = kl_of_additive_gaussian(base, cal.variance())?;
    let sum: f64 = base.variance().iter().map(|v| 1.0 / v - 1.0).sum();
    let literal_value = sensitivity * sensitivity * (1.25 / budget.delta).ln()
        / (budget.epsilon * budget.epsilon)
        * sum;
    Ok(DpAdmission {
        sigma: cal.sigma,
        exact_kl: kl.exact,
        literal_value,
        admits_exact: kl.exact <= b,
        admits_literal: literal_value <= b,
    })
}

/// Fraction of draws `z̃ ~ N(ζ, σ²I)` whose privacy loss
/// `|log N(z̃; ζ, σ²I) − log N(z̃; ζ′, σ²I)|` exceeds ε.
pub fn privacy_loss_tail(
    sigma: f64,
    zeta: &[f64],
    zeta_prime: &[f64],
    epsilon: f64,
    rng: &mut RngState,
    n: usize,
) -> Result<MeanEstimate> {
    crate::error::check_dim(zeta.len(), zeta_prime.len())?;
    if !(sigma > 0.0) {
        return Err(invalid("sigma", format!("need sigma > 0, got {sigma}")));
    }
    if n == 0 {
        return Err(invalid("n", "need at least one draw"));
    }
    let two_var = 2.0 * sigma * sigma;
    let mut z = vec![0.0; zeta.len()];
    let hits = (0..n).map(|_| {
        for (zj, m) in z.iter_mut().zip(zeta) {
            *zj = m + sigma * rng.normal();
        }
        let d_own: f64 = z.iter().zip(zeta).map(|(a, b)| (a - b) * (a - b)).sum();
        let d_other: f64 = z
            .iter()
            .zip(zeta_prime)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let loss = (d_other - d_own) / two_var;
        if loss.abs() > epsilon {
            1.0
        } else {
            0.0
        }
    });
    Ok(MeanEstimate::from_values(hits))
}
