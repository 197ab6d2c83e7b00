//! Fenchel conjugates `f*(s) = sup_{t ≥ 0} st − f(t)` of the generators.

use crate::divergences::FGenerator;
use crate::error::{invalid, Error, Result};

/// Conjugate of the α-family generator:
/// `(1/α)[(((α−1)s + 1)₊)^{α/(α−1)} − 1]`.
///
/// For α < 1 the exponent is negative and the conjugate is `+∞` once the base
/// reaches zero; that value is returned as `f64::INFINITY`.
pub fn conjugate_alpha(alpha: f64, s: f64) -> Result<f64> {
    if !alpha.is_finite() || alpha == 0.0 || alpha == 1.0 {
        return Err(invalid(
            "alpha",
            format!("raw alpha conjugate needs alpha not in {{0, 1}}, got {alpha}"),
        ));
    }
    let base = (alpha - 1.0) * s + 1.0;
    let exponent = alpha / (alpha - 1.0);
    if base <= 0.0 {
        return Ok(if exponent > 0.0 {
            -1.0 / alpha
        } else {
            f64::INFINITY
        });
    }
    Ok((base.powf(exponent) - 1.0) / alpha)
}

/// `e^s − 1`, the conjugate of `t log t − t + 1`.
pub fn conjugate_kl(s: f64) -> f64 {
    s.exp_m1()
}

/// `−log(1 − s)`, the conjugate of `−log t + t − 1`; infinite for `s ≥ 1`.
pub fn conjugate_reverse_kl(s: f64) -> Result<f64> {
    if s.is_nan() || s >= 1.0 {
        return Err(Error::Domain(format!(
            "reverse-KL conjugate is infinite at s = {s}"
        )));
    }
    Ok(-(-s).ln_1p())
}

/// Conjugate of any supported generator, `+∞` outside its effective domain.
pub fn conjugate(generator: FGenerator, s: f64) -> f64 {
    match generator.canonical() {
        FGenerator::Kl => conjugate_kl(s),
        FGenerator::ReverseKl => conjugate_reverse_kl(s).unwrap_or(f64::INFINITY),
        FGenerator::ChiSquare => conjugate_alpha(2.0, s).unwrap_or(f64::NAN),
        FGenerator::Alpha(a) => conjugate_alpha(a, s).unwrap_or(f64::NAN),
    }
}

/// Supremum of the conjugate's effective domain (`+∞` when unbounded).
pub fn conjugate_domain_end(generator: FGenerator) -> f64 {
    let a = generator.alpha();
    if a < 1.0 {
        1.0 / (1.0 - a)
    } else {
        f64::INFINITY
    }
}
