//! Worst-case expected loss over an f-divergence ball and its dual.
//!
//! The primal is `max_w Σ w_i Δℓ_i` over probability vectors `w` with
//! `D_f(w‖p) ≤ δ`. Its dual is
//! `min_{λ>0, μ} λ E_p[f*((Δℓ − μ)/λ)] + λδ + μ`, and for the α-family with
//! α > 1 the λ-minimisation has the closed form implemented by
//! [`optimal_lambda`] and [`corollary_objective`].

mod conjugate;
mod primal;

use serde::{Deserialize, Serialize};

pub use conjugate::{
    conjugate, conjugate_alpha, conjugate_domain_end, conjugate_kl, conjugate_reverse_kl,
};
pub use primal::{primal_bruteforce, PrimalSolution};

use crate::divergences::FGenerator;
use crate::error::{invalid, Error, Result};
use crate::linalg::log_sum_exp;
use crate::optim::{expand_left, golden_section};

const TOL: f64 = 1e-10;

/// α, δ and β of the α-divergence dual; `ã` and `c_{α,δ}` are derived on demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaDualSpec {
    alpha: f64,
    delta: f64,
    beta: f64,
}

impl AlphaDualSpec {
    pub fn new(alpha: f64, delta: f64, beta: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha == 0.0 || alpha == 1.0 {
            return Err(invalid(
                "alpha",
                format!("need finite alpha not in {{0, 1}}, got {alpha}"),
            ));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(invalid(
                "delta",
                format!("need 0 < delta < inf, got {delta}"),
            ));
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(invalid("beta", format!("need beta >= 0, got {beta}")));
        }
        Ok(Self { alpha, delta, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// ã = α / (α − 1).
    pub fn a_tilde(&self) -> f64 {
        self.alpha / (self.alpha - 1.0)
    }

    /// c_{α,δ} = (α(α−1)δ + 1)^{(ã−1)/ã}.
    pub fn c_alpha_delta(&self) -> f64 {
        let at = self.a_tilde();
        self.budget_constant().powf((at - 1.0) / at)
    }

    fn budget_constant(&self) -> f64 {
        self.alpha * (self.alpha - 1.0) * self.delta + 1.0
    }

    fn require_corollary(&self) -> Result<()> {
        if self.alpha > 1.0 {
            Ok(())
        } else {
            Err(invalid(
                "alpha",
                format!("closed-form lambda needs alpha > 1, got {}", self.alpha),
            ))
        }
    }
}

/// A finite-support instance: base probabilities, per-atom loss differences
/// `Δℓ_i = ℓ_i − β ℓ̃_i`, the generator and the budget δ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteLossProblem {
    base_probs: Vec<f64>,
    losses: Vec<f64>,
    generator: FGenerator,
    delta: f64,
}

impl DiscreteLossProblem {
    pub fn new(
        base_probs: Vec<f64>,
        losses: Vec<f64>,
        generator: FGenerator,
        delta: f64,
    ) -> Result<Self> {
        if base_probs.len() < 2 {
            return Err(invalid("base_probs", "need at least two atoms"));
        }
        if losses.len() != base_probs.len() {
            return Err(Error::DimensionMismatch {
                expected: base_probs.len(),
                got: losses.len(),
            });
        }
        if base_probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(invalid(
                "base_probs",
                "probabilities must be finite and nonnegative",
            ));
        }
        let total: f64 = base_probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(
                "base_probs",
                format!("probabilities sum to {total}, not 1"),
            ));
        }
        if losses.iter().any(|l| !l.is_finite()) {
            return Err(invalid("losses", "losses must be finite"));
        }
        if !(delta >= 0.0) || delta.is_nan() {
            return Err(invalid("delta", format!("need delta >= 0, got {delta}")));
        }
        if let FGenerator::Alpha(a) = generator {
            if !a.is_finite() {
                return Err(invalid("alpha", "alpha must be finite"));
            }
        }
        Ok(Self {
            base_probs,
            losses,
            generator: generator.canonical(),
            delta,
        })
    }

    pub fn base_probs(&self) -> &[f64] {
        &self.base_probs
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn generator(&self) -> FGenerator {
        self.generator
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    /// Same instance with a different budget.
    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(
            self.base_probs.clone(),
            self.losses.clone(),
            self.generator,
            delta,
        )
    }

    pub fn expected_loss(&self) -> f64 {
        self.support().map(|(p, l)| p * l).sum()
    }

    /// `(p_i, Δℓ_i)` over atoms with positive base mass.
    fn support(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.base_probs
            .iter()
            .zip(&self.losses)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, l)| (*p, *l))
    }

    fn loss_range(&self) -> (f64, f64) {
        self.support()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, l)| {
                (lo.min(l), hi.max(l))
            })
    }

    fn check_spec(&self, spec: &AlphaDualSpec) -> Result<()> {
        if (self.generator.alpha() - spec.alpha).abs() > 1e-12 {
            return Err(invalid(
                "alpha",
                format!(
                    "problem uses {} but spec has alpha = {}",
                    self.generator.name(),
                    spec.alpha
                ),
            ));
        }
        if (self.delta - spec.delta).abs() > 1e-12 * (1.0 + spec.delta) {
            return Err(invalid("delta", "problem and spec budgets differ"));
        }
        Ok(())
    }
}

/// Optimal dual variables and the dual value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub lambda: f64,
    pub mu: f64,
    /// `μ − λ/(α−1)`; equal to `μ` for the KL generator where no shift exists.
    pub mu_tilde: f64,
    pub dual_value: f64,
}

/// `λ E_p[f*((Δℓ − μ)/λ)] + λδ + μ`.
pub fn dual_objective(problem: &DiscreteLossProblem, lambda: f64, mu: f64) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(invalid("lambda", format!("need lambda > 0, got {lambda}")));
    }
    let v = raw_dual(problem, lambda, mu);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!(
            "conjugate argument outside the domain of {} at lambda = {lambda}, mu = {mu}",
            problem.generator.name()
        )))
    }
}

fn raw_dual(problem: &DiscreteLossProblem, lambda: f64, mu: f64) -> f64 {
    let g = problem.generator;
    let mut acc = 0.0;
    for (p, l) in problem.support() {
        let c = conjugate(g, (l - mu) / lambda);
        if !c.is_finite() {
            return f64::INFINITY;
        }
        acc += p * c;
    }
    lambda * acc + lambda * problem.delta + mu
}

/// KL dual with μ eliminated: `λδ + λ log E_p[exp(Δℓ/λ)]`.
pub fn kl_reduced_dual(problem: &DiscreteLossProblem, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(invalid("lambda", format!("need lambda > 0, got {lambda}")));
    }
    let terms: Vec<f64> = problem
        .support()
        .map(|(p, l)| p.ln() + l / lambda)
        .collect();
    Ok(lambda * problem.delta + lambda * log_sum_exp(&terms))
}

/// Minimiser of the dual over μ at fixed λ, as `(μ, value)`.
pub fn minimize_over_mu(problem: &DiscreteLossProblem, lambda: f64) -> Result<(f64, f64)> {
    if !(lambda > 0.0) {
        return Err(invalid("lambda", format!("need lambda > 0, got {lambda}")));
    }
    if problem.generator == FGenerator::Kl {
        let terms: Vec<f64> = problem
            .support()
            .map(|(p, l)| p.ln() + l / lambda)
            .collect();
        let mu = lambda * log_sum_exp(&terms);
        return Ok((mu, lambda * problem.delta + mu));
    }
    let (lo, hi) = problem.loss_range();
    // The dual derivative in μ is 1 − E f*'(s) with f*'(0) = 1, so the
    // minimiser sits inside the loss range, further restricted by the
    // conjugate's domain.
    let s_end = conjugate_domain_end(problem.generator);
    let lo = if s_end.is_finite() {
        lo.max(hi - lambda * s_end * (1.0 - 1e-12))
    } else {
        lo
    };
    let (mu, v) = golden_section(|mu| raw_dual(problem, lambda, mu), lo, hi, TOL);
    Ok((mu, v))
}

/// Joint minimisation of the dual: golden section over log λ with μ
/// minimised inside.
pub fn minimize_dual(problem: &DiscreteLossProblem) -> Result<DualCertificate> {
    let (lo, hi) = problem.loss_range();
    let range = hi - lo;
    if range == 0.0 {
        return Ok(DualCertificate {
            lambda: 0.0,
            mu: hi,
            mu_tilde: hi,
            dual_value: hi,
        });
    }
    let centre = range.ln();
    let outer = |t: f64| {
        minimize_over_mu(problem, t.exp())
            .map(|(_, v)| v)
            .unwrap_or(f64::INFINITY)
    };
    let (t, _) = golden_section(outer, centre - 40.0, centre + 40.0, 1e-12);
    let lambda = t.exp();
    let (mu, dual_value) = minimize_over_mu(problem, lambda)?;
    if !dual_value.is_finite() {
        return Err(Error::NonFinite("dual minimum".into()));
    }
    let a = problem.generator.alpha();
    let mu_tilde = if a == 1.0 {
        mu
    } else {
        mu - lambda / (a - 1.0)
    };
    Ok(DualCertificate {
        lambda,
        mu,
        mu_tilde,
        dual_value,
    })
}

/// λ minimising the reparameterised objective at fixed μ̃.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalLambda {
    pub lambda: f64,
    /// Every `(Δℓ − μ̃)₊` vanished, so the objective reduces to `μ̃`.
    pub at_boundary: bool,
}

fn positive_part_moment(problem: &DiscreteLossProblem, mu_tilde: f64, power: f64) -> f64 {
    problem
        .support()
        .map(|(p, l)| {
            let e = l - mu_tilde;
            if e > 0.0 {
                p * e.powf(power)
            } else {
                0.0
            }
        })
        .sum()
}

/// `λ* = (α(α−1)δ + 1)^{−1/ã} (α−1) [E_p (Δℓ − μ̃)₊^ã]^{1/ã}`.
pub fn optimal_lambda(
    spec: &AlphaDualSpec,
    problem: &DiscreteLossProblem,
    mu_tilde: f64,
) -> Result<OptimalLambda> {
    spec.require_corollary()?;
    problem.check_spec(spec)?;
    let at = spec.a_tilde();
    let m = positive_part_moment(problem, mu_tilde, at);
    if m == 0.0 {
        return Ok(OptimalLambda {
            lambda: 0.0,
            at_boundary: true,
        });
    }
    let lambda = spec.budget_constant().powf(-1.0 / at) * (spec.alpha - 1.0) * m.powf(1.0 / at);
    Ok(OptimalLambda {
        lambda,
        at_boundary: false,
    })
}

/// Dual objective after the shift `μ = μ̃ + λ/(α−1)`:
/// `(α−1)^ã/α · λ^{1−ã} E(Δℓ − μ̃)₊^ã + (δ + 1/(α(α−1))) λ + μ̃`.
pub fn reparameterized_objective(
    spec: &AlphaDualSpec,
    problem: &DiscreteLossProblem,
    lambda: f64,
    mu_tilde: f64,
) -> Result<f64> {
    spec.require_corollary()?;
    problem.check_spec(spec)?;
    if !(lambda > 0.0) {
        return Err(invalid("lambda", format!("need lambda > 0, got {lambda}")));
    }
    let (a, at) = (spec.alpha, spec.a_tilde());
    let m = positive_part_moment(problem, mu_tilde, at);
    Ok((a - 1.0).powf(at) / a * lambda.powf(1.0 - at) * m
        + (spec.delta + 1.0 / (a * (a - 1.0))) * lambda
        + mu_tilde)
}

/// `c_{α,δ} [E_p (Δℓ − μ̃)₊^ã]^{1/ã} + μ̃`, the λ-minimised objective.
pub fn corollary_objective(
    spec: &AlphaDualSpec,
    problem: &DiscreteLossProblem,
    mu_tilde: f64,
) -> Result<f64> {
    spec.require_corollary()?;
    problem.check_spec(spec)?;
    Ok(corollary_value(spec, problem, mu_tilde))
}

fn corollary_value(spec: &AlphaDualSpec, problem: &DiscreteLossProblem, mu_tilde: f64) -> f64 {
    let at = spec.a_tilde();
    spec.c_alpha_delta() * positive_part_moment(problem, mu_tilde, at).powf(1.0 / at) + mu_tilde
}

/// Minimises [`corollary_objective`] over μ̃ and reconstructs λ and μ.
///
/// The search starts from `[min Δℓ − range, max Δℓ]` and widens to the left
/// while the objective keeps falling; small budgets push the minimiser far
/// below the loss range because `c_{α,δ} → 1` as `δ → 0`.
pub fn minimize_corollary(
    spec: &AlphaDualSpec,
    problem: &DiscreteLossProblem,
) -> Result<DualCertificate> {
    spec.require_corollary()?;
    problem.check_spec(spec)?;
    let (lo, hi) = problem.loss_range();
    let range = hi - lo;
    if range == 0.0 {
        return Ok(DualCertificate {
            lambda: 0.0,
            mu: hi,
            mu_tilde: hi,
            dual_value: hi,
        });
    }
    let f = |m: f64| corollary_value(spec, problem, m);
    let left = expand_left(f, lo - range, range);
    let (mu_tilde, dual_value) = golden_section(f, left, hi, TOL);
    let lambda = optimal_lambda(spec, problem, mu_tilde)?.lambda;
    Ok(DualCertificate {
        lambda,
        mu: mu_tilde + lambda / (spec.alpha - 1.0),
        mu_tilde,
        dual_value,
    })
}

/// `|dual minimum − primal maximum|`.
pub fn duality_gap(problem: &DiscreteLossProblem) -> Result<f64> {
    let dual = minimize_dual(problem)?;
    let primal = primal_bruteforce(problem)?;
    Ok((dual.dual_value - primal.value).abs())
}
