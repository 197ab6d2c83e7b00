//! Variational bounds on the mutual information between latents and the
//! private label.
//!
//! * Lower bound on `I(z; y)`: `E[log p(z|y)] + H(z)` for any class model `p`.
//! * Upper bound on `I(z̃; y)`: `E[KL(q(z̃ | z, y) ‖ p(z̃))]` for any marginal
//!   model `p`. The filter noise `ε` is integrated out, so the conditional
//!   is the Gaussian `N(z + A_y e_y, A_ε A_εᵀ)`, of which only the diagonal
//!   is kept (plus a `1e−8` jitter).
//! * Cross-entropy plug-in: `H(y) − CE` of a classifier, itself a lower bound.

use serde::{Deserialize, Serialize};

use crate::dataset::{label_entropy, LatentDataset};
use crate::divergences::kl_gaussian;
use crate::error::{check_dim, invalid, Error, Result};
use crate::gaussian::{DiagonalGaussian, GaussianMixture};
use crate::privatizer::{FilterParameters, MlpClassifier};
use crate::rng::RngState;
use crate::stats::MeanEstimate;

pub const VARIANCE_FLOOR: f64 = 1e-6;
/// Added to the diagonal of the conditional covariance in the upper bound.
pub const NOISE_JITTER: f64 = 1e-8;

/// Class weights and per-class diagonal Gaussians `p(z | y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassConditionalModel {
    weights: Vec<f64>,
    components: Vec<DiagonalGaussian>,
}

impl ClassConditionalModel {
    pub fn new(weights: Vec<f64>, components: Vec<DiagonalGaussian>) -> Result<Self> {
        // the mixture constructor checks weights and dimensions
        GaussianMixture::new(weights.clone(), components.clone())?;
        Ok(Self {
            weights,
            components,
        })
    }

    /// Moment fit on the private labels. Every class needs two samples.
    pub fn fit(data: &LatentDataset) -> Result<Self> {
        let k = data.private_classes();
        let mut groups: Vec<Vec<Vec<f64>>> = vec![Vec::new(); k];
        for (z, &y) in data.points().iter().zip(data.private_labels()) {
            groups[y].push(z.clone());
        }
        let mut components = Vec::with_capacity(k);
        for (class, g) in groups.iter().enumerate() {
            if g.len() < 2 {
                return Err(Error::EmptyClass {
                    class,
                    count: g.len(),
                    needed: 2,
                });
            }
            components.push(DiagonalGaussian::fit(g, VARIANCE_FLOOR)?);
        }
        let n = data.len() as f64;
        let weights = groups.iter().map(|g| g.len() as f64 / n).collect();
        Self::new(weights, components)
    }

    pub fn classes(&self) -> usize {
        self.components.len()
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

    /// `Σ_y π_y p(z | y)`.
    pub fn marginal(&self) -> GaussianMixture {
        GaussianMixture::new(self.weights.clone(), self.components.clone())
            .expect("validated at construction")
    }
}

/// How `H(z)` was obtained for the lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyMethod {
    /// Monte-Carlo against the fitted class mixture.
    FittedMixture,
    /// Monte-Carlo against a known generating density.
    KnownMixture,
    /// Grid quadrature of a known density (d ≤ 2).
    Quadrature,
}

impl EntropyMethod {
    pub fn tag(self) -> &'static str {
        match self {
            Self::FittedMixture => "fitted_mixture",
            Self::KnownMixture => "known_mixture",
            Self::Quadrature => "quadrature",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub entropy_z: f64,
    /// Zero when `H(z)` came from quadrature.
    pub entropy_z_std_error: f64,
    pub method: EntropyMethod,
}

/// Grid points per axis for [`mixture_entropy_quadrature`].
const QUAD_POINTS_1D: usize = 20_001;
const QUAD_POINTS_2D: usize = 801;
/// Half-width of the integration box in component standard deviations.
const QUAD_SPAN: f64 = 12.0;

fn quad_axis(mix: &GaussianMixture, j: usize, points: usize) -> (f64, f64) {
    let lo = mix
        .components()
        .iter()
        .map(|c| c.mean()[j] - QUAD_SPAN * c.variance()[j].sqrt())
        .fold(f64::INFINITY, f64::min);
    let hi = mix
        .components()
        .iter()
        .map(|c| c.mean()[j] + QUAD_SPAN * c.variance()[j].sqrt())
        .fold(f64::NEG_INFINITY, f64::max);
    (lo, (hi - lo) / (points - 1) as f64)
}

/// `H = −∫ q log q` by the trapezoid rule on a box covering every component.
pub fn mixture_entropy_quadrature(mix: &GaussianMixture) -> Result<f64> {
    let integrand = |x: &[f64]| {
        let lq = mix.log_density_unchecked(x);
        if lq == f64::NEG_INFINITY {
            0.0
        } else {
            -lq.exp() * lq
        }
    };
    let weight = |i: usize, n: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
    match mix.dim() {
        1 => {
            let (lo, h) = quad_axis(mix, 0, QUAD_POINTS_1D);
            let s: f64 = (0..QUAD_POINTS_1D)
                .map(|i| weight(i, QUAD_POINTS_1D) * integrand(&[lo + i as f64 * h]))
                .sum();
            Ok(s * h)
        }
        2 => {
            let n = QUAD_POINTS_2D;
            let (lo0, h0) = quad_axis(mix, 0, n);
            let (lo1, h1) = quad_axis(mix, 1, n);
            let mut s = 0.0;
            for i in 0..n {
                let x0 = lo0 + i as f64 * h0;
                for k in 0..n {
                    s += weight(i, n) * weight(k, n) * integrand(&[x0, lo1 + k as f64 * h1]);
                }
            }
            Ok(s * h0 * h1)
        }
        d => Err(invalid(
            "dim",
            format!("quadrature supports d <= 2, got {d}"),
        )),
    }
}

/// `I̲(z; y) = mean_i log p(z_i | y_i) + H(z)`.
///
/// `H(z)` is taken against `true_marginal` when given (by quadrature for
/// d ≤ 2, else Monte-Carlo), otherwise against the model's own mixture. In
/// the Monte-Carlo paths both terms share samples, so the reported standard
/// error is that of the per-sample difference.
pub fn mi_lower_bound(
    data: &LatentDataset,
    model: &ClassConditionalModel,
    true_marginal: Option<&GaussianMixture>,
) -> Result<LowerBound> {
    check_dim(model.dim(), data.dim())?;
    check_dim(model.classes(), data.private_classes())?;
    if let Some(q) = true_marginal {
        check_dim(data.dim(), q.dim())?;
    }
    let cond = |z: &[f64], y: usize| model.components[y].log_density_unchecked(z);
    let pairs = || data.points().iter().zip(data.private_labels());

    if let Some(q) = true_marginal.filter(|q| q.dim() <= 2) {
        let h = mixture_entropy_quadrature(q)?;
        let first = MeanEstimate::from_values(pairs().map(|(z, &y)| cond(z, y)));
        return Ok(LowerBound {
            value: first.mean + h,
            std_error: first.std_error,
            n_samples: first.n,
            entropy_z: h,
            entropy_z_std_error: 0.0,
            method: EntropyMethod::Quadrature,
        });
    }
    let fitted = model.marginal();
    let (q, method) = match true_marginal {
        Some(q) => (q, EntropyMethod::KnownMixture),
        None => (&fitted, EntropyMethod::FittedMixture),
    };
    let log_q: Vec<f64> = data
        .points()
        .iter()
        .map(|z| q.log_density_unchecked(z))
        .collect();
    let h = MeanEstimate::from_values(log_q.iter().map(|l| -l));
    let diff = MeanEstimate::from_values(pairs().zip(&log_q).map(|((z, &y), lq)| cond(z, y) - lq));
    Ok(LowerBound {
        value: diff.mean,
        std_error: diff.std_error,
        n_samples: diff.n,
        entropy_z: h.mean,
        entropy_z_std_error: h.std_error,
        method,
    })
}

/// Model `p(z̃)` for the upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalKind {
    /// Diagonal Gaussian fitted by moments to privatized samples.
    #[default]
    Fitted,
    /// The standard normal prior `N(0, I)`.
    StandardPrior,
}

impl MarginalKind {
    pub fn tag(self) -> &'static str {
        match self {
            Self::Fitted => "fitted",
            Self::StandardPrior => "standard_prior",
        }
    }
}

/// Builds the marginal model. The fitted variant privatizes `data` once with
/// `rng`.
pub fn privatized_marginal(
    data: &LatentDataset,
    filter: &FilterParameters,
    kind: MarginalKind,
    rng: &mut RngState,
) -> Result<DiagonalGaussian> {
    match kind {
        MarginalKind::StandardPrior => DiagonalGaussian::standard(data.dim()),
        MarginalKind::Fitted => {
            let priv_data = filter.privatize(data, rng)?;
            DiagonalGaussian::fit(priv_data.points(), VARIANCE_FLOOR)
        }
    }
}

/// `Ī(z̃; y) = mean_i KL(N(z_i + A_y e_{y_i}, diag(A_ε A_εᵀ) + jitter) ‖ marginal)`.
pub fn mi_upper_bound_privatized(
    data: &LatentDataset,
    filter: &FilterParameters,
    marginal: &DiagonalGaussian,
) -> Result<MeanEstimate> {
    check_dim(filter.latent_dim(), data.dim())?;
    check_dim(filter.classes(), data.private_classes())?;
    check_dim(data.dim(), marginal.dim())?;
    let noise = filter.noise_variance();
    if noise.iter().all(|&v| v == 0.0) {
        return Err(invalid(
            "filter",
            "noise block A_ε is zero, the conditional is a point mass",
        ));
    }
    let var: Vec<f64> = noise.iter().map(|v| v + NOISE_JITTER).collect();
    let shifts = (0..filter.classes())
        .map(|y| filter.label_shift(y))
        .collect::<Result<Vec<_>>>()?;
    let terms = data
        .points()
        .iter()
        .zip(data.private_labels())
        .map(|(z, &y)| {
            let mean = z.iter().zip(&shifts[y]).map(|(a, b)| a + b).collect();
            kl_gaussian(&DiagonalGaussian::new(mean, var.clone())?, marginal)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MeanEstimate::from_values(terms))
}

/// `H(y) − mean CE`, a lower bound on `I(z; y)` for any classifier.
pub fn mi_cross_entropy_plugin(data: &LatentDataset, classifier: &MlpClassifier) -> Result<f64> {
    check_dim(data.private_classes(), classifier.classes())?;
    let ce = classifier.mean_cross_entropy(data.points(), data.private_labels())?;
    Ok(label_entropy(data.private_labels(), data.private_classes()) - ce)
}

/// Both bounds for one dataset and filter, with the choices that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiBoundReport {
    /// `I̲(z; y)` on the raw latents.
    pub lower_bound_raw: f64,
    pub lower_bound_std_error: f64,
    /// `Ī(z̃; y)` after the filter.
    pub upper_bound_priv: f64,
    pub upper_bound_std_error: f64,
    pub entropy_z: f64,
    pub entropy_z_std_error: f64,
    pub entropy_y: f64,
    pub n_samples: usize,
    pub entropy_method: EntropyMethod,
    pub marginal: MarginalKind,
    /// Fixed description of the approximations behind the upper bound.
    pub upper_bound_note: String,
}

pub const UPPER_BOUND_NOTE: &str =
    "noise marginalized; diagonal conditional covariance + 1e-8 jitter";

/// Fits the class model on `data`, evaluates the lower bound on the raw
/// latents (against the fitted mixture) and the upper bound after `filter`.
pub fn mi_bound_report(
    data: &LatentDataset,
    filter: &FilterParameters,
    marginal: MarginalKind,
    rng: &mut RngState,
) -> Result<MiBoundReport> {
    let model = ClassConditionalModel::fit(data)?;
    let lower = mi_lower_bound(data, &model, None)?;
    let p = privatized_marginal(data, filter, marginal, rng)?;
    let upper = mi_upper_bound_privatized(data, filter, &p)?;
    Ok(MiBoundReport {
        lower_bound_raw: lower.value,
        lower_bound_std_error: lower.std_error,
        upper_bound_priv: upper.mean,
        upper_bound_std_error: upper.std_error,
        entropy_z: lower.entropy_z,
        entropy_z_std_error: lower.entropy_z_std_error,
        entropy_y: label_entropy(data.private_labels(), data.private_classes()),
        n_samples: data.len(),
        entropy_method: lower.method,
        marginal,
        upper_bound_note: UPPER_BOUND_NOTE.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn two_class_1d(sep: f64, n: usize, seed: u64) -> LatentDataset {
        let mut rng = RngState::new(seed);
        let mut pts = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for i in 0..n {
            let y = i % 2;
            let m = if y == 0 { -sep } else { sep };
            pts.push(vec![m + rng.normal()]);
            ys.push(y);
        }
        LatentDataset::new(pts, ys, vec![0; n], 2, 1).unwrap()
    }

    #[test]
    fn single_class_fit_is_the_marginal() {
        let mut rng = RngState::new(2);
        let pts: Vec<Vec<f64>> = (0..500).map(|_| rng.normal_vec(3)).collect();
        let data = LatentDataset::new(pts.clone(), vec![0; 500], vec![0; 500], 1, 1).unwrap();
        let m = ClassConditionalModel::fit(&data).unwrap();
        assert_eq!(m.weights(), &[1.0]);
        assert_eq!(
            m.components()[0],
            DiagonalGaussian::fit(&pts, VARIANCE_FLOOR).unwrap()
        );
    }

    #[test]
    fn constant_coordinate_hits_the_floor() {
        let pts = vec![vec![1.0, 2.0], vec![1.0, 3.0], vec![1.0, 4.0]];
        let data = LatentDataset::new(pts, vec![0; 3], vec![0; 3], 1, 1).unwrap();
        let m = ClassConditionalModel::fit(&data).unwrap();
        assert_eq!(m.components()[0].variance()[0], VARIANCE_FLOOR);
        assert!(mi_lower_bound(&data, &m, None).unwrap().value.is_finite());
    }

    #[test]
    fn empty_class_is_an_error() {
        let data = LatentDataset::new(
            vec![vec![0.0], vec![1.0], vec![2.0]],
            vec![0, 0, 1],
            vec![0; 3],
            2,
            1,
        )
        .unwrap();
        assert!(matches!(
            ClassConditionalModel::fit(&data),
            Err(Error::EmptyClass {
                class: 1,
                count: 1,
                ..
            })
        ));
    }

    #[test]
    fn separated_classes_approach_log_two() {
        let data = two_class_1d(5.0, 100_000, 1);
        let m = ClassConditionalModel::fit(&data).unwrap();
        let lb = mi_lower_bound(&data, &m, None).unwrap();
        assert!(lb.value >= 0.64, "{lb:?}");
        assert!(lb.value <= 2f64.ln() + 3.0 * lb.std_error);
    }

    #[test]
    fn identical_classes_give_no_information() {
        let mut rng = RngState::new(4);
        let n = 20_000;
        let pts: Vec<Vec<f64>> = (0..n).map(|_| rng.normal_vec(2)).collect();
        let ys = (0..n).map(|i| i % 2).collect();
        let data = LatentDataset::new(pts, ys, vec![0; n], 2, 1).unwrap();
        let truth =
            GaussianMixture::new(vec![1.0], vec![DiagonalGaussian::standard(2).unwrap()]).unwrap();
        let m = ClassConditionalModel::new(
            vec![0.5, 0.5],
            vec![DiagonalGaussian::standard(2).unwrap(); 2],
        )
        .unwrap();
        let lb = mi_lower_bound(&data, &m, Some(&truth)).unwrap();
        assert_eq!(lb.method, EntropyMethod::Quadrature);
        assert!(lb.value <= 3.0 * lb.std_error, "{lb:?}");
    }

    #[test]
    fn quadrature_entropy_of_a_gaussian() {
        for d in 1..=2 {
            let g = DiagonalGaussian::new(vec![0.3; d], vec![2.0; d]).unwrap();
            let mix = GaussianMixture::new(vec![1.0], vec![g.clone()]).unwrap();
            assert!((mixture_entropy_quadrature(&mix).unwrap() - g.entropy()).abs() < 1e-8);
        }
        let g =
            GaussianMixture::new(vec![1.0], vec![DiagonalGaussian::standard(3).unwrap()]).unwrap();
        assert!(mixture_entropy_quadrature(&g).is_err());
    }

    #[test]
    fn zero_noise_block_rejected() {
        let data = two_class_1d(1.0, 10, 0);
        let f = FilterParameters::zeros(1, 2).unwrap();
        assert!(
            mi_upper_bound_privatized(&data, &f, &DiagonalGaussian::standard(1).unwrap()).is_err()
        );
    }

    #[test]
    fn upper_bound_matches_analytic_expectation() {
        // z ~ N(0, I), A_ε = ςI, marginal N(0, (1+ς²)I):
        // E KL = ½ d log(1 + 1/ς²) since E z² = 1 cancels the trace terms
        let (d, s2) = (3, 0.5f64);
        let mut rng = RngState::new(8);
        let n = 50_000;
        let pts: Vec<Vec<f64>> = (0..n).map(|_| rng.normal_vec(d)).collect();
        let data = LatentDataset::new(pts, vec![0; n], vec![0; n], 1, 1).unwrap();
        let mut noise = Matrix::zeros(d, d);
        for j in 0..d {
            noise[(j, j)] = s2.sqrt();
        }
        let f = FilterParameters::from_blocks(&noise, &Matrix::zeros(d, 1)).unwrap();
        let marginal = DiagonalGaussian::isotropic(vec![0.0; d], 1.0 + s2).unwrap();
        let est = mi_upper_bound_privatized(&data, &f, &marginal).unwrap();
        // the jitter moves the analytic value by O(1e−8)
        let exact = 0.5 * d as f64 * (1.0 + 1.0 / s2).ln();
        assert!(est.within(exact, 3.0), "{est:?} vs {exact}");
    }

    #[test]
    fn uniform_classifier_plugin() {
        let data = two_class_1d(1.0, 100, 0);
        let c = MlpClassifier::zeros(1, 4, 2).unwrap();
        assert!(mi_cross_entropy_plugin(&data, &c).unwrap().abs() < 1e-12);
        let wrong = MlpClassifier::zeros(1, 4, 3).unwrap();
        assert!(mi_cross_entropy_plugin(&data, &wrong).is_err());
    }

    #[test]
    fn report_is_self_consistent() {
        let data = two_class_1d(2.0, 2000, 3);
        let mut noise = Matrix::zeros(1, 1);
        noise[(0, 0)] = 5.0;
        let f = FilterParameters::from_blocks(&noise, &Matrix::zeros(1, 2)).unwrap();
        let r = mi_bound_report(&data, &f, MarginalKind::Fitted, &mut RngState::new(1)).unwrap();
        assert!((r.entropy_y - 2f64.ln()).abs() < 1e-12);
        assert!(r.upper_bound_priv < r.lower_bound_raw);
        assert_eq!(r.entropy_method, EntropyMethod::FittedMixture);
        assert!(r.upper_bound_std_error.is_finite() && r.lower_bound_std_error.is_finite());
    }
}
