//! Divergence-constrained privatization of latent representations.
//!
//! The crate is organised bottom-up:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`gaussian`], [`dataset`], [`rng`], [`linalg`], [`numdiff`] | numerical substrate |
//! | [`divergences`] | closed-form and Monte-Carlo f-divergences between diagonal Gaussians |
//! | [`dual`] | Fenchel conjugates, the f-divergence constrained maximization and its dual |
//! | [`dp`] | Gaussian-mechanism calibration for (ε,δ)-DP and Rényi-DP |
//! | [`mi`] | variational mutual-information bounds |
//! | [`privatizer`] | linear generative filter, MLP classifiers, alternating min-max training |
//! | [`attacks`] | FGSM and projected-gradient attacks in latent space |
//! | [`scenario`] | synthetic Gaussian-mixture latent scenarios |
//!
//! All reals are `f64`. All randomness flows through [`RngState`], which is
//! seeded explicitly, so every pipeline is reproducible bit-for-bit.

pub mod attacks;
pub mod dataset;
pub mod divergences;
pub mod dp;
pub mod dual;
pub mod error;
pub mod gaussian;
pub mod linalg;
pub mod mi;
pub mod numdiff;
pub mod optim;
pub mod privatizer;
pub mod rng;
pub mod scenario;
pub mod stats;

pub use dataset::LatentDataset;
pub use divergences::{DivergenceEstimate, DivergenceValue, FGenerator};
pub use error::{Error, Result};
pub use gaussian::DiagonalGaussian;
pub use linalg::Matrix;
pub use privatizer::{FilterParameters, MlpClassifier, TrainConfig, TrainTrace};
pub use rng::RngState;
pub use scenario::ScenarioSpec;
pub use stats::MeanEstimate;
