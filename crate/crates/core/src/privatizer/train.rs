//! Alternating adversarial training of the filter.

use serde::{Deserialize, Serialize};

use super::filter::{distortion_from_frequencies, distortion_with_gradient, FilterParameters};
use super::mlp::{fit_classifier, FitConfig, MlpClassifier, DEFAULT_HIDDEN};
use crate::dataset::{class_frequencies, LatentDataset};
use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::Matrix;
use crate::mi::mi_cross_entropy_plugin;
use crate::rng::RngState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Weight of the utility loss in the filter objective.
    pub beta: f64,
    /// Distortion budget `b` in nats.
    pub budget_b: f64,
    /// Weight κ of the squared hinge `κ (D̂ − b)₊²`.
    pub penalty_kappa: f64,
    pub lr_filter: f64,
    pub lr_adv: f64,
    pub lr_util: f64,
    pub steps_adv: usize,
    pub steps_util: usize,
    pub steps_filter: usize,
    pub rounds: usize,
    pub batch_size: usize,
    pub hidden: usize,
    /// Standard deviation of the initial filter entries.
    pub init_scale: f64,
    pub seed: u64,
    /// Per-coordinate variance σ_j² used by the distortion surrogate.
    /// Defaults to the pooled within-(y, u)-cell variance of the data.
    pub base_variance: Option<Vec<f64>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            budget_b: 1.0,
            penalty_kappa: 10.0,
            lr_filter: 0.02,
            lr_adv: 0.05,
            lr_util: 0.05,
            steps_adv: 5,
            steps_util: 5,
            steps_filter: 1,
            rounds: 2000,
            batch_size: 128,
            hidden: DEFAULT_HIDDEN,
            init_scale: 0.01,
            seed: 42,
            base_variance: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("budget_b", self.budget_b),
            ("penalty_kappa", self.penalty_kappa),
            ("lr_filter", self.lr_filter),
            ("lr_adv", self.lr_adv),
            ("lr_util", self.lr_util),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(
                    name,
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(invalid("beta", format!("must be >= 0, got {}", self.beta)));
        }
        if !(self.init_scale >= 0.0) || !self.init_scale.is_finite() {
            return Err(invalid(
                "init_scale",
                format!("must be >= 0, got {}", self.init_scale),
            ));
        }
        let counts = [
            ("steps_adv", self.steps_adv),
            ("steps_util", self.steps_util),
            ("steps_filter", self.steps_filter),
            ("rounds", self.rounds),
            ("batch_size", self.batch_size),
            ("hidden", self.hidden),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(invalid(name, "must be at least 1"));
            }
        }
        if let Some(v) = &self.base_variance {
            if v.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
                return Err(invalid(
                    "base_variance",
                    "variances must be positive and finite",
                ));
            }
        }
        Ok(())
    }
}

/// Statistics of one training round, taken from the last filter step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub round: usize,
    pub adversary_ce: f64,
    pub utility_ce: f64,
    /// Distortion surrogate on the full-data label frequencies after the update.
    pub distortion: f64,
    pub adversary_accuracy: f64,
    pub utility_accuracy: f64,
    pub violation: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<TrainRecord>,
}

impl TrainTrace {
    pub fn last(&self) -> Option<&TrainRecord> {
        self.records.last()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPrivatizer {
    pub filter: FilterParameters,
    pub adversary: MlpClassifier,
    pub utility: MlpClassifier,
    pub trace: TrainTrace,
    pub base_variance: Vec<f64>,
}

/// Per-coordinate variance of `z` around its `(y, u)` cell mean, pooled over
/// cells with the usual `m − cells` denominator. Floored at `1e−6`.
pub fn pooled_within_cell_variance(data: &LatentDataset) -> Result<Vec<f64>> {
    let (ky, ku, d) = (data.private_classes(), data.utility_classes(), data.dim());
    let cells = ky * ku;
    let mut sums = vec![vec![0.0; d]; cells];
    let mut counts = vec![0usize; cells];
    for ((z, &y), &u) in data
        .points()
        .iter()
        .zip(data.private_labels())
        .zip(data.utility_labels())
    {
        let c = y * ku + u;
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(z) {
            *s += v;
        }
    }
    let occupied = counts.iter().filter(|&&c| c > 0).count();
    if data.len() <= occupied {
        return Err(invalid(
            "data",
            "need more samples than occupied (y, u) cells",
        ));
    }
    let means: Vec<Vec<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| {
            s.iter()
                .map(|v| if c > 0 { v / c as f64 } else { 0.0 })
                .collect()
        })
        .collect();
    let mut var = vec![0.0; d];
    for ((z, &y), &u) in data
        .points()
        .iter()
        .zip(data.private_labels())
        .zip(data.utility_labels())
    {
        let m = &means[y * ku + u];
        for j in 0..d {
            var[j] += (z[j] - m[j]).powi(2);
        }
    }
    let denom = (data.len() - occupied) as f64;
    Ok(var.into_iter().map(|v| (v / denom).max(1e-6)).collect())
}

/// Batch of latents with their labels and the noise draws used by the filter.
#[derive(Debug, Clone, Copy)]
pub struct FilterBatch<'a> {
    pub points: &'a [Vec<f64>],
    pub private_labels: &'a [usize],
    pub utility_labels: &'a [usize],
    pub noise: &'a [Vec<f64>],
}

/// Filter objective `CE_adv − β CE_util − κ (D̂ − b)₊²` and its gradient in `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterObjective {
    pub value: f64,
    pub adversary_ce: f64,
    pub utility_ce: f64,
    pub distortion: f64,
    pub adversary_accuracy: f64,
    pub utility_accuracy: f64,
    pub grad: Matrix,
}

/// Evaluates the filter objective on a batch with fixed noise.
///
/// The distortion term uses `freqs` (label frequencies) rather than the
/// batch, so it does not fluctuate with sampling.
pub fn filter_objective(
    filter: &FilterParameters,
    adversary: &MlpClassifier,
    utility: &MlpClassifier,
    batch: &FilterBatch,
    cfg: &TrainConfig,
    freqs: &[f64],
    base_variance: &[f64],
) -> Result<FilterObjective> {
    let n = batch.points.len();
    check_dim(n, batch.private_labels.len())?;
    check_dim(n, batch.utility_labels.len())?;
    check_dim(n, batch.noise.len())?;
    if n == 0 {
        return Err(invalid("batch", "empty batch"));
    }
    let privatized = batch
        .points
        .iter()
        .zip(batch.private_labels)
        .zip(batch.noise)
        .map(|((z, &y), e)| filter.apply_with_noise(z, y, e))
        .collect::<Result<Vec<_>>>()?;
    let adv = adversary.cross_entropy_and_gradients(&privatized, batch.private_labels)?;
    let util = utility.cross_entropy_and_gradients(&privatized, batch.utility_labels)?;
    let (distortion, d_grad) = distortion_with_gradient(filter, freqs, base_variance)?;
    let excess = (distortion - cfg.budget_b).max(0.0);

    let d = filter.latent_dim();
    let mut grad = Matrix::zeros(d, d + filter.classes());
    let scale = 1.0 / n as f64;
    let mut input = vec![0.0; d + filter.classes()];
    for i in 0..n {
        let g: Vec<f64> = adv.inputs[i]
            .iter()
            .zip(&util.inputs[i])
            .map(|(a, u)| scale * (a - cfg.beta * u))
            .collect();
        input[..d].copy_from_slice(&batch.noise[i]);
        input[d..].iter_mut().for_each(|v| *v = 0.0);
        input[d + batch.private_labels[i]] = 1.0;
        grad.add_outer(1.0, &g, &input);
    }
    grad.axpy(-2.0 * cfg.penalty_kappa * excess, &d_grad);
    Ok(FilterObjective {
        value: adv.loss - cfg.beta * util.loss - cfg.penalty_kappa * excess * excess,
        adversary_ce: adv.loss,
        utility_ce: util.loss,
        distortion,
        adversary_accuracy: adv.accuracy,
        utility_accuracy: util.accuracy,
        grad,
    })
}

struct Sampled {
    points: Vec<Vec<f64>>,
    private: Vec<usize>,
    utility: Vec<usize>,
    noise: Vec<Vec<f64>>,
}

fn sample_batch(data: &LatentDataset, size: usize, rng: &mut RngState) -> Sampled {
    let d = data.dim();
    let idx: Vec<usize> = (0..size).map(|_| rng.index(data.len())).collect();
    Sampled {
        points: idx.iter().map(|&i| data.points()[i].clone()).collect(),
        private: idx.iter().map(|&i| data.private_labels()[i]).collect(),
        utility: idx.iter().map(|&i| data.utility_labels()[i]).collect(),
        noise: (0..size).map(|_| rng.normal_vec(d)).collect(),
    }
}

fn privatized(filter: &FilterParameters, b: &Sampled) -> Result<Vec<Vec<f64>>> {
    b.points
        .iter()
        .zip(&b.private)
        .zip(&b.noise)
        .map(|((z, &y), e)| filter.apply_with_noise(z, y, e))
        .collect()
}

fn diverged(round: usize, what: &str) -> Error {
    Error::Diverged {
        round,
        what: what.to_string(),
    }
}

/// Alternating min-max training. Each round runs `steps_adv` SGD steps on
/// the adversary, `steps_util` on the utility classifier, then
/// `steps_filter` ascent steps on the filter objective, with fresh batches
/// and fresh noise for every step.
pub fn train_privatizer(data: &LatentDataset, cfg: &TrainConfig) -> Result<TrainedPrivatizer> {
    cfg.validate()?;
    let d = data.dim();
    let base_variance = match &cfg.base_variance {
        Some(v) => {
            check_dim(d, v.len())?;
            v.clone()
        }
        None => pooled_within_cell_variance(data)?,
    };
    let freqs = class_frequencies(data.private_labels(), data.private_classes());
    let root = RngState::new(cfg.seed);
    let mut init_rng = root.derive(1);
    let mut rng = root.derive(2);

    let mut filter =
        FilterParameters::random(d, data.private_classes(), cfg.init_scale, &mut init_rng)?;
    let mut adversary = MlpClassifier::new(d, cfg.hidden, data.private_classes(), &mut init_rng)?;
    let mut utility = MlpClassifier::new(d, cfg.hidden, data.utility_classes(), &mut init_rng)?;
    let mut trace = TrainTrace::default();

    for round in 0..cfg.rounds {
        for _ in 0..cfg.steps_adv {
            let b = sample_batch(data, cfg.batch_size, &mut rng);
            let ce =
                adversary.cross_entropy_and_gradients(&privatized(&filter, &b)?, &b.private)?;
            if !ce.loss.is_finite() {
                return Err(diverged(round, "adversary loss"));
            }
            adversary.sgd_step(&ce.params, cfg.lr_adv);
        }
        for _ in 0..cfg.steps_util {
            let b = sample_batch(data, cfg.batch_size, &mut rng);
            let ce = utility.cross_entropy_and_gradients(&privatized(&filter, &b)?, &b.utility)?;
            if !ce.loss.is_finite() {
                return Err(diverged(round, "utility loss"));
            }
            utility.sgd_step(&ce.params, cfg.lr_util);
        }
        let mut last = None;
        for _ in 0..cfg.steps_filter {
            let b = sample_batch(data, cfg.batch_size, &mut rng);
            let batch = FilterBatch {
                points: &b.points,
                private_labels: &b.private,
                utility_labels: &b.utility,
                noise: &b.noise,
            };
            let obj = filter_objective(
                &filter,
                &adversary,
                &utility,
                &batch,
                cfg,
                &freqs,
                &base_variance,
            )?;
            if !obj.value.is_finite() {
                return Err(diverged(round, "filter objective"));
            }
            filter.add_scaled(cfg.lr_filter, &obj.grad);
            last = Some(obj);
        }
        if !filter.is_finite() || !adversary.is_finite() || !utility.is_finite() {
            return Err(diverged(round, "parameters"));
        }
        let obj = last.expect("steps_filter >= 1");
        let distortion = distortion_from_frequencies(&filter, &freqs, &base_variance)?;
        trace.records.push(TrainRecord {
            round,
            adversary_ce: obj.adversary_ce,
            utility_ce: obj.utility_ce,
            distortion,
            adversary_accuracy: obj.adversary_accuracy,
            utility_accuracy: obj.utility_accuracy,
            violation: distortion > cfg.budget_b,
        });
    }
    Ok(TrainedPrivatizer {
        filter,
        adversary,
        utility,
        trace,
        base_variance,
    })
}

/// Held-out accuracies of classifiers trained from scratch on privatized data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub adversary_accuracy: f64,
    pub utility_accuracy: f64,
    /// Cross-entropy plug-in `H(y) − CE` of the fresh adversary on the
    /// privatized test split.
    pub adversary_plugin_mi: f64,
}

/// Privatizes `train` and `test` with `filter`, fits a fresh adversary and
/// utility classifier on the privatized training set and scores them on the
/// privatized test set.
pub fn evaluate_privatizer(
    filter: &FilterParameters,
    train: &LatentDataset,
    test: &LatentDataset,
    fit: &FitConfig,
    rng: &mut RngState,
) -> Result<Evaluation> {
    let tr = filter.privatize(train, rng)?;
    let te = filter.privatize(test, rng)?;
    let adv = fit_classifier(
        tr.points(),
        tr.private_labels(),
        tr.private_classes(),
        fit,
        rng,
    )?;
    let util = fit_classifier(
        tr.points(),
        tr.utility_labels(),
        tr.utility_classes(),
        fit,
        rng,
    )?;
    Ok(Evaluation {
        adversary_accuracy: adv.accuracy(te.points(), te.private_labels())?,
        utility_accuracy: util.accuracy(te.points(), te.utility_labels())?,
        adversary_plugin_mi: mi_cross_entropy_plugin(&te, &adv)?,
    })
}
