//! Two-layer classifier `softmax(W2 · elu(W1 x + b1) + b2)` with hand-written
//! backpropagation.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{dot, log_sum_exp, softmax, Matrix};
use crate::rng::RngState;

pub const DEFAULT_HIDDEN: usize = 15;

fn elu(t: f64) -> f64 {
    if t >= 0.0 {
        t
    } else {
        t.exp_m1()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpClassifier {
    w1: Matrix,
    b1: Vec<f64>,
    w2: Matrix,
    b2: Vec<f64>,
}

/// Gradients with the same shapes as the classifier parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradients {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl MlpGradients {
    /// Same ordering as [`MlpClassifier::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = self.w1.as_slice().to_vec();
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(self.w2.as_slice());
        v.extend_from_slice(&self.b2);
        v
    }
}

/// Mean cross-entropy over a batch with its gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossEntropy {
    pub loss: f64,
    /// Gradient of the mean loss.
    pub params: MlpGradients,
    /// `∂ℓ_i/∂x_i` of each sample's own loss (not divided by the batch size).
    pub inputs: Vec<Vec<f64>>,
    /// Fraction of the batch whose arg-max prediction equals the label.
    pub accuracy: f64,
}

impl MlpClassifier {
    /// Weights `N(0, 1/fan_in)`, biases zero.
    pub fn new(
        input_dim: usize,
        hidden: usize,
        classes: usize,
        rng: &mut RngState,
    ) -> Result<Self> {
        Self::check_shape(input_dim, hidden, classes)?;
        let s1 = 1.0 / (input_dim as f64).sqrt();
        let s2 = 1.0 / (hidden as f64).sqrt();
        let w1 = Matrix::from_fn(hidden, input_dim, |_, _| s1 * rng.normal());
        let w2 = Matrix::from_fn(classes, hidden, |_, _| s2 * rng.normal());
        Ok(Self {
            w1,
            b1: vec![0.0; hidden],
            w2,
            b2: vec![0.0; classes],
        })
    }

    pub fn zeros(input_dim: usize, hidden: usize, classes: usize) -> Result<Self> {
        Self::check_shape(input_dim, hidden, classes)?;
        Ok(Self {
            w1: Matrix::zeros(hidden, input_dim),
            b1: vec![0.0; hidden],
            w2: Matrix::zeros(classes, hidden),
            b2: vec![0.0; classes],
        })
    }

    pub fn from_parts(w1: Matrix, b1: Vec<f64>, w2: Matrix, b2: Vec<f64>) -> Result<Self> {
        check_dim(w1.rows(), b1.len())?;
        check_dim(w1.rows(), w2.cols())?;
        check_dim(w2.rows(), b2.len())?;
        Self::check_shape(w1.cols(), w1.rows(), w2.rows())?;
        let c = Self { w1, b1, w2, b2 };
        if !c.is_finite() {
            return Err(Error::NonFinite("classifier parameters".into()));
        }
        Ok(c)
    }

    fn check_shape(input_dim: usize, hidden: usize, classes: usize) -> Result<()> {
        if input_dim == 0 || hidden == 0 {
            return Err(invalid("shape", "input and hidden widths must be positive"));
        }
        if classes == 0 {
            return Err(invalid("classes", "need at least one class"));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden(&self) -> usize {
        self.w1.rows()
    }

    pub fn classes(&self) -> usize {
        self.w2.rows()
    }

    pub fn w1(&self) -> &Matrix {
        &self.w1
    }

    pub fn b1(&self) -> &[f64] {
        &self.b1
    }

    pub fn w2(&self) -> &Matrix {
        &self.w2
    }

    pub fn b2(&self) -> &[f64] {
        &self.b2
    }

    pub fn b2_mut(&mut self) -> &mut [f64] {
        &mut self.b2
    }

    pub fn is_finite(&self) -> bool {
        self.w1.is_finite()
            && self.w2.is_finite()
            && self.b1.iter().all(|v| v.is_finite())
            && self.b2.iter().all(|v| v.is_finite())
    }

    /// All parameters as one vector: W1, b1, W2, b2 (row-major).
    pub fn parameters(&self) -> Vec<f64> {
        let mut v = self.w1.as_slice().to_vec();
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(self.w2.as_slice());
        v.extend_from_slice(&self.b2);
        v
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        check_dim(self.parameters().len(), params.len())?;
        let mut rest = params;
        for dst in [
            self.w1.as_mut_slice(),
            &mut self.b1,
            self.w2.as_mut_slice(),
            &mut self.b2,
        ] {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    fn hidden_pre(&self, x: &[f64]) -> Vec<f64> {
        let mut h = self.w1.matvec(x);
        for (a, b) in h.iter_mut().zip(&self.b1) {
            *a += b;
        }
        h
    }

    fn logits_from_pre(&self, pre: &[f64]) -> Vec<f64> {
        let act: Vec<f64> = pre.iter().map(|&t| elu(t)).collect();
        let mut out = self.w2.matvec(&act);
        for (a, b) in out.iter_mut().zip(&self.b2) {
            *a += b;
        }
        out
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), x.len())?;
        Ok(self.logits_from_pre(&self.hidden_pre(x)))
    }

    /// Class probabilities.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(x)?))
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let l = self.logits(x)?;
        Ok(argmax(&l))
    }

    pub fn accuracy(&self, points: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
        check_dim(points.len(), labels.len())?;
        if points.is_empty() {
            return Err(invalid("points", "empty evaluation set"));
        }
        let mut hits = 0usize;
        for (x, &y) in points.iter().zip(labels) {
            if self.predict(x)? == y {
                hits += 1;
            }
        }
        Ok(hits as f64 / points.len() as f64)
    }

    /// Mean cross-entropy `−(1/B) Σ log p(label_i | x_i)` without gradients.
    pub fn mean_cross_entropy(&self, points: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
        check_dim(points.len(), labels.len())?;
        if points.is_empty() {
            return Err(invalid("points", "empty batch"));
        }
        let mut total = 0.0;
        for (x, &y) in points.iter().zip(labels) {
            self.check_label(y)?;
            let l = self.logits(x)?;
            total += log_sum_exp(&l) - l[y];
        }
        Ok(total / points.len() as f64)
    }

    fn check_label(&self, y: usize) -> Result<()> {
        if y >= self.classes() {
            return Err(invalid(
                "label",
                format!("label {y} out of range for {} classes", self.classes()),
            ));
        }
        Ok(())
    }

    /// Mean cross-entropy over the batch with parameter and input gradients.
    pub fn cross_entropy_and_gradients(
        &self,
        points: &[Vec<f64>],
        labels: &[usize],
    ) -> Result<CrossEntropy> {
        check_dim(points.len(), labels.len())?;
        if points.is_empty() {
            return Err(invalid("points", "empty batch"));
        }
        let (h, k) = (self.hidden(), self.classes());
        let mut grads = MlpGradients {
            w1: Matrix::zeros(h, self.input_dim()),
            b1: vec![0.0; h],
            w2: Matrix::zeros(k, h),
            b2: vec![0.0; k],
        };
        let scale = 1.0 / points.len() as f64;
        let mut loss = 0.0;
        let mut hits = 0usize;
        let mut inputs = Vec::with_capacity(points.len());
        let (mut pre, mut act) = (vec![0.0; h], vec![0.0; h]);
        let (mut logits, mut d_act, mut d_pre) = (vec![0.0; k], vec![0.0; h], vec![0.0; h]);
        for (x, &y) in points.iter().zip(labels) {
            check_dim(self.input_dim(), x.len())?;
            self.check_label(y)?;
            for i in 0..h {
                pre[i] = dot(self.w1.row(i), x) + self.b1[i];
                act[i] = elu(pre[i]);
            }
            for (c, l) in logits.iter_mut().enumerate() {
                *l = dot(self.w2.row(c), &act) + self.b2[c];
            }
            let lse = log_sum_exp(&logits);
            loss += lse - logits[y];
            if argmax(&logits) == y {
                hits += 1;
            }
            // dℓ/dlogits = softmax − onehot, stored in place of the logits
            for l in logits.iter_mut() {
                *l = (*l - lse).exp();
            }
            logits[y] -= 1.0;
            d_act.iter_mut().for_each(|v| *v = 0.0);
            for (c, &g) in logits.iter().enumerate() {
                for (o, &w) in d_act.iter_mut().zip(self.w2.row(c)) {
                    *o += w * g;
                }
            }
            for i in 0..h {
                // elu'(t) = elu(t) + 1 for t < 0
                d_pre[i] = d_act[i] * if pre[i] >= 0.0 { 1.0 } else { act[i] + 1.0 };
            }
            grads.w2.add_outer(scale, &logits, &act);
            for (g, d) in grads.b2.iter_mut().zip(&logits) {
                *g += scale * d;
            }
            grads.w1.add_outer(scale, &d_pre, x);
            for (g, d) in grads.b1.iter_mut().zip(&d_pre) {
                *g += scale * d;
            }
            inputs.push(self.w1.matvec_t(&d_pre));
        }
        Ok(CrossEntropy {
            loss: loss * scale,
            params: grads,
            inputs,
            accuracy: hits as f64 * scale,
        })
    }

    /// `θ ← θ − lr · g`.
    pub fn sgd_step(&mut self, grads: &MlpGradients, lr: f64) {
        self.w1.axpy(-lr, &grads.w1);
        self.w2.axpy(-lr, &grads.w2);
        for (p, g) in self.b1.iter_mut().zip(&grads.b1) {
            *p -= lr * g;
        }
        for (p, g) in self.b2.iter_mut().zip(&grads.b2) {
            *p -= lr * g;
        }
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Plain minibatch SGD settings for [`fit_classifier`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            hidden: DEFAULT_HIDDEN,
            epochs: 20,
            batch_size: 64,
            lr: 0.05,
        }
    }
}

/// Trains a fresh classifier by minibatch SGD on `(points, labels)`.
pub fn fit_classifier(
    points: &[Vec<f64>],
    labels: &[usize],
    classes: usize,
    cfg: &FitConfig,
    rng: &mut RngState,
) -> Result<MlpClassifier> {
    check_dim(points.len(), labels.len())?;
    if points.is_empty() {
        return Err(invalid("points", "empty training set"));
    }
    if cfg.batch_size == 0 || cfg.epochs == 0 || !(cfg.lr > 0.0) {
        return Err(invalid(
            "fit",
            "batch size, epochs and learning rate must be positive",
        ));
    }
    let (epochs, batch_size, lr) = (cfg.epochs, cfg.batch_size, cfg.lr);
    let mut clf = MlpClassifier::new(points[0].len(), cfg.hidden, classes, rng)?;
    let mut order: Vec<usize> = (0..points.len()).collect();
    for epoch in 0..epochs {
        for i in (1..order.len()).rev() {
            order.swap(i, rng.index(i + 1));
        }
        for chunk in order.chunks(batch_size) {
            let xs: Vec<Vec<f64>> = chunk.iter().map(|&i| points[i].clone()).collect();
            let ys: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let ce = clf.cross_entropy_and_gradients(&xs, &ys)?;
            if !ce.loss.is_finite() {
                return Err(Error::Diverged {
                    round: epoch,
                    what: "classifier loss".into(),
                });
            }
            clf.sgd_step(&ce.params, lr);
        }
    }
    Ok(clf)
}
