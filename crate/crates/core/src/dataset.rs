//! Labelled latent samples `(z, y, u)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::rng::RngState;

/// Latent points with a private label `y` and a utility label `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentDataset {
    points: Vec<Vec<f64>>,
    private_labels: Vec<usize>,
    utility_labels: Vec<usize>,
    private_classes: usize,
    utility_classes: usize,
}

impl LatentDataset {
    pub fn new(
        points: Vec<Vec<f64>>,
        private_labels: Vec<usize>,
        utility_labels: Vec<usize>,
        private_classes: usize,
        utility_classes: usize,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("points", "dataset must hold at least one sample"));
        }
        check_dim(points.len(), private_labels.len())?;
        check_dim(points.len(), utility_labels.len())?;
        let d = points[0].len();
        if d == 0 {
            return Err(invalid("points", "latent dimension must be at least 1"));
        }
        for p in &points {
            check_dim(d, p.len())?;
        }
        if private_labels.iter().any(|&y| y >= private_classes) {
            return Err(invalid("private_labels", "label index out of range"));
        }
        if utility_labels.iter().any(|&u| u >= utility_classes) {
            return Err(invalid("utility_labels", "label index out of range"));
        }
        Ok(Self {
            points,
            private_labels,
            utility_labels,
            private_classes,
            utility_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn private_labels(&self) -> &[usize] {
        &self.private_labels
    }

    pub fn utility_labels(&self) -> &[usize] {
        &self.utility_labels
    }

    pub fn private_classes(&self) -> usize {
        self.private_classes
    }

    pub fn utility_classes(&self) -> usize {
        self.utility_classes
    }

    /// Same labels, new points.
    pub fn with_points(&self, points: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(
            points,
            self.private_labels.clone(),
            self.utility_labels.clone(),
            self.private_classes,
            self.utility_classes,
        )
    }

    /// Deterministic shuffled split into `(first, second)` with
    /// `round(fraction · m)` samples in the first part.
    pub fn split(&self, fraction: f64, rng: &mut RngState) -> Result<(Self, Self)> {
        let m = self.len();
        let k = (fraction * m as f64).round() as usize;
        if k == 0 || k >= m {
            return Err(invalid("fraction", "split leaves an empty part"));
        }
        let mut order: Vec<usize> = (0..m).collect();
        // Fisher–Yates with our own generator for cross-version stability.
        for i in (1..m).rev() {
            let j = rng.index(i + 1);
            order.swap(i, j);
        }
        let take = |idx: &[usize]| {
            Self::new(
                idx.iter().map(|&i| self.points[i].clone()).collect(),
                idx.iter().map(|&i| self.private_labels[i]).collect(),
                idx.iter().map(|&i| self.utility_labels[i]).collect(),
                self.private_classes,
                self.utility_classes,
            )
        };
        Ok((take(&order[..k])?, take(&order[k..])?))
    }
}

/// Empirical class frequencies.
pub fn class_frequencies(labels: &[usize], classes: usize) -> Vec<f64> {
    let mut counts = vec![0.0; classes];
    for &l in labels {
        counts[l] += 1.0;
    }
    let n = labels.len() as f64;
    counts.iter_mut().for_each(|c| *c /= n);
    counts
}

/// Entropy (nats) of the empirical label distribution.
pub fn label_entropy(labels: &[usize], classes: usize) -> f64 {
    -class_frequencies(labels, classes)
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}
