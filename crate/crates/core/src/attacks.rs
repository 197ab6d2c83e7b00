//! Loss-ascent attacks on latent-space classifiers.
//!
//! Both attacks use the per-sample input gradient returned by
//! [`MlpClassifier::cross_entropy_and_gradients`]. `sign(0)` is taken as 0,
//! so coordinates with a zero gradient do not move.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::linalg::{norm2, norm_inf};
use crate::privatizer::MlpClassifier;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    L2,
    Linf,
}

impl Norm {
    pub fn of(self, v: &[f64]) -> f64 {
        match self {
            Norm::L2 => norm2(v),
            Norm::Linf => norm_inf(v),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Norm::L2 => "l2",
            Norm::Linf => "linf",
        }
    }
}

impl std::str::FromStr for Norm {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" | "2" => Ok(Norm::L2),
            "linf" | "inf" | "l_inf" => Ok(Norm::Linf),
            _ => Err(invalid("norm", format!("expected l2 or linf, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    /// Ball radius.
    pub epsilon: f64,
    pub norm: Norm,
    pub steps: usize,
    /// Multiplier `η` on the steepest-ascent direction, which itself has norm `ε`.
    pub step_size: f64,
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(invalid(
                "epsilon",
                format!("must be positive, got {}", self.epsilon),
            ));
        }
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(invalid(
                "step_size",
                format!("must be positive, got {}", self.step_size),
            ));
        }
        if self.steps == 0 {
            return Err(invalid("steps", "must be at least 1"));
        }
        Ok(())
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `∇_z ℓ(z, y)` for a single point.
pub fn input_gradient(c: &MlpClassifier, z: &[f64], y: usize) -> Result<Vec<f64>> {
    let mut ce = c.cross_entropy_and_gradients(&[z.to_vec()], &[y])?;
    Ok(ce.inputs.swap_remove(0))
}

/// `argmax_{‖v‖_p ≤ ε} vᵀg`: `ε g/‖g‖₂` for L2 and `ε sign(g)` for L∞.
/// A zero gradient gives the zero vector.
pub fn steepest_ascent(g: &[f64], epsilon: f64, norm: Norm) -> Vec<f64> {
    match norm {
        Norm::Linf => g.iter().map(|&x| epsilon * sign(x)).collect(),
        Norm::L2 => {
            let n = norm2(g);
            if n == 0.0 {
                vec![0.0; g.len()]
            } else {
                g.iter().map(|x| epsilon * x / n).collect()
            }
        }
    }
}

/// Nearest point of the `ε`-ball around `center`.
pub fn project_ball(x: &[f64], center: &[f64], epsilon: f64, norm: Norm) -> Result<Vec<f64>> {
    check_dim(center.len(), x.len())?;
    if !(epsilon > 0.0) {
        return Err(invalid(
            "epsilon",
            format!("must be positive, got {epsilon}"),
        ));
    }
    Ok(match norm {
        Norm::Linf => x
            .iter()
            .zip(center)
            .map(|(v, c)| v.clamp(c - epsilon, c + epsilon))
            .collect(),
        Norm::L2 => {
            let diff: Vec<f64> = x.iter().zip(center).map(|(v, c)| v - c).collect();
            let n = norm2(&diff);
            if n <= epsilon {
                x.to_vec()
            } else {
                let s = epsilon / n;
                center.iter().zip(&diff).map(|(c, d)| c + s * d).collect()
            }
        }
    })
}

/// `z + ε sign(∇_z ℓ)`.
pub fn fgsm(c: &MlpClassifier, z: &[f64], y: usize, epsilon: f64) -> Result<Vec<f64>> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(invalid(
            "epsilon",
            format!("must be positive, got {epsilon}"),
        ));
    }
    let g = input_gradient(c, z, y)?;
    Ok(z.iter()
        .zip(&g)
        .map(|(v, gi)| v + epsilon * sign(*gi))
        .collect())
}

/// Every PGM iterate `z⁰ … z^T`, each projected onto the ball around `z⁰`.
pub fn pgm_iterates(
    c: &MlpClassifier,
    z: &[f64],
    y: usize,
    cfg: &AttackConfig,
) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    check_dim(c.input_dim(), z.len())?;
    let mut iterates = Vec::with_capacity(cfg.steps + 1);
    iterates.push(z.to_vec());
    let mut cur = z.to_vec();
    for _ in 0..cfg.steps {
        let g = input_gradient(c, &cur, y)?;
        let v = steepest_ascent(&g, cfg.epsilon, cfg.norm);
        let moved: Vec<f64> = cur
            .iter()
            .zip(&v)
            .map(|(a, b)| a + cfg.step_size * b)
            .collect();
        cur = project_ball(&moved, z, cfg.epsilon, cfg.norm)?;
        iterates.push(cur.clone());
    }
    Ok(iterates)
}

/// Projected gradient ascent; returns `z^T`.
pub fn pgm(c: &MlpClassifier, z: &[f64], y: usize, cfg: &AttackConfig) -> Result<Vec<f64>> {
    Ok(pgm_iterates(c, z, y, cfg)?
        .pop()
        .expect("at least the start point"))
}

/// Accuracy of `c` on `points` after each is replaced by its attacked version.
pub fn attacked_accuracy(
    c: &MlpClassifier,
    points: &[Vec<f64>],
    labels: &[usize],
    cfg: &AttackConfig,
) -> Result<f64> {
    check_dim(points.len(), labels.len())?;
    let attacked = points
        .iter()
        .zip(labels)
        .map(|(z, &y)| pgm(c, z, y, cfg))
        .collect::<Result<Vec<_>>>()?;
    c.accuracy(&attacked, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::rng::RngState;

    #[test]
    fn projection_examples() {
        let p = project_ball(&[3.0, 4.0], &[0.0, 0.0], 1.0, Norm::L2).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        let inside = [0.1, -0.2];
        assert_eq!(
            project_ball(&inside, &[0.0, 0.0], 1.0, Norm::L2).unwrap(),
            inside.to_vec()
        );
        assert_eq!(
            project_ball(&inside, &[0.0, 0.0], 1.0, Norm::Linf).unwrap(),
            inside.to_vec()
        );
        assert_eq!(
            project_ball(&[2.0, -3.0, 0.5], &[0.0, 0.0, 0.0], 1.0, Norm::Linf).unwrap(),
            vec![1.0, -1.0, 0.5]
        );
        assert!(project_ball(&[1.0], &[0.0], 0.0, Norm::L2).is_err());
    }

    #[test]
    fn projection_is_idempotent() {
        let mut rng = RngState::new(3);
        for norm in [Norm::L2, Norm::Linf] {
            for _ in 0..100 {
                let x = rng
                    .normal_vec(4)
                    .iter()
                    .map(|v| 3.0 * v)
                    .collect::<Vec<_>>();
                let c = rng.normal_vec(4);
                let once = project_ball(&x, &c, 0.7, norm).unwrap();
                let twice = project_ball(&once, &c, 0.7, norm).unwrap();
                // a rescaled L2 point can land one ulp outside and be rescaled again
                assert!(once.iter().zip(&twice).all(|(a, b)| (a - b).abs() < 1e-12));
            }
        }
    }

    /// Linear head: zero first layer would kill the gradient, so the hidden
    /// layer acts as identity on positive inputs.
    fn linear_classifier(w: &[[f64; 2]; 2]) -> MlpClassifier {
        let w1 = Matrix::identity(2);
        let w2 = Matrix::from_rows(&[w[0].to_vec(), w[1].to_vec()]).unwrap();
        // shift keeps the ELU in its linear region for inputs near the origin
        MlpClassifier::from_parts(w1, vec![50.0, 50.0], w2, vec![0.0, 0.0]).unwrap()
    }

    #[test]
    fn fgsm_follows_hand_set_gradient() {
        // logits l₀ = z₀ − z₁, l₁ = 0 (up to the bias); label 1 loss grows along (1, −1)
        let c = linear_classifier(&[[1.0, -1.0], [0.0, 0.0]]);
        let z = [0.2, 0.4];
        let out = fgsm(&c, &z, 1, 0.1).unwrap();
        assert!((out[0] - 0.3).abs() < 1e-15 && (out[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_point_fixed() {
        let c = MlpClassifier::zeros(3, 4, 2).unwrap();
        let z = [1.0, -2.0, 0.5];
        assert_eq!(fgsm(&c, &z, 0, 0.3).unwrap(), z.to_vec());
        let cfg = AttackConfig {
            epsilon: 0.5,
            norm: Norm::L2,
            steps: 5,
            step_size: 0.3,
        };
        assert_eq!(pgm(&c, &z, 1, &cfg).unwrap(), z.to_vec());
    }

    #[test]
    fn config_validation() {
        let ok = AttackConfig {
            epsilon: 1.0,
            norm: Norm::Linf,
            steps: 1,
            step_size: 1.0,
        };
        assert!(ok.validate().is_ok());
        assert!(AttackConfig { steps: 0, ..ok }.validate().is_err());
        assert!(AttackConfig { epsilon: 0.0, ..ok }.validate().is_err());
        assert!(AttackConfig {
            step_size: -1.0,
            ..ok
        }
        .validate()
        .is_err());
        assert_eq!("L2".parse::<Norm>().unwrap(), Norm::L2);
        assert!("l3".parse::<Norm>().is_err());
    }
}
