//! Brute-force primal solver for small supports.
//!
//! Every feasible reweighting is `w = p + t·d` for a unit direction `d` in the
//! tangent space `{Σ d = 0}`. Along a ray the divergence is convex in `t` and
//! zero at `t = 0`, so the largest feasible step is found by bisection and the
//! best value along the ray is `E_p[Δℓ] + t_max (d·Δℓ)₊`. The search is then
//! over directions only: both signs for two atoms, an angle grid for three,
//! random starts refined by pattern search beyond that.

use serde::{Deserialize, Serialize};

use super::DiscreteLossProblem;
use crate::error::{invalid, Result};
use crate::linalg::dot;
use crate::optim::golden_section;
use crate::rng::RngState;

const MAX_ATOMS: usize = 6;
const RESTARTS: usize = 256;
const MAX_ELLIPSOID_STEPS: usize = 20_000;
const MAX_SWEEPS: usize = 400;
const MAX_RANDOM_MOVES: usize = 20_000;
const DIRECTION_SEED: u64 = 0x5eed_d1ec;

/// Best feasible value and the reweighted distribution `w` attaining it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalSolution {
    pub value: f64,
    pub weights: Vec<f64>,
}

struct Ray<'a> {
    probs: &'a [f64],
    losses: &'a [f64],
    problem: &'a DiscreteLossProblem,
    base_value: f64,
}

impl Ray<'_> {
    fn divergence(&self, w: &[f64]) -> f64 {
        let g = self.problem.generator();
        let mut acc = 0.0;
        for (wi, pi) in w.iter().zip(self.probs) {
            match g.eval((wi / pi).max(0.0)) {
                Ok(v) => acc += pi * v,
                Err(_) => return f64::INFINITY,
            }
        }
        acc
    }

    fn point(&self, d: &[f64], t: f64) -> Vec<f64> {
        self.probs.iter().zip(d).map(|(p, di)| p + t * di).collect()
    }

    /// Largest `t` with `w(t)` in the simplex and inside the ball.
    fn max_step(&self, d: &[f64]) -> f64 {
        let mut t_simplex = f64::INFINITY;
        for (p, di) in self.probs.iter().zip(d) {
            if *di < 0.0 {
                t_simplex = t_simplex.min(-p / di);
            }
        }
        let delta = self.problem.delta();
        if self.divergence(&self.point(d, t_simplex)) <= delta {
            return t_simplex;
        }
        let (mut lo, mut hi) = (0.0, t_simplex);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.divergence(&self.point(d, mid)) <= delta {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * hi {
                break;
            }
        }
        lo
    }

    fn value(&self, d: &[f64]) -> f64 {
        let slope = dot(d, self.losses);
        if slope <= 0.0 {
            return self.base_value;
        }
        self.base_value + self.max_step(d) * slope
    }
}

/// Orthonormal basis of `{x ∈ R^m : Σ x = 0}` (Helmert contrasts).
fn tangent_basis(m: usize) -> Vec<Vec<f64>> {
    (1..m)
        .map(|k| {
            let norm = ((k * (k + 1)) as f64).sqrt();
            (0..m)
                .map(|i| {
                    if i < k {
                        1.0 / norm
                    } else if i == k {
                        -(k as f64) / norm
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

fn embed(basis: &[Vec<f64>], u: &[f64]) -> Vec<f64> {
    let m = basis[0].len();
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut d = vec![0.0; m];
    for (uk, bk) in u.iter().zip(basis) {
        for (di, bi) in d.iter_mut().zip(bk) {
            *di += uk / norm * bi;
        }
    }
    d
}

fn coords(basis: &[Vec<f64>], d: &[f64]) -> Vec<f64> {
    basis.iter().map(|b| dot(b, d)).collect()
}

/// Maximises `Σ w_i Δℓ_i` over probability vectors with `D_f(w‖p) ≤ δ`.
///
/// Atoms with zero base mass keep zero weight. Supports of up to six atoms.
pub fn primal_bruteforce(problem: &DiscreteLossProblem) -> Result<PrimalSolution> {
    if problem.len() > MAX_ATOMS {
        return Err(invalid(
            "base_probs",
            format!("brute force supports at most {MAX_ATOMS} atoms"),
        ));
    }
    let active: Vec<usize> = (0..problem.len())
        .filter(|&i| problem.base_probs()[i] > 0.0)
        .collect();
    let probs: Vec<f64> = active.iter().map(|&i| problem.base_probs()[i]).collect();
    let losses: Vec<f64> = active.iter().map(|&i| problem.losses()[i]).collect();
    let ray = Ray {
        probs: &probs,
        losses: &losses,
        problem,
        base_value: problem.expected_loss(),
    };

    let (value, direction) = if probs.len() < 2 || problem.delta() == 0.0 {
        (ray.base_value, None)
    } else {
        let basis = tangent_basis(probs.len());
        let (v, u) = match probs.len() {
            2 => search_line(&ray, &basis),
            3 => search_circle(&ray, &basis),
            _ => search_sphere(&ray, &basis),
        };
        (v, Some(embed(&basis, &u)))
    };

    let mut weights = vec![0.0; problem.len()];
    let local = match &direction {
        Some(d) if value > ray.base_value => ray.point(d, ray.max_step(d)),
        _ => probs.clone(),
    };
    for (&i, w) in active.iter().zip(local) {
        weights[i] = w.max(0.0);
    }
    Ok(PrimalSolution { value, weights })
}

fn search_line(ray: &Ray, basis: &[Vec<f64>]) -> (f64, Vec<f64>) {
    [vec![1.0], vec![-1.0]]
        .into_iter()
        .map(|u| (ray.value(&embed(basis, &u)), u))
        .fold((f64::NEG_INFINITY, vec![1.0]), |best, c| {
            if c.0 > best.0 {
                c
            } else {
                best
            }
        })
}

fn search_circle(ray: &Ray, basis: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let n = 3600;
    let step = std::f64::consts::TAU / n as f64;
    let at = |theta: f64| ray.value(&embed(basis, &[theta.cos(), theta.sin()]));
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 0..n {
        let theta = i as f64 * step;
        let v = at(theta);
        if v > best.0 {
            best = (v, theta);
        }
    }
    let (theta, neg) = golden_section(|th| -at(th), best.1 - step, best.1 + step, 1e-13);
    let (v, theta) = if -neg >= best.0 { (-neg, theta) } else { best };
    (v, vec![theta.cos(), theta.sin()])
}

fn search_sphere(ray: &Ray, basis: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let dim = basis.len();
    let mut rng = RngState::new(DIRECTION_SEED);
    let mut starts: Vec<Vec<f64>> = (0..RESTARTS).map(|_| rng.normal_vec(dim)).collect();
    // directions towards each vertex cover the large-budget corner solutions
    for i in 0..ray.probs.len() {
        let mut d: Vec<f64> = ray.probs.iter().map(|p| -p).collect();
        d[i] += 1.0;
        starts.push(coords(basis, &d));
    }
    let mut scored: Vec<(f64, Vec<f64>)> = starts
        .into_iter()
        .filter(|u| u.iter().any(|x| *x != 0.0))
        .map(|u| (ray.value(&embed(basis, &u)), u))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.truncate(8);
    scored.push(ellipsoid(ray, basis));
    scored
        .into_iter()
        .map(|(v, u)| pattern_search(ray, basis, v, u, &mut rng))
        .fold((f64::NEG_INFINITY, vec![]), |best, c| {
            if c.0 > best.0 {
                c
            } else {
                best
            }
        })
}

/// Central-cut ellipsoid method for `max Δℓ·w` over the feasible set in
/// tangent coordinates `w = p + Bx`. Cuts come from violated simplex facets,
/// the divergence gradient, or the objective at feasible centres. Returns the
/// best feasible centre pushed out to the boundary along its ray.
fn ellipsoid(ray: &Ray, basis: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let n = basis.len();
    let m = ray.probs.len();
    let to_tangent = |v: &[f64]| coords(basis, v);
    let objective = to_tangent(ray.losses);
    let mut x = vec![0.0; n];
    // the simplex has diameter √2, so a ball of radius 2 around p covers it
    let mut shape = vec![0.0; n * n];
    for i in 0..n {
        shape[i * n + i] = 4.0;
    }
    let nf = n as f64;
    let mut best: Option<Vec<f64>> = None;
    let mut best_value = f64::NEG_INFINITY;
    let g = ray.problem.generator();
    for _ in 0..MAX_ELLIPSOID_STEPS {
        let w: Vec<f64> = (0..m)
            .map(|i| ray.probs[i] + (0..n).map(|k| basis[k][i] * x[k]).sum::<f64>())
            .collect();
        let cut = if let Some(i) = (0..m).find(|&i| w[i] <= 0.0) {
            let mut e = vec![0.0; m];
            e[i] = -1.0;
            to_tangent(&e)
        } else if ray.divergence(&w) > ray.problem.delta() {
            let grad: Vec<f64> = (0..m)
                .map(|i| g.derivative(w[i] / ray.probs[i]).unwrap_or(0.0))
                .collect();
            to_tangent(&grad)
        } else {
            let v = dot(&w, ray.losses);
            if v > best_value {
                best_value = v;
                best = Some(x.clone());
            }
            objective.iter().map(|c| -c).collect()
        };
        let pg: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| shape[i * n + j] * cut[j]).sum())
            .collect();
        let gpg = dot(&cut, &pg);
        if !(gpg > 1e-30) {
            break;
        }
        let scale = gpg.sqrt();
        for i in 0..n {
            x[i] -= pg[i] / scale / (nf + 1.0);
        }
        let factor = nf * nf / (nf * nf - 1.0);
        for i in 0..n {
            for j in 0..n {
                shape[i * n + j] =
                    factor * (shape[i * n + j] - 2.0 / (nf + 1.0) * pg[i] * pg[j] / gpg);
            }
        }
        let width: f64 = (0..n)
            .map(|i| objective[i] * (0..n).map(|j| shape[i * n + j] * objective[j]).sum::<f64>())
            .sum();
        if width.sqrt() < 1e-13 {
            break;
        }
    }
    match best {
        Some(x) if x.iter().any(|v| *v != 0.0) => (ray.value(&embed(basis, &x)), x),
        _ => (ray.base_value, vec![1.0; n]),
    }
}

fn normalized(mut u: Vec<f64>) -> Option<Vec<f64>> {
    let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 || !n.is_finite() {
        return None;
    }
    u.iter_mut().for_each(|x| *x /= n);
    Some(u)
}

/// Coordinate moves followed by random-direction moves on the unit sphere.
/// The random moves get past the ridges where the simplex and divergence
/// constraints trade places, which stall coordinate moves.
fn pattern_search(
    ray: &Ray,
    basis: &[Vec<f64>],
    mut best: f64,
    u: Vec<f64>,
    rng: &mut RngState,
) -> (f64, Vec<f64>) {
    let mut u = normalized(u).expect("start direction is nonzero");
    let better = |v: f64, best: f64| v > best + 1e-15 * (1.0 + best.abs());
    let mut step = 0.25;
    let mut sweeps = 0;
    while step > 1e-9 && sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut improved = false;
        for k in 0..u.len() {
            for sign in [1.0, -1.0] {
                let mut cand = u.clone();
                cand[k] += sign * step;
                let Some(cand) = normalized(cand) else {
                    continue;
                };
                let v = ray.value(&embed(basis, &cand));
                if better(v, best) {
                    best = v;
                    u = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    let dim = u.len();
    let patience = 12 * dim;
    let mut step = 0.05;
    let mut failures = 0;
    for _ in 0..MAX_RANDOM_MOVES {
        if step <= 1e-9 {
            break;
        }
        let r = rng.normal_vec(dim);
        let rn = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        let cand: Vec<f64> = u.iter().zip(&r).map(|(a, b)| a + step * b / rn).collect();
        let Some(cand) = normalized(cand) else {
            continue;
        };
        let v = ray.value(&embed(basis, &cand));
        if better(v, best) {
            best = v;
            u = cand;
            failures = 0;
            step *= 1.5;
        } else {
            failures += 1;
            if failures >= patience {
                step *= 0.5;
                failures = 0;
            }
        }
    }
    (best, u)
}
