//! Reference implementations used as test oracles. They work on plain
//! arrays and share no code with the library routines they check.

#![allow(dead_code)]

use frugal_core::classifier::scoring_matrix;
use frugal_core::{DistanceMatrix, IndicatorMatrix, Matrix, ScoreMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A small display problem in both raw and library form.
#[derive(Debug, Clone)]
pub struct Problem {
    pub assignment: Vec<usize>,
    pub k: usize,
    /// Row-major n x k squared distances.
    pub dist: Vec<Vec<f64>>,
    pub fhat: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Problem {
    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn random(r: &mut ChaCha8Rng, n: usize, k: usize) -> Self {
        let mut assignment: Vec<usize> = (0..n).map(|i| i % k).collect();
        for a in assignment.iter_mut().skip(k) {
            *a = r.random_range(0..k);
        }
        let w = |r: &mut ChaCha8Rng| 2.0 * (1.0 - r.random::<f64>());
        Problem {
            dist: (0..n)
                .map(|_| (0..k).map(|_| r.random_range(0.0..3.0)).collect())
                .collect(),
            fhat: (0..n).map(|_| r.random_range(0.001..0.999)).collect(),
            alpha: w(r),
            beta: w(r),
            gamma: w(r),
            assignment,
            k,
        }
    }

    pub fn indicator(&self) -> IndicatorMatrix {
        IndicatorMatrix::from_assignment(&self.assignment, self.k).unwrap()
    }

    pub fn distances(&self) -> DistanceMatrix {
        DistanceMatrix::from_matrix(Matrix::from_rows(&self.dist).unwrap()).unwrap()
    }

    pub fn scores(&self) -> ScoreMatrix {
        scoring_matrix(&self.fhat)
    }

    pub fn hyperparams(&self) -> frugal_core::Hyperparams {
        frugal_core::Hyperparams {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            max_fp_iter: 10_000,
            eps_fp: 1e-13,
            ..Default::default()
        }
    }

    fn xlogx(v: f64) -> f64 {
        if v > 0.0 {
            v * v.ln()
        } else {
            0.0
        }
    }

    /// The display objective, written out term by term.
    pub fn objective(&self, mu: &[f64]) -> f64 {
        let mut mass = vec![0.0; self.k];
        let mut value = 0.0;
        for i in 0..self.n() {
            let c = self.assignment[i];
            mass[c] += mu[i];
            let f = self.fhat[i];
            let neg_entropy = Self::xlogx(f) + Self::xlogx(1.0 - f);
            value += mu[i] * self.dist[i][c]
                + self.beta * mu[i] * neg_entropy
                + self.gamma * Self::xlogx(mu[i]);
        }
        value + self.alpha * mass.iter().map(|&m| Self::xlogx(m)).sum::<f64>()
    }

    /// Projected gradient descent on `{mu >= 1e-8, sum mu = 1}`, with
    /// Barzilai-Borwein trial steps and nonmonotone Armijo backtracking
    /// against the worst of the last ten values (spectral projected
    /// gradient). Stops when the
    /// projected-gradient residual `|mu - P(mu - grad)|_1` falls below
    /// `tol`. The floor keeps the entropy curvature bounded; it moves the
    /// optimal value by at most `n * 1e-8 * max|grad|`.
    pub fn pgd_minimize(&self, tol: f64) -> (Vec<f64>, f64) {
        let n = self.n();
        let floor = 1e-8;
        let mut mu = vec![1.0 / n as f64; n];
        let mut value = self.objective(&mu);
        let mut grad = self.gradient(&mu);
        let mut step = 1.0;
        let mut recent = std::collections::VecDeque::from([value]);
        for _ in 0..200_000 {
            let probe: Vec<f64> = mu.iter().zip(&grad).map(|(m, g)| m - g).collect();
            let residual: f64 = project_shifted_simplex(&probe, floor)
                .iter()
                .zip(&mu)
                .map(|(p, m)| (p - m).abs())
                .sum();
            if residual < tol {
                break;
            }
            let reference = recent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let trial: Vec<f64> = mu.iter().zip(&grad).map(|(m, g)| m - step * g).collect();
            let dir: Vec<f64> = project_shifted_simplex(&trial, floor)
                .iter()
                .zip(&mu)
                .map(|(p, m)| p - m)
                .collect();
            let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
            let mut accepted = None;
            let mut t = 1.0;
            for _ in 0..200 {
                let cand: Vec<f64> = mu.iter().zip(&dir).map(|(m, d)| m + t * d).collect();
                let v = self.objective(&cand);
                if v <= reference + 1e-4 * t * slope {
                    accepted = Some((cand, v));
                    break;
                }
                t *= 0.5;
            }
            let Some((cand, v)) = accepted else { break };
            let next_grad = self.gradient(&cand);
            let (mut ss, mut sy) = (0.0, 0.0);
            for i in 0..n {
                let s = cand[i] - mu[i];
                ss += s * s;
                sy += s * (next_grad[i] - grad[i]);
            }
            step = if sy > 0.0 { (ss / sy).clamp(1e-20, 1e20) } else { 1.0 };
            mu = cand;
            value = v;
            grad = next_grad;
            recent.push_back(v);
            if recent.len() > 10 {
                recent.pop_front();
            }
        }
        (mu, value)
    }

    /// Partial derivatives of [`Problem::objective`].
    pub fn gradient(&self, mu: &[f64]) -> Vec<f64> {
        let mut mass = vec![0.0; self.k];
        for (i, &m) in mu.iter().enumerate() {
            mass[self.assignment[i]] += m;
        }
        (0..self.n())
            .map(|i| {
                let c = self.assignment[i];
                let f = self.fhat[i];
                let ne = Self::xlogx(f) + Self::xlogx(1.0 - f);
                self.dist[i][c]
                    + self.alpha * (mass[c].ln() + 1.0)
                    + self.beta * ne
                    + self.gamma * (mu[i].ln() + 1.0)
            })
            .collect()
    }
}

/// Euclidean projection onto `{x : x_i >= floor, sum x = 1}`.
pub fn project_shifted_simplex(v: &[f64], floor: f64) -> Vec<f64> {
    let n = v.len();
    let budget = 1.0 - floor * n as f64;
    let shifted: Vec<f64> = v.iter().map(|x| x - floor).collect();
    let mut sorted = shifted.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - budget) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    shifted.iter().map(|x| (x - theta).max(0.0) + floor).collect()
}

/// A random point strictly inside the simplex, every entry at least `lo`.
pub fn interior_point(r: &mut ChaCha8Rng, n: usize, lo: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| r.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let scale = 1.0 - lo * n as f64;
    raw.iter().map(|x| lo + scale * x / total).collect()
}

/// Farthest-first selection recomputed from scratch at every pick.
pub fn maxmin_oracle(rows: &[Vec<f64>], labeled: &[usize], b: usize) -> Vec<usize> {
    let n = rows.len();
    let mut anchors: Vec<usize> = labeled.to_vec();
    let mut picked = Vec::new();
    while picked.len() < b {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..n {
            if anchors.contains(&i) {
                continue;
            }
            let nearest = anchors
                .iter()
                .map(|&a| {
                    rows[i]
                        .iter()
                        .zip(&rows[a])
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min);
            if best.is_none_or(|(_, d)| nearest > d) {
                best = Some((i, nearest));
            }
        }
        let Some((i, _)) = best else { break };
        anchors.push(i);
        picked.push(i);
    }
    picked
}

/// Smallest `|score|` first, ties by index: one full sort of `(|s|, i)`.
pub fn uncertainty_oracle(scores: &[f64], labeled: &[bool], b: usize) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = scores
        .iter()
        .enumerate()
        .filter(|(i, _)| !labeled[*i])
        .map(|(i, s)| (s.abs(), i))
        .collect();
    keyed.sort_by(|a, b| a.partial_cmp(b).unwrap());
    keyed.into_iter().take(b).map(|(_, i)| i).collect()
}

/// One-sided sign test: P(Bin(n, 1/2) >= wins).
pub fn sign_test_p(wins: usize, n: usize) -> f64 {
    let mut p = 0.0;
    for k in wins..=n {
        let mut c = 1.0;
        for j in 0..k {
            c *= (n - j) as f64 / (j + 1) as f64;
        }
        p += c * 0.5f64.powi(n as i32);
    }
    p
}
