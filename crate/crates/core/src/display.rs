//! The display model.
//!
//! A membership distribution `mu` over the pool is the minimizer, on the
//! probability simplex, of
//!
//! ```text
//!   rep * sum_i mu_i D_{i,c(i)}                      representativity
//! + alpha * sum_k m_k log m_k,   m = C' mu           diversity
//! + beta  * sum_i mu_i sum_c F_ic log F_ic           ambiguity
//! + gamma * sum_i mu_i log mu_i                      cardinality
//! ```
//!
//! Its stationarity conditions give the Gibbs form
//! `mu_i ∝ exp(-e_i / gamma)` with the exponent
//! `e = (D∘C)1 + alpha C (log C'mu + 1) + beta (F∘log F)1`, which depends on
//! `mu` only through the cluster masses. [`fixed_point_update`] applies that
//! map once; [`solve`] iterates it from a random start.
//!
//! In log space the plain map sends cluster masses to
//! `log Z_k - (alpha/gamma) log m_k + const`, so it only contracts when
//! `alpha < gamma`: at `alpha == gamma` it settles into a 2-cycle and above
//! that it diverges. `solve` therefore relaxes the cluster masses between
//! sweeps (a geometric mix of the old and new masses with step `eta`). The
//! relaxed map has exactly the same fixed points; with the default step
//! `eta = gamma / (gamma + alpha)` the mass recursion is solved in one sweep.
//! `mass_relaxation = Some(1.0)` gives the plain iteration.
//!
//! The next display is the `B` unlabeled samples with the largest `mu`.

use std::fmt::Write as _;

use rand::Rng;

use crate::classifier::{xlogx, ScoreMatrix};
use crate::clustering::{DistanceMatrix, IndicatorMatrix};
use crate::error::{Error, Result};
use crate::model::Hyperparams;
use crate::seeded_rng;

/// Tolerance on `|sum(mu) - 1|` accepted by [`objective`].
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    pub mu: Vec<f64>,
    /// Number of fixed-point sweeps that produced `mu`.
    pub tau: usize,
    pub converged: bool,
    /// L1 change of the last sweep.
    pub final_l1_delta: f64,
}

impl Membership {
    /// Wraps a raw vector (tau 0, not converged).
    pub fn new(mu: Vec<f64>) -> Self {
        Self {
            mu,
            tau: 0,
            converged: false,
            final_l1_delta: f64::INFINITY,
        }
    }

    pub fn uniform(n: usize) -> Self {
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn is_on_simplex(&self, tol: f64) -> bool {
        self.mu.iter().all(|&m| m.is_finite() && m >= 0.0)
            && (self.mu.iter().sum::<f64>() - 1.0).abs() <= tol
    }
}

/// Per-sweep diagnostics of [`solve`]. Entry `tau` describes `mu^(tau)`;
/// the first L1 entry is `None` since there is no previous iterate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverReport {
    pub objective_trace: Vec<f64>,
    pub l1_delta_trace: Vec<Option<f64>>,
}

impl SolverReport {
    /// `tau,objective,l1_delta` rows, one per iterate.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau,objective,l1_delta\n");
        for (tau, (obj, delta)) in self
            .objective_trace
            .iter()
            .zip(&self.l1_delta_trace)
            .enumerate()
        {
            match delta {
                Some(d) => writeln!(out, "{tau},{obj},{d}").unwrap(),
                None => writeln!(out, "{tau},{obj},").unwrap(),
            }
        }
        out
    }
}

/// The four unweighted terms of the objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveTerms {
    pub representativity: f64,
    pub diversity: f64,
    pub ambiguity: f64,
    pub cardinality: f64,
}

impl ObjectiveTerms {
    pub fn weighted(&self, hp: &Hyperparams) -> f64 {
        hp.rep_weight * self.representativity
            + hp.alpha * self.diversity
            + hp.beta * self.ambiguity
            + hp.gamma * self.cardinality
    }
}

fn check_dims(n: usize, c: &IndicatorMatrix, d: &DistanceMatrix, f: &ScoreMatrix) -> Result<()> {
    let dm = d.matrix();
    if c.n() != n || dm.rows() != n || f.n() != n {
        return Err(Error::InvalidArgument(format!(
            "row counts disagree: mu {n}, C {}, D {}, F {}",
            c.n(),
            dm.rows(),
            f.n()
        )));
    }
    if dm.cols() != c.k() {
        return Err(Error::InvalidArgument(format!(
            "C has {} clusters but D has {} columns",
            c.k(),
            dm.cols()
        )));
    }
    Ok(())
}

/// Distance of every sample to its own centroid, `(D∘C) 1_K`.
pub fn own_centroid_distance(c: &IndicatorMatrix, d: &DistanceMatrix) -> Vec<f64> {
    (0..c.n())
        .map(|i| {
            c.matrix()
                .row(i)
                .iter()
                .zip(d.matrix().row(i))
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect()
}

/// Unweighted terms at an arbitrary nonnegative `mu` (no simplex check;
/// finite-difference checks perturb off the simplex).
pub fn objective_terms(
    mu: &[f64],
    c: &IndicatorMatrix,
    d: &DistanceMatrix,
    f: &ScoreMatrix,
) -> ObjectiveTerms {
    let own = own_centroid_distance(c, d);
    let mass = c.cluster_mass(mu);
    let mut terms = ObjectiveTerms {
        representativity: 0.0,
        diversity: mass.iter().map(|&m| xlogx(m)).sum(),
        ambiguity: 0.0,
        cardinality: 0.0,
    };
    for (i, &m) in mu.iter().enumerate() {
        terms.representativity += m * own[i];
        terms.ambiguity += m * f.row_neg_entropy(i);
        terms.cardinality += xlogx(m);
    }
    terms
}

/// Weighted objective value at `mu`, which must lie on the simplex.
pub fn objective(
    mu: &Membership,
    c: &IndicatorMatrix,
    d: &DistanceMatrix,
    f: &ScoreMatrix,
    hp: &Hyperparams,
) -> Result<f64> {
    check_dims(mu.mu.len(), c, d, f)?;
    if !mu.is_on_simplex(SIMPLEX_TOLERANCE) {
        return Err(Error::InvalidArgument(
            "membership is not on the probability simplex".into(),
        ));
    }
    Ok(objective_terms(&mu.mu, c, d, f).weighted(hp))
}

/// Gradient of the weighted objective at an interior `mu`.
pub fn objective_gradient(
    mu: &[f64],
    c: &IndicatorMatrix,
    d: &DistanceMatrix,
    f: &ScoreMatrix,
    hp: &Hyperparams,
) -> Vec<f64> {
    let own = own_centroid_distance(c, d);
    let mass = c.cluster_mass(mu);
    (0..mu.len())
        .map(|i| {
            let div = mass[c.cluster_of(i)].ln() + 1.0;
            hp.rep_weight * own[i]
                + hp.alpha * div
                + hp.beta * f.row_neg_entropy(i)
                + hp.gamma * (mu[i].ln() + 1.0)
        })
        .collect()
}

/// Exponent `e` of the Gibbs form at the previous iterate. Cluster masses
/// are clamped below by `eps_mass` before the log.
pub fn update_exponent(
    mu_prev: &[f64],
    c: &IndicatorMatrix,
    d: &DistanceMatrix,
    f: &ScoreMatrix,
    hp: &Hyperparams,
) -> Result<Vec<f64>> {
    let own = own_centroid_distance(c, d);
    let log_mass: Vec<f64> = c
        .cluster_mass(mu_prev)
        .into_iter()
        .map(|m| m.max(hp.eps_mass).ln() + 1.0)
        .collect();
    let mut e = Vec::with_capacity(mu_prev.len());
    for i in 0..mu_prev.len() {
        let div: f64 = c
            .matrix()
            .row(i)
            .iter()
            .zip(&log_mass)
            .map(|(cik, lm)| cik * lm)
            .sum();
        let value = hp.rep_weight * own[i] + hp.alpha * div + hp.beta * f.row_neg_entropy(i);
        if !value.is_finite() {
            return Err(Error::NumericFailure {
                index: i,
                message: format!("non-finite update exponent {value}"),
            });
        }
        e.push(value);
    }
    Ok(e)
}

/// `exp(-e / gamma)` normalized to unit L1 norm, shifted by the smallest
/// exponent first so the largest weight is exactly 1.
pub fn gibbs_normalize(e: &[f64], gamma: f64) -> Result<Vec<f64>> {
    let lo = e.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = e.iter().map(|&v| (-(v - lo) / gamma).exp()).collect();
    let total: f64 = w.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::NumericFailure {
            index: 0,
            message: format!("normalizer {total} is not positive and finite"),
        });
    }
    Ok(w.into_iter().map(|v| v / total).collect())
}

/// One application of the Gibbs map at `mu_prev`.
pub fn fixed_point_update(
    mu_prev: &Membership,
    c: &IndicatorMatrix,
    d: &DistanceMatrix,
    f: &ScoreMatrix,
    hp: &Hyperparams,
) -> Result<Membership> {
    check_dims(mu_prev.mu.len(), c, d, f)?;
    if !(hp.gamma > 0.0) {
        return Err(Error::config("gamma", "must be positive"));
    }
    let e = update_exponent(&mu_prev.mu, c, d, f, hp)?;
    let mu = gibbs_normalize(&e, hp.gamma)?;
    let delta = l1_distance(&mu, &mu_prev.mu);
    Ok(Membership {
        mu,
        tau: mu_prev.tau + 1,
        converged: false,
        final_l1_delta: delta,
    })
}

fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Gibbs map followed by the cluster-mass relaxation: within-cluster shape
/// from the map, cluster masses `∝ m_old^(1-eta) * m_new^eta`.
fn relaxed_update(
    mu_prev: &Membership,
    c: &IndicatorMatrix,
    d: &DistanceMatrix,
    f: &ScoreMatrix,
    hp: &Hyperparams,
    eta: f64,
) -> Result<Membership> {
    if eta >= 1.0 {
        return fixed_point_update(mu_prev, c, d, f, hp);
    }
    check_dims(mu_prev.mu.len(), c, d, f)?;
    if !(hp.gamma > 0.0) {
        return Err(Error::config("gamma", "must be positive"));
    }
    // Log domain throughout: cluster masses of the mapped iterate can
    // underflow long before the within-cluster shape does.
    let e = update_exponent(&mu_prev.mu, c, d, f, hp)?;
    let logit: Vec<f64> = e.iter().map(|v| -v / hp.gamma).collect();
    let k = c.k();
    let mut cluster_lse = vec![f64::NEG_INFINITY; k];
    for (i, &a) in logit.iter().enumerate() {
        let j = c.cluster_of(i);
        cluster_lse[j] = log_add(cluster_lse[j], a);
    }
    let total_lse = cluster_lse.iter().copied().fold(f64::NEG_INFINITY, log_add);
    let old_mass = c.cluster_mass(&mu_prev.mu);
    let log_target: Vec<f64> = (0..k)
        .map(|j| {
            (1.0 - eta) * old_mass[j].max(hp.eps_mass).ln() + eta * (cluster_lse[j] - total_lse)
        })
        .collect();
    let log_mu: Vec<f64> = logit
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let j = c.cluster_of(i);
            a - cluster_lse[j] + log_target[j]
        })
        .collect();
    let norm = log_mu.iter().copied().fold(f64::NEG_INFINITY, log_add);
    if !norm.is_finite() {
        return Err(Error::NumericFailure {
            index: 0,
            message: format!("relaxed normalizer {norm} is not finite"),
        });
    }
    let mu: Vec<f64> = log_mu.iter().map(|l| (l - norm).exp()).collect();
    let delta = l1_distance(&mu, &mu_prev.mu);
    Ok(Membership {
        mu,
        tau: mu_prev.tau + 1,
        converged: false,
        final_l1_delta: delta,
    })
}

/// `ln(e^a + e^b)` without overflow.
fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

pub fn random_start(n: usize, seed: u64) -> Membership {
    let mut rng = seeded_rng(seed, 0x6d75);
    // 1 - U[0,1) lies in (0, 1].
    let raw: Vec<f64> = (0..n).map(|_| 1.0 - rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    Membership::new(raw.into_iter().map(|v| v / total).collect())
}

/// Fixed-point iteration until the L1 change drops below `eps_fp` or
/// `max_fp_iter` sweeps have run.
pub fn solve(
    c: &IndicatorMatrix,
    d: &DistanceMatrix,
    f: &ScoreMatrix,
    hp: &Hyperparams,
    seed: u64,
) -> Result<(Membership, SolverReport)> {
    hp.validate()?;
    let n = c.n();
    if n == 0 {
        return Err(Error::InvalidArgument("cannot solve over an empty pool".into()));
    }
    check_dims(n, c, d, f)?;
    let eta = hp.effective_relaxation();

    let mut mu = random_start(n, seed);
    let mut report = SolverReport {
        objective_trace: vec![objective_terms(&mu.mu, c, d, f).weighted(hp)],
        l1_delta_trace: vec![None],
    };
    while mu.tau < hp.max_fp_iter {
        let next = relaxed_update(&mu, c, d, f, hp, eta)?;
        let delta = next.final_l1_delta;
        report
            .objective_trace
            .push(objective_terms(&next.mu, c, d, f).weighted(hp));
        report.l1_delta_trace.push(Some(delta));
        mu = next;
        if delta < hp.eps_fp {
            mu.converged = true;
            break;
        }
    }
    Ok((mu, report))
}

/// Solves over the whole pool, or over unlabeled rows only when
/// `hp.restrict_to_unlabeled` is set (labeled rows then get zero mass).
pub fn solve_for_pool(
    c: &IndicatorMatrix,
    d: &DistanceMatrix,
    f: &ScoreMatrix,
    hp: &Hyperparams,
    seed: u64,
    labeled_mask: &[bool],
) -> Result<(Membership, SolverReport)> {
    if !hp.restrict_to_unlabeled {
        return solve(c, d, f, hp, seed);
    }
    let rows: Vec<usize> = (0..c.n()).filter(|&i| !labeled_mask[i]).collect();
    if rows.is_empty() {
        return Err(Error::InvalidState("every sample is already labeled".into()));
    }
    let (sub, report) = solve(
        &c.select_rows(&rows),
        &d.select_rows(&rows),
        &f.select_rows(&rows),
        hp,
        seed,
    )?;
    let mut mu = vec![0.0; c.n()];
    for (&i, &m) in rows.iter().zip(&sub.mu) {
        mu[i] = m;
    }
    Ok((Membership { mu, ..sub }, report))
}

/// The `b` unlabeled indices with the largest membership, largest first;
/// ties go to the smaller index.
pub fn select_top_b(mu: &Membership, labeled_mask: &[bool], b: usize) -> Result<Vec<usize>> {
    if labeled_mask.len() != mu.mu.len() {
        return Err(Error::InvalidArgument(format!(
            "mask has {} entries for {} memberships",
            labeled_mask.len(),
            mu.mu.len()
        )));
    }
    let mut candidates: Vec<usize> = (0..mu.mu.len()).filter(|&i| !labeled_mask[i]).collect();
    if candidates.is_empty() {
        return Err(Error::InvalidState("every sample is already labeled".into()));
    }
    candidates.sort_by(|&a, &b| mu.mu[b].total_cmp(&mu.mu[a]).then(a.cmp(&b)));
    candidates.truncate(b);
    Ok(candidates)
}
