//! The learner: a linear SVM trained by seeded stochastic subgradient
//! descent, pool-wise score normalization into the two-column scoring
//! matrix, and equal-error-rate evaluation.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{Dataset, Label, Matrix};
use crate::seeded_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub trained_on: usize,
    /// Set when every training label was the same class; the model is then
    /// the constant `bias = +-1`.
    pub single_class: Option<Label>,
}

impl LinearModel {
    pub fn d(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn score(&self, x: &[f32]) -> f64 {
        self.weights
            .iter()
            .zip(x)
            .map(|(w, &v)| w * f64::from(v))
            .sum::<f64>()
            + self.bias
    }

    /// Same decision boundary, parameters multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> LinearModel {
        LinearModel {
            weights: self.weights.iter().map(|w| w * factor).collect(),
            bias: self.bias * factor,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    /// Weight each class by `m / (2 m_class)` so both classes carry half of
    /// the loss; the rare class is otherwise cheaper to ignore than to fit.
    pub balanced: bool,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            epochs: 200,
            balanced: true,
        }
    }
}

impl SvmConfig {
    /// SHA-256 over the config fields and the training seed.
    pub fn hash(&self, seed: u64) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"svm-pegasos-v2");
        h.update(self.lambda.to_le_bytes());
        h.update((self.epochs as u64).to_le_bytes());
        h.update([u8::from(self.balanced)]);
        h.update(seed.to_le_bytes());
        h.finalize().into()
    }

    /// Loss weights `(positive, negative)`; both 1 when unbalanced.
    pub fn class_weights(&self, labels: &[Label]) -> (f64, f64) {
        let m = labels.len() as f64;
        let pos = labels.iter().filter(|&&l| l == Label::Positive).count() as f64;
        let neg = m - pos;
        if !self.balanced || pos == 0.0 || neg == 0.0 {
            (1.0, 1.0)
        } else {
            (m / (2.0 * pos), m / (2.0 * neg))
        }
    }
}

fn weight_of(label: Label, weights: (f64, f64)) -> f64 {
    match label {
        Label::Positive => weights.0,
        Label::Negative => weights.1,
    }
}

/// Regularized hinge objective with the bias treated as an extra weight on a
/// constant feature:
/// `lambda/2 (|w|^2 + b^2) + (1/m) sum c_y max(0, 1 - y (w.x + b))`
/// with class weights `c_y` from [`SvmConfig::class_weights`].
pub fn svm_objective(
    weights: &[f64],
    bias: f64,
    features: &Dataset,
    labels: &[Label],
    config: &SvmConfig,
) -> f64 {
    let cw = config.class_weights(labels);
    let reg = 0.5 * config.lambda * (weights.iter().map(|w| w * w).sum::<f64>() + bias * bias);
    let m = labels.len().max(1) as f64;
    let hinge: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let s = dot(weights, features.row(i)) + bias;
            weight_of(y, cw) * (1.0 - y.sign() * s).max(0.0)
        })
        .sum();
    reg + hinge / m
}

/// A subgradient of [`svm_objective`]; returns `(d/dw, d/db)`.
pub fn svm_subgradient(
    weights: &[f64],
    bias: f64,
    features: &Dataset,
    labels: &[Label],
    config: &SvmConfig,
) -> (Vec<f64>, f64) {
    let cw = config.class_weights(labels);
    let lambda = config.lambda;
    let m = labels.len().max(1) as f64;
    let mut gw: Vec<f64> = weights.iter().map(|w| lambda * w).collect();
    let mut gb = lambda * bias;
    for (i, &y) in labels.iter().enumerate() {
        let x = features.row(i);
        let ys = y.sign();
        if ys * (dot(weights, x) + bias) < 1.0 {
            let c = weight_of(y, cw) / m;
            for (g, &v) in gw.iter_mut().zip(x) {
                *g -= c * ys * f64::from(v);
            }
            gb -= c * ys;
        }
    }
    (gw, gb)
}

#[inline]
fn dot(w: &[f64], x: &[f32]) -> f64 {
    w.iter().zip(x).map(|(a, &b)| a * f64::from(b)).sum()
}

/// Pegasos-style training with step `1 / (lambda t)` and `m` steps per
/// epoch. Unbalanced, each epoch is one shuffled pass over the rows.
/// Balanced, each step first picks a class with probability 1/2 and then a
/// row of that class uniformly, which is an unbiased estimate of the
/// weighted objective with unit-size updates. Iterates stay in the ball of
/// radius `sqrt(2 / lambda)`, which holds the minimizer. The iterate with the
/// lowest objective seen at an epoch boundary (the zero model included) is
/// returned.
pub fn train_svm(
    features: &Dataset,
    labels: &[Label],
    config: SvmConfig,
    seed: u64,
) -> Result<LinearModel> {
    let m = labels.len();
    if m == 0 {
        return Err(Error::InvalidState(
            "cannot train a classifier without labeled samples".into(),
        ));
    }
    if features.n() != m {
        return Err(Error::InvalidArgument(format!(
            "{} feature rows but {m} labels",
            features.n()
        )));
    }
    if !(config.lambda > 0.0) || config.epochs == 0 {
        return Err(Error::InvalidArgument(
            "svm lambda must be positive and epochs at least 1".into(),
        ));
    }
    features.check_finite()?;
    let d = features.d();

    let first = labels[0];
    if labels.iter().all(|&l| l == first) {
        return Ok(LinearModel {
            weights: vec![0.0; d],
            bias: first.sign(),
            trained_on: m,
            single_class: Some(first),
        });
    }

    let lambda = config.lambda;
    let radius = (2.0 / lambda).sqrt();
    let (pos, neg): (Vec<usize>, Vec<usize>) =
        (0..m).partition(|&i| labels[i] == Label::Positive);
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut best = (svm_objective(&w, b, features, labels, &config), w.clone(), b);
    let mut order: Vec<usize> = (0..m).collect();
    let mut rng = seeded_rng(seed, 0x5f6d);
    let mut step = 0u64;
    for _ in 0..config.epochs {
        if config.balanced {
            for slot in order.iter_mut() {
                let class = if rng.random_bool(0.5) { &pos } else { &neg };
                *slot = class[rng.random_range(0..class.len())];
            }
        } else {
            order.shuffle(&mut rng);
        }
        for &i in &order {
            step += 1;
            let eta = 1.0 / (lambda * step as f64);
            let x = features.row(i);
            let y = labels[i].sign();
            let violated = y * (dot(&w, x) + b) < 1.0;
            let shrink = 1.0 - eta * lambda;
            for wj in w.iter_mut() {
                *wj *= shrink;
            }
            b *= shrink;
            if violated {
                for (wj, &v) in w.iter_mut().zip(x) {
                    *wj += eta * y * f64::from(v);
                }
                b += eta * y;
            }
            let norm = (w.iter().map(|v| v * v).sum::<f64>() + b * b).sqrt();
            if norm > radius {
                let s = radius / norm;
                for wj in w.iter_mut() {
                    *wj *= s;
                }
                b *= s;
            }
        }
        let obj = svm_objective(&w, b, features, labels, &config);
        if obj < best.0 {
            best = (obj, w.clone(), b);
        }
    }
    Ok(LinearModel {
        weights: best.1,
        bias: best.2,
        trained_on: m,
        single_class: None,
    })
}

/// Raw margins `w.x + b` for every row.
pub fn decision_scores(model: &LinearModel, dataset: &Dataset) -> Result<Vec<f64>> {
    if model.d() != dataset.d() {
        return Err(Error::InvalidArgument(format!(
            "model dimension {} does not match feature dimension {}",
            model.d(),
            dataset.d()
        )));
    }
    Ok((0..dataset.n())
        .map(|i| model.score(dataset.row(i)))
        .collect())
}

/// Pool-wise min-max rescale, clamped to `[eps, 1 - eps]`. A constant input
/// maps to 0.5 everywhere.
pub fn normalize_scores(raw: &[f64], eps_score: f64) -> Vec<f64> {
    let (lo, hi) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
            (lo.min(s), hi.max(s))
        });
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![0.5; raw.len()];
    }
    raw.iter()
        .map(|&s| ((s - lo) / span).clamp(eps_score, 1.0 - eps_score))
        .collect()
}

/// n x 2 scoring matrix with rows `(f, 1 - f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix(Matrix);

impl ScoreMatrix {
    pub fn from_matrix(m: Matrix) -> Result<Self> {
        if m.cols() != 2 {
            return Err(Error::InvalidArgument(format!(
                "scoring matrix needs 2 columns, got {}",
                m.cols()
            )));
        }
        Ok(Self(m))
    }

    /// Every row `(0.5, 0.5)`: maximal ambiguity everywhere.
    pub fn uniform(n: usize) -> Self {
        scoring_matrix(&vec![0.5; n])
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    /// `sum_c F_ic log F_ic` for row `i`, with `0 log 0 = 0`.
    pub fn row_neg_entropy(&self, i: usize) -> f64 {
        self.0.row(i).iter().map(|&f| xlogx(f)).sum()
    }

    pub fn select_rows(&self, idx: &[usize]) -> ScoreMatrix {
        ScoreMatrix(self.0.select_rows(idx))
    }
}

#[inline]
pub(crate) fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

pub fn scoring_matrix(fhat: &[f64]) -> ScoreMatrix {
    let mut m = Matrix::zeros(fhat.len(), 2);
    for (i, &f) in fhat.iter().enumerate() {
        m.set(i, 0, f);
        m.set(i, 1, 1.0 - f);
    }
    ScoreMatrix(m)
}

/// Mean of the two per-class error rates at threshold 0 (a sample is
/// predicted positive iff its score is strictly positive).
pub fn eer_from_scores(scores: &[f64], labels: &[Label]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let (mut pos, mut neg, mut fn_, mut fp) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &y) in scores.iter().zip(labels) {
        let predicted_positive = s > 0.0;
        match y {
            Label::Positive => {
                pos += 1;
                if !predicted_positive {
                    fn_ += 1;
                }
            }
            Label::Negative => {
                neg += 1;
                if predicted_positive {
                    fp += 1;
                }
            }
        }
    }
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidArgument(
            "evaluation set must contain both classes".into(),
        ));
    }
    Ok(0.5 * (fn_ as f64 / pos as f64 + fp as f64 / neg as f64))
}

pub fn evaluate_eer(model: &LinearModel, eval_features: &Dataset, eval_labels: &[Label]) -> Result<f64> {
    let scores = decision_scores(model, eval_features)?;
    eer_from_scores(&scores, eval_labels)
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"FRGLMODL";
const CHECKPOINT_VERSION: u32 = 1;

/// Serialized model: magic, version, d, weights (f64 LE), bias, trained_on,
/// single-class marker, and the 32-byte training config hash.
pub fn checkpoint_bytes(model: &LinearModel, config_hash: &[u8; 32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 + 8 + 8 * model.d() + 8 + 8 + 1 + 32);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.d() as u64).to_le_bytes());
    for w in &model.weights {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out.extend_from_slice(&model.bias.to_le_bytes());
    out.extend_from_slice(&(model.trained_on as u64).to_le_bytes());
    out.push(model.single_class.map_or(0u8, |l| l.as_i8() as u8));
    out.extend_from_slice(config_hash);
    out
}

pub fn checkpoint_from_bytes(bytes: &[u8], path: &Path) -> Result<(LinearModel, [u8; 32])> {
    let header = 8 + 4 + 8;
    if bytes.len() < header {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: header as u64,
            actual: bytes.len() as u64,
        });
    }
    if &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::Version {
            path: path.to_path_buf(),
            detail: "bad magic bytes, not a model checkpoint".into(),
        });
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            path: path.to_path_buf(),
            detail: format!("checkpoint version {version}, expected {CHECKPOINT_VERSION}"),
        });
    }
    let d = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let expected = header + 8 * d + 8 + 8 + 1 + 32;
    if bytes.len() != expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: expected as u64,
            actual: bytes.len() as u64,
        });
    }
    let f64_at = |off: usize| f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
    let weights = (0..d).map(|j| f64_at(header + 8 * j)).collect();
    let mut off = header + 8 * d;
    let bias = f64_at(off);
    off += 8;
    let trained_on = u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()) as usize;
    off += 8;
    let single_class = match bytes[off] as i8 {
        0 => None,
        v => Some(Label::from_i64(i64::from(v)).ok_or_else(|| {
            Error::Format(format!("bad single-class marker {v} in checkpoint"))
        })?),
    };
    off += 1;
    let hash: [u8; 32] = bytes[off..off + 32].try_into().unwrap();
    Ok((
        LinearModel {
            weights,
            bias,
            trained_on,
            single_class,
        },
        hash,
    ))
}

pub fn save_checkpoint(model: &LinearModel, config_hash: &[u8; 32], path: &Path) -> Result<()> {
    crate::datasets::write_atomic(path, &checkpoint_bytes(model, config_hash))
}

pub fn load_checkpoint(path: &Path) -> Result<(LinearModel, [u8; 32])> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::io(format!("reading checkpoint {}", path.display()), e))?;
    checkpoint_from_bytes(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn column(xs: &[f32]) -> Dataset {
        Dataset::new(xs.to_vec(), 1, Dataset::sequential_ids(xs.len()), None).unwrap()
    }

    #[test]
    fn separable_pair() {
        let ds = column(&[-2.0, 2.0]);
        let labels = [Label::Negative, Label::Positive];
        let m = train_svm(&ds, &labels, SvmConfig::default(), 1).unwrap();
        assert!(m.score(&[-2.0]) < 0.0);
        assert!(m.score(&[2.0]) > 0.0);
        assert_eq!(m.single_class, None);
    }

    #[test]
    fn single_class_is_flagged_constant() {
        let ds = column(&[0.1, 0.4, 0.9]);
        let labels = [Label::Positive; 3];
        let m = train_svm(&ds, &labels, SvmConfig::default(), 1).unwrap();
        assert_eq!(m.single_class, Some(Label::Positive));
        assert!(m.weights.iter().all(|&w| w == 0.0));
        assert!(m.bias > 0.0);
    }

    #[test]
    fn empty_training_set_is_invalid_state() {
        let ds = Dataset::from_raw(vec![], 1, vec![], None);
        assert!(matches!(
            train_svm(&ds, &[], SvmConfig::default(), 0),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn non_finite_training_features_rejected() {
        let mut ds = column(&[0.0, 1.0]);
        ds.features_mut()[0] = f32::INFINITY;
        assert!(matches!(
            train_svm(&ds, &[Label::Negative, Label::Positive], SvmConfig::default(), 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn subgradient_matches_central_differences() {
        let mut rng = seeded_rng(77, 0);
        let (m, d) = (12, 4);
        let feats: Vec<f32> = (0..m * d).map(|_| rng.random::<f32>()).collect();
        let ds = Dataset::new(feats, d, Dataset::sequential_ids(m), None).unwrap();
        let labels: Vec<Label> = (0..m)
            .map(|i| if i % 3 == 0 { Label::Positive } else { Label::Negative })
            .collect();
        let h = 1e-6;
        let mut checked = 0;
        while checked < 10 {
            let w: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let b: f64 = rng.random_range(-1.0..1.0);
            // Skip points too close to a hinge kink for the stencil.
            let near_kink = labels.iter().enumerate().any(|(i, y)| {
                let margin = y.sign() * (dot(&w, ds.row(i)) + b);
                (margin - 1.0).abs() < 1e-3
            });
            if near_kink {
                continue;
            }
            let cfg = SvmConfig {
                lambda: 0.1,
                epochs: 1,
                balanced: checked % 2 == 0,
            };
            let (gw, gb) = svm_subgradient(&w, b, &ds, &labels, &cfg);
            let mut analytic = gw.clone();
            analytic.push(gb);
            let mut numeric = Vec::new();
            for j in 0..=d {
                let eval = |delta: f64| {
                    let mut wp = w.clone();
                    let mut bp = b;
                    if j < d {
                        wp[j] += delta;
                    } else {
                        bp += delta;
                    }
                    svm_objective(&wp, bp, &ds, &labels, &cfg)
                };
                numeric.push((eval(h) - eval(-h)) / (2.0 * h));
            }
            let num: f64 = analytic
                .iter()
                .zip(&numeric)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let den = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(num / den < 1e-5, "relative error {}", num / den);
            checked += 1;
        }
    }

    #[test]
    fn training_never_worse_than_zero_model() {
        for seed in 0..10u64 {
            let mut rng = seeded_rng(seed, 3);
            let (m, d) = (30, 5);
            let feats: Vec<f32> = (0..m * d).map(|_| rng.random::<f32>()).collect();
            let ds = Dataset::new(feats, d, Dataset::sequential_ids(m), None).unwrap();
            let labels: Vec<Label> = (0..m)
                .map(|_| if rng.random::<f64>() < 0.3 { Label::Positive } else { Label::Negative })
                .collect();
            let cfg = SvmConfig {
                lambda: 1e-2,
                epochs: 50,
                balanced: seed % 2 == 0,
            };
            let model = train_svm(&ds, &labels, cfg, seed).unwrap();
            let trained = svm_objective(&model.weights, model.bias, &ds, &labels, &cfg);
            let zero = svm_objective(&vec![0.0; d], 0.0, &ds, &labels, &cfg);
            assert!(trained <= zero);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let ds = column(&[-1.0, -0.5, 0.2, 0.9, 1.3]);
        let labels = [
            Label::Negative,
            Label::Negative,
            Label::Positive,
            Label::Positive,
            Label::Positive,
        ];
        let a = train_svm(&ds, &labels, SvmConfig::default(), 5).unwrap();
        let b = train_svm(&ds, &labels, SvmConfig::default(), 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn decision_scores_cases() {
        let model = LinearModel {
            weights: vec![1.0, 0.0],
            bias: 0.0,
            trained_on: 1,
            single_class: None,
        };
        let ds = Dataset::new(vec![3.0, 7.0], 2, Dataset::sequential_ids(1), None).unwrap();
        assert_eq!(decision_scores(&model, &ds).unwrap(), vec![3.0]);

        let zero = LinearModel {
            weights: vec![0.0, 0.0],
            ..model.clone()
        };
        assert_eq!(decision_scores(&zero, &ds).unwrap(), vec![0.0]);

        let wrong_dim = column(&[1.0]);
        assert!(decision_scores(&model, &wrong_dim).is_err());
    }

    #[test]
    fn decision_scores_match_naive_loop() {
        let mut rng = seeded_rng(8, 8);
        let (n, d) = (25, 6);
        let feats: Vec<f32> = (0..n * d).map(|_| rng.random::<f32>()).collect();
        let ds = Dataset::new(feats.clone(), d, Dataset::sequential_ids(n), None).unwrap();
        let model = LinearModel {
            weights: (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
            bias: 0.25,
            trained_on: 1,
            single_class: None,
        };
        let got = decision_scores(&model, &ds).unwrap();
        for i in 0..n {
            let mut acc = model.bias;
            for j in 0..d {
                acc += model.weights[j] * f64::from(feats[i * d + j]);
            }
            assert!((got[i] - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_scores(&[-2.0, 0.0, 2.0], 1e-3), vec![0.001, 0.5, 0.999]);
        assert_eq!(normalize_scores(&[3.0, 3.0, 3.0], 1e-3), vec![0.5; 3]);
    }

    proptest! {
        #[test]
        fn normalize_preserves_order_and_range(raw in prop::collection::vec(-1e6f64..1e6, 1..40)) {
            let eps = 1e-3;
            let out = normalize_scores(&raw, eps);
            for (i, &a) in out.iter().enumerate() {
                prop_assert!(a >= eps && a <= 1.0 - eps);
                for (j, &b) in out.iter().enumerate() {
                    if raw[i] < raw[j] {
                        prop_assert!(a <= b);
                    }
                }
            }
        }

        #[test]
        fn score_rows_sum_to_one(f in prop::collection::vec(1e-3f64..0.999, 1..30)) {
            let s = scoring_matrix(&f);
            for i in 0..s.n() {
                let r = s.matrix().row(i);
                prop_assert!((r[0] + r[1] - 1.0).abs() <= f64::EPSILON);
            }
        }
    }

    #[test]
    fn scoring_matrix_rows() {
        let s = scoring_matrix(&[0.5, 0.999]);
        assert_eq!(s.matrix().row(0), &[0.5, 0.5]);
        assert!((s.row_neg_entropy(0) + std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(s.matrix().get(1, 0), 0.999);
        assert!((s.matrix().get(1, 1) - 0.001).abs() < 1e-15);
    }

    #[test]
    fn eer_examples() {
        use Label::*;
        let labels = [Positive, Positive, Negative, Negative];
        assert_eq!(eer_from_scores(&[1.0, 2.0, -1.0, -3.0], &labels).unwrap(), 0.0);
        assert_eq!(eer_from_scores(&[-1.0, -2.0, -1.0, -3.0], &labels).unwrap(), 0.5);

        let mut labels = vec![Positive; 4];
        labels.extend(vec![Negative; 10]);
        let mut scores = vec![1.0, 1.0, -1.0, -1.0];
        scores.extend(vec![-1.0; 9]);
        scores.push(1.0);
        let eer = eer_from_scores(&scores, &labels).unwrap();
        assert!((eer - 0.3).abs() < 1e-15);

        assert!(eer_from_scores(&[1.0, 2.0], &[Positive, Positive]).is_err());
    }

    #[test]
    fn eer_invariant_under_positive_rescaling() {
        let mut rng = seeded_rng(4, 4);
        let (n, d) = (40, 3);
        let feats: Vec<f32> = (0..n * d).map(|_| rng.random::<f32>()).collect();
        let ds = Dataset::new(feats, d, Dataset::sequential_ids(n), None).unwrap();
        let labels: Vec<Label> = (0..n)
            .map(|i| if i % 4 == 0 { Label::Positive } else { Label::Negative })
            .collect();
        let model = train_svm(&ds, &labels, SvmConfig::default(), 4).unwrap();
        let a = evaluate_eer(&model, &ds, &labels).unwrap();
        let b = evaluate_eer(&model.scaled(3.7), &ds, &labels).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn checkpoint_round_trip_and_corruption() {
        let model = LinearModel {
            weights: vec![0.5, -1.25, 3.0],
            bias: -0.125,
            trained_on: 48,
            single_class: None,
        };
        let hash = SvmConfig::default().hash(9);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_checkpoint(&model, &hash, &path).unwrap();
        let (back, h) = load_checkpoint(&path).unwrap();
        assert_eq!(back, model);
        assert_eq!(h, hash);

        let mut bytes = checkpoint_bytes(&model, &hash);
        bytes.truncate(bytes.len() - 5);
        assert!(matches!(
            checkpoint_from_bytes(&bytes, &path),
            Err(Error::Truncated { .. })
        ));
        let mut bytes = checkpoint_bytes(&model, &hash);
        bytes[0] = b'X';
        assert!(matches!(
            checkpoint_from_bytes(&bytes, &path),
            Err(Error::Version { .. })
        ));
    }
}
