//! Shared domain types: the sample pool, labels, hyperparameters, and
//! dataset-level validation.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::InvalidArgument(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Copy of the listed rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }
}

/// Where the displayable imagery of a sample lives, relative to the dataset
/// directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchRef {
    pub grid_row: u32,
    pub grid_col: u32,
    pub reference: String,
    pub test: String,
}

/// The pool of patch pairs, one feature row per pair.
///
/// Features are kept as `f32` (they are pixel intensities scaled to
/// `[0, 1]` or generator output) and widened to `f64` by every numeric
/// routine. Construction through [`Dataset::new`] validates; [`Dataset::from_raw`]
/// does not, so that [`validate_dataset`] can report on arbitrary inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f32>,
    d: usize,
    ids: Vec<String>,
    patch_refs: Option<Vec<PatchRef>>,
}

impl Dataset {
    pub fn new(
        features: Vec<f32>,
        d: usize,
        ids: Vec<String>,
        patch_refs: Option<Vec<PatchRef>>,
    ) -> Result<Self> {
        let ds = Self::from_raw(features, d, ids, patch_refs);
        let report = validate_dataset(&ds, None);
        if report.is_pass() {
            Ok(ds)
        } else {
            Err(Error::Validation(report))
        }
    }

    pub fn from_raw(
        features: Vec<f32>,
        d: usize,
        ids: Vec<String>,
        patch_refs: Option<Vec<PatchRef>>,
    ) -> Self {
        Self {
            features,
            d,
            ids,
            patch_refs,
        }
    }

    /// Builds a dataset from possibly ragged rows; ragged input is reported
    /// as a dimension mismatch.
    pub fn from_rows(rows: &[Vec<f32>], ids: Vec<String>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let mut report = ValidationReport::default();
        let mut features = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                report.violations.push(Violation::DimensionMismatch {
                    row: i,
                    expected: d,
                    found: r.len(),
                });
            } else {
                features.extend_from_slice(r);
            }
        }
        if !report.is_pass() {
            return Err(Error::Validation(report));
        }
        Self::new(features, d, ids, None)
    }

    /// Identifiers `s0, s1, ...` for anonymous pools.
    pub fn sequential_ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.ids.len()
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn features(&self) -> &[f32] {
        &self.features
    }

    /// Mutable access to the raw feature buffer; callers must re-validate.
    pub fn features_mut(&mut self) -> &mut [f32] {
        &mut self.features
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn ids_mut(&mut self) -> &mut Vec<String> {
        &mut self.ids
    }

    pub fn patch_refs(&self) -> Option<&[PatchRef]> {
        self.patch_refs.as_deref()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// Sub-pool with the listed rows, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            features,
            d: self.d,
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            patch_refs: self
                .patch_refs
                .as_ref()
                .map(|p| idx.iter().map(|&i| p[i].clone()).collect()),
        }
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        if let Some(pos) = self.features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite feature at row {}, column {}",
                pos / self.d.max(1),
                pos % self.d.max(1)
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn from_i64(v: i64) -> Option<Label> {
        match v {
            1 => Some(Label::Positive),
            -1 => Some(Label::Negative),
            _ => None,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Label::Positive => 1,
            Label::Negative => -1,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Positive => f.write_str("+1"),
            Label::Negative => f.write_str("-1"),
        }
    }
}

/// Labels of a pool; `None` marks a sample nobody has labeled.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelVector(pub Vec<Option<Label>>);

impl LabelVector {
    pub fn unknown(n: usize) -> Self {
        Self(vec![None; n])
    }

    pub fn from_labels(labels: &[Label]) -> Self {
        Self(labels.iter().copied().map(Some).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<Label> {
        self.0.get(i).copied().flatten()
    }

    pub fn count(&self, label: Label) -> usize {
        self.0.iter().filter(|l| **l == Some(label)).count()
    }

    pub fn subset(&self, idx: &[usize]) -> LabelVector {
        LabelVector(idx.iter().map(|&i| self.0[i]).collect())
    }
}

/// Weights and budgets of the display model and its surrounding loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// Diversity weight.
    pub alpha: f64,
    /// Ambiguity weight.
    pub beta: f64,
    /// Cardinality (entropy regularizer) weight; must be positive.
    pub gamma: f64,
    /// Weight of the representativity term; 0 masks it out (ablation rows).
    pub rep_weight: f64,
    pub clusters: usize,
    pub display_size: usize,
    pub budget: usize,
    pub eps_fp: f64,
    pub max_fp_iter: usize,
    pub eps_score: f64,
    pub eps_mass: f64,
    /// Log-space step applied to cluster masses between fixed-point sweeps.
    /// `None` picks `gamma / (gamma + alpha)`; `Some(1.0)` is the plain map.
    pub mass_relaxation: Option<f64>,
    /// Solve the display model over unlabeled rows only.
    pub restrict_to_unlabeled: bool,
    pub kmeans_max_iter: usize,
    /// Independent k-means++ runs; the lowest distortion wins.
    pub kmeans_restarts: usize,
    pub svm_lambda: f64,
    /// Class-balanced hinge weights.
    pub svm_balanced: bool,
    pub svm_epochs: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            rep_weight: 1.0,
            clusters: 16,
            display_size: 16,
            budget: 10,
            eps_fp: 1e-8,
            max_fp_iter: 100,
            eps_score: 1e-3,
            eps_mass: 1e-12,
            mass_relaxation: None,
            restrict_to_unlabeled: false,
            kmeans_max_iter: 100,
            kmeans_restarts: 10,
            svm_lambda: 1e-3,
            svm_balanced: true,
            svm_epochs: 200,
            seed: 0,
        }
    }
}

impl Hyperparams {
    /// Checks every field against its domain, independent of the pool.
    pub fn validate(&self) -> Result<()> {
        fn nonneg(field: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::config(field, "must be non-negative and finite"))
            }
        }
        fn positive(field: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(field, "must be positive"))
            }
        }
        fn at_least_one(field: &'static str, v: usize) -> Result<()> {
            if v >= 1 {
                Ok(())
            } else {
                Err(Error::config(field, "must be at least 1"))
            }
        }
        nonneg("alpha", self.alpha)?;
        nonneg("beta", self.beta)?;
        positive("gamma", self.gamma)?;
        nonneg("rep_weight", self.rep_weight)?;
        at_least_one("clusters", self.clusters)?;
        at_least_one("display_size", self.display_size)?;
        at_least_one("budget", self.budget)?;
        positive("eps_fp", self.eps_fp)?;
        at_least_one("max_fp_iter", self.max_fp_iter)?;
        if !(self.eps_score > 0.0 && self.eps_score < 0.5) {
            return Err(Error::config("eps_score", "must lie in (0, 0.5)"));
        }
        positive("eps_mass", self.eps_mass)?;
        if let Some(r) = self.mass_relaxation {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::config("mass_relaxation", "must lie in (0, 1]"));
            }
        }
        at_least_one("kmeans_max_iter", self.kmeans_max_iter)?;
        at_least_one("kmeans_restarts", self.kmeans_restarts)?;
        positive("svm_lambda", self.svm_lambda)?;
        at_least_one("svm_epochs", self.svm_epochs)?;
        Ok(())
    }

    /// Field checks plus the pool-size constraints `B <= n` and `K <= n`.
    pub fn validate_for_pool(&self, n: usize) -> Result<()> {
        self.validate()?;
        if self.display_size > n {
            return Err(Error::config(
                "display_size",
                format!("must not exceed the pool size {n}"),
            ));
        }
        if self.clusters > n {
            return Err(Error::config(
                "clusters",
                format!("must not exceed the pool size {n}"),
            ));
        }
        Ok(())
    }

    /// Mass relaxation step actually used by the solver.
    pub fn effective_relaxation(&self) -> f64 {
        self.mass_relaxation
            .unwrap_or(self.gamma / (self.gamma + self.alpha))
    }
}

/// One broken invariant found by [`validate_dataset`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Empty,
    ZeroDimension,
    DimensionMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },
    NonFinite {
        row: usize,
        col: usize,
    },
    DuplicateId {
        id: String,
        first: usize,
        second: usize,
    },
    PatchRefLengthMismatch {
        expected: usize,
        found: usize,
    },
    LabelLengthMismatch {
        expected: usize,
        found: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => f.write_str("empty pool"),
            Violation::ZeroDimension => f.write_str("feature dimension is zero"),
            Violation::DimensionMismatch {
                row,
                expected,
                found,
            } => write!(
                f,
                "dimension mismatch at row {row}: expected {expected}, found {found}"
            ),
            Violation::NonFinite { row, col } => {
                write!(f, "non-finite value at row {row}, column {col}")
            }
            Violation::DuplicateId { id, first, second } => {
                write!(f, "duplicate id {id:?} at rows {first} and {second}")
            }
            Violation::PatchRefLengthMismatch { expected, found } => write!(
                f,
                "patch reference count mismatch: expected {expected}, found {found}"
            ),
            Violation::LabelLengthMismatch { expected, found } => write!(
                f,
                "label-length mismatch: expected {expected}, found {found}"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_pass(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("pass");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Reports every broken dataset invariant. Never fails; callers decide
/// whether a non-empty report is fatal.
pub fn validate_dataset(dataset: &Dataset, labels: Option<&LabelVector>) -> ValidationReport {
    let mut violations = Vec::new();
    let n = dataset.ids.len();
    let d = dataset.d;
    if n == 0 {
        violations.push(Violation::Empty);
    }
    if d == 0 {
        violations.push(Violation::ZeroDimension);
    } else if dataset.features.len() != n * d {
        // The buffer cannot be split into n rows of width d; report the
        // first row that comes up short.
        let full_rows = dataset.features.len() / d;
        let row = full_rows.min(n.saturating_sub(1));
        violations.push(Violation::DimensionMismatch {
            row,
            expected: d,
            found: dataset.features.len().saturating_sub(row * d).min(d),
        });
    }
    if d > 0 {
        for (pos, v) in dataset.features.iter().enumerate() {
            if !v.is_finite() {
                violations.push(Violation::NonFinite {
                    row: pos / d,
                    col: pos % d,
                });
            }
        }
    }
    let mut seen: HashMap<&str, usize> = HashMap::with_capacity(n);
    for (i, id) in dataset.ids.iter().enumerate() {
        if let Some(&first) = seen.get(id.as_str()) {
            violations.push(Violation::DuplicateId {
                id: id.clone(),
                first,
                second: i,
            });
        } else {
            seen.insert(id, i);
        }
    }
    if let Some(refs) = &dataset.patch_refs {
        if refs.len() != n {
            violations.push(Violation::PatchRefLengthMismatch {
                expected: n,
                found: refs.len(),
            });
        }
    }
    if let Some(labels) = labels {
        if labels.len() != n {
            violations.push(Violation::LabelLengthMismatch {
                expected: n,
                found: labels.len(),
            });
        }
    }
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize, d: usize) -> Dataset {
        let features = (0..n * d).map(|v| v as f32 / (n * d) as f32).collect();
        Dataset::new(features, d, Dataset::sequential_ids(n), None).unwrap()
    }

    #[test]
    fn well_formed_pool_passes() {
        let ds = grid(4, 3);
        assert!(validate_dataset(&ds, None).is_pass());
    }

    #[test]
    fn non_finite_entry_is_located() {
        let mut ds = grid(4, 3);
        ds.features_mut()[2 * 3 + 1] = f32::NAN;
        let report = validate_dataset(&ds, None);
        assert_eq!(
            report.violations,
            vec![Violation::NonFinite { row: 2, col: 1 }]
        );
        assert!(report.to_string().contains("row 2, column 1"));
    }

    #[test]
    fn short_label_vector_is_reported() {
        let ds = grid(4, 3);
        let labels = LabelVector::unknown(3);
        let report = validate_dataset(&ds, Some(&labels));
        assert_eq!(report.violations.len(), 1);
        assert!(report.to_string().contains("label-length mismatch"));
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let rows = vec![vec![0.0, 1.0], vec![0.5], vec![1.0, 1.0]];
        match Dataset::from_rows(&rows, Dataset::sequential_ids(3)) {
            Err(Error::Validation(r)) => assert_eq!(
                r.violations,
                vec![Violation::DimensionMismatch {
                    row: 1,
                    expected: 2,
                    found: 1
                }]
            ),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn hyperparams_reject_zero_gamma() {
        let hp = Hyperparams {
            gamma: 0.0,
            ..Hyperparams::default()
        };
        assert_eq!(hp.validate().unwrap_err().to_string(), "gamma must be positive");
    }

    #[test]
    fn hyperparams_bound_display_by_pool() {
        let hp = Hyperparams::default();
        assert!(hp.validate_for_pool(16).is_ok());
        assert!(hp.validate_for_pool(15).is_err());
    }

    #[derive(Debug, Clone)]
    enum Mutation {
        NonFinite(usize),
        DropLabel,
        DuplicateId(usize, usize),
    }

    proptest! {
        #[test]
        fn mutated_pool_is_rejected_with_matching_category(
            n in 2usize..12,
            d in 1usize..6,
            pick in any::<prop::sample::Index>(),
            other in any::<prop::sample::Index>(),
            which in 0u8..3,
            inf in any::<bool>(),
        ) {
            let mut ds = grid(n, d);
            let mut labels = LabelVector::unknown(n);
            let mutation = match which {
                0 => Mutation::NonFinite(pick.index(n * d)),
                1 => Mutation::DropLabel,
                _ => {
                    let a = pick.index(n);
                    let mut b = other.index(n);
                    if b == a { b = (a + 1) % n; }
                    Mutation::DuplicateId(a, b)
                }
            };
            match mutation {
                Mutation::NonFinite(pos) => {
                    ds.features_mut()[pos] = if inf { f32::INFINITY } else { f32::NAN };
                    let r = validate_dataset(&ds, Some(&labels));
                    prop_assert_eq!(r.violations, vec![Violation::NonFinite { row: pos / d, col: pos % d }]);
                }
                Mutation::DropLabel => {
                    labels.0.pop();
                    let r = validate_dataset(&ds, Some(&labels));
                    prop_assert_eq!(r.violations, vec![Violation::LabelLengthMismatch { expected: n, found: n - 1 }]);
                }
                Mutation::DuplicateId(a, b) => {
                    let id = ds.ids()[a].clone();
                    ds.ids_mut()[b] = id;
                    let r = validate_dataset(&ds, Some(&labels));
                    prop_assert_eq!(r.violations.len(), 1);
                    let is_duplicate = matches!(r.violations[0], Violation::DuplicateId { .. });
                    prop_assert!(is_duplicate);
                }
            }
        }
    }
}
