//! C interface to `frugal-core`.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free` function. Every call returns a [`FrugalStatus`]; on
//! failure [`frugal_last_error`] describes the cause for the calling
//! thread. Panics never cross the boundary; they surface as
//! `FRUGAL_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use frugal_core::classifier::scoring_matrix;
use frugal_core::datasets::{generate_synthetic, load_dataset, SyntheticSpec};
use frugal_core::session::{sampling_rate, OracleBinding};
use frugal_core::{
    init_session, solve, Dataset, DistanceMatrix, Error, ErrorKind, Hyperparams,
    IndicatorMatrix, Label, LabelVector, Matrix, SamplerKind, Session,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrugalStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad argument or hyperparameter.
    Config = 2,
    /// Unreadable or invalid data.
    Data = 3,
    Numeric = 4,
    /// The call does not fit the session state (e.g. it has finished).
    State = 5,
    /// An output buffer is too small; the needed length was written.
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrugalStrategy {
    Proposed = 0,
    Maxmin = 1,
    Uncertainty = 2,
    Random = 3,
}

impl From<FrugalStrategy> for SamplerKind {
    fn from(s: FrugalStrategy) -> Self {
        match s {
            FrugalStrategy::Proposed => SamplerKind::Proposed,
            FrugalStrategy::Maxmin => SamplerKind::Maxmin,
            FrugalStrategy::Uncertainty => SamplerKind::Uncertainty,
            FrugalStrategy::Random => SamplerKind::Random,
        }
    }
}

/// The tunable subset of the hyperparameters. Fields not listed keep their
/// library defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrugalHyperparams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub clusters: usize,
    pub display_size: usize,
    pub budget: usize,
    pub eps_fp: f64,
    pub max_fp_iter: usize,
    pub seed: u64,
}

impl From<&FrugalHyperparams> for Hyperparams {
    fn from(h: &FrugalHyperparams) -> Self {
        Hyperparams {
            alpha: h.alpha,
            beta: h.beta,
            gamma: h.gamma,
            clusters: h.clusters,
            display_size: h.display_size,
            budget: h.budget,
            eps_fp: h.eps_fp,
            max_fp_iter: h.max_fp_iter,
            seed: h.seed,
            ..Hyperparams::default()
        }
    }
}

/// A feature pool with optional ground-truth labels.
pub struct FrugalDataset {
    dataset: Arc<Dataset>,
    labels: Option<LabelVector>,
}

pub struct FrugalSession {
    session: Session,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Fail(FrugalStatus);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        set_error(e.to_string());
        Fail(match e.kind() {
            ErrorKind::Config => FrugalStatus::Config,
            ErrorKind::Data => FrugalStatus::Data,
            ErrorKind::Numeric => FrugalStatus::Numeric,
            ErrorKind::State => FrugalStatus::State,
        })
    }
}

fn fail<T>(status: FrugalStatus, msg: impl Into<String>) -> Result<T, Fail> {
    set_error(msg);
    Err(Fail(status))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FrugalStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FrugalStatus::Ok,
        Ok(Err(Fail(status))) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            FrugalStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    match p.as_ref() {
        Some(r) => Ok(r),
        None => fail(FrugalStatus::NullPointer, format!("{what} is null")),
    }
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    match p.as_mut() {
        Some(r) => Ok(r),
        None => fail(FrugalStatus::NullPointer, format!("{what} is null")),
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return fail(FrugalStatus::NullPointer, format!("{what} is null"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return fail(FrugalStatus::NullPointer, format!("{what} is null"));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn label_code(l: Option<Label>) -> i8 {
    l.map_or(0, Label::as_i8)
}

fn parse_label(code: i8, at: usize) -> Result<Option<Label>, Fail> {
    match code {
        0 => Ok(None),
        1 => Ok(Some(Label::Positive)),
        -1 => Ok(Some(Label::Negative)),
        other => fail(
            FrugalStatus::Config,
            format!("label {other} at position {at}; expected -1, 0 or 1"),
        ),
    }
}

fn boxed<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    let out = unsafe { deref_mut(out, "output handle")? };
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn frugal_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn frugal_hyperparams_default() -> FrugalHyperparams {
    let h = Hyperparams::default();
    FrugalHyperparams {
        alpha: h.alpha,
        beta: h.beta,
        gamma: h.gamma,
        clusters: h.clusters,
        display_size: h.display_size,
        budget: h.budget,
        eps_fp: h.eps_fp,
        max_fp_iter: h.max_fp_iter,
        seed: h.seed,
    }
}

/// `t * b / n_train` as a percentage.
///
/// # Safety
/// `out` must be null or point to writable memory for one `double`.
#[no_mangle]
pub unsafe extern "C" fn frugal_sampling_rate(
    t: usize,
    b: usize,
    n_train: usize,
    out: *mut f64,
) -> FrugalStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        if n_train == 0 {
            return fail(FrugalStatus::Config, "n_train must be positive");
        }
        *out = sampling_rate(t, b, n_train);
        Ok(())
    })
}

/// Synthetic two-class pool with the library's default shape parameters.
///
/// # Safety
/// `out` must be null or point to writable memory for one handle.
#[no_mangle]
pub unsafe extern "C" fn frugal_dataset_synthetic(
    n: usize,
    d: usize,
    positive_rate: f64,
    seed: u64,
    out: *mut *mut FrugalDataset,
) -> FrugalStatus {
    guard(|| {
        let spec = SyntheticSpec {
            n,
            d,
            positive_rate,
            seed,
            ..SyntheticSpec::default()
        };
        let (dataset, labels) = generate_synthetic(&spec)?;
        boxed(
            out,
            FrugalDataset {
                dataset: Arc::new(dataset),
                labels: Some(labels),
            },
        )
    })
}

/// Loads a dataset directory written by the `generate` or `extract` commands.
///
/// # Safety
/// `path` must be null or a NUL-terminated string; `out` must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn frugal_dataset_load(
    path: *const c_char,
    out: *mut *mut FrugalDataset,
) -> FrugalStatus {
    guard(|| {
        if path.is_null() {
            return fail(FrugalStatus::NullPointer, "path is null");
        }
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            return fail(FrugalStatus::Config, "path is not valid UTF-8");
        };
        let (dataset, labels, _) = load_dataset(Path::new(path))?;
        let labels = (labels.0.iter().any(Option::is_some)).then_some(labels);
        boxed(
            out,
            FrugalDataset {
                dataset: Arc::new(dataset),
                labels,
            },
        )
    })
}

/// Builds a pool from `n * d` row-major features. `labels` may be null; if
/// given it holds `n` codes (1, -1, or 0 for unknown).
///
/// # Safety
/// `features` must hold `n * d` floats and `labels`, when not null, `n`
/// bytes.
#[no_mangle]
pub unsafe extern "C" fn frugal_dataset_from_features(
    features: *const f32,
    n: usize,
    d: usize,
    labels: *const i8,
    out: *mut *mut FrugalDataset,
) -> FrugalStatus {
    guard(|| {
        let Some(len) = n.checked_mul(d) else {
            return fail(FrugalStatus::Config, "n * d overflows");
        };
        let values = slice(features, len, "features")?.to_vec();
        let dataset = Dataset::new(values, d, Dataset::sequential_ids(n), None)?;
        let labels = if labels.is_null() {
            None
        } else {
            let codes = slice(labels, n, "labels")?;
            let parsed = codes
                .iter()
                .enumerate()
                .map(|(i, &c)| parse_label(c, i))
                .collect::<Result<Vec<_>, _>>()?;
            Some(LabelVector(parsed))
        };
        boxed(
            out,
            FrugalDataset {
                dataset: Arc::new(dataset),
                labels,
            },
        )
    })
}

/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn frugal_dataset_shape(
    ds: *const FrugalDataset,
    n: *mut usize,
    d: *mut usize,
) -> FrugalStatus {
    guard(|| {
        let ds = deref(ds, "dataset")?;
        *deref_mut(n, "n")? = ds.dataset.n();
        *deref_mut(d, "d")? = ds.dataset.d();
        Ok(())
    })
}

/// Copies the `n` label codes into `out` (0 where unknown, or everywhere if
/// the dataset has no labels).
///
/// # Safety
/// `out` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn frugal_dataset_labels(
    ds: *const FrugalDataset,
    out: *mut i8,
    len: usize,
) -> FrugalStatus {
    guard(|| {
        let ds = deref(ds, "dataset")?;
        let n = ds.dataset.n();
        if len < n {
            return fail(
                FrugalStatus::BufferTooSmall,
                format!("label buffer holds {len}, need {n}"),
            );
        }
        let out = slice_mut(out, n, "out")?;
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = ds.labels.as_ref().map_or(0, |l| label_code(l.0[i]));
        }
        Ok(())
    })
}

/// # Safety
/// `ds` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn frugal_dataset_free(ds: *mut FrugalDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Starts a session over `ds`. With `simulated` set, the dataset's labels
/// answer every display and must be complete. The session keeps its own
/// reference to the pool, so `ds` may be freed afterwards.
///
/// # Safety
/// All pointers must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn frugal_session_new(
    ds: *const FrugalDataset,
    hp: *const FrugalHyperparams,
    strategy: FrugalStrategy,
    simulated: bool,
    out: *mut *mut FrugalSession,
) -> FrugalStatus {
    guard(|| {
        let ds = deref(ds, "dataset")?;
        let hp = Hyperparams::from(deref(hp, "hyperparams")?);
        let oracle = if simulated {
            match &ds.labels {
                Some(l) if l.0.iter().all(Option::is_some) => OracleBinding::Simulated(l.clone()),
                _ => {
                    return fail(
                        FrugalStatus::Config,
                        "a simulated session needs a label for every sample",
                    )
                }
            }
        } else {
            OracleBinding::Human
        };
        let session = init_session(ds.dataset.clone(), hp, strategy.into(), oracle, None)?;
        boxed(out, FrugalSession { session })
    })
}

/// Writes the indices of the display awaiting labels. `len` receives the
/// display size; if `cap` is smaller, nothing else is written and
/// `FRUGAL_STATUS_BUFFER_TOO_SMALL` is returned.
///
/// # Safety
/// `out` must hold `cap` entries.
#[no_mangle]
pub unsafe extern "C" fn frugal_session_pending(
    s: *const FrugalSession,
    out: *mut usize,
    cap: usize,
    len: *mut usize,
) -> FrugalStatus {
    guard(|| {
        let s = deref(s, "session")?;
        let len = deref_mut(len, "len")?;
        let pending = s.session.pending_display();
        *len = pending.len();
        if cap < pending.len() {
            return fail(
                FrugalStatus::BufferTooSmall,
                format!("display has {} entries, buffer holds {cap}", pending.len()),
            );
        }
        slice_mut(out, pending.len(), "out")?.copy_from_slice(pending);
        Ok(())
    })
}

/// Labels the pending display: `labels[j]` (1 or -1) answers `indices[j]`.
/// On error the session is unchanged.
///
/// # Safety
/// `indices` and `labels` must hold `len` entries each.
#[no_mangle]
pub unsafe extern "C" fn frugal_session_submit(
    s: *mut FrugalSession,
    indices: *const usize,
    labels: *const i8,
    len: usize,
) -> FrugalStatus {
    guard(|| {
        let s = deref_mut(s, "session")?;
        let indices = slice(indices, len, "indices")?;
        let codes = slice(labels, len, "labels")?;
        let mut answers = Vec::with_capacity(len);
        for (j, (&i, &c)) in indices.iter().zip(codes).enumerate() {
            match parse_label(c, j)? {
                Some(l) => answers.push((i, l)),
                None => return fail(FrugalStatus::Config, format!("no label at position {j}")),
            }
        }
        s.session = s.session.submit_labels(&answers)?;
        Ok(())
    })
}

/// Answers the pending display from the simulated oracle.
///
/// # Safety
/// `s` must be null or a live session handle.
#[no_mangle]
pub unsafe extern "C" fn frugal_session_step(s: *mut FrugalSession) -> FrugalStatus {
    guard(|| {
        let s = deref_mut(s, "session")?;
        let answers = s.session.oracle_answers()?;
        s.session = s.session.submit_labels(&answers)?;
        Ok(())
    })
}

/// Number of displays labeled so far.
///
/// # Safety
/// Pointers must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn frugal_session_iteration(
    s: *const FrugalSession,
    out: *mut usize,
) -> FrugalStatus {
    guard(|| {
        *deref_mut(out, "out")? = deref(s, "session")?.session.state().t;
        Ok(())
    })
}

/// # Safety
/// Pointers must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn frugal_session_finished(
    s: *const FrugalSession,
    out: *mut bool,
) -> FrugalStatus {
    guard(|| {
        *deref_mut(out, "out")? = deref(s, "session")?.session.is_finished();
        Ok(())
    })
}

/// Current classifier scores for the whole pool, or
/// `FRUGAL_STATUS_STATE` before the first display is labeled.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn frugal_session_scores(
    s: *const FrugalSession,
    out: *mut f64,
    len: usize,
) -> FrugalStatus {
    guard(|| {
        let s = deref(s, "session")?;
        let Some(scores) = s.session.current_fhat() else {
            return fail(FrugalStatus::State, "no model has been trained yet");
        };
        if len < scores.len() {
            return fail(
                FrugalStatus::BufferTooSmall,
                format!("score buffer holds {len}, need {}", scores.len()),
            );
        }
        slice_mut(out, scores.len(), "out")?.copy_from_slice(&scores);
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn frugal_session_free(s: *mut FrugalSession) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Minimizes the display objective for `n` samples in `k` clusters.
/// `assignment` holds each sample's cluster, `dist` the row-major `n * k`
/// squared distances, `fhat` the classifier probabilities. `mu` receives
/// the `n` memberships; `tau` and `converged` may be null.
///
/// # Safety
/// Buffers must match the sizes above.
#[no_mangle]
pub unsafe extern "C" fn frugal_solve_membership(
    n: usize,
    k: usize,
    assignment: *const usize,
    dist: *const f64,
    fhat: *const f64,
    hp: *const FrugalHyperparams,
    seed: u64,
    mu: *mut f64,
    tau: *mut usize,
    converged: *mut bool,
) -> FrugalStatus {
    guard(|| {
        let Some(cells) = n.checked_mul(k) else {
            return fail(FrugalStatus::Config, "n * k overflows");
        };
        let hp = Hyperparams::from(deref(hp, "hyperparams")?);
        let c = IndicatorMatrix::from_assignment(slice(assignment, n, "assignment")?, k)?;
        let d = DistanceMatrix::from_matrix(Matrix::from_vec(
            n,
            k,
            slice(dist, cells, "dist")?.to_vec(),
        )?)?;
        let f = scoring_matrix(slice(fhat, n, "fhat")?);
        let out = slice_mut(mu, n, "mu")?;
        let (membership, _) = solve(&c, &d, &f, &hp, seed)?;
        out.copy_from_slice(&membership.mu);
        if let Some(t) = tau.as_mut() {
            *t = membership.tau;
        }
        if let Some(cv) = converged.as_mut() {
            *cv = membership.converged;
        }
        Ok(())
    })
}
