//! C ABI over the `adsel` library.
//!
//! Datasets and fitted models are opaque handles freed with their `_free`
//! function. Every fallible call returns an [`AdselStatus`]; on failure the
//! message is available from [`adsel_last_error`] on the same thread.
//! Matrices are row-major `double` buffers. Feature matrices are laid out
//! samples by features, label and mask matrices samples by labels.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use adsel::graph::Sigma;
use adsel::metrics;
use adsel::{Ablation, Dataset, FeatureMatrix, Hyperparams, LabelMatrix, MaskMatrix, ModelState, Normalization};
use ndarray::ArrayView2;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdselStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Inconsistent dataset (shapes, mask, non-finite values).
    InvalidData = 3,
    /// The solver failed numerically.
    SolverFailed = 4,
    /// A metric or test could not be computed on the given inputs.
    MetricFailed = 5,
    /// The output buffer is shorter than the required length.
    BufferTooSmall = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdselAblation {
    Full = 0,
    NoDualSe = 1,
    NoGfrl = 2,
    NoGmr = 3,
}

impl From<AdselAblation> for Ablation {
    fn from(a: AdselAblation) -> Self {
        match a {
            AdselAblation::Full => Ablation::Full,
            AdselAblation::NoDualSe => Ablation::NoDualSe,
            AdselAblation::NoGfrl => Ablation::NoGfrl,
            AdselAblation::NoGmr => Ablation::NoGmr,
        }
    }
}

/// Solver settings. Start from [`adsel_hyperparams_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AdselHyperparams {
    /// Label reconstruction weight.
    pub lambda: f64,
    /// Row sparsity of `U`.
    pub alpha: f64,
    /// Manifold weight.
    pub beta: f64,
    /// Redundancy weight.
    pub mu: f64,
    /// Row sparsity of `W`.
    pub delta: f64,
    /// Neighbours in the sample graph.
    pub q: usize,
    /// Heat-kernel width; zero or negative selects the automatic width.
    pub sigma: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    pub ablation: AdselAblation,
    /// Shrink factor steps that would raise the objective.
    pub safeguard: bool,
}

/// The four evaluation metrics.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct AdselMetrics {
    pub hamming_loss: f64,
    pub ranking_loss: f64,
    pub coverage: f64,
    pub average_precision: f64,
    /// Samples with all or no relevant labels, left out of the ranking metrics.
    pub skipped_samples: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct AdselFriedman {
    pub chi_square: f64,
    /// Iman-Davenport statistic.
    pub f_f: f64,
    /// True when `f_f` exceeds the supplied critical value.
    pub reject: bool,
}

/// Opaque dataset handle.
pub struct AdselDataset(Dataset);

/// Opaque fitted model handle.
pub struct AdselModel {
    state: ModelState,
    ranking: adsel::FeatureRanking,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: AdselStatus, msg: impl Into<String>) -> AdselStatus {
    set_error(msg);
    status
}

/// Runs `f`, turning panics into [`AdselStatus::Panic`].
fn guarded(f: impl FnOnce() -> AdselStatus) -> AdselStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(AdselStatus::Panic, msg)
        }
    }
}

/// Borrow `rows * cols` doubles as a matrix, or `None` for a null pointer.
///
/// # Safety
/// A non-null `ptr` must point to `rows * cols` readable doubles.
unsafe fn matrix<'a>(ptr: *const f64, rows: usize, cols: usize) -> Option<ArrayView2<'a, f64>> {
    if ptr.is_null() {
        return None;
    }
    let len = rows.checked_mul(cols)?;
    let slice = std::slice::from_raw_parts(ptr, len);
    ArrayView2::from_shape((rows, cols), slice).ok()
}

/// Copy `src` into a caller buffer of `len` elements.
///
/// # Safety
/// A non-null `out` must point to `len` writable elements.
unsafe fn write_out<T: Copy>(src: &[T], out: *mut T, len: usize) -> AdselStatus {
    if out.is_null() {
        return fail(AdselStatus::NullPointer, "output buffer is null");
    }
    if len < src.len() {
        return fail(
            AdselStatus::BufferTooSmall,
            format!("buffer holds {len} elements, {} needed", src.len()),
        );
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    AdselStatus::Ok
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn adsel_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library defaults: all weights 1, `q = 5`, automatic width, 200
/// iterations, tolerance 1e-6, seed 0, full model, safeguard on.
#[no_mangle]
pub extern "C" fn adsel_hyperparams_default() -> AdselHyperparams {
    let hp = Hyperparams::default();
    AdselHyperparams {
        lambda: hp.lambda,
        alpha: hp.alpha,
        beta: hp.beta,
        mu: hp.mu,
        delta: hp.delta,
        q: hp.q,
        sigma: 0.0,
        max_iter: hp.max_iter,
        tol: hp.tol,
        seed: hp.seed,
        ablation: AdselAblation::Full,
        safeguard: hp.safeguard,
    }
}

impl From<&AdselHyperparams> for Hyperparams {
    fn from(h: &AdselHyperparams) -> Self {
        Hyperparams {
            lambda: h.lambda,
            alpha: h.alpha,
            beta: h.beta,
            mu: h.mu,
            delta: h.delta,
            q: h.q,
            sigma: if h.sigma > 0.0 { Sigma::Fixed(h.sigma) } else { Sigma::Auto },
            max_iter: h.max_iter,
            tol: h.tol,
            seed: h.seed,
            ablation: h.ablation.into(),
            safeguard: h.safeguard,
            ..Hyperparams::default()
        }
    }
}

/// Builds a validated dataset from copies of the buffers.
///
/// `features` is `n_samples x n_features`, `labels` and `mask` are
/// `n_samples x n_labels`. `mask` may be null (every label observed);
/// otherwise 1 marks an observed label and 0 a missing one, whose label
/// entry must be 0. With `zscore` set, features are standardised.
///
/// # Safety
/// Non-null pointers must reference buffers of the stated sizes; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn adsel_dataset_new(
    features: *const f64,
    n_samples: usize,
    n_features: usize,
    labels: *const f64,
    n_labels: usize,
    mask: *const f64,
    zscore: bool,
    out: *mut *mut AdselDataset,
) -> AdselStatus {
    guarded(|| {
        if out.is_null() {
            return fail(AdselStatus::NullPointer, "out is null");
        }
        let (Some(x), Some(y)) = (matrix(features, n_samples, n_features), matrix(labels, n_samples, n_labels)) else {
            return fail(AdselStatus::NullPointer, "features or labels is null");
        };
        let mask = if mask.is_null() {
            None
        } else {
            match matrix(mask, n_samples, n_labels) {
                Some(m) => Some(MaskMatrix::new(m.to_owned())),
                None => return fail(AdselStatus::InvalidArgument, "mask size overflows"),
            }
        };
        let fm = match FeatureMatrix::new(x.t().to_owned(), None) {
            Ok(f) => f,
            Err(e) => return fail(AdselStatus::InvalidData, e.to_string()),
        };
        match Dataset::new(fm, LabelMatrix::new(y.to_owned()), mask) {
            Ok(mut ds) => {
                if zscore {
                    ds.features = adsel::normalize_features(&ds.features, Normalization::Zscore);
                }
                *out = Box::into_raw(Box::new(AdselDataset(ds)));
                AdselStatus::Ok
            }
            Err(e) => fail(AdselStatus::InvalidData, e.to_string()),
        }
    })
}

/// # Safety
/// `ds` must be null or a handle from [`adsel_dataset_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn adsel_dataset_free(ds: *mut AdselDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Fits the model and ranks features by the row norms of `W`.
///
/// # Safety
/// `ds` must be a live dataset handle, `hp` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn adsel_fit(
    ds: *const AdselDataset,
    hp: *const AdselHyperparams,
    out: *mut *mut AdselModel,
) -> AdselStatus {
    guarded(|| {
        if ds.is_null() || hp.is_null() || out.is_null() {
            return fail(AdselStatus::NullPointer, "dataset, hyperparams or out is null");
        }
        let hp = Hyperparams::from(&*hp);
        if let Err(e) = hp.validate() {
            return fail(AdselStatus::InvalidArgument, e.to_string());
        }
        match adsel::fit(&(*ds).0, &hp) {
            Ok(state) => {
                let ranking = adsel::rank_features(state.w.view());
                *out = Box::into_raw(Box::new(AdselModel { state, ranking }));
                AdselStatus::Ok
            }
            Err(e) => {
                let err = adsel::Error::from(e);
                let status = if err.is_input_error() {
                    AdselStatus::InvalidArgument
                } else {
                    AdselStatus::SolverFailed
                };
                fail(status, err.to_string())
            }
        }
    })
}

/// # Safety
/// `model` must be null or a handle from [`adsel_fit`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn adsel_model_free(model: *mut AdselModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of features (length of the ranking and score arrays); 0 for null.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn adsel_model_n_features(model: *const AdselModel) -> usize {
    model.as_ref().map_or(0, |m| m.state.w.nrows())
}

/// Number of labels (columns of `W`); 0 for null.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn adsel_model_n_labels(model: *const AdselModel) -> usize {
    model.as_ref().map_or(0, |m| m.state.w.ncols())
}

/// Iterations run, which is also the length of the objective trace.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn adsel_model_iterations(model: *const AdselModel) -> usize {
    model.as_ref().map_or(0, |m| m.state.objective_trace.len())
}

/// Objective at the starting point, before any update.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn adsel_model_initial_objective(model: *const AdselModel) -> f64 {
    model.as_ref().map_or(f64::NAN, |m| m.state.initial_objective)
}

/// Feature indices, most important first.
///
/// # Safety
/// `model` must be a live model handle; `out` must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn adsel_model_ranking(model: *const AdselModel, out: *mut usize, len: usize) -> AdselStatus {
    match model.as_ref() {
        Some(m) => write_out(&m.ranking.order, out, len),
        None => fail(AdselStatus::NullPointer, "model is null"),
    }
}

/// Importance score of each feature, indexed by feature.
///
/// # Safety
/// `model` must be a live model handle; `out` must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn adsel_model_scores(model: *const AdselModel, out: *mut f64, len: usize) -> AdselStatus {
    match model.as_ref() {
        Some(m) => write_out(&m.ranking.scores, out, len),
        None => fail(AdselStatus::NullPointer, "model is null"),
    }
}

/// Objective after each iteration.
///
/// # Safety
/// `model` must be a live model handle; `out` must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn adsel_model_trace(model: *const AdselModel, out: *mut f64, len: usize) -> AdselStatus {
    match model.as_ref() {
        Some(m) => write_out(&m.state.objective_trace, out, len),
        None => fail(AdselStatus::NullPointer, "model is null"),
    }
}

/// The projection `W`, `n_features x n_labels` row-major.
///
/// # Safety
/// `model` must be a live model handle; `out` must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn adsel_model_weights(model: *const AdselModel, out: *mut f64, len: usize) -> AdselStatus {
    match model.as_ref() {
        Some(m) => {
            let w: Vec<f64> = m.state.w.iter().copied().collect();
            write_out(&w, out, len)
        }
        None => fail(AdselStatus::NullPointer, "model is null"),
    }
}

/// Scores predictions against ground truth. All three matrices are
/// `n_samples x n_labels`; `binary` holds 0/1 predictions and `confidence`
/// the per-label scores used for ranking.
///
/// # Safety
/// Pointers must reference buffers of the stated sizes; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn adsel_evaluate(
    binary: *const f64,
    confidence: *const f64,
    truth: *const f64,
    n_samples: usize,
    n_labels: usize,
    out: *mut AdselMetrics,
) -> AdselStatus {
    guarded(|| {
        let (Some(b), Some(c), Some(t)) = (
            matrix(binary, n_samples, n_labels),
            matrix(confidence, n_samples, n_labels),
            matrix(truth, n_samples, n_labels),
        ) else {
            return fail(AdselStatus::NullPointer, "input matrix is null");
        };
        if out.is_null() {
            return fail(AdselStatus::NullPointer, "out is null");
        }
        match metrics::evaluate(b, c, t) {
            Ok(r) => {
                *out = AdselMetrics {
                    hamming_loss: r.hamming_loss,
                    ranking_loss: r.ranking_loss,
                    coverage: r.coverage,
                    average_precision: r.average_precision,
                    skipped_samples: r.skipped_samples,
                };
                AdselStatus::Ok
            }
            Err(e) => fail(AdselStatus::MetricFailed, e.to_string()),
        }
    })
}

/// Friedman test with the Iman-Davenport correction on a `methods x
/// settings` score table. `mean_ranks` may be null; otherwise it receives
/// one mean rank per method (1 = best).
///
/// # Safety
/// `table` must hold `methods * settings` doubles, a non-null `mean_ranks`
/// `methods` doubles, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adsel_friedman(
    table: *const f64,
    methods: usize,
    settings: usize,
    higher_is_better: bool,
    critical_value: f64,
    out: *mut AdselFriedman,
    mean_ranks: *mut f64,
) -> AdselStatus {
    guarded(|| {
        let Some(t) = matrix(table, methods, settings) else {
            return fail(AdselStatus::NullPointer, "table is null");
        };
        if out.is_null() {
            return fail(AdselStatus::NullPointer, "out is null");
        }
        match metrics::friedman_test(t, higher_is_better, critical_value) {
            Ok(r) => {
                if !mean_ranks.is_null() {
                    std::ptr::copy_nonoverlapping(r.mean_ranks.as_ptr(), mean_ranks, r.mean_ranks.len());
                }
                *out = AdselFriedman {
                    chi_square: r.chi_square,
                    f_f: r.f_f,
                    reject: r.reject,
                };
                AdselStatus::Ok
            }
            Err(e) => fail(AdselStatus::MetricFailed, e.to_string()),
        }
    })
}
