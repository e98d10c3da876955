//! C ABI over the `mafr` library.
//!
//! Objects are exposed as opaque handles created by `mafr_*` constructors
//! and released with the matching `*_free` function. Every entry point
//! returns a [`MafrStatus`]; on failure, [`mafr_last_error_message`] gives a
//! description for the calling thread.
//!
//! Matrices are exchanged row-major. Array getters follow one convention:
//! `needed` receives the element count; passing a null `out` only queries
//! the size, and a non-null `out` with `capacity < needed` fails with
//! `MAFR_STATUS_BUFFER_TOO_SMALL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mafr::nalgebra::DMatrix;
use mafr::simulate::ScaleInterpretation;
use mafr::{
    BasisSystem, Error, FpcaOptions, FunctionalDataSet, Interval, LinearDifferentialOperator,
    MafrRotation as Rotation, ObservationGrid, PcaDecomposition, Retention, RotationOrder,
    SimulationSpec, SmoothingPenalty,
};

/// Result code of every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MafrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Numerical = 4,
    Io = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Rotation ordering codes.
pub const MAFR_SMOOTH_FIRST: u32 = 0;
pub const MAFR_ROUGH_FIRST: u32 = 1;

pub struct MafrBasis {
    inner: BasisSystem,
}

pub struct MafrDataset {
    inner: FunctionalDataSet,
}

pub struct MafrPca {
    inner: PcaDecomposition,
}

pub struct MafrRotation {
    inner: Rotation,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(MafrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Parse { .. } => MafrStatus::Parse,
            Error::Parameter(_) | Error::Domain { .. } | Error::UnsupportedDerivative { .. } => {
                MafrStatus::InvalidArgument
            }
            Error::UnsupportedBasis => MafrStatus::InvalidArgument,
            Error::Io(_) => MafrStatus::Io,
            _ => MafrStatus::Numerical,
        };
        Failure(status, format!("[{}] {e}", e.module()))
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(MafrStatus::InvalidArgument, msg.into())
}

fn null(what: &str) -> Failure {
    Failure(MafrStatus::NullPointer, format!("`{what}` is null"))
}

type Outcome = Result<(), Failure>;

fn guard<F: FnOnce() -> Outcome>(f: F) -> MafrStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MafrStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            MafrStatus::Panic
        }
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn string(p: *const c_char, what: &str) -> Result<String, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(String::from)
        .map_err(|_| invalid(format!("`{what}` is not valid UTF-8")))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Outcome {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn copy_out(values: &[f64], out: *mut f64, capacity: usize, needed: *mut usize) -> Outcome {
    if !needed.is_null() {
        *needed = values.len();
    }
    if out.is_null() {
        return if needed.is_null() {
            Err(null("out"))
        } else {
            Ok(())
        };
    }
    if capacity < values.len() {
        return Err(Failure(
            MafrStatus::BufferTooSmall,
            format!("buffer holds {capacity} values, {} needed", values.len()),
        ));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

unsafe fn copy_matrix(
    m: &DMatrix<f64>,
    out: *mut f64,
    capacity: usize,
    needed: *mut usize,
) -> Outcome {
    let row_major: Vec<f64> = m.transpose().iter().copied().collect();
    copy_out(&row_major, out, capacity, needed)
}

unsafe fn set<T: Copy>(out: *mut T, v: T) -> Outcome {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = v;
    Ok(())
}

fn ordering(code: u32) -> Result<RotationOrder, Failure> {
    match code {
        MAFR_SMOOTH_FIRST => Ok(RotationOrder::SmoothFirst),
        MAFR_ROUGH_FIRST => Ok(RotationOrder::RoughFirst),
        other => Err(invalid(format!("unknown ordering code {other}"))),
    }
}

/// Copies the calling thread's last error message (NUL-terminated) into
/// `buf` and returns the buffer size needed, including the NUL. Returns 0
/// when there is no error. A short buffer receives a truncated message.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn mafr_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len);
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n - 1) = 0;
            }
            bytes.len()
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mafr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Fourier basis of `size` functions on `[lo, hi]`; period `hi − lo`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mafr_basis_fourier(
    lo: f64,
    hi: f64,
    size: usize,
    out: *mut *mut MafrBasis,
) -> MafrStatus {
    guard(|| {
        let inner = BasisSystem::fourier(Interval::new(lo, hi)?, size)?;
        emit(out, MafrBasis { inner })
    })
}

/// B-spline basis of `num_basis` functions of `order` with uniform knots.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mafr_basis_bspline(
    lo: f64,
    hi: f64,
    order: usize,
    num_basis: usize,
    out: *mut *mut MafrBasis,
) -> MafrStatus {
    guard(|| {
        let inner = BasisSystem::bspline_uniform(Interval::new(lo, hi)?, order, num_basis)?;
        emit(out, MafrBasis { inner })
    })
}

/// # Safety
/// `basis` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mafr_basis_size(basis: *const MafrBasis, out: *mut usize) -> MafrStatus {
    guard(|| set(out, handle(basis, "basis")?.inner.size()))
}

/// Derivative `derivative` of every basis function at `points`
/// (`num_points × size`, row-major).
///
/// # Safety
/// `points` must hold `num_points` values; see the module docs for `out`.
#[no_mangle]
pub unsafe extern "C" fn mafr_basis_evaluate(
    basis: *const MafrBasis,
    points: *const f64,
    num_points: usize,
    derivative: usize,
    out: *mut f64,
    capacity: usize,
    needed: *mut usize,
) -> MafrStatus {
    guard(|| {
        let b = handle(basis, "basis")?;
        let pts = slice(points, num_points, "points")?;
        copy_matrix(&b.inner.evaluate(pts, derivative)?, out, capacity, needed)
    })
}

/// # Safety
/// `basis` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mafr_basis_free(basis: *mut MafrBasis) {
    if !basis.is_null() {
        drop(Box::from_raw(basis));
    }
}

/// Simulated Fourier dataset on `[0, 1]`. `scale_is_variance` selects
/// whether `exp(−j·scale_decay)` is a variance (non-zero) or a standard
/// deviation (zero).
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mafr_simulate(
    num_curves: usize,
    num_basis: usize,
    scale_decay: f64,
    scale_is_variance: i32,
    seed: u64,
    out: *mut *mut MafrDataset,
) -> MafrStatus {
    guard(|| {
        let spec = SimulationSpec {
            num_curves,
            num_basis,
            scale_decay,
            scale_interpretation: if scale_is_variance != 0 {
                ScaleInterpretation::Variance
            } else {
                ScaleInterpretation::StdDev
            },
            seed,
            ..SimulationSpec::default()
        };
        emit(
            out,
            MafrDataset {
                inner: mafr::simulate(&spec)?,
            },
        )
    })
}

/// Dataset from a `num_curves × size` row-major coefficient matrix.
///
/// # Safety
/// `coefficients` must hold `num_curves × size` values.
#[no_mangle]
pub unsafe extern "C" fn mafr_dataset_from_coefficients(
    basis: *const MafrBasis,
    coefficients: *const f64,
    num_curves: usize,
    out: *mut *mut MafrDataset,
) -> MafrStatus {
    guard(|| {
        let b = &handle(basis, "basis")?.inner;
        let c = slice(coefficients, num_curves * b.size(), "coefficients")?;
        let m = DMatrix::from_row_slice(num_curves, b.size(), c);
        emit(
            out,
            MafrDataset {
                inner: FunctionalDataSet::with_default_ids(b.clone(), m)?,
            },
        )
    })
}

/// Smooths `num_curves × num_points` row-major `values` observed at
/// `points` onto `basis`. With `lambda > 0`, `penalty` (e.g. `"d2"`) is the
/// roughness operator; it may be null when `lambda == 0`.
///
/// # Safety
/// Array arguments must hold the stated number of values; `penalty` must be
/// null or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mafr_fit(
    basis: *const MafrBasis,
    points: *const f64,
    num_points: usize,
    values: *const f64,
    num_curves: usize,
    lambda: f64,
    penalty: *const c_char,
    out: *mut *mut MafrDataset,
) -> MafrStatus {
    guard(|| {
        let b = &handle(basis, "basis")?.inner;
        let pts = slice(points, num_points, "points")?.to_vec();
        let vals = slice(values, num_points * num_curves, "values")?;
        let ids = (0..num_curves).map(|i| i.to_string()).collect();
        let grid = ObservationGrid::new(
            pts,
            DMatrix::from_row_slice(num_curves, num_points, vals),
            ids,
        )?;
        let pen = if lambda != 0.0 {
            let op: LinearDifferentialOperator = if penalty.is_null() {
                LinearDifferentialOperator::second_derivative()
            } else {
                string(penalty, "penalty")?.parse()?
            };
            Some(SmoothingPenalty {
                operator: op,
                lambda,
            })
        } else {
            None
        };
        emit(
            out,
            MafrDataset {
                inner: mafr::fit(&grid, b, pen.as_ref())?,
            },
        )
    })
}

/// # Safety
/// `dataset` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mafr_dataset_num_curves(
    dataset: *const MafrDataset,
    out: *mut usize,
) -> MafrStatus {
    guard(|| set(out, handle(dataset, "dataset")?.inner.num_curves()))
}

/// `num_curves × size` coefficients, row-major.
///
/// # Safety
/// See the module docs.
#[no_mangle]
pub unsafe extern "C" fn mafr_dataset_coefficients(
    dataset: *const MafrDataset,
    out: *mut f64,
    capacity: usize,
    needed: *mut usize,
) -> MafrStatus {
    guard(|| {
        copy_matrix(
            handle(dataset, "dataset")?.inner.coefficients(),
            out,
            capacity,
            needed,
        )
    })
}

/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mafr_dataset_free(dataset: *mut MafrDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Functional PCA. A non-zero `retain_count` keeps that many components;
/// otherwise the smallest count reaching `retain_fraction` of the variance
/// is kept.
///
/// # Safety
/// `dataset` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mafr_fpca(
    dataset: *const MafrDataset,
    retain_count: usize,
    retain_fraction: f64,
    center: i32,
    out: *mut *mut MafrPca,
) -> MafrStatus {
    guard(|| {
        let d = &handle(dataset, "dataset")?.inner;
        let retain = if retain_count > 0 {
            Retention::Count(retain_count)
        } else {
            Retention::Fraction(retain_fraction)
        };
        let options = FpcaOptions {
            retain,
            center: center != 0,
            ..FpcaOptions::default()
        };
        emit(
            out,
            MafrPca {
                inner: mafr::fpca(d, &options)?,
            },
        )
    })
}

/// # Safety
/// `pca` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mafr_pca_num_components(
    pca: *const MafrPca,
    out: *mut usize,
) -> MafrStatus {
    guard(|| set(out, handle(pca, "pca")?.inner.num_components()))
}

/// `num_components × size` component coefficients, row-major.
///
/// # Safety
/// See the module docs.
#[no_mangle]
pub unsafe extern "C" fn mafr_pca_components(
    pca: *const MafrPca,
    out: *mut f64,
    capacity: usize,
    needed: *mut usize,
) -> MafrStatus {
    guard(|| {
        copy_matrix(
            handle(pca, "pca")?.inner.components(),
            out,
            capacity,
            needed,
        )
    })
}

/// `num_curves × num_components` scores, row-major.
///
/// # Safety
/// See the module docs.
#[no_mangle]
pub unsafe extern "C" fn mafr_pca_scores(
    pca: *const MafrPca,
    out: *mut f64,
    capacity: usize,
    needed: *mut usize,
) -> MafrStatus {
    guard(|| copy_matrix(handle(pca, "pca")?.inner.scores(), out, capacity, needed))
}

/// Retained component variances, descending.
///
/// # Safety
/// See the module docs.
#[no_mangle]
pub unsafe extern "C" fn mafr_pca_variances(
    pca: *const MafrPca,
    out: *mut f64,
    capacity: usize,
    needed: *mut usize,
) -> MafrStatus {
    guard(|| {
        copy_out(
            handle(pca, "pca")?.inner.variances().as_slice(),
            out,
            capacity,
            needed,
        )
    })
}

/// # Safety
/// `pca` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mafr_pca_free(pca: *mut MafrPca) {
    if !pca.is_null() {
        drop(Box::from_raw(pca));
    }
}

/// Rotation minimizing the roughness measured by `penalty`
/// (`d1`, `d2`, `harmonic:<period>`, `custom:<json list>`).
///
/// # Safety
/// `pca` must be a live handle; `penalty` a NUL-terminated string; `out`
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mafr_rotate(
    pca: *const MafrPca,
    penalty: *const c_char,
    ordering_code: u32,
    out: *mut *mut MafrRotation,
) -> MafrStatus {
    guard(|| {
        let p = &handle(pca, "pca")?.inner;
        let op: LinearDifferentialOperator = string(penalty, "penalty")?.parse()?;
        emit(
            out,
            MafrRotation {
                inner: mafr::rotate(p, &op, ordering(ordering_code)?)?,
            },
        )
    })
}

/// Joint rotation with one positive weight per retained component.
///
/// # Safety
/// As [`mafr_rotate`]; `weights` must hold `num_weights` values.
#[no_mangle]
pub unsafe extern "C" fn mafr_joint_rotate(
    pca: *const MafrPca,
    penalty: *const c_char,
    weights: *const f64,
    num_weights: usize,
    ordering_code: u32,
    out: *mut *mut MafrRotation,
) -> MafrStatus {
    guard(|| {
        let p = &handle(pca, "pca")?.inner;
        let op: LinearDifferentialOperator = string(penalty, "penalty")?.parse()?;
        let w = slice(weights, num_weights, "weights")?;
        emit(
            out,
            MafrRotation {
                inner: mafr::joint_rotate(p, &op, w, ordering(ordering_code)?)?,
            },
        )
    })
}

/// # Safety
/// `rotation` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mafr_rotation_num_components(
    rotation: *const MafrRotation,
    out: *mut usize,
) -> MafrStatus {
    guard(|| set(out, handle(rotation, "rotation")?.inner.num_components()))
}

/// Orthogonal `num_components × num_components` matrix `U`, row-major.
///
/// # Safety
/// See the module docs.
#[no_mangle]
pub unsafe extern "C" fn mafr_rotation_matrix(
    rotation: *const MafrRotation,
    out: *mut f64,
    capacity: usize,
    needed: *mut usize,
) -> MafrStatus {
    guard(|| {
        copy_matrix(
            handle(rotation, "rotation")?.inner.rotation(),
            out,
            capacity,
            needed,
        )
    })
}

/// `num_components × size` rotated component coefficients, row-major.
///
/// # Safety
/// See the module docs.
#[no_mangle]
pub unsafe extern "C" fn mafr_rotation_components(
    rotation: *const MafrRotation,
    out: *mut f64,
    capacity: usize,
    needed: *mut usize,
) -> MafrStatus {
    guard(|| {
        copy_matrix(
            handle(rotation, "rotation")?.inner.rotated_components(),
            out,
            capacity,
            needed,
        )
    })
}

/// `num_curves × num_components` rotated scores, row-major.
///
/// # Safety
/// See the module docs.
#[no_mangle]
pub unsafe extern "C" fn mafr_rotation_scores(
    rotation: *const MafrRotation,
    out: *mut f64,
    capacity: usize,
    needed: *mut usize,
) -> MafrStatus {
    guard(|| {
        copy_matrix(
            handle(rotation, "rotation")?.inner.rotated_scores(),
            out,
            capacity,
            needed,
        )
    })
}

/// Penalty eigenvalues in rotation order.
///
/// # Safety
/// See the module docs.
#[no_mangle]
pub unsafe extern "C" fn mafr_rotation_penalty_eigenvalues(
    rotation: *const MafrRotation,
    out: *mut f64,
    capacity: usize,
    needed: *mut usize,
) -> MafrStatus {
    guard(|| {
        let r = &handle(rotation, "rotation")?.inner;
        copy_out(r.penalty_eigenvalues().as_slice(), out, capacity, needed)
    })
}

/// Variances of the rotated scores.
///
/// # Safety
/// See the module docs.
#[no_mangle]
pub unsafe extern "C" fn mafr_rotation_variances(
    rotation: *const MafrRotation,
    out: *mut f64,
    capacity: usize,
    needed: *mut usize,
) -> MafrStatus {
    guard(|| {
        let v = handle(rotation, "rotation")?.inner.rotated_variances();
        copy_out(v.as_slice(), out, capacity, needed)
    })
}

/// # Safety
/// `rotation` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mafr_rotation_free(rotation: *mut MafrRotation) {
    if !rotation.is_null() {
        drop(Box::from_raw(rotation));
    }
}
