//! C ABI for the rigid body localization toolkit.
//!
//! Conventions:
//! * every fallible call returns an [`RblStatus`]; on failure a message is
//!   available from [`rbl_last_error`] on the same thread;
//! * matrices are passed column-major, one column per point (D x N);
//! * missing measurements are NaN;
//! * every handle or string returned through an out-pointer is owned by the
//!   caller and released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use nalgebra::DMatrix;
use rbl_core::completion::{complete_edm, CompletionOptions};
use rbl_core::estimators::{rbl_two_stage, TwoStageOptions, Weighting};
use rbl_core::geometry::{Conformation, Pose};
use rbl_core::harness::{parse_config, run_experiment, ResultTable};
use rbl_core::measurement::{AnchorSet, MaskedMatrix, MaskedRangeMatrix, PartialEdm};
use rbl_core::placement::{frame_potential, optimize_placement, PlacementProblem};
use rbl_core::RblError;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RblStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    TooFewObservations = 4,
    Degenerate = 5,
    Config = 6,
    Io = 7,
    Panic = 8,
}

impl From<&RblError> for RblStatus {
    fn from(e: &RblError) -> Self {
        match e {
            RblError::DimensionMismatch { .. } | RblError::UnsupportedDimension(_) => Self::DimensionMismatch,
            RblError::InvalidInput(_) => Self::InvalidArgument,
            RblError::TooFewObservations { .. } => Self::TooFewObservations,
            RblError::Degenerate(_) | RblError::RankDeficient { .. } => Self::Degenerate,
            RblError::Config { .. } | RblError::Parse { .. } => Self::Config,
            RblError::Io { .. } | RblError::Csv { .. } => Self::Io,
        }
    }
}

/// Stage-2 weighting of [`rbl_localize_two_stage`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RblWeighting {
    InverseVariance = 0,
    Uniform = 1,
}

/// Opaque body layout.
pub struct RblConformation(Conformation);

/// Opaque anchor set.
pub struct RblAnchors(AnchorSet);

/// Opaque pose estimate.
pub struct RblPose(Pose);

/// Opaque experiment result table.
pub struct RblResultTable(ResultTable);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

/// Message of the last failed call on this thread, empty when none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rbl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rbl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

enum Fail {
    Null(&'static str),
    Core(RblError),
}

impl From<RblError> for Fail {
    fn from(e: RblError) -> Self {
        Fail::Core(e)
    }
}

/// Run `f`, turning errors and panics into a status plus error message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RblStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RblStatus::Ok,
        Ok(Err(Fail::Null(name))) => {
            set_error(format!("null pointer: {name}"));
            RblStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            RblStatus::from(&e)
        }
        Err(_) => {
            set_error("internal panic");
            RblStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` must be null or point to `len` readable values.
unsafe fn slice<'a, T>(ptr: *const T, len: usize, name: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(Fail::Null(name));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// # Safety
/// `ptr` must be null or point to `len` writable values.
unsafe fn slice_mut<'a, T>(ptr: *mut T, len: usize, name: &'static str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(Fail::Null(name));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

/// # Safety
/// `ptr` must be null or point to a live value of type `T`.
unsafe fn handle<'a, T>(ptr: *const T, name: &'static str) -> Result<&'a T, Fail> {
    ptr.as_ref().ok_or(Fail::Null(name))
}

/// # Safety
/// `out` must be null or writable.
unsafe fn give<T>(out: *mut *mut T, value: T, name: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(name));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// # Safety
/// `ptr` must point to `rows * cols` readable values.
unsafe fn matrix(
    ptr: *const f64,
    rows: usize,
    cols: usize,
    name: &'static str,
) -> Result<DMatrix<f64>, Fail> {
    let len = rows
        .checked_mul(cols)
        .ok_or(RblError::InvalidInput(format!("{name} is too large")))?;
    Ok(DMatrix::from_column_slice(rows, cols, slice(ptr, len, name)?))
}

fn fill(out: &mut [f64], m: &DMatrix<f64>) -> Result<(), Fail> {
    if out.len() != m.len() {
        return Err(RblError::DimensionMismatch {
            expected: m.len(),
            found: out.len(),
        }
        .into());
    }
    out.copy_from_slice(m.as_slice());
    Ok(())
}

/// Body layout from `num_nodes` points of dimension `dim` (2 or 3).
///
/// # Safety
/// `coords` points to `dim * num_nodes` doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rbl_conformation_new(
    dim: usize,
    coords: *const f64,
    num_nodes: usize,
    out: *mut *mut RblConformation,
) -> RblStatus {
    guard(|| {
        let c = Conformation::new(matrix(coords, dim, num_nodes, "coords")?)?;
        give(out, RblConformation(c), "out")
    })
}

/// # Safety
/// `conf` is null or came from [`rbl_conformation_new`] and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rbl_conformation_free(conf: *mut RblConformation) {
    if !conf.is_null() {
        drop(Box::from_raw(conf));
    }
}

/// Anchor set from `num_anchors` points of dimension `dim`.
///
/// # Safety
/// `positions` points to `dim * num_anchors` doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rbl_anchors_new(
    dim: usize,
    positions: *const f64,
    num_anchors: usize,
    out: *mut *mut RblAnchors,
) -> RblStatus {
    guard(|| {
        let a = AnchorSet::new(matrix(positions, dim, num_anchors, "positions")?)?;
        give(out, RblAnchors(a), "out")
    })
}

/// # Safety
/// `anchors` is null or came from [`rbl_anchors_new`] and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rbl_anchors_free(anchors: *mut RblAnchors) {
    if !anchors.is_null() {
        drop(Box::from_raw(anchors));
    }
}

/// Two-stage pose estimate from an M x K range matrix (column-major, one
/// column per node, NaN where missing).
///
/// # Safety
/// Handles are live; `ranges` points to `M * K` doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rbl_localize_two_stage(
    anchors: *const RblAnchors,
    conf: *const RblConformation,
    ranges: *const f64,
    noise_sigma: f64,
    weighting: RblWeighting,
    out: *mut *mut RblPose,
) -> RblStatus {
    guard(|| {
        let anchors = &handle(anchors, "anchors")?.0;
        let conf = &handle(conf, "conf")?.0;
        let values = matrix(ranges, anchors.len(), conf.num_nodes(), "ranges")?;
        let ranges = MaskedRangeMatrix::from_masked(MaskedMatrix::from_nan_sentinel(values)?, noise_sigma)?;
        let options = TwoStageOptions {
            weighting: match weighting {
                RblWeighting::InverseVariance => Weighting::InverseVariance,
                RblWeighting::Uniform => Weighting::Uniform,
            },
        };
        let est = rbl_two_stage(anchors, &ranges, conf, &options)?;
        give(out, RblPose(est.pose), "out")
    })
}

/// Dimension of a pose, 0 for a null handle.
///
/// # Safety
/// `pose` is null or live.
#[no_mangle]
pub unsafe extern "C" fn rbl_pose_dim(pose: *const RblPose) -> usize {
    pose.as_ref().map_or(0, |p| p.0.dim())
}

/// Copy the D x D rotation (column-major) into `out`, which holds `len` doubles.
///
/// # Safety
/// `pose` is live; `out` points to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rbl_pose_rotation(pose: *const RblPose, out: *mut f64, len: usize) -> RblStatus {
    guard(|| fill(slice_mut(out, len, "out")?, handle(pose, "pose")?.0.rotation()))
}

/// Copy the translation (D doubles) into `out`.
///
/// # Safety
/// `pose` is live; `out` points to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rbl_pose_translation(pose: *const RblPose, out: *mut f64, len: usize) -> RblStatus {
    guard(|| {
        let t = handle(pose, "pose")?.0.translation();
        fill(
            slice_mut(out, len, "out")?,
            &DMatrix::from_column_slice(t.len(), 1, t.as_slice()),
        )
    })
}

/// # Safety
/// `pose` is null or came from this library and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rbl_pose_free(pose: *mut RblPose) {
    if !pose.is_null() {
        drop(Box::from_raw(pose));
    }
}

/// Frame potential of `count` unit vectors of dimension `dim`.
///
/// # Safety
/// `directions` points to `dim * count` doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rbl_frame_potential(
    dim: usize,
    directions: *const f64,
    count: usize,
    out: *mut f64,
) -> RblStatus {
    guard(|| {
        let fp = frame_potential(&matrix(directions, dim, count, "directions")?)?;
        *out.as_mut().ok_or(Fail::Null("out"))? = fp;
        Ok(())
    })
}

/// Anchor positions around `center` minimizing the frame potential. Writes
/// `dim * num_anchors` doubles to `positions` and the achieved potential to
/// `potential`.
///
/// # Safety
/// `center` points to `dim` doubles, `positions` to `dim * num_anchors`
/// writable doubles; `potential` is writable.
#[no_mangle]
pub unsafe extern "C" fn rbl_optimize_placement(
    dim: usize,
    num_anchors: usize,
    center: *const f64,
    radius: f64,
    seed: u64,
    positions: *mut f64,
    potential: *mut f64,
) -> RblStatus {
    guard(|| {
        let problem = PlacementProblem {
            num_anchors,
            dim,
            target_center: slice(center, dim, "center")?.to_vec(),
            anchor_radius: radius,
            seed,
            restarts: 20,
        };
        let res = optimize_placement(&problem)?;
        let len = dim
            .checked_mul(num_anchors)
            .ok_or(RblError::InvalidInput("positions is too large".into()))?;
        let out = slice_mut(positions, len, "positions")?;
        fill(out, &res.positions)?;
        *potential.as_mut().ok_or(Fail::Null("potential"))? = res.frame_potential;
        Ok(())
    })
}

/// Complete an n x n distance matrix (NaN where unknown) whose points live in
/// `dim` dimensions; the first `split` points form one block. The completed
/// distances are written to `out` (n * n doubles).
///
/// # Safety
/// `distances` points to `n * n` doubles and `out` to `n * n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rbl_complete_edm(
    distances: *const f64,
    n: usize,
    dim: usize,
    split: usize,
    out: *mut f64,
) -> RblStatus {
    guard(|| {
        let d = matrix(distances, n, n, "distances")?;
        let mask = d.map(|v| !v.is_nan());
        let partial = PartialEdm::from_plain(&d, &mask, dim, split)?;
        let res = complete_edm(&partial, &CompletionOptions::default())?;
        fill(slice_mut(out, n * n, "out")?, &res.distances())
    })
}

/// Run an experiment described by a JSON config string. Relative file paths
/// in the config resolve against the working directory.
///
/// # Safety
/// `config_json` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rbl_run_experiment(
    config_json: *const c_char,
    out: *mut *mut RblResultTable,
) -> RblStatus {
    guard(|| {
        if config_json.is_null() {
            return Err(Fail::Null("config_json"));
        }
        let text = CStr::from_ptr(config_json)
            .to_str()
            .map_err(|_| RblError::InvalidInput("config is not UTF-8".into()))?;
        let cfg = parse_config(text, Path::new("config.json"))?;
        give(out, RblResultTable(run_experiment(&cfg)?), "out")
    })
}

/// Number of rows, 0 for a null handle.
///
/// # Safety
/// `table` is null or live.
#[no_mangle]
pub unsafe extern "C" fn rbl_result_table_rows(table: *const RblResultTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.rows.len())
}

/// The table as CSV text; release with [`rbl_string_free`].
///
/// # Safety
/// `table` is live; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rbl_result_table_csv(
    table: *const RblResultTable,
    out: *mut *mut c_char,
) -> RblStatus {
    guard(|| {
        let csv = handle(table, "table")?.0.to_csv()?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        *out = CString::new(csv).expect("csv has no NUL").into_raw();
        Ok(())
    })
}

/// # Safety
/// `table` is null or came from [`rbl_run_experiment`] and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rbl_result_table_free(table: *mut RblResultTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// # Safety
/// `s` is null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rbl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
