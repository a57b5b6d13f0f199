//! C ABI for the demoforge pipeline.
//!
//! Conventions:
//! - Opaque handles (`DfEpisode`, `DfManifest`) are created by `df_*_load`
//!   and released by the matching `df_*_free`; handles are not thread-safe.
//! - Every fallible call returns a [`DfStatus`]; on failure a description is
//!   available from `df_last_error_message` (free it with `df_string_free`).
//! - Returned strings are NUL-terminated copies owned by the caller.
//!
//! The generated header lives at `include/demoforge.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use demoforge::episode::Episode;
use demoforge::error::Error;
use demoforge::manifest::DatasetManifest;
use demoforge::metrics::{self, NormalizationScope, NormalizationStats};
use demoforge::pipeline::stages::{run_stage, Workdir};
use demoforge::pipeline::PipelineConfig;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    SchemaMismatch = 5,
    StageOrder = 6,
    Numeric = 7,
    NotFound = 8,
    Internal = 9,
}

/// Episode-level smoothness summary.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DfSmoothness {
    pub a_ep: f64,
    pub j_ep: f64,
    pub coverage: f64,
}

/// Per-episode quality record snapshot. Unknown booleans are -1; unset
/// floats are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DfQuality {
    pub a_ep: f64,
    pub j_ep: f64,
    pub coverage: f64,
    pub episode_score: f64,
    pub in_prescreen: i32,
    pub replay_success: i32,
    pub collision_free: i32,
    pub in_high_quality: i32,
    pub clip_count: usize,
}

/// Opaque loaded episode.
pub struct DfEpisode {
    inner: Episode,
}

/// Opaque loaded manifest.
pub struct DfManifest {
    inner: DatasetManifest,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', "?"))
        .unwrap_or_else(|_| CString::new("invalid error message").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> DfStatus {
    match err {
        Error::Io { .. } => DfStatus::Io,
        Error::Parse { .. } => DfStatus::Parse,
        Error::SchemaMismatch { .. } => DfStatus::SchemaMismatch,
        Error::StageOrderViolation { .. } => DfStatus::StageOrder,
        Error::NonFinite(_) | Error::NonFiniteAction(_) => DfStatus::Numeric,
        Error::MissingEpisodeFile(_) | Error::MissingCheckpoint(_) | Error::UnknownEpisode(_) => {
            DfStatus::NotFound
        }
        Error::Config(_)
        | Error::DimMismatch { .. }
        | Error::EmptyDataset(_)
        | Error::TooShort { .. }
        | Error::ShapeMismatch(_) => DfStatus::InvalidArgument,
        _ => DfStatus::Internal,
    }
}

fn fail(err: Error) -> DfStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

fn guard(f: impl FnOnce() -> DfStatus) -> DfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic".to_string());
            DfStatus::Internal
        }
    }
}

/// # Safety
/// `ptr` must be valid NUL-terminated UTF-8 or NULL.
unsafe fn cstr<'a>(ptr: *const c_char) -> Result<&'a str, DfStatus> {
    if ptr.is_null() {
        set_error("null string argument".into());
        return Err(DfStatus::NullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8".into());
        DfStatus::InvalidArgument
    })
}

fn out_string(out: *mut *mut c_char, value: &str) -> DfStatus {
    let c = match CString::new(value) {
        Ok(c) => c,
        Err(_) => {
            set_error("string contains interior NUL".into());
            return DfStatus::Internal;
        }
    };
    unsafe { *out = c.into_raw() };
    DfStatus::Ok
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn df_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Description of the most recent failure on this thread, or NULL. The
/// caller owns the returned string (free with `df_string_free`).
#[no_mangle]
pub extern "C" fn df_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| match slot.borrow().as_ref() {
        Some(msg) => msg.clone().into_raw(),
        None => std::ptr::null_mut(),
    })
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must have been returned by a `df_*` function and not freed before.
#[no_mangle]
pub unsafe extern "C" fn df_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Load a `demoforge-episode-v1` file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_episode_load(
    path: *const c_char,
    out: *mut *mut DfEpisode,
) -> DfStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer".into());
            return DfStatus::NullPointer;
        }
        let path = match cstr(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match demoforge::episode::load_episode(Path::new(path)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(DfEpisode { inner }));
                DfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `episode` must come from `df_episode_load` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn df_episode_free(episode: *mut DfEpisode) {
    if !episode.is_null() {
        drop(Box::from_raw(episode));
    }
}

/// # Safety
/// `episode` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_episode_len(episode: *const DfEpisode, out: *mut usize) -> DfStatus {
    guard(|| {
        if episode.is_null() || out.is_null() {
            set_error("null pointer".into());
            return DfStatus::NullPointer;
        }
        *out = (*episode).inner.len();
        DfStatus::Ok
    })
}

/// # Safety
/// `episode` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_episode_dims(episode: *const DfEpisode, out: *mut usize) -> DfStatus {
    guard(|| {
        if episode.is_null() || out.is_null() {
            set_error("null pointer".into());
            return DfStatus::NullPointer;
        }
        *out = (*episode).inner.dims;
        DfStatus::Ok
    })
}

/// # Safety
/// `episode` must be a live handle; `out` receives a caller-owned string.
#[no_mangle]
pub unsafe extern "C" fn df_episode_id(
    episode: *const DfEpisode,
    out: *mut *mut c_char,
) -> DfStatus {
    guard(|| {
        if episode.is_null() || out.is_null() {
            set_error("null pointer".into());
            return DfStatus::NullPointer;
        }
        out_string(out, &(*episode).inner.episode_id)
    })
}

/// Smoothness under explicit per-dimension min/max normalization stats
/// (arrays of length `dims`).
///
/// # Safety
/// `episode` must be a live handle; `per_dim_min`/`per_dim_max` must point
/// to `dims` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_episode_smoothness(
    episode: *const DfEpisode,
    per_dim_min: *const f64,
    per_dim_max: *const f64,
    dims: usize,
    out: *mut DfSmoothness,
) -> DfStatus {
    guard(|| {
        if episode.is_null() || per_dim_min.is_null() || per_dim_max.is_null() || out.is_null() {
            set_error("null pointer".into());
            return DfStatus::NullPointer;
        }
        let stats = NormalizationStats {
            per_dim_min: std::slice::from_raw_parts(per_dim_min, dims).to_vec(),
            per_dim_max: std::slice::from_raw_parts(per_dim_max, dims).to_vec(),
            scope: NormalizationScope::Dataset,
        };
        match metrics::episode_smoothness(&(*episode).inner, &stats) {
            Ok(s) => {
                *out = DfSmoothness {
                    a_ep: s.a_ep,
                    j_ep: s.j_ep,
                    coverage: s.coverage,
                };
                DfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Smoothness with the episode's own state extrema as normalization.
///
/// # Safety
/// `episode` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_episode_smoothness_self(
    episode: *const DfEpisode,
    out: *mut DfSmoothness,
) -> DfStatus {
    guard(|| {
        if episode.is_null() || out.is_null() {
            set_error("null pointer".into());
            return DfStatus::NullPointer;
        }
        let ep = &(*episode).inner;
        let stats = match metrics::compute_normalization_stats(std::slice::from_ref(ep)) {
            Ok(s) => s,
            Err(e) => return fail(e),
        };
        match metrics::episode_smoothness(ep, &stats) {
            Ok(s) => {
                *out = DfSmoothness {
                    a_ep: s.a_ep,
                    j_ep: s.j_ep,
                    coverage: s.coverage,
                };
                DfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Load a `demoforge-manifest-v1` file (episode files must exist).
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_manifest_load(
    path: *const c_char,
    out: *mut *mut DfManifest,
) -> DfStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer".into());
            return DfStatus::NullPointer;
        }
        let path = match cstr(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match demoforge::manifest::load_manifest(Path::new(path)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(DfManifest { inner }));
                DfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `manifest` must come from `df_manifest_load` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn df_manifest_free(manifest: *mut DfManifest) {
    if !manifest.is_null() {
        drop(Box::from_raw(manifest));
    }
}

/// # Safety
/// `manifest` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_manifest_len(
    manifest: *const DfManifest,
    out: *mut usize,
) -> DfStatus {
    guard(|| {
        if manifest.is_null() || out.is_null() {
            set_error("null pointer".into());
            return DfStatus::NullPointer;
        }
        *out = (*manifest).inner.episodes.len();
        DfStatus::Ok
    })
}

/// # Safety
/// `manifest` must be a live handle; `out` receives a caller-owned string.
#[no_mangle]
pub unsafe extern "C" fn df_manifest_episode_id(
    manifest: *const DfManifest,
    index: usize,
    out: *mut *mut c_char,
) -> DfStatus {
    guard(|| {
        if manifest.is_null() || out.is_null() {
            set_error("null pointer".into());
            return DfStatus::NullPointer;
        }
        let manifest_ref = &(*manifest).inner;
        match manifest_ref.episodes.get(index) {
            Some(entry) => out_string(out, &entry.quality.episode_id),
            None => {
                set_error(format!("episode index {index} out of range"));
                DfStatus::InvalidArgument
            }
        }
    })
}

/// Quality snapshot for the episode at `index`.
///
/// # Safety
/// `manifest` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_manifest_quality(
    manifest: *const DfManifest,
    index: usize,
    out: *mut DfQuality,
) -> DfStatus {
    guard(|| {
        if manifest.is_null() || out.is_null() {
            set_error("null pointer".into());
            return DfStatus::NullPointer;
        }
        let manifest_ref = &(*manifest).inner;
        let Some(entry) = manifest_ref.episodes.get(index) else {
            set_error(format!("episode index {index} out of range"));
            return DfStatus::InvalidArgument;
        };
        let q = &entry.quality;
        let tri = |b: Option<bool>| match b {
            Some(true) => 1,
            Some(false) => 0,
            None => -1,
        };
        *out = DfQuality {
            a_ep: q.a_ep.unwrap_or(f64::NAN),
            j_ep: q.j_ep.unwrap_or(f64::NAN),
            coverage: q.coverage.unwrap_or(f64::NAN),
            episode_score: q.episode_score.unwrap_or(f64::NAN),
            in_prescreen: q.in_prescreen as i32,
            replay_success: tri(q.replay_success),
            collision_free: tri(q.collision_free),
            in_high_quality: q.in_high_quality as i32,
            clip_count: q.clip_scores.len(),
        };
        DfStatus::Ok
    })
}

/// Run one pipeline stage (same names as the CLI subcommands, e.g.
/// "gen-corpus", "curate", ..., "posttrain-vanilla", "eval"). When
/// `out_summary` is non-NULL it receives a caller-owned summary string.
///
/// # Safety
/// String arguments must be valid NUL-terminated strings; `out_summary`
/// may be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn df_run_stage(
    config_path: *const c_char,
    workdir: *const c_char,
    stage: *const c_char,
    force: i32,
    out_summary: *mut *mut c_char,
) -> DfStatus {
    guard(|| {
        let config_path = match cstr(config_path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let workdir = match cstr(workdir) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let stage = match cstr(stage) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let cfg = match PipelineConfig::load(Path::new(config_path)) {
            Ok(c) => c,
            Err(e) => return fail(e),
        };
        match run_stage(&cfg, &Workdir::new(workdir), stage, force != 0) {
            Ok(summary) => {
                if !out_summary.is_null() {
                    return out_string(out_summary, &summary);
                }
                DfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}
