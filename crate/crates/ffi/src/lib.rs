//! C ABI over `trajpriv`.
//!
//! Objects cross the boundary as opaque handles built from JSON. Every
//! fallible call returns a [`TpStatus`]; on failure the message is kept per
//! thread and can be read with [`tp_last_error`]. Strings handed out by the
//! library must be released with [`tp_string_free`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use libc::c_char;

use trajpriv::coreset::{compress, CoresetConfig};
use trajpriv::model::{MatchKey, MobilityProfile, Trajectory};
use trajpriv::privacy::{apply, OpParams, PrivacyMode};
use trajpriv::social::{lcs_len, CompiledProfiles, ProfileSet, StrengthConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidJson = 3,
    InvalidInput = 4,
    UnknownOp = 5,
    Panic = 6,
}

/// A validated trajectory.
pub struct TpTrajectory(Trajectory);

/// Mobility profiles compiled for scoring under one strength configuration.
pub struct TpProfiles(CompiledProfiles);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Fail(TpStatus, String);

impl From<trajpriv::Error> for Fail {
    fn from(e: trajpriv::Error) -> Self {
        Fail(TpStatus::InvalidInput, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            TpStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            TpStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(TpStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail(TpStatus::NullPointer, format!("{what} is null")))
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(Fail(TpStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(s).to_str().map_err(|e| Fail(TpStatus::InvalidUtf8, format!("{what}: {e}")))
}

fn parse<T: serde::de::DeserializeOwned>(s: &str, what: &str) -> Result<T, Fail> {
    serde_json::from_str(s).map_err(|e| Fail(TpStatus::InvalidJson, format!("{what}: {e}")))
}

fn to_c_string(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s).map(CString::into_raw).map_err(|e| Fail(TpStatus::InvalidInput, e.to_string()))
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn tp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse a trajectory from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_trajectory_from_json(json: *const c_char, out: *mut *mut TpTrajectory) -> TpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let t: Trajectory = parse(read_str(json, "json")?, "trajectory")?;
        *out = Box::into_raw(Box::new(TpTrajectory(t)));
        Ok(())
    })
}

/// Serialize a trajectory; free the result with [`tp_string_free`].
///
/// # Safety
/// `t` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_trajectory_to_json(t: *const TpTrajectory, out: *mut *mut c_char) -> TpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let t = borrow(t, "trajectory")?;
        *out = to_c_string(serde_json::to_string(&t.0).map_err(|e| Fail(TpStatus::InvalidInput, e.to_string()))?)?;
        Ok(())
    })
}

/// Number of reports in the trajectory; 0 for NULL.
///
/// # Safety
/// `t` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tp_trajectory_len(t: *const TpTrajectory) -> usize {
    t.as_ref().map_or(0, |t| t.0.len())
}

/// # Safety
/// `t` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tp_trajectory_free(t: *mut TpTrajectory) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Compile profiles from a JSON array of mobility profiles.
///
/// `config_json` holds a strength configuration (`alpha`, optional
/// `match_key`, optional `clamp`); NULL selects the defaults.
///
/// # Safety
/// `profiles_json` must be a NUL-terminated string, `config_json` NULL or a
/// NUL-terminated string, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tp_profiles_from_json(
    profiles_json: *const c_char,
    config_json: *const c_char,
    out: *mut *mut TpProfiles,
) -> TpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let profiles: Vec<MobilityProfile> = parse(read_str(profiles_json, "profiles_json")?, "profiles")?;
        let cfg: StrengthConfig = if config_json.is_null() {
            StrengthConfig::default()
        } else {
            parse(read_str(config_json, "config_json")?, "config")?
        };
        cfg.validate()?;
        let compiled = CompiledProfiles::compile(&ProfileSet::new(profiles)?, &cfg)?;
        *out = Box::into_raw(Box::new(TpProfiles(compiled)));
        Ok(())
    })
}

/// Number of compiled profiles; 0 for NULL.
///
/// # Safety
/// `p` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tp_profiles_len(p: *const TpProfiles) -> usize {
    p.as_ref().map_or(0, |p| p.0.len())
}

/// # Safety
/// `p` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tp_profiles_free(p: *mut TpProfiles) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Mean social strength of the trajectory against the profiles.
///
/// # Safety
/// `p` and `t` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_score(p: *const TpProfiles, t: *const TpTrajectory, out: *mut f64) -> TpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = borrow(p, "profiles")?.0.score(&borrow(t, "trajectory")?.0)?;
        Ok(())
    })
}

/// Sanitize with a mode or operation name (`moderate_cloak`, `cloak`, ...).
/// `params_json` overrides operation parameters; NULL selects the defaults.
/// The result is the sanitized trajectory as JSON; free it with
/// [`tp_string_free`].
///
/// # Safety
/// `t` must be a live handle, `op` a NUL-terminated string, `params_json`
/// NULL or a NUL-terminated string, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tp_sanitize(
    t: *const TpTrajectory,
    op: *const c_char,
    params_json: *const c_char,
    out: *mut *mut c_char,
) -> TpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let t = borrow(t, "trajectory")?;
        let op = read_str(op, "op")?;
        let mode: PrivacyMode = op.parse().map_err(|_| Fail(TpStatus::UnknownOp, format!("unknown operation {op:?}")))?;
        let params: OpParams = if params_json.is_null() {
            OpParams::default()
        } else {
            parse(read_str(params_json, "params_json")?, "params")?
        };
        let s = apply(mode, &t.0, &params)?;
        *out = to_c_string(serde_json::to_string(&s).map_err(|e| Fail(TpStatus::InvalidInput, e.to_string()))?)?;
        Ok(())
    })
}

/// Coreset of the trajectory at threshold `theta`, as a new handle.
///
/// # Safety
/// `t` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_compress(t: *const TpTrajectory, theta: f64, out: *mut *mut TpTrajectory) -> TpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let t = borrow(t, "trajectory")?;
        let c = compress(&t.0, &CoresetConfig::new(theta)?);
        *out = Box::into_raw(Box::new(TpTrajectory(c)));
        Ok(())
    })
}

/// Longest common contiguous run of two trajectories under the category
/// match key.
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_lcs(a: *const TpTrajectory, b: *const TpTrajectory, out: *mut usize) -> TpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let key = MatchKey::category();
        let sa = borrow(a, "a")?.0.symbols(&key)?;
        let sb = borrow(b, "b")?.0.symbols(&key)?;
        *out = lcs_len(&sa, &sb);
        Ok(())
    })
}

/// Longest common contiguous run of two integer sequences.
///
/// # Safety
/// `a` must point to `a_len` readable values (or be NULL with `a_len` 0),
/// likewise `b`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_lcs_u32(
    a: *const u32,
    a_len: usize,
    b: *const u32,
    b_len: usize,
    out: *mut usize,
) -> TpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let slice = |p: *const u32, n: usize, what: &str| -> Result<&[u32], Fail> {
            match (p.is_null(), n) {
                (_, 0) => Ok(&[]),
                (true, _) => Err(Fail(TpStatus::NullPointer, format!("{what} is null"))),
                (false, n) => Ok(std::slice::from_raw_parts(p, n)),
            }
        };
        *out = lcs_len(slice(a, a_len, "a")?, slice(b, b_len, "b")?);
        Ok(())
    })
}
