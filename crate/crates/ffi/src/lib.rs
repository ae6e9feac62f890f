//! C ABI over the fwguide library.
//!
//! Conventions: handles are opaque pointers created and destroyed by this
//! library; every fallible call returns an [`FwgStatus`] and leaves a
//! human-readable message retrievable with [`fwg_last_error`] on failure.
//! Out-parameters are written only on `FWG_STATUS_OK`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::io::BufWriter;
use std::path::PathBuf;

use fwguide::analysis;
use fwguide::error::Error;
use fwguide::scenario::{self, Scenario};
use fwguide::trajcsv;
use fwguide::world::{self, Trajectory};

/// Outcome of a C API call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum FwgStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The scenario failed to parse or validate.
    Config = 3,
    /// A numerical routine failed (e.g. the reference solve diverged).
    Solver = 4,
    /// A file could not be read or written.
    Io = 5,
    /// An index was out of range.
    IndexOutOfRange = 6,
}

/// Opaque scenario handle.
pub struct FwgScenario(Scenario);

/// Opaque trajectory handle.
pub struct FwgTrajectory(Trajectory);

/// One recorded sample, flattened for C consumers. Only the first `dim`
/// entries of each array are meaningful; absent quantities are reported via
/// the `has_*` flags.
#[repr(C)]
pub struct FwgSample {
    pub t: f64,
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    pub control: [f64; 3],
    pub delta_norm: f64,
    pub objective: f64,
    pub lyapunov: f64,
    pub min_dist: f64,
    pub beta: f64,
    pub has_velocity: bool,
    pub has_beta: bool,
}

/// Fermat-Weber solve result, flattened for C consumers.
#[repr(C)]
pub struct FwgSolution {
    pub point: [f64; 3],
    pub dim: usize,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_for(err: &Error) -> FwgStatus {
    match err {
        Error::Parse(_) | Error::Schema(_) | Error::Physics(_) => FwgStatus::Config,
        Error::Solver(_) => FwgStatus::Solver,
        Error::Io { .. } => FwgStatus::Io,
    }
}

fn fail(err: Error) -> FwgStatus {
    set_error(&err.to_string());
    status_for(&err)
}

/// # Safety
/// `ptr` must be a valid NUL-terminated string.
unsafe fn utf8_arg<'a>(ptr: *const c_char) -> Result<&'a str, FwgStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(FwgStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        FwgStatus::InvalidUtf8
    })
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fwg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn fwg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Parses and validates a scenario from TOML text.
///
/// # Safety
/// `text` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fwg_scenario_from_toml(
    text: *const c_char,
    out: *mut *mut FwgScenario,
) -> FwgStatus {
    if out.is_null() {
        set_error("null out pointer");
        return FwgStatus::NullArgument;
    }
    let text = match utf8_arg(text) {
        Ok(t) => t,
        Err(s) => return s,
    };
    match scenario::from_toml_str(text) {
        Ok(sc) => {
            *out = Box::into_raw(Box::new(FwgScenario(sc)));
            FwgStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Loads one of the built-in presets by name.
///
/// # Safety
/// `name` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fwg_scenario_preset(
    name: *const c_char,
    out: *mut *mut FwgScenario,
) -> FwgStatus {
    if out.is_null() {
        set_error("null out pointer");
        return FwgStatus::NullArgument;
    }
    let name = match utf8_arg(name) {
        Ok(t) => t,
        Err(s) => return s,
    };
    match scenario::preset(name) {
        Some(sc) => {
            *out = Box::into_raw(Box::new(FwgScenario(sc)));
            FwgStatus::Ok
        }
        None => {
            set_error(&format!(
                "unknown preset `{name}` (available: {})",
                scenario::PRESET_NAMES.join(", ")
            ));
            FwgStatus::Config
        }
    }
}

/// Serializes a scenario back to TOML. Free the result with
/// [`fwg_string_free`].
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fwg_scenario_to_toml(
    scenario: *const FwgScenario,
    out: *mut *mut c_char,
) -> FwgStatus {
    let Some(sc) = scenario.as_ref() else {
        set_error("null scenario handle");
        return FwgStatus::NullArgument;
    };
    if out.is_null() {
        set_error("null out pointer");
        return FwgStatus::NullArgument;
    }
    match sc.0.to_toml() {
        Ok(text) => {
            let c = CString::new(text).unwrap_or_default();
            *out = c.into_raw();
            FwgStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Overrides the scenario seed.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fwg_scenario_set_seed(scenario: *mut FwgScenario, seed: u64) -> FwgStatus {
    match scenario.as_mut() {
        Some(sc) => {
            sc.0.seed = seed;
            FwgStatus::Ok
        }
        None => {
            set_error("null scenario handle");
            FwgStatus::NullArgument
        }
    }
}

/// Overrides the integration step and time horizon. Pass a nonpositive
/// value to leave a field unchanged.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fwg_scenario_set_timing(
    scenario: *mut FwgScenario,
    dt: f64,
    horizon: f64,
) -> FwgStatus {
    let Some(sc) = scenario.as_mut() else {
        set_error("null scenario handle");
        return FwgStatus::NullArgument;
    };
    if dt > 0.0 {
        sc.0.dt = dt;
    }
    if horizon > 0.0 {
        sc.0.horizon = horizon;
    }
    match sc.0.validate() {
        Ok(()) => FwgStatus::Ok,
        Err(e) => fail(e),
    }
}

/// # Safety
/// `scenario` must be a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fwg_scenario_free(scenario: *mut FwgScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must originate from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn fwg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Runs the scenario to its horizon (or to the collision guard).
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fwg_simulate(
    scenario: *const FwgScenario,
    out: *mut *mut FwgTrajectory,
) -> FwgStatus {
    let Some(sc) = scenario.as_ref() else {
        set_error("null scenario handle");
        return FwgStatus::NullArgument;
    };
    if out.is_null() {
        set_error("null out pointer");
        return FwgStatus::NullArgument;
    }
    if let Err(e) = sc.0.validate() {
        return fail(e);
    }
    match world::simulate(&sc.0) {
        Ok(traj) => {
            *out = Box::into_raw(Box::new(FwgTrajectory(traj)));
            FwgStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Number of recorded samples.
///
/// # Safety
/// `trajectory` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fwg_trajectory_len(trajectory: *const FwgTrajectory) -> usize {
    trajectory.as_ref().map_or(0, |t| t.0.samples.len())
}

/// Spatial dimension of the run (2 or 3).
///
/// # Safety
/// `trajectory` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fwg_trajectory_dim(trajectory: *const FwgTrajectory) -> usize {
    trajectory.as_ref().map_or(0, |t| t.0.dim)
}

/// True when the run ended early on the collision guard.
///
/// # Safety
/// `trajectory` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fwg_trajectory_collided(trajectory: *const FwgTrajectory) -> bool {
    trajectory.as_ref().is_some_and(|t| t.0.collision.is_some())
}

/// Copies sample `index` into `out`.
///
/// # Safety
/// `trajectory` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fwg_trajectory_sample(
    trajectory: *const FwgTrajectory,
    index: usize,
    out: *mut FwgSample,
) -> FwgStatus {
    let Some(traj) = trajectory.as_ref() else {
        set_error("null trajectory handle");
        return FwgStatus::NullArgument;
    };
    if out.is_null() {
        set_error("null out pointer");
        return FwgStatus::NullArgument;
    }
    let Some(s) = traj.0.samples.get(index) else {
        set_error(&format!(
            "sample index {index} out of range ({} samples)",
            traj.0.samples.len()
        ));
        return FwgStatus::IndexOutOfRange;
    };
    let mut sample = FwgSample {
        t: s.t,
        position: [0.0; 3],
        velocity: [0.0; 3],
        control: [0.0; 3],
        delta_norm: s.delta.norm(),
        objective: s.f,
        lyapunov: s.lyap,
        min_dist: s.min_dist,
        beta: s.beta.unwrap_or(0.0),
        has_velocity: s.v.is_some(),
        has_beta: s.beta.is_some(),
    };
    for k in 0..traj.0.dim {
        sample.position[k] = s.p[k];
        sample.control[k] = s.u[k];
        if let Some(v) = s.v {
            sample.velocity[k] = v[k];
        }
    }
    *out = sample;
    FwgStatus::Ok
}

/// Writes the trajectory CSV for `scenario` to `path`.
///
/// # Safety
/// All handles must be live; `path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fwg_trajectory_write_csv(
    trajectory: *const FwgTrajectory,
    scenario: *const FwgScenario,
    path: *const c_char,
) -> FwgStatus {
    let (Some(traj), Some(sc)) = (trajectory.as_ref(), scenario.as_ref()) else {
        set_error("null handle");
        return FwgStatus::NullArgument;
    };
    let path = match utf8_arg(path) {
        Ok(p) => PathBuf::from(p),
        Err(s) => return s,
    };
    let file = match std::fs::File::create(&path) {
        Ok(f) => f,
        Err(e) => return fail(Error::io(path, e)),
    };
    let mut w = BufWriter::new(file);
    match trajcsv::write_csv(&mut w, &traj.0, &sc.0) {
        Ok(()) => FwgStatus::Ok,
        Err(e) => fail(Error::io(path, e)),
    }
}

/// # Safety
/// `trajectory` must be a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fwg_trajectory_free(trajectory: *mut FwgTrajectory) {
    if !trajectory.is_null() {
        drop(Box::from_raw(trajectory));
    }
}

/// Evaluates the law's convergence certificate over a finished run.
/// On success `*pass` holds the verdict and `*report` (if non-null) a
/// printable report to free with [`fwg_string_free`].
///
/// # Safety
/// Handles must be live; `pass` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fwg_certificate(
    trajectory: *const FwgTrajectory,
    scenario: *const FwgScenario,
    pass: *mut bool,
    report: *mut *mut c_char,
) -> FwgStatus {
    let (Some(traj), Some(sc)) = (trajectory.as_ref(), scenario.as_ref()) else {
        set_error("null handle");
        return FwgStatus::NullArgument;
    };
    if pass.is_null() {
        set_error("null out pointer");
        return FwgStatus::NullArgument;
    }
    match analysis::evaluate(&traj.0, &sc.0) {
        Ok(rep) => {
            *pass = rep.pass;
            if !report.is_null() {
                *report = CString::new(rep.to_string()).unwrap_or_default().into_raw();
            }
            FwgStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Solves the scenario's beacon field for its Fermat-Weber point.
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fwg_solve(
    scenario: *const FwgScenario,
    out: *mut FwgSolution,
) -> FwgStatus {
    let Some(sc) = scenario.as_ref() else {
        set_error("null scenario handle");
        return FwgStatus::NullArgument;
    };
    if out.is_null() {
        set_error("null out pointer");
        return FwgStatus::NullArgument;
    }
    let field = &sc.0.beacons;
    let sol = fwguide::fw::weiszfeld_default(&field.positions, &field.weights);
    let mut res = FwgSolution {
        point: [0.0; 3],
        dim: field.dim(),
        residual: sol.residual,
        iterations: sol.iterations,
        converged: sol.converged,
    };
    for k in 0..field.dim() {
        res.point[k] = sol.point[k];
    }
    *out = res;
    FwgStatus::Ok
}
