//! C ABI for the simulation and asymptotics library.
//!
//! Conventions: every fallible call returns a [`ChlabStatus`]; results come
//! back through out-pointers; handles are opaque and released by their
//! matching `*_free` function (null is a safe no-op there). After a failure,
//! [`chlab_last_error_message`] returns a description valid on the calling
//! thread until the next failing call. The generated header lands in
//! `include/chlab.h` at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use chlab::annular::AnnularSolution;
use chlab::composite::{self, CompositeModel, MatchingConstants};
use chlab::config::RunConfig;
use chlab::model::MobilityVariant;
use chlab::pipeline::{self, PipelineError, SimulationArtifacts};
use chlab::touchdown::TouchdownProfile;
use chlab::{annular, touchdown};

/// Call outcome. Nonzero values follow the stages of the pipeline (and the
/// CLI exit codes): invalid input, simulation failure, asymptotic
/// construction failure, cross-validation failure.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChlabStatus {
    Ok = 0,
    InvalidArgument = 1,
    Solver = 2,
    Asymptotics = 3,
    Validation = 4,
    /// A required pointer argument was null.
    NullPointer = 5,
    /// The callee panicked; the handle state is unspecified but not leaked.
    Internal = 6,
}

/// Mobility variant selector for [`chlab_config_set_mobility`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChlabMobility {
    Plain = 0,
    Truncated = 1,
    Absolute = 2,
}

/// One diagnostics row of a finished run.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct ChlabDiagRow {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub v0: f64,
    pub rbar: f64,
    pub vmin: f64,
    pub d2v: f64,
}

/// Matching constants of a composite handle.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct ChlabMatchingConstants {
    pub r_star: f64,
    pub mu0: f64,
    pub b2: f64,
    pub kappa: f64,
    pub c2: f64,
    pub a1: f64,
    pub flux_j: f64,
    pub scale_c: f64,
    pub scale_d: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// Opaque run configuration.
pub struct ChlabConfig {
    inner: RunConfig,
}

/// Opaque finished simulation.
pub struct ChlabRun {
    artifacts: SimulationArtifacts,
}

/// Opaque matched-asymptotic composite (owns its annular and inner parts).
pub struct ChlabComposite {
    annular: AnnularSolution,
    inner: TouchdownProfile,
    constants: MatchingConstants,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("NULs stripped");
    });
}

fn fail(status: ChlabStatus, message: &str) -> ChlabStatus {
    set_last_error(message);
    status
}

fn fail_pipeline(err: &PipelineError) -> ChlabStatus {
    let status = match err.exit_code() {
        1 => ChlabStatus::InvalidArgument,
        2 => ChlabStatus::Solver,
        3 => ChlabStatus::Asymptotics,
        _ => ChlabStatus::Validation,
    };
    fail(status, &err.to_string())
}

/// Guard against unwinding across the ABI; panics become `Internal`.
fn guarded(body: impl FnOnce() -> ChlabStatus) -> ChlabStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(ChlabStatus::Internal, &format!("internal panic: {msg}"))
        }
    }
}

/// Description of the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn chlab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// New configuration with the library defaults. Never null.
#[no_mangle]
pub extern "C" fn chlab_config_new() -> *mut ChlabConfig {
    Box::into_raw(Box::new(ChlabConfig {
        inner: RunConfig::default(),
    }))
}

/// Parse a configuration from a TOML document.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chlab_config_from_toml(
    text: *const c_char,
    out: *mut *mut ChlabConfig,
) -> ChlabStatus {
    if text.is_null() || out.is_null() {
        return fail(ChlabStatus::NullPointer, "null pointer argument");
    }
    let Ok(text) = CStr::from_ptr(text).to_str() else {
        return fail(ChlabStatus::InvalidArgument, "config text is not UTF-8");
    };
    match RunConfig::from_toml(text) {
        Ok(cfg) => {
            *out = Box::into_raw(Box::new(ChlabConfig { inner: cfg }));
            ChlabStatus::Ok
        }
        Err(e) => fail(ChlabStatus::InvalidArgument, &e.to_string()),
    }
}

// The setters are written out one by one (no macro): the header generator
// reads the unexpanded source, so macro-produced functions would be
// missing from `chlab.h`.

/// Apply one mutation and re-validate the whole configuration.
unsafe fn config_update(
    cfg: *mut ChlabConfig,
    apply: impl FnOnce(&mut RunConfig),
) -> ChlabStatus {
    let Some(cfg) = cfg.as_mut() else {
        return fail(ChlabStatus::NullPointer, "null config");
    };
    apply(&mut cfg.inner);
    match cfg.inner.validate() {
        Ok(()) => ChlabStatus::Ok,
        Err(e) => fail(ChlabStatus::InvalidArgument, &e.to_string()),
    }
}

/// Set the mobility degeneracy exponent `n >= 0`.
///
/// # Safety
/// `cfg` must be a live pointer from a `chlab_config_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn chlab_config_set_n(cfg: *mut ChlabConfig, value: f64) -> ChlabStatus {
    config_update(cfg, |c| c.model.n = value)
}

/// Set the interface-width parameter `eps > 0`.
///
/// # Safety
/// `cfg` must be a live pointer from a `chlab_config_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn chlab_config_set_epsilon(
    cfg: *mut ChlabConfig,
    value: f64,
) -> ChlabStatus {
    config_update(cfg, |c| c.model.epsilon = value)
}

/// Set the number of finite-volume cells (>= 16).
///
/// # Safety
/// `cfg` must be a live pointer from a `chlab_config_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn chlab_config_set_cells(
    cfg: *mut ChlabConfig,
    value: usize,
) -> ChlabStatus {
    config_update(cfg, |c| c.grid.cells = value)
}

/// Set the integration horizon `t_end > 0`.
///
/// # Safety
/// `cfg` must be a live pointer from a `chlab_config_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn chlab_config_set_t_end(
    cfg: *mut ChlabConfig,
    value: f64,
) -> ChlabStatus {
    config_update(cfg, |c| c.run.t_end = value)
}

/// Select the mobility variant.
///
/// # Safety
/// `cfg` must be a live pointer from a `chlab_config_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn chlab_config_set_mobility(
    cfg: *mut ChlabConfig,
    mobility: ChlabMobility,
) -> ChlabStatus {
    let Some(cfg) = cfg.as_mut() else {
        return fail(ChlabStatus::NullPointer, "null config");
    };
    cfg.inner.model.mobility = match mobility {
        ChlabMobility::Plain => MobilityVariant::Plain,
        ChlabMobility::Truncated => MobilityVariant::Truncated,
        ChlabMobility::Absolute => MobilityVariant::Absolute,
    };
    ChlabStatus::Ok
}

/// Release a configuration (null is a no-op).
///
/// # Safety
/// `cfg` must be null or an owned pointer not freed before.
#[no_mangle]
pub unsafe extern "C" fn chlab_config_free(cfg: *mut ChlabConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Run a simulation to its horizon (or touchdown halt).
///
/// # Safety
/// `cfg` must be a live config pointer; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn chlab_simulate(
    cfg: *const ChlabConfig,
    out: *mut *mut ChlabRun,
) -> ChlabStatus {
    let (Some(cfg), false) = (cfg.as_ref(), out.is_null()) else {
        return fail(ChlabStatus::NullPointer, "null pointer argument");
    };
    guarded(|| match pipeline::run_simulation(&cfg.inner) {
        Ok(artifacts) => {
            *out = Box::into_raw(Box::new(ChlabRun { artifacts }));
            ChlabStatus::Ok
        }
        Err(e) => fail_pipeline(&e),
    })
}

/// Final time reached by the run (NaN for a null handle).
///
/// # Safety
/// `run` must be null or a live run pointer.
#[no_mangle]
pub unsafe extern "C" fn chlab_run_t_final(run: *const ChlabRun) -> f64 {
    run.as_ref()
        .map_or(f64::NAN, |r| r.artifacts.final_state.time)
}

/// Number of radial nodes of the run's profiles (0 for a null handle).
///
/// # Safety
/// `run` must be null or a live run pointer.
#[no_mangle]
pub unsafe extern "C" fn chlab_run_num_nodes(run: *const ChlabRun) -> usize {
    run.as_ref().map_or(0, |r| r.artifacts.grid.num_nodes())
}

/// Copy the final profile into caller buffers of exactly `len` elements
/// (`len` must equal `chlab_run_num_nodes`). `v = 1 - u` is the distance
/// to the degenerate value.
///
/// # Safety
/// `run` must be live; `r_out` and `v_out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn chlab_run_final_profile(
    run: *const ChlabRun,
    r_out: *mut f64,
    v_out: *mut f64,
    len: usize,
) -> ChlabStatus {
    let Some(run) = run.as_ref() else {
        return fail(ChlabStatus::NullPointer, "null run");
    };
    if r_out.is_null() || v_out.is_null() {
        return fail(ChlabStatus::NullPointer, "null output buffer");
    }
    let nodes = run.artifacts.grid.num_nodes();
    if len != nodes {
        return fail(
            ChlabStatus::InvalidArgument,
            &format!("buffer length {len} != node count {nodes}"),
        );
    }
    for i in 0..nodes {
        *r_out.add(i) = run.artifacts.grid.nodes[i];
        *v_out.add(i) = 1.0 - run.artifacts.final_state.values[i];
    }
    ChlabStatus::Ok
}

/// Number of diagnostics rows recorded by the run.
///
/// # Safety
/// `run` must be null or a live run pointer.
#[no_mangle]
pub unsafe extern "C" fn chlab_run_num_diagnostics(run: *const ChlabRun) -> usize {
    run.as_ref().map_or(0, |r| r.artifacts.diagnostics.len())
}

/// Copy diagnostics row `index` (time, invariants, extrema).
///
/// # Safety
/// `run` must be live; `out` must point to a `ChlabDiagRow`.
#[no_mangle]
pub unsafe extern "C" fn chlab_run_diagnostics_row(
    run: *const ChlabRun,
    index: usize,
    out: *mut ChlabDiagRow,
) -> ChlabStatus {
    let Some(run) = run.as_ref() else {
        return fail(ChlabStatus::NullPointer, "null run");
    };
    if out.is_null() {
        return fail(ChlabStatus::NullPointer, "null output");
    }
    let Some(row) = run.artifacts.diagnostics.rows.get(index) else {
        return fail(
            ChlabStatus::InvalidArgument,
            &format!("row {index} out of range"),
        );
    };
    *out = ChlabDiagRow {
        t: row.t,
        mass: row.mass,
        energy: row.energy,
        dissipation: row.dissipation,
        v0: row.v0,
        rbar: row.rbar,
        vmin: row.vmin,
        d2v: row.d2v,
    };
    ChlabStatus::Ok
}

/// Whether the run halted on a touchdown event; if so, report it.
///
/// # Safety
/// `run` must be live; the out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn chlab_run_touchdown(
    run: *const ChlabRun,
    has_event: *mut bool,
    time: *mut f64,
    radius: *mut f64,
) -> ChlabStatus {
    let Some(run) = run.as_ref() else {
        return fail(ChlabStatus::NullPointer, "null run");
    };
    if has_event.is_null() || time.is_null() || radius.is_null() {
        return fail(ChlabStatus::NullPointer, "null output");
    }
    match &run.artifacts.touchdown {
        Some(event) => {
            *has_event = true;
            *time = event.time;
            *radius = event.radius;
        }
        None => {
            *has_event = false;
            *time = f64::NAN;
            *radius = f64::NAN;
        }
    }
    ChlabStatus::Ok
}

/// Write the deterministic artifact set into a directory.
///
/// # Safety
/// `run` must be live; `dir` must be a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn chlab_run_write_artifacts(
    run: *const ChlabRun,
    dir: *const c_char,
) -> ChlabStatus {
    let Some(run) = run.as_ref() else {
        return fail(ChlabStatus::NullPointer, "null run");
    };
    if dir.is_null() {
        return fail(ChlabStatus::NullPointer, "null directory");
    }
    let Ok(dir) = CStr::from_ptr(dir).to_str() else {
        return fail(ChlabStatus::InvalidArgument, "directory is not UTF-8");
    };
    guarded(
        || match pipeline::write_artifacts(&run.artifacts, Path::new(dir)) {
            Ok(_) => ChlabStatus::Ok,
            Err(e) => fail_pipeline(&e),
        },
    )
}

/// Release a run (null is a no-op).
///
/// # Safety
/// `run` must be null or an owned pointer not freed before.
#[no_mangle]
pub unsafe extern "C" fn chlab_run_free(run: *mut ChlabRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Exact decay exponents for mobility exponent `n > 2`.
///
/// # Safety
/// The out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn chlab_exponents(
    n: f64,
    alpha: *mut f64,
    beta: *mut f64,
    gamma: *mut f64,
) -> ChlabStatus {
    if alpha.is_null() || beta.is_null() || gamma.is_null() {
        return fail(ChlabStatus::NullPointer, "null output");
    }
    match composite::exponents(n) {
        Ok(e) => {
            *alpha = e.alpha_f64();
            *beta = e.beta_f64();
            *gamma = e.gamma_f64();
            ChlabStatus::Ok
        }
        Err(e) => fail(ChlabStatus::Asymptotics, &e.to_string()),
    }
}

/// Curvatures of the self-similar touchdown profile: at the minimizer and
/// in the far field.
///
/// # Safety
/// The out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn chlab_touchdown_curvatures(
    n: f64,
    kappa: *mut f64,
    kappa_far: *mut f64,
) -> ChlabStatus {
    if kappa.is_null() || kappa_far.is_null() {
        return fail(ChlabStatus::NullPointer, "null output");
    }
    guarded(|| {
        match touchdown::solve_phi0(n, touchdown::DEFAULT_HALF_WIDTH, touchdown::DEFAULT_TOL) {
            Ok(profile) => {
                *kappa = profile.kappa;
                *kappa_far = profile.kappa_far;
                ChlabStatus::Ok
            }
            Err(e) => fail(ChlabStatus::Asymptotics, &e.to_string()),
        }
    })
}

/// Build the matched-asymptotic composite for `(n, eps, m0)`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chlab_composite_new(
    n: f64,
    epsilon: f64,
    m0: f64,
    out: *mut *mut ChlabComposite,
) -> ChlabStatus {
    if out.is_null() {
        return fail(ChlabStatus::NullPointer, "null output");
    }
    if !(epsilon > 0.0) || !(-0.5..0.5).contains(&m0) {
        return fail(
            ChlabStatus::InvalidArgument,
            &format!("need eps > 0 and m0 in (-1/2, 1/2), got eps = {epsilon}, m0 = {m0}"),
        );
    }
    guarded(|| {
        let annular = match annular::solve_annular(epsilon, m0, 1e-10) {
            Ok(a) => a,
            Err(e) => return fail(ChlabStatus::Asymptotics, &e.to_string()),
        };
        let inner = match touchdown::solve_phi0(n, touchdown::DEFAULT_HALF_WIDTH, 1e-10) {
            Ok(p) => p,
            Err(e) => return fail(ChlabStatus::Asymptotics, &e.to_string()),
        };
        let constants = match composite::matching_constants(&annular, &inner) {
            Ok(mc) => mc,
            Err(e) => {
                let status = match e {
                    composite::MatchingError::InconsistentMatching { .. } => {
                        ChlabStatus::Validation
                    }
                    _ => ChlabStatus::Asymptotics,
                };
                return fail(status, &e.to_string());
            }
        };
        *out = Box::into_raw(Box::new(ChlabComposite {
            annular,
            inner,
            constants,
        }));
        ChlabStatus::Ok
    })
}

/// Copy out the matching constants and exponents.
///
/// # Safety
/// `handle` must be live; `out` must point to a `ChlabMatchingConstants`.
#[no_mangle]
pub unsafe extern "C" fn chlab_composite_constants(
    handle: *const ChlabComposite,
    out: *mut ChlabMatchingConstants,
) -> ChlabStatus {
    let Some(h) = handle.as_ref() else {
        return fail(ChlabStatus::NullPointer, "null composite");
    };
    if out.is_null() {
        return fail(ChlabStatus::NullPointer, "null output");
    }
    let mc = &h.constants;
    *out = ChlabMatchingConstants {
        r_star: mc.r_star,
        mu0: mc.mu0,
        b2: mc.b2,
        kappa: mc.kappa,
        c2: mc.c2,
        a1: mc.a1,
        flux_j: mc.flux_j,
        scale_c: mc.scale_c,
        scale_d: mc.scale_d,
        alpha: mc.exponents.alpha_f64(),
        beta: mc.exponents.beta_f64(),
        gamma: mc.exponents.gamma_f64(),
    };
    ChlabStatus::Ok
}

/// Evaluate the composite `v(r, t)` for `t > 0`, `0 <= r <= 1`.
///
/// # Safety
/// `handle` must be live; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn chlab_composite_eval(
    handle: *const ChlabComposite,
    t: f64,
    r: f64,
    out: *mut f64,
) -> ChlabStatus {
    let Some(h) = handle.as_ref() else {
        return fail(ChlabStatus::NullPointer, "null composite");
    };
    if out.is_null() {
        return fail(ChlabStatus::NullPointer, "null output");
    }
    if !(t > 0.0 && t.is_finite()) || !(0.0..=1.0).contains(&r) {
        return fail(
            ChlabStatus::InvalidArgument,
            &format!("need t > 0 and r in [0, 1], got t = {t}, r = {r}"),
        );
    }
    let model = CompositeModel {
        constants: h.constants.clone(),
        annular: &h.annular,
        inner: &h.inner,
    };
    *out = model.eval(t, r);
    ChlabStatus::Ok
}

/// Release a composite (null is a no-op).
///
/// # Safety
/// `handle` must be null or an owned pointer not freed before.
#[no_mangle]
pub unsafe extern "C" fn chlab_composite_free(handle: *mut ChlabComposite) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}
