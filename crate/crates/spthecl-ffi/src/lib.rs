//! C ABI over the spthecl estimation library.
//!
//! Conventions:
//! - Every fallible call returns a [`SpthEclStatus`]; outputs go through
//!   pointers. On failure, [`spthecl_last_error_message`] returns a
//!   heap-allocated description of the most recent error on this thread
//!   (free it with [`spthecl_string_free`]).
//! - Gain laws and dataset registries are opaque handles created and
//!   destroyed by this library. Handles are not thread-safe to destroy
//!   concurrently with use, but distinct handles may be used from distinct
//!   threads freely.
//! - Strings crossing the boundary are NUL-terminated UTF-8.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use spthecl::cli;
use spthecl::dataset::DatasetRegistry;
use spthecl::example;
use spthecl::gain::GainLaw;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let message = message.into();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(message).ok();
    });
}

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpthEclStatus {
    Ok = 0,
    /// An argument failed validation.
    InvalidArgument = 1,
    /// A time or gain value fell outside the law's domain.
    DomainError = 2,
    /// A convergence certificate or switching constraint failed.
    CertificateError = 3,
    /// Filesystem failure.
    IoError = 4,
    /// A required pointer was NULL.
    NullPointer = 5,
    /// A string was not valid UTF-8.
    InvalidUtf8 = 6,
}

/// Opaque gain-law handle.
pub struct SpthEclLaw {
    law: GainLaw,
}

/// Opaque dataset-registry handle.
pub struct SpthEclRegistry {
    registry: DatasetRegistry,
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, SpthEclStatus> {
    if ptr.is_null() {
        set_error("NULL string argument");
        return Err(SpthEclStatus::NullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        SpthEclStatus::InvalidUtf8
    })
}

fn write_out<T>(out: *mut T, value: T) -> SpthEclStatus {
    if out.is_null() {
        set_error("NULL output pointer");
        return SpthEclStatus::NullPointer;
    }
    unsafe { *out = value };
    SpthEclStatus::Ok
}

fn law_ref<'a>(law: *const SpthEclLaw) -> Result<&'a GainLaw, SpthEclStatus> {
    if law.is_null() {
        set_error("NULL law handle");
        return Err(SpthEclStatus::NullPointer);
    }
    Ok(unsafe { &(*law).law })
}

fn boxed_law(
    law: Result<GainLaw, spthecl::gain::GainError>,
    out: *mut *mut SpthEclLaw,
) -> SpthEclStatus {
    match law {
        Ok(law) => write_out(out, Box::into_raw(Box::new(SpthEclLaw { law }))),
        Err(e) => {
            set_error(e.to_string());
            SpthEclStatus::InvalidArgument
        }
    }
}

/// Most recent error message on this thread, or NULL. Caller frees the
/// returned string with `spthecl_string_free`.
#[no_mangle]
pub extern "C" fn spthecl_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(msg) => msg.clone().into_raw(),
        None => ptr::null_mut(),
    })
}

/// Frees a string returned by this library. NULL is accepted.
///
/// # Safety
/// `s` must come from this library and must not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn spthecl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Exponentially growing gain (`ell = 1`).
#[no_mangle]
pub extern "C" fn spthecl_law_exponential(
    upsilon: f64,
    out: *mut *mut SpthEclLaw,
) -> SpthEclStatus {
    boxed_law(GainLaw::exponential(upsilon), out)
}

/// Finite-exponent gain law (`ell >= 1`).
#[no_mangle]
pub extern "C" fn spthecl_law_finite(
    ell: f64,
    upsilon: f64,
    out: *mut *mut SpthEclLaw,
) -> SpthEclStatus {
    boxed_law(GainLaw::new(ell, upsilon), out)
}

/// Blow-up gain law (`ell = inf`), the prescribed-time case.
#[no_mangle]
pub extern "C" fn spthecl_law_prescribed_time(
    upsilon: f64,
    out: *mut *mut SpthEclLaw,
) -> SpthEclStatus {
    boxed_law(GainLaw::prescribed_time(upsilon), out)
}

/// Frozen gain (`mu` constant): the classical constant-gain baseline.
#[no_mangle]
pub extern "C" fn spthecl_law_frozen(out: *mut *mut SpthEclLaw) -> SpthEclStatus {
    boxed_law(Ok(GainLaw::frozen()), out)
}

/// Destroys a law handle. NULL is accepted.
///
/// # Safety
/// `law` must come from a `spthecl_law_*` constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn spthecl_law_free(law: *mut SpthEclLaw) {
    if !law.is_null() {
        drop(Box::from_raw(law));
    }
}

macro_rules! law_eval {
    ($law:expr, $out:expr, $call:expr) => {
        match law_ref($law) {
            Ok(law) => match $call(law) {
                Ok(value) => write_out($out, value),
                Err(e) => {
                    set_error(e.to_string());
                    SpthEclStatus::DomainError
                }
            },
            Err(status) => status,
        }
    };
}

/// `F(mu)`, the gain ODE right-hand side.
#[no_mangle]
pub extern "C" fn spthecl_law_rate(
    law: *const SpthEclLaw,
    mu: f64,
    out: *mut f64,
) -> SpthEclStatus {
    law_eval!(law, out, |l: &GainLaw| l.rate(mu))
}

/// Closed-form gain `mu(t)` started at `mu0`.
#[no_mangle]
pub extern "C" fn spthecl_law_solution(
    law: *const SpthEclLaw,
    mu0: f64,
    t: f64,
    out: *mut f64,
) -> SpthEclStatus {
    law_eval!(law, out, |l: &GainLaw| l.solution(mu0, t))
}

/// Blow-up time of the law started at `mu0` (infinity when none).
#[no_mangle]
pub extern "C" fn spthecl_law_blow_up_time(
    law: *const SpthEclLaw,
    mu0: f64,
    out: *mut f64,
) -> SpthEclStatus {
    match law_ref(law) {
        Ok(l) => write_out(out, l.blow_up_time(mu0)),
        Err(status) => status,
    }
}

/// Dilated time `s = D_c(t)`.
#[no_mangle]
pub extern "C" fn spthecl_law_dilate(
    law: *const SpthEclLaw,
    c: f64,
    t: f64,
    out: *mut f64,
) -> SpthEclStatus {
    law_eval!(law, out, |l: &GainLaw| l.dilate(c, t))
}

/// Real time `t = D_c^{-1}(s)`.
#[no_mangle]
pub extern "C" fn spthecl_law_contract(
    law: *const SpthEclLaw,
    c: f64,
    s: f64,
    out: *mut f64,
) -> SpthEclStatus {
    law_eval!(law, out, |l: &GainLaw| l.contract(c, s))
}

/// `F(mu_hat)/mu_hat`, the dilated-clock gain rate.
#[no_mangle]
pub extern "C" fn spthecl_law_dilated_rate(
    law: *const SpthEclLaw,
    mu_hat: f64,
    out: *mut f64,
) -> SpthEclStatus {
    law_eval!(law, out, |l: &GainLaw| l.dilated_rate(mu_hat))
}

fn registry_ref<'a>(reg: *const SpthEclRegistry) -> Result<&'a DatasetRegistry, SpthEclStatus> {
    if reg.is_null() {
        set_error("NULL registry handle");
        return Err(SpthEclStatus::NullPointer);
    }
    Ok(unsafe { &(*reg).registry })
}

/// Loads a dataset registry document.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn spthecl_registry_load(
    path: *const c_char,
    out: *mut *mut SpthEclRegistry,
) -> SpthEclStatus {
    let path = match read_str(path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    match DatasetRegistry::load(Path::new(path)) {
        Ok(registry) => write_out(out, Box::into_raw(Box::new(SpthEclRegistry { registry }))),
        Err(spthecl::dataset::io::RegistryIoError::Io(e)) => {
            set_error(e.to_string());
            SpthEclStatus::IoError
        }
        Err(e) => {
            set_error(e.to_string());
            SpthEclStatus::InvalidArgument
        }
    }
}

/// The built-in benchmark registry (four datasets).
#[no_mangle]
pub extern "C" fn spthecl_registry_builtin(out: *mut *mut SpthEclRegistry) -> SpthEclStatus {
    write_out(
        out,
        Box::into_raw(Box::new(SpthEclRegistry {
            registry: example::registry(),
        })),
    )
}

/// Destroys a registry handle. NULL is accepted.
///
/// # Safety
/// `reg` must come from a registry constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn spthecl_registry_free(reg: *mut SpthEclRegistry) {
    if !reg.is_null() {
        drop(Box::from_raw(reg));
    }
}

/// Number of datasets in the registry.
#[no_mangle]
pub extern "C" fn spthecl_registry_len(
    reg: *const SpthEclRegistry,
    out: *mut usize,
) -> SpthEclStatus {
    match registry_ref(reg) {
        Ok(r) => write_out(out, r.len()),
        Err(status) => status,
    }
}

/// Parameter dimension of the registry's datasets.
#[no_mangle]
pub extern "C" fn spthecl_registry_dimension(
    reg: *const SpthEclRegistry,
    out: *mut usize,
) -> SpthEclStatus {
    match registry_ref(reg) {
        Ok(r) => write_out(out, r.dimension()),
        Err(status) => status,
    }
}

/// Richness level (`lambda_min` of the data matrix) of dataset `id`.
/// Fails with `DOMAIN_ERROR` on corrupted (asymmetric) datasets.
#[no_mangle]
pub extern "C" fn spthecl_registry_richness(
    reg: *const SpthEclRegistry,
    id: usize,
    out: *mut f64,
) -> SpthEclStatus {
    let registry = match registry_ref(reg) {
        Ok(r) => r,
        Err(status) => return status,
    };
    match registry.get(id) {
        None => {
            set_error(format!("no dataset with id {id}"));
            SpthEclStatus::InvalidArgument
        }
        Some(ds) => match ds.richness() {
            Ok(value) => write_out(out, value),
            Err(e) => {
                set_error(e.to_string());
                SpthEclStatus::DomainError
            }
        },
    }
}

/// Classification label of dataset `id`: 0 = sufficiently rich,
/// 1 = insufficiently rich, 2 = corrupted.
#[no_mangle]
pub extern "C" fn spthecl_registry_classification(
    reg: *const SpthEclRegistry,
    id: usize,
    out: *mut i32,
) -> SpthEclStatus {
    let registry = match registry_ref(reg) {
        Ok(r) => r,
        Err(status) => return status,
    };
    match registry.get(id) {
        None => {
            set_error(format!("no dataset with id {id}"));
            SpthEclStatus::InvalidArgument
        }
        Some(ds) => {
            let code = match ds.classification() {
                spthecl::Classification::SufficientlyRich { .. } => 0,
                spthecl::Classification::InsufficientlyRich => 1,
                spthecl::Classification::Corrupted => 2,
            };
            write_out(out, code)
        }
    }
}

/// Runs a benchmark variant ("standard", "he", or "pt"), writes the artifact
/// directory, and returns the final estimation error.
///
/// # Safety
/// `variant` and `out_dir` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn spthecl_run_benchmark(
    variant: *const c_char,
    out_dir: *const c_char,
    seed: u64,
    final_error: *mut f64,
) -> SpthEclStatus {
    let variant_str = match read_str(variant) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let out_str = match read_str(out_dir) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let variant: example::Variant = match variant_str.parse() {
        Ok(v) => v,
        Err(e) => {
            set_error(e);
            return SpthEclStatus::InvalidArgument;
        }
    };
    match cli::cmd_example(variant, Path::new(out_str), seed, None) {
        Ok(_) => {
            // recover the final error from the freshly written trace
            let cfg = example::config(variant);
            let summary_error = last_trace_error(Path::new(out_str), &cfg);
            match summary_error {
                Some(err) => write_out(final_error, err),
                None => {
                    set_error("trace.csv missing or unparseable after the run");
                    SpthEclStatus::IoError
                }
            }
        }
        Err(e) => {
            set_error(e.to_string());
            match e {
                cli::CliError::Validation(_) => SpthEclStatus::InvalidArgument,
                cli::CliError::Certificate(_) => SpthEclStatus::CertificateError,
                cli::CliError::Io(_) => SpthEclStatus::IoError,
            }
        }
    }
}

fn last_trace_error(out_dir: &Path, cfg: &spthecl::EstimatorConfig) -> Option<f64> {
    let text = std::fs::read_to_string(out_dir.join("trace.csv")).ok()?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next()?.split(',').collect();
    let err_col = header.iter().position(|h| *h == "err")?;
    let last = lines.last()?;
    let _ = cfg;
    last.split(',').nth(err_col)?.parse().ok()
}

/// Runs an experiment config document and writes the artifact directory.
///
/// # Safety
/// `config_path` and `out_dir` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn spthecl_simulate(
    config_path: *const c_char,
    out_dir: *const c_char,
) -> SpthEclStatus {
    let config = match read_str(config_path) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let out = match read_str(out_dir) {
        Ok(s) => s,
        Err(status) => return status,
    };
    match cli::cmd_simulate(Path::new(config), Path::new(out)) {
        Ok(_) => SpthEclStatus::Ok,
        Err(e) => {
            set_error(e.to_string());
            match e {
                cli::CliError::Validation(_) => SpthEclStatus::InvalidArgument,
                cli::CliError::Certificate(_) => SpthEclStatus::CertificateError,
                cli::CliError::Io(_) => SpthEclStatus::IoError,
            }
        }
    }
}

/// Checks a trace CSV against the dilated switching constraints.
/// `drain_modes` points at `drain_count` mode indices that consume the
/// activation budget. On success `*ok` reports the verdict.
///
/// # Safety
/// `trace_path` must be a NUL-terminated string; `drain_modes` must point at
/// `drain_count` readable entries.
#[no_mangle]
pub unsafe extern "C" fn spthecl_verify_trace(
    trace_path: *const c_char,
    law: *const SpthEclLaw,
    mu0: f64,
    tau_d: f64,
    tau_a: f64,
    n0: f64,
    t0: f64,
    drain_modes: *const usize,
    drain_count: usize,
    ok: *mut bool,
) -> SpthEclStatus {
    let trace = match read_str(trace_path) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let law = match law_ref(law) {
        Ok(l) => l,
        Err(status) => return status,
    };
    let drains: &[usize] = if drain_modes.is_null() {
        &[]
    } else {
        std::slice::from_raw_parts(drain_modes, drain_count)
    };
    match cli::cmd_verify_switching(Path::new(trace), law, mu0, tau_d, tau_a, n0, t0, drains) {
        Ok(_) => write_out(ok, true),
        Err(cli::CliError::Certificate(msg)) => {
            set_error(msg);
            write_out(ok, false)
        }
        Err(e) => {
            set_error(e.to_string());
            match e {
                cli::CliError::Io(_) => SpthEclStatus::IoError,
                _ => SpthEclStatus::InvalidArgument,
            }
        }
    }
}
