//! C interface to the mmwave-ho simulator.
//!
//! Every function returns an [`MmwhoStatus`]. On failure a message is kept
//! per thread and can be copied out with [`mmwho_last_error_message`].
//! Handles are opaque and must be released with the matching `_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::fs::File;
use std::io::BufWriter;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use mmwave_ho::harness::csv_io;
use mmwave_ho::harness::experiment::{run_experiment, ExperimentOutcome};
use mmwave_ho::harness::{checks, PolicyKind, SimConfig};
use mmwave_ho::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmwhoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Infeasible = 5,
    Panic = 6,
}

/// Scenario configuration.
pub struct MmwhoConfig(SimConfig);

/// Result of one experiment: tuned threshold, per-episode metrics and
/// per-policy summaries.
pub struct MmwhoExperiment(ExperimentOutcome);

/// Summary of one policy.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MmwhoSummary {
    /// 0 ours, 1 ours-ED, 2 multi-connectivity, 3 SMART-UCB.
    pub policy: u32,
    pub replications: u64,
    pub mean_r_traj_bps: f64,
    pub std_r_traj_bps: f64,
    pub mean_handovers: f64,
    pub median_handovers: f64,
    pub rate_fluctuation_bps: f64,
    pub mean_renewals: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> MmwhoStatus {
    match e {
        Error::Io(_) => MmwhoStatus::Io,
        Error::Format(_) | Error::Csv(_) | Error::Toml(_) | Error::Json(_) => MmwhoStatus::Format,
        Error::Infeasible => MmwhoStatus::Infeasible,
        _ => MmwhoStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), MmwhoStatus>) -> MmwhoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MmwhoStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            MmwhoStatus::Panic
        }
    }
}

fn fail(e: Error) -> MmwhoStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> MmwhoStatus {
    set_error(format!("{what} is null"));
    MmwhoStatus::NullPointer
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, MmwhoStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        MmwhoStatus::InvalidArgument
    })
}

unsafe fn config_mut<'a>(cfg: *mut MmwhoConfig) -> Result<&'a mut SimConfig, MmwhoStatus> {
    cfg.as_mut().map(|c| &mut c.0).ok_or_else(|| null("config"))
}

fn policy_code(p: PolicyKind) -> u32 {
    PolicyKind::ALL.iter().position(|&q| q == p).unwrap_or(0) as u32
}

/// Length in bytes of the last error message on this thread, without the
/// terminating NUL.
#[no_mangle]
pub extern "C" fn mmwho_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().len())
}

/// Copy the last error message into `buf` with a terminating NUL. Returns
/// the number of bytes written without the NUL, or -1 when `buf` is null or
/// shorter than `mmwho_last_error_length() + 1`.
///
/// # Safety
/// `buf` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn mmwho_last_error_message(buf: *mut c_char, len: usize) -> isize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if buf.is_null() || len < msg.len() + 1 {
            return -1;
        }
        std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), msg.len());
        *buf.add(msg.len()) = 0;
        msg.len() as isize
    })
}

/// New configuration with built-in defaults.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mmwho_config_default(out: *mut *mut MmwhoConfig) -> MmwhoStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = Box::into_raw(Box::new(MmwhoConfig(SimConfig::default())));
        Ok(())
    })
}

/// Parse a configuration from TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mmwho_config_from_toml(toml: *const c_char, out: *mut *mut MmwhoConfig) -> MmwhoStatus {
    guard(|| {
        let text = str_arg(toml, "toml")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let cfg = SimConfig::from_toml_str(text).map_err(fail)?;
        *out = Box::into_raw(Box::new(MmwhoConfig(cfg)));
        Ok(())
    })
}

/// Load a configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mmwho_config_load(path: *const c_char, out: *mut *mut MmwhoConfig) -> MmwhoStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let cfg = SimConfig::load(Path::new(path)).map_err(fail)?;
        *out = Box::into_raw(Box::new(MmwhoConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from a `mmwho_config_*` constructor and not be used
/// afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn mmwho_config_free(cfg: *mut MmwhoConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// # Safety
/// `cfg` must be a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn mmwho_config_set_seed(cfg: *mut MmwhoConfig, seed: u64) -> MmwhoStatus {
    guard(|| {
        config_mut(cfg)?.experiment.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn mmwho_config_set_replications(cfg: *mut MmwhoConfig, n: u64) -> MmwhoStatus {
    guard(|| {
        if n == 0 {
            set_error("replications must be at least one".into());
            return Err(MmwhoStatus::InvalidArgument);
        }
        config_mut(cfg)?.experiment.replications = n;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn mmwho_config_set_training_episodes(cfg: *mut MmwhoConfig, n: u64) -> MmwhoStatus {
    guard(|| {
        config_mut(cfg)?.learning.episodes = n;
        Ok(())
    })
}

/// Fix the skeleton-distance threshold. A negative value restores tuning.
///
/// # Safety
/// `cfg` must be a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn mmwho_config_set_t_d(cfg: *mut MmwhoConfig, t_d: f64) -> MmwhoStatus {
    guard(|| {
        if t_d.is_nan() {
            set_error("T_D is NaN".into());
            return Err(MmwhoStatus::InvalidArgument);
        }
        config_mut(cfg)?.skeleton.t_d = (t_d >= 0.0).then_some(t_d);
        Ok(())
    })
}

/// Tune, train and evaluate every configured policy.
///
/// # Safety
/// `cfg` must be a live configuration handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mmwho_experiment_run(cfg: *const MmwhoConfig, out: *mut *mut MmwhoExperiment) -> MmwhoStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("config"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        cfg.0.validate().map_err(fail)?;
        let outcome = run_experiment(&cfg.0).map_err(fail)?;
        *out = Box::into_raw(Box::new(MmwhoExperiment(outcome)));
        Ok(())
    })
}

/// # Safety
/// `exp` must come from `mmwho_experiment_run` and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn mmwho_experiment_free(exp: *mut MmwhoExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// # Safety
/// `exp` must be a live experiment handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mmwho_experiment_t_d(exp: *const MmwhoExperiment, out: *mut f64) -> MmwhoStatus {
    guard(|| {
        let exp = exp.as_ref().ok_or_else(|| null("experiment"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = exp.0.t_d;
        Ok(())
    })
}

/// # Safety
/// `exp` must be a live experiment handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mmwho_experiment_policy_count(exp: *const MmwhoExperiment, out: *mut usize) -> MmwhoStatus {
    guard(|| {
        let exp = exp.as_ref().ok_or_else(|| null("experiment"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = exp.0.summaries.len();
        Ok(())
    })
}

/// Summary of the `index`-th evaluated policy.
///
/// # Safety
/// `exp` must be a live experiment handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mmwho_experiment_summary(
    exp: *const MmwhoExperiment,
    index: usize,
    out: *mut MmwhoSummary,
) -> MmwhoStatus {
    guard(|| {
        let exp = exp.as_ref().ok_or_else(|| null("experiment"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let Some(s) = exp.0.summaries.get(index) else {
            set_error(format!("policy index {index} out of range"));
            return Err(MmwhoStatus::InvalidArgument);
        };
        *out = MmwhoSummary {
            policy: policy_code(s.policy),
            replications: s.replications as u64,
            mean_r_traj_bps: s.mean_r_traj,
            std_r_traj_bps: s.std_r_traj,
            mean_handovers: s.mean_handovers,
            median_handovers: s.median_handovers,
            rate_fluctuation_bps: s.rate_fluctuation,
            mean_renewals: s.mean_renewals,
        };
        Ok(())
    })
}

/// Write the per-location metrics CSV of every policy to `path`.
///
/// # Safety
/// `exp` must be a live experiment handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mmwho_experiment_write_metrics(exp: *const MmwhoExperiment, path: *const c_char) -> MmwhoStatus {
    guard(|| {
        let exp = exp.as_ref().ok_or_else(|| null("experiment"))?;
        let path = str_arg(path, "path")?;
        let file = File::create(path).map_err(|e| fail(e.into()))?;
        let rows = exp.0.runs.iter().flat_map(csv_io::metrics_rows);
        csv_io::write_metrics(BufWriter::new(file), rows).map_err(fail)
    })
}

/// Run the built-in checks; `failed` receives how many did not pass.
///
/// # Safety
/// `failed` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mmwho_validate(failed: *mut u32) -> MmwhoStatus {
    guard(|| {
        let failed = failed.as_mut().ok_or_else(|| null("failed"))?;
        *failed = checks::run_all().iter().filter(|c| !c.passed).count() as u32;
        Ok(())
    })
}

/// LoS probability at 3D distance `d` meters.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mmwho_los_probability(d: f64, out: *mut f64) -> MmwhoStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = mmwave_ho::environment::los_probability(d).map_err(fail)?;
        Ok(())
    })
}

/// Achievable rate in bit/s for a linear SNR and a bandwidth in Hz.
#[no_mangle]
pub extern "C" fn mmwho_rate_bps(snr_linear: f64, bandwidth_hz: f64) -> f64 {
    mmwave_ho::channel::rate_bps(snr_linear, bandwidth_hz)
}
