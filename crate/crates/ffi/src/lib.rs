//! C ABI over `admission-lab`.
//!
//! Objects cross the boundary as opaque pointers created by `al_*_new` and
//! released by the matching `al_*_free`. Every fallible call returns an
//! [`AlStatus`]; on failure the message is available from [`al_last_error`]
//! on the same thread. Panics are caught and reported as `AL_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use admission_lab::config::parse_config;
use admission_lab::engine::{RunOptions, Simulation};
use admission_lab::experiment::{run_experiment, summary_bytes, RunRecord};
use admission_lab::group::{Bounds, GroupState};
use admission_lab::rng::SimRng;
use admission_lab::rules::RuleSpec;
use admission_lab::{oracles, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Domain = 3,
    Range = 4,
    State = 5,
    Precondition = 6,
    Construction = 7,
    Unsupported = 8,
    Config = 9,
    Io = 10,
    Panic = 11,
}

/// Values accepted by the `rule` argument of [`al_simulation_new`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlRule {
    Majority = 0,
    Consensus = 1,
    Veto = 2,
}

/// A growing group of opinions in `[0, 1]`.
pub struct AlGroup(GroupState);

/// A simulation in progress.
pub struct AlSimulation(Simulation);

/// A finished experiment.
pub struct AlRun(RunRecord);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn fail(status: AlStatus, message: impl Into<String>) -> AlStatus {
    set_error(message.into());
    status
}

fn from_error(e: Error) -> AlStatus {
    let status = match &e {
        Error::Domain(_) => AlStatus::Domain,
        Error::Range(_) => AlStatus::Range,
        Error::State(_) => AlStatus::State,
        Error::Precondition(_) => AlStatus::Precondition,
        Error::Construction(_) => AlStatus::Construction,
        Error::Unsupported(_) => AlStatus::Unsupported,
        Error::Config { .. } => AlStatus::Config,
        Error::Io(_) => AlStatus::Io,
    };
    fail(status, e.to_string())
}

/// Runs `body`, turning errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), AlStatus>) -> AlStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => AlStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(AlStatus::Panic, format!("panic: {msg}"))
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, AlStatus>;
}

impl<T> OrStatus<T> for admission_lab::Result<T> {
    fn or_status(self) -> Result<T, AlStatus> {
        self.map_err(from_error)
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, AlStatus> {
    p.as_ref().ok_or_else(|| fail(AlStatus::NullPointer, format!("{what} is null")))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, AlStatus> {
    p.as_mut().ok_or_else(|| fail(AlStatus::NullPointer, format!("{what} is null")))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), AlStatus> {
    if out.is_null() {
        return Err(fail(AlStatus::NullPointer, "output pointer is null"));
    }
    out.write(value);
    Ok(())
}

unsafe fn slice<'a>(data: *const f64, len: usize) -> Result<&'a [f64], AlStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(fail(AlStatus::NullPointer, "array is null"));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

/// The message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn al_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn al_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must be valid for writing one `double`.
#[no_mangle]
pub unsafe extern "C" fn al_f_majority(q: f64, out: *mut f64) -> AlStatus {
    guard(|| write_out(out, oracles::f_majority(q).or_status()?))
}

/// # Safety
/// `out` must be valid for writing one `double`.
#[no_mangle]
pub unsafe extern "C" fn al_f_veto(q: f64, out: *mut f64) -> AlStatus {
    guard(|| write_out(out, oracles::f_veto(q).or_status()?))
}

/// The limit of the `p`-quantile under veto, for `p ∈ (1/2, 1]`.
///
/// # Safety
/// `out` must be valid for writing one `double`.
#[no_mangle]
pub unsafe extern "C" fn al_tau(p: f64, out: *mut f64) -> AlStatus {
    guard(|| write_out(out, oracles::tau(p).or_status()?))
}

/// Builds a group from `len` opinions (`values` may be null when `len` is 0).
///
/// # Safety
/// `values` must point to `len` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn al_group_new(values: *const f64, len: usize, out: *mut *mut AlGroup) -> AlStatus {
    guard(|| {
        let values = slice(values, len)?;
        let group = GroupState::from_opinions(values.iter().copied()).or_status()?;
        write_out(out, Box::into_raw(Box::new(AlGroup(group))))
    })
}

/// # Safety
/// `group` must come from [`al_group_new`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn al_group_free(group: *mut AlGroup) {
    if !group.is_null() {
        drop(Box::from_raw(group));
    }
}

/// # Safety
/// `group` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn al_group_insert(group: *mut AlGroup, x: f64) -> AlStatus {
    guard(|| deref_mut(group, "group")?.0.insert(x).or_status())
}

/// # Safety
/// `group` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn al_group_len(group: *const AlGroup, out: *mut usize) -> AlStatus {
    guard(|| write_out(out, deref(group, "group")?.0.len()))
}

/// The member of rank `max(1, ⌈p·k⌉)`.
///
/// # Safety
/// `group` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn al_group_quantile(group: *const AlGroup, p: f64, out: *mut f64) -> AlStatus {
    guard(|| write_out(out, deref(group, "group")?.0.quantile(p).or_status()?))
}

/// The `rank`-th smallest member, counting from 1.
///
/// # Safety
/// `group` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn al_group_select(group: *const AlGroup, rank: usize, out: *mut f64) -> AlStatus {
    guard(|| write_out(out, deref(group, "group")?.0.select(rank).or_status()?))
}

/// Members in `[lo, hi]` when `closed`, else in `[lo, hi)`.
///
/// # Safety
/// `group` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn al_group_count_interval(
    group: *const AlGroup,
    lo: f64,
    hi: f64,
    closed: bool,
    out: *mut usize,
) -> AlStatus {
    guard(|| {
        let bounds = if closed { Bounds::Closed } else { Bounds::HalfOpen };
        write_out(out, deref(group, "group")?.0.count_interval(lo, hi, bounds).or_status()?)
    })
}

/// Starts a simulation from `len` initial opinions. `r` is only read for veto.
///
/// # Safety
/// `initial` must point to `len` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn al_simulation_new(
    rule: u32,
    r: f64,
    initial: *const f64,
    len: usize,
    seed: u64,
    out: *mut *mut AlSimulation,
) -> AlStatus {
    guard(|| {
        let spec = match rule {
            x if x == AlRule::Majority as u32 => RuleSpec::majority(),
            x if x == AlRule::Consensus as u32 => RuleSpec::consensus(),
            x if x == AlRule::Veto as u32 => RuleSpec::veto(r).or_status()?,
            other => return Err(fail(AlStatus::Domain, format!("unknown rule {other}"))),
        };
        let group = GroupState::from_opinions(slice(initial, len)?.iter().copied()).or_status()?;
        let sim = Simulation::new(group, spec, SimRng::new(seed), RunOptions::default()).or_status()?;
        write_out(out, Box::into_raw(Box::new(AlSimulation(sim))))
    })
}

/// # Safety
/// `sim` must come from [`al_simulation_new`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn al_simulation_free(sim: *mut AlSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Steps until `accepted` admissions in total, giving up after `max_steps`
/// further raw steps (0 means no limit).
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn al_simulation_run(sim: *mut AlSimulation, accepted: u64, max_steps: u64) -> AlStatus {
    guard(|| {
        let sim = &mut deref_mut(sim, "simulation")?.0;
        let limit = if max_steps == 0 { u64::MAX } else { sim.steps().saturating_add(max_steps) };
        while sim.accepted() < accepted && sim.steps() < limit {
            if sim.step().or_status()?.is_none() {
                break;
            }
        }
        Ok(())
    })
}

/// Raw steps and admissions so far; either pointer may be null.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn al_simulation_counts(sim: *const AlSimulation, steps: *mut u64, accepted: *mut u64) -> AlStatus {
    guard(|| {
        let sim = &deref(sim, "simulation")?.0;
        if !steps.is_null() {
            steps.write(sim.steps());
        }
        if !accepted.is_null() {
            accepted.write(sim.accepted());
        }
        Ok(())
    })
}

/// The quantile driving the rule (the median for majority and consensus).
///
/// # Safety
/// `sim` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn al_simulation_quantile(sim: *const AlSimulation, out: *mut f64) -> AlStatus {
    guard(|| {
        let sim = &deref(sim, "simulation")?.0;
        write_out(out, sim.group().quantile(sim.rule().p()).or_status()?)
    })
}

/// Runs an experiment described by a JSON config (any kind). Output
/// directories in the config are ignored; use the summary instead.
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn al_run_config(config_json: *const c_char, out: *mut *mut AlRun) -> AlStatus {
    guard(|| {
        if config_json.is_null() {
            return Err(fail(AlStatus::NullPointer, "config is null"));
        }
        let text = CStr::from_ptr(config_json)
            .to_str()
            .map_err(|e| fail(AlStatus::InvalidUtf8, format!("config is not UTF-8: {e}")))?;
        let config = parse_config(text).or_status()?;
        let record = run_experiment(&config).or_status()?;
        write_out(out, Box::into_raw(Box::new(AlRun(record))))
    })
}

/// # Safety
/// `run` must come from [`al_run_config`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn al_run_free(run: *mut AlRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Whether every verdict of the run passed.
///
/// # Safety
/// `run` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn al_run_passed(run: *const AlRun, out: *mut bool) -> AlStatus {
    guard(|| write_out(out, deref(run, "run")?.0.passed()))
}

/// The run's summary JSON, the same bytes the CLI writes to `summary.json`.
/// Release it with [`al_string_free`].
///
/// # Safety
/// `run` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn al_run_summary_json(run: *const AlRun, out: *mut *mut c_char) -> AlStatus {
    guard(|| {
        let bytes = summary_bytes(&deref(run, "run")?.0);
        let text = CString::new(bytes).map_err(|_| fail(AlStatus::InvalidUtf8, "summary contains NUL"))?;
        write_out(out, text.into_raw())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn al_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
