//! C ABI over the job-shop environment and dispatching rules.
//!
//! Handles are opaque and owned by the caller once created; release them with
//! the matching `*_free`. Every fallible call returns a [`JobshopStatus`];
//! on failure [`jobshop_last_error`] describes the most recent error on the
//! calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use jobshop::env::{EnvConfig, EnvError, JobShopEnv, RolloutBudget};
use jobshop::instance::{generate_random, lower_bound, parse, Format, Instance};
use jobshop::{dispatch, Rule, RuleKind};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JobshopStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidArgument = 4,
    BufferTooSmall = 5,
    EpisodeFinished = 6,
    EnvError = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JobshopFormat {
    Standard = 0,
    Taillard = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JobshopRule {
    Spt = 0,
    Lpt = 1,
    Fifo = 2,
    Mwkr = 3,
    Random = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JobshopBudget {
    /// Twice the best rule makespan.
    Auto = 0,
    /// Use the `budget` argument as the time ceiling.
    Fixed = 1,
    Unbounded = 2,
}

/// Outcome of one environment step; read the next observation separately.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct JobshopStep {
    pub reward: f64,
    pub done: bool,
    pub truncated: bool,
    pub invalid: bool,
    pub clock: u64,
}

/// Opaque parsed instance.
pub struct JobshopInstance(Instance);

/// Opaque environment bound to one instance.
pub struct JobshopEnv(JobShopEnv);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

type Fallible<T> = Result<T, (JobshopStatus, String)>;

fn fail<T>(status: JobshopStatus, msg: impl Into<String>) -> Fallible<T> {
    Err((status, msg.into()))
}

/// Runs `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Fallible<()>) -> JobshopStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => JobshopStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            JobshopStatus::Panic
        }
    }
}

fn env_status(e: EnvError) -> (JobshopStatus, String) {
    let status = match e {
        EnvError::EpisodeFinished => JobshopStatus::EpisodeFinished,
        EnvError::ActionOutOfRange { .. } => JobshopStatus::InvalidArgument,
        _ => JobshopStatus::EnvError,
    };
    (status, e.to_string())
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Fallible<&'a T> {
    p.as_ref()
        .map_or_else(|| fail(JobshopStatus::NullPointer, format!("{what} is null")), Ok)
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Fallible<&'a mut T> {
    p.as_mut()
        .map_or_else(|| fail(JobshopStatus::NullPointer, format!("{what} is null")), Ok)
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, need: usize, what: &str) -> Fallible<&'a mut [T]> {
    if p.is_null() {
        return fail(JobshopStatus::NullPointer, format!("{what} is null"));
    }
    if len < need {
        return fail(
            JobshopStatus::BufferTooSmall,
            format!("{what} holds {len} entries, {need} needed"),
        );
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

fn into_c_string(s: String) -> Fallible<*mut c_char> {
    CString::new(s)
        .map(CString::into_raw)
        .or_else(|_| fail(JobshopStatus::EnvError, "string contains NUL"))
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn jobshop_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses a NUL-terminated instance text.
///
/// # Safety
/// `text` must be a valid C string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn jobshop_instance_parse(
    text: *const c_char,
    format: JobshopFormat,
    out: *mut *mut JobshopInstance,
) -> JobshopStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        *out = ptr::null_mut();
        if text.is_null() {
            return fail(JobshopStatus::NullPointer, "text is null");
        }
        let text = CStr::from_ptr(text)
            .to_str()
            .or_else(|e| fail(JobshopStatus::InvalidUtf8, e.to_string()))?;
        let format = match format {
            JobshopFormat::Standard => Format::Standard,
            JobshopFormat::Taillard => Format::Taillard,
        };
        let inst = parse(text, format).or_else(|e| fail(JobshopStatus::ParseError, e.to_string()))?;
        *out = Box::into_raw(Box::new(JobshopInstance(inst)));
        Ok(())
    })
}

/// Generates a seeded random instance with durations in `[min_duration, max_duration]`.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn jobshop_instance_random(
    n_jobs: usize,
    n_machines: usize,
    min_duration: u64,
    max_duration: u64,
    seed: u64,
    out: *mut *mut JobshopInstance,
) -> JobshopStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        *out = ptr::null_mut();
        let inst = generate_random(n_jobs, n_machines, min_duration..=max_duration, seed)
            .or_else(|e| fail(JobshopStatus::InvalidArgument, e.to_string()))?;
        *out = Box::into_raw(Box::new(JobshopInstance(inst)));
        Ok(())
    })
}

/// Releases an instance; NULL is ignored.
///
/// # Safety
/// `inst` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn jobshop_instance_free(inst: *mut JobshopInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// # Safety
/// `inst` must be a live instance; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn jobshop_instance_dims(
    inst: *const JobshopInstance,
    n_jobs: *mut usize,
    n_machines: *mut usize,
) -> JobshopStatus {
    guard(|| {
        let inst = &deref(inst, "instance")?.0;
        *deref_mut(n_jobs, "n_jobs")? = inst.n_jobs();
        *deref_mut(n_machines, "n_machines")? = inst.n_machines();
        Ok(())
    })
}

/// Larger of the heaviest machine load and the longest job.
///
/// # Safety
/// `inst` must be a live instance and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn jobshop_instance_lower_bound(inst: *const JobshopInstance, out: *mut u64) -> JobshopStatus {
    guard(|| {
        let inst = &deref(inst, "instance")?.0;
        *deref_mut(out, "out")? = lower_bound(inst);
        Ok(())
    })
}

/// Runs a dispatching rule to completion. `schedule_json` may be NULL; when
/// not, it receives a schedule record to release with [`jobshop_string_free`].
/// `seed` only matters for [`JobshopRule::Random`].
///
/// # Safety
/// `inst` must be a live instance and `makespan` writable.
#[no_mangle]
pub unsafe extern "C" fn jobshop_dispatch(
    inst: *const JobshopInstance,
    rule: JobshopRule,
    seed: u64,
    makespan: *mut u64,
    schedule_json: *mut *mut c_char,
) -> JobshopStatus {
    guard(|| {
        let inst = &deref(inst, "instance")?.0;
        let makespan = deref_mut(makespan, "makespan")?;
        let kind = match rule {
            JobshopRule::Spt => RuleKind::Spt,
            JobshopRule::Lpt => RuleKind::Lpt,
            JobshopRule::Fifo => RuleKind::Fifo,
            JobshopRule::Mwkr => RuleKind::Mwkr,
            JobshopRule::Random => RuleKind::Random,
        };
        let schedule = dispatch(inst, Rule::with_seed(kind, seed));
        *makespan = schedule.makespan();
        if let Some(out) = schedule_json.as_mut() {
            *out = into_c_string(schedule.to_record_string())?;
        }
        Ok(())
    })
}

/// Releases a string returned by this library; NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn jobshop_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates an environment over a copy of `inst`, already reset.
/// `budget` is read only with [`JobshopBudget::Fixed`].
///
/// # Safety
/// `inst` must be a live instance and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn jobshop_env_new(
    inst: *const JobshopInstance,
    budget_kind: JobshopBudget,
    budget: u64,
    out: *mut *mut JobshopEnv,
) -> JobshopStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        *out = ptr::null_mut();
        let inst = &deref(inst, "instance")?.0;
        let rollout_budget = match budget_kind {
            JobshopBudget::Auto => RolloutBudget::Auto,
            JobshopBudget::Fixed if budget == 0 => return fail(JobshopStatus::InvalidArgument, "fixed budget must be positive"),
            JobshopBudget::Fixed => RolloutBudget::Fixed(budget),
            JobshopBudget::Unbounded => RolloutBudget::Unbounded,
        };
        let config = EnvConfig {
            rollout_budget,
            ..EnvConfig::default()
        };
        *out = Box::into_raw(Box::new(JobshopEnv(JobShopEnv::new(inst.clone(), config))));
        Ok(())
    })
}

/// Releases an environment; NULL is ignored.
///
/// # Safety
/// `env` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn jobshop_env_free(env: *mut JobshopEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Length of the flattened observation, `3m + 2n + nm`.
///
/// # Safety
/// `env` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn jobshop_env_observation_dim(env: *const JobshopEnv, out: *mut usize) -> JobshopStatus {
    guard(|| {
        *deref_mut(out, "out")? = deref(env, "env")?.0.observation_dim();
        Ok(())
    })
}

/// # Safety
/// `env` must be live.
#[no_mangle]
pub unsafe extern "C" fn jobshop_env_reset(env: *mut JobshopEnv) -> JobshopStatus {
    guard(|| {
        deref_mut(env, "env")?.0.reset();
        Ok(())
    })
}

/// Writes the current observation into `obs[0..observation_dim]`.
///
/// # Safety
/// `env` must be live and `obs` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn jobshop_env_observation(env: *const JobshopEnv, obs: *mut f64, len: usize) -> JobshopStatus {
    guard(|| {
        let env = &deref(env, "env")?.0;
        let buf = out_slice(obs, len, env.observation_dim(), "obs")?;
        env.observation().write_features(buf);
        Ok(())
    })
}

/// Writes the eligibility mask into `mask[0..n_jobs]`.
///
/// # Safety
/// `env` must be live and `mask` must hold `len` writable bools.
#[no_mangle]
pub unsafe extern "C" fn jobshop_env_action_mask(env: *const JobshopEnv, mask: *mut bool, len: usize) -> JobshopStatus {
    guard(|| {
        let env = &deref(env, "env")?.0;
        let src = env.action_mask();
        out_slice(mask, len, src.len(), "mask")?.copy_from_slice(src);
        Ok(())
    })
}

/// Assigns the next operation of job `action`.
///
/// # Safety
/// `env` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn jobshop_env_step(env: *mut JobshopEnv, action: usize, out: *mut JobshopStep) -> JobshopStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let res = deref_mut(env, "env")?.0.step(action).map_err(env_status)?;
        *out = JobshopStep {
            reward: res.reward,
            done: res.done,
            truncated: res.truncated,
            invalid: res.info.invalid,
            clock: res.info.clock,
        };
        Ok(())
    })
}

/// Makespan of the completed episode.
///
/// # Safety
/// `env` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn jobshop_env_makespan(env: *const JobshopEnv, out: *mut u64) -> JobshopStatus {
    guard(|| {
        let ms = deref(env, "env")?.0.makespan().map_err(env_status)?;
        *deref_mut(out, "out")? = ms;
        Ok(())
    })
}

/// Assignments made so far as a schedule record; free with [`jobshop_string_free`].
///
/// # Safety
/// `env` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn jobshop_env_schedule_json(env: *const JobshopEnv, out: *mut *mut c_char) -> JobshopStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        *out = into_c_string(deref(env, "env")?.0.schedule().to_record_string())?;
        Ok(())
    })
}
