//! C ABI for the seqeval harness.
//!
//! Handles are opaque pointers created and freed by this library. Every
//! fallible call returns a [`SeqevalStatus`]; on failure a message is
//! stored per thread and can be copied out with
//! [`seqeval_last_error_message`]. Pointers returned through out-params
//! are only valid on `SEQEVAL_STATUS_OK`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::str::FromStr;

use seqeval::algorithms::{AlgorithmKind, Hyperparams};
use seqeval::dataset::{OfflineDataset, Tier};
use seqeval::engine::{
    run_minibatch, run_seqeval, EvalMetric, Phase, RunConfig, RunOutcome,
};
use seqeval::envs::{chain, gridworld, GridworldConfig, StartMode};
use seqeval::error::SeqEvalError;
use seqeval::mdp::MdpSpec;
use seqeval::metrics::{finetune_uplift, iqm, optimality_gap, perf_at};
use seqeval::tiers::{build_tier_datasets, TierBuildConfig};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqevalStatus {
    Ok = 0,
    NullPointer = 1,
    Utf8 = 2,
    InvalidInput = 3,
    Format = 4,
    Protocol = 5,
    Config = 6,
    DegenerateReference = 7,
    Io = 8,
    /// A requested value is undefined for this input (for example Perf@50%
    /// of a curve with no point at or below the threshold).
    Undefined = 9,
    Panic = 10,
}

/// Opaque environment handle.
pub struct SeqevalMdp(MdpSpec);

/// Opaque dataset handle.
pub struct SeqevalDataset(OfflineDataset);

/// Opaque handle to a finished run: the learning curve plus its report.
pub struct SeqevalCurve(RunOutcome);

/// One evaluation point of a curve.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SeqevalEvalPoint {
    pub data_count: u64,
    pub grad_steps: u64,
    pub raw_score: f64,
    pub norm_score: f64,
    /// 0 while offline data is being revealed, 1 during online fine-tuning.
    pub online: i32,
}

/// Run parameters. Counts of 0 pick the same defaults as the command-line
/// front end: `t0 = min(500, dataset size)` and an evaluation grid of one
/// percent of the dataset.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SeqevalRunOptions {
    pub t0: u64,
    pub gamma_increment: u64,
    pub k_steps: u64,
    pub eval_every: u64,
    pub eval_episodes: u64,
    pub online_steps: u64,
    pub seed: u64,
    pub learning_rate: f64,
    pub discount: f64,
    pub cql_alpha: f64,
    pub bc_weight: f64,
    pub target_sync_every: u64,
    pub batch_size: u64,
    pub explore_epsilon: f64,
    pub q_init: f64,
    /// 0 scores by simulator rollouts, 1 by fitted Q evaluation.
    pub use_fqe_metric: i32,
    pub fqe_iterations: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(err: &SeqEvalError) -> SeqevalStatus {
    set_error(&err.to_string());
    match err {
        SeqEvalError::InvalidInput(_) => SeqevalStatus::InvalidInput,
        SeqEvalError::Format { .. } => SeqevalStatus::Format,
        SeqEvalError::Protocol(_) => SeqevalStatus::Protocol,
        SeqEvalError::Config(_) => SeqevalStatus::Config,
        SeqEvalError::DegenerateReference(_) => SeqevalStatus::DegenerateReference,
        SeqEvalError::Io { .. } => SeqevalStatus::Io,
    }
}

fn guarded(f: impl FnOnce() -> SeqevalStatus) -> SeqevalStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic in seqeval-ffi".to_string());
            set_error(&message);
            SeqevalStatus::Panic
        }
    }
}

/// Copies a UTF-8 string argument, recording an error status on failure.
unsafe fn read_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, SeqevalStatus> {
    if ptr.is_null() {
        set_error(&format!("{what} is null"));
        return Err(SeqevalStatus::NullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(&format!("{what} is not valid UTF-8"));
        SeqevalStatus::Utf8
    })
}

fn require_out<T>(out: *mut T, what: &str) -> Result<(), SeqevalStatus> {
    if out.is_null() {
        set_error(&format!("{what} out-pointer is null"));
        Err(SeqevalStatus::NullPointer)
    } else {
        Ok(())
    }
}

unsafe fn require_ref<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, SeqevalStatus> {
    if ptr.is_null() {
        set_error(&format!("{what} handle is null"));
        Err(SeqevalStatus::NullPointer)
    } else {
        Ok(&*ptr)
    }
}

/// Bytes of the last error message on this thread, excluding the
/// terminator.
#[no_mangle]
pub extern "C" fn seqeval_last_error_length() -> usize {
    LAST_ERROR.with(|slot| slot.borrow().as_bytes().len())
}

/// Copies the last error message (NUL-terminated, truncated to `cap`)
/// into `buf`; returns the number of bytes copied excluding the
/// terminator.
///
/// # Safety
/// `buf` must point to at least `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn seqeval_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    if buf.is_null() || cap == 0 {
        return 0;
    }
    LAST_ERROR.with(|slot| {
        let message = slot.borrow();
        let bytes = message.as_bytes();
        let take = bytes.len().min(cap - 1);
        std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast(), take);
        *buf.add(take) = 0;
        take
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn seqeval_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---------------------------------------------------------------------------
// Environments
// ---------------------------------------------------------------------------

/// Loads an environment from its structured text file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn seqeval_mdp_load(
    path: *const c_char,
    out: *mut *mut SeqevalMdp,
) -> SeqevalStatus {
    guarded(|| {
        let path = match read_str(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        if let Err(s) = require_out(out, "mdp") {
            return s;
        }
        match MdpSpec::load(path) {
            Ok(mdp) => {
                *out = Box::into_raw(Box::new(SeqevalMdp(mdp)));
                SeqevalStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Writes an environment to its structured text file.
///
/// # Safety
/// `mdp` must be a live handle; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn seqeval_mdp_save(
    mdp: *const SeqevalMdp,
    path: *const c_char,
) -> SeqevalStatus {
    guarded(|| {
        let mdp = match require_ref(mdp, "mdp") {
            Ok(m) => m,
            Err(s) => return s,
        };
        let path = match read_str(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match mdp.0.save(path) {
            Ok(()) => SeqevalStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}

/// Builds the deterministic chain environment.
///
/// # Safety
/// `name` must be NUL-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn seqeval_mdp_chain(
    name: *const c_char,
    n_states: u64,
    step_reward: f64,
    goal_reward: f64,
    horizon: u64,
    out: *mut *mut SeqevalMdp,
) -> SeqevalStatus {
    guarded(|| {
        let name = match read_str(name, "name") {
            Ok(n) => n,
            Err(s) => return s,
        };
        if let Err(s) = require_out(out, "mdp") {
            return s;
        }
        if n_states < 2 {
            set_error("chain needs at least two states");
            return SeqevalStatus::InvalidInput;
        }
        let mdp = chain(name, n_states as usize, step_reward, goal_reward, horizon as usize);
        *out = Box::into_raw(Box::new(SeqevalMdp(mdp)));
        SeqevalStatus::Ok
    })
}

/// Builds a gridworld. `walls_xy` holds `walls_len` (x, y) pairs
/// flattened; pass null with `walls_len = 0` for an open grid. Negative
/// `start_x`/`start_y` select a uniform start over free cells.
///
/// # Safety
/// `name` must be NUL-terminated; `walls_xy` must hold `2 * walls_len`
/// readable values when non-null; `out` must be a valid pointer.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn seqeval_mdp_gridworld(
    name: *const c_char,
    width: u64,
    height: u64,
    walls_xy: *const u64,
    walls_len: usize,
    slip: f64,
    step_reward: f64,
    goal_reward: f64,
    start_x: i64,
    start_y: i64,
    goal_x: u64,
    goal_y: u64,
    horizon: u64,
    out: *mut *mut SeqevalMdp,
) -> SeqevalStatus {
    guarded(|| {
        let name = match read_str(name, "name") {
            Ok(n) => n,
            Err(s) => return s,
        };
        if let Err(s) = require_out(out, "mdp") {
            return s;
        }
        let mut walls = Vec::with_capacity(walls_len);
        if walls_len > 0 {
            if walls_xy.is_null() {
                set_error("walls_xy is null but walls_len > 0");
                return SeqevalStatus::NullPointer;
            }
            for i in 0..walls_len {
                let x = *walls_xy.add(2 * i) as usize;
                let y = *walls_xy.add(2 * i + 1) as usize;
                walls.push((x, y));
            }
        }
        let start = if start_x < 0 || start_y < 0 {
            StartMode::UniformFree
        } else {
            StartMode::Fixed(start_x as usize, start_y as usize)
        };
        let cfg = GridworldConfig {
            name: name.to_string(),
            width: width as usize,
            height: height as usize,
            walls,
            slip,
            step_reward,
            goal_reward,
            start,
            goal: (goal_x as usize, goal_y as usize),
            horizon: horizon as usize,
        };
        match gridworld(&cfg) {
            Ok(mdp) => {
                *out = Box::into_raw(Box::new(SeqevalMdp(mdp)));
                SeqevalStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Frees an environment handle; null is ignored.
///
/// # Safety
/// `mdp` must have come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn seqeval_mdp_free(mdp: *mut SeqevalMdp) {
    if !mdp.is_null() {
        drop(Box::from_raw(mdp));
    }
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

/// Builds the six standard dataset tiers for `mdp` and writes them (plus
/// the environment file and policy checkpoints) into `out_dir`, as the
/// `make-datasets` command does. Zero counts pick the built-in defaults.
///
/// # Safety
/// `mdp` must be a live handle; `out_dir` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn seqeval_make_datasets(
    mdp: *const SeqevalMdp,
    out_dir: *const c_char,
    transitions_per_tier: u64,
    train_steps: u64,
    seed: u64,
) -> SeqevalStatus {
    guarded(|| {
        let mdp = match require_ref(mdp, "mdp") {
            Ok(m) => m,
            Err(s) => return s,
        };
        let out_dir = match read_str(out_dir, "out_dir") {
            Ok(d) => d,
            Err(s) => return s,
        };
        let mut cfg = TierBuildConfig {
            seed,
            ..TierBuildConfig::default()
        };
        if transitions_per_tier > 0 {
            cfg.transitions_per_tier = transitions_per_tier as usize;
        }
        if train_steps > 0 {
            cfg.train_steps = train_steps as usize;
        }
        let built = match build_tier_datasets(&mdp.0, &[], &cfg) {
            Ok(b) => b,
            Err(e) => return fail(&e),
        };
        let dir = std::path::Path::new(out_dir);
        if let Err(e) = std::fs::create_dir_all(dir) {
            return fail(&SeqEvalError::io(out_dir, e));
        }
        if let Err(e) = mdp.0.save(dir.join("env.mdp")) {
            return fail(&e);
        }
        for (tier, dataset) in &built.datasets {
            if let Err(e) = dataset.persist(dir.join(format!("{tier}.ds"))) {
                return fail(&e);
            }
        }
        SeqevalStatus::Ok
    })
}

/// Loads a dataset file.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn seqeval_dataset_load(
    path: *const c_char,
    out: *mut *mut SeqevalDataset,
) -> SeqevalStatus {
    guarded(|| {
        let path = match read_str(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        if let Err(s) = require_out(out, "dataset") {
            return s;
        }
        match OfflineDataset::load(path) {
            Ok(dataset) => {
                *out = Box::into_raw(Box::new(SeqevalDataset(dataset)));
                SeqevalStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Writes a dataset file.
///
/// # Safety
/// `dataset` must be a live handle; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn seqeval_dataset_save(
    dataset: *const SeqevalDataset,
    path: *const c_char,
) -> SeqevalStatus {
    guarded(|| {
        let dataset = match require_ref(dataset, "dataset") {
            Ok(d) => d,
            Err(s) => return s,
        };
        let path = match read_str(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match dataset.0.persist(path) {
            Ok(()) => SeqevalStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}

/// Number of transitions, or 0 for a null handle.
///
/// # Safety
/// `dataset` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn seqeval_dataset_len(dataset: *const SeqevalDataset) -> usize {
    if dataset.is_null() {
        0
    } else {
        (*dataset).0.len()
    }
}

/// Frees a dataset handle; null is ignored.
///
/// # Safety
/// `dataset` must have come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn seqeval_dataset_free(dataset: *mut SeqevalDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

/// Fills `out` with the default run options.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn seqeval_run_options_default(out: *mut SeqevalRunOptions) -> SeqevalStatus {
    guarded(|| {
        if let Err(s) = require_out(out, "options") {
            return s;
        }
        let hyper = Hyperparams::default();
        *out = SeqevalRunOptions {
            t0: 0,
            gamma_increment: 1,
            k_steps: 1,
            eval_every: 0,
            eval_episodes: 10,
            online_steps: 0,
            seed: 0,
            learning_rate: hyper.learning_rate,
            discount: hyper.discount,
            cql_alpha: hyper.cql_alpha,
            bc_weight: hyper.bc_weight,
            target_sync_every: hyper.target_sync_every as u64,
            batch_size: hyper.batch_size as u64,
            explore_epsilon: hyper.explore_epsilon,
            q_init: hyper.q_init,
            use_fqe_metric: 0,
            fqe_iterations: 1000,
        };
        SeqevalStatus::Ok
    })
}

unsafe fn run_config_from(
    algorithm: *const c_char,
    options: *const SeqevalRunOptions,
    dataset_len: usize,
) -> Result<RunConfig, SeqevalStatus> {
    let algorithm = AlgorithmKind::from_str(read_str(algorithm, "algorithm")?)
        .map_err(|e| fail(&e))?;
    if options.is_null() {
        set_error("options pointer is null");
        return Err(SeqevalStatus::NullPointer);
    }
    let o = *options;
    let t0 = if o.t0 == 0 {
        500.min(dataset_len)
    } else {
        o.t0 as usize
    };
    let eval_every = if o.eval_every == 0 {
        (dataset_len / 100).max(1)
    } else {
        o.eval_every as usize
    };
    Ok(RunConfig {
        algorithm,
        hyper: Hyperparams {
            learning_rate: o.learning_rate,
            discount: o.discount,
            cql_alpha: o.cql_alpha,
            bc_weight: o.bc_weight,
            target_sync_every: o.target_sync_every as usize,
            batch_size: o.batch_size as usize,
            explore_epsilon: o.explore_epsilon,
            q_init: o.q_init,
        },
        t0,
        gamma_increment: o.gamma_increment as usize,
        k_steps: o.k_steps as usize,
        eval_every,
        eval_episodes: o.eval_episodes as usize,
        online_steps: o.online_steps as usize,
        seed: o.seed,
        eval_metric: if o.use_fqe_metric != 0 {
            EvalMetric::Fqe {
                iterations: o.fqe_iterations as usize,
            }
        } else {
            EvalMetric::Rollout
        },
    })
}

/// Runs the sequential protocol and returns a curve handle.
///
/// # Safety
/// `mdp` and `dataset` must be live handles; `algorithm` must be
/// NUL-terminated; `options` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn seqeval_run(
    mdp: *const SeqevalMdp,
    dataset: *const SeqevalDataset,
    algorithm: *const c_char,
    options: *const SeqevalRunOptions,
    out: *mut *mut SeqevalCurve,
) -> SeqevalStatus {
    guarded(|| {
        let mdp = match require_ref(mdp, "mdp") {
            Ok(m) => m,
            Err(s) => return s,
        };
        let dataset = match require_ref(dataset, "dataset") {
            Ok(d) => d,
            Err(s) => return s,
        };
        if let Err(s) = require_out(out, "curve") {
            return s;
        }
        let cfg = match run_config_from(algorithm, options, dataset.0.len()) {
            Ok(c) => c,
            Err(s) => return s,
        };
        match run_seqeval(&mdp.0, &dataset.0, &cfg) {
            Ok(outcome) => {
                *out = Box::into_raw(Box::new(SeqevalCurve(outcome)));
                SeqevalStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Runs the mini-batch baseline for `total_grad_steps` gradient steps.
///
/// # Safety
/// Same contract as [`seqeval_run`].
#[no_mangle]
pub unsafe extern "C" fn seqeval_run_minibatch(
    mdp: *const SeqevalMdp,
    dataset: *const SeqevalDataset,
    algorithm: *const c_char,
    options: *const SeqevalRunOptions,
    total_grad_steps: u64,
    out: *mut *mut SeqevalCurve,
) -> SeqevalStatus {
    guarded(|| {
        let mdp = match require_ref(mdp, "mdp") {
            Ok(m) => m,
            Err(s) => return s,
        };
        let dataset = match require_ref(dataset, "dataset") {
            Ok(d) => d,
            Err(s) => return s,
        };
        if let Err(s) = require_out(out, "curve") {
            return s;
        }
        let mut cfg = match run_config_from(algorithm, options, dataset.0.len()) {
            Ok(c) => c,
            Err(s) => return s,
        };
        cfg.t0 = dataset.0.len();
        match run_minibatch(&mdp.0, &dataset.0, &cfg, total_grad_steps) {
            Ok(outcome) => {
                *out = Box::into_raw(Box::new(SeqevalCurve(outcome)));
                SeqevalStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Number of evaluation points, or 0 for a null handle.
///
/// # Safety
/// `curve` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn seqeval_curve_len(curve: *const SeqevalCurve) -> usize {
    if curve.is_null() {
        0
    } else {
        (*curve).0.curve.points.len()
    }
}

/// Copies evaluation point `index` into `out`.
///
/// # Safety
/// `curve` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn seqeval_curve_point(
    curve: *const SeqevalCurve,
    index: usize,
    out: *mut SeqevalEvalPoint,
) -> SeqevalStatus {
    guarded(|| {
        let curve = match require_ref(curve, "curve") {
            Ok(c) => c,
            Err(s) => return s,
        };
        if let Err(s) = require_out(out, "point") {
            return s;
        }
        match curve.0.curve.points.get(index) {
            Some(p) => {
                *out = SeqevalEvalPoint {
                    data_count: p.data_count,
                    grad_steps: p.grad_steps,
                    raw_score: p.raw_score,
                    norm_score: p.norm_score,
                    online: i32::from(p.phase == Phase::Online),
                };
                SeqevalStatus::Ok
            }
            None => {
                set_error(&format!(
                    "point index {index} out of range ({} points)",
                    curve.0.curve.points.len()
                ));
                SeqevalStatus::InvalidInput
            }
        }
    })
}

/// Total gradient steps performed by the run, or 0 for a null handle.
///
/// # Safety
/// `curve` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn seqeval_curve_total_grad_steps(curve: *const SeqevalCurve) -> u64 {
    if curve.is_null() {
        0
    } else {
        (*curve).0.report.total_grad_steps
    }
}

/// Buffer indices never trained on over the run (0 in any draining
/// configuration), or 0 for a null handle.
///
/// # Safety
/// `curve` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn seqeval_curve_uncovered(curve: *const SeqevalCurve) -> u64 {
    if curve.is_null() {
        0
    } else {
        (*curve).0.report.uncovered
    }
}

/// Normalized score at the last offline point with data count at or below
/// `fraction` of the dataset; `SEQEVAL_STATUS_UNDEFINED` when no point
/// qualifies.
///
/// # Safety
/// `curve` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn seqeval_curve_perf_at(
    curve: *const SeqevalCurve,
    fraction: f64,
    out: *mut f64,
) -> SeqevalStatus {
    guarded(|| {
        let curve = match require_ref(curve, "curve") {
            Ok(c) => c,
            Err(s) => return s,
        };
        if let Err(s) = require_out(out, "perf") {
            return s;
        }
        match perf_at(&curve.0.curve, fraction) {
            Ok(Some(value)) => {
                *out = value;
                SeqevalStatus::Ok
            }
            Ok(None) => {
                set_error(&format!("no evaluation point at or below fraction {fraction}"));
                SeqevalStatus::Undefined
            }
            Err(e) => fail(&e),
        }
    })
}

/// Final online score minus final offline score;
/// `SEQEVAL_STATUS_UNDEFINED` without an online phase.
///
/// # Safety
/// `curve` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn seqeval_curve_finetune_uplift(
    curve: *const SeqevalCurve,
    out: *mut f64,
) -> SeqevalStatus {
    guarded(|| {
        let curve = match require_ref(curve, "curve") {
            Ok(c) => c,
            Err(s) => return s,
        };
        if let Err(s) = require_out(out, "uplift") {
            return s;
        }
        match finetune_uplift(&curve.0.curve) {
            Some(value) => {
                *out = value;
                SeqevalStatus::Ok
            }
            None => {
                set_error("curve has no online phase");
                SeqevalStatus::Undefined
            }
        }
    })
}

/// Frees a curve handle; null is ignored.
///
/// # Safety
/// `curve` must have come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn seqeval_curve_free(curve: *mut SeqevalCurve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}

// ---------------------------------------------------------------------------
// Aggregate metrics
// ---------------------------------------------------------------------------

/// Interquartile mean of `len` scores.
///
/// # Safety
/// `scores` must hold `len` readable values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn seqeval_iqm(
    scores: *const f64,
    len: usize,
    out: *mut f64,
) -> SeqevalStatus {
    guarded(|| {
        if scores.is_null() && len > 0 {
            set_error("scores pointer is null");
            return SeqevalStatus::NullPointer;
        }
        if let Err(s) = require_out(out, "iqm") {
            return s;
        }
        let slice: &[f64] = if len == 0 {
            &[]
        } else {
            std::slice::from_raw_parts(scores, len)
        };
        match iqm(slice) {
            Ok(value) => {
                *out = value;
                SeqevalStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Mean shortfall of `len` scores below `threshold`.
///
/// # Safety
/// `scores` must hold `len` readable values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn seqeval_optimality_gap(
    scores: *const f64,
    len: usize,
    threshold: f64,
    out: *mut f64,
) -> SeqevalStatus {
    guarded(|| {
        if scores.is_null() && len > 0 {
            set_error("scores pointer is null");
            return SeqevalStatus::NullPointer;
        }
        if let Err(s) = require_out(out, "gap") {
            return s;
        }
        let slice: &[f64] = if len == 0 {
            &[]
        } else {
            std::slice::from_raw_parts(scores, len)
        };
        match optimality_gap(slice, threshold) {
            Ok(value) => {
                *out = value;
                SeqevalStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Tier name strings accepted by dataset files, for binding authors.
///
/// # Safety
/// `index` selects a tier; returns null when out of range.
#[no_mangle]
pub unsafe extern "C" fn seqeval_tier_name(index: usize) -> *const c_char {
    const NAMES: [&str; 6] = [
        "random\0",
        "medium\0",
        "medium-replay\0",
        "medium-expert\0",
        "expert\0",
        "mixed\0",
    ];
    debug_assert_eq!(NAMES.len(), Tier::ALL.len());
    match NAMES.get(index) {
        Some(name) => name.as_ptr().cast(),
        None => std::ptr::null(),
    }
}
