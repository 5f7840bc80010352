//! C interface to `hrsnn`.
//!
//! Every fallible function returns an [`HrsnnStatus`]; on failure the message
//! is available from [`hrsnn_last_error`] on the same thread. Objects cross
//! the boundary as opaque handles and must be released with their `_free`
//! function. Strings returned by the library are released with
//! [`hrsnn_string_free`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Mutex;

use hrsnn::experiment::commands::{bo_settings, run_optimize};
use hrsnn::experiment::pipeline::{build_network, search_space};
use hrsnn::experiment::{run_pipeline, ExperimentConfig, Variant};
use hrsnn::gp::{bo_loop, expected_improvement, matern, MaternParams};
use hrsnn::ot::{sinkhorn, sliced_w2, sq_euclidean, w2_1d, EmpiricalDistribution};
use hrsnn::separability::effective_rank_of;
use hrsnn::sim::{Network, SpikeEvent, SpikeTrain};
use hrsnn::Error;
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HrsnnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numeric = 3,
    Config = 4,
    Io = 5,
    Objective = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Heterogeneity variant: neurons (N) and STDP (S), homogeneous (Ho) or
/// heterogeneous (He).
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HrsnnVariant {
    HoNHoS = 0,
    HeNHoS = 1,
    HoNHeS = 2,
    HeNHeS = 3,
}

impl From<HrsnnVariant> for Variant {
    fn from(v: HrsnnVariant) -> Self {
        match v {
            HrsnnVariant::HoNHoS => Variant::HoNHoS,
            HrsnnVariant::HeNHoS => Variant::HeNHoS,
            HrsnnVariant::HoNHeS => Variant::HoNHeS,
            HrsnnVariant::HeNHeS => Variant::HeNHeS,
        }
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HrsnnMetrics {
    pub accuracy: f64,
    pub train_accuracy: f64,
    pub mean_activation: f64,
    pub active_neurons: usize,
    pub ac_ops: u64,
    pub effective_rank: usize,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HrsnnActivation {
    pub avg_activation: f64,
    pub active_neuron_count: usize,
    pub ac_ops: u64,
    pub total_spikes: u64,
}

/// Opaque experiment configuration.
pub struct HrsnnConfig(ExperimentConfig);

/// Opaque reservoir network.
pub struct HrsnnNetwork(Network);

/// Scores one candidate, given as a JSON object of parameter values. Writes
/// the score (higher is better) to `score` and returns 0, or returns nonzero
/// to mark the evaluation as failed.
pub type HrsnnObjective =
    Option<unsafe extern "C" fn(user_data: *mut c_void, candidate_json: *const c_char, score: *mut f64) -> i32>;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> HrsnnStatus {
    match e {
        Error::NumericDomain(_) | Error::NotConverged { .. } | Error::IllConditioned { .. } | Error::Fit(_) => {
            HrsnnStatus::Numeric
        }
        Error::Config { .. } => HrsnnStatus::Config,
        Error::Io(_) | Error::Csv(_) => HrsnnStatus::Io,
        Error::Objective(_) => HrsnnStatus::Objective,
        _ => HrsnnStatus::InvalidArgument,
    }
}

struct Fail(HrsnnStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(HrsnnStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(HrsnnStatus::InvalidArgument, msg.into())
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HrsnnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HrsnnStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            HrsnnStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn config<'a>(p: *const HrsnnConfig) -> Result<&'a ExperimentConfig, Fail> {
    p.as_ref().map(|c| &c.0).ok_or_else(|| null("config"))
}

fn into_c_string(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| invalid("string contains a NUL byte"))
}

/// Distribution over `n` points of dimension `dim`; `weights` may be null
/// for uniform weights.
unsafe fn distribution(
    points: *const f64,
    weights: *const f64,
    n: usize,
    dim: usize,
) -> Result<EmpiricalDistribution, Fail> {
    if dim == 0 {
        return Err(invalid("dimension must be >= 1"));
    }
    let flat = slice(points, n * dim, "points")?;
    let rows: Vec<Vec<f64>> = flat.chunks(dim).map(<[f64]>::to_vec).collect();
    let d = if weights.is_null() {
        EmpiricalDistribution::uniform(rows)?
    } else {
        EmpiricalDistribution::new(rows, slice(weights, n, "weights")?.to_vec())?
    };
    Ok(d)
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hrsnn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn hrsnn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Default configuration.
#[no_mangle]
pub extern "C" fn hrsnn_config_new() -> *mut HrsnnConfig {
    Box::into_raw(Box::new(HrsnnConfig(ExperimentConfig::default())))
}

/// Parses `section.key = value` text into a new validated configuration.
///
/// # Safety
/// `text_ptr` must be a NUL-terminated string; `out_cfg` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hrsnn_config_parse(text_ptr: *const c_char, out_cfg: *mut *mut HrsnnConfig) -> HrsnnStatus {
    guard(|| {
        let slot = out(out_cfg, "out")?;
        let cfg = ExperimentConfig::parse(text(text_ptr, "text")?)?;
        cfg.validate()?;
        *slot = Box::into_raw(Box::new(HrsnnConfig(cfg)));
        Ok(())
    })
}

/// Sets one key. The configuration is left unchanged on failure.
///
/// # Safety
/// `cfg` must be a live handle; `key` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn hrsnn_config_set(
    cfg: *mut HrsnnConfig,
    key: *const c_char,
    value: *const c_char,
) -> HrsnnStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("config"))?;
        let mut next = cfg.0.clone();
        next.set(text(key, "key")?, text(value, "value")?)?;
        next.validate()?;
        cfg.0 = next;
        Ok(())
    })
}

/// Serialized configuration; release with [`hrsnn_string_free`].
///
/// # Safety
/// `cfg` must be a live handle; `out_text` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hrsnn_config_to_text(cfg: *const HrsnnConfig, out_text: *mut *mut c_char) -> HrsnnStatus {
    guard(|| {
        let slot = out(out_text, "out")?;
        *slot = into_c_string(config(cfg)?.to_text())?;
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn hrsnn_config_free(cfg: *mut HrsnnConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Builds the reservoir described by `cfg` for `n_inputs` input channels.
///
/// # Safety
/// `cfg` must be a live handle; `out_net` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hrsnn_network_build(
    cfg: *const HrsnnConfig,
    variant: HrsnnVariant,
    seed: u64,
    n_inputs: usize,
    out_net: *mut *mut HrsnnNetwork,
) -> HrsnnStatus {
    guard(|| {
        let slot = out(out_net, "out")?;
        let net = build_network(config(cfg)?, variant.into(), seed, n_inputs)?;
        *slot = Box::into_raw(Box::new(HrsnnNetwork(net)));
        Ok(())
    })
}

/// Number of readout values a trial produces, or 0 for a null handle.
///
/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hrsnn_network_n_readout(net: *const HrsnnNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.topology.n_readout)
}

/// Presents one stimulus of `len` input spikes (`neurons[k]` fires at
/// `times[k]` ms) lasting `duration` ms. Writes `n_readout` state values to
/// `state` and, when `report` is non-null, the activation counts. With
/// `plasticity` set the weights are updated by STDP.
///
/// # Safety
/// `net` must be a live handle; `neurons` and `times` must hold `len`
/// elements; `state` must hold `state_len` elements.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn hrsnn_network_run_trial(
    net: *mut HrsnnNetwork,
    neurons: *const u32,
    times: *const f64,
    len: usize,
    duration: f64,
    dt: f64,
    plasticity: bool,
    state: *mut f64,
    state_len: usize,
    report: *mut HrsnnActivation,
) -> HrsnnStatus {
    guard(|| {
        let net = net.as_mut().ok_or_else(|| null("network"))?;
        let neurons = slice(neurons, len, "neurons")?;
        let times = slice(times, len, "times")?;
        let events = neurons
            .iter()
            .zip(times)
            .map(|(&neuron, &time)| SpikeEvent {
                neuron: neuron as usize,
                time,
            })
            .collect();
        let train = SpikeTrain::new(events, duration)?;
        let n_readout = net.0.topology.n_readout;
        if state_len < n_readout {
            return Err(Fail(
                HrsnnStatus::BufferTooSmall,
                format!("state buffer holds {state_len} values, {n_readout} needed"),
            ));
        }
        if state.is_null() {
            return Err(null("state"));
        }
        let trial = net.0.run_trial(&train, dt, plasticity)?;
        std::slice::from_raw_parts_mut(state, n_readout).copy_from_slice(&trial.state.readout_potentials);
        if let Some(r) = report.as_mut() {
            *r = HrsnnActivation {
                avg_activation: trial.report.avg_activation,
                active_neuron_count: trial.report.active_neuron_count,
                ac_ops: trial.report.ac_ops,
                total_spikes: trial.report.total_spikes,
            };
        }
        Ok(())
    })
}

/// # Safety
/// `net` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn hrsnn_network_free(net: *mut HrsnnNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Full pipeline (data, STDP, states, readout) for one seed.
///
/// # Safety
/// `cfg` must be a live handle; `metrics` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hrsnn_run_pipeline(
    cfg: *const HrsnnConfig,
    variant: HrsnnVariant,
    seed: u64,
    train_fraction: f64,
    metrics: *mut HrsnnMetrics,
) -> HrsnnStatus {
    guard(|| {
        let slot = out(metrics, "metrics")?;
        let m = run_pipeline(config(cfg)?, variant.into(), seed, train_fraction)?;
        *slot = HrsnnMetrics {
            accuracy: m.accuracy,
            train_accuracy: m.train_accuracy,
            mean_activation: m.mean_activation,
            active_neurons: m.active_neurons,
            ac_ops: m.ac_ops,
            effective_rank: m.effective_rank,
        };
        Ok(())
    })
}

/// Effective rank of a row-major `rows x cols` matrix: the number of singular
/// values needed to reach `threshold` of their total.
///
/// # Safety
/// `data` must hold `rows * cols` elements; `rank` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hrsnn_effective_rank(
    data: *const f64,
    rows: usize,
    cols: usize,
    threshold: f64,
    rank: *mut usize,
) -> HrsnnStatus {
    guard(|| {
        let slot = out(rank, "rank")?;
        let m = DMatrix::from_row_slice(rows, cols, slice(data, rows * cols, "data")?);
        *slot = effective_rank_of(&m, threshold)?.effective_rank;
        Ok(())
    })
}

/// Exact W2 between two weighted samples on the line. Null weights mean
/// uniform.
///
/// # Safety
/// `x`/`y` must hold `nx`/`ny` values and the weight arrays, when non-null,
/// as many; `dist` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hrsnn_w2_1d(
    x: *const f64,
    wx: *const f64,
    nx: usize,
    y: *const f64,
    wy: *const f64,
    ny: usize,
    dist: *mut f64,
) -> HrsnnStatus {
    guard(|| {
        let slot = out(dist, "dist")?;
        *slot = w2_1d(&distribution(x, wx, nx, 1)?, &distribution(y, wy, ny, 1)?)?;
        Ok(())
    })
}

/// Sliced W2 between uniform point clouds (row-major, `dim` columns) with
/// `n_projections` seeded directions.
///
/// # Safety
/// `x`/`y` must hold `nx * dim`/`ny * dim` values; `dist` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn hrsnn_sliced_w2(
    x: *const f64,
    nx: usize,
    y: *const f64,
    ny: usize,
    dim: usize,
    n_projections: usize,
    seed: u64,
    dist: *mut f64,
) -> HrsnnStatus {
    guard(|| {
        let slot = out(dist, "dist")?;
        let p = distribution(x, ptr::null(), nx, dim)?;
        let q = distribution(y, ptr::null(), ny, dim)?;
        *slot = sliced_w2(&p, &q, n_projections, seed)?;
        Ok(())
    })
}

/// Entropic OT with squared Euclidean cost. Writes the transport cost of the
/// regularized plan.
///
/// # Safety
/// `x`/`y` must hold `nx * dim`/`ny * dim` values, weight arrays (if
/// non-null) `nx`/`ny`; `cost` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn hrsnn_sinkhorn(
    x: *const f64,
    wx: *const f64,
    nx: usize,
    y: *const f64,
    wy: *const f64,
    ny: usize,
    dim: usize,
    reg: f64,
    max_iters: usize,
    tol: f64,
    cost: *mut f64,
) -> HrsnnStatus {
    guard(|| {
        let slot = out(cost, "cost")?;
        let p = distribution(x, wx, nx, dim)?;
        let q = distribution(y, wy, ny, dim)?;
        *slot = sinkhorn(&p, &q, sq_euclidean, reg, max_iters, tol)?.cost;
        Ok(())
    })
}

/// Matérn covariance at distance `d`.
///
/// # Safety
/// `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hrsnn_matern(
    d: f64,
    variance: f64,
    length_scale: f64,
    smoothness: f64,
    value: *mut f64,
) -> HrsnnStatus {
    guard(|| {
        let slot = out(value, "value")?;
        let p = MaternParams {
            variance,
            length_scale,
            smoothness,
        };
        p.validate()?;
        if !(d >= 0.0) {
            return Err(invalid(format!("distance must be >= 0, got {d}")));
        }
        *slot = matern(d, &p);
        Ok(())
    })
}

/// Expected improvement over `f_best` of a Gaussian with mean `mu` and
/// standard deviation `sigma` (maximization).
#[no_mangle]
pub extern "C" fn hrsnn_expected_improvement(mu: f64, sigma: f64, f_best: f64) -> f64 {
    expected_improvement(mu, sigma, f_best)
}

unsafe fn write_result(
    best_score: *mut f64,
    best_json: *mut *mut c_char,
    score: f64,
    json: String,
) -> Result<(), Fail> {
    if let Some(s) = best_score.as_mut() {
        *s = score;
    }
    if let Some(j) = best_json.as_mut() {
        *j = into_c_string(json)?;
    }
    Ok(())
}

/// Bayesian optimization of a caller-supplied objective over the reservoir
/// search space, using the `bo.*` settings of `cfg`. Calls to `objective` are
/// serialized. Writes the best score and, when `best_json` is non-null, the
/// best candidate (release with [`hrsnn_string_free`]).
///
/// # Safety
/// `cfg` must be a live handle; `objective` must be safe to call with
/// `user_data` from any thread; output pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn hrsnn_optimize(
    cfg: *const HrsnnConfig,
    objective: HrsnnObjective,
    user_data: *mut c_void,
    best_score: *mut f64,
    best_json: *mut *mut c_char,
) -> HrsnnStatus {
    struct UserData(*mut c_void);
    // SAFETY: callers guarantee the callback accepts `user_data` on any thread,
    // and the mutex below serializes every call.
    unsafe impl Send for UserData {}
    guard(|| {
        let cfg = config(cfg)?;
        let f = objective.ok_or_else(|| null("objective"))?;
        let user = Mutex::new(UserData(user_data));
        let eval = |c: &hrsnn::space::CandidateConfig| -> hrsnn::Result<f64> {
            let json = CString::new(c.to_blob()).map_err(|e| Error::Objective(e.to_string()))?;
            let user = user.lock().unwrap_or_else(|e| e.into_inner());
            let mut score = f64::NAN;
            match f(user.0, json.as_ptr(), &mut score) {
                0 => Ok(score),
                code => Err(Error::Objective(format!("callback returned {code}"))),
            }
        };
        let r = bo_loop(&search_space(cfg), eval, &bo_settings(cfg))?;
        write_result(best_score, best_json, r.best_score, r.best.to_blob())
    })
}

/// Bayesian optimization of the reservoir pipeline itself (held-out
/// accuracy on data generated from `run.seed`).
///
/// # Safety
/// `cfg` must be a live handle; output pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn hrsnn_optimize_pipeline(
    cfg: *const HrsnnConfig,
    best_score: *mut f64,
    best_json: *mut *mut c_char,
) -> HrsnnStatus {
    guard(|| {
        let mut cfg = config(cfg)?.clone();
        cfg.bo.baseline = false;
        let (r, _) = run_optimize(&cfg)?;
        write_result(best_score, best_json, r.best_score, r.best.to_blob())
    })
}
