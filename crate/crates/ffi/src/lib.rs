//! C ABI over `mdrecon`.
//!
//! Every fallible call returns an [`MdStatus`]. On failure the message is kept
//! per thread and can be fetched with [`md_last_error`]. Handles are opaque and
//! released with their `_free` function; passing NULL to a `_free` is a no-op.
//! Complex buffers are interleaved `re, im` pairs of `double`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mdrecon::aggregate::Spectrogram;
use mdrecon::injection::{overhead_from_counts, simulate_injection, OverheadParams, SlotAction, SlotTimeline};
use mdrecon::pipeline::{run_pipeline, PipelineConfig, PipelineOutput};
use mdrecon::recovery::{iht_recover, stft_baseline, IhtConfig};
use mdrecon::resample::CirWindow;
use mdrecon::signal::{doppler_axis, golay_pair, RadioConfig};
use mdrecon::Error;
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdStatus {
    Ok = 0,
    InvalidInput = 1,
    DimensionMismatch = 2,
    EmptyWindow = 3,
    Parse = 4,
    Numerical = 5,
    Io = 6,
    NullPointer = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(MdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidInput(_) => MdStatus::InvalidInput,
            Error::DimensionMismatch { .. } => MdStatus::DimensionMismatch,
            Error::EmptyWindow { .. } => MdStatus::EmptyWindow,
            Error::Parse { .. } | Error::EmptyFile(_) => MdStatus::Parse,
            Error::Numerical(_) => MdStatus::Numerical,
            Error::Io { .. } => MdStatus::Io,
        };
        Fail(status, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(MdStatus::NullPointer, format!("{what} is NULL"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MdStatus::Ok,
        Ok(Err(Fail(s, m))) => {
            set_error(m);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            MdStatus::Panic
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

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL, or
/// 0 if there is none.
#[no_mangle]
pub unsafe extern "C" fn md_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn md_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Run configuration.
pub struct MdConfig {
    inner: PipelineConfig,
}

/// Result of a pipeline run.
pub struct MdResult {
    inner: PipelineOutput,
}

/// New configuration with the reference defaults. Never NULL.
#[no_mangle]
pub extern "C" fn md_config_new() -> *mut MdConfig {
    Box::into_raw(Box::new(MdConfig {
        inner: PipelineConfig::default(),
    }))
}

#[no_mangle]
pub unsafe extern "C" fn md_config_free(cfg: *mut MdConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Parse a TOML configuration. Unset keys take their defaults.
#[no_mangle]
pub unsafe extern "C" fn md_config_from_toml(text: *const c_char, cfg_out: *mut *mut MdConfig) -> MdStatus {
    guard(|| {
        let out = out(cfg_out, "cfg_out")?;
        if text.is_null() {
            return Err(null("text"));
        }
        let text = CStr::from_ptr(text)
            .to_str()
            .map_err(|e| Fail(MdStatus::InvalidInput, format!("config is not UTF-8: {e}")))?;
        let inner = PipelineConfig::from_toml(text)?;
        *out = Box::into_raw(Box::new(MdConfig { inner }));
        Ok(())
    })
}

/// Set one key from a TOML value literal, e.g. `("seed", "7")` or
/// `("radio.carrier_hz", "28e9")`.
#[no_mangle]
pub unsafe extern "C" fn md_config_set(cfg: *mut MdConfig, key: *const c_char, value: *const c_char) -> MdStatus {
    guard(|| {
        let cfg = out(cfg, "cfg")?;
        if key.is_null() || value.is_null() {
            return Err(null("key or value"));
        }
        let utf8 = |p: *const c_char| {
            CStr::from_ptr(p)
                .to_str()
                .map_err(|e| Fail(MdStatus::InvalidInput, format!("not UTF-8: {e}")))
        };
        let (key, value) = (utf8(key)?, utf8(value)?);
        let bad = |m: String| Fail(MdStatus::InvalidInput, m);
        let parsed: toml::Table = format!("v = {value}")
            .parse()
            .map_err(|e| bad(format!("value {value:?}: {e}")))?;
        let value = parsed["v"].clone();
        let mut root = toml::Table::try_from(&cfg.inner).map_err(|e| bad(e.to_string()))?;
        let mut parts: Vec<&str> = key.split('.').collect();
        let leaf = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| bad("empty key".into()))?;
        let mut table = &mut root;
        for p in parts {
            table = table
                .get_mut(p)
                .and_then(|v| v.as_table_mut())
                .ok_or_else(|| bad(format!("unknown section {p:?}")))?;
        }
        table.insert(leaf.to_string(), value);
        cfg.inner = root
            .try_into()
            .map_err(|e: toml::de::Error| bad(format!("{key}: {e}")))?;
        Ok(())
    })
}

/// Run the full synthetic pipeline.
#[no_mangle]
pub unsafe extern "C" fn md_pipeline_run(cfg: *const MdConfig, result_out: *mut *mut MdResult) -> MdStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        let out = out(result_out, "result_out")?;
        let inner = run_pipeline(&cfg.inner)?;
        *out = Box::into_raw(Box::new(MdResult { inner }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn md_result_free(res: *mut MdResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdSpectrogramKind {
    Sparcs = 0,
    Stft = 1,
    Truth = 2,
}

fn pick(res: &MdResult, kind: MdSpectrogramKind) -> Result<&Spectrogram, Fail> {
    match kind {
        MdSpectrogramKind::Sparcs => Ok(&res.inner.sparcs),
        MdSpectrogramKind::Stft => Ok(&res.inner.stft),
        MdSpectrogramKind::Truth => res
            .inner
            .truth
            .as_ref()
            .ok_or_else(|| Fail(MdStatus::InvalidInput, "result has no ground truth".into())),
    }
}

/// Shape of a result: spectrogram columns, window length and gap count.
#[no_mangle]
pub unsafe extern "C" fn md_result_shape(
    res: *const MdResult,
    columns: *mut usize,
    window: *mut usize,
    gaps: *mut usize,
) -> MdStatus {
    guard(|| {
        let res = res.as_ref().ok_or_else(|| null("res"))?;
        *out(columns, "columns")? = res.inner.sparcs.len();
        *out(window, "window")? = res.inner.sparcs.axis.window;
        *out(gaps, "gaps")? = res.inner.metrics.gaps;
        Ok(())
    })
}

/// Copy a spectrogram column by column, natural DFT order inside a column.
/// `len` must be at least columns × window.
#[no_mangle]
pub unsafe extern "C" fn md_result_spectrogram(
    res: *const MdResult,
    kind: MdSpectrogramKind,
    buf: *mut f64,
    len: usize,
) -> MdStatus {
    guard(|| {
        let res = res.as_ref().ok_or_else(|| null("res"))?;
        let s = pick(res, kind)?;
        let need = s.len() * s.axis.window;
        if len < need {
            return Err(Fail(MdStatus::BufferTooSmall, format!("need {need} values, got {len}")));
        }
        let buf = slice_mut(buf, need, "buf")?;
        for (dst, col) in buf.chunks_mut(s.axis.window).zip(&s.columns) {
            dst.copy_from_slice(col);
        }
        Ok(())
    })
}

/// RMSE of the SPARCS or STFT spectrogram against the ground truth.
#[no_mangle]
pub unsafe extern "C" fn md_result_rmse(res: *const MdResult, kind: MdSpectrogramKind, value: *mut f64) -> MdStatus {
    guard(|| {
        let res = res.as_ref().ok_or_else(|| null("res"))?;
        let m = &res.inner.metrics;
        let v = match kind {
            MdSpectrogramKind::Sparcs => m.rmse_sparcs,
            MdSpectrogramKind::Stft => m.rmse_stft,
            MdSpectrogramKind::Truth => Some(0.0),
        };
        *out(value, "value")? = v.ok_or_else(|| Fail(MdStatus::InvalidInput, "result has no ground truth".into()))?;
        Ok(())
    })
}

fn window_from_raw(values: &[f64], available: &[usize]) -> Result<CirWindow, Fail> {
    let w = values.len() / 2;
    if let Some(&bad) = available.iter().find(|&&i| i >= w) {
        return Err(Fail(MdStatus::InvalidInput, format!("available index {bad} outside window of {w}")));
    }
    let mut avail = available.to_vec();
    avail.sort_unstable();
    avail.dedup();
    let mut vals = vec![Complex64::new(0.0, 0.0); w];
    for &i in &avail {
        vals[i] = Complex64::new(values[2 * i], values[2 * i + 1]);
    }
    Ok(CirWindow {
        index: 0,
        offset: 0,
        values: vals,
        available: avail,
    })
}

/// IHT on one window. `values` holds `window` complex samples (only the
/// `available` indices are read); `spectrum` receives `window` complex
/// coefficients.
#[no_mangle]
pub unsafe extern "C" fn md_iht_recover(
    values: *const f64,
    window: usize,
    available: *const usize,
    n_available: usize,
    sparsity: usize,
    step: f64,
    tolerance: f64,
    max_iter: usize,
    spectrum: *mut f64,
    iterations: *mut usize,
) -> MdStatus {
    guard(|| {
        let vals = slice(values, 2 * window, "values")?;
        let avail = slice(available, n_available, "available")?;
        let dst = slice_mut(spectrum, 2 * window, "spectrum")?;
        let win = window_from_raw(vals, avail)?;
        let cfg = IhtConfig {
            sparsity,
            step,
            tolerance,
            max_iter,
        };
        let res = iht_recover(&win, &cfg)?;
        for (d, c) in dst.chunks_mut(2).zip(&res.spectrum.coeffs) {
            d[0] = c.re;
            d[1] = c.im;
        }
        if !iterations.is_null() {
            *iterations = res.iterations;
        }
        Ok(())
    })
}

/// Zero-filled periodogram of one window into `power` (`window` values).
#[no_mangle]
pub unsafe extern "C" fn md_stft_baseline(
    values: *const f64,
    window: usize,
    available: *const usize,
    n_available: usize,
    power: *mut f64,
) -> MdStatus {
    guard(|| {
        let vals = slice(values, 2 * window, "values")?;
        let avail = slice(available, n_available, "available")?;
        let dst = slice_mut(power, window, "power")?;
        if window == 0 {
            return Err(Fail(MdStatus::InvalidInput, "window must be positive".into()));
        }
        let p = stft_baseline(&window_from_raw(vals, avail)?)?;
        dst.copy_from_slice(&p);
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MdDopplerAxis {
    /// [m/s]
    pub velocity_resolution: f64,
    /// [m/s]
    pub max_velocity: f64,
    /// [Hz]
    pub frequency_resolution: f64,
    /// [Hz]
    pub max_frequency: f64,
}

/// Doppler axis of a `window`-slot DFT at carrier `carrier_hz` [Hz] and grid
/// step `grid_step_s` [s].
#[no_mangle]
pub unsafe extern "C" fn md_doppler_axis(
    carrier_hz: f64,
    grid_step_s: f64,
    window: usize,
    axis: *mut MdDopplerAxis,
) -> MdStatus {
    guard(|| {
        let radio = RadioConfig {
            carrier_hz,
            grid_step_s,
            ..RadioConfig::default()
        };
        let a = doppler_axis(&radio, window)?;
        *out(axis, "axis")? = MdDopplerAxis {
            velocity_resolution: a.velocity_resolution,
            max_velocity: a.max_velocity,
            frequency_resolution: a.frequency_resolution,
            max_frequency: a.max_frequency,
        };
        Ok(())
    })
}

/// Complementary Golay pair of length `n` (power of two) as ±1 values.
#[no_mangle]
pub unsafe extern "C" fn md_golay_pair(n: usize, a: *mut i8, b: *mut i8) -> MdStatus {
    guard(|| {
        let (ga, gb) = golay_pair(n)?;
        slice_mut(a, n, "a")?.copy_from_slice(&ga);
        slice_mut(b, n, "b")?.copy_from_slice(&gb);
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MdInjectionSummary {
    pub injected: u64,
    pub packets: u64,
    pub windows: usize,
    /// Smallest unit count over completed windows (0 if there are none).
    pub min_units_per_window: usize,
    pub mean_units_per_window: f64,
}

/// Run the injection scheduler over a slot timeline (`occupied[k] != 0` when a
/// packet is present). If `actions` is not NULL it receives one code per slot:
/// 0 none, 1 reuse, 2 inject.
#[no_mangle]
pub unsafe extern "C" fn md_simulate_injection(
    occupied: *const u8,
    slots: usize,
    min_units: usize,
    window: usize,
    actions: *mut u8,
    summary: *mut MdInjectionSummary,
) -> MdStatus {
    guard(|| {
        let occ = slice(occupied, slots, "occupied")?;
        let timeline = SlotTimeline::from_occupancy(occ.iter().map(|&o| o != 0).collect());
        let log = simulate_injection(&timeline, min_units, window)?;
        if !actions.is_null() {
            let dst = slice_mut(actions, slots, "actions")?;
            for (d, a) in dst.iter_mut().zip(&log.actions) {
                *d = match a {
                    SlotAction::None => 0,
                    SlotAction::Reuse => 1,
                    SlotAction::Inject => 2,
                };
            }
        }
        *out(summary, "summary")? = MdInjectionSummary {
            injected: log.injected,
            packets: log.packets,
            windows: log.windows.len(),
            min_units_per_window: log.min_units_per_window().unwrap_or(0),
            mean_units_per_window: log.mean_units_per_window().unwrap_or(0.0),
        };
        Ok(())
    })
}

/// Sensing overhead `n_TRN (n_c + n_inj) TRN_len / Σ c̃_i`.
#[no_mangle]
pub unsafe extern "C" fn md_overhead(
    packets: u64,
    injected: u64,
    trace_bits: u64,
    trn_fields: u32,
    trn_len_bits: u64,
    ppdu_target_bytes: u64,
    ppdu_trace_bytes: u64,
    overhead: *mut f64,
) -> MdStatus {
    guard(|| {
        let params = OverheadParams {
            trn_fields,
            trn_len_bits,
            ppdu_target_bytes,
            ppdu_trace_bytes,
        };
        *out(overhead, "overhead")? = overhead_from_counts(packets, injected, trace_bits, params)?.overhead;
        Ok(())
    })
}
