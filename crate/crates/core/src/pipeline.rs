//! End-to-end chain: synthesize or load CIR, resample, recover each window,
//! aggregate, and score against the rendered ground truth.

use std::fs::File;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{
    aggregate_md, aggregate_power, aggregation_paths, background_subtract, build_spectrogram, normalize_column,
    rmse, select_strongest_on_beam, select_strongest_path, PathSelection, Spectrogram,
};
use crate::error::{Error, Result};
use crate::injection::{bin_traffic, simulate_injection, SlotAction};
use crate::recovery::{iht_recover_with, stft_baseline_with, DftPlan, IhtConfig};
use crate::resample::{plan_windows, slotted_resample_at, CirWindow, RegularGrid, WindowSpan};
use crate::signal::{
    doppler_axis, load_traffic_trace, static_scene, synth_cir, walking_scene, CirStream, DopplerAxis, RadioConfig,
    ReflectorTrack, TrafficTrace, WalkingParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenePreset {
    Walking,
    Static,
}

/// Every knob of a run. Defaults are the reference implementation values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Window length `W` [slots].
    pub window: usize,
    /// Window shift `δ` [slots].
    pub shift: usize,
    /// Sparsity `Ω` per path.
    pub sparsity: usize,
    /// Aggregated paths `Q` (odd).
    pub aggregated_paths: usize,
    /// Minimum sensing units per window `M_s`.
    pub min_units: usize,
    /// IHT step size `η`.
    pub step_size: f64,
    /// IHT stopping threshold `ξ`.
    pub tolerance: f64,
    /// IHT iteration cap `n_max`.
    pub max_iter: usize,
    /// Spectrogram columns `Λ`.
    pub columns: usize,
    pub seed: u64,
    pub scene: ScenePreset,
    /// Complex noise standard deviation added to every CIR cell.
    pub noise_std: f64,
    /// Uniform timing jitter of synthesized samples, as a fraction of `T_c`
    /// (peak-to-peak).
    pub jitter: f64,
    /// Block length for background subtraction [slots].
    pub background_interval: usize,
    /// Keep only this many random samples per window.
    pub measurements_per_window: Option<usize>,
    /// Sample the channel only at the packets of this trace.
    pub trace: Option<PathBuf>,
    /// Inject sensing units to keep `M_s` per window.
    pub inject: bool,
    /// Recover windows on the rayon pool.
    pub parallel: bool,
    pub radio: RadioConfig,
    pub walking: WalkingParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window: 64,
            shift: 32,
            sparsity: 3,
            aggregated_paths: 9,
            min_units: 8,
            step_size: 1.0,
            tolerance: 1e-4,
            max_iter: 200,
            columns: 200,
            seed: 2024,
            scene: ScenePreset::Walking,
            noise_std: 0.05,
            jitter: 0.0,
            background_interval: 256,
            measurements_per_window: None,
            trace: None,
            inject: false,
            parallel: true,
            radio: RadioConfig::default(),
            walking: WalkingParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::InvalidInput(m) => Error::invalid(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn iht(&self) -> IhtConfig {
        IhtConfig {
            sparsity: self.sparsity,
            step: self.step_size,
            tolerance: self.tolerance,
            max_iter: self.max_iter,
        }
    }

    /// Grid length `K = (Λ − 1)·δ + W`.
    pub fn slots(&self) -> usize {
        (self.columns.saturating_sub(1)) * self.shift + self.window
    }

    pub fn duration_s(&self) -> f64 {
        self.slots() as f64 * self.radio.grid_step_s
    }

    pub fn validate(&self) -> Result<()> {
        self.radio.validate()?;
        if self.window < 2 || self.window % 2 != 0 {
            return Err(Error::invalid(format!("window {} must be even and >= 2", self.window)));
        }
        if self.shift == 0 || self.shift > self.window {
            return Err(Error::invalid("shift must be in [1, W]"));
        }
        if self.columns == 0 {
            return Err(Error::invalid("need at least one spectrogram column"));
        }
        if self.aggregated_paths == 0 || self.aggregated_paths % 2 == 0 {
            return Err(Error::invalid("aggregated path count must be odd"));
        }
        if self.min_units > self.window {
            return Err(Error::invalid("M_s cannot exceed W"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::invalid("noise_std must be finite and non-negative"));
        }
        if !(0.0..0.5).contains(&self.jitter) {
            return Err(Error::invalid("jitter must be in [0, 0.5)"));
        }
        if self.background_interval < 2 {
            return Err(Error::invalid("background interval must be at least 2 slots"));
        }
        if self.measurements_per_window == Some(0) {
            return Err(Error::invalid("measurements per window must be positive"));
        }
        self.iht().validate(self.window)
    }
}

/// Independent seed for one consumer of randomness, derived from the root.
pub fn derive_seed(root: u64, tag: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(tag);
    rng.next_u64()
}

const SCENE_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;
const THIN_STREAM: u64 = 3;
const JITTER_STREAM: u64 = 4;

/// Random subset of `count` available in-window indices. Subsets drawn for
/// increasing `count` with the same seed are nested.
pub fn thin_window(available: &[usize], count: usize, seed: u64, window: usize) -> Vec<usize> {
    if count >= available.len() {
        return available.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(window as u64);
    let mut order = available.to_vec();
    order.shuffle(&mut rng);
    order.truncate(count);
    order.sort_unstable();
    order
}

/// Spectrogram a perfect estimator would produce from the moving tracks in
/// the aggregated band on `beam`.
///
/// Each window collects `|a_b|²·φ²` at the bin of every velocity segment it
/// overlaps, `φ` being the overlapped fraction of the window. Static
/// reflectors land in the zero-velocity bin, which background subtraction
/// removes, so that bin is left empty.
pub fn render_ground_truth(
    tracks: &[ReflectorTrack],
    axis: &DopplerAxis,
    spans: &[WindowSpan],
    band: std::ops::Range<usize>,
    beam: usize,
    step_s: f64,
) -> Vec<Vec<f64>> {
    let w = axis.window;
    spans
        .iter()
        .map(|span| {
            let t0 = span.offset as f64 * step_s;
            let t1 = (span.offset + span.len) as f64 * step_s;
            let mut col = vec![0.0; w];
            for tr in tracks.iter().filter(|t| band.contains(&t.distance_bin)) {
                let a2 = tr.bp_gain.get(beam).map_or(0.0, |a| a.norm_sqr());
                let seg = tr.velocity.segment_s;
                let first = (t0 / seg).floor() as usize;
                let mut k = first;
                while (k as f64) * seg < t1 - 1e-12 * seg {
                    let lo = (k as f64 * seg).max(t0);
                    let hi = ((k + 1) as f64 * seg).min(t1);
                    let phi = ((hi - lo) / (t1 - t0)).max(0.0);
                    let v = tr.velocity.velocity_at(0.5 * (lo + hi));
                    let bin = axis.velocity_bin(v);
                    if bin != 0 {
                        col[bin] += a2 * phi * phi;
                    }
                    k += 1;
                }
            }
            normalize_column(&mut col);
            col
        })
        .collect()
}

/// Outcome of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowResult {
    pub index: usize,
    pub selection: PathSelection,
    pub measurements: usize,
    pub sparcs: Option<Vec<f64>>,
    pub stft: Option<Vec<f64>>,
    pub iterations: usize,
    pub unconverged: usize,
    pub error: Option<String>,
}

/// Recovery settings shared by every window of a grid.
#[derive(Debug, Clone)]
pub struct RecoverySetup {
    pub window: usize,
    pub shift: usize,
    pub aggregated_paths: usize,
    pub iht: IhtConfig,
    pub measurements_per_window: Option<usize>,
    pub thin_seed: u64,
    pub parallel: bool,
}

impl RecoverySetup {
    pub fn from_config(cfg: &PipelineConfig) -> Self {
        Self {
            window: cfg.window,
            shift: cfg.shift,
            aggregated_paths: cfg.aggregated_paths,
            iht: cfg.iht(),
            measurements_per_window: cfg.measurements_per_window,
            thin_seed: derive_seed(cfg.seed, THIN_STREAM),
            parallel: cfg.parallel,
        }
    }
}

fn recover_window(grid: &RegularGrid, plan: &DftPlan, setup: &RecoverySetup, beam: usize, span: WindowSpan) -> WindowResult {
    let mut out = WindowResult {
        index: span.index,
        selection: PathSelection {
            path: 0,
            beam,
            power: 0.0,
            valid: false,
            low_confidence: true,
        },
        measurements: 0,
        sparcs: None,
        stft: None,
        iterations: 0,
        unconverged: 0,
        error: None,
    };
    let available: Vec<usize> = (0..span.len).filter(|&i| grid.mask()[span.offset + i]).collect();
    let keep = match setup.measurements_per_window {
        Some(m) => thin_window(&available, m, setup.thin_seed, span.index),
        None => available,
    };
    out.measurements = keep.len();
    if keep.is_empty() {
        out.error = Some(Error::EmptyWindow { window: span.index }.to_string());
        return out;
    }
    let slots: Vec<usize> = keep.iter().map(|&i| span.offset + i).collect();
    let result = (|| -> Result<(Vec<f64>, Vec<f64>, usize, usize)> {
        let sel = select_strongest_on_beam(grid, &slots, beam, None)?;
        out.selection = sel;
        let band = aggregation_paths(sel.path, setup.aggregated_paths, grid.paths())?;
        let mut spectra = Vec::with_capacity(band.len());
        let mut periodograms = Vec::with_capacity(band.len());
        let (mut iters, mut unconverged) = (0, 0);
        for path in band {
            let win = CirWindow::from_grid(grid, span, path, beam).restricted(&keep);
            let res = iht_recover_with(plan, &win, &setup.iht)?;
            iters += res.iterations;
            unconverged += usize::from(!res.converged);
            spectra.push(res.spectrum);
            periodograms.push(stft_baseline_with(plan, &win)?);
        }
        Ok((aggregate_md(&spectra)?, aggregate_power(&periodograms)?, iters, unconverged))
    })();
    match result {
        Ok((s, p, it, un)) => {
            log::debug!(
                "window {}: {} samples, path {}, {} IHT iterations, {} unconverged",
                span.index,
                out.measurements,
                out.selection.path,
                it,
                un
            );
            out.sparcs = Some(s);
            out.stft = Some(p);
            out.iterations = it;
            out.unconverged = un;
        }
        Err(e) => out.error = Some(e.to_string()),
    }
    out
}

/// Recover every window of `grid` on `beam`, in window order.
pub fn recover_grid(grid: &RegularGrid, setup: &RecoverySetup, beam: usize) -> Result<(Vec<WindowResult>, bool)> {
    setup.iht.validate(setup.window)?;
    if beam >= grid.beams() {
        return Err(Error::invalid(format!("beam {beam} outside the grid")));
    }
    let plan = plan_windows(grid.slots(), setup.window, setup.shift)?;
    let dft = DftPlan::new(setup.window)?;
    let results = if setup.parallel {
        plan.spans
            .par_iter()
            .map(|&s| recover_window(grid, &dft, setup, beam, s))
            .collect()
    } else {
        plan.spans
            .iter()
            .map(|&s| recover_window(grid, &dft, setup, beam, s))
            .collect()
    };
    Ok((results, plan.too_short))
}

/// Beam with the strongest single cell over the whole grid.
pub fn strongest_beam(grid: &RegularGrid) -> usize {
    let all: Vec<usize> = (0..grid.slots()).collect();
    select_strongest_path(grid, &all, None).beam
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InjectionSummary {
    pub packets: u64,
    pub injected: u64,
    pub min_units_per_window: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineMetrics {
    pub columns: usize,
    pub requested_columns: usize,
    pub short: bool,
    pub gaps: usize,
    pub beam: usize,
    pub selected_paths: Vec<usize>,
    pub mean_measurements: f64,
    pub mean_iterations: f64,
    pub unconverged: usize,
    pub rmse_sparcs: Option<f64>,
    pub rmse_stft: Option<f64>,
    pub injection: Option<InjectionSummary>,
    pub window_errors: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub sparcs: Spectrogram,
    pub stft: Spectrogram,
    pub truth: Option<Spectrogram>,
    pub metrics: PipelineMetrics,
}

impl PipelineOutput {
    /// Index of the first window that could not be processed.
    pub fn first_gap(&self) -> Option<usize> {
        self.sparcs.gaps.iter().position(|&g| g)
    }
}

/// Spectrograms and metrics from recovered windows.
pub fn assemble(
    results: &[WindowResult],
    too_short: bool,
    requested: usize,
    axis: DopplerAxis,
    column_step_s: f64,
    beam: usize,
) -> Result<(Spectrogram, Spectrogram, PipelineMetrics)> {
    let sparcs = build_spectrogram(results.iter().map(|r| r.sparcs.clone()).collect(), requested, axis, column_step_s)?;
    let stft = build_spectrogram(results.iter().map(|r| r.stft.clone()).collect(), requested, axis, column_step_s)?;
    let used = &results[..sparcs.spectrogram.len()];
    let n = used.len().max(1) as f64;
    let short = too_short || sparcs.short;
    if short {
        log::warn!("only {} of {} spectrogram columns available", used.len(), requested);
    }
    let metrics = PipelineMetrics {
        columns: used.len(),
        requested_columns: requested,
        short,
        gaps: sparcs.spectrogram.gaps.iter().filter(|&&g| g).count(),
        beam,
        selected_paths: used.iter().map(|r| r.selection.path).collect(),
        mean_measurements: used.iter().map(|r| r.measurements as f64).sum::<f64>() / n,
        mean_iterations: used.iter().map(|r| r.iterations as f64).sum::<f64>() / n,
        unconverged: used.iter().map(|r| r.unconverged).sum(),
        rmse_sparcs: None,
        rmse_stft: None,
        injection: None,
        window_errors: used
            .iter()
            .filter_map(|r| r.error.as_ref().map(|e| format!("window {}: {e}", r.index)))
            .collect(),
    };
    Ok((sparcs.spectrogram, stft.spectrogram, metrics))
}

/// Reflector tracks of the configured scene.
pub fn scene_tracks(cfg: &PipelineConfig) -> Result<Vec<ReflectorTrack>> {
    match cfg.scene {
        ScenePreset::Walking => walking_scene(
            &cfg.radio,
            &cfg.walking,
            cfg.window,
            cfg.duration_s(),
            derive_seed(cfg.seed, SCENE_STREAM),
        ),
        ScenePreset::Static => static_scene(&cfg.radio, cfg.walking.torso_bin),
    }
}

/// Sample instants: the full grid (optionally jittered), or the trace
/// packets plus injected units. Times are relative to slot 0.
pub fn sample_times(cfg: &PipelineConfig, trace: Option<&TrafficTrace>) -> Result<(Vec<f64>, Option<InjectionSummary>)> {
    let k = cfg.slots();
    let tc = cfg.radio.grid_step_s;
    let Some(trace) = trace else {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, JITTER_STREAM));
        let times = (0..k)
            .map(|s| {
                let u = if cfg.jitter > 0.0 {
                    (rng.next_u64() as f64 / u64::MAX as f64) - 0.5
                } else {
                    0.0
                };
                (s as f64 + cfg.jitter * u) * tc
            })
            .collect();
        return Ok((times, None));
    };
    let timeline = bin_traffic(trace, tc, k)?;
    let origin = trace.packets().first().map_or(0.0, |p| p.timestamp);
    let mut times: Vec<f64> = trace
        .packets()
        .iter()
        .map(|p| p.timestamp - origin)
        .filter(|&t| t < (k as f64 - 0.5) * tc)
        .collect();
    let mut summary = InjectionSummary {
        packets: timeline.packet_count(),
        ..Default::default()
    };
    if cfg.inject {
        let log = simulate_injection(&timeline, cfg.min_units, cfg.window)?;
        for (s, a) in log.actions.iter().enumerate() {
            if *a == SlotAction::Inject {
                times.push(s as f64 * tc);
            }
        }
        summary.injected = log.injected;
        summary.min_units_per_window = log.min_units_per_window();
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    Ok((times, Some(summary)))
}

fn grid_from_times(cfg: &PipelineConfig, tracks: &[ReflectorTrack], times: &[f64]) -> Result<RegularGrid> {
    let k = cfg.slots();
    if times.is_empty() {
        return RegularGrid::empty(cfg.radio.grid_step_s, k, cfg.radio.paths, cfg.radio.beams);
    }
    let stream = synth_cir(&cfg.radio, tracks, times, cfg.noise_std, derive_seed(cfg.seed, NOISE_STREAM))?;
    slotted_resample_at(&stream, 0.0, cfg.radio.grid_step_s, k)
}

/// Synthesize the configured scene as an irregular CIR stream.
pub fn synthesize(cfg: &PipelineConfig) -> Result<CirStream> {
    cfg.validate()?;
    let trace = load_configured_trace(cfg)?;
    let (times, _) = sample_times(cfg, trace.as_ref())?;
    let tracks = scene_tracks(cfg)?;
    synth_cir(&cfg.radio, &tracks, &times, cfg.noise_std, derive_seed(cfg.seed, NOISE_STREAM))
}

fn load_configured_trace(cfg: &PipelineConfig) -> Result<Option<TrafficTrace>> {
    cfg.trace
        .as_deref()
        .map(|p| load_traffic_trace(p).map(|l| l.trace))
        .transpose()
}

/// Run the whole chain on the configured synthetic scene.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let trace = load_configured_trace(cfg)?;
    run_pipeline_with_trace(cfg, trace.as_ref())
}

pub fn run_pipeline_with_trace(cfg: &PipelineConfig, trace: Option<&TrafficTrace>) -> Result<PipelineOutput> {
    cfg.validate()?;
    let axis = doppler_axis(&cfg.radio, cfg.window)?;
    let tracks = scene_tracks(cfg)?;
    let (times, injection) = sample_times(cfg, trace)?;
    let raw = grid_from_times(cfg, &tracks, &times)?;
    let grid = background_subtract(&raw, cfg.background_interval)?;
    let beam = match cfg.scene {
        ScenePreset::Walking => cfg.walking.torso_beam,
        ScenePreset::Static => strongest_beam(&grid),
    };
    log::info!("{} of {} slots sampled, beam {beam}", grid.filled(), grid.slots());
    let setup = RecoverySetup::from_config(cfg);
    let (results, too_short) = recover_grid(&grid, &setup, beam)?;
    let column_step_s = cfg.shift as f64 * cfg.radio.grid_step_s;
    let (sparcs, stft, mut metrics) = assemble(&results, too_short, cfg.columns, axis, column_step_s, beam)?;
    metrics.injection = injection;

    let spans = plan_windows(grid.slots(), cfg.window, cfg.shift)?.spans;
    let band = aggregation_paths(cfg.walking.torso_bin, cfg.aggregated_paths, cfg.radio.paths)?;
    let truth_cols = render_ground_truth(&tracks, &axis, &spans[..sparcs.len()], band, beam, cfg.radio.grid_step_s);
    let truth = build_spectrogram(truth_cols.into_iter().map(Some).collect(), cfg.columns, axis, column_step_s)?
        .spectrogram;
    metrics.rmse_sparcs = Some(rmse(&sparcs, &truth)?);
    metrics.rmse_stft = Some(rmse(&stft, &truth)?);
    Ok(PipelineOutput {
        sparcs,
        stft,
        truth: Some(truth),
        metrics,
    })
}

/// Recover spectrograms from a recorded stream; no ground truth.
pub fn recover_stream(stream: &CirStream, cfg: &PipelineConfig, beam: Option<usize>) -> Result<PipelineOutput> {
    cfg.validate()?;
    let Some(first) = stream.samples().first() else {
        return Err(Error::invalid("stream has no samples"));
    };
    let axis = doppler_axis(&cfg.radio, cfg.window)?;
    let last = stream.samples().last().map_or(first.t, |s| s.t);
    let k = ((last - first.t) / cfg.radio.grid_step_s + 0.5).floor() as usize + 1;
    let raw = slotted_resample_at(stream, first.t, cfg.radio.grid_step_s, k)?;
    let grid = background_subtract(&raw, cfg.background_interval)?;
    let beam = beam.unwrap_or_else(|| strongest_beam(&grid));
    let setup = RecoverySetup::from_config(cfg);
    let (results, too_short) = recover_grid(&grid, &setup, beam)?;
    if results.is_empty() {
        return Err(Error::invalid(format!(
            "stream spans {k} slots, shorter than one window of {}",
            cfg.window
        )));
    }
    let column_step_s = cfg.shift as f64 * cfg.radio.grid_step_s;
    let (sparcs, stft, metrics) = assemble(&results, too_short, cfg.columns, axis, column_step_s, beam)?;
    Ok(PipelineOutput {
        sparcs,
        stft,
        truth: None,
        metrics,
    })
}

/// What a run needs to be reproduced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: PipelineConfig,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, cfg: &PipelineConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed: cfg.seed,
            config: cfg.clone(),
            outputs: Vec::new(),
        }
    }
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = create(path)?;
    serde_json::to_writer_pretty(f, value).map_err(|e| Error::io(format!("writing {}", path.display()), e.into()))
}

fn write_spectrogram(dir: &Path, name: &str, s: &Spectrogram, written: &mut Vec<String>) -> Result<()> {
    for (ext, csv) in [("csv", true), ("pgm", false)] {
        let file = format!("{name}.{ext}");
        let path = dir.join(&file);
        let f = create(&path)?;
        let res = if csv { s.write_csv(f) } else { s.write_pgm(f) };
        res.map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        written.push(file);
    }
    Ok(())
}

/// Write spectrograms (CSV + PGM), metrics and manifest into `dir`.
pub fn write_outputs(dir: &Path, out: &PipelineOutput, manifest: &mut Manifest) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let mut written = Vec::new();
    write_spectrogram(dir, "sparcs", &out.sparcs, &mut written)?;
    write_spectrogram(dir, "stft", &out.stft, &mut written)?;
    if let Some(t) = &out.truth {
        write_spectrogram(dir, "truth", t, &mut written)?;
    }
    write_json(&dir.join("metrics.json"), &out.metrics)?;
    written.push("metrics.json".into());
    manifest.outputs = written;
    write_json(&dir.join("manifest.json"), manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PipelineConfig {
        PipelineConfig {
            columns: 12,
            ..Default::default()
        }
    }

    #[test]
    fn defaults_are_reference_values() {
        let c = PipelineConfig::default();
        assert_eq!(
            (c.window, c.shift, c.sparsity, c.aggregated_paths, c.min_units, c.max_iter, c.columns),
            (64, 32, 3, 9, 8, 200, 200)
        );
        assert_eq!((c.step_size, c.tolerance, c.radio.grid_step_s), (1.0, 1e-4, 0.27e-3));
        assert_eq!(c.slots(), 6432);
        c.validate().unwrap();
    }

    #[test]
    fn toml_overrides_and_rejects_unknown_keys() {
        let c = PipelineConfig::from_toml("window = 32\nshift = 16\n[radio]\ncarrier_hz = 28e9\n").unwrap();
        assert_eq!((c.window, c.shift, c.radio.carrier_hz, c.radio.paths), (32, 16, 28e9, 32));
        assert!(PipelineConfig::from_toml("windw = 32").is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 1), derive_seed(1, 2));
        assert_ne!(derive_seed(1, 1), derive_seed(2, 1));
        assert_eq!(derive_seed(5, 3), derive_seed(5, 3));
    }

    #[test]
    fn thinning_nests() {
        let avail: Vec<usize> = (0..64).collect();
        let a = thin_window(&avail, 8, 9, 3);
        let b = thin_window(&avail, 16, 9, 3);
        assert_eq!(a.len(), 8);
        assert!(a.iter().all(|i| b.contains(i)));
        assert_ne!(a, thin_window(&avail, 8, 9, 4));
    }

    #[test]
    fn full_sampling_beats_stft() {
        let out = run_pipeline(&small()).unwrap();
        let m = &out.metrics;
        assert_eq!(m.columns, 12);
        assert_eq!(m.gaps, 0);
        assert!(m.rmse_sparcs.unwrap() <= m.rmse_stft.unwrap(), "{m:?}");
    }

    #[test]
    fn empty_trace_without_injection_leaves_gaps() {
        let out = run_pipeline_with_trace(&small(), Some(&TrafficTrace::default())).unwrap();
        assert_eq!(out.metrics.gaps, 12);
        assert_eq!(out.first_gap(), Some(0));
        let with = PipelineConfig {
            inject: true,
            ..small()
        };
        let out = run_pipeline_with_trace(&with, Some(&TrafficTrace::default())).unwrap();
        assert_eq!(out.metrics.gaps, 0);
        assert!(out.metrics.mean_measurements >= 8.0);
    }

    #[test]
    fn ground_truth_straddles_segments() {
        let radio = RadioConfig::default();
        let axis = doppler_axis(&radio, 4).unwrap();
        let seg = 4.0 * radio.grid_step_s;
        let tr = ReflectorTrack {
            distance_bin: 3,
            bp_gain: vec![num_complex::Complex64::new(1.0, 0.0)],
            velocity: crate::signal::VelocityProfile {
                segment_s: seg,
                velocities: vec![axis.velocity_resolution, 2.0 * axis.velocity_resolution],
            },
            phase0: 0.0,
        };
        let spans = plan_windows(8, 4, 2).unwrap().spans;
        let cols = render_ground_truth(&[tr], &axis, &spans, 2..5, 0, radio.grid_step_s);
        assert_eq!(cols.len(), 3);
        // bin of +Δv is 3, of +2Δv is 2
        let expect = [[0.0, 0.0, 0.0, 1.0], [0.0, 0.0, 1.0, 1.0], [0.0, 0.0, 1.0, 0.0]];
        for (c, e) in cols.iter().zip(expect) {
            assert!(c.iter().zip(e).all(|(a, b)| (a - b).abs() < 1e-12), "{c:?}");
        }
    }
}
