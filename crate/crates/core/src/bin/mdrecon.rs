use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mdrecon::aggregate::{read_spectrogram_csv, write_pgm};
use mdrecon::injection::{overhead_sweep, slots_spanning, OverheadParams, SweepRow, SWEEP_MIN_UNITS};
use mdrecon::pipeline::{
    recover_stream, run_pipeline, synthesize, write_json, write_outputs, Manifest, PipelineConfig, PipelineOutput,
    ScenePreset,
};
use mdrecon::resample::slotted_resample;
use mdrecon::signal::{
    load_traffic_trace, poisson_trace, read_cir_bin, read_cir_csv, write_cir_bin, write_cir_csv, CirStream,
    TrafficTrace,
};
use mdrecon::{Error, Result};

/// Micro-Doppler spectrograms from sparse, irregular CIR samples.
///
/// Settings come from an optional TOML config (`--config`) and are then
/// overridden by flags. Times are in seconds, frequencies in hertz,
/// velocities in metres per second and window sizes in grid slots.
///
/// Exit codes: 0 success, 2 invalid input, 3 empty window or numerical
/// failure, 4 I/O error.
#[derive(Parser, Debug)]
#[command(name = "mdrecon", version)]
struct Cli {
    /// TOML file with any of the settings below; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a CIR stream of the configured scene (.csv or .bin by extension).
    Synth {
        #[command(flatten)]
        set: Settings,
        #[arg(long, short, value_name = "FILE")]
        out: PathBuf,
    },
    /// Resample a CIR stream onto the T_c grid and write the filled slots.
    Resample {
        #[command(flatten)]
        set: Settings,
        #[arg(long, short, value_name = "FILE")]
        input: PathBuf,
        #[arg(long, short, value_name = "FILE")]
        out: PathBuf,
        /// Grid length [slots]; default covers the whole stream.
        #[arg(long)]
        slots: Option<usize>,
    },
    /// Recover SPARCS and STFT spectrograms from a CIR stream file.
    Recover {
        #[command(flatten)]
        set: Settings,
        #[arg(long, short, value_name = "FILE")]
        input: PathBuf,
        #[arg(long, short, value_name = "DIR")]
        out_dir: PathBuf,
        /// Beam pattern to process; default is the strongest one.
        #[arg(long)]
        beam: Option<usize>,
        /// Exit with 0 even if some windows had no samples.
        #[arg(long)]
        allow_gaps: bool,
    },
    /// Synthesize, resample, recover, aggregate and score against ground truth.
    Pipeline {
        #[command(flatten)]
        set: Settings,
        #[arg(long, short, value_name = "DIR")]
        out_dir: PathBuf,
        /// Exit with 0 even if some windows had no samples.
        #[arg(long)]
        allow_gaps: bool,
    },
    /// Simulate sensing-unit injection over a traffic trace and report overhead per M_s.
    InjectSim {
        #[command(flatten)]
        set: Settings,
        #[command(flatten)]
        inj: InjectArgs,
        /// JSON report.
        #[arg(long, short, value_name = "FILE")]
        out: PathBuf,
        /// Also write the report as CSV.
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
    },
    /// Convert files: spectrogram CSV -> PGM, or CIR stream CSV <-> binary.
    Export {
        #[arg(long, short, value_name = "FILE")]
        input: PathBuf,
        #[arg(long, short, value_name = "FILE")]
        out: PathBuf,
    },
}

/// Flags mirroring the config keys.
#[derive(Args, Debug, Default)]
struct Settings {
    /// Window length W [slots, even].
    #[arg(long)]
    window: Option<usize>,
    /// Window shift δ [slots].
    #[arg(long)]
    shift: Option<usize>,
    /// Sparsity Ω: nonzero Doppler bins kept per path.
    #[arg(long)]
    sparsity: Option<usize>,
    /// Aggregated paths Q around the strongest one [distance bins, odd].
    #[arg(long)]
    aggregated_paths: Option<usize>,
    /// Minimum sensing units per window M_s.
    #[arg(long)]
    min_units: Option<usize>,
    /// IHT step size η [dimensionless].
    #[arg(long)]
    step_size: Option<f64>,
    /// IHT stopping threshold ξ on the update norm.
    #[arg(long)]
    tolerance: Option<f64>,
    /// IHT iteration cap n_max.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Spectrogram columns Λ (duration is ((Λ-1)·δ + W)·T_c).
    #[arg(long)]
    columns: Option<usize>,
    /// Root seed for every random draw.
    #[arg(long)]
    seed: Option<u64>,
    /// Scene preset: walking or static.
    #[arg(long, value_parser = parse_scene)]
    scene: Option<ScenePreset>,
    /// Complex noise standard deviation per CIR cell [linear amplitude].
    #[arg(long)]
    noise_std: Option<f64>,
    /// Peak-to-peak timing jitter of synthesized samples [fraction of T_c].
    #[arg(long)]
    jitter: Option<f64>,
    /// Background-subtraction block length [slots].
    #[arg(long)]
    background_interval: Option<usize>,
    /// Keep this many random samples per window.
    #[arg(long)]
    measurements: Option<usize>,
    /// Traffic trace CSV (timestamp [s], size [bytes]); samples only at its packets.
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Inject sensing units to keep M_s per window.
    #[arg(long)]
    inject: bool,
    /// Recover windows on one thread.
    #[arg(long)]
    sequential: bool,
    /// Carrier frequency f_o [Hz].
    #[arg(long)]
    carrier_hz: Option<f64>,
    /// Bandwidth B [Hz]; range resolution is c/2B.
    #[arg(long)]
    bandwidth_hz: Option<f64>,
    /// Grid step T_c [s].
    #[arg(long)]
    grid_step_s: Option<f64>,
    /// Distance bins L per CIR.
    #[arg(long)]
    paths: Option<usize>,
    /// Beam patterns N_BP per CIR.
    #[arg(long)]
    beams: Option<usize>,
    /// Torso distance bin of the walking preset.
    #[arg(long)]
    torso_bin: Option<usize>,
    /// Main beam of the walking preset.
    #[arg(long)]
    torso_beam: Option<usize>,
}

#[derive(Args, Debug)]
struct InjectArgs {
    /// Synthetic Poisson traffic rate [packets/s], used when no --trace is given.
    #[arg(long, default_value_t = 370.0)]
    poisson_rate: f64,
    /// Length of the synthetic trace or of the simulated span [s].
    #[arg(long)]
    duration: Option<f64>,
    /// Packet size range of synthetic traffic [bytes].
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], default_values_t = [100u32, 1500])]
    packet_bytes: Vec<u32>,
    /// M_s values to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = SWEEP_MIN_UNITS)]
    sweep: Vec<usize>,
    /// TRN fields per sensing unit n_TRN.
    #[arg(long, default_value_t = 1)]
    trn_fields: u32,
    /// TRN field length [bits].
    #[arg(long, default_value_t = 768)]
    trn_len_bits: u64,
    /// PPDU size the trace is rescaled to [bytes].
    #[arg(long, default_value_t = 262_000)]
    ppdu_target_bytes: u64,
    /// Maximum PPDU size of the recorded trace [bytes].
    #[arg(long, default_value_t = 1_500)]
    ppdu_trace_bytes: u64,
}

fn parse_scene(s: &str) -> std::result::Result<ScenePreset, String> {
    match s {
        "walking" => Ok(ScenePreset::Walking),
        "static" => Ok(ScenePreset::Static),
        _ => Err(format!("unknown scene {s:?} (walking, static)")),
    }
}

impl Settings {
    fn apply(&self, cfg: &mut PipelineConfig) {
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { cfg.$($field).+ = v; })*
            };
        }
        set!(
            window => window, shift => shift, sparsity => sparsity,
            aggregated_paths => aggregated_paths, min_units => min_units,
            step_size => step_size, tolerance => tolerance, max_iter => max_iter,
            columns => columns, seed => seed, scene => scene, noise_std => noise_std,
            jitter => jitter, background_interval => background_interval,
            carrier_hz => radio.carrier_hz, bandwidth_hz => radio.bandwidth_hz,
            grid_step_s => radio.grid_step_s, paths => radio.paths, beams => radio.beams,
            torso_bin => walking.torso_bin, torso_beam => walking.torso_beam,
        );
        if self.measurements.is_some() {
            cfg.measurements_per_window = self.measurements;
        }
        if self.trace.is_some() {
            cfg.trace = self.trace.clone();
        }
        cfg.inject |= self.inject;
        if self.sequential {
            cfg.parallel = false;
        }
    }
}

fn config(path: Option<&Path>, set: &Settings) -> Result<PipelineConfig> {
    let mut cfg = match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    set.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn is_bin(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("bin"))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))
}

fn read_stream(path: &Path) -> Result<CirStream> {
    let f = open(path)?;
    if is_bin(path) {
        read_cir_bin(f, path)
    } else {
        read_cir_csv(f, path)
    }
}

fn write_stream(path: &Path, stream: &CirStream) -> Result<()> {
    let f = create(path)?;
    let res = if is_bin(path) {
        write_cir_bin(stream, f)
    } else {
        write_cir_csv(stream, f)
    };
    res.map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn finish(out: &PipelineOutput, dir: &Path, allow_gaps: bool) -> Result<()> {
    let m = &out.metrics;
    if let (Some(s), Some(f)) = (m.rmse_sparcs, m.rmse_stft) {
        println!("rmse sparcs {s:.5} stft {f:.5}");
    }
    println!(
        "{} columns, {} gaps, outputs in {}",
        m.columns,
        m.gaps,
        dir.display()
    );
    match out.first_gap() {
        Some(w) if !allow_gaps => {
            for e in &m.window_errors {
                eprintln!("{e}");
            }
            Err(Error::EmptyWindow { window: w })
        }
        _ => Ok(()),
    }
}

fn load_or_make_trace(cfg: &PipelineConfig, inj: &InjectArgs) -> Result<TrafficTrace> {
    match &cfg.trace {
        Some(p) => {
            let loaded = load_traffic_trace(p)?;
            if loaded.out_of_order > 0 {
                log::warn!("{}: {} packets out of order, sorted", p.display(), loaded.out_of_order);
            }
            Ok(loaded.trace)
        }
        None => {
            let sizes = (inj.packet_bytes[0], inj.packet_bytes[1]);
            poisson_trace(inj.poisson_rate, inj.duration.unwrap_or(60.0), sizes, cfg.seed)
        }
    }
}

fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    use std::io::Write;
    let ctx = || format!("writing {}", path.display());
    let mut f = std::io::BufWriter::new(create(path)?);
    let fmt = |v: Option<String>| v.unwrap_or_default();
    let mut body = String::from("min_units,packets,injected,units_min,units_mean,overhead\n");
    for r in rows {
        body.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.min_units,
            r.packets,
            r.injected,
            fmt(r.units_min.map(|v| v.to_string())),
            fmt(r.units_mean.map(|v| v.to_string())),
            fmt(r.overhead.map(|v| v.to_string())),
        ));
    }
    f.write_all(body.as_bytes()).map_err(|e| Error::io(ctx(), e))?;
    f.flush().map_err(|e| Error::io(ctx(), e))
}

fn run(cli: Cli) -> Result<()> {
    let cfg_path = cli.config.as_deref();
    match cli.command {
        Command::Synth { set, out } => {
            let cfg = config(cfg_path, &set)?;
            let stream = synthesize(&cfg)?;
            write_stream(&out, &stream)?;
            let mut manifest = Manifest::new("synth", &cfg);
            manifest.outputs.push(out.display().to_string());
            write_json(&out.with_extension("manifest.json"), &manifest)?;
            println!("{} samples written to {}", stream.len(), out.display());
        }
        Command::Resample {
            set,
            input,
            out,
            slots,
        } => {
            let cfg = config(cfg_path, &set)?;
            let stream = read_stream(&input)?;
            let (first, last) = match (stream.samples().first(), stream.samples().last()) {
                (Some(a), Some(b)) => (a.t, b.t),
                _ => return Err(Error::invalid(format!("{}: stream is empty", input.display()))),
            };
            let step = cfg.radio.grid_step_s;
            let k = slots.unwrap_or(((last - first) / step + 0.5).floor() as usize + 1);
            let grid = slotted_resample(&stream, step, k)?;
            write_stream(&out, &grid.to_stream(first)?)?;
            println!("{} of {} slots filled", grid.filled(), grid.slots());
        }
        Command::Recover {
            set,
            input,
            out_dir,
            beam,
            allow_gaps,
        } => {
            let cfg = config(cfg_path, &set)?;
            let stream = read_stream(&input)?;
            let out = recover_stream(&stream, &cfg, beam)?;
            write_outputs(&out_dir, &out, &mut Manifest::new("recover", &cfg))?;
            finish(&out, &out_dir, allow_gaps)?;
        }
        Command::Pipeline {
            set,
            out_dir,
            allow_gaps,
        } => {
            let cfg = config(cfg_path, &set)?;
            let out = run_pipeline(&cfg)?;
            write_outputs(&out_dir, &out, &mut Manifest::new("pipeline", &cfg))?;
            finish(&out, &out_dir, allow_gaps)?;
        }
        Command::InjectSim { set, inj, out, csv } => {
            let cfg = config(cfg_path, &set)?;
            let trace = load_or_make_trace(&cfg, &inj)?;
            let step = cfg.radio.grid_step_s;
            let slots = match inj.duration {
                Some(d) if cfg.trace.is_some() => (d / step).floor() as usize,
                _ => slots_spanning(&trace, step),
            };
            let params = OverheadParams {
                trn_fields: inj.trn_fields,
                trn_len_bits: inj.trn_len_bits,
                ppdu_target_bytes: inj.ppdu_target_bytes,
                ppdu_trace_bytes: inj.ppdu_trace_bytes,
            };
            let rows = overhead_sweep(&trace, step, slots, cfg.window, &inj.sweep, params)?;
            for r in &rows {
                match r.overhead {
                    Some(oh) => println!("M_s {:>3}: {} injected, OH {:.4}%", r.min_units, r.injected, 100.0 * oh),
                    None => println!("M_s {:>3}: {} injected, OH undefined (no traffic bits)", r.min_units, r.injected),
                }
            }
            write_json(&out, &rows)?;
            if let Some(c) = csv {
                write_sweep_csv(&c, &rows)?;
            }
        }
        Command::Export { input, out } => {
            let is_pgm = out.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
            if is_pgm {
                let (vel, cols) = read_spectrogram_csv(open(&input)?, &input)?;
                write_pgm(&cols, vel.len(), create(&out)?)
                    .map_err(|e| Error::io(format!("writing {}", out.display()), e))?;
            } else {
                write_stream(&out, &read_stream(&input)?)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
