//! Path selection, multi-path aggregation and spectrogram assembly.

use std::io::Write;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recovery::SparseSpectrum;
use crate::resample::{RegularGrid, WindowSpan};
use crate::signal::DopplerAxis;

/// Remove static background: per `(path, beam)` cell, subtract the mean over
/// the available slots of each block of `interval` slots. Missing slots stay
/// zero. An interval longer than the grid falls back to the global mean.
pub fn background_subtract(grid: &RegularGrid, interval: usize) -> Result<RegularGrid> {
    if interval < 2 {
        return Err(Error::invalid("background interval must be at least 2 slots"));
    }
    let k = grid.slots();
    let interval = interval.min(k);
    let mut out = grid.clone();
    let mut start = 0;
    while start < k {
        let end = (start + interval).min(k);
        let present: Vec<usize> = (start..end).filter(|&s| grid.mask()[s]).collect();
        if !present.is_empty() {
            let n = present.len() as f64;
            for p in 0..grid.paths() {
                for b in 0..grid.beams() {
                    let mean = present
                        .iter()
                        .map(|&s| grid.value(s, p, b))
                        .sum::<num_complex::Complex64>()
                        / n;
                    for &s in &present {
                        *out.value_mut(s, p, b) -= mean;
                    }
                }
            }
        }
        start = end;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSelection {
    pub path: usize,
    pub beam: usize,
    /// Mean `|h|²` of the selected cell over the available slots.
    pub power: f64,
    /// False when no slot was available.
    pub valid: bool,
    /// Selected power did not clear the detection threshold.
    pub low_confidence: bool,
}

fn mean_power(grid: &RegularGrid, slots: &[usize], path: usize, beam: usize) -> f64 {
    slots
        .iter()
        .map(|&s| grid.value(s, path, beam).norm_sqr())
        .sum::<f64>()
        / slots.len() as f64
}

fn select(
    grid: &RegularGrid,
    slots: &[usize],
    beams: Range<usize>,
    threshold: Option<f64>,
) -> PathSelection {
    let avail: Vec<usize> = slots.iter().copied().filter(|&s| grid.mask()[s]).collect();
    if avail.is_empty() {
        return PathSelection {
            path: 0,
            beam: beams.start,
            power: 0.0,
            valid: false,
            low_confidence: true,
        };
    }
    let mut best = (0, beams.start, f64::NEG_INFINITY);
    for p in 0..grid.paths() {
        for b in beams.clone() {
            let pw = mean_power(grid, &avail, p, b);
            if pw > best.2 {
                best = (p, b, pw);
            }
        }
    }
    PathSelection {
        path: best.0,
        beam: best.1,
        power: best.2,
        valid: true,
        low_confidence: threshold.is_some_and(|t| best.2 < t),
    }
}

/// Strongest `(ℓ, b)` cell by mean power over the available slots among
/// `slots`; ties go to the lower path, then the lower beam.
pub fn select_strongest_path(grid: &RegularGrid, slots: &[usize], threshold: Option<f64>) -> PathSelection {
    select(grid, slots, 0..grid.beams(), threshold)
}

/// Strongest path on a fixed beam.
pub fn select_strongest_on_beam(
    grid: &RegularGrid,
    slots: &[usize],
    beam: usize,
    threshold: Option<f64>,
) -> Result<PathSelection> {
    if beam >= grid.beams() {
        return Err(Error::invalid(format!("beam {beam} outside the grid")));
    }
    Ok(select(grid, slots, beam..beam + 1, threshold))
}

pub fn window_slots(span: WindowSpan) -> Vec<usize> {
    (span.offset..span.offset + span.len).collect()
}

/// Detection threshold from a noise-only grid: mean + 3·std of the per-window,
/// per-cell mean power.
pub fn calibrate_threshold(noise: &RegularGrid, spans: &[WindowSpan]) -> Result<f64> {
    let mut powers = Vec::new();
    for &span in spans {
        let avail: Vec<usize> = window_slots(span)
            .into_iter()
            .filter(|&s| noise.mask()[s])
            .collect();
        if avail.is_empty() {
            continue;
        }
        for p in 0..noise.paths() {
            for b in 0..noise.beams() {
                powers.push(mean_power(noise, &avail, p, b));
            }
        }
    }
    if powers.is_empty() {
        return Err(Error::invalid("noise grid has no available window to calibrate on"));
    }
    let n = powers.len() as f64;
    let mean = powers.iter().sum::<f64>() / n;
    let var = powers.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n;
    Ok(mean + 3.0 * var.sqrt())
}

/// Paths `ℓ* − ⌊Q/2⌋ ..= ℓ* + ⌊Q/2⌋`, clipped to `[0, L)`.
pub fn aggregation_paths(center: usize, q: usize, paths: usize) -> Result<Range<usize>> {
    if q == 0 || q % 2 == 0 {
        return Err(Error::invalid(format!("aggregated path count {q} must be odd")));
    }
    if center >= paths {
        return Err(Error::invalid("aggregation center outside the CIR"));
    }
    let half = q / 2;
    Ok(center.saturating_sub(half)..(center + half + 1).min(paths))
}

/// Min-max normalize into `[0, 1]`; a flat column maps to zeros.
pub fn normalize_column(column: &mut [f64]) {
    let (lo, hi) = column
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if !(hi > lo) {
        column.fill(0.0);
        return;
    }
    let span = hi - lo;
    for v in column.iter_mut() {
        *v = (*v - lo) / span;
    }
}

/// Sum per-path power spectra and normalize the result.
pub fn aggregate_power(powers: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = powers
        .first()
        .ok_or_else(|| Error::Numerical("no spectra to aggregate".into()))?;
    let mut col = vec![0.0; first.len()];
    for p in powers {
        if p.len() != col.len() {
            return Err(Error::DimensionMismatch {
                expected: col.len(),
                actual: p.len(),
            });
        }
        for (c, v) in col.iter_mut().zip(p) {
            *c += v;
        }
    }
    normalize_column(&mut col);
    Ok(col)
}

/// `D = Σ_ℓ |H_ℓ|²`, min-max normalized.
pub fn aggregate_md(spectra: &[SparseSpectrum]) -> Result<Vec<f64>> {
    let powers: Vec<Vec<f64>> = spectra.iter().map(SparseSpectrum::power).collect();
    aggregate_power(&powers)
}

/// Time-velocity map: one normalized column per window step, natural DFT
/// order inside each column.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub columns: Vec<Vec<f64>>,
    /// Columns whose window could not be processed (rendered as zeros).
    pub gaps: Vec<bool>,
    /// Time between columns [s].
    pub column_step_s: f64,
    pub axis: DopplerAxis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuiltSpectrogram {
    pub spectrogram: Spectrogram,
    /// Fewer than the requested number of columns were available.
    pub short: bool,
}

/// Concatenate up to `count` columns in window order. `None` entries are
/// windows that failed and become zero columns with a gap flag.
pub fn build_spectrogram(
    columns: Vec<Option<Vec<f64>>>,
    count: usize,
    axis: DopplerAxis,
    column_step_s: f64,
) -> Result<BuiltSpectrogram> {
    if count == 0 {
        return Err(Error::invalid("spectrogram needs at least one column"));
    }
    let short = columns.len() < count;
    let w = axis.window;
    let mut out = Vec::new();
    let mut gaps = Vec::new();
    for col in columns.into_iter().take(count) {
        match col {
            Some(c) if c.len() == w => {
                out.push(c);
                gaps.push(false);
            }
            Some(c) => {
                return Err(Error::DimensionMismatch {
                    expected: w,
                    actual: c.len(),
                })
            }
            None => {
                out.push(vec![0.0; w]);
                gaps.push(true);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::invalid("no spectrogram columns available"));
    }
    Ok(BuiltSpectrogram {
        spectrogram: Spectrogram {
            columns: out,
            gaps,
            column_step_s,
            axis,
        },
        short,
    })
}

impl Spectrogram {
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.columns.len() as f64 * self.column_step_s
    }

    /// Columns re-ordered by ascending velocity, with the velocity of each row.
    pub fn shifted(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let order = self.axis.ascending_bins();
        let velocities = order.iter().map(|&b| self.axis.bin_velocity(b)).collect();
        let cols = self
            .columns
            .iter()
            .map(|c| order.iter().map(|&b| c[b]).collect())
            .collect();
        (velocities, cols)
    }

    /// Header of velocity-bin centers [m/s], then one row per time step.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut out = std::io::BufWriter::new(out);
        let (vel, cols) = self.shifted();
        let fmt_row = |vals: &[f64]| vals.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        writeln!(out, "{}", fmt_row(&vel))?;
        for c in &cols {
            writeln!(out, "{}", fmt_row(c))?;
        }
        out.flush()
    }

    /// Plain PGM (P2): rows are velocity bins from +v_max at the top down,
    /// columns are time, value `round(255·D)`.
    pub fn write_pgm<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_pgm(&self.shifted().1, self.axis.window, out)
    }
}

/// PGM of time-ordered columns already sorted by ascending velocity.
pub fn write_pgm<W: Write>(cols: &[Vec<f64>], rows: usize, out: W) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(out);
    writeln!(out, "P2")?;
    writeln!(out, "{} {}", cols.len(), rows)?;
    writeln!(out, "255")?;
    for r in (0..rows).rev() {
        let line: Vec<String> = cols
            .iter()
            .map(|c| ((255.0 * c[r].clamp(0.0, 1.0)).round() as u8).to_string())
            .collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    out.flush()
}

/// Parse a spectrogram CSV back into `(velocities, columns)`.
pub fn read_spectrogram_csv<R: std::io::Read>(reader: R, name: &std::path::Path) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    use std::io::BufRead;
    let parse_row = |line: &str, n: usize| -> Result<Vec<f64>> {
        line.split(',')
            .map(|f| {
                f.trim().parse::<f64>().map_err(|e| Error::Parse {
                    path: name.to_path_buf(),
                    line: n,
                    msg: format!("{f:?}: {e}"),
                })
            })
            .collect()
    };
    let mut lines = std::io::BufReader::new(reader).lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::EmptyFile(name.to_path_buf()))?;
    let header = header.map_err(|e| Error::io(format!("reading {}", name.display()), e))?;
    let velocities = parse_row(&header, 1)?;
    let mut cols = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io(format!("reading {}", name.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = parse_row(&line, i + 1)?;
        if row.len() != velocities.len() {
            return Err(Error::Parse {
                path: name.to_path_buf(),
                line: i + 1,
                msg: format!("{} values, header has {}", row.len(), velocities.len()),
            });
        }
        cols.push(row);
    }
    if cols.is_empty() {
        return Err(Error::EmptyFile(name.to_path_buf()));
    }
    Ok((velocities, cols))
}

/// Root-mean-square elementwise difference of two equally shaped spectrograms.
pub fn rmse(a: &Spectrogram, b: &Spectrogram) -> Result<f64> {
    if a.columns.len() != b.columns.len() {
        return Err(Error::DimensionMismatch {
            expected: a.columns.len(),
            actual: b.columns.len(),
        });
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (ca, cb) in a.columns.iter().zip(&b.columns) {
        if ca.len() != cb.len() {
            return Err(Error::DimensionMismatch {
                expected: ca.len(),
                actual: cb.len(),
            });
        }
        for (x, y) in ca.iter().zip(cb) {
            sum += (x - y).powi(2);
        }
        n += ca.len();
    }
    if n == 0 {
        return Err(Error::invalid("empty spectrograms"));
    }
    Ok((sum / n as f64).sqrt())
}
