//! Slotted resampling onto a regular grid and half-overlapping windowing.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::{CirSample, CirStream, GainMatrix};

/// CIR resampled on the grid `k·T_c`, `k = 0..K`, origin at the first sample
/// of the source stream. Missing slots hold all-zero snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularGrid {
    step: f64,
    paths: usize,
    beams: usize,
    /// Slot-major, then path-major, then beam.
    values: Vec<Complex64>,
    mask: Vec<bool>,
    /// Offset of the source sample from its slot center [s], for filled slots.
    source_offset: Vec<Option<f64>>,
}

impl RegularGrid {
    /// Build a grid directly from per-slot snapshots (`None` = missing).
    pub fn from_slots(step: f64, slots: Vec<Option<GainMatrix>>) -> Result<Self> {
        if slots.is_empty() {
            return Err(Error::invalid("grid needs at least one slot"));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::invalid("grid step must be positive"));
        }
        let (paths, beams) = slots
            .iter()
            .flatten()
            .map(|g| (g.paths(), g.beams()))
            .next()
            .ok_or_else(|| Error::invalid("grid has no filled slot to fix its dimensions"))?;
        let cells = paths * beams;
        let mut values = vec![Complex64::new(0.0, 0.0); slots.len() * cells];
        let mut mask = vec![false; slots.len()];
        let mut source_offset = vec![None; slots.len()];
        for (k, slot) in slots.into_iter().enumerate() {
            if let Some(g) = slot {
                if g.paths() != paths || g.beams() != beams {
                    return Err(Error::invalid("slot snapshot dimensions differ"));
                }
                values[k * cells..(k + 1) * cells].copy_from_slice(g.as_slice());
                mask[k] = true;
                source_offset[k] = Some(0.0);
            }
        }
        Ok(Self {
            step,
            paths,
            beams,
            values,
            mask,
            source_offset,
        })
    }

    /// A grid with every slot missing.
    pub fn empty(step: f64, slots: usize, paths: usize, beams: usize) -> Result<Self> {
        if slots == 0 || paths == 0 || beams == 0 {
            return Err(Error::invalid("grid dimensions must be positive"));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::invalid("grid step must be positive"));
        }
        Ok(Self {
            step,
            paths,
            beams,
            values: vec![Complex64::new(0.0, 0.0); slots * paths * beams],
            mask: vec![false; slots],
            source_offset: vec![None; slots],
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn slots(&self) -> usize {
        self.mask.len()
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn beams(&self) -> usize {
        self.beams
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn filled(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn source_offset(&self, slot: usize) -> Option<f64> {
        self.source_offset[slot]
    }

    fn cells(&self) -> usize {
        self.paths * self.beams
    }

    pub fn value(&self, slot: usize, path: usize, beam: usize) -> Complex64 {
        self.values[slot * self.cells() + path * self.beams + beam]
    }

    pub(crate) fn value_mut(&mut self, slot: usize, path: usize, beam: usize) -> &mut Complex64 {
        let cells = self.cells();
        &mut self.values[slot * cells + path * self.beams + beam]
    }

    /// Snapshot of slot `k`.
    pub fn snapshot(&self, slot: usize) -> GainMatrix {
        let c = self.cells();
        GainMatrix::from_vec(self.paths, self.beams, self.values[slot * c..(slot + 1) * c].to_vec())
            .expect("grid slot has grid dimensions")
    }

    /// Filled slots as a stream timestamped at slot centers from `origin`.
    pub fn to_stream(&self, origin: f64) -> Result<CirStream> {
        let samples = (0..self.slots())
            .filter(|&k| self.mask[k])
            .map(|k| CirSample {
                t: origin + k as f64 * self.step,
                gains: self.snapshot(k),
            })
            .collect();
        CirStream::new(samples)
    }

    /// Time series of one `(path, beam)` cell over slots `start..start+len`.
    pub fn cell_series(&self, path: usize, beam: usize, start: usize, len: usize) -> Vec<Complex64> {
        (start..start + len)
            .map(|k| self.value(k, path, beam))
            .collect()
    }
}

/// Map `stream` onto `slots` grid slots of width `step`.
///
/// Slot `k` owns `[k·step − step/2, k·step + step/2)` relative to the first
/// stream timestamp and keeps the sample nearest its center, the earlier one
/// on ties. Samples past the last slot are dropped.
pub fn slotted_resample(stream: &CirStream, step: f64, slots: usize) -> Result<RegularGrid> {
    let Some(first) = stream.samples().first() else {
        return Err(Error::invalid("cannot resample an empty stream"));
    };
    slotted_resample_at(stream, first.t, step, slots)
}

/// As [`slotted_resample`] with slot 0 centred on `origin`. Samples before
/// the first slot are dropped as well.
pub fn slotted_resample_at(stream: &CirStream, origin: f64, step: f64, slots: usize) -> Result<RegularGrid> {
    if slots == 0 {
        return Err(Error::invalid("slot count must be positive"));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid("grid step must be positive"));
    }
    let Some((paths, beams)) = stream.dims() else {
        return Err(Error::invalid("cannot resample an empty stream"));
    };
    let mut best: Vec<Option<(usize, f64)>> = vec![None; slots];
    for (i, s) in stream.samples().iter().enumerate() {
        let tau = s.t - origin;
        let k = (tau / step + 0.5).floor();
        if k < 0.0 || k >= slots as f64 {
            continue;
        }
        let k = k as usize;
        let dist = (tau - k as f64 * step).abs();
        match best[k] {
            Some((_, d)) if d <= dist => {}
            _ => best[k] = Some((i, dist)),
        }
    }
    let mut grid = RegularGrid::empty(step, slots, paths, beams)?;
    let cells = paths * beams;
    for (k, b) in best.iter().enumerate() {
        if let Some((i, _)) = *b {
            let s = &stream.samples()[i];
            grid.values[k * cells..(k + 1) * cells].copy_from_slice(s.gains.as_slice());
            grid.mask[k] = true;
            grid.source_offset[k] = Some(s.t - origin - k as f64 * step);
        }
    }
    Ok(grid)
}

/// Position of window `index` on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpan {
    pub index: usize,
    pub offset: usize,
    pub len: usize,
}

/// Window layout over a grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowPlan {
    pub spans: Vec<WindowSpan>,
    /// Set when the grid is shorter than one window.
    pub too_short: bool,
}

/// Windows of `len` slots every `shift` slots: `⌊(K − W)/δ⌋ + 1` of them.
pub fn plan_windows(slots: usize, len: usize, shift: usize) -> Result<WindowPlan> {
    if len < 2 || len % 2 != 0 {
        return Err(Error::invalid(format!("window length {len} must be even and >= 2")));
    }
    if shift == 0 {
        return Err(Error::invalid("window shift must be positive"));
    }
    if len > slots {
        return Ok(WindowPlan {
            spans: Vec::new(),
            too_short: true,
        });
    }
    let count = (slots - len) / shift + 1;
    Ok(WindowPlan {
        spans: (0..count)
            .map(|m| WindowSpan {
                index: m,
                offset: m * shift,
                len,
            })
            .collect(),
        too_short: false,
    })
}

/// One `(path, beam)` cell over one window, zero-filled where samples are missing.
#[derive(Debug, Clone, PartialEq)]
pub struct CirWindow {
    pub index: usize,
    pub offset: usize,
    pub values: Vec<Complex64>,
    /// Sorted in-window indices of the available samples.
    pub available: Vec<usize>,
}

impl CirWindow {
    pub fn from_grid(grid: &RegularGrid, span: WindowSpan, path: usize, beam: usize) -> Self {
        let mut values = Vec::with_capacity(span.len);
        let mut available = Vec::new();
        for i in 0..span.len {
            let k = span.offset + i;
            if grid.mask[k] {
                available.push(i);
                values.push(grid.value(k, path, beam));
            } else {
                values.push(Complex64::new(0.0, 0.0));
            }
        }
        Self {
            index: span.index,
            offset: span.offset,
            values,
            available,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Available samples `h(m)` in index order.
    pub fn measurements(&self) -> Vec<Complex64> {
        self.available.iter().map(|&i| self.values[i]).collect()
    }

    /// Restrict the window to the in-window indices in `keep` that are
    /// currently available, zeroing the rest.
    pub fn restricted(&self, keep: &[usize]) -> Self {
        let mut flags = vec![false; self.len()];
        for &i in keep {
            if i < flags.len() {
                flags[i] = true;
            }
        }
        let available: Vec<usize> = self.available.iter().copied().filter(|&i| flags[i]).collect();
        let mut values = vec![Complex64::new(0.0, 0.0); self.len()];
        for &i in &available {
            values[i] = self.values[i];
        }
        Self {
            index: self.index,
            offset: self.offset,
            values,
            available,
        }
    }
}

/// Cut every window of one `(path, beam)` cell.
pub fn cut_windows(
    grid: &RegularGrid,
    len: usize,
    shift: usize,
    path: usize,
    beam: usize,
) -> Result<(Vec<CirWindow>, bool)> {
    if path >= grid.paths || beam >= grid.beams {
        return Err(Error::invalid(format!("cell ({path},{beam}) outside the grid")));
    }
    let plan = plan_windows(grid.slots(), len, shift)?;
    let windows = plan
        .spans
        .iter()
        .map(|&s| CirWindow::from_grid(grid, s, path, beam))
        .collect();
    Ok((windows, plan.too_short))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::CirSample;

    fn stream_at(times: &[f64]) -> CirStream {
        CirStream::new(
            times
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    let mut g = GainMatrix::zeros(1, 1);
                    *g.get_mut(0, 0) = Complex64::new(i as f64 + 1.0, 0.0);
                    CirSample { t, gains: g }
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn hand_enumerated_bins() {
        let tc = 1e-3;
        let g = slotted_resample(&stream_at(&[0.0, 0.4 * tc, 1.6 * tc]), tc, 3).unwrap();
        assert_eq!(g.mask(), &[true, false, true]);
        assert_eq!(g.value(0, 0, 0), Complex64::new(1.0, 0.0));
        assert_eq!(g.value(1, 0, 0), Complex64::new(0.0, 0.0));
        assert_eq!(g.value(2, 0, 0), Complex64::new(3.0, 0.0));
    }

    #[test]
    fn tie_goes_to_earlier_sample() {
        // Both 0.75 and 1.25 (in units of T_c = 0.5) sit 0.25 from slot 2's center at 1.0.
        let g = slotted_resample(&stream_at(&[0.0, 0.75, 1.25]), 0.5, 3).unwrap();
        assert_eq!(g.value(2, 0, 0), Complex64::new(2.0, 0.0));
    }

    #[test]
    fn origin_is_first_sample_and_tail_dropped() {
        let g = slotted_resample(&stream_at(&[5.0, 5.001, 5.0039, 9.0]), 1e-3, 5).unwrap();
        assert_eq!(g.mask(), &[true, true, false, false, true]);
        assert_eq!(g.filled(), 3);
    }

    #[test]
    fn rejects_zero_slots_and_empty_stream() {
        assert!(slotted_resample(&stream_at(&[0.0]), 1.0, 0).is_err());
        assert!(slotted_resample(&CirStream::default(), 1.0, 4).is_err());
    }

    #[test]
    fn window_counts() {
        assert_eq!(plan_windows(64, 64, 32).unwrap().spans.len(), 1);
        let p = plan_windows(96, 64, 32).unwrap();
        assert_eq!(p.spans.len(), 2);
        assert_eq!(p.spans[1].offset, 32);
        let p = plan_windows(32, 64, 32).unwrap();
        assert!(p.spans.is_empty() && p.too_short);
        assert!(plan_windows(64, 63, 32).is_err());
    }

    #[test]
    fn available_set_follows_mask() {
        let times: Vec<f64> = (0..64).filter(|i| i % 4 == 0).map(|i| i as f64).collect();
        let g = slotted_resample(&stream_at(&times), 1.0, 64).unwrap();
        let (w, short) = cut_windows(&g, 64, 32, 0, 0).unwrap();
        assert!(!short);
        assert_eq!(w[0].available.len(), 16);
        for (i, v) in w[0].values.iter().enumerate() {
            assert_eq!(w[0].available.contains(&i), v.norm() > 0.0);
        }
    }

    #[test]
    fn restriction_keeps_only_subset() {
        let g = slotted_resample(&stream_at(&[0.0, 1.0, 2.0, 3.0]), 1.0, 4).unwrap();
        let (w, _) = cut_windows(&g, 4, 2, 0, 0).unwrap();
        let r = w[0].restricted(&[1, 3, 7]);
        assert_eq!(r.available, vec![1, 3]);
        assert_eq!(r.values[0], Complex64::new(0.0, 0.0));
        assert_eq!(r.values[3], Complex64::new(4.0, 0.0));
    }
}
