//! Sensing-unit injection on the `T_c` slot grid and the resulting overhead.
//!
//! Windows of `W` slots advance by `W/2`, so every half-window is the second
//! half of one window and the first half of the next. At each half-window
//! boundary the scheduler counts the units already seen in the first half of
//! the current window (`N_a`), schedules `N_w = max(M_s − N_a, 0)` units as a
//! burst in the last `N_w` slots, and then walks the second half slot by slot,
//! reusing communication packets wherever they show up.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::TrafficTrace;

/// Which slots carry at least one reflected communication packet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotTimeline {
    occupied: Vec<bool>,
    packets: Vec<u32>,
}

impl SlotTimeline {
    pub fn from_occupancy(occupied: Vec<bool>) -> Self {
        let packets = occupied.iter().map(|&o| o as u32).collect();
        Self { occupied, packets }
    }

    pub fn occupied(&self) -> &[bool] {
        &self.occupied
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    /// Packets that landed on the grid, counting every packet in a shared slot.
    pub fn packet_count(&self) -> u64 {
        self.packets.iter().map(|&p| p as u64).sum()
    }
}

/// Bin packet timestamps onto `slots` slots of width `step`, origin at the
/// first packet. Several packets in one slot collapse to one opportunity.
pub fn bin_traffic(trace: &TrafficTrace, step: f64, slots: usize) -> Result<SlotTimeline> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid("grid step must be positive"));
    }
    let mut occupied = vec![false; slots];
    let mut packets = vec![0u32; slots];
    if let Some(first) = trace.packets().first() {
        let t0 = first.timestamp;
        for p in trace.packets() {
            let k = ((p.timestamp - t0) / step + 0.5).floor();
            if k >= 0.0 && k < slots as f64 {
                occupied[k as usize] = true;
                packets[k as usize] += 1;
            }
        }
    }
    Ok(SlotTimeline { occupied, packets })
}

/// Slots needed to cover the whole trace on a `step` grid.
pub fn slots_spanning(trace: &TrafficTrace, step: f64) -> usize {
    match (trace.packets().first(), trace.packets().last()) {
        (Some(a), Some(b)) => ((b.timestamp - a.timestamp) / step + 0.5).floor() as usize + 1,
        _ => 0,
    }
}

/// Timeline where each slot is occupied with probability `p`. A slot is
/// occupied iff its uniform draw is below `p`, so timelines from one seed are
/// nested as `p` grows.
pub fn bernoulli_timeline(p: f64, slots: usize, seed: u64) -> SlotTimeline {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SlotTimeline::from_occupancy((0..slots).map(|_| rng.random::<f64>() < p).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotAction {
    None,
    /// A communication packet carries the sensing unit.
    Reuse,
    /// A standalone sensing unit is transmitted.
    Inject,
}

impl SlotAction {
    pub fn is_unit(self) -> bool {
        self != SlotAction::None
    }
}

/// Scheduler state for one window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InjectionState {
    pub window: usize,
    /// `N_a`: units seen in the first half.
    pub observed: usize,
    /// `N_w`: units scheduled for the second half, after clamping to `W/2`.
    pub needed: usize,
    /// `S_m` as scheduled in P2, in-half slot indices.
    pub scheduled: Vec<usize>,
    /// What was left of `S_m` after P3.
    pub remaining: Vec<usize>,
}

/// Run P1–P3 for one window.
///
/// `second_half` tells, slot by slot, whether a packet arrives; the decision
/// for slot `q` only reads `second_half[..=q]`.
pub fn run_window(
    window: usize,
    first_half_units: usize,
    second_half: &[bool],
    min_units: usize,
    len: usize,
) -> Result<(InjectionState, Vec<SlotAction>)> {
    if len < 2 || len % 2 != 0 {
        return Err(Error::invalid(format!("window length {len} must be even and >= 2")));
    }
    if min_units > len {
        return Err(Error::invalid(format!("M_s = {min_units} exceeds window length {len}")));
    }
    let half = len / 2;
    if second_half.len() > half {
        return Err(Error::invalid("second half longer than W/2"));
    }
    // P1, P2: burst at the end of the half-window.
    let needed = min_units.saturating_sub(first_half_units).min(half);
    let scheduled: Vec<usize> = (half - needed..half).collect();
    let mut pending: BTreeSet<usize> = scheduled.iter().copied().collect();

    // P3.
    let mut actions = Vec::with_capacity(second_half.len());
    for (q, &packet) in second_half.iter().enumerate() {
        let action = if pending.remove(&q) {
            if packet {
                SlotAction::Reuse
            } else {
                SlotAction::Inject
            }
        } else if packet {
            pending.pop_first();
            SlotAction::Reuse
        } else {
            SlotAction::None
        };
        actions.push(action);
    }
    Ok((
        InjectionState {
            window,
            observed: first_half_units,
            needed,
            scheduled,
            remaining: pending.into_iter().collect(),
        },
        actions,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowUnits {
    pub window: usize,
    pub observed: usize,
    pub scheduled: usize,
    pub units: usize,
    pub injected: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InjectionLog {
    pub actions: Vec<SlotAction>,
    /// Completed windows only.
    pub windows: Vec<WindowUnits>,
    pub injected: u64,
    pub packets: u64,
    pub min_units: usize,
    pub window_len: usize,
}

impl InjectionLog {
    pub fn units_per_window(&self) -> impl Iterator<Item = usize> + '_ {
        self.windows.iter().map(|w| w.units)
    }

    pub fn min_units_per_window(&self) -> Option<usize> {
        self.units_per_window().min()
    }

    pub fn mean_units_per_window(&self) -> Option<f64> {
        (!self.windows.is_empty())
            .then(|| self.units_per_window().sum::<usize>() as f64 / self.windows.len() as f64)
    }

    /// Slots that carry a sensing unit (reused or injected).
    pub fn unit_mask(&self) -> Vec<bool> {
        self.actions.iter().map(|a| a.is_unit()).collect()
    }
}

/// Run the scheduler over every half-window of `timeline`.
///
/// The slots `[0, W/2)` are treated as the second half of a window that
/// starts before the timeline, so the first complete window is covered too.
/// Units in an overlap count for both windows sharing it.
pub fn simulate_injection(timeline: &SlotTimeline, min_units: usize, len: usize) -> Result<InjectionLog> {
    if len < 2 || len % 2 != 0 {
        return Err(Error::invalid(format!("window length {len} must be even and >= 2")));
    }
    if min_units > len {
        return Err(Error::invalid(format!("M_s = {min_units} exceeds window length {len}")));
    }
    let half = len / 2;
    let k = timeline.len();
    let mut actions = vec![SlotAction::None; k];
    let mut prev_units = 0;
    let mut start = 0;
    let mut half_index = 0;
    while start < k {
        let end = (start + half).min(k);
        let (state, acts) = run_window(
            half_index,
            prev_units,
            &timeline.occupied[start..end],
            min_units,
            len,
        )?;
        debug_assert!(state.remaining.iter().all(|&s| s >= end - start));
        actions[start..end].copy_from_slice(&acts);
        prev_units = acts.iter().filter(|a| a.is_unit()).count();
        start = end;
        half_index += 1;
    }

    let mut windows = Vec::new();
    let mut offset = 0;
    let mut index = 0;
    while offset + len <= k {
        let span = &actions[offset..offset + len];
        let first = &actions[offset..offset + half];
        let observed = first.iter().filter(|a| a.is_unit()).count();
        windows.push(WindowUnits {
            window: index,
            observed,
            scheduled: min_units.saturating_sub(observed).min(half),
            units: span.iter().filter(|a| a.is_unit()).count(),
            injected: span.iter().filter(|&&a| a == SlotAction::Inject).count(),
        });
        offset += half;
        index += 1;
    }
    let injected = actions.iter().filter(|&&a| a == SlotAction::Inject).count() as u64;
    Ok(InjectionLog {
        actions,
        windows,
        injected,
        packets: timeline.packet_count(),
        min_units,
        window_len: len,
    })
}

/// Sizes used to put sensing bits in proportion to communication bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverheadParams {
    /// TRN fields per sensing operation.
    pub trn_fields: u32,
    /// Bits per TRN field.
    pub trn_len_bits: u64,
    /// Target PPDU size the trace is rescaled to [bytes].
    pub ppdu_target_bytes: u64,
    /// Maximum PPDU size of the recorded trace [bytes].
    pub ppdu_trace_bytes: u64,
}

pub const PPDU_HT_BYTES: u64 = 65_000;
pub const PPDU_DMG_BYTES: u64 = 262_000;
pub const PPDU_VHT_BYTES: u64 = 4_692_000;
pub const PPDU_LEGACY_BYTES: u64 = 1_500;
pub const TRN_FIELD_BITS: u64 = 768;
/// Airtime of one TRN field [s].
pub const TRN_AIRTIME_S: f64 = 436e-9;

impl Default for OverheadParams {
    fn default() -> Self {
        Self {
            trn_fields: 1,
            trn_len_bits: TRN_FIELD_BITS,
            ppdu_target_bytes: PPDU_DMG_BYTES,
            ppdu_trace_bytes: PPDU_LEGACY_BYTES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverheadReport {
    pub overhead: f64,
    /// `n_c`: communication packets in the trace.
    pub packets: u64,
    /// `n_inj`.
    pub injected: u64,
    /// `Σ c̃_i` [bits].
    pub rescaled_bits: f64,
    pub params: OverheadParams,
}

/// `OH = n_TRN (n_c + n_inj) TRN_len / Σ c̃_i` with
/// `c̃_i = (PPDU_target / PPDU_trace) c_i`.
pub fn compute_overhead(log: &InjectionLog, trace: &TrafficTrace, params: OverheadParams) -> Result<OverheadReport> {
    overhead_from_counts(trace.len() as u64, log.injected, trace.total_bits(), params)
}

pub fn overhead_from_counts(
    packets: u64,
    injected: u64,
    trace_bits: u64,
    params: OverheadParams,
) -> Result<OverheadReport> {
    if params.ppdu_trace_bytes == 0 {
        return Err(Error::invalid("trace PPDU size must be positive"));
    }
    // multiply first so integer inputs stay exact
    let rescaled_bits = params.ppdu_target_bytes as f64 * trace_bits as f64 / params.ppdu_trace_bytes as f64;
    if !(rescaled_bits > 0.0) {
        return Err(Error::Numerical("trace carries no traffic bits; overhead is undefined".into()));
    }
    let sensing_bits = params.trn_fields as f64 * (packets + injected) as f64 * params.trn_len_bits as f64;
    Ok(OverheadReport {
        overhead: sensing_bits / rescaled_bits,
        packets,
        injected,
        rescaled_bits,
        params,
    })
}

/// Size of one sensing unit relative to a PPDU.
pub fn trn_fraction_of_ppdu(trn_bits: u64, ppdu_bytes: u64) -> f64 {
    trn_bits as f64 / (8.0 * ppdu_bytes as f64)
}

/// One row of an `M_s` sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub min_units: usize,
    pub packets: u64,
    pub injected: u64,
    pub units_min: Option<usize>,
    pub units_mean: Option<f64>,
    /// `None` when the trace carries no bits.
    pub overhead: Option<f64>,
}

/// Simulate injection for every `M_s` in `values` over `slots` slots of the
/// trace and report the overhead of each.
pub fn overhead_sweep(
    trace: &TrafficTrace,
    step: f64,
    slots: usize,
    len: usize,
    values: &[usize],
    params: OverheadParams,
) -> Result<Vec<SweepRow>> {
    let timeline = bin_traffic(trace, step, slots)?;
    values
        .iter()
        .map(|&ms| {
            let log = simulate_injection(&timeline, ms, len)?;
            let overhead = match overhead_from_counts(trace.len() as u64, log.injected, trace.total_bits(), params) {
                Ok(r) => Some(r.overhead),
                Err(Error::Numerical(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(SweepRow {
                min_units: ms,
                packets: trace.len() as u64,
                injected: log.injected,
                units_min: log.min_units_per_window(),
                units_mean: log.mean_units_per_window(),
                overhead,
            })
        })
        .collect()
}

pub const SWEEP_MIN_UNITS: [usize; 6] = [4, 8, 16, 24, 32, 64];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Packet;

    fn pk(t: f64) -> Packet {
        Packet {
            timestamp: t,
            size_bytes: 100,
        }
    }

    #[test]
    fn on_grid_traffic_maps_one_to_one() {
        let tr = TrafficTrace::new((0..5).map(|k| pk(1.0 + 2.0 * k as f64 * 1e-3)).collect()).unwrap();
        let tl = bin_traffic(&tr, 1e-3, 10).unwrap();
        assert_eq!(
            tl.occupied(),
            &[true, false, true, false, true, false, true, false, true, false]
        );
        assert_eq!(slots_spanning(&tr, 1e-3), 9);
    }

    #[test]
    fn shared_slot_collapses() {
        let tr = TrafficTrace::new(vec![pk(0.0), pk(0.9e-3), pk(1.1e-3)]).unwrap();
        let tl = bin_traffic(&tr, 1e-3, 3).unwrap();
        assert_eq!(tl.occupied(), &[true, true, false]);
        assert_eq!(tl.packet_count(), 3);
        let empty = bin_traffic(&TrafficTrace::default(), 1e-3, 4).unwrap();
        assert_eq!(empty.occupied(), &[false; 4]);
    }

    #[test]
    fn enough_first_half_units_schedule_nothing() {
        let (st, acts) = run_window(0, 9, &[false; 8], 8, 16).unwrap();
        assert_eq!(st.needed, 0);
        assert!(st.scheduled.is_empty());
        assert!(acts.iter().all(|&a| a == SlotAction::None));
    }

    #[test]
    fn dense_traffic_never_injects() {
        for ms in 0..=16 {
            let (_, acts) = run_window(0, 0, &[true; 8], ms, 16).unwrap();
            assert!(acts.iter().all(|&a| a == SlotAction::Reuse));
        }
    }

    #[test]
    fn clamp_to_half_window() {
        let (st, acts) = run_window(0, 0, &[false; 32], 64, 64).unwrap();
        assert_eq!(st.needed, 32);
        assert!(acts.iter().all(|&a| a == SlotAction::Inject));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(run_window(0, 0, &[false; 8], 17, 16).is_err());
        assert!(run_window(0, 0, &[false; 8], 4, 15).is_err());
        assert!(simulate_injection(&SlotTimeline::from_occupancy(vec![false; 8]), 4, 7).is_err());
    }

    #[test]
    fn empty_timeline_injects_to_requirement() {
        let tl = SlotTimeline::from_occupancy(vec![false; 64 * 10]);
        let log = simulate_injection(&tl, 8, 64).unwrap();
        assert!(log.windows.iter().all(|w| w.units >= 8));
        assert_eq!(log.packets, 0);
        assert_eq!(log.injected as usize, log.actions.iter().filter(|&&a| a == SlotAction::Inject).count());
    }

    #[test]
    fn overhead_formula() {
        let p = OverheadParams::default();
        let r = overhead_from_counts(10, 0, 10 * 1500 * 8, p).unwrap();
        let expect = 10.0 * 768.0 / (262_000.0 * 120_000.0 / 1_500.0);
        assert_eq!(r.overhead, expect);
        assert!(overhead_from_counts(0, 3, 0, p).is_err());
        let more = overhead_from_counts(10, 1, 10 * 1500 * 8, p).unwrap();
        assert!(more.overhead > r.overhead);
    }
}
