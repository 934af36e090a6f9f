mod common;

use common::*;
use mdrecon::aggregate::{aggregate_md, normalize_column, select_strongest_path};
use mdrecon::injection::{bernoulli_timeline, run_window, simulate_injection, SlotAction, SlotTimeline};
use mdrecon::recovery::{iht_recover, IhtConfig};
use mdrecon::resample::{plan_windows, slotted_resample, CirWindow, RegularGrid};
use mdrecon::signal::{
    golay_check, golay_pair, synth_cir, CirSample, CirStream, GainMatrix, RadioConfig, ReflectorTrack,
    VelocityProfile,
};
use mdrecon::Complex64;
use proptest::prelude::*;

fn radio(paths: usize, beams: usize) -> RadioConfig {
    RadioConfig {
        paths,
        beams,
        ..RadioConfig::default()
    }
}

fn track(bin: usize, beams: usize, amp: f64, v: f64, phase0: f64) -> ReflectorTrack {
    ReflectorTrack {
        distance_bin: bin,
        bp_gain: (0..beams).map(|b| Complex64::from_polar(amp / (1.0 + b as f64), 0.3 * b as f64)).collect(),
        velocity: VelocityProfile::constant(v),
        phase0,
    }
}

fn times(n: usize, step: f64) -> Vec<f64> {
    (0..n).map(|k| k as f64 * step).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn synthesis_is_linear_in_reflectors(
        bins in proptest::collection::vec(0usize..8, 1..4),
        v in -4.0f64..4.0,
        amp in 0.1f64..3.0,
    ) {
        let r = radio(8, 2);
        let t = times(20, r.grid_step_s);
        let tracks: Vec<_> = bins.iter().enumerate().map(|(i, &b)| track(b, 2, amp, v * (i as f64 - 1.0), i as f64)).collect();
        let all = synth_cir(&r, &tracks, &t, 0.0, 0).unwrap();
        let parts: Vec<_> = tracks.iter().map(|tr| synth_cir(&r, std::slice::from_ref(tr), &t, 0.0, 0).unwrap()).collect();
        for (k, s) in all.samples().iter().enumerate() {
            for (a, idx) in s.gains.as_slice().iter().zip(0..) {
                let sum: Complex64 = parts.iter().map(|p| p.samples()[k].gains.as_slice()[idx]).sum();
                prop_assert!((a - sum).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn phase_advances_by_doppler_law(v in -4.4f64..4.4, dt_slots in 1usize..40, carrier in 24e9f64..70e9) {
        let r = RadioConfig { carrier_hz: carrier, ..radio(4, 1) };
        let dt = dt_slots as f64 * r.grid_step_s;
        let s = synth_cir(&r, &[track(2, 1, 1.0, v, 0.4)], &[0.0, dt], 0.0, 0).unwrap();
        let ratio = s.samples()[1].gains.get(2, 0) / s.samples()[0].gains.get(2, 0);
        let k = 4.0 * std::f64::consts::PI * carrier / 2.9979e8;
        let expect = Complex64::from_polar(1.0, -k * v * dt);
        prop_assert!((ratio - expect).norm() < 1e-9);
    }

    #[test]
    fn resampling_on_grid_streams_is_identity(
        n in 1usize..60,
        jitter in proptest::collection::vec(-0.45f64..0.45, 60),
        t0 in -5.0f64..5.0,
    ) {
        let step = 0.27e-3;
        let samples: Vec<CirSample> = (0..n).map(|k| {
            let j = if k == 0 { 0.0 } else { jitter[k] };
            let mut g = GainMatrix::zeros(2, 1);
            *g.get_mut(1, 0) = Complex64::new(k as f64, -(k as f64));
            CirSample { t: t0 + (k as f64 + j) * step, gains: g }
        }).collect();
        let stream = CirStream::new(samples).unwrap();
        let grid = slotted_resample(&stream, step, n).unwrap();
        prop_assert_eq!(grid.filled(), n);
        for k in 0..n {
            prop_assert_eq!(grid.value(k, 1, 0), Complex64::new(k as f64, -(k as f64)));
            let j = if k == 0 { 0.0 } else { jitter[k] };
            prop_assert!((grid.source_offset(k).unwrap() - j * step).abs() < 1e-9);
        }
    }

    #[test]
    fn windows_tile_with_half_overlap(half in 1usize..40, k in 1usize..800) {
        let w = 2 * half;
        let plan = plan_windows(k, w, half).unwrap();
        if k < w {
            prop_assert!(plan.spans.is_empty() && plan.too_short);
        } else {
            prop_assert_eq!(plan.spans.len(), (k - w) / half + 1);
            for pair in plan.spans.windows(2) {
                prop_assert_eq!(pair[1].offset - pair[0].offset, half);
            }
            let last = plan.spans.last().unwrap();
            prop_assert!(last.offset + w <= k && last.offset + w + half > k);
        }
    }

    #[test]
    fn normalized_columns_span_unit_interval(v in proptest::collection::vec(0.0f64..1e6, 2..70)) {
        let mut c = v.clone();
        normalize_column(&mut c);
        prop_assert!(c.iter().all(|x| (0.0..=1.0).contains(x)));
        let flat = v.iter().all(|&x| x == v[0]);
        if flat {
            prop_assert!(c.iter().all(|&x| x == 0.0));
        } else {
            prop_assert_eq!(c.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
            prop_assert_eq!(c.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
        }
    }

    #[test]
    fn strongest_path_ignores_global_scale(seed in any::<u64>(), scale in 1e-3f64..1e3) {
        let mut r = rng(seed);
        let (paths, beams, slots) = (6, 3, 10);
        let snaps: Vec<Option<GainMatrix>> = (0..slots).map(|_| {
            Some(GainMatrix::from_vec(paths, beams, random_complex(&mut r, paths * beams)).unwrap())
        }).collect();
        let scaled: Vec<Option<GainMatrix>> = snaps.iter().map(|s| s.as_ref().map(|g| {
            GainMatrix::from_vec(paths, beams, g.as_slice().iter().map(|z| z * scale).collect()).unwrap()
        })).collect();
        let a = RegularGrid::from_slots(1.0, snaps).unwrap();
        let b = RegularGrid::from_slots(1.0, scaled).unwrap();
        let all: Vec<usize> = (0..slots).collect();
        let (sa, sb) = (select_strongest_path(&a, &all, None), select_strongest_path(&b, &all, None));
        prop_assert_eq!((sa.path, sa.beam), (sb.path, sb.beam));
    }

    #[test]
    fn aggregated_support_is_bounded(seed in any::<u64>(), q in 1usize..6, omega in 1usize..5, m in 1usize..32) {
        let w = 32;
        let mut r = rng(seed);
        let rows = random_rows(&mut r, w, m);
        let cfg = IhtConfig { sparsity: omega, ..IhtConfig::default() };
        let spectra: Vec<_> = (0..q).map(|_| {
            let mut values = vec![ZERO; w];
            let vals = random_complex(&mut r, m);
            for (&i, v) in rows.iter().zip(vals) {
                values[i] = v;
            }
            let win = CirWindow { index: 0, offset: 0, values, available: rows.clone() };
            let out = iht_recover(&win, &cfg).unwrap();
            assert!(out.spectrum.support.len() <= omega);
            out.spectrum
        }).collect();
        let col = aggregate_md(&spectra).unwrap();
        prop_assert!(col.iter().filter(|&&x| x != 0.0).count() <= q * omega);
        // pre-normalization sums only grow as paths are added
        let mut acc = vec![0.0; w];
        for s in &spectra {
            let before = acc.clone();
            for (a, p) in acc.iter_mut().zip(s.power()) {
                *a += p;
            }
            prop_assert!(acc.iter().zip(&before).all(|(a, b)| a >= b));
        }
    }

    #[test]
    fn golay_pairs_stay_complementary_under_symmetries(p in 1u32..8) {
        let n = 1usize << p;
        let (a, b) = golay_pair(n).unwrap();
        prop_assert!(golay_check(&a, &b));
        prop_assert!(golay_check(&b, &a));
        let neg: Vec<i8> = a.iter().map(|x| -x).collect();
        prop_assert!(golay_check(&neg, &b));
        let rev: Vec<i8> = b.iter().rev().copied().collect();
        prop_assert!(golay_check(&a, &rev));
    }
}

/// Units and injections per half-window, rebuilt from the closed form
/// `inject = max(N_w − packets, 0)`, `units = max(N_w, packets)`.
fn half_window_oracle(occ: &[bool], ms: usize, w: usize) -> Vec<(usize, usize)> {
    let half = w / 2;
    let mut prev = 0;
    occ.chunks(half)
        .map(|h| {
            let p = h.iter().filter(|&&o| o).count();
            let need = ms.saturating_sub(prev).min(half);
            // a trailing partial half only reaches part of the burst
            let reach = need.saturating_sub(half - h.len());
            let inj = reach.saturating_sub(p);
            prev = p + inj;
            (prev, inj)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn injection_matches_closed_form(seed in any::<u64>(), p in 0.0f64..1.0, ms in 0usize..=64, halves in 2usize..30) {
        let w = 64;
        let tl = bernoulli_timeline(p, halves * w / 2 + seed as usize % 7, seed);
        let log = simulate_injection(&tl, ms, w).unwrap();
        let oracle = half_window_oracle(tl.occupied(), ms, w);
        for (h, chunk) in log.actions.chunks(w / 2).enumerate() {
            let units = chunk.iter().filter(|a| a.is_unit()).count();
            let inj = chunk.iter().filter(|&&a| a == SlotAction::Inject).count();
            prop_assert_eq!((units, inj), oracle[h], "half {}", h);
        }
        for (a, &o) in log.actions.iter().zip(tl.occupied()) {
            prop_assert!(!(o && *a == SlotAction::Inject));
            prop_assert_eq!(o, *a == SlotAction::Reuse);
        }
        if ms <= w / 2 {
            prop_assert!(log.windows.iter().all(|x| x.units >= ms));
        }
        for x in &log.windows {
            prop_assert!(x.units >= ms.min(x.observed + w / 2));
        }
    }

    #[test]
    fn run_window_never_looks_ahead(
        seed in any::<u64>(),
        ms in 0usize..=16,
        first in 0usize..16,
        cut in 0usize..8,
    ) {
        let mut r = rng(seed);
        let half: Vec<bool> = (0..8).map(|_| rand::Rng::random_bool(&mut r, 0.4)).collect();
        let mut altered = half.clone();
        for s in altered.iter_mut().skip(cut + 1) {
            *s = rand::Rng::random_bool(&mut r, 0.5);
        }
        let (_, a) = run_window(0, first, &half, ms, 16).unwrap();
        let (_, b) = run_window(0, first, &altered, ms, 16).unwrap();
        prop_assert_eq!(&a[..=cut], &b[..=cut]);
    }

    #[test]
    fn injections_fall_as_traffic_grows(seed in any::<u64>(), ms in 1usize..=32, p in 0.0f64..0.9, dp in 0.0f64..0.1) {
        let slots = 64 * 20;
        let lo = simulate_injection(&bernoulli_timeline(p, slots, seed), ms, 64).unwrap();
        let hi = simulate_injection(&bernoulli_timeline(p + dp, slots, seed), ms, 64).unwrap();
        prop_assert!(hi.injected <= lo.injected);
    }
}

#[test]
fn dense_timeline_never_injects_for_any_requirement() {
    let tl = SlotTimeline::from_occupancy(vec![true; 64 * 8]);
    for ms in 0..=64 {
        assert_eq!(simulate_injection(&tl, ms, 64).unwrap().injected, 0);
    }
}
