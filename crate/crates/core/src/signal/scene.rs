//! Reflector presets used by the CLI and the evaluation tests.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::radio::{doppler_axis, RadioConfig};
use super::synth::{ReflectorTrack, VelocityProfile};
use crate::error::{Error, Result};

/// Knobs of the walking-person preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WalkingParams {
    pub torso_bin: usize,
    pub torso_beam: usize,
    /// Peak torso radial speed [m/s].
    pub torso_amplitude: f64,
    /// Gait period [s].
    pub period_s: f64,
    /// Extra velocity swing of the limbs on top of the torso [m/s].
    pub limb_swing: (f64, f64),
    /// Limb attenuation relative to the torso [dB].
    pub limb_attenuation_db: (f64, f64),
    /// Number of limb reflectors, drawn uniformly from this inclusive range.
    pub limbs: (usize, usize),
    /// Add static clutter reflectors.
    pub clutter: bool,
}

impl Default for WalkingParams {
    fn default() -> Self {
        Self {
            torso_bin: 12,
            torso_beam: 1,
            torso_amplitude: 1.5,
            period_s: 1.0,
            limb_swing: (1.0, 2.5),
            limb_attenuation_db: (10.0, 20.0),
            limbs: (2, 4),
            clutter: true,
        }
    }
}

fn beam_gains(beams: usize, main: usize, amplitude: f64) -> Vec<Complex64> {
    (0..beams)
        .map(|b| {
            let off = (b as f64 - main as f64).abs();
            let db = -6.0 * off;
            Complex64::new(amplitude * 10f64.powf(db / 20.0), 0.0)
        })
        .collect()
}

/// Walking person: a torso with a sinusoidal radial velocity and a few weaker
/// limbs one bin in front or behind it with larger swings.
///
/// Velocities are constant over segments of `window · T_c` and snapped to the
/// Doppler grid of a `window`-sample DFT. The torso is always the first track;
/// static clutter, when enabled, comes last.
pub fn walking_scene(
    radio: &RadioConfig,
    params: &WalkingParams,
    window: usize,
    duration_s: f64,
    seed: u64,
) -> Result<Vec<ReflectorTrack>> {
    let axis = doppler_axis(radio, window)?;
    if params.torso_bin == 0 || params.torso_bin + 1 >= radio.paths {
        return Err(Error::invalid("torso bin needs a free neighbour on each side"));
    }
    if params.torso_beam >= radio.beams {
        return Err(Error::invalid("torso beam outside the beam-pattern range"));
    }
    if params.limbs.0 > params.limbs.1 {
        return Err(Error::invalid("limb count range is inverted"));
    }
    let segment_s = window as f64 * radio.grid_step_s;
    let segments = ((duration_s / segment_s).ceil() as usize).max(1);
    let vlim = axis.max_velocity - 2.0 * axis.velocity_resolution;
    let snap = |v: f64| {
        let v = v.clamp(-vlim, vlim);
        (v / axis.velocity_resolution).round() * axis.velocity_resolution
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let profile = |f: &dyn Fn(f64) -> f64| VelocityProfile {
        segment_s,
        velocities: (0..segments)
            .map(|k| snap(f((k as f64 + 0.5) * segment_s)))
            .collect(),
    };

    let mut tracks = Vec::new();
    let torso_phase = rng.random_range(0.0..2.0 * PI);
    let amp = params.torso_amplitude;
    let period = params.period_s;
    let torso_v = move |t: f64| amp * (2.0 * PI * t / period + torso_phase).sin();
    tracks.push(ReflectorTrack {
        distance_bin: params.torso_bin,
        bp_gain: beam_gains(radio.beams, params.torso_beam, 1.0),
        velocity: profile(&torso_v),
        phase0: rng.random_range(0.0..2.0 * PI),
    });

    let n_limbs = rng.random_range(params.limbs.0..=params.limbs.1);
    for i in 0..n_limbs {
        let bin = if i % 2 == 0 {
            params.torso_bin + 1
        } else {
            params.torso_bin - 1
        };
        let att_db = rng.random_range(params.limb_attenuation_db.0..=params.limb_attenuation_db.1);
        let swing = rng.random_range(params.limb_swing.0..=params.limb_swing.1);
        let lag = rng.random_range(0.0..2.0 * PI);
        let limb_v = move |t: f64| torso_v(t) + swing * (2.0 * PI * t / period + lag).sin();
        tracks.push(ReflectorTrack {
            distance_bin: bin,
            bp_gain: beam_gains(radio.beams, params.torso_beam, 10f64.powf(-att_db / 20.0)),
            velocity: profile(&limb_v),
            phase0: rng.random_range(0.0..2.0 * PI),
        });
    }

    if params.clutter {
        let far = (params.torso_bin + radio.paths / 2) % radio.paths;
        for (bin, a) in [(params.torso_bin, 0.8), (far, 3.0), (1, 2.0)] {
            tracks.push(ReflectorTrack {
                distance_bin: bin,
                bp_gain: (0..radio.beams)
                    .map(|_| Complex64::from_polar(a, rng.random_range(0.0..2.0 * PI)))
                    .collect(),
                velocity: VelocityProfile::constant(0.0),
                phase0: 0.0,
            });
        }
    }
    Ok(tracks)
}

/// A single motionless reflector in `bin`, seen equally by every beam.
pub fn static_scene(radio: &RadioConfig, bin: usize) -> Result<Vec<ReflectorTrack>> {
    if bin >= radio.paths {
        return Err(Error::invalid("static reflector bin outside the CIR"));
    }
    Ok(vec![ReflectorTrack {
        distance_bin: bin,
        bp_gain: vec![Complex64::new(1.0, 0.0); radio.beams],
        velocity: VelocityProfile::constant(0.0),
        phase0: 0.0,
    }])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn walking_scene_shape() {
        let radio = RadioConfig::default();
        let params = WalkingParams::default();
        let tracks = walking_scene(&radio, &params, 64, 1.8, 3).unwrap();
        let axis = doppler_axis(&radio, 64).unwrap();
        let torso = &tracks[0];
        assert_eq!(torso.distance_bin, 12);
        let limbs: Vec<_> = tracks[1..]
            .iter()
            .filter(|t| t.velocity.velocities.len() > 1)
            .collect();
        assert!((2..=4).contains(&limbs.len()));
        for t in tracks.iter() {
            for &v in &t.velocity.velocities {
                assert!(v.abs() < axis.max_velocity);
                let g = v / axis.velocity_resolution;
                assert!((g - g.round()).abs() < 1e-9);
            }
        }
        let torso_peak = torso.velocity.velocities.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(torso_peak > 1.2 && torso_peak <= 1.6, "{torso_peak}");
        for l in limbs {
            let ratio = l.bp_gain[1].norm() / torso.bp_gain[1].norm();
            let db = -20.0 * ratio.log10();
            assert!((10.0..=20.0).contains(&db));
            assert!(l.distance_bin.abs_diff(12) == 1);
        }
    }

    #[test]
    fn walking_scene_is_seeded() {
        let radio = RadioConfig::default();
        let p = WalkingParams::default();
        assert_eq!(
            walking_scene(&radio, &p, 64, 1.0, 5).unwrap(),
            walking_scene(&radio, &p, 64, 1.0, 5).unwrap()
        );
        assert_ne!(
            walking_scene(&radio, &p, 64, 1.0, 5).unwrap(),
            walking_scene(&radio, &p, 64, 1.0, 6).unwrap()
        );
    }
}
