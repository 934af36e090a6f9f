use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Propagation speed used throughout [m/s].
pub const SPEED_OF_LIGHT: f64 = 2.9979e8;

/// Carrier, bandwidth and CIR layout of the sensing radio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    /// Carrier frequency [Hz].
    pub carrier_hz: f64,
    /// Signal bandwidth [Hz].
    pub bandwidth_hz: f64,
    /// Grid step of the resampled CIR sequence [s].
    pub grid_step_s: f64,
    /// Number of distance bins in a CIR snapshot.
    pub paths: usize,
    /// Number of beam patterns per snapshot.
    pub beams: usize,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            carrier_hz: 60.48e9,
            bandwidth_hz: 1.76e9,
            grid_step_s: 0.27e-3,
            paths: 32,
            beams: 4,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.carrier_hz) {
            return Err(Error::invalid("carrier frequency must be positive"));
        }
        if !positive(self.bandwidth_hz) {
            return Err(Error::invalid("bandwidth must be positive"));
        }
        if !positive(self.grid_step_s) {
            return Err(Error::invalid("grid step must be positive"));
        }
        if self.paths == 0 || self.beams == 0 {
            return Err(Error::invalid("need at least one path and one beam pattern"));
        }
        Ok(())
    }

    /// Range resolution `c / 2B` [m].
    pub fn range_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth_hz)
    }

    /// Radians of phase per metre of two-way path change, `4π f_o / c`.
    pub fn phase_per_metre(&self) -> f64 {
        4.0 * std::f64::consts::PI * self.carrier_hz / SPEED_OF_LIGHT
    }
}

/// Velocity and Doppler resolution of a `W`-sample window on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DopplerAxis {
    pub velocity_resolution: f64,
    pub max_velocity: f64,
    pub frequency_resolution: f64,
    pub max_frequency: f64,
    pub window: usize,
}

pub fn doppler_axis(radio: &RadioConfig, window: usize) -> Result<DopplerAxis> {
    if window < 2 {
        return Err(Error::invalid(format!("window length {window} < 2")));
    }
    radio.validate()?;
    let c = SPEED_OF_LIGHT;
    let fo = radio.carrier_hz;
    let tc = radio.grid_step_s;
    let w = window as f64;
    Ok(DopplerAxis {
        velocity_resolution: c / (2.0 * fo * w * tc),
        max_velocity: c / (4.0 * fo * tc),
        frequency_resolution: 1.0 / (w * tc),
        max_frequency: 1.0 / (2.0 * tc),
        window,
    })
}

impl DopplerAxis {
    /// Radial velocity represented by natural-order DFT bin `g`.
    ///
    /// A reflector receding at `v` rotates the CIR phase by `-4π f_o v T_c / c`
    /// per slot, which lands on bin `-v / Δv (mod W)`.
    pub fn bin_velocity(&self, bin: usize) -> f64 {
        let w = self.window as isize;
        let mut g = bin as isize % w;
        if g >= w / 2 {
            g -= w;
        }
        -(g as f64) * self.velocity_resolution
    }

    /// Natural-order DFT bin nearest to velocity `v`.
    pub fn velocity_bin(&self, v: f64) -> usize {
        let w = self.window as isize;
        let g = (-v / self.velocity_resolution).round() as isize;
        g.rem_euclid(w) as usize
    }

    /// Natural-order bin indices sorted by ascending velocity.
    pub fn ascending_bins(&self) -> Vec<usize> {
        let mut bins: Vec<usize> = (0..self.window).collect();
        bins.sort_by(|&a, &b| self.bin_velocity(a).total_cmp(&self.bin_velocity(b)));
        bins
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn radio(fo: f64, tc: f64) -> RadioConfig {
        RadioConfig {
            carrier_hz: fo,
            grid_step_s: tc,
            ..RadioConfig::default()
        }
    }

    #[test]
    fn resolution_at_62ghz() {
        let ax = doppler_axis(&radio(62e9, 0.27e-3), 64).unwrap();
        assert!((ax.velocity_resolution - 0.14).abs() < 0.005);
        assert!((ax.max_velocity - 4.48).abs() < 0.01);
        assert_relative_eq!(ax.frequency_resolution, 1.0 / (64.0 * 0.27e-3));
        assert_relative_eq!(ax.max_frequency, 1.0 / (2.0 * 0.27e-3));
    }

    #[test]
    fn nr_28ghz_max_velocity() {
        let ax = doppler_axis(&radio(28e9, 0.3125e-3), 64).unwrap();
        assert!((ax.max_velocity - 8.57).abs() / 8.57 < 0.01);
    }

    #[test]
    fn doubling_window_halves_resolution() {
        let r = radio(60e9, 0.27e-3);
        let a = doppler_axis(&r, 64).unwrap();
        let b = doppler_axis(&r, 128).unwrap();
        assert_relative_eq!(b.velocity_resolution, a.velocity_resolution / 2.0);
        assert_eq!(a.max_velocity, b.max_velocity);
        assert_relative_eq!(a.velocity_resolution * 64.0, 2.0 * a.max_velocity);
    }

    #[test]
    fn rejects_short_window() {
        assert!(doppler_axis(&RadioConfig::default(), 1).is_err());
    }

    #[test]
    fn bin_velocity_roundtrip() {
        let ax = doppler_axis(&RadioConfig::default(), 64).unwrap();
        for bin in 0..64 {
            assert_eq!(ax.velocity_bin(ax.bin_velocity(bin)), bin);
        }
        let asc = ax.ascending_bins();
        assert_eq!(asc.len(), 64);
        assert_relative_eq!(ax.bin_velocity(*asc.last().unwrap()), ax.max_velocity);
        assert!(ax.bin_velocity(asc[0]) > -ax.max_velocity);
    }

    #[test]
    fn range_resolution_176ghz() {
        let r = RadioConfig::default();
        assert!((r.range_resolution() - 0.085).abs() < 0.001);
        // Nine aggregated bins reach four bins to each side of the torso.
        assert!((4.0 * r.range_resolution() - 0.34).abs() < 0.005);
    }
}
