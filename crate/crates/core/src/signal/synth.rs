use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::radio::RadioConfig;
use crate::error::{Error, Result};

/// Piecewise-constant radial velocity [m/s]; segment `k` covers
/// `[k·segment_s, (k+1)·segment_s)`. The last value holds afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityProfile {
    pub segment_s: f64,
    pub velocities: Vec<f64>,
}

impl VelocityProfile {
    pub fn constant(v: f64) -> Self {
        Self {
            segment_s: f64::INFINITY,
            velocities: vec![v],
        }
    }

    pub fn velocity_at(&self, t: f64) -> f64 {
        if self.velocities.is_empty() {
            return 0.0;
        }
        if t < 0.0 || !self.segment_s.is_finite() {
            return self.velocities[0];
        }
        let k = (t / self.segment_s).floor() as usize;
        self.velocities[k.min(self.velocities.len() - 1)]
    }

    /// Radial displacement `∫_0^t v(x) dx` [m].
    pub fn displacement(&self, t: f64) -> f64 {
        let Some(&first) = self.velocities.first() else {
            return 0.0;
        };
        if t <= 0.0 || !self.segment_s.is_finite() {
            return first * t;
        }
        let seg = self.segment_s;
        let full = (t / seg).floor() as usize;
        let last = self.velocities.len() - 1;
        let mut x = 0.0;
        for &v in &self.velocities[..full.min(last)] {
            x += v * seg;
        }
        let start = full.min(last) as f64 * seg;
        x + self.velocities[full.min(last)] * (t - start)
    }
}

/// One point reflector pinned to a distance bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectorTrack {
    pub distance_bin: usize,
    /// Complex amplitude seen through each beam pattern.
    pub bp_gain: Vec<Complex64>,
    pub velocity: VelocityProfile,
    /// Initial phase [rad].
    pub phase0: f64,
}

/// `paths × beams` complex CIR gains, path-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix {
    paths: usize,
    beams: usize,
    data: Vec<Complex64>,
}

impl GainMatrix {
    pub fn zeros(paths: usize, beams: usize) -> Self {
        Self {
            paths,
            beams,
            data: vec![Complex64::new(0.0, 0.0); paths * beams],
        }
    }

    pub fn from_vec(paths: usize, beams: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != paths * beams {
            return Err(Error::DimensionMismatch {
                expected: paths * beams,
                actual: data.len(),
            });
        }
        Ok(Self { paths, beams, data })
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn beams(&self) -> usize {
        self.beams
    }

    pub fn get(&self, path: usize, beam: usize) -> Complex64 {
        self.data[path * self.beams + beam]
    }

    pub fn get_mut(&mut self, path: usize, beam: usize) -> &mut Complex64 {
        &mut self.data[path * self.beams + beam]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CirSample {
    pub t: f64,
    pub gains: GainMatrix,
}

/// Irregularly timed CIR snapshots with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CirStream {
    samples: Vec<CirSample>,
}

impl CirStream {
    pub fn new(samples: Vec<CirSample>) -> Result<Self> {
        if let Some(first) = samples.first() {
            let (p, b) = (first.gains.paths(), first.gains.beams());
            for s in &samples {
                if s.gains.paths() != p || s.gains.beams() != b {
                    return Err(Error::invalid("CIR snapshot dimensions differ across samples"));
                }
                if !s.t.is_finite() {
                    return Err(Error::invalid("non-finite sample time"));
                }
            }
        }
        if samples.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::invalid("sample times must be strictly increasing"));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[CirSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `(paths, beams)` of the snapshots, if any.
    pub fn dims(&self) -> Option<(usize, usize)> {
        self.samples
            .first()
            .map(|s| (s.gains.paths(), s.gains.beams()))
    }
}

/// Synthesize CIR snapshots at `sample_times` from point reflectors.
///
/// Each cell `(ℓ, b)` sums `a_b · exp(-j(4π f_o / c)(d_ℓ + ∫v) + jφ0)` over the
/// tracks in bin `ℓ`, plus circular complex Gaussian noise whose total standard
/// deviation is `noise_std`.
pub fn synth_cir(
    radio: &RadioConfig,
    tracks: &[ReflectorTrack],
    sample_times: &[f64],
    noise_std: f64,
    seed: u64,
) -> Result<CirStream> {
    radio.validate()?;
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::invalid("noise_std must be a finite non-negative number"));
    }
    if tracks.is_empty() && noise_std == 0.0 {
        return Err(Error::invalid("no tracks and no noise: nothing to synthesize"));
    }
    if sample_times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("sample times must be strictly increasing"));
    }
    for (i, tr) in tracks.iter().enumerate() {
        if tr.distance_bin >= radio.paths {
            return Err(Error::invalid(format!(
                "track {i}: distance bin {} outside [0, {})",
                tr.distance_bin, radio.paths
            )));
        }
        if tr.bp_gain.len() != radio.beams {
            return Err(Error::DimensionMismatch {
                expected: radio.beams,
                actual: tr.bp_gain.len(),
            });
        }
        if tr.bp_gain.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::invalid(format!("track {i}: non-finite beam gain")));
        }
    }

    let k = radio.phase_per_metre();
    let dd = radio.range_resolution();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise_std / std::f64::consts::SQRT_2)
        .map_err(|e| Error::invalid(e.to_string()))?;

    let mut samples = Vec::with_capacity(sample_times.len());
    for &t in sample_times {
        let mut gains = GainMatrix::zeros(radio.paths, radio.beams);
        for tr in tracks {
            let d = tr.distance_bin as f64 * dd;
            let phase = tr.phase0 - k * (d + tr.velocity.displacement(t));
            let rot = Complex64::from_polar(1.0, phase);
            for (b, a) in tr.bp_gain.iter().enumerate() {
                *gains.get_mut(tr.distance_bin, b) += a * rot;
            }
        }
        if noise_std > 0.0 {
            for z in gains.as_mut_slice() {
                *z += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
            }
        }
        samples.push(CirSample { t, gains });
    }
    CirStream::new(samples)
}
