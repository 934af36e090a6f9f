//! Per-path Doppler spectrum recovery from incomplete CIR windows.
//!
//! A complete window `h̃ ∈ C^W` relates to its unitary spectrum `H` by
//! `h̃ = F_inv H` with `(F_inv)_{gl} = exp(j2πgl/W)/√W`. Only the rows in
//! `U_m` are observed, so `h = Ψ H` with `Ψ = U_m F_inv`. [`iht_recover`]
//! looks for an `Ω`-sparse `H` matching those rows.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::resample::CirWindow;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IhtConfig {
    /// Maximum number of nonzero Doppler bins kept per path (`Ω`).
    pub sparsity: usize,
    /// Gradient step (`η`).
    pub step: f64,
    /// Stop once the iterate moves less than this in Euclidean norm (`ξ`).
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for IhtConfig {
    fn default() -> Self {
        Self {
            sparsity: 3,
            step: 1.0,
            tolerance: 1e-4,
            max_iter: 200,
        }
    }
}

impl IhtConfig {
    pub fn validate(&self, window: usize) -> Result<()> {
        if self.sparsity == 0 || self.sparsity > window {
            return Err(Error::invalid(format!(
                "sparsity {} outside [1, {window}]",
                self.sparsity
            )));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::invalid("IHT step must be positive"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("IHT tolerance must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("IHT needs at least one iteration"));
        }
        Ok(())
    }
}

/// FFT plans for one window length. Cheap to clone and shareable across threads.
#[derive(Clone)]
pub struct DftPlan {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl std::fmt::Debug for DftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DftPlan").field("size", &self.size).finish()
    }
}

impl DftPlan {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::invalid("DFT size must be positive"));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
            scale: 1.0 / (size as f64).sqrt(),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// In-place unitary forward DFT, `X_g = Σ x_i exp(-j2πgi/W)/√W`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
        buf.iter_mut().for_each(|z| *z *= self.scale);
    }

    /// In-place unitary inverse DFT (multiplication by `F_inv`).
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
        buf.iter_mut().for_each(|z| *z *= self.scale);
    }
}

/// Rows `U_m` of the unitary inverse DFT, applied through FFTs.
#[derive(Debug, Clone)]
pub struct PartialIdft {
    plan: DftPlan,
    rows: Vec<usize>,
}

impl PartialIdft {
    pub fn new(size: usize, rows: Vec<usize>) -> Result<Self> {
        Self::with_plan(DftPlan::new(size)?, rows)
    }

    pub fn with_plan(plan: DftPlan, rows: Vec<usize>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("partial DFT needs at least one row"));
        }
        if rows.windows(2).any(|w| w[1] <= w[0]) || *rows.last().unwrap() >= plan.size {
            return Err(Error::invalid("rows must be strictly increasing and below the DFT size"));
        }
        Ok(Self { plan, rows })
    }

    pub fn size(&self) -> usize {
        self.plan.size
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    /// `Ψ H`: the selected rows of `F_inv H`.
    pub fn apply(&self, spectrum: &[Complex64]) -> Result<Vec<Complex64>> {
        if spectrum.len() != self.size() {
            return Err(Error::DimensionMismatch {
                expected: self.size(),
                actual: spectrum.len(),
            });
        }
        let mut buf = spectrum.to_vec();
        let mut out = vec![ZERO; self.rows.len()];
        self.apply_into(&mut buf, &mut out);
        Ok(out)
    }

    /// `Ψᴴ y`: scatter `y` onto the selected rows, then apply the forward DFT.
    pub fn adjoint(&self, measurements: &[Complex64]) -> Result<Vec<Complex64>> {
        if measurements.len() != self.rows.len() {
            return Err(Error::DimensionMismatch {
                expected: self.rows.len(),
                actual: measurements.len(),
            });
        }
        let mut out = vec![ZERO; self.size()];
        self.adjoint_into(measurements, &mut out);
        Ok(out)
    }

    /// `buf` holds `H` on entry and is clobbered.
    fn apply_into(&self, buf: &mut [Complex64], out: &mut [Complex64]) {
        self.plan.inverse(buf);
        for (o, &r) in out.iter_mut().zip(&self.rows) {
            *o = buf[r];
        }
    }

    fn adjoint_into(&self, y: &[Complex64], out: &mut [Complex64]) {
        out.fill(ZERO);
        for (&v, &r) in y.iter().zip(&self.rows) {
            out[r] = v;
        }
        self.plan.forward(out);
    }
}

/// Length-`W` spectrum with at most `Ω` nonzero bins, natural DFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSpectrum {
    pub coeffs: Vec<Complex64>,
    /// Sorted indices of the nonzero bins.
    pub support: Vec<usize>,
}

impl SparseSpectrum {
    fn from_coeffs(coeffs: Vec<Complex64>) -> Self {
        let support = coeffs
            .iter()
            .enumerate()
            .filter(|(_, z)| z.re != 0.0 || z.im != 0.0)
            .map(|(i, _)| i)
            .collect();
        Self { coeffs, support }
    }

    pub fn power(&self) -> Vec<f64> {
        self.coeffs.iter().map(|z| z.norm_sqr()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IhtOutcome {
    pub spectrum: SparseSpectrum,
    pub iterations: usize,
    pub converged: bool,
}

/// Keep the `keep` largest-magnitude entries of `v`, lower index first on
/// ties, and zero the rest.
pub fn hard_threshold(v: &mut [Complex64], keep: usize) {
    if keep >= v.len() {
        return;
    }
    let mut order: Vec<usize> = (0..v.len()).collect();
    let mags: Vec<f64> = v.iter().map(|z| z.norm_sqr()).collect();
    order.sort_by(|&a, &b| mags[b].total_cmp(&mags[a]).then(a.cmp(&b)));
    for &i in &order[keep..] {
        v[i] = ZERO;
    }
}

fn distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Iterative hard thresholding for one path.
///
/// Starting from zero, repeats
/// `H ← T_Ω[H + η Ψᴴ(h − Ψ H)]` until the update is shorter than `ξ` or
/// `max_iter` iterations ran, and returns the last iterate.
pub fn iht_recover_with(plan: &DftPlan, window: &CirWindow, cfg: &IhtConfig) -> Result<IhtOutcome> {
    let w = window.len();
    if plan.size() != w {
        return Err(Error::DimensionMismatch {
            expected: plan.size(),
            actual: w,
        });
    }
    cfg.validate(w)?;
    if window.available.is_empty() {
        return Err(Error::EmptyWindow {
            window: window.index,
        });
    }
    let op = PartialIdft::with_plan(plan.clone(), window.available.clone())?;
    let h = window.measurements();

    let mut estimate = vec![ZERO; w];
    let mut next = vec![ZERO; w];
    let mut scratch = vec![ZERO; w];
    let mut residual = vec![ZERO; h.len()];
    let mut iterations = 0;
    let mut converged = false;
    let mut last_residual = f64::INFINITY;

    while iterations < cfg.max_iter {
        scratch.copy_from_slice(&estimate);
        op.apply_into(&mut scratch, &mut residual);
        for (r, &m) in residual.iter_mut().zip(&h) {
            *r = m - *r;
        }
        let rnorm = residual.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if rnorm > last_residual * (1.0 + 1e-12) {
            log::trace!(
                "window {}: residual rose {last_residual:.3e} -> {rnorm:.3e} at iteration {iterations}",
                window.index
            );
        }
        last_residual = rnorm;

        op.adjoint_into(&residual, &mut next);
        for (n, &e) in next.iter_mut().zip(&estimate) {
            *n = e + *n * cfg.step;
        }
        hard_threshold(&mut next, cfg.sparsity);
        let gamma = distance(&next, &estimate);
        std::mem::swap(&mut estimate, &mut next);
        iterations += 1;
        if gamma < cfg.tolerance {
            converged = true;
            break;
        }
    }

    let spectrum = SparseSpectrum::from_coeffs(estimate);
    assert!(
        spectrum.support.len() <= cfg.sparsity,
        "IHT produced {} nonzeros with sparsity {}",
        spectrum.support.len(),
        cfg.sparsity
    );
    Ok(IhtOutcome {
        spectrum,
        iterations,
        converged,
    })
}

pub fn iht_recover(window: &CirWindow, cfg: &IhtConfig) -> Result<IhtOutcome> {
    iht_recover_with(&DftPlan::new(window.len())?, window, cfg)
}

/// Zero-filled periodogram: `|unitary DFT|²` of the window values.
pub fn stft_baseline_with(plan: &DftPlan, window: &CirWindow) -> Result<Vec<f64>> {
    if plan.size() != window.len() {
        return Err(Error::DimensionMismatch {
            expected: plan.size(),
            actual: window.len(),
        });
    }
    let mut buf = window.values.clone();
    plan.forward(&mut buf);
    Ok(buf.iter().map(|z| z.norm_sqr()).collect())
}

pub fn stft_baseline(window: &CirWindow) -> Result<Vec<f64>> {
    stft_baseline_with(&DftPlan::new(window.len())?, window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(w: usize, bin: usize, amp: Complex64) -> Vec<Complex64> {
        (0..w)
            .map(|i| amp * Complex64::from_polar(1.0, 2.0 * PI * (bin * i) as f64 / w as f64) / (w as f64).sqrt())
            .collect()
    }

    fn window(values: Vec<Complex64>, available: Vec<usize>) -> CirWindow {
        let mut v = vec![ZERO; values.len()];
        for &i in &available {
            v[i] = values[i];
        }
        CirWindow {
            index: 0,
            offset: 0,
            values: v,
            available,
        }
    }

    #[test]
    fn full_rows_are_unitary() {
        let op = PartialIdft::new(8, (0..8).collect()).unwrap();
        let x: Vec<Complex64> = (0..8).map(|i| Complex64::new(i as f64, 1.0 - i as f64)).collect();
        let back = op.adjoint(&op.apply(&x).unwrap()).unwrap();
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn delta_maps_to_column() {
        let w = 16;
        let rows = vec![1, 4, 9];
        let op = PartialIdft::new(w, rows.clone()).unwrap();
        let mut h = vec![ZERO; w];
        h[3] = Complex64::new(1.0, 0.0);
        let y = op.apply(&h).unwrap();
        for (v, &i) in y.iter().zip(&rows) {
            let expect = Complex64::from_polar(1.0, 2.0 * PI * (3 * i) as f64 / w as f64) / 4.0;
            assert!((v - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn operator_rejects_bad_shapes() {
        assert!(PartialIdft::new(8, vec![]).is_err());
        assert!(PartialIdft::new(8, vec![3, 2]).is_err());
        assert!(PartialIdft::new(8, vec![8]).is_err());
        let op = PartialIdft::new(8, vec![0, 1]).unwrap();
        assert!(op.apply(&[ZERO; 7]).is_err());
        assert!(op.adjoint(&[ZERO; 3]).is_err());
    }

    #[test]
    fn threshold_ties_keep_lower_index() {
        let one = Complex64::new(1.0, 0.0);
        let mut v = vec![one, Complex64::new(0.0, 1.0), one * 2.0, -one];
        hard_threshold(&mut v, 2);
        assert_eq!(v, vec![one, ZERO, one * 2.0, ZERO]);
    }

    #[test]
    fn full_window_single_tone() {
        let amp = Complex64::new(0.7, -0.4);
        let w = window(tone(32, 5, amp), (0..32).collect());
        let out = iht_recover(&w, &IhtConfig { sparsity: 1, ..Default::default() }).unwrap();
        assert!(out.converged);
        assert_eq!(out.spectrum.support, vec![5]);
        assert!((out.spectrum.coeffs[5] - amp).norm() < 1e-4);
        let p = stft_baseline(&w).unwrap();
        let peak = (0..32).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        assert_eq!(peak, 5);
    }

    #[test]
    fn empty_window_is_an_error() {
        let w = window(vec![ZERO; 16], vec![]);
        assert!(matches!(
            iht_recover(&w, &IhtConfig::default()),
            Err(Error::EmptyWindow { window: 0 })
        ));
        assert!(stft_baseline(&w).unwrap().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn config_validation() {
        let bad = [
            IhtConfig { sparsity: 0, ..Default::default() },
            IhtConfig { sparsity: 65, ..Default::default() },
            IhtConfig { step: 0.0, ..Default::default() },
            IhtConfig { tolerance: 0.0, ..Default::default() },
            IhtConfig { max_iter: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate(64).is_err(), "{c:?}");
        }
        assert!(IhtConfig::default().validate(64).is_ok());
    }

    #[test]
    fn true_sparse_spectrum_is_fixed_point() {
        let w = 16;
        let mut truth = vec![ZERO; w];
        truth[2] = Complex64::new(1.0, 0.5);
        truth[11] = Complex64::new(-0.3, 0.8);
        let rows = vec![0, 3, 5, 6, 10, 13];
        let op = PartialIdft::new(w, rows.clone()).unwrap();
        let h = op.apply(&truth).unwrap();
        let resid: Vec<Complex64> = h.iter().zip(op.apply(&truth).unwrap()).map(|(a, b)| a - b).collect();
        let mut next: Vec<Complex64> = op
            .adjoint(&resid)
            .unwrap()
            .iter()
            .zip(&truth)
            .map(|(g, t)| t + g)
            .collect();
        hard_threshold(&mut next, 2);
        assert_eq!(next, truth);
    }
}
