//! Independent oracles shared by the integration tests. Nothing here calls
//! into the FFT-based operator or the IHT loop.

#![allow(dead_code)]

use mdrecon::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Explicit `Ψ = U F_inv` as a dense row-major matrix.
pub fn explicit_psi(w: usize, rows: &[usize]) -> Vec<Vec<Complex64>> {
    rows.iter()
        .map(|&g| {
            (0..w)
                .map(|l| Complex64::from_polar(1.0 / (w as f64).sqrt(), 2.0 * PI * (g * l) as f64 / w as f64))
                .collect()
        })
        .collect()
}

pub fn matvec(m: &[Vec<Complex64>], x: &[Complex64]) -> Vec<Complex64> {
    m.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn adjoint_matvec(m: &[Vec<Complex64>], y: &[Complex64]) -> Vec<Complex64> {
    let cols = m[0].len();
    (0..cols)
        .map(|c| m.iter().zip(y).map(|(row, v)| row[c].conj() * v).sum())
        .collect()
}

pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

pub fn random_complex(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

pub fn random_rows(rng: &mut ChaCha8Rng, w: usize, count: usize) -> Vec<usize> {
    let mut rows = sample(rng, w, count).into_vec();
    rows.sort_unstable();
    rows
}

/// Solve the square complex system `a x = b` by Gaussian elimination with
/// partial pivoting. Returns `None` when singular.
pub fn solve(mut a: Vec<Vec<Complex64>>, mut b: Vec<Complex64>) -> Option<Vec<Complex64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))?;
        if a[piv][col].norm() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                let v = a[col][c];
                a[r][c] -= f * v;
            }
            let v = b[col];
            b[r] -= f * v;
        }
    }
    let mut x = vec![ZERO; n];
    for r in (0..n).rev() {
        let s: Complex64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Least squares restricted to `support` via the normal equations.
/// Returns `(coefficients, residual norm)`.
pub fn ls_on_support(psi: &[Vec<Complex64>], h: &[Complex64], support: &[usize]) -> Option<(Vec<Complex64>, f64)> {
    let k = support.len();
    let gram: Vec<Vec<Complex64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| psi.iter().map(|row| row[support[i]].conj() * row[support[j]]).sum())
                .collect()
        })
        .collect();
    let rhs: Vec<Complex64> = (0..k)
        .map(|i| psi.iter().zip(h).map(|(row, v)| row[support[i]].conj() * v).sum())
        .collect();
    let x = solve(gram, rhs)?;
    let resid: f64 = psi
        .iter()
        .zip(h)
        .map(|(row, v)| {
            let fit: Complex64 = support.iter().zip(&x).map(|(&s, c)| row[s] * c).sum();
            (v - fit).norm_sqr()
        })
        .sum::<f64>()
        .sqrt();
    Some((x, resid))
}

/// Best 2-sparse fit over all `C(W, 2)` supports.
pub fn exhaustive_pair_support(psi: &[Vec<Complex64>], h: &[Complex64]) -> (Vec<usize>, Vec<Complex64>, f64) {
    let w = psi[0].len();
    let mut best: Option<(Vec<usize>, Vec<Complex64>, f64)> = None;
    for a in 0..w {
        for b in a + 1..w {
            if let Some((x, r)) = ls_on_support(psi, h, &[a, b]) {
                if best.as_ref().is_none_or(|(_, _, br)| r < *br - 1e-12) {
                    best = Some((vec![a, b], x, r));
                }
            }
        }
    }
    best.expect("at least one solvable support")
}

/// Spectrum with `k` unit-magnitude random-phase tones on distinct random bins.
pub fn random_sparse_spectrum(rng: &mut ChaCha8Rng, w: usize, k: usize) -> Vec<Complex64> {
    let mut h = vec![ZERO; w];
    for bin in sample(rng, w, k).into_vec() {
        h[bin] = Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI));
    }
    h
}
