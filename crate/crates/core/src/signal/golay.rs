use crate::error::{Error, Result};

/// Complementary Golay pair of length `n` by recursive doubling:
/// `(a, b) -> (a|b, a|-b)` starting from `([1], [1])`.
pub fn golay_pair(n: usize) -> Result<(Vec<i8>, Vec<i8>)> {
    if !(2..=1024).contains(&n) || !n.is_power_of_two() {
        return Err(Error::invalid(format!(
            "Golay length {n} is not a power of two in [2, 1024]"
        )));
    }
    let mut a = vec![1i8];
    let mut b = vec![1i8];
    while a.len() < n {
        let mut na = a.clone();
        na.extend_from_slice(&b);
        let mut nb = a;
        nb.extend(b.iter().map(|x| -x));
        a = na;
        b = nb;
    }
    Ok((a, b))
}

/// Aperiodic autocorrelation of `a` plus that of `b`, lags `0..n`.
pub fn summed_autocorrelation(a: &[i8], b: &[i8]) -> Vec<i64> {
    let n = a.len().max(b.len());
    let acf = |s: &[i8], k: usize| -> i64 {
        s.iter()
            .zip(s.iter().skip(k))
            .map(|(&x, &y)| x as i64 * y as i64)
            .sum()
    };
    (0..n).map(|k| acf(a, k) + acf(b, k)).collect()
}

/// True when `a` and `b` are ±1 sequences of equal length whose summed
/// autocorrelation is `2n` at lag zero and zero elsewhere.
pub fn golay_check(a: &[i8], b: &[i8]) -> bool {
    if a.is_empty() || a.len() != b.len() {
        return false;
    }
    if a.iter().chain(b).any(|&x| x != 1 && x != -1) {
        return false;
    }
    let n = a.len() as i64;
    summed_autocorrelation(a, b)
        .iter()
        .enumerate()
        .all(|(k, &r)| if k == 0 { r == 2 * n } else { r == 0 })
}
