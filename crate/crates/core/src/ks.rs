//! Two-sample Kolmogorov-Smirnov test.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};

/// Returns `(D, p)`: the supremum distance between the two empirical CDFs
/// and the asymptotic p-value with the effective-size correction.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = ks_statistic(a, b);
    Ok((d, ks_p_value(d, a.len(), b.len())))
}

pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a: Vec<f64> = a.to_vec();
    let mut b: Vec<f64> = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] == v {
            i += 1;
        }
        while j < b.len() && b[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    // once one side is exhausted its ECDF is 1 and the gap only shrinks
    d
}

/// `Q(lambda)` with `lambda = (sqrt(ne) + 0.12 + 0.11 / sqrt(ne)) * D`.
pub fn ks_p_value(d: f64, na: usize, nb: usize) -> f64 {
    let ne = (na as f64 * nb as f64) / (na + nb) as f64;
    let sqrt_ne = libm::sqrt(ne);
    kolmogorov_q((sqrt_ne + 0.12 + 0.11 / sqrt_ne) * d)
}

const TERM_CUTOFF: f64 = 1e-10;
const SMALL_LAMBDA: f64 = 1.0;

/// Kolmogorov survival function `2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lambda^2)`.
///
/// Below `SMALL_LAMBDA` the alternating series needs O(1/lambda) terms, so the
/// identical theta-transformed form
/// `1 - sqrt(2 pi)/lambda sum_{k>=1} exp(-(2k-1)^2 pi^2 / (8 lambda^2))` is
/// summed instead.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let q = if lambda < SMALL_LAMBDA {
        1.0 - kolmogorov_cdf_small(lambda)
    } else {
        kolmogorov_q_series(lambda)
    };
    q.clamp(0.0, 1.0)
}

pub(crate) fn kolmogorov_q_series(lambda: f64) -> f64 {
    let mut sum = 0.0;
    let mut sign = 1.0;
    let mut k = 1.0_f64;
    loop {
        let term = libm::exp(-2.0 * k * k * lambda * lambda);
        sum += sign * term;
        if term < TERM_CUTOFF {
            break;
        }
        sign = -sign;
        k += 1.0;
    }
    2.0 * sum
}

pub(crate) fn kolmogorov_cdf_small(lambda: f64) -> f64 {
    let mut sum = 0.0;
    let mut k = 1.0_f64;
    let c = PI * PI / (8.0 * lambda * lambda);
    loop {
        let odd = 2.0 * k - 1.0;
        let term = libm::exp(-odd * odd * c);
        sum += term;
        if term < TERM_CUTOFF * 1e-6 || k > 1e4 {
            break;
        }
        k += 1.0;
    }
    libm::sqrt(2.0 * PI) / lambda * sum
}
