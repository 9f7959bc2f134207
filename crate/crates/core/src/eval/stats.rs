use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Compensated (Neumaier) summation.
pub fn neumaier_sum(xs: &[f64]) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub(crate) fn mean_and_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = neumaier_sum(xs) / n;
    let dev: alloc::vec::Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    (mean, libm::sqrt(neumaier_sum(&dev) / (n - 1.0)))
}

/// Standard error of the mean (sample sd over root k) and the 2-SEM bar.
pub fn sem_errorbar(fold_mses: &[f64]) -> Result<(f64, f64)> {
    if fold_mses.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            have: fold_mses.len(),
        });
    }
    let (_, sd) = mean_and_sd(fold_mses);
    let sem = sd / libm::sqrt(fold_mses.len() as f64);
    Ok((sem, 2.0 * sem))
}

/// Whether two `mean ± bar` intervals overlap.
pub fn intervals_overlap(mean_a: f64, bar_a: f64, mean_b: f64, bar_b: f64) -> bool {
    (mean_a - mean_b).abs() < bar_a + bar_b
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasReduction {
    pub mse_regional: f64,
    pub mse_mixed: f64,
    pub delta_percent: f64,
}

/// Relative MSE reduction of the mixed model in percent. Negative when
/// mixing is worse.
pub fn delta_bias(mse_regional: f64, mse_mixed: f64) -> Result<BiasReduction> {
    if !(mse_regional > 0.0 && mse_regional.is_finite()) {
        return Err(Error::invalid("mse_regional", "must be positive and finite"));
    }
    if !mse_mixed.is_finite() {
        return Err(Error::invalid("mse_mixed", "must be finite"));
    }
    Ok(BiasReduction {
        mse_regional,
        mse_mixed,
        delta_percent: (mse_regional - mse_mixed) / mse_regional * 100.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: usize,
}

/// Two-sided paired t-test on `a - b`.
///
/// Differences with zero spread give `p = 1` when their mean is zero and
/// `p = 0` otherwise.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, have: a.len() });
    }
    let d: alloc::vec::Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let df = d.len() - 1;
    let (mean, sd) = mean_and_sd(&d);
    // Identical differences are zero spread even when the rounded mean is
    // not exactly one of them.
    if sd == 0.0 || d.iter().all(|&x| x == d[0]) {
        let mean = d[0];
        return Ok(if mean == 0.0 {
            TTest { t: 0.0, p: 1.0, df }
        } else {
            TTest {
                t: f64::INFINITY.copysign(mean),
                p: 0.0,
                df,
            }
        });
    }
    let t = mean / (sd / libm::sqrt(d.len() as f64));
    Ok(TTest {
        t,
        p: student_t_two_sided(t, df as f64),
        df,
    })
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    incomplete_beta(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b) + a * libm::log(x) + b * libm::log1p(-x);
    let front = libm::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_fraction(b, a, 1.0 - x) / b
    }
}

/// Continued fraction for the incomplete beta, evaluated with the modified
/// Lentz method.
fn beta_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=300 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let step = d * c;
        h *= step;
        if (step - 1.0).abs() < EPS {
            break;
        }
    }
    h
}
