//! Thin wrappers over `libm` so the crate builds without `std`, plus the
//! handful of stable primitives (log-sum-exp, normal tails) used everywhere.

pub use libm::{erfc, exp, expm1, fabs as abs, log as ln, log1p, pow, sqrt};

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `log Σ exp(v)`; `-inf` for an empty slice or all `-inf` inputs.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        if v > max {
            max = v;
        }
    }
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    let mut acc = 0.0;
    for &v in values {
        acc += exp(v - max);
    }
    max + ln(acc)
}

/// Upper tail `P(Z > z)` of the standard normal.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / core::f64::consts::SQRT_2)
}

/// `log log n` with the natural logarithm.
pub fn ln_ln(n: f64) -> f64 {
    ln(ln(n))
}

pub fn norm(v: &[f64]) -> f64 {
    sqrt(v.iter().map(|x| x * x).sum())
}

/// Number of intervals of width at most `step` covering `length` (≥ 1).
pub fn ceil_div_f64(length: f64, step: f64) -> usize {
    let m = libm::ceil(length / step - 1e-9);
    if m < 1.0 {
        1
    } else {
        m as usize
    }
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
