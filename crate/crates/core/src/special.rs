//! Real dilogarithm `dilog(x) = -∫₀ˣ ln|1 - y| / y dy`.
//!
//! For x ≤ 1 this is the usual Li₂; for x > 1 it is the real part of Li₂.

use std::f64::consts::PI;

const PI2_6: f64 = PI * PI / 6.0;
const PI2_3: f64 = PI * PI / 3.0;

pub fn dilog(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == 1.0 {
        return PI2_6;
    }
    if x > 1.0 {
        let l = x.ln();
        return PI2_3 - 0.5 * l * l - dilog(1.0 / x);
    }
    if x > 0.5 {
        return PI2_6 - x.ln() * (-x).ln_1p() - series(1.0 - x);
    }
    if x >= -0.5 {
        return series(x);
    }
    if x >= -1.0 {
        // Landen: maps [-1, -1/2) onto (1/3, 1/2].
        let l = (-x).ln_1p();
        return -series(x / (x - 1.0)) - 0.5 * l * l;
    }
    let l = (-x).ln();
    -PI2_6 - 0.5 * l * l - dilog(1.0 / x)
}

/// Σ xᵏ/k² for |x| ≤ 1/2.
fn series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut pow = x;
    for k in 1..=200u32 {
        let term = pow / f64::from(k * k);
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
        pow *= x;
    }
    sum
}
