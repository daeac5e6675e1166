//! Monotone piecewise-cubic (Fritsch-Carlson) interpolation of a CDF with
//! exponential tails.

use crate::error::{LdError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneCdf {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl MonotoneCdf {
    /// Knots must be strictly increasing in both coordinates with `y` in (0, 1).
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() < 3 {
            return Err(LdError::InvalidCalibration(format!(
                "need at least 3 knots of matching length (got {} and {})",
                x.len(),
                y.len()
            )));
        }
        for k in 0..x.len() {
            if !x[k].is_finite() || !(y[k] > 0.0 && y[k] < 1.0) {
                return Err(LdError::InvalidCalibration(format!("knot {k} is out of range")));
            }
            if k > 0 && !(x[k] > x[k - 1] && y[k] > y[k - 1]) {
                return Err(LdError::InvalidCalibration(format!(
                    "knots are not strictly increasing at index {k}"
                )));
            }
        }
        let m = slopes(&x, &y);
        Ok(Self { x, y, m })
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.x, &self.y)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.x.len();
        if x.is_nan() {
            return f64::NAN;
        }
        if x <= self.x[0] {
            let beta = tail_rate(self.m[0], self.y[1] - self.y[0], self.x[1] - self.x[0]) / self.y[0];
            return self.y[0] * (beta * (x - self.x[0])).exp();
        }
        if x >= self.x[n - 1] {
            let q = 1.0 - self.y[n - 1];
            let beta = tail_rate(
                self.m[n - 1],
                self.y[n - 1] - self.y[n - 2],
                self.x[n - 1] - self.x[n - 2],
            ) / q;
            return 1.0 - q * (-beta * (x - self.x[n - 1])).exp();
        }
        let k = self.x.partition_point(|&v| v <= x) - 1;
        let h = self.x[k + 1] - self.x[k];
        let t = (x - self.x[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.y[k] + h10 * h * self.m[k] + h01 * self.y[k + 1] + h11 * h * self.m[k + 1]
    }
}

/// Endpoint slope for tail extrapolation; falls back to the secant when the
/// shape-preserving slope vanished.
fn tail_rate(m: f64, dy: f64, dx: f64) -> f64 {
    if m > 0.0 {
        m
    } else {
        dy / dx
    }
}

fn slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let d: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    let mut m = vec![0.0; n];
    for k in 1..n - 1 {
        if d[k - 1] > 0.0 && d[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            m[k] = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k]);
        }
    }
    m[0] = end_slope(h[0], h[1], d[0], d[1]);
    m[n - 1] = end_slope(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
    m
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn logistic(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    #[test]
    fn reproduces_knots_and_smooth_cdf() {
        let x: Vec<f64> = (0..=80).map(|k| -10.0 + 0.25 * k as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| logistic(v)).collect();
        let c = MonotoneCdf::new(x.clone(), y.clone()).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert_eq!(c.eval(*a), *b);
        }
        for k in 0..1000 {
            let v = -12.0 + 0.024 * k as f64;
            assert!((c.eval(v) - logistic(v)).abs() < 2e-4, "at {v}");
        }
    }

    #[test]
    fn monotone_on_uneven_data() {
        let x = vec![0.0, 0.1, 0.2, 3.0, 3.1, 10.0];
        let y = vec![0.01, 0.4, 0.41, 0.42, 0.9, 0.99];
        let c = MonotoneCdf::new(x, y).unwrap();
        let mut prev = 0.0;
        for k in 0..=2000 {
            let v = -1.0 + 0.006 * k as f64;
            let f = c.eval(v);
            assert!(f >= prev && f > 0.0 && f < 1.0);
            prev = f;
        }
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(MonotoneCdf::new(vec![0.0, 1.0, 1.0], vec![0.1, 0.2, 0.3]).is_err());
        assert!(MonotoneCdf::new(vec![0.0, 1.0, 2.0], vec![0.1, 0.3, 0.2]).is_err());
        assert!(MonotoneCdf::new(vec![0.0, 1.0, 2.0], vec![0.1, 0.3, 1.0]).is_err());
    }
}
