//! Piecewise cubic Hermite interpolation.

use crate::error::{domain, Error, Result};

/// Cubic Hermite interpolant through `(x_k, y_k)` with slopes `d_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hermite {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Hermite {
    pub fn new(x: Vec<f64>, y: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        if x.len() < 2 || x.len() != y.len() || x.len() != d.len() {
            return Err(domain("Hermite interpolation needs >= 2 nodes with matching data"));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(domain("interpolation nodes must be strictly increasing"));
        }
        Ok(Self { x, y, d })
    }

    /// Monotone (Fritsch-Carlson) slopes, as in PCHIP.
    pub fn monotone(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(domain("monotone interpolation needs >= 2 nodes"));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for k in 1..n - 1 {
                if delta[k - 1] * delta[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
                }
            }
            d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Self::new(x, y, d)
    }

    pub fn range(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }

    fn locate(&self, t: f64) -> Result<usize> {
        let (lo, hi) = self.range();
        if !(t >= lo && t <= hi) {
            return Err(Error::OutOfRange { what: "interpolation argument", value: t, lo, hi });
        }
        Ok(self.x.partition_point(|&v| v <= t).saturating_sub(1).min(self.x.len() - 2))
    }

    /// Value and first derivative at `t`; extrapolation is an error.
    pub fn eval(&self, t: f64) -> Result<(f64, f64)> {
        let k = self.locate(t)?;
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (y0, y1, d0, d1) = (self.y[k], self.y[k + 1], self.d[k] * h, self.d[k + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * d1;
        let dv = (6.0 * s2 - 6.0 * s) * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * d0
            + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * d1;
        Ok((v, dv / h))
    }
}

fn end_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubic_with_exact_slopes() {
        let x: Vec<f64> = (0..6).map(|i| i as f64 * 0.7).collect();
        let f = |t: f64| t * t * t - 2.0 * t + 1.0;
        let df = |t: f64| 3.0 * t * t - 2.0;
        let h = Hermite::new(x.clone(), x.iter().map(|&t| f(t)).collect(), x.iter().map(|&t| df(t)).collect()).unwrap();
        for &t in &[0.1, 1.3, 2.9, 3.5] {
            let (v, dv) = h.eval(t).unwrap();
            assert!((v - f(t)).abs() < 1e-12);
            assert!((dv - df(t)).abs() < 1e-11);
        }
    }

    #[test]
    fn monotone_data_stays_monotone() {
        let x = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let y = vec![0.0, 0.1, 0.1, 5.0, 5.1];
        let h = Hermite::monotone(x, y).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=400 {
            let (v, dv) = h.eval(i as f64 * 0.01).unwrap();
            assert!(v >= prev - 1e-15 && dv >= -1e-12);
            prev = v;
        }
    }

    #[test]
    fn extrapolation_is_rejected() {
        let h = Hermite::monotone(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert!(h.eval(1.0 + 1e-12).is_err());
        assert!(h.eval(-0.1).is_err());
    }
}
