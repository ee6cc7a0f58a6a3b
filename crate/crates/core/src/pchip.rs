//! Monotone cubic (Fritsch-Carlson) interpolation on an increasing grid.

use crate::error::{Error, Result};

/// Piecewise-cubic Hermite interpolant with monotonicity-limited slopes.
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        let (n, h, delta) = Self::setup(x, y)?;
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] > 0.0 {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        d[0] = edge_slope(h[0], h.get(1).copied().unwrap_or(h[0]), delta[0], delta.get(1).copied().unwrap_or(delta[0]));
        d[n - 1] = edge_slope(
            h[n - 2],
            if n > 2 { h[n - 3] } else { h[n - 2] },
            delta[n - 2],
            if n > 2 { delta[n - 3] } else { delta[n - 2] },
        );
        Ok(Pchip {
            x: x.to_vec(),
            y: y.to_vec(),
            d,
        })
    }

    /// Cubic Hermite with weighted-centered slopes. No shape limiting, so the
    /// interpolant is exactly linear in the data values; used where operators
    /// built on sampling must stay linear.
    pub fn new_unlimited(x: &[f64], y: &[f64]) -> Result<Self> {
        let (n, h, delta) = Self::setup(x, y)?;
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            d[i] = (h[i] * delta[i - 1] + h[i - 1] * delta[i]) / (h[i - 1] + h[i]);
        }
        d[0] = ((2.0 * h[0] + h.get(1).copied().unwrap_or(h[0])) * delta[0]
            - h[0] * delta.get(1).copied().unwrap_or(delta[0]))
            / (h[0] + h.get(1).copied().unwrap_or(h[0]));
        let m = n - 1;
        d[m] = if n > 2 {
            ((2.0 * h[m - 1] + h[m - 2]) * delta[m - 1] - h[m - 1] * delta[m - 2])
                / (h[m - 1] + h[m - 2])
        } else {
            delta[m - 1]
        };
        Ok(Pchip {
            x: x.to_vec(),
            y: y.to_vec(),
            d,
        })
    }

    fn setup(x: &[f64], y: &[f64]) -> Result<(usize, Vec<f64>, Vec<f64>)> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::Validation(
                "pchip needs two matching-length arrays".into(),
            ));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation("pchip grid must be increasing".into()));
        }
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        Ok((n, h, delta))
    }

    pub fn lo(&self) -> f64 {
        self.x[0]
    }

    pub fn hi(&self) -> f64 {
        *self.x.last().unwrap()
    }

    pub fn covers(&self, x: f64) -> bool {
        x >= self.lo() && x <= self.hi()
    }

    /// Evaluate at a point inside the grid span.
    pub fn eval(&self, xq: f64) -> f64 {
        let n = self.x.len();
        let i = match self
            .x
            .binary_search_by(|v| v.partial_cmp(&xq).unwrap())
        {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        };
        let h = self.x[i + 1] - self.x[i];
        let t = (xq - self.x[i]) / h;
        let (y0, y1, d0, d1) = (self.y[i], self.y[i + 1], self.d[i], self.d[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        y0 * (2.0 * t3 - 3.0 * t2 + 1.0)
            + h * d0 * (t3 - 2.0 * t2 + t)
            + y1 * (-2.0 * t3 + 3.0 * t2)
            + h * d1 * (t3 - t2)
    }
}

fn edge_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    // three-point one-sided estimate, limited to preserve shape
    let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s * d0 <= 0.0 {
        0.0
    } else if d0 * d1 < 0.0 && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_linear() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let p = Pchip::new(&x, &y).unwrap();
        for &q in &[0.1, 3.7, 8.99] {
            assert!((p.eval(q) - (2.0 * q + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn stays_monotone() {
        let x = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let y = vec![0.0, 0.1, 0.11, 5.0, 5.1];
        let p = Pchip::new(&x, &y).unwrap();
        let mut last = p.eval(0.0);
        for i in 1..400 {
            let q = 4.0 * i as f64 / 400.0;
            let v = p.eval(q);
            assert!(v >= last - 1e-12, "not monotone at {q}");
            last = v;
        }
    }

    #[test]
    fn smooth_function_accuracy() {
        // shape-limited slopes cost accuracy near slope sign changes; the
        // error contracts like h^3 elsewhere
        for (n, tol) in [(200usize, 2e-4), (800, 4e-6)] {
            let x: Vec<f64> = (0..n).map(|i| i as f64 * 10.0 / n as f64).collect();
            let y: Vec<f64> = x.iter().map(|v| (-v * v).exp()).collect();
            let p = Pchip::new(&x, &y).unwrap();
            let mut worst = 0.0f64;
            for i in 0..500 {
                let q = 9.9 * i as f64 / 500.0;
                worst = worst.max((p.eval(q) - (-q * q).exp()).abs());
            }
            assert!(worst < tol, "pchip error {worst} at {n} points");
        }
    }
}

/// Natural cubic spline: C^2, fourth-order accurate away from the ends, and
/// linear in the data.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// second derivatives at the knots
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() || x.len() < 3 {
            return Err(Error::Validation(
                "spline needs three or more matching points".into(),
            ));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation("spline grid must be increasing".into()));
        }
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        // tridiagonal system for interior second derivatives, natural ends
        let mut diag = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        let mut sub = vec![0.0; n];
        for i in 1..n - 1 {
            sub[i] = h[i - 1];
            diag[i] = 2.0 * (h[i - 1] + h[i]);
            rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
        }
        // forward elimination on the interior block
        for i in 2..n - 1 {
            let w = sub[i] / diag[i - 1];
            diag[i] -= w * h[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut m = vec![0.0; n];
        for i in (1..n - 1).rev() {
            let upper = if i + 1 < n - 1 { h[i] * m[i + 1] } else { 0.0 };
            m[i] = (rhs[i] - upper) / diag[i];
        }
        Ok(CubicSpline {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
        })
    }

    pub fn eval(&self, xq: f64) -> f64 {
        let n = self.x.len();
        let i = match self.x.binary_search_by(|v| v.partial_cmp(&xq).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        };
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - xq) / h;
        let b = (xq - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

#[cfg(test)]
mod spline_tests {
    use super::*;

    #[test]
    fn spline_reproduces_smooth_function() {
        let n = 800;
        let x: Vec<f64> = (0..n).map(|i| 10.0 * i as f64 / (n - 1) as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| (1.3 * v).sin()).collect();
        let s = CubicSpline::new(&x, &y).unwrap();
        let mut worst = 0.0f64;
        for i in 0..2000 {
            let q = 0.5 + 9.0 * i as f64 / 2000.0;
            worst = worst.max((s.eval(q) - (1.3 * q).sin()).abs());
        }
        assert!(worst < 2e-9, "spline error {worst}");
    }
}
