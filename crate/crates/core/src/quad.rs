//! Quadrature building blocks: tanh-sinh (double exponential) node tables
//! with incremental level refinement, Gauss-Legendre panel rules, and an
//! oscillation-aware panel integrator.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::OnceLock;

/// A double-exponential node on the reference interval (-1, 1).
#[derive(Debug, Clone, Copy)]
pub struct DeNode {
    /// Abscissa in (-1, 1).
    pub x: f64,
    /// Distance to the nearer endpoint, computed in a cancellation-free way.
    pub endpoint_gap: f64,
    /// Weight including the step size of its level.
    pub w: f64,
}

const DE_T_MAX: f64 = 4.3;
pub const DE_MAX_LEVEL: usize = 14;
const DE_H0: f64 = 0.5;

fn de_point(t: f64) -> Option<(f64, f64, f64)> {
    // x = tanh(u), u = (pi/2) sinh t; 1 - |x| = 2 e^{-2u}/(1+e^{-2u}) for u > 0.
    let u = (PI / 2.0) * t.sinh();
    let sech2 = {
        let c = u.cosh();
        1.0 / (c * c)
    };
    let dxdt = (PI / 2.0) * t.cosh() * sech2;
    if dxdt < 1e-300 {
        return None;
    }
    let x = u.tanh();
    let gap = {
        let e = (-2.0 * u.abs()).exp();
        2.0 * e / (1.0 + e)
    };
    Some((x, gap, dxdt))
}

/// Nodes new at `level` (level 0 holds the coarse grid, level l > 0 the odd
/// multiples of h0/2^l). The weight already carries the level-l step, so
/// summing `w * f(x)` over levels 0..=L and scaling history by the usual
/// halving gives the level-L estimate.
fn de_level_raw(level: usize) -> Vec<(f64, f64, f64)> {
    let h = DE_H0 / (1u64 << level) as f64;
    let mut out = Vec::new();
    if level == 0 {
        let jmax = (DE_T_MAX / h) as i64;
        for j in -jmax..=jmax {
            if let Some(p) = de_point(j as f64 * h) {
                out.push(p);
            }
        }
    } else {
        let jmax = (DE_T_MAX / h) as i64;
        let mut j = -jmax;
        if j % 2 == 0 {
            j += 1;
        }
        while j <= jmax {
            if let Some(p) = de_point(j as f64 * h) {
                out.push(p);
            }
            j += 2;
        }
    }
    out
}

/// Cached double-exponential node tables, one entry per level.
pub fn de_level(level: usize) -> &'static [DeNode] {
    static TABLES: OnceLock<Vec<Vec<DeNode>>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| {
        (0..=DE_MAX_LEVEL)
            .map(|l| {
                let h = DE_H0 / (1u64 << l) as f64;
                de_level_raw(l)
                    .into_iter()
                    .map(|(x, gap, dxdt)| DeNode {
                        x,
                        endpoint_gap: gap,
                        w: h * dxdt,
                    })
                    .collect()
            })
            .collect()
    });
    &tables[level]
}

/// Outcome of an adaptive quadrature.
#[derive(Debug, Clone, Copy)]
pub struct QuadOutcome {
    pub value: Complex64,
    pub error_estimate: f64,
    pub evaluations: usize,
    pub level: usize,
}

/// Abscissa handed to gap-aware integrands: `from_left` and `from_right` are
/// the exact distances to the interval endpoints, free of the cancellation
/// that computing `x - a` would suffer deep in the endpoint clusters.
#[derive(Debug, Clone, Copy)]
pub struct DeAbscissa {
    pub x: f64,
    pub from_left: f64,
    pub from_right: f64,
}

/// Tanh-sinh integration for integrands singular (in value or derivatives)
/// at the endpoints; the callback receives exact endpoint distances.
pub fn tanh_sinh_gap<F>(f: F, a: f64, b: f64, target: f64, max_level: usize) -> Result<QuadOutcome>
where
    F: Fn(DeAbscissa) -> Complex64,
{
    let s = 0.5 * (b - a);
    let mut total = Complex64::new(0.0, 0.0);
    let mut evals = 0usize;
    let mut prev: Option<Complex64> = None;
    let mut prev_err = f64::INFINITY;
    let max_level = max_level.min(DE_MAX_LEVEL);
    for level in 0..=max_level {
        let mut new_sum = Complex64::new(0.0, 0.0);
        for node in de_level(level) {
            let gap = s * node.endpoint_gap;
            let (from_left, from_right, x) = if node.x <= 0.0 {
                (gap, (b - a) - gap, a + gap)
            } else {
                ((b - a) - gap, gap, b - gap)
            };
            new_sum += node.w
                * f(DeAbscissa {
                    x,
                    from_left,
                    from_right,
                });
            evals += 1;
        }
        total = if level == 0 {
            new_sum
        } else {
            0.5 * total + new_sum
        };
        let value = s * total;
        if let Some(p) = prev {
            let err = (value - p).norm();
            if err <= target * (1.0 + value.norm()) || (err < 1e-16 * value.norm().max(1.0)) {
                return Ok(QuadOutcome {
                    value,
                    error_estimate: err,
                    evaluations: evals,
                    level,
                });
            }
            prev_err = err;
        }
        prev = Some(value);
    }
    Err(Error::AccuracyNotReached {
        level: max_level,
        estimate: prev_err,
        target,
    })
}

/// Tanh-sinh integration of `f` over (a, b) for integrands that stay bounded
/// at the endpoints. Nodes whose abscissa rounds onto an endpoint are dropped
/// (their weight is below 1e-16); value-singular integrands must use
/// [`tanh_sinh_gap`].
pub fn tanh_sinh<F>(f: F, a: f64, b: f64, target: f64, max_level: usize) -> Result<QuadOutcome>
where
    F: Fn(f64) -> Complex64,
{
    let s = 0.5 * (b - a);
    let mut total = Complex64::new(0.0, 0.0);
    let mut evals = 0usize;
    let mut prev: Option<Complex64> = None;
    let mut prev_err = f64::INFINITY;
    let max_level = max_level.min(DE_MAX_LEVEL);
    for level in 0..=max_level {
        let mut new_sum = Complex64::new(0.0, 0.0);
        for node in de_level(level) {
            // Form the abscissa from the endpoint gap so points near the ends
            // of the interval do not lose digits to cancellation.
            let x = if node.x <= 0.0 {
                a + s * node.endpoint_gap
            } else {
                b - s * node.endpoint_gap
            };
            // A gap below one ulp rounds onto the endpoint; the weight there
            // is ~1e-50, so dropping the node is harmless for any integrable
            // singularity.
            if x <= a || x >= b {
                continue;
            }
            new_sum += node.w * f(x);
            evals += 1;
        }
        total = if level == 0 {
            new_sum
        } else {
            0.5 * total + new_sum
        };
        let value = s * total;
        if let Some(p) = prev {
            let err = (value - p).norm();
            if err <= target * (1.0 + value.norm()) || (err < 1e-16 * value.norm().max(1.0)) {
                return Ok(QuadOutcome {
                    value,
                    error_estimate: err,
                    evaluations: evals,
                    level,
                });
            }
            prev_err = err;
        }
        prev = Some(value);
    }
    Err(Error::AccuracyNotReached {
        level: max_level,
        estimate: prev_err,
        target,
    })
}

/// Gauss-Legendre nodes and weights on (-1, 1), cached per order.
pub fn gauss_legendre(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<std::sync::Mutex<std::collections::HashMap<usize, &'static (Vec<f64>, Vec<f64>)>>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(|| std::sync::Mutex::new(std::collections::HashMap::new()));
    let mut guard = cache.lock().unwrap();
    if let Some(v) = guard.get(&n) {
        return v;
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Newton iteration from the Chebyshev-like initial guess.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    let leaked: &'static (Vec<f64>, Vec<f64>) = Box::leak(Box::new((nodes, weights)));
    guard.insert(n, leaked);
    leaked
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Integrate a smooth function over [a, b] with fixed-order Gauss-Legendre
/// panels sized below `max_panel`.
pub fn gl_panels<F>(f: F, a: f64, b: f64, max_panel: f64, order: usize) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    let (nodes, weights) = gauss_legendre(order);
    let span = b - a;
    if span <= 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let n_panels = (span / max_panel).ceil().max(1.0) as usize;
    let h = span / n_panels as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for p in 0..n_panels {
        let lo = a + p as f64 * h;
        let c = lo + 0.5 * h;
        let s = 0.5 * h;
        let mut panel = Complex64::new(0.0, 0.0);
        for (x, w) in nodes.iter().zip(weights) {
            panel += *w * f(c + s * x);
        }
        acc += s * panel;
    }
    acc
}

/// Oscillation-aware adaptive integrator: panels capped by a fraction of the
/// oscillation period for frequency hint `omega` (radians per unit length),
/// refined until two successive refinements agree.
pub fn oscillatory<F>(
    f: F,
    a: f64,
    b: f64,
    omega: f64,
    target: f64,
    max_doublings: usize,
) -> Result<QuadOutcome>
where
    F: Fn(f64) -> Complex64,
{
    let base_panel = if omega.abs() > 1e-12 {
        (2.0 * PI / omega.abs()) / 3.0
    } else {
        (b - a).max(1e-12)
    };
    let mut panel = base_panel.min((b - a).max(1e-12));
    let mut prev = gl_panels(&f, a, b, panel, 16);
    let mut evals = ((b - a) / panel).ceil() as usize * 16;
    for doubling in 0..max_doublings {
        panel *= 0.5;
        let cur = gl_panels(&f, a, b, panel, 16);
        evals += ((b - a) / panel).ceil() as usize * 16;
        let err = (cur - prev).norm();
        if err <= target * (1.0 + cur.norm()) {
            return Ok(QuadOutcome {
                value: cur,
                error_estimate: err,
                evaluations: evals,
                level: doubling,
            });
        }
        prev = cur;
    }
    Err(Error::OscillationBudgetExceeded {
        panels: ((b - a) / panel).ceil() as usize,
        target,
    })
}
