//! Radial functions on a grid, the radial d-dimensional Fourier (Hankel)
//! transform, V^s norms, and empirical decay checks.

use crate::error::{Error, Result};
use crate::pchip::Pchip;
use crate::quad::gauss_legendre;
use crate::special::{bessel_j_half_order, sphere_area};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Where the samples of a radial function came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    Table,
    Reconstructed,
}

/// A radial function sampled on an increasing nonnegative grid, optionally
/// carrying samples of its radial d-dimensional Fourier transform on the
/// same grid.
#[derive(Debug, Clone)]
pub struct RadialFunction {
    pub d: u32,
    pub r_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub hat_values: Option<Vec<f64>>,
    pub provenance: Provenance,
}

impl RadialFunction {
    pub fn new(d: u32, r_grid: Vec<f64>, values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if r_grid.len() != values.len() || r_grid.is_empty() {
            return Err(Error::Validation("grid/value length mismatch".into()));
        }
        if r_grid[0] < 0.0 || r_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation(
                "radial grid must be increasing and nonnegative".into(),
            ));
        }
        Ok(RadialFunction {
            d,
            r_grid,
            values,
            hat_values: None,
            provenance,
        })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(d: u32, r_grid: &[f64], f: F) -> Result<Self> {
        let values = r_grid.iter().map(|&r| f(r)).collect();
        Self::new(d, r_grid.to_vec(), values, Provenance::Analytic)
    }

    pub fn with_hat(mut self, hat: Vec<f64>) -> Result<Self> {
        if hat.len() != self.r_grid.len() {
            return Err(Error::Validation("hat length mismatch".into()));
        }
        self.hat_values = Some(hat);
        self
            .hat_values
            .as_ref()
            .map(|_| ())
            .ok_or_else(|| Error::Validation("unreachable".into()))?;
        Ok(self)
    }

    pub fn interpolant(&self) -> Result<Pchip> {
        Pchip::new(&self.r_grid, &self.values)
    }

    pub fn hat_interpolant(&self) -> Result<Pchip> {
        let hat = self
            .hat_values
            .as_ref()
            .ok_or_else(|| Error::Validation("hat values absent".into()))?;
        Pchip::new(&self.r_grid, hat)
    }

    /// Max |f| on the grid.
    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
    }
}

/// Parameters of the weighted space V^s(R^d).
#[derive(Debug, Clone, Copy)]
pub struct VsParams {
    pub s: f64,
    pub d: u32,
}

impl VsParams {
    pub fn new(s: f64, d: u32) -> Result<Self> {
        if s < 1.0 {
            return Err(Error::Validation(format!("s = {s} must be >= 1")));
        }
        Ok(VsParams { s, d })
    }
}

/// Hankel transform of a callback: the radial reduction of the
/// d-dimensional Fourier transform,
/// fhat(rho) = 2 pi rho^{1 - d/2} int_0^inf f(r) J_{d/2-1}(2 pi r rho) r^{d/2} dr.
pub fn hankel_transform_fn<F>(f: F, d: u32, r_max: f64, rho: &[f64]) -> Vec<f64>
where
    F: Fn(f64) -> f64 + Sync,
{
    let two_nu = d as i64 - 2; // twice the Bessel order d/2 - 1
    let half_d = d as f64 / 2.0;
    rho.par_iter()
        .map(|&p| {
            if p == 0.0 {
                let integrand = |r: f64| f(r) * r.powf(d as f64 - 1.0);
                sphere_area(d) * gl_integrate_real(&integrand, 0.0, r_max, 0.25)
            } else {
                let integrand = |r: f64| {
                    f(r) * bessel_j_half_order(two_nu, 2.0 * PI * r * p) * r.powf(half_d)
                };
                let panel = (1.0 / (3.0 * p)).min(0.25);
                2.0 * PI * p.powf(1.0 - half_d) * gl_integrate_real(&integrand, 0.0, r_max, panel)
            }
        })
        .collect()
}

/// Precomputed Gauss-Legendre panel nodes for Hankel transforms whose input
/// is sampled exactly at the nodes (no interpolation error). Panels are
/// capped below a third of the fastest oscillation period.
#[derive(Debug, Clone)]
pub struct HankelPlan {
    pub d: u32,
    pub nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl HankelPlan {
    pub fn new(d: u32, r_max: f64, rho_max: f64) -> Self {
        let panel = (1.0 / (3.0 * rho_max.max(1.0))).min(0.2);
        let (xs, ws) = gauss_legendre(12);
        let n_panels = (r_max / panel).ceil().max(1.0) as usize;
        let h = r_max / n_panels as f64;
        let mut nodes = Vec::with_capacity(n_panels * xs.len());
        let mut weights = Vec::with_capacity(n_panels * xs.len());
        for p in 0..n_panels {
            let c = p as f64 * h + 0.5 * h;
            let s = 0.5 * h;
            for (x, w) in xs.iter().zip(ws) {
                nodes.push(c + s * x);
                weights.push(s * w);
            }
        }
        HankelPlan { d, nodes, weights }
    }

    /// Transform values sampled at `self.nodes` to the radii `rho`.
    pub fn transform(&self, values: &[f64], rho: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.nodes.len());
        let two_nu = self.d as i64 - 2;
        let half_d = self.d as f64 / 2.0;
        rho.par_iter()
            .map(|&p| {
                if p == 0.0 {
                    let mut acc = 0.0;
                    for ((&r, &w), &v) in self.nodes.iter().zip(&self.weights).zip(values) {
                        acc += w * v * r.powf(self.d as f64 - 1.0);
                    }
                    sphere_area(self.d) * acc
                } else {
                    let mut acc = 0.0;
                    for ((&r, &w), &v) in self.nodes.iter().zip(&self.weights).zip(values) {
                        acc += w
                            * v
                            * bessel_j_half_order(two_nu, 2.0 * PI * r * p)
                            * r.powf(half_d);
                    }
                    2.0 * PI * p.powf(1.0 - half_d) * acc
                }
            })
            .collect()
    }
}

fn gl_integrate_real<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, max_panel: f64) -> f64 {
    let (nodes, weights) = gauss_legendre(12);
    let span = b - a;
    let n_panels = (span / max_panel).ceil().max(1.0) as usize;
    let h = span / n_panels as f64;
    let mut acc = 0.0;
    for pnl in 0..n_panels {
        let lo = a + pnl as f64 * h;
        let c = lo + 0.5 * h;
        let s = 0.5 * h;
        let mut panel = 0.0;
        for (x, w) in nodes.iter().zip(weights) {
            panel += *w * f(c + s * x);
        }
        acc += s * panel;
    }
    acc
}

/// Estimate of the mass beyond the grid by exponential extrapolation of the
/// last decade of samples. Used for error bars only.
fn tail_estimate(f: &RadialFunction) -> f64 {
    let n = f.r_grid.len();
    let r_hi = f.r_grid[n - 1];
    let r_lo = 0.9 * r_hi;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..n {
        if f.r_grid[i] >= r_lo && f.values[i].abs() > 1e-300 {
            xs.push(f.r_grid[i]);
            ys.push(f.values[i].abs().ln());
        }
    }
    let last = f.values[n - 1].abs();
    if xs.len() < 4 {
        return last * r_hi.max(1.0);
    }
    let nf = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let slope = (nf * sxy - sx * sy) / (nf * sxx - sx * sx);
    if slope < -1e-3 {
        // integral of C e^{slope r} r^{d-1}-ish beyond r_hi
        last / (-slope) * r_hi.powf(f.d as f64 - 1.0) * sphere_area(f.d)
    } else {
        last * r_hi.max(1.0) * sphere_area(f.d)
    }
}

/// Radial d-dimensional Fourier transform of a sampled function, evaluated
/// on its own grid. The returned function carries the original samples as
/// its hat values (Fourier inversion on radial functions).
pub fn radial_fourier(f: &RadialFunction) -> Result<RadialFunction> {
    let tail = tail_estimate(f);
    if tail > 1e-6 * (1.0 + f.sup()) {
        return Err(Error::TailNotNegligible {
            estimate: tail,
            target: 1e-6 * (1.0 + f.sup()),
        });
    }
    let interp = f.interpolant()?;
    let r_max = interp.hi();
    let hat = hankel_transform_fn(|r| interp.eval(r), f.d, r_max, &f.r_grid);
    Ok(RadialFunction {
        d: f.d,
        r_grid: f.r_grid.clone(),
        values: hat,
        hat_values: Some(f.values.clone()),
        provenance: f.provenance,
    })
}

/// Value of a V^s norm together with the estimated mass beyond the grid.
#[derive(Debug, Clone, Copy)]
pub struct VsNorm {
    pub value: f64,
    pub tail_bound: f64,
}

/// L^1 integral of |g| (1 + r^s) r^{d-1} over the grid span, in polar form.
pub fn weighted_l1(grid: &[f64], values: &[f64], s: f64, d: u32) -> Result<f64> {
    let p = Pchip::new(grid, values)?;
    let integrand = |r: f64| p.eval(r).abs() * (1.0 + r.powf(s)) * r.powf(d as f64 - 1.0);
    // panels bounded by the grid spacing so sign changes stay localized
    let mut acc = 0.0;
    for w in grid.windows(2) {
        acc += gl_integrate_real(&integrand, w[0], w[1], (w[1] - w[0]) / 2.0 + 1e-300);
    }
    Ok(sphere_area(d) * acc)
}

/// The V^s norm: ||f m_s||_L1 + ||fhat m_s||_L1, computed in polar form. The
/// hat samples are taken from the function or computed on demand.
pub fn vs_norm(f: &RadialFunction, p: VsParams) -> Result<VsNorm> {
    let hat_owned;
    let hat: &[f64] = match &f.hat_values {
        Some(h) => h,
        None => {
            hat_owned = radial_fourier(f)?.values;
            &hat_owned
        }
    };
    let part_f = weighted_l1(&f.r_grid, &f.values, p.s, f.d)?;
    let part_hat = weighted_l1(&f.r_grid, hat, p.s, f.d)?;
    let tail = tail_estimate(f);
    let value = part_f + part_hat;
    if tail > 0.05 * (value + 1e-300) {
        return Err(Error::TailNotNegligible {
            estimate: tail,
            target: 0.05 * value,
        });
    }
    Ok(VsNorm {
        value,
        tail_bound: tail,
    })
}

/// Result of the empirical decay check against |x|^{-s/(d+1)}.
#[derive(Debug, Clone, Copy)]
pub struct DecayReport {
    /// measured tail exponent of |f| + |fhat| (log-log fit), None when the
    /// tail sits below the floor everywhere (super-polynomial decay)
    pub measured_exponent: Option<f64>,
    pub required_exponent: f64,
    pub passes: bool,
}

/// Fit the decay exponent of |f| + |fhat| on the outer part of the grid and
/// compare with s/(d+1).
pub fn decay_check(f: &RadialFunction, p: VsParams) -> Result<DecayReport> {
    // A hat computed here by quadrature over the interpolant carries noise
    // around 1e-6 of the scale; points below that are not evidence of a tail.
    let (hat, floor) = match f.hat_values.clone() {
        Some(h) => (h, 1e-13),
        None => {
            let h = radial_fourier(f)?.values;
            let scale = f.sup() + h.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
            (h, 1e-12 + 3e-6 * scale)
        }
    };
    let n = f.r_grid.len();
    if n < 16 {
        return Err(Error::GridTooShort("need at least 16 samples".into()));
    }
    let r_hi = f.r_grid[n - 1];
    let r_lo = (r_hi / 3.0).max(f.r_grid[1]);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut all_below_floor = true;
    for i in 0..n {
        let r = f.r_grid[i];
        if r < r_lo || r <= 0.0 {
            continue;
        }
        let v = f.values[i].abs() + hat[i].abs();
        if v > floor {
            all_below_floor = false;
            xs.push(r.ln());
            ys.push(v.ln());
        }
    }
    let required = p.s / (p.d as f64 + 1.0);
    if all_below_floor {
        // decayed through the floor: faster than any polynomial rate we test
        return Ok(DecayReport {
            measured_exponent: None,
            required_exponent: required,
            passes: true,
        });
    }
    if xs.len() < 6 {
        return Err(Error::GridTooShort(
            "fewer than 6 tail samples above the noise floor".into(),
        ));
    }
    let nf = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let slope = (nf * sxy - sx * sy) / (nf * sxx - sx * sx);
    let measured = -slope;
    Ok(DecayReport {
        measured_exponent: Some(measured),
        required_exponent: required,
        passes: measured >= required - 0.1,
    })
}

/// Uniform grid helper for tests and callers.
pub fn uniform_grid(r_max: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| r_max * i as f64 / (points - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn gaussian(d: u32, r_max: f64, n: usize) -> RadialFunction {
        RadialFunction::from_fn(d, &uniform_grid(r_max, n), |r| (-PI * r * r).exp()).unwrap()
    }

    #[test]
    fn gaussian_self_dual_all_dimensions() {
        // analytic callback route: quadrature accuracy only
        let rho: Vec<f64> = (0..60).map(|i| 6.0 * i as f64 / 59.0).collect();
        for d in [1u32, 2, 3, 4] {
            let hat = hankel_transform_fn(|r| (-PI * r * r).exp(), d, 10.0, &rho);
            let mut worst = 0.0f64;
            for (i, &p) in rho.iter().enumerate() {
                worst = worst.max((hat[i] - (-PI * p * p).exp()).abs());
            }
            assert!(worst < 1e-9, "d = {d}: self-duality error {worst}");
        }
        // grid route carries the interpolation tier
        let f = gaussian(1, 10.0, 800);
        let hat = radial_fourier(&f).unwrap();
        let mut worst = 0.0f64;
        for (i, &r) in f.r_grid.iter().enumerate() {
            if r > 6.0 {
                break;
            }
            worst = worst.max((hat.values[i] - (-PI * r * r).exp()).abs());
        }
        assert!(worst < 5e-6, "grid-route self-duality error {worst}");
    }

    #[test]
    fn scaled_gaussian_law_d1() {
        let t = 2.0f64;
        let rho: Vec<f64> = (0..50).map(|i| 5.0 * i as f64 / 49.0).collect();
        let hat = hankel_transform_fn(|r| (-PI * t * r * r).exp(), 1, 10.0, &rho);
        let mut worst = 0.0f64;
        for (i, &p) in rho.iter().enumerate() {
            let expect = t.powf(-0.5) * (-PI * p * p / t).exp();
            worst = worst.max((hat[i] - expect).abs());
        }
        assert!(worst < 1e-9, "scaling law error {worst}");
    }

    #[test]
    fn transform_linearity() {
        let rho: Vec<f64> = (0..40).map(|i| 5.0 * i as f64 / 39.0).collect();
        let fh = hankel_transform_fn(|r| (-PI * r * r).exp(), 2, 10.0, &rho);
        let gh = hankel_transform_fn(|r| r * r * (-PI * r * r).exp(), 2, 10.0, &rho);
        let ch = hankel_transform_fn(
            |r| (1.0 + 2.0 * r * r) * (-PI * r * r).exp(),
            2,
            10.0,
            &rho,
        );
        for i in 0..rho.len() {
            let lin = fh[i] + 2.0 * gh[i];
            assert!((ch[i] - lin).abs() < 1e-10);
        }
    }

    #[test]
    fn double_transform_is_identity() {
        for d in [1u32, 2, 3, 4] {
            let grid = uniform_grid(10.0, 2400);
            let f = RadialFunction::from_fn(d, &grid, |r| (1.0 + r * r) * (-PI * r * r).exp())
                .unwrap();
            let once = radial_fourier(&f).unwrap();
            let twice = radial_fourier(&once).unwrap();
            let mut worst = 0.0f64;
            for i in 0..grid.len() {
                if grid[i] > 6.0 {
                    break;
                }
                worst = worst.max((twice.values[i] - f.values[i]).abs());
            }
            assert!(worst < 1e-6, "d = {d}: inversion error {worst}");
        }
    }

    #[test]
    fn hankel_plan_matches_callback_route() {
        let plan = HankelPlan::new(3, 10.0, 6.0);
        let values: Vec<f64> = plan.nodes.iter().map(|&r| (-PI * r * r).exp()).collect();
        let rho = vec![0.0, 0.7, 2.2, 5.5];
        let out = plan.transform(&values, &rho);
        for (i, &p) in rho.iter().enumerate() {
            assert!((out[i] - (-PI * p * p).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn v1_norm_of_gaussian_d1() {
        // ||f||_{V^1} = 2 (1 + 1/pi) for the standard Gaussian in d = 1
        let f = gaussian(1, 10.0, 900);
        let hat: Vec<f64> = f.r_grid.iter().map(|&r| (-PI * r * r).exp()).collect();
        let f = f.with_hat(hat).unwrap();
        let norm = vs_norm(&f, VsParams::new(1.0, 1).unwrap()).unwrap();
        assert_abs_diff_eq!(norm.value, 2.0 * (1.0 + 1.0 / PI), epsilon = 1e-6);
    }

    #[test]
    fn vs_norm_homogeneous_and_zero() {
        let grid = uniform_grid(10.0, 400);
        let f = RadialFunction::from_fn(2, &grid, |r| (-PI * r * r).exp()).unwrap();
        let two_f = RadialFunction::from_fn(2, &grid, |r| 2.0 * (-PI * r * r).exp()).unwrap();
        let p = VsParams::new(1.5, 2).unwrap();
        let a = vs_norm(&f, p).unwrap().value;
        let b = vs_norm(&two_f, p).unwrap().value;
        assert_abs_diff_eq!(b, 2.0 * a, epsilon = 1e-10 * a.abs());
        let zero = RadialFunction::from_fn(2, &grid, |_| 0.0).unwrap();
        assert_eq!(vs_norm(&zero, p).unwrap().value, 0.0);
    }

    #[test]
    fn vs_norm_dominates_sup() {
        let f = gaussian(3, 10.0, 600);
        let hat = radial_fourier(&f).unwrap().values;
        let f = f.with_hat(hat).unwrap();
        let norm = vs_norm(&f, VsParams::new(1.0, 3).unwrap()).unwrap();
        assert!(f.sup() <= norm.value);
    }

    #[test]
    fn decay_gaussian_passes() {
        let f = gaussian(1, 12.0, 600);
        let rep = decay_check(&f, VsParams::new(4.0, 1).unwrap()).unwrap();
        assert!(rep.passes);
    }

    #[test]
    fn decay_rational_d1() {
        // f = (1+x^2)^{-2}: measured tail exponent ~ 4 >= s/(d+1) = 1
        let f = RadialFunction::from_fn(1, &uniform_grid(60.0, 3000), |r| {
            1.0 / (1.0 + r * r).powi(2)
        })
        .unwrap();
        // supply an analytic-ish hat so the check does not need the
        // transform of a slowly decaying function on a finite grid:
        // F[(1+x^2)^{-2}](w) = pi/2 (1 + 2 pi |w|) e^{-2 pi |w|}
        let hat: Vec<f64> = f
            .r_grid
            .iter()
            .map(|&w| PI / 2.0 * (1.0 + 2.0 * PI * w) * (-2.0 * PI * w).exp())
            .collect();
        let f = f.with_hat(hat).unwrap();
        let rep = decay_check(&f, VsParams::new(2.0, 1).unwrap()).unwrap();
        let m = rep.measured_exponent.unwrap();
        assert!((m - 4.0).abs() < 0.3, "measured exponent {m}");
        assert!(rep.passes);
    }

    #[test]
    fn decay_constant_tail_fails() {
        let f = RadialFunction::from_fn(1, &uniform_grid(30.0, 300), |r| {
            if r < 5.0 {
                (-r * r).exp()
            } else {
                0.01
            }
        })
        .unwrap();
        let f = f.with_hat(vec![0.0; 300]).unwrap();
        let rep = decay_check(&f, VsParams::new(2.0, 1).unwrap());
        match rep {
            Err(Error::GridTooShort(_)) => {}
            Ok(r) => assert!(!r.passes, "constant tail must not pass"),
            Err(e) => panic!("unexpected error {e}"),
        }
    }
}
