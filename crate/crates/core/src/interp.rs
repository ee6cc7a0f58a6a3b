//! Radial interpolation at square-root nodes and its perturbed counterpart:
//! the operator T built from perturbed samples, contraction budgets from
//! measured basis norms, and Neumann-series reconstruction.

use crate::basis::{assemble_a, coefficients, BasisTable, HeightPolicy, QuadratureConfig};
use crate::error::{Error, Result};
use crate::modular::{nu_mu, HalfInt, Sign};
use crate::pchip::Pchip;
use crate::spaces::{weighted_l1, Provenance, RadialFunction, VsParams};
use std::f64::consts::PI;

/// Perturbation sequences eps_n, eps_hat_n with their declared decay budget.
#[derive(Debug, Clone)]
pub struct PerturbationProfile {
    pub eps: Vec<f64>,
    pub eps_hat: Vec<f64>,
    pub s: f64,
    pub eta: f64,
    pub delta: f64,
    pub d: u32,
}

impl PerturbationProfile {
    pub fn new(
        eps: Vec<f64>,
        eps_hat: Vec<f64>,
        s: f64,
        eta: f64,
        delta: f64,
        d: u32,
    ) -> Result<Self> {
        if s < 1.0 || eta <= 0.0 || delta <= 0.0 {
            return Err(Error::Validation(
                "profile needs s >= 1, eta > 0, delta > 0".into(),
            ));
        }
        if eps.len() != eps_hat.len() {
            return Err(Error::Validation("eps/eps_hat length mismatch".into()));
        }
        let profile = PerturbationProfile {
            eps,
            eps_hat,
            s,
            eta,
            delta,
            d,
        };
        profile.validate()?;
        Ok(profile)
    }

    fn exponent(&self) -> f64 {
        -(self.d as f64) - self.s / 2.0 - 2.0 - self.eta
    }

    pub fn validate(&self) -> Result<()> {
        for n in 0..self.eps.len() {
            let bound = self.delta * ((1 + n) as f64).powf(self.exponent());
            let sum = self.eps[n].abs() + self.eps_hat[n].abs();
            if sum > bound * (1.0 + 1e-12) {
                return Err(Error::BudgetExceeded(format!(
                    "|eps_{n}| + |eps_hat_{n}| = {sum:e} > delta (1+n)^({}) = {bound:e}",
                    self.exponent()
                )));
            }
            if n >= 1 {
                let nf = n as f64;
                if nf + self.eps[n] < 0.0 || nf + self.eps_hat[n] < 0.0 {
                    return Err(Error::Validation(format!(
                        "perturbed radius negative at n = {n}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Profile saturating the decay budget with alternating signs.
    pub fn power_law(delta: f64, s: f64, eta: f64, d: u32, n_max: usize) -> Result<Self> {
        let expo = -(d as f64) - s / 2.0 - 2.0 - eta;
        let eps: Vec<f64> = (0..=n_max)
            .map(|n| {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                0.5 * sign * delta * ((1 + n) as f64).powf(expo)
            })
            .collect();
        let eps_hat: Vec<f64> = (0..=n_max)
            .map(|n| {
                let sign = if n % 2 == 0 { -1.0 } else { 1.0 };
                0.5 * sign * delta * ((1 + n) as f64).powf(expo)
            })
            .collect();
        Self::new(eps, eps_hat, s, eta, delta, d)
    }

    /// The all-zero profile (T = identity on the represented class).
    pub fn zero(s: f64, eta: f64, d: u32, n_max: usize) -> Self {
        PerturbationProfile {
            eps: vec![0.0; n_max + 1],
            eps_hat: vec![0.0; n_max + 1],
            s,
            eta,
            delta: f64::MIN_POSITIVE,
            d,
        }
    }

    pub fn n_max(&self) -> usize {
        self.eps.len().saturating_sub(1)
    }

    /// Perturbed sample radius sqrt(n + eps_n); for n = 0 this is |eps_0|.
    pub fn radius(&self, n: usize, hat: bool) -> f64 {
        let e = if hat { self.eps_hat[n] } else { self.eps[n] };
        if n == 0 {
            e.abs()
        } else {
            (n as f64 + e).sqrt()
        }
    }
}

/// Sampled interpolation data: f at the (perturbed) square-root nodes and
/// fhat at its own nodes.
#[derive(Debug, Clone)]
pub struct NodeData {
    pub d: u32,
    pub f_vals: Vec<f64>,
    pub fhat_vals: Vec<f64>,
    pub n_max: usize,
}

impl NodeData {
    pub fn new(d: u32, f_vals: Vec<f64>, fhat_vals: Vec<f64>) -> Result<Self> {
        if f_vals.len() != fhat_vals.len() || f_vals.is_empty() {
            return Err(Error::Validation(
                "node data arrays empty or mismatched".into(),
            ));
        }
        let n_max = f_vals.len() - 1;
        Ok(NodeData {
            d,
            f_vals,
            fhat_vals,
            n_max,
        })
    }

    /// Sample an analytic pair (f, fhat) at the nodes of a profile.
    pub fn sample<F, G>(d: u32, profile: &PerturbationProfile, f: F, fhat: G) -> Result<Self>
    where
        F: Fn(f64) -> f64,
        G: Fn(f64) -> f64,
    {
        let f_vals = (0..=profile.n_max())
            .map(|n| f(profile.radius(n, false)))
            .collect();
        let fhat_vals = (0..=profile.n_max())
            .map(|n| fhat(profile.radius(n, true)))
            .collect();
        Self::new(d, f_vals, fhat_vals)
    }
}

/// The a / a~ tables for one dimension, with per-row interpolants.
pub struct RadialTables {
    pub d: u32,
    pub k: HalfInt,
    pub a: BasisTable,
    pub a_tilde: BasisTable,
    rows_a: Vec<Pchip>,
    rows_at: Vec<Pchip>,
}

impl RadialTables {
    /// Build both sign tables and assemble a, a~.
    pub fn build(
        d: u32,
        n_max: usize,
        r_grid: &[f64],
        quad_cfg: QuadratureConfig,
    ) -> Result<Self> {
        Self::build_for_k(HalfInt::from_twice(d as i64), n_max, r_grid, quad_cfg)
    }

    /// Tables for an arbitrary half-integer weight; the functions live on
    /// R^{2k}.
    pub fn build_for_k(
        k: HalfInt,
        n_max: usize,
        r_grid: &[f64],
        quad_cfg: QuadratureConfig,
    ) -> Result<Self> {
        let plus = coefficients(k, Sign::Plus, r_grid, n_max, HeightPolicy::Auto, quad_cfg)?;
        let minus = coefficients(k, Sign::Minus, r_grid, n_max, HeightPolicy::Auto, quad_cfg)?;
        let (a, a_tilde) = assemble_a(&plus, &minus)?;
        Self::from_tables(k.twice() as u32, a, a_tilde)
    }

    pub fn from_tables(d: u32, a: BasisTable, a_tilde: BasisTable) -> Result<Self> {
        // oscillatory rows: unlimited slopes avoid the limiter's accuracy
        // loss at every extremum
        let rows_a = a
            .values
            .iter()
            .map(|row| Pchip::new_unlimited(&a.r_grid, row))
            .collect::<Result<Vec<_>>>()?;
        let rows_at = a_tilde
            .values
            .iter()
            .map(|row| Pchip::new_unlimited(&a_tilde.r_grid, row))
            .collect::<Result<Vec<_>>>()?;
        Ok(RadialTables {
            d,
            k: HalfInt::from_twice(d as i64),
            a,
            a_tilde,
            rows_a,
            rows_at,
        })
    }

    pub fn n_max(&self) -> usize {
        self.a.n_max
    }

    pub fn r_grid(&self) -> &[f64] {
        &self.a.r_grid
    }

    pub fn r_max(&self) -> f64 {
        *self.a.r_grid.last().unwrap()
    }

    /// Index below which a_n and a~_n vanish identically.
    pub fn first_index(&self) -> usize {
        nu_mu(self.k).nu_minus.max(0) as usize
    }

    pub fn eval_a(&self, n: usize, r: f64) -> f64 {
        self.rows_a[n].eval(r)
    }

    pub fn eval_a_tilde(&self, n: usize, r: f64) -> f64 {
        self.rows_at[n].eval(r)
    }

    /// Measured V^s norms ||a_n||_{V^s} = ||a~_n||_{V^s}, one per index.
    pub fn measured_norms(&self, s: f64) -> Result<Vec<f64>> {
        (0..=self.n_max())
            .map(|n| {
                let wa = weighted_l1(&self.a.r_grid, &self.a.values[n], s, self.d)?;
                let wat = weighted_l1(&self.a_tilde.r_grid, &self.a_tilde.values[n], s, self.d)?;
                Ok(wa + wat)
            })
            .collect()
    }
}

/// A grid function together with its exact transform partner on the same
/// grid. Closed under the interpolation series because Fourier swaps a_n
/// with a~_n.
#[derive(Debug, Clone)]
pub struct GridPair {
    pub values: Vec<f64>,
    pub hat: Vec<f64>,
}

impl GridPair {
    pub fn zero(len: usize) -> Self {
        GridPair {
            values: vec![0.0; len],
            hat: vec![0.0; len],
        }
    }

    fn axpy(&mut self, c: f64, ch: f64, a_row: &[f64], at_row: &[f64]) {
        // values += c a + ch a~ ; hat += c a~ + ch a
        for i in 0..self.values.len() {
            self.values[i] += c * a_row[i] + ch * at_row[i];
            self.hat[i] += c * at_row[i] + ch * a_row[i];
        }
    }

    pub fn sub(&self, other: &GridPair) -> GridPair {
        GridPair {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
            hat: self
                .hat
                .iter()
                .zip(&other.hat)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn add(&self, other: &GridPair) -> GridPair {
        GridPair {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
            hat: self.hat.iter().zip(&other.hat).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> GridPair {
        GridPair {
            values: self.values.iter().map(|v| c * v).collect(),
            hat: self.hat.iter().map(|v| c * v).collect(),
        }
    }

    /// V^1-type surrogate norm on the table grid.
    pub fn v1_norm(&self, grid: &[f64], d: u32) -> Result<f64> {
        Ok(weighted_l1(grid, &self.values, 1.0, d)? + weighted_l1(grid, &self.hat, 1.0, d)?)
    }

    pub fn into_radial(self, d: u32, grid: &[f64]) -> Result<RadialFunction> {
        let f = RadialFunction::new(d, grid.to_vec(), self.values, Provenance::Reconstructed)?;
        f.with_hat(self.hat)
    }
}

/// The data series D = sum f_vals[n] a_n + fhat_vals[n] a~_n as a grid pair.
pub fn data_series(data: &NodeData, tables: &RadialTables) -> Result<GridPair> {
    if data.n_max > tables.n_max() {
        return Err(Error::TableRangeExceeded(format!(
            "data to n = {} but tables stop at {}",
            data.n_max,
            tables.n_max()
        )));
    }
    let mut out = GridPair::zero(tables.r_grid().len());
    for n in 0..=data.n_max {
        out.axpy(
            data.f_vals[n],
            data.fhat_vals[n],
            &tables.a.values[n],
            &tables.a_tilde.values[n],
        );
    }
    Ok(out)
}

/// Exact-node interpolation (Eq. with unperturbed nodes): evaluate the series
/// on the table grid and attach the transform by table duality. Returns the
/// function and a truncation-tail estimate.
pub fn interpolate(
    data: &NodeData,
    tables: &RadialTables,
    x_grid: &[f64],
) -> Result<(RadialFunction, f64)> {
    if data.n_max > tables.n_max() {
        return Err(Error::TableRangeExceeded(format!(
            "data to n = {} but tables stop at {}",
            data.n_max,
            tables.n_max()
        )));
    }
    let r_max = tables.r_max();
    if x_grid.iter().any(|&x| x < 0.0 || x > r_max) {
        return Err(Error::TableRangeExceeded(
            "requested radius outside table grid".into(),
        ));
    }
    let mut values = vec![0.0; x_grid.len()];
    let mut hat = vec![0.0; x_grid.len()];
    for n in 0..=data.n_max {
        let (c, ch) = (data.f_vals[n], data.fhat_vals[n]);
        if c == 0.0 && ch == 0.0 {
            continue;
        }
        for (i, &x) in x_grid.iter().enumerate() {
            let a = tables.eval_a(n, x);
            let at = tables.eval_a_tilde(n, x);
            values[i] += c * a + ch * at;
            hat[i] += c * at + ch * a;
        }
    }
    // Tail estimate from the exponential-decay shape |b| <= C (n+1)^{k+1}
    // e^{-c r / sqrt(n+1)} with the conservative c = 1/2, driven by the decay
    // of the supplied data over the last quarter of indices.
    let quarter = (data.n_max / 4).max(1);
    let data_tail = data.f_vals[data.n_max + 1 - quarter..]
        .iter()
        .chain(&data.fhat_vals[data.n_max + 1 - quarter..])
        .fold(0.0f64, |a, &v| a.max(v.abs()));
    let kf = tables.k.as_f64();
    let tail = data_tail * ((data.n_max + 2) as f64).powf(kf + 1.0) * 2.0;
    let f = RadialFunction::new(
        tables.d,
        x_grid.to_vec(),
        values,
        Provenance::Reconstructed,
    )?
    .with_hat(hat)?;
    Ok((f, tail))
}

/// Apply the perturbed-sample operator T to a grid pair.
pub fn apply_t(
    f: &GridPair,
    profile: &PerturbationProfile,
    tables: &RadialTables,
) -> Result<GridPair> {
    let n_max = profile.n_max().min(tables.n_max());
    let grid = tables.r_grid();
    // unlimited slopes keep T exactly linear in its input
    let f_interp = Pchip::new_unlimited(grid, &f.values)?;
    let fhat_interp = Pchip::new_unlimited(grid, &f.hat)?;
    let mut out = GridPair::zero(grid.len());
    for n in 0..=n_max {
        let r = profile.radius(n, false);
        let rh = profile.radius(n, true);
        if !f_interp.covers(r) {
            return Err(Error::GridCoverage {
                radius: r,
                lo: f_interp.lo(),
                hi: f_interp.hi(),
            });
        }
        if !fhat_interp.covers(rh) {
            return Err(Error::GridCoverage {
                radius: rh,
                lo: fhat_interp.lo(),
                hi: fhat_interp.hi(),
            });
        }
        out.axpy(
            f_interp.eval(r),
            fhat_interp.eval(rh),
            &tables.a.values[n],
            &tables.a_tilde.values[n],
        );
    }
    Ok(out)
}

/// Contraction budget: measured-norm bound on ||Tf - f|| / ||f||, plus a
/// declared tail for indices beyond the tables.
pub fn budget(
    profile: &PerturbationProfile,
    tables: &RadialTables,
    p: VsParams,
) -> Result<f64> {
    let norms = tables.measured_norms(p.s)?;
    let n_max = profile.n_max().min(tables.n_max());
    // sup |grad f| <= 2 pi kappa_s ||f||_{V^s}, kappa_s = sup u/(1+u^s)
    let kappa = if p.s <= 1.0 {
        1.0
    } else {
        let u = (p.s - 1.0).powf(-1.0 / p.s);
        u * (p.s - 1.0) / p.s
    };
    let grad = 2.0 * PI * kappa;
    let mut total = grad * (profile.eps[0].abs() + profile.eps_hat[0].abs()) * norms[0];
    for n in 1..=n_max {
        let w = 1.0 / (n as f64).sqrt();
        total += grad * (profile.eps[n].abs() * norms[n] + profile.eps_hat[n].abs() * norms[n]) * w;
    }
    // tail beyond the table range, with the norm shape (1+n)^{d + s/2 + 3/2}
    // calibrated on the measured norms
    let shape = |n: usize| ((1 + n) as f64).powf(p.d as f64 + p.s / 2.0 + 1.5);
    let m_fit = (0..=tables.n_max())
        .map(|n| norms[n] / shape(n))
        .fold(0.0f64, f64::max);
    let mut tail = 0.0;
    let mut n = n_max + 1;
    loop {
        let bound = profile.delta * ((1 + n) as f64).powf(profile.exponent());
        let term = grad * bound * m_fit * shape(n) / (n as f64).sqrt();
        tail += term;
        n += 1;
        if term < 1e-16 * (total + tail) || n > 100_000 {
            break;
        }
    }
    Ok(total + tail)
}

/// Largest delta for which the budget stays at 1/2, found by bisection.
pub fn contraction_threshold(
    tables: &RadialTables,
    d: u32,
    s: f64,
    eta: f64,
    n_max: usize,
) -> Result<f64> {
    let p = VsParams::new(s, d)?;
    let eval = |delta: f64| -> Result<f64> {
        let profile = PerturbationProfile::power_law(delta, s, eta, d, n_max)?;
        budget(&profile, tables, p)
    };
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    while eval(hi)? < 0.5 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Validation("budget never reaches 1/2".into()));
        }
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if eval(mid)? < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One Neumann iteration record.
#[derive(Debug, Clone, Copy)]
pub struct IterationRecord {
    pub iteration: usize,
    pub delta_norm: f64,
    pub ratio: Option<f64>,
}

/// Outcome of a Neumann reconstruction.
pub struct Reconstruction {
    pub result: GridPair,
    pub log: Vec<IterationRecord>,
    pub budget: f64,
    pub converged: bool,
}

/// Solve T x = D by the Neumann iteration x_{j+1} = D + (I - T) x_j.
pub fn neumann_solve(
    d_series: &GridPair,
    profile: &PerturbationProfile,
    tables: &RadialTables,
    j_max: usize,
    tol: f64,
) -> Result<Reconstruction> {
    let p = VsParams::new(profile.s, tables.d)?;
    let q = budget(profile, tables, p)?;
    if q >= 1.0 {
        return Err(Error::NotContracting { budget: q });
    }
    let grid = tables.r_grid();
    let mut x = d_series.clone();
    let mut log = Vec::new();
    let mut prev_delta: Option<f64> = None;
    let mut converged = false;
    let mut stagnations = 0usize;
    // updates below the rounding floor of the data norm cannot shrink further
    let floor = 1e-14 * (d_series.v1_norm(grid, tables.d)? + 1e-300);
    let stop = tol.max(floor);
    for j in 1..=j_max {
        let tx = apply_t(&x, profile, tables)?;
        let next = d_series.add(&x.sub(&tx));
        let delta = next.sub(&x).v1_norm(grid, tables.d)?;
        let ratio = prev_delta.map(|p| if p > 0.0 { delta / p } else { 0.0 });
        log.push(IterationRecord {
            iteration: j,
            delta_norm: delta,
            ratio,
        });
        if let Some(r) = ratio {
            if r > q + 0.05 && delta > 10.0 * stop {
                stagnations += 1;
                if stagnations >= 2 {
                    return Err(Error::Stagnation { ratio: r, budget: q });
                }
            } else {
                stagnations = 0;
            }
        }
        x = next;
        if delta <= stop {
            converged = true;
            break;
        }
        prev_delta = Some(delta);
    }
    Ok(Reconstruction {
        result: x,
        log,
        budget: q,
        converged,
    })
}

/// Reconstruct a function from perturbed-node data (constructive Theorem 1).
pub fn reconstruct(
    data: &NodeData,
    profile: &PerturbationProfile,
    tables: &RadialTables,
    j_max: usize,
    tol: f64,
) -> Result<Reconstruction> {
    let d = data_series(data, tables)?;
    neumann_solve(&d, profile, tables, j_max, tol)
}

/// Perturbed basis function h_{d,n} = T^{-1} a_{d/2,n} (or the tilde version).
pub fn basis_h(
    tables: &RadialTables,
    profile: &PerturbationProfile,
    n: usize,
    tilde: bool,
    j_max: usize,
    tol: f64,
) -> Result<Reconstruction> {
    if n > tables.n_max() {
        return Err(Error::TableRangeExceeded(format!(
            "basis index {n} beyond tables"
        )));
    }
    let d = if tilde {
        GridPair {
            values: tables.a_tilde.values[n].clone(),
            hat: tables.a.values[n].clone(),
        }
    } else {
        GridPair {
            values: tables.a.values[n].clone(),
            hat: tables.a_tilde.values[n].clone(),
        }
    };
    neumann_solve(&d, profile, tables, j_max, tol)
}
