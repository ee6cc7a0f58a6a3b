//! Generating functions F_k^eps, their modular kernels, coefficient
//! extraction on horizontal segments, and the decay-bound evaluator for the
//! interpolation basis b_{k,n}^eps, a_{k,n}, a~_{k,n}.
//!
//! Kernels are assembled in log space. With sigma = log J(tau) - log J(z) and
//! using J' = -pi i J_- J theta^4, both kernels collapse to
//!
//!   K_k^eps(tau, z) = -exp(L) / (1 - e^sigma),
//!   L = 4 log t3(z) + 2k (log t3(tau) - log t3(z)) - (nu_eps - 1) sigma + C,
//!
//! where C = log J_-(z) for eps = +1 and log J_-(tau) for eps = -1. Branch
//! offsets of 2 pi i cancel in every exponent, so per-point logarithms
//! suffice, and the representation stays finite deep in the cusp zones where
//! J itself under- or overflows.

use crate::error::{Error, Result};
use crate::modular::{
    self, log_z_over_i, nu_mu, reduce_to_fd, theta_logs_fd, HalfInt, HalfPlanePoint,
    QSeriesConfig, ReductionStep, Sign, ThetaLogs,
};
use crate::quad::{self, tanh_sinh_gap, DeNode};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::OnceLock;

const C1: Complex64 = Complex64::new(1.0, 0.0);

/// Contour quadrature controls.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureConfig {
    /// Relative accuracy target for one F value.
    pub target: f64,
    /// Maximum tanh-sinh refinement level on the semicircle.
    pub max_level: usize,
    /// Minimum distance from tau to the contour accepted by `f_eval`.
    pub standoff: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            target: 1e-12,
            max_level: 13,
            standoff: 0.02,
        }
    }
}

/// tau-side modular data entering a kernel evaluation.
#[derive(Debug, Clone, Copy)]
pub struct TauSide {
    pub log_t3: Complex64,
    pub log_j: Complex64,
    pub log_j_minus: Complex64,
}

impl TauSide {
    pub fn from_logs(logs: &ThetaLogs) -> Self {
        TauSide {
            log_t3: logs.log_t3,
            log_j: logs.log_j(),
            log_j_minus: logs.log_j_minus(),
        }
    }

    /// Modular data for a point in the closure of the fundamental domain.
    pub fn at_fd(z: HalfPlanePoint, qcfg: QSeriesConfig) -> Result<Self> {
        Ok(Self::from_logs(&theta_logs_fd(z, qcfg)?))
    }
}

/// Evaluate the kernel K_k^eps(tau, z) from precomputed side data.
fn kernel(
    two_k: f64,
    nu_eps: i64,
    sign_f: Sign,
    tau: &TauSide,
    z: &TauSide,
    pole_tol: f64,
) -> Result<Complex64> {
    let sigma = tau.log_j - z.log_j;
    let j_minus_term = match sign_f {
        Sign::Plus => z.log_j_minus,
        Sign::Minus => tau.log_j_minus,
    };
    let l = 4.0 * z.log_t3 + two_k * (tau.log_t3 - z.log_t3) - (nu_eps - 1) as f64 * sigma
        + j_minus_term;
    // Keep the exponential scale of 1/(1 - e^sigma) inside the exponent:
    // for Re sigma > 0 write it as -e^{-sigma}/(1 - e^{-sigma}) so neither
    // factor overflows deep in the cusp zones.
    let (l_eff, denom) = if sigma.re > 0.0 {
        (l - sigma, -(C1 - (-sigma).exp()))
    } else {
        (l, C1 - sigma.exp())
    };
    if denom.norm() < pole_tol {
        return Err(Error::PoleProximity {
            dist: denom.norm(),
        });
    }
    if l_eff.re < -700.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if l_eff.re > 700.0 {
        return Err(Error::Validation(format!(
            "kernel exponent overflow: Re L = {}",
            l_eff.re
        )));
    }
    Ok(-l_eff.exp() / denom)
}

/// Public kernel evaluation, Eqs. with the closed-form derivative of J.
pub fn kernel_k(
    k: HalfInt,
    sign_f: Sign,
    tau: HalfPlanePoint,
    z: HalfPlanePoint,
    qcfg: QSeriesConfig,
) -> Result<Complex64> {
    let nm = nu_mu(k);
    let tau_side = TauSide::at_fd(tau, qcfg)?;
    let z_side = TauSide::at_fd(z, qcfg)?;
    kernel(
        k.as_f64() * 2.0,
        nm.nu(sign_f),
        sign_f,
        &tau_side,
        &z_side,
        1e-12,
    )
}

/// Cached z-side data for one tanh-sinh node on the unit semicircle.
#[derive(Debug, Clone, Copy)]
struct ArcNode {
    /// Full contour weight: -(i pi / 4) w e^{i theta}.
    weight: Complex64,
    side: TauSide,
    /// i pi z, so that phi_r(z) = exp(i_pi_z * r^2).
    i_pi_z: Complex64,
}

fn build_arc_node(node: &DeNode, qcfg: QSeriesConfig) -> Result<ArcNode> {
    // theta in (0, pi); distance to the nearer endpoint from the node gap.
    let gap_angle = (PI / 2.0) * node.endpoint_gap;
    let (theta, cusp_side) = if node.x <= 0.0 {
        (gap_angle, 1.0) // near z = +1
    } else {
        (PI - gap_angle, -1.0) // near z = -1
    };
    let z = Complex64::new(theta.cos(), theta.sin());
    let logs = if theta.sin() >= qcfg.min_im_direct && (PI - theta).sin() >= qcfg.min_im_direct {
        theta_logs_fd(HalfPlanePoint::from_complex(z)?, qcfg)?
    } else {
        // z -+ 1 computed from the half-angle so tiny gaps keep full accuracy
        let half = 0.5 * gap_angle;
        let shifted = Complex64::new(
            -cusp_side * 2.0 * half.sin() * half.sin(),
            gap_angle.sin(),
        );
        // shifted = z - cusp_side, hence zt = -1/(z - side)
        let zt = -C1 / shifted;
        modular::theta_logs_cusp_from(zt, cusp_side, qcfg)?
    };
    let weight = Complex64::new(0.0, -PI / 4.0) * node.w * Complex64::new(0.0, theta).exp();
    Ok(ArcNode {
        weight,
        side: TauSide::from_logs(&logs),
        i_pi_z: Complex64::new(0.0, PI) * z,
    })
}

/// Lazily built, shared per-level node caches for the semicircle contour.
fn arc_level(level: usize) -> &'static [ArcNode] {
    static LEVELS: OnceLock<Vec<OnceLock<Vec<ArcNode>>>> = OnceLock::new();
    let levels = LEVELS.get_or_init(|| (0..=quad::DE_MAX_LEVEL).map(|_| OnceLock::new()).collect());
    levels[level].get_or_init(|| {
        let qcfg = QSeriesConfig::default();
        quad::de_level(level)
            .iter()
            .filter_map(|n| build_arc_node(n, qcfg).ok())
            .collect()
    })
}

/// F values for a batch of radii at a fixed tau in the (closure of the)
/// fundamental domain, with adaptive level refinement.
fn f_arc_multi(
    k: HalfInt,
    sign_f: Sign,
    tau_side: &TauSide,
    rs: &[f64],
    quad_cfg: QuadratureConfig,
) -> Result<(Vec<Complex64>, f64, usize)> {
    let two_k = 2.0 * k.as_f64();
    let nu_eps = nu_mu(k).nu(sign_f);
    let r2: Vec<f64> = rs.iter().map(|r| r * r).collect();
    // probe indices for the convergence test: strongest magnitude and the
    // most oscillatory column
    let probes: Vec<usize> = {
        let mut p = vec![0usize];
        if rs.len() > 2 {
            p.push(rs.len() / 2);
        }
        if rs.len() > 1 {
            p.push(rs.len() - 1);
        }
        p
    };
    let mut totals = vec![Complex64::new(0.0, 0.0); rs.len()];
    let mut prev: Option<Vec<Complex64>> = None;
    let mut last_err = f64::INFINITY;
    let mut plateau = 0usize;
    // once refinement stalls, the roundoff floor is reached; accept it as
    // long as it sits within three decades of the target
    let plateau_accept = (quad_cfg.target * 1e3).max(1e-9);
    let max_level = quad_cfg.max_level.min(quad::DE_MAX_LEVEL);
    for level in 0..=max_level {
        let nodes = arc_level(level);
        let mut new_sum = vec![Complex64::new(0.0, 0.0); rs.len()];
        for node in nodes {
            let kv = kernel(two_k, nu_eps, sign_f, tau_side, &node.side, 1e-13)?;
            if kv.re == 0.0 && kv.im == 0.0 {
                continue;
            }
            let wk = node.weight * kv;
            for (acc, rr) in new_sum.iter_mut().zip(&r2) {
                *acc += wk * (node.i_pi_z * *rr).exp();
            }
        }
        for (t, n) in totals.iter_mut().zip(&new_sum) {
            *t = if level == 0 { *n } else { 0.5 * *t + n };
        }
        if let Some(p) = &prev {
            let err = probes
                .iter()
                .map(|&i| (totals[i] - p[i]).norm() / (1.0 + totals[i].norm()))
                .fold(0.0f64, f64::max);
            if err <= quad_cfg.target {
                return Ok((totals, err, level));
            }
            plateau = if err > 0.5 * last_err { plateau + 1 } else { 0 };
            if plateau >= 2 && err <= plateau_accept {
                return Ok((totals, err, level));
            }
            last_err = err;
        }
        prev = Some(totals.clone());
    }
    if last_err <= plateau_accept {
        return Ok((totals, last_err, max_level));
    }
    Err(Error::AccuracyNotReached {
        level: max_level,
        estimate: last_err,
        target: quad_cfg.target,
    })
}

/// Evaluated F value with its quadrature error estimate.
#[derive(Debug, Clone, Copy)]
pub struct FValue {
    pub value: Complex64,
    pub error_estimate: f64,
    pub level: usize,
}

/// F_k^eps(tau, r) by the semicircle representation; tau must lie in the
/// closed fundamental domain at distance >= standoff from the contour.
pub fn f_eval(
    k: HalfInt,
    sign_f: Sign,
    tau: HalfPlanePoint,
    r: f64,
    quad_cfg: QuadratureConfig,
) -> Result<FValue> {
    let t = tau.as_complex();
    let abs = t.norm();
    if tau.re().abs() > 1.0 + 1e-12 {
        return Err(Error::Validation(format!(
            "tau = {t} outside the fundamental strip; use f_eval_any"
        )));
    }
    if abs < 1.0 + quad_cfg.standoff {
        return Err(Error::PoleProximity { dist: abs - 1.0 });
    }
    let tau_side = TauSide::at_fd(tau, QSeriesConfig::default())?;
    let (vals, err, level) = f_arc_multi(k, sign_f, &tau_side, &[r], quad_cfg)?;
    Ok(FValue {
        value: vals[0],
        error_estimate: err,
        level,
    })
}

/// Cocycle descent data for one reduction step of the form S.
#[derive(Debug, Clone, Copy)]
struct DescentStep {
    /// (w'/i)^k at the point w' = -1/w the step ascended to.
    factor: Complex64,
    /// i pi w' for phi_r(w').
    i_pi_wnext: Complex64,
    /// i pi w for phi_r(w) at the point below.
    i_pi_w: Complex64,
}

/// Precompute descent data from a reduction; T-steps contribute nothing
/// because F is two-periodic.
fn descent_steps(k: HalfInt, steps: &[ReductionStep]) -> Vec<DescentStep> {
    let kf = k.as_f64();
    steps
        .iter()
        .filter_map(|s| match s {
            ReductionStep::Translate { .. } => None,
            ReductionStep::Invert { at } => {
                let wnext = -C1 / at;
                Some(DescentStep {
                    factor: (kf * log_z_over_i(wnext)).exp(),
                    i_pi_wnext: Complex64::new(0.0, PI) * wnext,
                    i_pi_w: Complex64::new(0.0, PI) * at,
                })
            }
        })
        .collect()
}

/// Walk the functional equation down the reduction path:
/// F(w) = eps (w'/i)^k (F(w') - phi_r(w')) + phi_r(w), w' = -1/w.
fn descend(values: &mut [Complex64], r2: &[f64], steps: &[DescentStep], sign_f: Sign) {
    let eps = sign_f.value();
    for step in steps.iter().rev() {
        for (v, rr) in values.iter_mut().zip(r2) {
            let phi_next = (step.i_pi_wnext * *rr).exp();
            let phi_here = (step.i_pi_w * *rr).exp();
            *v = eps * step.factor * (*v - phi_next) + phi_here;
        }
    }
}

/// F_k^eps at any point of the upper half-plane, by reduction to the
/// fundamental domain and repeated application of the functional equation.
pub fn f_eval_any(
    k: HalfInt,
    sign_f: Sign,
    tau: HalfPlanePoint,
    r: f64,
    quad_cfg: QuadratureConfig,
) -> Result<FValue> {
    let red = reduce_to_fd(tau)?;
    let tau_side = TauSide::at_fd(red.z, QSeriesConfig::default())?;
    let (mut vals, err, level) = f_arc_multi(k, sign_f, &tau_side, &[r], quad_cfg)?;
    let steps = descent_steps(k, &red.steps);
    descend(&mut vals, &[r * r], &steps, sign_f);
    Ok(FValue {
        value: vals[0],
        error_estimate: err,
        level,
    })
}

/// Vectorized shifted-contour evaluation for a point in the closure of the
/// fundamental domain, including points on the unit circle itself, where the
/// semicircle representation degenerates (the pole sits on the contour). All
/// three shifted pieces stay away from the orbit of tau as long as tau is
/// not too close to the cusps.
fn f_shifted_multi(
    k: HalfInt,
    sign_f: Sign,
    tau: HalfPlanePoint,
    rs: &[f64],
    quad_cfg: QuadratureConfig,
) -> Result<(Vec<Complex64>, f64)> {
    let qcfg = QSeriesConfig::default();
    let nu_eps = nu_mu(k).nu(sign_f);
    let two_k = 2.0 * k.as_f64();
    let tau_side = TauSide::at_fd(tau, qcfg)?;
    let y = tau.im().max(1.0) + 1.5;
    let r2: Vec<f64> = rs.iter().map(|r| r * r).collect();
    let probes: Vec<usize> = {
        let mut p = vec![0usize];
        if rs.len() > 2 {
            p.push(rs.len() / 2);
        }
        if rs.len() > 1 {
            p.push(rs.len() - 1);
        }
        p
    };

    // Term 1: residue at z = tau (analytic continuation through the arc).
    let i_pi_tau = Complex64::new(0.0, PI) * tau.as_complex();
    let term1: Vec<Complex64> = r2.iter().map(|rr| (i_pi_tau * rr).exp()).collect();

    // Term 2: vertical line z = 1 + it over (0, y), double-exponential in t.
    let sin_pi_r2: Vec<f64> = r2.iter().map(|rr| (PI * rr).sin()).collect();
    let mut term2 = vec![Complex64::new(0.0, 0.0); rs.len()];
    let mut err2 = 0.0;
    if sin_pi_r2.iter().any(|s| s.abs() > 1e-16) {
        let half = y / 2.0;
        let mut totals = vec![Complex64::new(0.0, 0.0); rs.len()];
        let mut prev: Option<Vec<Complex64>> = None;
        let mut last_err = f64::INFINITY;
        for level in 0..=11usize {
            let mut new_sum = vec![Complex64::new(0.0, 0.0); rs.len()];
            for node in quad::de_level(level) {
                let t = if node.x <= 0.0 {
                    half * node.endpoint_gap
                } else {
                    y - half * node.endpoint_gap
                };
                if t <= 0.0 || t >= y {
                    continue;
                }
                let logs = if t < qcfg.min_im_direct {
                    match modular::theta_logs_cusp_from(Complex64::new(0.0, 1.0 / t), 1.0, qcfg)
                    {
                        Ok(l) => l,
                        Err(_) => continue,
                    }
                } else {
                    theta_logs_fd(HalfPlanePoint::new(1.0, t)?, qcfg)?
                };
                let z_side = TauSide::from_logs(&logs);
                let kv = match kernel(two_k, nu_eps, sign_f, &tau_side, &z_side, 1e-13) {
                    Ok(v) => v,
                    Err(_) => continue,
                };
                let w = half * node.w;
                for (i, rr) in r2.iter().enumerate() {
                    new_sum[i] += w * kv * (-PI * t * rr).exp();
                }
            }
            for (tt, nn) in totals.iter_mut().zip(&new_sum) {
                *tt = if level == 0 { *nn } else { 0.5 * *tt + nn };
            }
            if let Some(p) = &prev {
                let err = probes
                    .iter()
                    .map(|&i| (totals[i] - p[i]).norm() / (1.0 + totals[i].norm()))
                    .fold(0.0f64, f64::max);
                if err <= quad_cfg.target || (err > 0.5 * last_err && err < 1e-9) {
                    last_err = err;
                    break;
                }
                last_err = err;
            }
            prev = Some(totals.clone());
        }
        err2 = if last_err.is_finite() { last_err } else { 0.0 };
        for (i, s) in sin_pi_r2.iter().enumerate() {
            term2[i] = s * totals[i];
        }
    }

    // Term 3: periodic horizontal segment at height y, trapezoid doubling.
    let mut m = 32usize;
    let mut prev: Option<Vec<Complex64>> = None;
    let mut term3 = vec![Complex64::new(0.0, 0.0); rs.len()];
    let mut err3 = f64::INFINITY;
    loop {
        let mut acc = vec![Complex64::new(0.0, 0.0); rs.len()];
        for j in 0..m {
            let x = -1.0 + 2.0 * (j as f64 + 0.5) / m as f64;
            let z = Complex64::new(x, y);
            let z_side = TauSide::at_fd(HalfPlanePoint::from_complex(z)?, qcfg)?;
            let kv = kernel(two_k, nu_eps, sign_f, &tau_side, &z_side, 1e-13)?;
            let i_pi_z = Complex64::new(0.0, PI) * z;
            for (i, rr) in r2.iter().enumerate() {
                acc[i] += kv * (i_pi_z * rr).exp();
            }
        }
        let scale = 1.0 / m as f64;
        let vals: Vec<Complex64> = acc.iter().map(|v| v * scale).collect();
        if let Some(p) = &prev {
            let err = probes
                .iter()
                .map(|&i| (vals[i] - p[i]).norm() / (1.0 + vals[i].norm()))
                .fold(0.0f64, f64::max);
            if err <= quad_cfg.target || m >= 4096 {
                term3 = vals;
                err3 = err;
                break;
            }
        }
        prev = Some(vals);
        m *= 2;
    }

    let out: Vec<Complex64> = (0..rs.len())
        .map(|i| term1[i] + term2[i] + term3[i])
        .collect();
    Ok((out, err2 + err3))
}

/// F_k^eps by the shifted-contour representation: explicit Gaussian term,
/// vertical-line integral at Re z = 1, and a horizontal segment at height y.
/// Serves as the independent oracle for `f_eval`.
pub fn f_eval_shifted(
    k: HalfInt,
    sign_f: Sign,
    tau: HalfPlanePoint,
    r: f64,
    y: f64,
    quad_cfg: QuadratureConfig,
) -> Result<FValue> {
    if y <= tau.im().max(1.0) {
        return Err(Error::Validation(format!(
            "shift height {y} must exceed max(im tau, 1)"
        )));
    }
    let qcfg = QSeriesConfig::default();
    let nm = nu_mu(k);
    let nu_eps = nm.nu(sign_f);
    let two_k = 2.0 * k.as_f64();
    let tau_side = TauSide::at_fd(tau, qcfg)?;
    let r2 = r * r;

    // Term 1: residue at z = tau.
    let term1 = (Complex64::new(0.0, PI) * tau.as_complex() * r2).exp();

    // Term 2: vertical line z = 1 + it, weight sin(pi r^2) e^{-pi t r^2}.
    let sin_pi_r2 = (PI * r2).sin();
    let mut err2 = 0.0;
    let term2 = if sin_pi_r2.abs() < 1e-16 {
        Complex64::new(0.0, 0.0)
    } else {
        let out = tanh_sinh_gap(
            |p| {
                let t = p.from_left.max(1e-290);
                let logs = if t < qcfg.min_im_direct {
                    // z = 1 + it exactly: the cusp uniformizer is i/t
                    let zt = Complex64::new(0.0, 1.0 / t);
                    match modular::theta_logs_cusp_from(zt, 1.0, qcfg) {
                        Ok(l) => l,
                        Err(_) => return Complex64::new(0.0, 0.0),
                    }
                } else {
                    match HalfPlanePoint::new(1.0, t).and_then(|z| theta_logs_fd(z, qcfg)) {
                        Ok(l) => l,
                        Err(_) => return Complex64::new(0.0, 0.0),
                    }
                };
                let z_side = TauSide::from_logs(&logs);
                match kernel(two_k, nu_eps, sign_f, &tau_side, &z_side, 1e-13) {
                    Ok(kv) => kv * (-PI * t * r2).exp(),
                    Err(_) => Complex64::new(0.0, 0.0),
                }
            },
            0.0,
            y,
            quad_cfg.target,
            11,
        )?;
        err2 = out.error_estimate;
        sin_pi_r2 * out.value
    };

    // Term 3: horizontal segment from iy - 1 to iy + 1; the integrand is
    // 2-periodic and analytic, so the trapezoid rule converges geometrically.
    let mut m = 32usize;
    let mut prev: Option<Complex64> = None;
    let term3;
    #[allow(unused_assignments)]
    let mut err3 = f64::INFINITY;
    loop {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..m {
            let x = -1.0 + 2.0 * (j as f64 + 0.5) / m as f64;
            let z = Complex64::new(x, y);
            let z_side = TauSide::at_fd(HalfPlanePoint::from_complex(z)?, qcfg)?;
            let kv = kernel(two_k, nu_eps, sign_f, &tau_side, &z_side, 1e-13)?;
            acc += kv * (Complex64::new(0.0, PI) * z * r2).exp();
        }
        let val = acc / m as f64; // (1/2) * integral with dz = dx, length 2
        if let Some(p) = prev {
            let step_err = (val - p).norm();
            err3 = step_err;
            if step_err <= quad_cfg.target * (1.0 + val.norm()) || m >= 4096 {
                term3 = val;
                break;
            }
        }
        prev = Some(val);
        m *= 2;
    }

    Ok(FValue {
        value: term1 + term2 + term3,
        error_estimate: err2 + err3,
        level: 0,
    })
}

/// Height policy for coefficient extraction.
#[derive(Debug, Clone, Copy)]
pub enum HeightPolicy {
    /// y = clamp(8 / (pi (n_max + 1)), 0.05, 0.5): the error amplification
    /// e^{pi n y} stays at most e^8 at the top index while the suppressed
    /// coefficients still decay inside the sampling window.
    Auto,
    Fixed(f64),
}

impl HeightPolicy {
    pub fn height(self, n_max: usize) -> f64 {
        match self {
            HeightPolicy::Fixed(y) => y,
            HeightPolicy::Auto => (8.0 / (PI * (n_max as f64 + 1.0))).clamp(0.05, 0.5),
        }
    }
}

/// Metadata recorded alongside a coefficient table.
#[derive(Debug, Clone)]
pub struct TableMeta {
    pub y: f64,
    pub m_samples: usize,
    pub max_im_residue: f64,
    pub max_quad_error: f64,
    pub suppressed_top_ratio: f64,
    pub quad_target: f64,
    pub nudged_rows: usize,
}

/// Sampled values of one family b_{k,n}^{sign} over a radial grid.
#[derive(Debug, Clone)]
pub struct BasisTable {
    pub k: HalfInt,
    /// Label of the stored coefficients (the generating function has the
    /// opposite sign).
    pub sign: Sign,
    pub n_max: usize,
    pub r_grid: Vec<f64>,
    /// values[n][i] = b_{k,n}^{sign}(r_grid[i])
    pub values: Vec<Vec<f64>>,
    pub meta: TableMeta,
}

impl BasisTable {
    /// First index that may be nonzero: nu_{-sign}(k).
    pub fn first_index(&self) -> i64 {
        nu_mu(self.k).nu(self.sign.flip())
    }
}

fn choose_samples(k: HalfInt, n_max: usize, y: f64) -> usize {
    let kf = k.as_f64();
    let mut m = (8 * (n_max + 1)).max(64);
    // push aliasing from the n_max + M coefficient below 1e-13
    loop {
        let alias = (kf + 2.0) * ((n_max + m) as f64).ln() - PI * m as f64 * y;
        if alias < -30.0 || m > 1 << 20 {
            break;
        }
        m += m / 2;
    }
    m + (m % 2) // even so the symmetric offset pairs nodes exactly
}

/// Extract the coefficient table b_{k,n}^{sign} for n <= n_max at the radii
/// in `r_grid`, by sampling F_k^{-sign} on a horizontal segment and taking a
/// discrete Fourier transform in the periodic variable.
pub fn coefficients(
    k: HalfInt,
    sign: Sign,
    r_grid: &[f64],
    n_max: usize,
    policy: HeightPolicy,
    quad_cfg: QuadratureConfig,
) -> Result<BasisTable> {
    if r_grid.is_empty() {
        return Err(Error::Validation("empty radial grid".into()));
    }
    let sign_f = sign.flip();
    let y = policy.height(n_max);
    if !(y > 0.0 && y < 4.0) {
        return Err(Error::Validation(format!("extraction height {y} invalid")));
    }
    let m = choose_samples(k, n_max, y);
    let r2: Vec<f64> = r_grid.iter().map(|r| r * r).collect();

    struct Row {
        f: Vec<Complex64>,
        x: f64,
        quad_err: f64,
        nudged: bool,
    }

    // Evaluate F on the segment. A row whose reduced point sits on (or next
    // to) the unit circle falls back to the shifted-contour representation;
    // the last resort is a nudge of the abscissa, carried into the DFT phase.
    let rows: Vec<Result<Row>> = (0..m)
        .into_par_iter()
        .map(|j| {
            let x0 = -1.0 + (2.0 * j as f64 + 1.0) / m as f64;
            let mut last_err = None;
            for nudge in [0.0, 2e-9, -2e-9, 8e-9, -8e-9, 3e-7, -3e-7] {
                let x = x0 + nudge;
                let tau = HalfPlanePoint::new(x, y)?;
                let attempt = (|| -> Result<(Vec<Complex64>, f64)> {
                    let red = reduce_to_fd(tau)?;
                    let steps = descent_steps(k, &red.steps);
                    let arc = (|| -> Result<(Vec<Complex64>, f64)> {
                        let tau_side = TauSide::at_fd(red.z, QSeriesConfig::default())?;
                        let (vals, err, _) = f_arc_multi(k, sign_f, &tau_side, r_grid, quad_cfg)?;
                        Ok((vals, err))
                    })();
                    let (mut vals, err) = match arc {
                        Ok(v) => v,
                        Err(e) => {
                            if red.z.re().abs() <= 0.85 {
                                f_shifted_multi(k, sign_f, red.z, r_grid, quad_cfg)?
                            } else {
                                return Err(e);
                            }
                        }
                    };
                    descend(&mut vals, &r2, &steps, sign_f);
                    Ok((vals, err))
                })();
                match attempt {
                    Ok((f, quad_err)) => {
                        return Ok(Row {
                            f,
                            x,
                            quad_err,
                            nudged: nudge != 0.0,
                        })
                    }
                    Err(e) => last_err = Some(e),
                }
            }
            Err(last_err.unwrap())
        })
        .collect();

    let mut f_rows = Vec::with_capacity(m);
    for row in rows {
        f_rows.push(row?);
    }
    let max_quad_error = f_rows.iter().map(|r| r.quad_err).fold(0.0, f64::max);
    let nudged_rows = f_rows.iter().filter(|r| r.nudged).count();

    // DFT over the periodic variable, pairing mirror nodes so the structural
    // conjugate symmetry F(-x + iy) = conj F(x + iy) cancels imaginary parts
    // exactly instead of amplifying them by e^{pi n y}.
    let mut values = vec![vec![0.0f64; r_grid.len()]; n_max + 1];
    let mut suppressed_scale = vec![0.0f64; n_max + 1];
    let mut max_im_residue = 0.0f64;
    for n in 0..=n_max {
        let amp = (PI * n as f64 * y).exp();
        let mut acc = vec![Complex64::new(0.0, 0.0); r_grid.len()];
        for j in 0..m / 2 {
            let jr = m - 1 - j;
            let pl = (-Complex64::new(0.0, PI * n as f64 * f_rows[j].x)).exp();
            let pr = (-Complex64::new(0.0, PI * n as f64 * f_rows[jr].x)).exp();
            for (i, a) in acc.iter_mut().enumerate() {
                *a += f_rows[j].f[i] * pl + f_rows[jr].f[i] * pr;
            }
        }
        let scale = 1.0 / m as f64;
        let mut mean_abs = 0.0;
        for (i, a) in acc.iter().enumerate() {
            let suppressed = *a * scale;
            mean_abs += suppressed.norm();
            let b = suppressed * amp;
            values[n][i] = b.re;
            max_im_residue = max_im_residue.max(b.im.abs());
        }
        suppressed_scale[n] = mean_abs / r_grid.len() as f64;
    }

    // Aliasing guard: the suppressed coefficients must decay across the top
    // of the window.
    let suppressed_top_ratio = if n_max >= 8 {
        let peak = suppressed_scale.iter().cloned().fold(0.0, f64::max);
        let top = suppressed_scale[n_max - n_max / 8..]
            .iter()
            .cloned()
            .fold(0.0, f64::max);
        if peak > 0.0 {
            top / peak
        } else {
            0.0
        }
    } else {
        0.0
    };
    if suppressed_top_ratio > 0.5 {
        return Err(Error::AliasingSuspected {
            ratio: suppressed_top_ratio,
        });
    }

    Ok(BasisTable {
        k,
        sign,
        n_max,
        r_grid: r_grid.to_vec(),
        values,
        meta: TableMeta {
            y,
            m_samples: m,
            max_im_residue,
            max_quad_error,
            suppressed_top_ratio,
            quad_target: quad_cfg.target,
            nudged_rows,
        },
    })
}

/// Half-sum and half-difference of the two sign tables:
/// a = (b^+ + b^-)/2, a~ = (b^+ - b^-)/2.
pub fn assemble_a(plus: &BasisTable, minus: &BasisTable) -> Result<(BasisTable, BasisTable)> {
    if plus.sign != Sign::Plus || minus.sign != Sign::Minus {
        return Err(Error::GridMismatch("tables must be labeled +, -".into()));
    }
    if plus.k != minus.k || plus.n_max != minus.n_max {
        return Err(Error::GridMismatch(format!(
            "k or n_max differ: ({}, {}) vs ({}, {})",
            plus.k, plus.n_max, minus.k, minus.n_max
        )));
    }
    if plus.r_grid.len() != minus.r_grid.len()
        || plus
            .r_grid
            .iter()
            .zip(&minus.r_grid)
            .any(|(a, b)| (a - b).abs() > 1e-15)
    {
        return Err(Error::GridMismatch("radial grids differ".into()));
    }
    let build = |sum: bool| -> BasisTable {
        let values = plus
            .values
            .iter()
            .zip(&minus.values)
            .map(|(p, m)| {
                p.iter()
                    .zip(m)
                    .map(|(a, b)| if sum { (a + b) / 2.0 } else { (a - b) / 2.0 })
                    .collect()
            })
            .collect();
        BasisTable {
            k: plus.k,
            sign: if sum { Sign::Plus } else { Sign::Minus },
            n_max: plus.n_max,
            r_grid: plus.r_grid.clone(),
            values,
            meta: TableMeta {
                max_im_residue: plus.meta.max_im_residue.max(minus.meta.max_im_residue),
                max_quad_error: plus.meta.max_quad_error.max(minus.meta.max_quad_error),
                ..plus.meta.clone()
            },
        }
    };
    Ok((build(true), build(false)))
}

/// g~(beta) = max(1, (beta / 2 pi e)^{beta/2}).
pub fn g_tilde(beta: f64) -> f64 {
    (beta / (2.0 * PI * std::f64::consts::E))
        .powf(beta / 2.0)
        .max(1.0)
}

/// Per-index row of a decay-bound report.
#[derive(Debug, Clone)]
pub struct BoundRow {
    pub n: usize,
    /// measured sup_r (1 + r^beta) |b_{k,n}(r)| over both sign tables
    pub sup_weighted: f64,
    /// (1+n)^{beta/2 + k + 1} Gamma(beta/2 - k + 1) g~(beta)
    pub shape: f64,
    pub ratio: f64,
    /// fitted exponential rate c in |b| <= C (n+1)^{k+1} e^{-c r / sqrt(n+1)}
    pub fitted_rate: Option<f64>,
}

/// Decay-bound report for a pair of sign tables at a given rate beta.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub k: HalfInt,
    pub beta: f64,
    pub g_tilde: f64,
    pub rows: Vec<BoundRow>,
    /// max ratio over the calibration half n <= n_max/2
    pub fitted_constant: f64,
    /// indices beyond the calibration half whose ratio exceeds the fitted
    /// constant by more than 5%
    pub flagged: Vec<usize>,
}

/// Measure sup_r (1 + r^beta)|b| per index against the polynomial shape, and
/// fit the exponential decay rate on the tail.
pub fn bound_report(
    k: HalfInt,
    beta: f64,
    plus: &BasisTable,
    minus: &BasisTable,
) -> Result<BoundReport> {
    let kf = k.as_f64();
    if beta < 2.0 * kf + 2.0 {
        return Err(Error::Validation(format!(
            "beta = {beta} below 2k + 2 = {}",
            2.0 * kf + 2.0
        )));
    }
    if plus.r_grid.len() < 16 {
        return Err(Error::GridTooShort("need at least 16 radii".into()));
    }
    let gt = g_tilde(beta);
    let gamma_factor = crate::special::gamma(beta / 2.0 - kf + 1.0);
    let mut rows = Vec::new();
    for n in 0..=plus.n_max {
        let mut sup = 0.0f64;
        let mut interior_max = false;
        for table in [plus, minus] {
            let mut best = 0.0;
            let mut best_i = 0;
            for (i, (&r, &v)) in table.r_grid.iter().zip(&table.values[n]).enumerate() {
                let w = (1.0 + r.powf(beta)) * v.abs();
                if w > best {
                    best = w;
                    best_i = i;
                }
            }
            if best_i + 1 < table.r_grid.len() {
                interior_max = true;
            }
            sup = sup.max(best);
        }
        if sup > 1e-11 && !interior_max {
            return Err(Error::GridTooShort(format!(
                "(1 + r^beta)|b_{n}| has no interior maximum on the grid"
            )));
        }
        let shape =
            ((n + 1) as f64).powf(beta / 2.0 + kf + 1.0) * gamma_factor * gt;
        let fitted_rate = fit_exponential_rate(plus, minus, n);
        rows.push(BoundRow {
            n,
            sup_weighted: sup,
            shape,
            ratio: sup / shape,
            fitted_rate,
        });
    }
    let half = plus.n_max / 2;
    let fitted_constant = rows[..=half]
        .iter()
        .map(|r| r.ratio)
        .fold(0.0f64, f64::max);
    let flagged = rows[half + 1..]
        .iter()
        .filter(|r| r.ratio > fitted_constant * 1.05)
        .map(|r| r.n)
        .collect();
    Ok(BoundReport {
        k,
        beta,
        g_tilde: gt,
        rows,
        fitted_constant,
        flagged,
    })
}

/// Least-squares fit of log|b_n(r)| against -c r / sqrt(n+1) over the tail
/// beyond the peak; returns None when too few tail points rise above the
/// noise floor.
fn fit_exponential_rate(plus: &BasisTable, minus: &BasisTable, n: usize) -> Option<f64> {
    let grid = &plus.r_grid;
    let scale = ((n + 1) as f64).sqrt();
    let mut peak_i = 0;
    let mut peak = 0.0;
    let combined: Vec<f64> = (0..grid.len())
        .map(|i| plus.values[n][i].abs().max(minus.values[n][i].abs()))
        .collect();
    for (i, &v) in combined.iter().enumerate() {
        if v > peak {
            peak = v;
            peak_i = i;
        }
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in peak_i..grid.len() {
        let v = combined[i];
        if v > 1e-13 && grid[i] > grid[peak_i] + 0.5 {
            xs.push(grid[i] / scale);
            ys.push(v.ln());
        }
    }
    if xs.len() < 8 {
        return None;
    }
    let nf = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let slope = (nf * sxy - sx * sy) / (nf * sxx - sx * sx);
    Some(-slope)
}

/// Default radial grid: `points` radii graded quadratically on [0, r_max].
pub fn default_r_grid(r_max: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|j| r_max * (j as f64 / (points - 1) as f64).powi(2))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pt(re: f64, im: f64) -> HalfPlanePoint {
        HalfPlanePoint::new(re, im).unwrap()
    }

    fn k_half() -> HalfInt {
        HalfInt::from_twice(1)
    }

    #[test]
    fn kernel_finite_off_pole() {
        let qcfg = QSeriesConfig::default();
        let v = kernel_k(k_half(), Sign::Plus, pt(0.0, 2.0), pt(0.0, 1.0), qcfg).unwrap();
        assert!(v.norm().is_finite());
        assert!(v.norm() > 0.0);
    }

    #[test]
    fn kernel_pole_detected() {
        let qcfg = QSeriesConfig::default();
        let err = kernel_k(k_half(), Sign::Plus, pt(0.0, 1.3), pt(0.0, 1.3), qcfg);
        assert!(matches!(err, Err(Error::PoleProximity { .. })));
    }

    #[test]
    fn kernel_log_route_matches_plain_quotients() {
        // Assemble the kernel from plain theta/J values at a safe point and
        // compare with the log-space product.
        let qcfg = QSeriesConfig::default();
        let tau = pt(0.2, 1.7);
        let z = pt(-0.3, 1.1);
        let k = HalfInt::from_twice(3); // k = 3/2
        let nm = nu_mu(k);
        for sign in [Sign::Plus, Sign::Minus] {
            let log_route = kernel_k(k, sign, tau, z, qcfg).unwrap();
            let (lt, jt, jmt) = modular::lambda_j(tau, qcfg).unwrap();
            let (_, jz, jmz) = modular::lambda_j(z, qcfg).unwrap();
            let _ = lt;
            let t3t = modular::theta(modular::ThetaKind::Theta3, tau, qcfg).unwrap();
            let t3z = modular::theta(modular::ThetaKind::Theta3, z, qcfg).unwrap();
            let theta_ratio = (t3t / t3z).powf(2.0 * k.as_f64());
            let nu = nm.nu(sign);
            let jprime = -Complex64::new(0.0, PI) * jmz * jz * t3z.powu(4);
            let mut plain = jprime / (Complex64::new(0.0, PI) * (jz - jt))
                * theta_ratio
                * (jz / jt).powi(nu as i32 - 1);
            if sign == Sign::Minus {
                plain *= jmt / jmz;
            }
            assert!(
                (log_route - plain).norm() <= 1e-10 * plain.norm(),
                "kernel mismatch for {sign:?}: {log_route} vs {plain}"
            );
        }
    }

    #[test]
    fn f_two_periodic() {
        let quad_cfg = QuadratureConfig::default();
        let a = f_eval(k_half(), Sign::Plus, pt(0.3, 1.6), 1.1, quad_cfg).unwrap();
        let b = f_eval_any(k_half(), Sign::Plus, pt(2.3, 1.6), 1.1, quad_cfg).unwrap();
        assert!((a.value - b.value).norm() <= 1e-9 * (1.0 + a.value.norm()));
    }

    #[test]
    fn f_matches_shifted_oracle() {
        let quad_cfg = QuadratureConfig::default();
        // spec point: tau = 3i, r = 2, k = 1, eps = -
        let k1 = HalfInt::from_twice(2);
        let semi = f_eval(k1, Sign::Minus, pt(0.0, 3.0), 2.0, quad_cfg).unwrap();
        let shifted = f_eval_shifted(k1, Sign::Minus, pt(0.0, 3.0), 2.0, 4.5, quad_cfg).unwrap();
        assert!(
            (semi.value - shifted.value).norm() <= 1e-8 * (1.0 + semi.value.norm()),
            "{} vs {}",
            semi.value,
            shifted.value
        );
        // and a second spread of points
        for (x, y, r) in [(0.4, 1.4, 0.7), (-0.2, 2.2, 1.4142135623730951)] {
            for sign in [Sign::Plus, Sign::Minus] {
                let a = f_eval(k_half(), sign, pt(x, y), r, quad_cfg).unwrap();
                let b =
                    f_eval_shifted(k_half(), sign, pt(x, y), r, y + 1.5, quad_cfg).unwrap();
                assert!(
                    (a.value - b.value).norm() <= 1e-8 * (1.0 + a.value.norm()),
                    "mismatch at ({x},{y},{r}) {sign:?}: {} vs {}",
                    a.value,
                    b.value
                );
            }
        }
    }

    #[test]
    fn f_real_on_imaginary_axis_by_shifted_route() {
        let quad_cfg = QuadratureConfig::default();
        let v = f_eval_shifted(k_half(), Sign::Plus, pt(0.0, 1.5), 0.8, 3.0, quad_cfg).unwrap();
        assert!(v.value.im.abs() < 1e-9 * (1.0 + v.value.re.abs()));
        let w = f_eval(k_half(), Sign::Minus, pt(0.0, 1.5), 0.8, quad_cfg).unwrap();
        assert!(w.value.im.abs() < 1e-9 * (1.0 + w.value.re.abs()));
    }

    #[test]
    fn functional_equation_single_step() {
        // F(tau) - eps (tau/i)^{-k} F(-1/tau) = phi_r(tau) - eps (tau/i)^{-k} phi_r(-1/tau)
        // with F(-1/tau) evaluated through the shifted oracle route at the
        // reduced point, keeping the two sides independent.
        let quad_cfg = QuadratureConfig::default();
        let k = k_half();
        let tau = pt(0.0, 2.0);
        let r = 1.0;
        for sign in [Sign::Plus, Sign::Minus] {
            let eps = sign.value();
            let f_tau = f_eval_shifted(k, sign, tau, r, 3.5, quad_cfg).unwrap().value;
            let minus_inv = tau.inverted().unwrap();
            let f_inv = f_eval_any(k, sign, minus_inv, r, quad_cfg).unwrap().value;
            let aut = (-k.as_f64() * log_z_over_i(tau.as_complex())).exp();
            let phi = |z: Complex64| (Complex64::new(0.0, PI) * z * (r * r)).exp();
            let lhs = f_tau - eps * aut * f_inv;
            let rhs = phi(tau.as_complex()) - eps * aut * phi(minus_inv.as_complex());
            assert!(
                (lhs - rhs).norm() <= 1e-8 * (1.0 + f_tau.norm()),
                "functional equation residual {} for {sign:?}",
                (lhs - rhs).norm()
            );
        }
    }

    #[test]
    fn kronecker_structure_d1() {
        // a_{1/2,n}(sqrt m) = delta_{nm} for m >= 1. The m = 0 column cannot
        // be a Kronecker delta: Poisson summation forces every -1
        // eigenfunction with b(sqrt m) = delta_{nm} at the positive nodes to
        // carry b(0) = -2 when n is a perfect square, so
        // a_n(0) = -[n square >= 1] and a_0(0) = 1/2.
        let quad_cfg = QuadratureConfig::default();
        let n_max = 8;
        let radii: Vec<f64> = (0..=8).map(|m| (m as f64).sqrt()).collect();
        let plus = coefficients(
            k_half(),
            Sign::Plus,
            &radii,
            n_max,
            HeightPolicy::Auto,
            quad_cfg,
        )
        .unwrap();
        let minus = coefficients(
            k_half(),
            Sign::Minus,
            &radii,
            n_max,
            HeightPolicy::Auto,
            quad_cfg,
        )
        .unwrap();
        // per-sign structure: b^+ is Kronecker everywhere, b^- away from 0
        for n in 0..=n_max {
            for m in 0..=8 {
                let d = if n == m { 1.0 } else { 0.0 };
                assert!(
                    (plus.values[n][m] - d).abs() <= 1e-6,
                    "b+_{n}(sqrt {m}) = {} != {d}",
                    plus.values[n][m]
                );
                let dm = if m == 0 {
                    let sq = (n as f64).sqrt().round() as usize;
                    if n >= 1 && sq * sq == n {
                        -2.0
                    } else {
                        0.0
                    }
                } else {
                    d
                };
                assert!(
                    (minus.values[n][m] - dm).abs() <= 1e-6,
                    "b-_{n}(sqrt {m}) = {} != {dm}",
                    minus.values[n][m]
                );
            }
        }
        let (a, atilde) = assemble_a(&plus, &minus).unwrap();
        let mut worst = 0.0f64;
        for n in 0..=n_max {
            for m in 1..=8 {
                let expect = if n == m { 1.0 } else { 0.0 };
                worst = worst.max((a.values[n][m] - expect).abs());
                worst = worst.max(atilde.values[n][m].abs());
            }
        }
        assert!(worst <= 1e-6, "Kronecker deviation {worst} exceeds 1e-6");
    }

    #[test]
    fn vanishing_below_nu_and_real() {
        let quad_cfg = QuadratureConfig::default();
        let k = HalfInt::from_twice(4); // k = 2, d = 4
        let radii = default_r_grid(6.0, 60);
        for sign in [Sign::Plus, Sign::Minus] {
            let table = coefficients(k, sign, &radii, 6, HeightPolicy::Auto, quad_cfg).unwrap();
            assert!(table.meta.max_im_residue <= 1e-9, "im residue too large");
            let first = table.first_index() as usize;
            assert!(first >= 1, "k = 2 must have a vanishing index");
            for n in 0..first {
                let max = table.values[n].iter().fold(0.0f64, |a, &v| a.max(v.abs()));
                assert!(
                    max <= 1e-9,
                    "b_{{2,{n}}}^{:?} should vanish, max {max}",
                    sign
                );
            }
        }
    }

    #[test]
    fn height_independence_small_n() {
        let quad_cfg = QuadratureConfig::default();
        let radii = vec![0.0, 0.9, 1.7];
        let t1 = coefficients(
            k_half(),
            Sign::Plus,
            &radii,
            2,
            HeightPolicy::Fixed(1.5),
            quad_cfg,
        )
        .unwrap();
        let t2 = coefficients(
            k_half(),
            Sign::Plus,
            &radii,
            2,
            HeightPolicy::Fixed(2.5),
            quad_cfg,
        )
        .unwrap();
        for n in 0..=2 {
            for i in 0..radii.len() {
                assert!(
                    (t1.values[n][i] - t2.values[n][i]).abs() <= 1e-8,
                    "height dependence at n={n}, r={}: {} vs {}",
                    radii[i],
                    t1.values[n][i],
                    t2.values[n][i]
                );
            }
        }
    }

    #[test]
    fn g_tilde_values() {
        assert_abs_diff_eq!(g_tilde(2.0 * PI * std::f64::consts::E), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g_tilde(3.0), 1.0, epsilon = 1e-12);
        assert!(g_tilde(40.0) > 1.0);
    }

    #[test]
    fn bound_shape_monotone_in_n() {
        let quad_cfg = QuadratureConfig::default();
        let radii = default_r_grid(8.0, 120);
        let plus = coefficients(k_half(), Sign::Plus, &radii, 6, HeightPolicy::Auto, quad_cfg)
            .unwrap();
        let minus = coefficients(k_half(), Sign::Minus, &radii, 6, HeightPolicy::Auto, quad_cfg)
            .unwrap();
        let report = bound_report(k_half(), 3.0, &plus, &minus).unwrap();
        for w in report.rows.windows(2) {
            assert!(w[1].shape >= w[0].shape);
        }
        assert!(report.flagged.is_empty(), "flagged: {:?}", report.flagged);
        // fitted rates positive where the tail supports a fit
        for row in &report.rows[1..] {
            if let Some(rate) = row.fitted_rate {
                assert!(rate > 0.0, "fitted rate not positive at n = {}", row.n);
            }
        }
    }
}
