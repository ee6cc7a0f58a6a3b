//! Theta functions, the modular lambda invariant, J, and fundamental-domain
//! reduction for the theta group.
//!
//! All evaluations work on the upper half-plane. Points with small imaginary
//! part are reduced to the fundamental domain `|z| > 1, -1 < Re z < 1` first;
//! points in the domain but close to the cusps at -1 or 1 are pushed to large
//! imaginary part with the cusp uniformizer `-1/(z +- 1)` before summing the
//! q-series. Logarithms of theta are tracked so that powers `theta^{2k}` and
//! the automorphy factors never leave log space; this keeps kernel evaluation
//! stable deep in the cusp zones where the plain values under- or overflow.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Sign label for the two eigenspaces of the Fourier transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Sign::Plus => "+1",
            Sign::Minus => "-1",
        }
    }
}

/// Half-integer stored as twice its value, so floor/fraction arithmetic on
/// `(k+2)/4` and `(k+4)/4` is exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HalfInt {
    twice: i64,
}

impl HalfInt {
    pub fn from_twice(twice: i64) -> Self {
        HalfInt { twice }
    }

    /// Parse a half-integer from an f64, rejecting anything that is not an
    /// exact multiple of 1/2.
    pub fn try_from_f64(x: f64) -> Result<Self> {
        let twice = (2.0 * x).round();
        if !x.is_finite() || (2.0 * x - twice).abs() > 1e-9 {
            return Err(Error::Validation(format!("{x} is not a half-integer")));
        }
        Ok(HalfInt {
            twice: twice as i64,
        })
    }

    pub fn twice(self) -> i64 {
        self.twice
    }

    pub fn as_f64(self) -> f64 {
        self.twice as f64 / 2.0
    }

    /// Dimension `d = 2k` when this half-integer is used as a weight parameter.
    pub fn dimension(self) -> i64 {
        self.twice
    }
}

impl std::fmt::Display for HalfInt {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.twice % 2 == 0 {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

/// A point in the open upper half-plane, with its nome `q = exp(i pi z)`
/// cached at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlanePoint {
    re: f64,
    im: f64,
    q: Complex64,
}

impl HalfPlanePoint {
    pub fn new(re: f64, im: f64) -> Result<Self> {
        if !(im > 0.0) || !re.is_finite() || !im.is_finite() {
            return Err(Error::Validation(format!(
                "point {re} + {im}i is not in the upper half-plane"
            )));
        }
        let q = (Complex64::new(0.0, PI) * Complex64::new(re, im)).exp();
        Ok(HalfPlanePoint { re, im, q })
    }

    pub fn from_complex(z: Complex64) -> Result<Self> {
        Self::new(z.re, z.im)
    }

    pub fn re(self) -> f64 {
        self.re
    }

    pub fn im(self) -> f64 {
        self.im
    }

    pub fn q(self) -> Complex64 {
        self.q
    }

    pub fn as_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    /// Apply the inversion S: z -> -1/z.
    pub fn inverted(self) -> Result<Self> {
        let w = -Complex64::new(1.0, 0.0) / self.as_complex();
        Self::from_complex(w)
    }

    /// Translate by an even integer: z -> z + 2m.
    pub fn translated(self, two_m: i64) -> Result<Self> {
        Self::new(self.re + 2.0 * two_m as f64, self.im)
    }
}

/// Controls q-series truncation and the switch to modular reduction.
#[derive(Debug, Clone, Copy)]
pub struct QSeriesConfig {
    /// Target absolute error of a theta value.
    pub target_abs_error: f64,
    /// Hard cap on the number of series terms.
    pub max_terms: usize,
    /// Below this imaginary part the point is reduced before summation.
    pub min_im_direct: f64,
}

impl Default for QSeriesConfig {
    fn default() -> Self {
        QSeriesConfig {
            target_abs_error: 1e-15,
            max_terms: 256,
            min_im_direct: 0.5,
        }
    }
}

impl QSeriesConfig {
    /// Truncation index such that `exp(-pi N^2 im) < target`.
    fn terms_for(self, im: f64) -> Result<usize> {
        let needed = (-self.target_abs_error.ln() / (PI * im)).sqrt().ceil() as usize + 1;
        if needed > self.max_terms {
            return Err(Error::NonConvergence {
                target: self.target_abs_error,
                max_terms: self.max_terms,
                im,
            });
        }
        Ok(needed)
    }
}

/// Which theta function to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaKind {
    Theta2,
    Theta3,
    Theta4,
}

/// Logarithms of the three theta functions at one point.
///
/// The imaginary parts are *some* branch; only combinations in which the
/// branch cancels (even integer multiples, or exponentials of differences)
/// may be consumed, except for `log_t3` which carries the determination
/// continued from `i*infinity` and is safe for `theta^{2k}`.
#[derive(Debug, Clone, Copy)]
pub struct ThetaLogs {
    pub log_t2: Complex64,
    pub log_t3: Complex64,
    pub log_t4: Complex64,
}

impl ThetaLogs {
    /// log of the modular lambda invariant.
    pub fn log_lambda(&self) -> Complex64 {
        4.0 * (self.log_t2 - self.log_t3)
    }

    /// log of 1 - lambda, via the theta quotient that represents it exactly.
    pub fn log_one_minus_lambda(&self) -> Complex64 {
        4.0 * (self.log_t4 - self.log_t3)
    }

    /// log J = log 16 + 8 log t3 - 4 log t2 - 4 log t4.
    pub fn log_j(&self) -> Complex64 {
        Complex64::new((16.0f64).ln(), 0.0) + 8.0 * self.log_t3 - 4.0 * self.log_t2
            - 4.0 * self.log_t4
    }

    /// log of J_- = 1 - 2 lambda, stable for both tiny and huge lambda.
    pub fn log_j_minus(&self) -> Complex64 {
        let log_lam = self.log_lambda();
        if log_lam.re > 3.0 {
            // |lambda| large: 1 - 2 lambda = -2 lambda (1 - 1/(2 lambda))
            let inv = (-log_lam).exp() * 0.5;
            Complex64::new((2.0f64).ln(), PI) + log_lam + (1.0 - inv).ln()
        } else {
            let lam = log_lam.exp();
            (Complex64::new(1.0, 0.0) - 2.0 * lam).ln()
        }
    }
}

/// Principal log of z/i; z/i lies in the right half-plane for z in H, so the
/// principal branch never touches its cut.
pub fn log_z_over_i(z: Complex64) -> Complex64 {
    Complex64::new(z.im, -z.re).ln()
}

/// theta3 q-series; returns the sum `1 + 2 sum q^{n^2}`.
fn theta3_series(q: Complex64, terms: usize) -> Complex64 {
    let q2 = q * q;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut qpow = q; // q^{n^2}
    let mut step = q2; // q^{2n-1} updater: q^{(n+1)^2} = q^{n^2} * q^{2n+1}
    for _ in 1..=terms {
        acc += qpow;
        qpow *= step * q;
        step *= q2;
    }
    Complex64::new(1.0, 0.0) + 2.0 * acc
}

/// theta4 q-series: `1 + 2 sum (-1)^n q^{n^2}`.
fn theta4_series(q: Complex64, terms: usize) -> Complex64 {
    let q2 = q * q;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut qpow = q;
    let mut step = q2;
    let mut sign = -1.0;
    for _ in 1..=terms {
        acc += sign * qpow;
        qpow *= step * q;
        step *= q2;
        sign = -sign;
    }
    Complex64::new(1.0, 0.0) + 2.0 * acc
}

/// Reduced theta2 series: `sum_{n>=0} q^{n(n+1)}`, so that
/// `theta2 = 2 q^{1/4} * (this sum)`.
fn theta2_reduced_series(q: Complex64, terms: usize) -> Complex64 {
    let q2 = q * q;
    let mut acc = Complex64::new(1.0, 0.0); // n = 0 term
    let mut qpow = q2; // q^{n(n+1)} for n = 1
    let mut step = q2 * q2; // multiply by q^{2n} each increment
    for _ in 1..=terms {
        acc += qpow;
        qpow *= step;
        step *= q2;
    }
    acc
}

/// Theta logs by direct summation; valid branch-wise for any im > 0, and in
/// the determination sense whenever the series stays near 1 (im >= ~0.35).
fn theta_logs_direct(z: HalfPlanePoint, cfg: QSeriesConfig) -> Result<ThetaLogs> {
    let terms = cfg.terms_for(z.im())?;
    let q = z.q();
    let t3 = theta3_series(q, terms);
    let t4 = theta4_series(q, terms);
    let t2r = theta2_reduced_series(q, terms);
    let log_t2 = Complex64::new((2.0f64).ln(), 0.0)
        + Complex64::new(0.0, PI / 4.0) * z.as_complex()
        + t2r.ln();
    Ok(ThetaLogs {
        log_t2,
        log_t3: t3.ln(),
        log_t4: t4.ln(),
    })
}

/// Theta logs for a point of small imaginary part lying in (the closure of)
/// the fundamental domain, using the cusp uniformizer at -1 or +1.
///
/// For the cusp at -1 (`zt = -1/(z+1)`):
///   t3(z) = sqrt(zt/i) t2(zt),  t4(z) = sqrt(zt/i) t3(zt),
///   t2(z) = e^{-i pi/4} sqrt(zt/i) t4(zt).
/// For the cusp at +1 (`zt = -1/(z-1)`) the same with `e^{+i pi/4}` on t2.
fn theta_logs_cusp(z: HalfPlanePoint, cfg: QSeriesConfig) -> Result<ThetaLogs> {
    let side = if z.re() <= 0.0 { -1.0 } else { 1.0 };
    let shifted = z.as_complex() - Complex64::new(side, 0.0);
    let zt = -Complex64::new(1.0, 0.0) / shifted;
    if zt.im < cfg.min_im_direct {
        // Caller point is neither high nor near a cusp of the fundamental
        // domain; plain summation still converges.
        return theta_logs_direct(z, cfg);
    }
    theta_logs_cusp_from(zt, side, cfg)
}

/// Theta logs from a precomputed cusp uniformizer `zt = -1/(z - side)`.
/// Callers that know `z -+ 1` exactly (arc nodes, vertical contours) avoid
/// the cancellation of recomputing it from z.
pub(crate) fn theta_logs_cusp_from(
    zt: Complex64,
    side: f64,
    cfg: QSeriesConfig,
) -> Result<ThetaLogs> {
    let zt_pt = HalfPlanePoint::from_complex(zt)?;
    let inner = if zt_pt.im() >= cfg.min_im_direct {
        theta_logs_direct(zt_pt, cfg)?
    } else {
        return Err(Error::Validation(format!(
            "cusp uniformizer at height {} below direct threshold",
            zt_pt.im()
        )));
    };
    let half_log = 0.5 * log_z_over_i(zt);
    let phase = Complex64::new(0.0, side * PI / 4.0);
    Ok(ThetaLogs {
        log_t2: phase + half_log + inner.log_t4,
        log_t3: half_log + inner.log_t2,
        log_t4: half_log + inner.log_t3,
    })
}

/// Theta logs at a point assumed to lie in the closure of the fundamental
/// domain (or at least with either im large or a cusp neighborhood as the
/// only reason im is small).
pub fn theta_logs_fd(z: HalfPlanePoint, cfg: QSeriesConfig) -> Result<ThetaLogs> {
    if z.im() >= cfg.min_im_direct {
        theta_logs_direct(z, cfg)
    } else {
        theta_logs_cusp(z, cfg)
    }
}

/// One reduction move, recorded so the word can be replayed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReductionStep {
    /// z -> z - 2m was applied (m may be negative).
    Translate { m: i64 },
    /// z -> -1/z was applied at the stored point.
    Invert { at: Complex64 },
}

/// Result of reducing a point to the fundamental domain.
#[derive(Debug, Clone)]
pub struct ReductionResult {
    /// Representative in the closure of the fundamental domain.
    pub z: HalfPlanePoint,
    /// Moves applied to the input, in order.
    pub steps: Vec<ReductionStep>,
    /// `log theta(tau) - log theta(z)` accumulated along the reduction path
    /// (weight parameter 1; scale by 2k for weight k).
    pub log_j_theta: Complex64,
    /// Number of inversions; the character chi_eps of the word is
    /// `eps^{inversions}`.
    pub inversions: usize,
}

impl ReductionResult {
    /// Word letters in {S, T^2, T^-2} mapping the reduced point back to the
    /// original input.
    pub fn word(&self) -> Vec<&'static str> {
        let mut letters = Vec::new();
        // Steps were applied input -> reduced; the inverse word, applied to
        // the reduced point, replays them in reverse.
        for step in self.steps.iter().rev() {
            match step {
                ReductionStep::Invert { .. } => letters.push("S"),
                ReductionStep::Translate { m } => {
                    let letter = if *m < 0 { "T^2" } else { "T^-2" };
                    for _ in 0..m.unsigned_abs() {
                        letters.push(letter);
                    }
                }
            }
        }
        letters
    }

    /// Apply the word to the reduced point; reproduces the original input.
    pub fn apply_word(&self) -> Result<HalfPlanePoint> {
        let mut z = self.z;
        for step in self.steps.iter().rev() {
            z = match step {
                ReductionStep::Invert { .. } => z.inverted()?,
                ReductionStep::Translate { m } => z.translated(*m)?,
            };
        }
        Ok(z)
    }
}

const REDUCTION_LIMIT: usize = 4096;

/// Reduce a point to the closure of the fundamental domain, accumulating the
/// log automorphy factor of theta along the way.
pub fn reduce_to_fd(tau: HalfPlanePoint) -> Result<ReductionResult> {
    let mut z = tau;
    let mut steps = Vec::new();
    let mut log_j_theta = Complex64::new(0.0, 0.0);
    let mut inversions = 0usize;
    for _ in 0..REDUCTION_LIMIT {
        let m = ((z.re() + 1.0) / 2.0).floor() as i64;
        if m != 0 {
            z = z.translated(-m)?;
            steps.push(ReductionStep::Translate { m });
        }
        let abs2 = z.re() * z.re() + z.im() * z.im();
        if abs2 < 1.0 - 1e-15 {
            let at = z.as_complex();
            // theta(-1/z) = sqrt(z/i) theta(z): descending through S subtracts
            // half the principal log, which lies in (-pi/4, pi/4) and so can
            // never jump a branch.
            let half = 0.5 * log_z_over_i(at);
            if half.im.abs() >= PI {
                return Err(Error::BranchTrackingFailure { jump: half.im });
            }
            log_j_theta -= half;
            z = z.inverted()?;
            steps.push(ReductionStep::Invert { at });
            inversions += 1;
        } else {
            return Ok(ReductionResult {
                z,
                steps,
                log_j_theta,
                inversions,
            });
        }
    }
    Err(Error::IterationLimit {
        limit: REDUCTION_LIMIT,
    })
}

/// Evaluate a theta function anywhere on the upper half-plane.
pub fn theta(which: ThetaKind, z: HalfPlanePoint, cfg: QSeriesConfig) -> Result<Complex64> {
    if z.im() >= cfg.min_im_direct {
        let terms = cfg.terms_for(z.im())?;
        let q = z.q();
        return Ok(match which {
            ThetaKind::Theta3 => theta3_series(q, terms),
            ThetaKind::Theta4 => theta4_series(q, terms),
            ThetaKind::Theta2 => {
                let quarter = (Complex64::new(0.0, PI / 4.0) * z.as_complex()).exp();
                2.0 * quarter * theta2_reduced_series(q, terms)
            }
        });
    }
    let red = reduce_to_fd(z)?;
    let logs = theta_logs_fd(red.z, cfg)?;
    let mut t2 = logs.log_t2.exp();
    let mut t3 = logs.log_t3.exp();
    let mut t4 = logs.log_t4.exp();
    // Walk the reduction backwards, transforming the triple along each move.
    for step in red.steps.iter().rev() {
        match step {
            ReductionStep::Translate { m } => {
                // The stored move was w -> w - 2m; undoing it shifts by +2m,
                // multiplying theta2 by i^m.
                let phase = Complex64::new(0.0, PI / 2.0 * *m as f64).exp();
                t2 *= phase;
            }
            ReductionStep::Invert { at } => {
                // Values at w' = -1/w are known; we want them at w = `at`.
                // w = -1/w', so theta_x(w) = sqrt(w'/i) theta_swap(x)(w').
                let wp = -Complex64::new(1.0, 0.0) / at;
                let root = (0.5 * log_z_over_i(wp)).exp();
                let (n2, n3, n4) = (root * t4, root * t3, root * t2);
                t2 = n2;
                t3 = n3;
                t4 = n4;
            }
        }
    }
    Ok(match which {
        ThetaKind::Theta2 => t2,
        ThetaKind::Theta3 => t3,
        ThetaKind::Theta4 => t4,
    })
}

/// lambda, J and J_- at a point, with the internal Jacobi-identity check
/// `J * lambda * (1 - lambda) = 16`.
pub fn lambda_j(
    z: HalfPlanePoint,
    cfg: QSeriesConfig,
) -> Result<(Complex64, Complex64, Complex64)> {
    let (logs, steps) = if z.im() >= cfg.min_im_direct {
        (theta_logs_direct(z, cfg)?, Vec::new())
    } else {
        let red = reduce_to_fd(z)?;
        (theta_logs_fd(red.z, cfg)?, red.steps)
    };
    let mut lam = logs.log_lambda().exp();
    let j = logs.log_j().exp();
    // lambda transforms under the walk back: S swaps lambda <-> 1 - lambda,
    // T^2 leaves it alone. J is invariant under the theta group.
    for step in steps.iter().rev() {
        if let ReductionStep::Invert { .. } = step {
            lam = Complex64::new(1.0, 0.0) - lam;
        }
    }
    let j_minus = Complex64::new(1.0, 0.0) - 2.0 * lam;
    // Independent route for 1 - lambda tests the Jacobi identity
    // theta3^4 = theta2^4 + theta4^4 where magnitudes allow it.
    if lam.norm() > 1e-6 && lam.norm() < 1e6 && j.norm() < 1e12 {
        let residual = (j * lam * (Complex64::new(1.0, 0.0) - lam) - 16.0).norm();
        if residual > 1e-9 * j.norm().max(16.0) {
            return Err(Error::Validation(format!(
                "J lambda (1-lambda) = 16 violated by {residual:e} at {}+{}i",
                z.re(),
                z.im()
            )));
        }
    }
    Ok((lam, j, j_minus))
}

/// log of theta^{2k} under the determination continued from i*infinity.
pub fn log_theta_pow(z: HalfPlanePoint, two_k: i64, cfg: QSeriesConfig) -> Result<Complex64> {
    if two_k < 1 {
        return Err(Error::Validation(format!(
            "2k must be a positive integer, got {two_k}"
        )));
    }
    Ok(two_k as f64 * log_theta_det(z, cfg)?)
}

/// The determination `log theta` itself (weight parameter 1).
pub fn log_theta_det(z: HalfPlanePoint, cfg: QSeriesConfig) -> Result<Complex64> {
    if z.im() >= cfg.min_im_direct {
        let terms = cfg.terms_for(z.im())?;
        return Ok(theta3_series(z.q(), terms).ln());
    }
    let red = reduce_to_fd(z)?;
    let base = theta_logs_fd(red.z, cfg)?.log_t3;
    Ok(base + red.log_j_theta)
}

/// nu and mu indices attached to a half-integer weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuMu {
    pub k: HalfInt,
    pub nu_minus: i64,
    pub nu_plus: i64,
    pub mu_minus: f64,
    pub mu_plus: f64,
}

/// Integer and fractional parts of (k+2)/4 and (k+4)/4, computed exactly from
/// the doubled representation.
pub fn nu_mu(k: HalfInt) -> NuMu {
    let t = k.twice();
    let nu_minus = (t + 4).div_euclid(8);
    let mu_minus = -((t + 4).rem_euclid(8) as f64) / 8.0;
    let nu_plus = (t + 8).div_euclid(8);
    let mu_plus = -((t + 8).rem_euclid(8) as f64) / 8.0;
    NuMu {
        k,
        nu_minus,
        nu_plus,
        mu_minus,
        mu_plus,
    }
}

impl NuMu {
    pub fn nu(&self, sign: Sign) -> i64 {
        match sign {
            Sign::Plus => self.nu_plus,
            Sign::Minus => self.nu_minus,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pt(re: f64, im: f64) -> HalfPlanePoint {
        HalfPlanePoint::new(re, im).unwrap()
    }

    /// Plain 10-term oracle, independent of the production summation.
    fn theta_oracle(which: ThetaKind, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for n in -10i32..=10 {
            let nf = n as f64;
            match which {
                ThetaKind::Theta3 => {
                    acc += (Complex64::new(0.0, PI) * nf * nf * z).exp();
                }
                ThetaKind::Theta4 => {
                    let sign = if n.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                    acc += sign * (Complex64::new(0.0, PI) * nf * nf * z).exp();
                }
                ThetaKind::Theta2 => {
                    let h = nf + 0.5;
                    acc += (Complex64::new(0.0, PI) * h * h * z).exp();
                }
            }
        }
        acc
    }

    #[test]
    fn rejects_lower_half_plane() {
        assert!(HalfPlanePoint::new(0.0, 0.0).is_err());
        assert!(HalfPlanePoint::new(1.0, -0.1).is_err());
    }

    #[test]
    fn theta3_at_2i_matches_oracle() {
        let cfg = QSeriesConfig::default();
        let v = theta(ThetaKind::Theta3, pt(0.0, 2.0), cfg).unwrap();
        let oracle = theta_oracle(ThetaKind::Theta3, Complex64::new(0.0, 2.0));
        assert!((v - oracle).norm() < 1e-14);
        // 1 + 2 e^{-2 pi} + 2 e^{-8 pi} + ...
        assert_abs_diff_eq!(v.re, 1.0 + 2.0 * (-2.0 * PI).exp() + 2.0 * (-8.0 * PI).exp(), epsilon = 1e-12);
        assert!(v.im.abs() < 1e-15);
    }

    #[test]
    fn theta_two_periodic() {
        let cfg = QSeriesConfig::default();
        let z = pt(0.3, 0.9);
        let a = theta(ThetaKind::Theta3, z, cfg).unwrap();
        let b = theta(ThetaKind::Theta3, pt(0.3 + 2.0, 0.9), cfg).unwrap();
        assert!((a - b).norm() < 1e-12 * a.norm());
    }

    #[test]
    fn theta_real_positive_on_imaginary_axis() {
        let cfg = QSeriesConfig::default();
        for &y in &[0.6, 1.0, 2.5, 7.0] {
            for which in [ThetaKind::Theta2, ThetaKind::Theta3, ThetaKind::Theta4] {
                let v = theta(which, pt(0.0, y), cfg).unwrap();
                assert!(v.re > 0.0, "{which:?} at iy should be positive");
                assert!(v.im.abs() < 1e-14 * v.re);
            }
        }
    }

    #[test]
    fn theta3_at_i_closed_form() {
        // theta(i) = pi^{1/4} / Gamma(3/4)
        let cfg = QSeriesConfig::default();
        let v = theta(ThetaKind::Theta3, pt(0.0, 1.0), cfg).unwrap();
        let gamma_3q = statrs::function::gamma::gamma(0.75);
        assert_abs_diff_eq!(v.re, PI.powf(0.25) / gamma_3q, epsilon = 1e-12);
    }

    #[test]
    fn s_transformation_law() {
        let cfg = QSeriesConfig::default();
        // |theta(-1/z) - sqrt(z/i) theta(z)| small on a spread of points
        for &(x, y) in &[(0.0, 0.7), (0.35, 1.2), (-0.8, 0.6), (0.1, 3.0)] {
            let z = pt(x, y);
            let minus_inv = z.inverted().unwrap();
            let lhs = theta(ThetaKind::Theta3, minus_inv, cfg).unwrap();
            let root = (0.5 * log_z_over_i(z.as_complex())).exp();
            let rhs = root * theta(ThetaKind::Theta3, z, cfg).unwrap();
            assert!(
                (lhs - rhs).norm() <= 1e-9 * rhs.norm(),
                "S law failed at {x}+{y}i: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn cusp_route_matches_direct_in_overlap() {
        // Points in the fundamental domain with im just above the switch,
        // evaluated by both routes.
        let cfg = QSeriesConfig::default();
        for &(x, y) in &[(-0.75, 0.7), (0.8, 0.65), (-0.9, 0.52)] {
            let z = pt(x, y);
            let direct = theta_logs_direct(z, cfg).unwrap();
            let cusp = theta_logs_cusp(z, cfg).unwrap();
            for (a, b) in [
                (direct.log_t2, cusp.log_t2),
                (direct.log_t3, cusp.log_t3),
                (direct.log_t4, cusp.log_t4),
            ] {
                assert!(
                    (a - b).norm() < 1e-11,
                    "cusp route branch mismatch at {x}+{y}i: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn lambda_j_at_i() {
        let cfg = QSeriesConfig::default();
        let (lam, j, j_minus) = lambda_j(pt(0.0, 1.0), cfg).unwrap();
        assert_abs_diff_eq!(lam.re, 0.5, epsilon = 1e-12);
        assert!(lam.im.abs() < 1e-12);
        assert_abs_diff_eq!(j.re, 64.0, epsilon = 1e-9);
        assert!(j.im.abs() < 1e-10);
        assert!(j_minus.norm() < 1e-12);
    }

    #[test]
    fn lambda_to_zero_j_to_infinity_high_up() {
        let cfg = QSeriesConfig::default();
        let (lam, j, _) = lambda_j(pt(0.0, 12.0), cfg).unwrap();
        assert!(lam.norm() < 1e-15);
        assert!(lam.re > 0.0);
        assert!(j.re > 1e14);
        assert!(j.im.abs() < 1e-9 * j.re);
    }

    #[test]
    fn lambda_j_two_periodic() {
        let cfg = QSeriesConfig::default();
        let (l1, j1, m1) = lambda_j(pt(0.27, 1.4), cfg).unwrap();
        let (l2, j2, m2) = lambda_j(pt(2.27, 1.4), cfg).unwrap();
        assert!((l1 - l2).norm() < 1e-12);
        assert!((j1 - j2).norm() < 1e-10 * j1.norm());
        assert!((m1 - m2).norm() < 1e-12);
    }

    #[test]
    fn reduction_identity_word_at_i() {
        let red = reduce_to_fd(pt(0.0, 1.0)).unwrap();
        assert!(red.steps.is_empty());
        assert!((red.z.as_complex() - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        assert_eq!(red.log_j_theta, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn reduction_translation() {
        let red = reduce_to_fd(pt(2.0, 1.0)).unwrap();
        assert_eq!(red.steps.len(), 1);
        assert!((red.z.as_complex() - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        assert_eq!(red.word(), vec!["T^-2"]);
        let back = red.apply_word().unwrap();
        assert!((back.as_complex() - Complex64::new(2.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn reduction_inversion() {
        let red = reduce_to_fd(pt(0.0, 0.5)).unwrap();
        assert!((red.z.as_complex() - Complex64::new(0.0, 2.0)).norm() < 1e-14);
        assert_eq!(red.word(), vec!["S"]);
        assert_eq!(red.inversions, 1);
        let back = red.apply_word().unwrap();
        assert!((back.as_complex() - Complex64::new(0.0, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn reduction_word_roundtrip_low_points() {
        for &(x, y) in &[(0.13, 0.04), (-0.71, 0.02), (0.995, 0.05), (1.62, 0.015)] {
            let tau = pt(x, y);
            let red = reduce_to_fd(tau).unwrap();
            let back = red.apply_word().unwrap();
            let err = (back.as_complex() - tau.as_complex()).norm() / tau.as_complex().norm();
            assert!(err < 1e-12, "roundtrip error {err} at {x}+{y}i");
            // reduced representative lies in the closure of D
            let z = red.z;
            assert!(z.re() >= -1.0 - 1e-12 && z.re() < 1.0 + 1e-12);
            assert!(z.re() * z.re() + z.im() * z.im() >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn log_theta_pow_consistency_with_square() {
        let cfg = QSeriesConfig::default();
        for &(x, y) in &[(0.2, 1.3), (-0.4, 0.8), (0.05, 0.21), (0.73, 0.09)] {
            let z = pt(x, y);
            let lg = log_theta_pow(z, 2, cfg).unwrap();
            let t3 = theta(ThetaKind::Theta3, z, cfg).unwrap();
            let direct = t3 * t3;
            assert!(
                (lg.exp() - direct).norm() <= 1e-10 * direct.norm(),
                "exp(log theta^2) mismatch at {x}+{y}i"
            );
        }
    }

    #[test]
    fn log_theta_real_on_axis() {
        let cfg = QSeriesConfig::default();
        for &y in &[1.0, 2.0, 5.0] {
            let lg = log_theta_pow(pt(0.0, y), 1, cfg).unwrap();
            assert!(lg.im.abs() < 1e-14);
        }
        // log theta(i) = log(pi^{1/4}/Gamma(3/4))
        let lg = log_theta_pow(pt(0.0, 1.0), 1, cfg).unwrap();
        let expect = (PI.powf(0.25) / statrs::function::gamma::gamma(0.75)).ln();
        assert_abs_diff_eq!(lg.re, expect, epsilon = 1e-12);
    }

    #[test]
    fn log_theta_continuous_across_reduction_threshold() {
        let cfg = QSeriesConfig::default();
        // Crossing im = 0.5 on a vertical line must not jump.
        let hi = log_theta_det(pt(0.3, 0.5001), cfg).unwrap();
        let lo = log_theta_det(pt(0.3, 0.4999), cfg).unwrap();
        assert!((hi - lo).norm() < 1e-3);
        assert!((hi.im - lo.im).abs() < 1e-3);
    }

    #[test]
    fn nu_mu_values() {
        let half = nu_mu(HalfInt::from_twice(1));
        assert_eq!(half.nu_minus, 0);
        assert_eq!(half.nu_plus, 1);
        assert_abs_diff_eq!(half.mu_minus, -5.0 / 8.0);
        assert_abs_diff_eq!(half.mu_plus, -1.0 / 8.0);

        let two = nu_mu(HalfInt::from_twice(4));
        assert_eq!(two.nu_minus, 1); // matches floor((d+4)/8) for d = 4

        let k72 = nu_mu(HalfInt::from_twice(7));
        assert_eq!(k72.nu_minus, 1);
        assert_abs_diff_eq!(k72.mu_minus, -3.0 / 8.0);

        for t in 1..200 {
            let nm = nu_mu(HalfInt::from_twice(t));
            assert!(nm.nu_minus <= nm.nu_plus);
            assert!(nm.mu_minus >= -7.0 / 8.0 && nm.mu_minus <= 0.0);
            assert!(nm.mu_plus >= -7.0 / 8.0 && nm.mu_plus <= 0.0);
        }
    }

    #[test]
    fn j_monotone_on_left_arc() {
        // J maps the quarter circle from -1 to i onto [0, 64], increasing.
        let cfg = QSeriesConfig::default();
        let mut last = -1.0;
        for i in 1..40 {
            let angle = PI - (PI / 2.0) * (i as f64) / 40.0;
            let z = pt(angle.cos(), angle.sin());
            let logs = theta_logs_fd(z, cfg).unwrap();
            let j = logs.log_j().exp();
            assert!(
                j.im.abs() <= 1e-8 * j.re.abs().max(1.0),
                "J not real on arc at angle {angle}: {j}"
            );
            assert!(j.re > last, "J not increasing on the arc");
            last = j.re;
        }
        assert!(last < 64.0);
    }

    #[test]
    fn nonvanishing_on_samples() {
        let cfg = QSeriesConfig::default();
        for &(x, y) in &[(0.0, 1.0), (0.5, 0.8), (-0.3, 2.0), (0.9, 0.3)] {
            let z = pt(x, y);
            for which in [ThetaKind::Theta2, ThetaKind::Theta3, ThetaKind::Theta4] {
                assert!(theta(which, z, cfg).unwrap().norm() > 0.0);
            }
        }
    }
}
