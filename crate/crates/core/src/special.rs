//! Bessel functions of the first kind for the orders the radial transforms
//! need: integer orders via Miller's backward recurrence, half-integer orders
//! through the closed trigonometric forms of the spherical Bessel functions.

/// J_nu(x) for nu = twice_nu / 2, x >= 0. Supported orders: integers >= 0 and
/// half-integers >= -1/2.
pub fn bessel_j_half_order(twice_nu: i64, x: f64) -> f64 {
    if twice_nu.rem_euclid(2) == 0 {
        bessel_j_int((twice_nu / 2) as u32, x)
    } else {
        let n = (twice_nu - 1) / 2; // order n + 1/2 with n >= -1
        bessel_j_half(n, x)
    }
}

/// J_{n+1/2}(x) = sqrt(2x/pi) j_n(x), with j_{-1}(x) = cos(x)/x.
fn bessel_j_half(n: i64, x: f64) -> f64 {
    assert!(n >= -1, "half-integer order below -1/2 not supported");
    if x == 0.0 {
        return 0.0; // order >= -1/2 is never hit at 0 by our quadratures
    }
    let scale = (2.0 * x / std::f64::consts::PI).sqrt();
    scale * spherical_j(n, x)
}

/// Spherical Bessel function j_n, n >= -1.
fn spherical_j(n: i64, x: f64) -> f64 {
    if n == -1 {
        return x.cos() / x;
    }
    let n = n as usize;
    if x < 1e-4 || (x as f64) < 0.02 * (n as f64 + 1.0) {
        return spherical_j_series(n, x);
    }
    if (n as f64) < x {
        // upward recurrence is stable when the order stays below the argument
        let mut jm1 = x.sin() / x; // j_0
        if n == 0 {
            return jm1;
        }
        let mut j = x.sin() / (x * x) - x.cos() / x; // j_1
        for l in 1..n {
            let next = (2.0 * l as f64 + 1.0) / x * j - jm1;
            jm1 = j;
            j = next;
        }
        j
    } else {
        // Miller's algorithm: downward recurrence, normalize by j_0
        let start = n + 24 + (x + 14.0 * (x + n as f64).sqrt()) as usize;
        let mut jp1 = 0.0f64;
        let mut j = 1e-300;
        let mut result = 0.0;
        for l in (0..=start).rev() {
            // entering with (j, jp1) ~ (j_{l+1}, j_{l+2}); produce j_l
            let jm1 = (2.0 * l as f64 + 3.0) / x * j - jp1;
            jp1 = j;
            j = jm1;
            if l == n {
                result = j;
            }
            // keep magnitudes in range
            if j.abs() > 1e250 {
                j *= 1e-250;
                jp1 *= 1e-250;
                result *= 1e-250;
            }
        }
        // loop exits with j ~ j_0-unnormalized
        let j0 = x.sin() / x;
        result * (j0 / j)
    }
}

fn spherical_j_series(n: usize, x: f64) -> f64 {
    // j_n(x) = x^n / (2n+1)!! * (1 - (x^2/2)/(1!(2n+3)) + (x^2/2)^2/(2!(2n+3)(2n+5)) - ...)
    let mut dfact = 1.0;
    for l in 1..=n {
        dfact *= 2.0 * l as f64 + 1.0;
    }
    let x2h = 0.5 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..30 {
        term *= -x2h / (j as f64 * (2.0 * (n as f64 + j as f64) + 1.0));
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    x.powi(n as i32) / dfact * sum
}

/// Integer-order J_m via ascending series for small arguments and Miller's
/// backward recurrence with the even-order normalization otherwise.
fn bessel_j_int(m: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if m == 0 { 1.0 } else { 0.0 };
    }
    if x < 2.0 {
        return bessel_j_series(m, x);
    }
    let start = (m as usize + 24 + (x + 14.0 * (x + m as f64).sqrt()) as usize) & !1usize;
    let mut jp1 = 0.0f64;
    let mut j = 1e-300;
    let mut target = if m as usize == start { j } else { 0.0 };
    let mut even_sum = 0.0;
    for l in (0..start).rev() {
        let jm1 = (2.0 * (l as f64 + 1.0)) / x * j - jp1;
        jp1 = j;
        j = jm1;
        if l == m as usize {
            target = j;
        }
        if l % 2 == 0 {
            even_sum += if l == 0 { j } else { 2.0 * j };
        }
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp1 *= 1e-250;
            target *= 1e-250;
            even_sum *= 1e-250;
        }
    }
    target / even_sum
}

fn bessel_j_series(m: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut fact = 1.0;
    for l in 1..=m {
        fact *= l as f64;
    }
    let mut term = half.powi(m as i32) / fact;
    let mut sum = term;
    let q = half * half;
    for j in 1..40 {
        term *= -q / (j as f64 * (j as f64 + m as f64));
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// ln Gamma for positive real arguments.
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Gamma for positive real arguments.
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Surface area of the unit sphere S^{d-1} in R^d.
pub fn sphere_area(d: u32) -> f64 {
    let df = d as f64;
    2.0 * std::f64::consts::PI.powf(df / 2.0) / gamma(df / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn integer_orders_reference_values() {
        // frozen from an independent high-precision evaluation
        assert_abs_diff_eq!(bessel_j_half_order(0, 1.0), 7.65197686557966605e-01, epsilon = 1e-14);
        assert_abs_diff_eq!(bessel_j_half_order(2, 1.0), 4.40050585744933553e-01, epsilon = 1e-14);
        assert_abs_diff_eq!(bessel_j_half_order(0, 50.0), 5.58123276692518017e-02, epsilon = 1e-13);
        assert_abs_diff_eq!(bessel_j_half_order(10, 20.0), 1.51169767982394926e-01, epsilon = 1e-13);
        assert_abs_diff_eq!(bessel_j_half_order(16, 30.0), 6.28908533164585226e-02, epsilon = 1e-13);
        assert_abs_diff_eq!(bessel_j_half_order(4, 0.1), 1.24895865879991923e-03, epsilon = 1e-16);
        assert_abs_diff_eq!(bessel_j_half_order(34, 40.0), -1.18297967033171580e-01, epsilon = 1e-12);
        assert_abs_diff_eq!(bessel_j_half_order(6, 7.7), -2.78697093409701890e-01, epsilon = 1e-13);
    }

    #[test]
    fn half_orders_reference_values() {
        assert_abs_diff_eq!(bessel_j_half_order(1, 1.0), 6.71396707141803883e-01, epsilon = 1e-14);
        assert_abs_diff_eq!(bessel_j_half_order(3, 2.0), 4.91293778687162730e-01, epsilon = 1e-14);
        assert_abs_diff_eq!(bessel_j_half_order(13, 15.0), 1.41508810658134587e-01, epsilon = 1e-13);
        assert_abs_diff_eq!(bessel_j_half_order(-1, 2.0), -2.34785710406248599e-01, epsilon = 1e-14);
    }

    #[test]
    fn half_orders_low_argument_miller_branch() {
        // x < order exercises the downward recurrence
        assert_abs_diff_eq!(bessel_j_half_order(3, 0.05), 2.97279687491015104e-03, epsilon = 1e-16);
        assert_abs_diff_eq!(bessel_j_half_order(3, 0.5), 9.17016996256513894e-02, epsilon = 1e-15);
        assert_abs_diff_eq!(bessel_j_half_order(5, 0.3), 2.60530185565866889e-03, epsilon = 1e-16);
        assert_abs_diff_eq!(bessel_j_half_order(13, 2.0), 4.67195208739339346e-04, epsilon = 1e-15);
        assert_abs_diff_eq!(bessel_j_half_order(7, 0.8), 3.35794714316268051e-03, epsilon = 1e-15);
    }

    #[test]
    fn half_order_closed_forms() {
        // J_{1/2} = sqrt(2/(pi x)) sin x; J_{-1/2} = sqrt(2/(pi x)) cos x
        for &x in &[0.3, 1.7, 6.0, 23.0] {
            let s = (2.0 / (std::f64::consts::PI * x)).sqrt();
            assert_abs_diff_eq!(bessel_j_half_order(1, x), s * x.sin(), epsilon = 1e-13);
            assert_abs_diff_eq!(bessel_j_half_order(-1, x), s * x.cos(), epsilon = 1e-13);
        }
    }

    #[test]
    fn sphere_areas() {
        assert_abs_diff_eq!(sphere_area(1), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sphere_area(2), 2.0 * std::f64::consts::PI, epsilon = 1e-13);
        assert_abs_diff_eq!(sphere_area(3), 4.0 * std::f64::consts::PI, epsilon = 1e-13);
        assert_abs_diff_eq!(
            sphere_area(4),
            2.0 * std::f64::consts::PI * std::f64::consts::PI,
            epsilon = 1e-12
        );
    }
}
