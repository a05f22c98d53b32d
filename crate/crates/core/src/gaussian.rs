//! Heat kernels, the normal CDF and the scaled products `e^c * Phi(d)` that
//! every closed form in this crate is built from.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{require_finite, require_positive, Error, Result};
use crate::quadrature::Integrator;

const LN_MAX: f64 = 709.782_712_893_384;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Diffusion coefficient `nu` and noise coupling `lambda` of the linear
/// equation `u_t = (nu/2) u_xx + lambda u W`.
///
/// Only even powers of `lambda` enter any formula, so a negative coupling
/// behaves exactly like its absolute value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub nu: f64,
    pub lambda: f64,
}

impl KernelParams {
    pub fn new(nu: f64, lambda: f64) -> Result<Self> {
        require_positive("nu", nu)?;
        require_finite("lambda", lambda)?;
        Ok(KernelParams { nu, lambda })
    }

    #[inline]
    pub fn lambda_sq(&self) -> f64 {
        self.lambda * self.lambda
    }

    #[inline]
    pub fn lambda_4(&self) -> f64 {
        let l2 = self.lambda_sq();
        l2 * l2
    }

    /// Copy with a different coupling (moment bounds swap `lambda` for an
    /// effective Lipschitz constant).
    pub fn with_lambda(&self, lambda: f64) -> Self {
        KernelParams { nu: self.nu, lambda }
    }
}

/// `G_nu(t, x) = (2 pi nu t)^{-1/2} exp(-x^2 / (2 nu t))`.
pub fn heat_kernel(t: f64, x: f64, nu: f64) -> Result<f64> {
    require_positive("t", t)?;
    require_positive("nu", nu)?;
    require_finite("x", x)?;
    Ok(heat(t, x, nu))
}

/// Unchecked heat kernel for inner loops whose arguments are already validated.
#[inline]
pub(crate) fn heat(t: f64, x: f64, nu: f64) -> f64 {
    let var = nu * t;
    (-x * x / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Scaled complementary error function `e^{x^2} erfc(x)`.
///
/// Accurate to a few ulp for `x >= 0`; negative arguments use the reflection
/// `erfcx(x) = 2 e^{x^2} - erfcx(-x)` and overflow past `x ~ -26.6`.
pub fn erfcx(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 * (x * x).exp() - erfcx(-x);
    }
    if x < 0.5 {
        return (x * x).exp() * libm::erfc(x);
    }
    if x < 26.0 {
        // x^2 = hi + lo exactly; e^{lo} = 1 + lo to double precision.
        let hi = x * x;
        let lo = x.mul_add(x, -hi);
        return hi.exp() * libm::erfc(x) * (1.0 + lo);
    }
    if x > 1e8 {
        return FRAC_1_SQRT_PI / x;
    }
    // Continued fraction 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))).
    let mut tail = x;
    for k in (1..=40).rev() {
        tail = x + (k as f64 * 0.5) / tail;
    }
    FRAC_1_SQRT_PI / tail
}

/// Standard normal CDF via `Phi(x) = erfc(-x / sqrt 2) / 2`.
///
/// Deep lower tails round to `+0.0` once the true value drops below the
/// smallest subnormal (`x < -38.5` or so); the result is never negative.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `e^c * Phi(d)` without forming `e^c` when `d` is far in the lower tail.
///
/// On `d < 0` this is `0.5 * e^{c - d^2/2} * erfcx(-d / sqrt 2)`, so huge
/// `c` paired with a compensating tiny `Phi(d)` stays finite.
pub fn exp_phi(c: f64, d: f64) -> Result<f64> {
    require_finite("c", c)?;
    require_finite("d", d)?;
    if d >= 0.0 {
        let p = normal_cdf(d);
        let exponent = c + p.ln();
        if exponent > LN_MAX {
            return Err(Error::Overflow { what: "e^c * Phi(d)", exponent });
        }
        if c <= LN_MAX {
            Ok(c.exp() * p)
        } else {
            Ok(exponent.exp())
        }
    } else {
        let scaled = 0.5 * erfcx(-d * FRAC_1_SQRT_2);
        let exponent = c - 0.5 * d * d;
        let total = exponent + scaled.ln();
        if total > LN_MAX {
            return Err(Error::Overflow { what: "e^c * Phi(d)", exponent: total });
        }
        if exponent <= LN_MAX {
            Ok(exponent.exp() * scaled)
        } else {
            Ok(total.exp())
        }
    }
}

/// `e^a * erfc(b)`, the form the Laplace tables use.
pub fn exp_erfc(a: f64, b: f64) -> Result<f64> {
    Ok(2.0 * exp_phi(a, -SQRT_2 * b)?)
}

/// Splits `G_nu(s, y - z1) G_nu(s, y - z2)` into
/// `(G_{nu/2}(s, y - zbar), G_nu(2s, dz))` with `zbar = (z1 + z2)/2`,
/// `dz = z2 - z1`.
pub fn gaussian_product_split(s: f64, nu: f64, y: f64, z1: f64, z2: f64) -> Result<(f64, f64)> {
    require_positive("s", s)?;
    require_positive("nu", nu)?;
    let zbar = 0.5 * (z1 + z2);
    let dz = z2 - z1;
    Ok((heat(s, y - zbar, 0.5 * nu), heat(2.0 * s, dz, nu)))
}

/// Both sides of the product-of-heat-kernels moment inequality
///
/// `int G_1(s, x + z) prod_j G_1(t, z - y_j) dz
///     <= (p+1)^{p/2} sqrt(t/(ps+t)) e^{p x^2 / (2(ps+t))} prod_i G_1((p+1)t, y_i)`.
///
/// The left side is computed by adaptive quadrature; callers compare.
/// The inequality holds for every `x, y` only when `(p - 1) t >= 2 p s`.
pub fn check_gaussian_moment_bound(s: f64, t: f64, x: f64, ys: &[f64]) -> Result<(f64, f64)> {
    require_positive("s", s)?;
    require_positive("t", t)?;
    require_finite("x", x)?;
    if ys.is_empty() {
        return Err(Error::Domain("need at least one y (p >= 1)".into()));
    }
    for &y in ys {
        require_finite("y", y)?;
    }
    let p = ys.len() as f64;

    let integrand = |z: f64| {
        let mut v = heat(s, x + z, 1.0);
        for &y in ys {
            v *= heat(t, z - y, 1.0);
        }
        v
    };
    // The integrand is a Gaussian in z; centre the map on its mode.
    let center = (-x / s + ys.iter().sum::<f64>() / t) / (1.0 / s + p / t);
    let width = (1.0 / (1.0 / s + p / t)).sqrt();
    let q = Integrator::new(0.0, 1e-12);
    let lhs = q.real_line(integrand, center, width)?.value;

    let mut rhs = (p + 1.0).powf(0.5 * p) * (t / (p * s + t)).sqrt() * (p * x * x / (2.0 * (p * s + t))).exp();
    for &y in ys {
        rhs *= heat((p + 1.0) * t, y, 1.0);
    }
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    // Taylor series of erf, summed in f64 with enough terms for |x| <= 3.
    fn erf_series(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        for n in 1..200 {
            term *= -x * x / n as f64;
            let add = term / (2 * n + 1) as f64;
            sum += add;
            if add.abs() < 1e-30 {
                break;
            }
        }
        2.0 / PI.sqrt() * sum
    }

    #[test]
    fn heat_kernel_at_origin() {
        let g = heat_kernel(1.0, 0.0, 1.0).unwrap();
        assert!((g - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-16);
        assert!((g - 0.398942).abs() < 1e-6);
    }

    #[test]
    fn heat_kernel_is_even() {
        for &x in &[0.1, 1.3, 7.0] {
            assert_eq!(heat_kernel(0.7, x, 2.0).unwrap(), heat_kernel(0.7, -x, 2.0).unwrap());
        }
    }

    #[test]
    fn heat_kernel_domain_errors() {
        assert!(matches!(heat_kernel(0.0, 0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(heat_kernel(-1.0, 0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(heat_kernel(1.0, 0.0, 0.0), Err(Error::Domain(_))));
        assert!(KernelParams::new(-1.0, 1.0).is_err());
        assert!(KernelParams::new(1.0, f64::NAN).is_err());
        assert!(KernelParams::new(1.0, 0.0).is_ok());
    }

    #[test]
    fn heat_kernel_unit_mass() {
        let q = Integrator::default();
        for &t in &[1e-3f64, 1.0, 1e3] {
            for &nu in &[0.1, 1.0, 10.0] {
                let m = q
                    .real_line(|x| heat(t, x, nu), 0.0, (nu * t).sqrt())
                    .unwrap()
                    .value;
                assert!((m - 1.0).abs() < 1e-10, "t={t} nu={nu} mass={m}");
            }
        }
    }

    #[test]
    fn chapman_kolmogorov_example() {
        let (s, t, x) = (0.3, 0.7, 1.2);
        let q = Integrator::new(1e-14, 1e-13);
        let conv = q
            .real_line(|y| heat(s, x - y, 1.0) * heat(t, y, 1.0), 0.0, 0.5)
            .unwrap()
            .value;
        assert!((conv - heat(s + t, x, 1.0)).abs() < 1e-10);
    }

    #[test]
    fn normal_cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.0) - 0.5 * (1.0 + erf_series(FRAC_1_SQRT_2))).abs() < 1e-15);
        assert!((normal_cdf(1.0) - 0.841_344_7).abs() < 1e-7);
        let deep = normal_cdf(-40.0);
        assert!((0.0..=1e-300).contains(&deep));
        assert!(normal_cdf(-37.0) > 0.0);
        for &x in &[0.3, 1.7, 4.0, 8.0] {
            assert!((normal_cdf(x) + normal_cdf(-x) - 1.0).abs() < 2e-16);
        }
    }

    #[test]
    fn erfcx_matches_direct_form_and_asymptotics() {
        for &x in &[0.0f64, 0.2, 0.7, 1.5, 3.0, 6.0, 12.0, 25.0] {
            let direct = (x * x).exp() * libm::erfc(x);
            assert!(rel(erfcx(x), direct) < 1e-13, "x={x}");
        }
        // Asymptotic series 1/(x sqrt pi) (1 - 1/(2x^2) + 3/(4x^4) - 15/(8x^6) + 105/(16x^8)).
        for &x in &[30.0, 100.0, 1e4] {
            let z = 1.0 / (x * x);
            let series = FRAC_1_SQRT_PI / x * (1.0 - 0.5 * z + 0.75 * z * z - 1.875 * z * z * z + 6.5625 * z * z * z * z);
            assert!(rel(erfcx(x), series) < 1e-12, "x={x}");
        }
        // Both branches meet at the switch point.
        assert!(rel(erfcx(26.0 - 1e-12), erfcx(26.0)) < 1e-12);
        assert!(rel(erfcx(-1.0), 2.0 * 1f64.exp() - erfcx(1.0)) < 1e-15);
    }

    #[test]
    fn exp_phi_examples() {
        assert!((exp_phi(0.0, 0.7).unwrap() - 0.758_036).abs() < 1e-6);
        assert!((exp_phi(0.0, 0.7).unwrap() - 0.5 * (1.0 + erf_series(0.7 / SQRT_2))).abs() < 1e-15);
        assert_eq!(exp_phi(0.0, 0.0).unwrap(), 0.5);
        let d = -SQRT_2 * 100.0;
        let c = 0.5 * d * d;
        let v = exp_phi(c, d).unwrap();
        assert!(v.is_finite());
        assert!(rel(v, 0.5 * erfcx(100.0)) < 1e-13);
        assert!((v - 0.00282).abs() < 1e-5);
    }

    #[test]
    fn exp_phi_overflow_is_reported() {
        assert!(matches!(exp_phi(800.0, 1.0), Err(Error::Overflow { .. })));
        assert!(matches!(exp_phi(2000.0, -10.0), Err(Error::Overflow { .. })));
        // Large c with an even larger compensating tail is fine.
        assert!(exp_phi(800.0, -45.0).unwrap().is_finite());
    }

    #[test]
    fn exp_phi_agrees_with_direct_product() {
        let mut seed = 7u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..2000 {
            let c = -50.0 + 150.0 * next();
            let d = -30.0 + 40.0 * next();
            let direct = c.exp() * normal_cdf(d);
            if direct.is_normal() {
                let v = exp_phi(c, d).unwrap();
                assert!(rel(v, direct) < 1e-12, "c={c} d={d} v={v} direct={direct}");
            }
        }
    }

    #[test]
    fn product_split_examples() {
        let a = 0.4;
        let (g1, g2) = gaussian_product_split(1.0, 1.0, 0.0, a, a).unwrap();
        assert_eq!(g1, heat(1.0, -a, 0.5));
        assert_eq!(g2, heat(2.0, 0.0, 1.0));

        let (g1, g2) = gaussian_product_split(0.5, 2.0, 1.0, 0.0, 3.0).unwrap();
        let direct = heat(0.5, 1.0, 2.0) * heat(0.5, -2.0, 2.0);
        assert!(rel(g1 * g2, direct) < 1e-13);

        let swapped = gaussian_product_split(0.5, 2.0, 1.0, 3.0, 0.0).unwrap();
        assert_eq!(swapped, (g1, g2));
        assert!(gaussian_product_split(0.0, 1.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn moment_bound_examples() {
        let (lhs, rhs) = check_gaussian_moment_bound(1.0, 1.0, 0.0, &[0.0]).unwrap();
        assert!(rel(lhs, heat(2.0, 0.0, 1.0)) < 1e-12);
        assert!((lhs - 0.28209479177387814).abs() < 1e-12);
        assert!(lhs <= rhs * (1.0 + 1e-9));

        let (lhs, rhs) = check_gaussian_moment_bound(0.2, 0.5, 1.5, &[-1.0, 0.3, 2.0]).unwrap();
        assert!(lhs <= rhs * (1.0 + 1e-9), "lhs={lhs} rhs={rhs}");

        assert!(check_gaussian_moment_bound(1.0, 1.0, 0.0, &[]).is_err());
    }

    #[test]
    fn moment_bound_fails_for_single_factor_when_s_exceeds_t() {
        // p = 1, x = -y: the left side is G_1(s+t, 0), the right side
        // sqrt(2t/(s+t)) e^{y^2/(2(s+t))} G_1(2t, y). Any s > t breaks it.
        let (lhs, rhs) = check_gaussian_moment_bound(1.0, 0.5, 0.0, &[1.0]).unwrap();
        assert!(rel(lhs, heat(1.5, 1.0, 1.0)) < 1e-12);
        assert!(lhs > rhs);
    }

    proptest::proptest! {
        #[test]
        fn erfcx_matches_libm_where_representable(x in -5.0f64..5.0) {
            let direct = (x * x).exp() * libm::erfc(x);
            proptest::prop_assert!(rel(erfcx(x), direct) < 1e-13, "x={}", x);
        }

        #[test]
        fn moment_bound_holds_in_its_valid_range(
            p in 2usize..=4,
            t in 0.05f64..5.0,
            frac in 0.01f64..1.0,
            x in -3.0f64..3.0,
            ys in proptest::collection::vec(-3.0f64..3.0, 4),
        ) {
            let pf = p as f64;
            let s = frac * (pf - 1.0) * t / (2.0 * pf);
            let (lhs, rhs) = check_gaussian_moment_bound(s, t, x, &ys[..p]).unwrap();
            proptest::prop_assert!(lhs <= rhs * (1.0 + 1e-9), "lhs={} rhs={}", lhs, rhs);
        }
    }
}
