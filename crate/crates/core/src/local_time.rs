//! Joint law of a Brownian motion `B_t` and its local time `L_t^a` at level `a`.
//!
//! The law has a continuous part on `R x (0, inf)` and an atom at `v = 0`
//! (the path never reached `a`). Local time is the occupation density,
//! `L_t^a = int_0^t delta_a(B_s) ds`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::Serialize;

use crate::error::{require_finite, require_positive, Error, Result};
use crate::gaussian::heat;
use crate::quadrature::Integrator;

const MAX_REJECTIONS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JointLocalTimeLaw {
    pub t: f64,
    pub a: f64,
}

impl JointLocalTimeLaw {
    pub fn new(t: f64, a: f64) -> Result<Self> {
        require_positive("t", t)?;
        require_finite("a", a)?;
        Ok(JointLocalTimeLaw { t, a })
    }

    #[inline]
    fn r(&self, y: f64, v: f64) -> f64 {
        self.a.abs() + (y - self.a).abs() + v
    }

    /// Density of `(B_t, L_t^a)` at `(y, v)` for `v > 0`:
    /// `r / sqrt(2 pi t^3) e^{-r^2/(2t)}` with `r = |a| + |y - a| + v`.
    pub fn joint_density_cont(&self, y: f64, v: f64) -> Result<f64> {
        if v.is_nan() || v <= 0.0 || v.is_infinite() {
            return Err(Error::Domain(format!("v must be positive, got {v}")));
        }
        require_finite("y", y)?;
        Ok(self.density_unchecked(y, v))
    }

    #[inline]
    pub(crate) fn density_unchecked(&self, y: f64, v: f64) -> f64 {
        let t = self.t;
        let r = self.r(y, v);
        r / (2.0 * PI * t * t * t).sqrt() * (-r * r / (2.0 * t)).exp()
    }

    /// Sub-density of `B_t` on `{L_t^a = 0}`:
    /// `(e^{-y^2/2t} - e^{-(2a-y)^2/2t}) / sqrt(2 pi t)` on `sign(a) y <= |a|`.
    pub fn atom_profile(&self, y: f64) -> f64 {
        let (t, a) = (self.t, self.a);
        // sign(0) = +1
        let sign = if a >= 0.0 { 1.0 } else { -1.0 };
        if sign * y > a.abs() {
            return 0.0;
        }
        let w = 2.0 * a - y;
        // Difference of exponentials; expm1 keeps it accurate near y = a.
        let base = (-y * y / (2.0 * t)).exp();
        let diff = -(-(w * w - y * y) / (2.0 * t)).exp_m1();
        (base * diff / (2.0 * PI * t).sqrt()).max(0.0)
    }

    /// `P(L_t^a = 0) = 2 Phi(|a|/sqrt t) - 1`.
    pub fn atom_mass(&self) -> f64 {
        libm::erf(self.a.abs() / (2.0 * self.t).sqrt())
    }

    /// Density of `L_t^a` at `v >= 0` together with the atom at zero.
    pub fn marginal_l(&self, v: f64) -> Result<(f64, f64)> {
        if v.is_nan() || v < 0.0 || v.is_infinite() {
            return Err(Error::Domain(format!("v must be nonnegative, got {v}")));
        }
        let t = self.t;
        let s = v + self.a.abs();
        let density = (2.0 / (PI * t)).sqrt() * (-s * s / (2.0 * t)).exp();
        Ok((density, self.atom_mass()))
    }

    /// `int_0^inf f_cont(y, v) dv`, the part of the `B_t` density carried by
    /// paths that reached `a`.
    pub fn reached_density(&self, y: f64) -> f64 {
        let r = self.r(y, 0.0);
        (-r * r / (2.0 * self.t)).exp() / (2.0 * PI * self.t).sqrt()
    }

    /// `int_{v0}^{v1} f_cont(y, v) dv` in closed form.
    pub fn density_v_band(&self, y: f64, v0: f64, v1: f64) -> f64 {
        let t = self.t;
        let r = self.r(y, 0.0);
        let e = |v: f64| {
            if v.is_infinite() {
                0.0
            } else {
                (-(r + v) * (r + v) / (2.0 * t)).exp()
            }
        };
        (e(v0) - e(v1)) / (2.0 * PI * t).sqrt()
    }

    /// Exact draw of `(B_t, L_t^a)`.
    ///
    /// With `T_a = a^2/Z^2` the first hitting time, paths with `T_a > t` land
    /// on the atom and `B_t` follows the normalized atom profile (drawn by
    /// rejection from `N(0, t)`). Otherwise the post-hitting motion runs for
    /// `tau = t - T_a` from `a`, and Levy's identity `(|B|, L) = (M - B, M)`
    /// gives `L` and `|B_t - a|` from a Brownian endpoint and its maximum;
    /// the sign of `B_t - a` is independent of both.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, f64)> {
        let (y, v) = sample_nonnegative_level(self.t, self.a.abs(), rng)?;
        Ok(if self.a < 0.0 { (-y, v) } else { (y, v) })
    }
}

fn sample_nonnegative_level<R: Rng + ?Sized>(t: f64, a: f64, rng: &mut R) -> Result<(f64, f64)> {
    let z: f64 = rng.sample(StandardNormal);
    let hit = if a == 0.0 { 0.0 } else { a * a / (z * z) };
    if hit > t {
        let sd = t.sqrt();
        for _ in 0..MAX_REJECTIONS {
            let y = sd * rng.sample::<f64, _>(StandardNormal);
            if y > a {
                continue;
            }
            let accept = -(-2.0 * a * (a - y) / t).exp_m1();
            if rng.random::<f64>() < accept {
                return Ok((y, 0.0));
            }
        }
        return Err(Error::Internal(format!(
            "atom sampler exceeded {MAX_REJECTIONS} rejections at t={t}, a={a}"
        )));
    }
    let tau = t - hit;
    let b = tau.sqrt() * rng.sample::<f64, _>(StandardNormal);
    let e: f64 = rng.sample(Exp1);
    let m = 0.5 * (b + (b * b + 2.0 * tau * e).sqrt());
    let w = m - b;
    let y = if rng.random::<bool>() { a + w } else { a - w };
    Ok((y, m))
}

/// Both sides of the first-passage convolution identity
/// `int_0^t |ab| (s(t-s))^{-3/2} e^{-a^2/2s - b^2/2(t-s)} ds = factor * rhs`
/// with `rhs = (|a|+|b|)/sqrt(2 pi t^3) e^{-(|a|+|b|)^2/2t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FirstPassageCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`; equal to `2 pi` when the identity holds.
    pub factor: f64,
}

pub const FIRST_PASSAGE_FACTOR: f64 = 2.0 * PI;

pub fn first_passage_convolution(t: f64, a: f64, b: f64) -> Result<FirstPassageCheck> {
    require_positive("t", t)?;
    require_finite("a", a)?;
    require_finite("b", b)?;
    if a == 0.0 || b == 0.0 {
        return Err(Error::Domain("a and b must be nonzero".into()));
    }
    let (aa, bb) = (a.abs(), b.abs());
    let g = |level: f64, s: f64| -> f64 {
        if s <= 0.0 {
            0.0
        } else {
            level * s.powf(-1.5) * (-level * level / (2.0 * s)).exp()
        }
    };
    // s = t u^2 on [0, t/2] and t - s = t u^2 on [t/2, t]; both smooth in u.
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let left = |u: f64| {
        let s = t * u * u;
        g(aa, s) * g(bb, t - s) * 2.0 * t * u
    };
    let right = |u: f64| {
        let r = t * u * u;
        g(aa, t - r) * g(bb, r) * 2.0 * t * u
    };
    let q = Integrator::new(0.0, 1e-12);
    let lhs = q.finite(left, 0.0, half)?.value + q.finite(right, 0.0, half)?.value;
    let s = aa + bb;
    let rhs = s / (2.0 * PI * t * t * t).sqrt() * (-s * s / (2.0 * t)).exp();
    Ok(FirstPassageCheck { lhs, rhs, factor: lhs / rhs })
}

/// First-passage density kernel `|a| t^{-3/2} e^{-a^2/(2t)}`.
pub fn first_passage_kernel(t: f64, a: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    a.abs() * t.powf(-1.5) * (-a * a / (2.0 * t)).exp()
}

/// Quadrature of `int int phi(v) P(dy, dv)` over the full joint law,
/// atom included (`phi` is evaluated at `v = 0` on the atom).
pub fn expect_joint<F>(law: &JointLocalTimeLaw, phi: F, q: &Integrator) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (t, a) = (law.t, law.a);
    let scale = t.sqrt();
    let cont = {
        let failure = std::cell::Cell::new(None);
        let outer = |v: f64| {
            match q.real_line_with_breaks(|y| law.density_unchecked(y, v), &[a], scale) {
                Ok(r) if r.value == 0.0 => 0.0,
                Ok(r) => phi(v) * r.value,
                Err(e) => {
                    failure.set(Some(e));
                    f64::NAN
                }
            }
        };
        let r = q.upper_tail(outer, 0.0, scale);
        if let Some(e) = failure.take() {
            return Err(e);
        }
        r?.value
    };
    let atom_profile = |y: f64| law.atom_profile(y);
    let atom = if a >= 0.0 {
        q.lower_tail(atom_profile, a, scale)?.value
    } else {
        q.upper_tail(atom_profile, a, scale)?.value
    };
    Ok(cont + phi(0.0) * atom)
}

/// `int_0^inf f_cont(y, v) dv + atom_profile(y)` by quadrature in `v`;
/// should reproduce `G_1(t, y)`.
pub fn marginal_y_by_quadrature(law: &JointLocalTimeLaw, y: f64, q: &Integrator) -> Result<f64> {
    let cont = q.upper_tail(|v| law.density_unchecked(y, v), 0.0, law.t.sqrt())?.value;
    Ok(cont + law.atom_profile(y))
}

/// `int f_cont(y, v) dy` by quadrature in `y`; should reproduce the
/// continuous part of `marginal_l`.
pub fn marginal_v_by_quadrature(law: &JointLocalTimeLaw, v: f64, q: &Integrator) -> Result<f64> {
    Ok(q
        .real_line_with_breaks(|y| law.density_unchecked(y, v), &[law.a], law.t.sqrt())?
        .value)
}

/// `G_1(t, y)`, the law of `B_t`.
pub fn brownian_density(t: f64, y: f64) -> f64 {
    heat(t, y, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::mgf_local_time;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        if a == b {
            0.0
        } else {
            ((a - b) / b).abs()
        }
    }

    #[test]
    fn density_examples() {
        let law = JointLocalTimeLaw::new(1.0, 1.0).unwrap();
        let v = law.joint_density_cont(1.0, 1.0).unwrap();
        assert!(rel(v, 2.0 / (2.0 * PI).sqrt() * (-2.0f64).exp()) < 1e-15);
        assert!((v - 0.10798).abs() < 5e-6);
        assert!(law.joint_density_cont(1.0, 0.0).is_err());
        assert!(law.joint_density_cont(1.0, -1.0).is_err());

        let mirrored = JointLocalTimeLaw::new(1.0, -1.0).unwrap();
        for &(y, v) in &[(0.3, 0.2), (-2.0, 1.5), (1.7, 0.01)] {
            assert_eq!(law.density_unchecked(y, v), mirrored.density_unchecked(-y, v));
        }

        let zero = JointLocalTimeLaw::new(2.0, 0.0).unwrap();
        let (y, v) = (-0.7, 0.4);
        let r: f64 = 1.1;
        let expect = r / (2.0 * PI * 8.0f64).sqrt() * (-r * r / 4.0).exp();
        assert!(rel(zero.joint_density_cont(y, v).unwrap(), expect) < 1e-15);
    }

    #[test]
    fn atom_profile_examples() {
        let law = JointLocalTimeLaw::new(1.0, 1.0).unwrap();
        let v = law.atom_profile(0.0);
        assert!(rel(v, (1.0 - (-2.0f64).exp()) / (2.0 * PI).sqrt()) < 1e-15);
        assert!((v - 0.34495).abs() < 5e-6);
        assert_eq!(law.atom_profile(1.5), 0.0);
        assert_eq!(law.atom_profile(1.0), 0.0);

        let zero = JointLocalTimeLaw::new(1.0, 0.0).unwrap();
        for &y in &[-3.0, -0.5, 0.0, 0.5, 2.0] {
            assert_eq!(zero.atom_profile(y), 0.0);
        }
        let neg = JointLocalTimeLaw::new(1.0, -1.0).unwrap();
        assert_eq!(neg.atom_profile(-1.5), 0.0);
        assert_eq!(neg.atom_profile(0.3), law.atom_profile(-0.3));
    }

    #[test]
    fn marginal_l_examples() {
        let law = JointLocalTimeLaw::new(1.0, 1.0).unwrap();
        let (_, atom) = law.marginal_l(0.0).unwrap();
        assert!(rel(atom, 0.6826894921370859) < 1e-15);
        assert!(law.marginal_l(-0.1).is_err());

        let zero = JointLocalTimeLaw::new(3.0, 0.0).unwrap();
        let (d, atom) = zero.marginal_l(0.8).unwrap();
        assert_eq!(atom, 0.0);
        assert!(rel(d, 2.0 * heat(3.0, 0.8, 1.0)) < 1e-15);

        let q = Integrator::default();
        for &(t, a) in &[(0.5, -2.0), (1.0, 1.0), (4.0, 3.0)] {
            let law = JointLocalTimeLaw::new(t, a).unwrap();
            let mass = q.upper_tail(|v| law.marginal_l(v).unwrap().0, 0.0, 1.0).unwrap().value;
            assert!((mass + law.atom_mass() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn v_band_matches_quadrature() {
        let law = JointLocalTimeLaw::new(1.3, 0.6).unwrap();
        let q = Integrator::default();
        for &y in &[-1.0, 0.6, 2.2] {
            let num = q.finite(|v| law.density_unchecked(y, v), 0.2, 1.1).unwrap().value;
            assert!(rel(law.density_v_band(y, 0.2, 1.1), num) < 1e-12);
            assert!(rel(law.density_v_band(y, 0.0, f64::INFINITY), law.reached_density(y)) < 1e-15);
        }
    }

    #[test]
    fn joint_marginals_and_mass() {
        let q = Integrator::new(1e-13, 1e-11);
        for &(t, a) in &[(0.5, -0.5), (1.0, 0.0), (4.0, 1.0)] {
            let law = JointLocalTimeLaw::new(t, a).unwrap();
            let mass = expect_joint(&law, |_| 1.0, &q).unwrap();
            assert!((mass - 1.0).abs() < 1e-8, "t={t} a={a} mass={mass}");
            for &y in &[-2.0, -0.3, 0.0, 0.4, 1.9] {
                let m = marginal_y_by_quadrature(&law, y, &q).unwrap();
                assert!((m - brownian_density(t, y)).abs() < 1e-8);
            }
            for &v in &[0.05, 0.7, 2.0] {
                let m = marginal_v_by_quadrature(&law, v, &q).unwrap();
                assert!((m - law.marginal_l(v).unwrap().0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn mgf_by_quadrature() {
        let q = Integrator::new(1e-13, 1e-11);
        for &(t, a, lambda) in &[(1.0, 0.0, 1.0), (0.5, 1.0, 0.8), (2.0, -1.5, 0.9)] {
            let law = JointLocalTimeLaw::new(t, a).unwrap();
            let l2 = lambda * lambda;
            let num = expect_joint(&law, |v| (l2 * v).exp(), &q).unwrap();
            assert!(rel(num, mgf_local_time(t, a, lambda).unwrap()) < 1e-7);
        }
    }

    #[test]
    fn first_passage_identity() {
        for &(t, a, b) in &[(1.0, 1.0, 1.0), (0.3, -0.4, 2.0), (5.0, 0.2, -0.1)] {
            let c = first_passage_convolution(t, a, b).unwrap();
            assert!(rel(c.factor, FIRST_PASSAGE_FACTOR) < 1e-9, "{c:?}");
            let swapped = first_passage_convolution(t, b, a).unwrap();
            assert!(rel(c.lhs, swapped.lhs) < 1e-12);
        }
        let base = first_passage_convolution(1.0, 0.7, 1.2).unwrap().lhs;
        let c: f64 = 1.8;
        let scaled = first_passage_convolution(c * c, c * 0.7, c * 1.2).unwrap().lhs;
        assert!(rel(scaled, base / (c * c)) < 1e-10);
        assert!(first_passage_convolution(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn sampler_atom_probability_and_mgf() {
        let law = JointLocalTimeLaw::new(1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let mut zeros = 0usize;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let (y, v) = law.sample(&mut rng).unwrap();
            if v == 0.0 {
                zeros += 1;
                assert!(y <= 1.0);
            }
            let w = (0.64 * v).exp();
            sum += w;
            sum2 += w * w;
        }
        let p = zeros as f64 / n as f64;
        let se = (law.atom_mass() * (1.0 - law.atom_mass()) / n as f64).sqrt();
        assert!((p - law.atom_mass()).abs() < 4.0 * se);
        let mean = sum / n as f64;
        let sd = ((sum2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - mgf_local_time(1.0, 1.0, 0.8).unwrap()).abs() < 4.0 * sd);

        let zero = JointLocalTimeLaw::new(1.0, 0.0).unwrap();
        for _ in 0..10_000 {
            assert!(zero.sample(&mut rng).unwrap().1 > 0.0);
        }
    }

    #[test]
    fn sampler_negative_level_mirrors() {
        let pos = JointLocalTimeLaw::new(0.7, 0.5).unwrap();
        let neg = JointLocalTimeLaw::new(0.7, -0.5).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let mut r2 = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let (y1, v1) = pos.sample(&mut r1).unwrap();
            let (y2, v2) = neg.sample(&mut r2).unwrap();
            assert_eq!((y1, v1), (-y2, v2));
        }
    }

    proptest::proptest! {
        #[test]
        fn atom_plus_band_is_gaussian(t in 0.05f64..5.0, a in -3.0f64..3.0, y in -4.0f64..4.0) {
            let law = JointLocalTimeLaw::new(t, a).unwrap();
            let total = law.atom_profile(y) + law.density_v_band(y, 0.0, f64::INFINITY);
            let g = brownian_density(t, y);
            proptest::prop_assert!((total - g).abs() <= 1e-14 + 1e-12 * g, "{} vs {}", total, g);
        }
    }
}
