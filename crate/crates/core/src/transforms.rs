//! Laplace transform pairs behind the second-moment formula and numeric
//! forward transforms that check them.
//!
//! Verification always runs time -> frequency: the time-domain partner is
//! integrated against `e^{-zt}` and compared with the closed frequency form.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{require_finite, require_positive, Error, Result};
use crate::gaussian::{erfc, exp_erfc, exp_phi, heat, KernelParams};
use crate::kernels::{h_function, h_tilde};
use crate::quadrature::{Integrator, QuadResult};

/// Relative half-width of the excluded band around `2 sqrt(nu z) = lambda^2`.
pub const POLE_EXCLUSION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TransformKind {
    LapG,
    LapH,
    F1Plus,
    F1Minus,
    F2,
    F3Plus,
    F3Minus,
    LapGa,
    ConvGH,
    ConvGHtilde,
}

impl TransformKind {
    pub const ALL: [TransformKind; 10] = [
        TransformKind::LapG,
        TransformKind::LapH,
        TransformKind::F1Plus,
        TransformKind::F1Minus,
        TransformKind::F2,
        TransformKind::F3Plus,
        TransformKind::F3Minus,
        TransformKind::LapGa,
        TransformKind::ConvGH,
        TransformKind::ConvGHtilde,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::LapG => "LapG",
            TransformKind::LapH => "LapH",
            TransformKind::F1Plus => "F1Plus",
            TransformKind::F1Minus => "F1Minus",
            TransformKind::F2 => "F2",
            TransformKind::F3Plus => "F3Plus",
            TransformKind::F3Minus => "F3Minus",
            TransformKind::LapGa => "LapGa",
            TransformKind::ConvGH => "ConvGH",
            TransformKind::ConvGHtilde => "ConvGHtilde",
        }
    }

    fn has_pole(self) -> bool {
        matches!(
            self,
            TransformKind::LapH
                | TransformKind::F1Minus
                | TransformKind::F3Minus
                | TransformKind::ConvGH
                | TransformKind::ConvGHtilde
        )
    }
}

/// One transform pair. `x` is the spatial argument (`dz` for the
/// convolutions), `x_prime` the second distance of `ConvGHtilde`, `a` the
/// level of `LapGa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransformCase {
    pub kind: TransformKind,
    pub nu: f64,
    pub lambda: f64,
    pub x: f64,
    pub x_prime: f64,
    pub a: f64,
}

/// `sqrt(nu z)`, `e^{-|x| sqrt(z/nu)}`.
fn s_and_decay(nu: f64, z: f64, dist: f64) -> (f64, f64) {
    (
        (nu * z).sqrt(),
        (-dist.abs() * (z / nu).sqrt()).exp(),
    )
}

impl TransformCase {
    pub fn new(kind: TransformKind, params: &KernelParams) -> Self {
        TransformCase {
            kind,
            nu: params.nu,
            lambda: params.lambda,
            x: 0.0,
            x_prime: 0.0,
            a: 1.0,
        }
    }

    pub fn at(mut self, x: f64) -> Self {
        self.x = x;
        self
    }

    pub fn with_x_prime(mut self, x_prime: f64) -> Self {
        self.x_prime = x_prime;
        self
    }

    pub fn with_level(mut self, a: f64) -> Self {
        self.a = a;
        self
    }

    fn params(&self) -> Result<KernelParams> {
        KernelParams::new(self.nu, self.lambda)
    }

    /// Exponential growth rate of the time-domain partner; the transform
    /// exists for `z` above it.
    pub fn growth_rate(&self) -> f64 {
        if self.kind.has_pole() {
            self.lambda.powi(4) / (4.0 * self.nu)
        } else {
            0.0
        }
    }

    /// Closed frequency-domain form at `z > 0`.
    pub fn laplace_closed(&self, z: f64) -> Result<f64> {
        require_positive("z", z)?;
        let p = self.params()?;
        require_finite("x", self.x)?;
        let nu = p.nu;
        let l2 = p.lambda_sq();
        if self.kind.has_pole() && l2 > 0.0 {
            let s = (nu * z).sqrt();
            if (2.0 * s - l2).abs() < POLE_EXCLUSION * l2 {
                return Err(Error::Pole(format!(
                    "{}: 2 sqrt(nu z) = {} is within {POLE_EXCLUSION} relative of lambda^2 = {l2}",
                    self.kind.name(),
                    2.0 * s
                )));
            }
        }
        let (s, e) = s_and_decay(nu, z, self.x);
        Ok(match self.kind {
            TransformKind::LapG => e / (2.0 * s),
            TransformKind::LapH => laplace_h(z, &p).0,
            TransformKind::F1Plus => e / (4.0 * s * (2.0 * s + l2)),
            TransformKind::F1Minus => e / (4.0 * s * (2.0 * s - l2)),
            TransformKind::F2 => e / (4.0 * nu * z),
            TransformKind::F3Plus => l2 * e / (8.0 * nu * z * (2.0 * s + l2)),
            TransformKind::F3Minus => l2 * e / (8.0 * nu * z * (2.0 * s - l2)),
            TransformKind::LapGa => (2.0 * PI).sqrt() * (-(2.0 * z).sqrt() * self.a.abs()).exp(),
            // L[G_{2nu}(., x)] L[H] and L[G_{2nu}(., x)] L[H~(., x')] both
            // collapse to 2 f_{1,-}.
            TransformKind::ConvGH => e / (2.0 * s * (2.0 * s - l2)),
            TransformKind::ConvGHtilde => {
                let (_, e2) = s_and_decay(nu, z, self.x.abs() + self.x_prime.abs());
                e2 / (2.0 * s * (2.0 * s - l2))
            }
        })
    }

    /// Time-domain partner at `t > 0`.
    pub fn time_domain(&self, t: f64) -> Result<f64> {
        require_positive("t", t)?;
        let p = self.params()?;
        match self.kind {
            TransformKind::LapG => Ok(heat(t, self.x, 2.0 * p.nu)),
            TransformKind::LapH => h_function(t, &p),
            TransformKind::F1Plus => inverse_transform_f1(t, self.x, Sign::Plus, &p),
            TransformKind::F1Minus => inverse_transform_f1(t, self.x, Sign::Minus, &p),
            TransformKind::F2 => inverse_transform_f2(t, self.x, &p),
            TransformKind::F3Plus => inverse_transform_f3(t, self.x, Sign::Plus, &p),
            TransformKind::F3Minus => inverse_transform_f3(t, self.x, Sign::Minus, &p),
            TransformKind::LapGa => Ok(crate::local_time::first_passage_kernel(t, self.a)),
            TransformKind::ConvGH => conv_g_h(t, self.x, &p),
            TransformKind::ConvGHtilde => conv_g_htilde(t, self.x_prime, self.x, &p),
        }
    }

    /// Forward numeric transform of the time-domain partner against the
    /// closed form.
    pub fn verify(&self, z: f64) -> Result<TransformCheck> {
        let closed = self.laplace_closed(z)?;
        let f = |t: f64| self.time_domain(t).unwrap_or(f64::NAN);
        let numeric = laplace_numeric(f, z, self.growth_rate())?.value;
        Ok(TransformCheck {
            case: self.kind.name().to_string(),
            z,
            closed,
            numeric,
            rel_err: ((numeric - closed) / closed).abs(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformCheck {
    pub case: String,
    pub z: f64,
    pub closed: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

/// `L[H](z)` as printed, and recomposed from its partial fractions
/// `1/2 (1/(2s-l2) - 1/(2s+l2)) + 1/(2s) + l2/(4s) (1/(2s-l2) - 1/(2s+l2))`
/// with `s = sqrt(nu z)`.
pub fn laplace_h(z: f64, params: &KernelParams) -> (f64, f64) {
    let nu = params.nu;
    let l2 = params.lambda_sq();
    let l4 = params.lambda_4();
    let s = (nu * z).sqrt();
    let d = 4.0 * nu * z - l4;
    let printed = l2 / d + 1.0 / (2.0 * s) + l4 / (2.0 * s * d);
    let diff = 1.0 / (2.0 * s - l2) - 1.0 / (2.0 * s + l2);
    let recomposed = 0.5 * diff + 1.0 / (2.0 * s) + l2 / (4.0 * s) * diff;
    (printed, recomposed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// `L^{-1}[f_{1,+-}](t) = (1/8nu) e^{+-l2|x|/2nu + l4 t/4nu} erfc(|x|/sqrt(4 nu t) +- l2 sqrt(t/4nu))`.
pub fn inverse_transform_f1(t: f64, x: f64, sign: Sign, params: &KernelParams) -> Result<f64> {
    require_positive("t", t)?;
    require_finite("x", x)?;
    let nu = params.nu;
    let sg = sign.value();
    let l2 = params.lambda_sq();
    let w = x.abs() / (4.0 * nu * t).sqrt();
    let a = sg * l2 * x.abs() / (2.0 * nu) + params.lambda_4() * t / (4.0 * nu);
    let b = w + sg * l2 * (t / (4.0 * nu)).sqrt();
    Ok(exp_erfc(a, b)? / (8.0 * nu))
}

/// `L^{-1}[f_2](t) = (1/4nu) erfc(|x|/sqrt(4 nu t))`.
pub fn inverse_transform_f2(t: f64, x: f64, params: &KernelParams) -> Result<f64> {
    require_positive("t", t)?;
    require_finite("x", x)?;
    let nu = params.nu;
    Ok(erfc(x.abs() / (4.0 * nu * t).sqrt()) / (4.0 * nu))
}

/// `L^{-1}[f_{3,+-}](t) = +-(1/8nu) (erfc(w) - e^{+-l2|x|/2nu + l4 t/4nu} erfc(w +- l2 sqrt(t/4nu)))`.
pub fn inverse_transform_f3(t: f64, x: f64, sign: Sign, params: &KernelParams) -> Result<f64> {
    require_positive("t", t)?;
    require_finite("x", x)?;
    let nu = params.nu;
    let w = x.abs() / (4.0 * nu * t).sqrt();
    let f1 = inverse_transform_f1(t, x, sign, params)? * 8.0 * nu;
    Ok(sign.value() * (erfc(w) - f1) / (8.0 * nu))
}

/// `int_0^t G_{2nu}(s, dz) H(t-s) ds
///  = (1/2nu) e^{-l2|dz|/2nu + l4 t/4nu} Phi(l2 sqrt t/sqrt(2nu) - |dz|/sqrt(2 nu t))`.
pub fn conv_g_h(t: f64, dz: f64, params: &KernelParams) -> Result<f64> {
    conv_closed(t, dz.abs(), params)
}

/// `int_0^t G_{2nu}(t-r, dx) H~(r, dz) dr`; the closed form depends on
/// `|dx| + |dz|` only.
pub fn conv_g_htilde(t: f64, dx: f64, dz: f64, params: &KernelParams) -> Result<f64> {
    require_finite("dx", dx)?;
    conv_closed(t, dx.abs() + dz.abs(), params)
}

fn conv_closed(t: f64, dist: f64, params: &KernelParams) -> Result<f64> {
    require_positive("t", t)?;
    require_finite("distance", dist)?;
    let nu = params.nu;
    let c = -params.lambda_sq() * dist / (2.0 * nu) + params.lambda_4() * t / (4.0 * nu);
    let d = params.lambda_sq() * (t / (2.0 * nu)).sqrt() - dist / (2.0 * nu * t).sqrt();
    Ok(exp_phi(c, d)? / (2.0 * nu))
}

/// `int_0^t f(s) g(t - s) ds` for integrands with at worst `s^{-1/2}` and
/// `(t-s)^{-1/2}` endpoint singularities.
fn time_convolution<F, G>(t: f64, f: F, g: G) -> Result<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    // s = t u^2 near 0, t - s = t u^2 near t.
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let left = |u: f64| {
        let s = t * u * u;
        if s == 0.0 {
            return 0.0;
        }
        f(s) * g(t - s) * 2.0 * t * u
    };
    let right = |u: f64| {
        let r = t * u * u;
        if r == 0.0 {
            return 0.0;
        }
        f(t - r) * g(r) * 2.0 * t * u
    };
    let q = Integrator::new(1e-15, 1e-12);
    Ok(q.finite(left, 0.0, half)?.value + q.finite(right, 0.0, half)?.value)
}

/// Quadrature of the left side of [`conv_g_h`].
pub fn conv_g_h_quadrature(t: f64, dz: f64, params: &KernelParams) -> Result<f64> {
    require_positive("t", t)?;
    let nu = params.nu;
    // Guard overflow once at the worst point (H grows with its argument).
    h_function(t, params)?;
    time_convolution(t, |s| heat(s, dz, 2.0 * nu), |r| h_function(r, params).unwrap_or(f64::NAN))
}

/// Quadrature of the left side of [`conv_g_htilde`].
pub fn conv_g_htilde_quadrature(t: f64, dx: f64, dz: f64, params: &KernelParams) -> Result<f64> {
    require_positive("t", t)?;
    let nu = params.nu;
    h_tilde(t, dz, params)?;
    time_convolution(
        t,
        |s| heat(s, dx, 2.0 * nu),
        |r| h_tilde(r, dz, params).unwrap_or(f64::NAN),
    )
}

/// `int_0^inf e^{-zt} f(t) dt` for `f` growing at most like `e^{growth t}`
/// (`growth < z`) and with at worst a `t^{-1/2}` singularity at 0.
///
/// `[0, T0]` uses `t = w^2`; the tail uses `t = T0 - ln(u)/(z - growth)`.
pub fn laplace_numeric<F>(f: F, z: f64, growth: f64) -> Result<QuadResult>
where
    F: Fn(f64) -> f64,
{
    require_positive("z", z)?;
    require_finite("growth", growth)?;
    let rate = z - growth;
    if rate <= 0.0 {
        return Err(Error::Domain(format!(
            "z = {z} must exceed the growth rate {growth} of the time function"
        )));
    }
    let t0 = 1.0 / z;
    let damped = |t: f64| {
        let w = (-z * t).exp();
        if w == 0.0 {
            0.0
        } else {
            w * f(t)
        }
    };
    let head = |w: f64| {
        let t = w * w;
        if t == 0.0 {
            return 0.0;
        }
        2.0 * w * damped(t)
    };
    let tail = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let t = t0 - u.ln() / rate;
        damped(t) / (u * rate)
    };
    let q = Integrator::new(1e-14, 1e-11);
    Ok(q.finite(head, 0.0, t0.sqrt())? + q.finite(tail, 0.0, 1.0)?)
}

/// Forward checks of every case at the given `z` values; cases whose `z`
/// falls inside a pole band or below the growth rate are skipped.
pub fn laplace_suite(params: &KernelParams, x: f64, x_prime: f64, a: f64, zs: &[f64]) -> Result<Vec<TransformCheck>> {
    let mut out = Vec::new();
    for kind in TransformKind::ALL {
        let case = TransformCase::new(kind, params).at(x).with_x_prime(x_prime).with_level(a);
        for &z in zs {
            if z <= case.growth_rate() {
                continue;
            }
            match case.verify(z) {
                Err(Error::Pole(_)) => continue,
                other => out.push(other?),
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::normal_cdf;

    fn rel(a: f64, b: f64) -> f64 {
        if a == b {
            0.0
        } else {
            ((a - b) / b).abs()
        }
    }

    fn p(nu: f64, lambda: f64) -> KernelParams {
        KernelParams::new(nu, lambda).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        let pr = p(1.0, 1.0);
        let lap_g = TransformCase::new(TransformKind::LapG, &pr);
        assert_eq!(lap_g.laplace_closed(1.0).unwrap(), 0.5);
        let ga = TransformCase::new(TransformKind::LapGa, &pr).with_level(1.0);
        assert!(rel(ga.laplace_closed(1.0).unwrap(), 0.609_403_280_568_757_5) < 1e-14);
        let f2 = TransformCase::new(TransformKind::F2, &pr);
        assert_eq!(f2.laplace_closed(2.0).unwrap(), 0.125);

        assert!(lap_g.laplace_closed(0.0).is_err());
        let f1m = TransformCase::new(TransformKind::F1Minus, &pr);
        assert!(matches!(f1m.laplace_closed(0.25), Err(Error::Pole(_))));
        assert!(matches!(f1m.laplace_closed(0.25 * 1.0001), Err(Error::Pole(_))));
        assert!(f1m.laplace_closed(0.3).is_ok());
    }

    #[test]
    fn partial_fractions_agree() {
        for &(nu, lambda) in &[(1.0, 1.0), (0.5, 1.7), (3.0, 0.4)] {
            let pr = p(nu, lambda);
            for &z in &[0.3, 1.0, 3.0, 17.0] {
                let (a, b) = laplace_h(z, &pr);
                if (2.0 * (nu * z).sqrt() - pr.lambda_sq()).abs() < 1e-2 {
                    continue;
                }
                assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn product_decomposes_into_f_terms() {
        let pr = p(1.3, 0.9);
        for &z in &[0.7, 2.0] {
            for &x in &[0.0, 0.8] {
                let c = |k| TransformCase::new(k, &pr).at(x).laplace_closed(z).unwrap();
                let lhs = c(TransformKind::LapH) * c(TransformKind::LapG);
                let rhs = c(TransformKind::F1Minus) - c(TransformKind::F1Plus) + c(TransformKind::F2)
                    + c(TransformKind::F3Minus)
                    - c(TransformKind::F3Plus);
                assert!(rel(lhs, rhs) < 1e-13);
                assert!(rel(lhs, 2.0 * c(TransformKind::F1Minus)) < 1e-13);
                assert!(rel(lhs, c(TransformKind::ConvGH)) < 1e-13);
            }
        }
    }

    #[test]
    fn inverse_examples() {
        let pr = p(1.0, 1.0);
        let v = inverse_transform_f1(1.0, 1.0, Sign::Minus, &pr).unwrap();
        assert!(rel(v, (-0.25f64).exp() / 8.0) < 1e-15);
        // x = 0, minus: (1/8nu) e^{l4 t/4nu} 2 Phi(l2 sqrt(t/2nu))
        let pr2 = p(0.7, 1.3);
        let t = 0.9;
        let v = inverse_transform_f1(t, 0.0, Sign::Minus, &pr2).unwrap();
        let expect = (pr2.lambda_4() * t / 2.8).exp() * 2.0 * normal_cdf(pr2.lambda_sq() * (t / 1.4).sqrt()) / 5.6;
        assert!(rel(v, expect) < 1e-14);
    }

    #[test]
    fn convolution_examples() {
        let pr = p(1.0, 1.0);
        let v = conv_g_h(1.0, 1.0, &pr).unwrap();
        assert!(rel(v, 0.25 * (-0.25f64).exp()) < 1e-15);
        let v = conv_g_htilde(1.0, 1.0, 1.0, &pr).unwrap();
        let expect = 0.5 * (-0.75f64).exp() * normal_cdf(-std::f64::consts::FRAC_1_SQRT_2);
        assert!(rel(v, expect) < 1e-15);
        assert!((v - 0.05663).abs() < 1e-5);
        assert_eq!(conv_g_htilde(0.7, 0.0, 0.0, &pr).unwrap(), conv_g_h(0.7, 0.0, &pr).unwrap());
        assert_eq!(conv_g_htilde(0.7, 0.3, -0.5, &pr).unwrap(), conv_g_htilde(0.7, -0.5, 0.3, &pr).unwrap());
    }

    #[test]
    fn convolutions_match_quadrature() {
        for &(t, dx, dz, nu, lambda) in &[
            (1.0, 0.0, 0.0, 1.0, 1.0),
            (1.0, 1.0, 1.0, 1.0, 1.0),
            (0.3, 0.2, 0.5, 2.0, 0.7),
            (2.5, -0.6, 1.1, 0.5, 1.2),
        ] {
            let pr = p(nu, lambda);
            let a = conv_g_h(t, dz, &pr).unwrap();
            let b = conv_g_h_quadrature(t, dz, &pr).unwrap();
            assert!(rel(b, a) < 1e-7, "G*H t={t} dz={dz}: {a} vs {b}");
            let a = conv_g_htilde(t, dx, dz, &pr).unwrap();
            let b = conv_g_htilde_quadrature(t, dx, dz, &pr).unwrap();
            assert!(rel(b, a) < 1e-7, "G*H~ t={t} dx={dx} dz={dz}: {a} vs {b}");
        }
        // Zero coupling still satisfies both identities.
        let pr = p(1.0, 0.0);
        let a = conv_g_h(1.0, 0.4, &pr).unwrap();
        assert!(rel(conv_g_h_quadrature(1.0, 0.4, &pr).unwrap(), a) < 1e-7);
    }

    #[test]
    fn numeric_laplace_examples() {
        let one = laplace_numeric(|_| 1.0, 1.0, 0.0).unwrap().value;
        assert!((one - 1.0).abs() < 1e-10);
        let g = laplace_numeric(|t| heat(t, 0.0, 2.0), 1.0, 0.0).unwrap().value;
        assert!((g - 0.5).abs() < 1e-9);
        let ga = laplace_numeric(|t| crate::local_time::first_passage_kernel(t, 1.0), 1.0, 0.0)
            .unwrap()
            .value;
        assert!((ga - (2.0 * PI).sqrt() * (-std::f64::consts::SQRT_2).exp()).abs() < 1e-8);
        assert!(laplace_numeric(|t| t.exp(), 0.5, 1.0).is_err());
    }

    #[test]
    fn every_case_round_trips() {
        let pr = p(1.0, 1.0);
        let checks = laplace_suite(&pr, 0.7, 0.4, 1.0, &[0.3, 1.0, 3.0]).unwrap();
        assert_eq!(checks.len(), 30);
        for c in &checks {
            assert!(c.rel_err < 1e-7, "{c:?}");
        }
    }
}
