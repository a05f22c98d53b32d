//! Closed-form kernels for the second moment and the equal-time two-point
//! correlation of the linear equation `rho(u) = lambda u`.
//!
//! All exponential-times-CDF products are evaluated through
//! [`exp_phi`](crate::gaussian::exp_phi); `lambda^4 t / (4 nu)` leaves the
//! range of `f64::exp` long before the products themselves do.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{require_finite, require_positive, Error, Result};
use crate::gaussian::{exp_phi, heat, KernelParams};
use crate::measure::{self, InitialMeasure};

/// Equal-time observation `(t, x1, x2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPointQuery {
    pub t: f64,
    pub x1: f64,
    pub x2: f64,
}

impl TwoPointQuery {
    pub fn new(t: f64, x1: f64, x2: f64) -> Result<Self> {
        require_positive("t", t)?;
        require_finite("x1", x1)?;
        require_finite("x2", x2)?;
        Ok(TwoPointQuery { t, x1, x2 })
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.x1 + self.x2)
    }

    /// `x2 - x1`.
    pub fn separation(&self) -> f64 {
        self.x2 - self.x1
    }
}

fn check_t(t: f64) -> Result<()> {
    require_positive("t", t)
}

/// The space-time kernel
/// `K(t,x) = G_{nu/2}(t,x) (lambda^2/sqrt(4 pi nu t) + lambda^4/(2nu) e^{lambda^4 t/(4nu)} Phi(lambda^2 sqrt(t/(2nu))))`.
pub fn kernel_k(t: f64, x: f64, params: &KernelParams) -> Result<f64> {
    check_t(t)?;
    require_finite("x", x)?;
    let l2 = params.lambda_sq();
    Ok(l2 * heat(t, x, 0.5 * params.nu) * h_function(t, params)?)
}

/// `H(t) = 1/sqrt(4 pi nu t) + lambda^2/(2nu) e^{lambda^4 t/(4nu)} Phi(lambda^2 sqrt(t/(2nu)))`.
pub fn h_function(t: f64, params: &KernelParams) -> Result<f64> {
    check_t(t)?;
    let nu = params.nu;
    let l2 = params.lambda_sq();
    let base = 1.0 / (4.0 * PI * nu * t).sqrt();
    if l2 == 0.0 {
        return Ok(base);
    }
    let growth = exp_phi(params.lambda_4() * t / (4.0 * nu), l2 * (t / (2.0 * nu)).sqrt())?;
    Ok(base + l2 / (2.0 * nu) * growth)
}

/// `H~(t,x) = G_{2nu}(t,x) + lambda^2/(2nu) e^{-lambda^2|x|/(2nu) + lambda^4 t/(4nu)} Phi(lambda^2 sqrt(t/(2nu)) - |x|/sqrt(2 nu t))`.
pub fn h_tilde(t: f64, x: f64, params: &KernelParams) -> Result<f64> {
    check_t(t)?;
    require_finite("x", x)?;
    let nu = params.nu;
    let g = heat(t, x, 2.0 * nu);
    Ok(g + tail_term(t, x.abs(), params)?)
}

/// `lambda^2/(2nu) e^{-lambda^2 s/(2nu) + lambda^4 t/(4nu)} Phi(lambda^2 sqrt(t)/sqrt(2nu) - s/sqrt(2 nu t))`
/// for a nonnegative distance `s`; the common factor of `K~`, `K-dagger`
/// and the time convolutions.
pub(crate) fn tail_term(t: f64, s: f64, params: &KernelParams) -> Result<f64> {
    let l2 = params.lambda_sq();
    if l2 == 0.0 {
        return Ok(0.0);
    }
    let nu = params.nu;
    let c = -l2 * s / (2.0 * nu) + params.lambda_4() * t / (4.0 * nu);
    let d = l2 * (t / (2.0 * nu)).sqrt() - s / (2.0 * nu * t).sqrt();
    Ok(l2 / (2.0 * nu) * exp_phi(c, d)?)
}

/// Convolution-form `K-dagger(t, z1, z2, y)`.
pub fn kernel_k_dagger(t: f64, z1: f64, z2: f64, y: f64, params: &KernelParams) -> Result<f64> {
    check_t(t)?;
    let nu = params.nu;
    let l2 = params.lambda_sq();
    if l2 == 0.0 {
        return Ok(0.0);
    }
    let s = y.abs() + (y - (z1 - z2)).abs();
    let c = l2 / (4.0 * nu) * (l2 * t - 2.0 * s);
    let d = (l2 * t - s) / (2.0 * nu * t).sqrt();
    Ok(l2 / (2.0 * nu) * heat(t, 0.5 * (z1 + z2), 0.5 * nu) * exp_phi(c, d)?)
}

/// Convolution-form `K*(t, z1, z2, y)` in its factored form
/// `G_{nu/2}(t, zbar) [G_{2nu}(t, z1 - z2) + tail]`.
pub fn kernel_k_star(t: f64, z1: f64, z2: f64, y: f64, params: &KernelParams) -> Result<f64> {
    check_t(t)?;
    let nu = params.nu;
    let s = y.abs() + (y - (z1 - z2)).abs();
    let bracket = heat(t, z1 - z2, 2.0 * nu) + tail_term_raw(t, s, params)?;
    Ok(heat(t, 0.5 * (z1 + z2), 0.5 * nu) * bracket)
}

// Same as `tail_term` but written in the `(lambda^2/(4nu)) [lambda^2 t - 2s]`
// grouping of the convolution form.
fn tail_term_raw(t: f64, s: f64, params: &KernelParams) -> Result<f64> {
    let l2 = params.lambda_sq();
    if l2 == 0.0 {
        return Ok(0.0);
    }
    let nu = params.nu;
    let c = l2 / (4.0 * nu) * (l2 * t - 2.0 * s);
    let d = (l2 * t - s) / (2.0 * nu * t).sqrt();
    Ok(l2 / (2.0 * nu) * exp_phi(c, d)?)
}

/// Inner-product-form `K*(t, x1, x2, z1, z2)`.
pub fn kernel_k_star_inner(t: f64, x1: f64, x2: f64, z1: f64, z2: f64, params: &KernelParams) -> Result<f64> {
    check_t(t)?;
    let nu = params.nu;
    let (xbar, dx) = (0.5 * (x1 + x2), x2 - x1);
    let (zbar, dz) = (0.5 * (z1 + z2), z2 - z1);
    let bracket = heat(t, dx - dz, 2.0 * nu) + tail_term(t, dx.abs() + dz.abs(), params)?;
    Ok(heat(t, xbar - zbar, 0.5 * nu) * bracket)
}

/// Inner-product-form `K-dagger(t, x1, x2, z1, z2)`.
pub fn kernel_k_dagger_inner(t: f64, x1: f64, x2: f64, z1: f64, z2: f64, params: &KernelParams) -> Result<f64> {
    check_t(t)?;
    let nu = params.nu;
    let (xbar, dx) = (0.5 * (x1 + x2), x2 - x1);
    let (zbar, dz) = (0.5 * (z1 + z2), z2 - z1);
    Ok(heat(t, xbar - zbar, 0.5 * nu) * tail_term(t, dx.abs() + dz.abs(), params)?)
}

/// `E[u(t,x1) u(t,x2)]` for `u(0) = delta_0`.
pub fn two_point_delta(q: &TwoPointQuery, params: &KernelParams) -> Result<f64> {
    check_t(q.t)?;
    let nu = params.nu;
    let t = q.t;
    let product = heat(t, q.x1, nu) * heat(t, q.x2, nu);
    let l2 = params.lambda_sq();
    if l2 == 0.0 {
        return Ok(product);
    }
    let sep = q.separation().abs();
    let c = l2 * (l2 * t - 2.0 * sep) / (4.0 * nu);
    let d = (l2 * t - sep) / (2.0 * nu * t).sqrt();
    Ok(product + l2 / (2.0 * nu) * heat(t, q.midpoint(), 0.5 * nu) * exp_phi(c, d)?)
}

/// `E[u(t,x1) u(t,x2)]` for Lebesgue initial measure (`u(0) = 1`).
/// Depends on the points only through `|x1 - x2|`.
pub fn two_point_lebesgue(q: &TwoPointQuery, params: &KernelParams) -> Result<f64> {
    check_t(q.t)?;
    let nu = params.nu;
    let t = q.t;
    let l2 = params.lambda_sq();
    let sep = q.separation().abs();
    let scale = (2.0 * nu * t).sqrt();
    let c = (params.lambda_4() * t - 2.0 * l2 * sep) / (4.0 * nu);
    let d = (l2 * t - sep) / scale;
    // 2 Phi(a) - 1 = erf(a / sqrt 2) keeps precision when a is small.
    let central = libm::erf(sep / scale * std::f64::consts::FRAC_1_SQRT_2);
    Ok(2.0 * exp_phi(c, d)? + central)
}

/// `E[exp(lambda^2 L_t^x)]` for the local time of a standard Brownian motion.
pub fn mgf_local_time(t: f64, x: f64, lambda: f64) -> Result<f64> {
    check_t(t)?;
    require_finite("x", x)?;
    require_finite("lambda", lambda)?;
    let l2 = lambda * lambda;
    let ax = x.abs();
    let sqrt_t = t.sqrt();
    let central = libm::erf(ax / sqrt_t * std::f64::consts::FRAC_1_SQRT_2);
    Ok(2.0 * exp_phi(0.5 * l2 * l2 * t - l2 * ax, l2 * sqrt_t - ax / sqrt_t)? + central)
}

/// Parameters of the `p`-th moment comparison bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentBoundParams {
    pub p: f64,
    /// Upper Lipschitz-type constant: `|rho(x)| <= lip_upper |x|`.
    pub lip_upper: f64,
    /// Lower constant: `|rho(x)| >= lip_lower |x|`.
    pub lip_lower: f64,
}

impl MomentBoundParams {
    pub fn new(p: f64, lip_upper: f64, lip_lower: f64) -> Result<Self> {
        if !(p >= 2.0 && p.is_finite()) {
            return Err(Error::Domain(format!("moment order p must be >= 2, got {p}")));
        }
        if !(lip_upper >= 0.0 && lip_upper.is_finite()) || !(lip_lower >= 0.0 && lip_lower.is_finite()) {
            return Err(Error::Domain("Lipschitz constants must be finite and nonnegative".into()));
        }
        Ok(MomentBoundParams { p, lip_upper, lip_lower })
    }

    /// 1 when `p = 2`, else 2.
    pub fn c_p(&self) -> f64 {
        if self.p == 2.0 {
            1.0
        } else {
            2.0
        }
    }

    /// `c_p^2 sqrt(p/2) lip_upper`, the coupling substituted into `K*`.
    pub fn effective_lambda(&self) -> f64 {
        let c = self.c_p();
        c * c * (0.5 * self.p).sqrt() * self.lip_upper
    }
}

/// Upper bound on `||u(t,x)||_p^2` (the SQUARED `p`-norm) for
/// `|rho(x)| <= lip_upper |x|`:
/// `c_p * iint |mu|(dz1) |mu|(dz2) K*(t, x-z1, x-z2, 0; c_p^2 sqrt(p/2) lip_upper)`.
///
/// For a [`InitialMeasure::Sum`] the total variation is taken termwise, which
/// can only enlarge the bound.
pub fn p_moment_upper_bound(
    t: f64,
    x: f64,
    mu: &InitialMeasure,
    bounds: &MomentBoundParams,
    nu: f64,
) -> Result<f64> {
    let params = KernelParams::new(nu, bounds.effective_lambda())?;
    let abs_mu = mu.total_variation();
    Ok(bounds.c_p() * measure::second_moment(t, x, &abs_mu, &params)?)
}

/// Lower bound on `||u(t,x)||_2^2` for `|rho(x)| >= lip_lower |x|` and a
/// nonnegative initial measure.
pub fn second_moment_lower_bound(t: f64, x: f64, mu: &InitialMeasure, lip_lower: f64, nu: f64) -> Result<f64> {
    if !(lip_lower >= 0.0 && lip_lower.is_finite()) {
        return Err(Error::Domain(format!("lip_lower must be nonnegative, got {lip_lower}")));
    }
    if !mu.is_nonnegative() {
        return Err(Error::Contract("the lower moment bound requires a nonnegative initial measure".into()));
    }
    let params = KernelParams::new(nu, lip_lower)?;
    measure::second_moment(t, x, mu, &params)
}
