//! Feynman-Kac estimators of `E[u(t,x1) u(t,x2)]` for `rho(u) = lambda u`:
//!
//! `E[u0(x1 + (W1 + W2)/2) u0(x2 + (W2 - W1)/2) exp(lambda^2/(2nu) L)]`
//!
//! with `W1, W2` independent Brownian motions run to time `2 nu t` and `L`
//! the local time of `W1` at `x2 - x1`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{run_paths, summarize, McConfig, PathValue, SimOutcome};
use crate::error::{require_positive, Error, Result};
use crate::gaussian::heat;
use crate::kernels::TwoPointQuery;
use crate::local_time::JointLocalTimeLaw;
use crate::measure::{Density, GrowthCertificate, InitialMeasure};

/// Bounded initial functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InitialFunction {
    Constant { value: f64 },
    /// `height` on `[lo, hi]`, zero elsewhere.
    Indicator { lo: f64, hi: f64, height: f64 },
    /// `mass * N(mean, var)(x)`.
    Gaussian { mean: f64, var: f64, mass: f64 },
}

impl InitialFunction {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            InitialFunction::Constant { value } => value.is_finite(),
            InitialFunction::Indicator { lo, hi, height } => lo.is_finite() && hi.is_finite() && lo <= hi && height.is_finite(),
            InitialFunction::Gaussian { mean, var, mass } => mean.is_finite() && var > 0.0 && var.is_finite() && mass.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("initial function {self:?} is not bounded and finite")))
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            InitialFunction::Constant { value } => value,
            InitialFunction::Indicator { lo, hi, height } => {
                if x >= lo && x <= hi {
                    height
                } else {
                    0.0
                }
            }
            InitialFunction::Gaussian { mean, var, mass } => mass * heat(var, x - mean, 1.0),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match *self {
            InitialFunction::Constant { value } => value.abs(),
            InitialFunction::Indicator { height, .. } => height.abs(),
            InitialFunction::Gaussian { var, mass, .. } => mass.abs() * heat(var, 0.0, 1.0),
        }
    }

    /// The measure `u0(x) dx`.
    pub fn to_measure(&self) -> InitialMeasure {
        match *self {
            InitialFunction::Constant { value } => InitialMeasure::Lebesgue(value),
            InitialFunction::Indicator { lo, hi, height } => {
                let f = move |x: f64| if x >= lo && x <= hi { height } else { 0.0 };
                let mut d = Density::new(
                    f,
                    GrowthCertificate::CompactSupport {
                        lo,
                        hi,
                        bound: height.abs(),
                    },
                )
                .labelled(format!("{height}*1[{lo},{hi}]"));
                if height >= 0.0 {
                    d = d.nonnegative();
                }
                InitialMeasure::Density(d)
            }
            InitialFunction::Gaussian { mean, var, mass } => InitialMeasure::Gaussian { mean, var, mass },
        }
    }
}

fn check_inputs(u0: &InitialFunction, nu: f64, lambda: f64) -> Result<()> {
    u0.validate()?;
    require_positive("nu", nu)?;
    if !lambda.is_finite() {
        return Err(Error::Domain(format!("lambda must be finite, got {lambda}")));
    }
    Ok(())
}

/// Unbiased estimator using exact draws of `(W1, L)` from the joint law.
pub fn fk_two_point(q: &TwoPointQuery, u0: &InitialFunction, nu: f64, lambda: f64, mc: &McConfig) -> Result<SimOutcome> {
    check_inputs(u0, nu, lambda)?;
    let horizon = 2.0 * nu * q.t;
    let law = JointLocalTimeLaw::new(horizon, q.x2 - q.x1)?;
    let coupling = lambda * lambda / (2.0 * nu);
    let sd = horizon.sqrt();
    let (x1, x2) = (q.x1, q.x2);
    let u0 = *u0;
    let values = run_paths(mc, |_, rng| {
        let (w1, local) = law.sample(rng)?;
        let w2 = sd * rng.sample::<f64, _>(StandardNormal);
        let weight = if local == 0.0 { 1.0 } else { (coupling * local).exp() };
        Ok(PathValue::Value(
            u0.eval(x1 + 0.5 * (w1 + w2)) * u0.eval(x2 + 0.5 * (w2 - w1)) * weight,
        ))
    })?;
    summarize(&values)
}

/// Estimator with the local time replaced by the mollified occupation
/// integral `int_0^{2 nu t} G_1(eps, W1_s - a) ds` over an Euler path with
/// `n_steps` steps (trapezoid rule). Biased; the bias vanishes as `eps`
/// and the step size go to zero.
pub fn fk_two_point_occupation(
    q: &TwoPointQuery,
    u0: &InitialFunction,
    nu: f64,
    lambda: f64,
    mc: &McConfig,
    eps: f64,
    n_steps: usize,
) -> Result<SimOutcome> {
    check_inputs(u0, nu, lambda)?;
    require_positive("eps", eps)?;
    if n_steps == 0 {
        return Err(Error::Config("n_steps must be positive".into()));
    }
    let horizon = 2.0 * nu * q.t;
    let a = q.x2 - q.x1;
    let h = horizon / n_steps as f64;
    let step_sd = h.sqrt();
    let coupling = lambda * lambda / (2.0 * nu);
    let (x1, x2) = (q.x1, q.x2);
    let u0 = *u0;
    let values = run_paths(mc, |_, rng| {
        let mut w = 0.0f64;
        let mut occupation = 0.5 * heat(eps, w - a, 1.0);
        for k in 1..=n_steps {
            w += step_sd * rng.sample::<f64, _>(StandardNormal);
            let g = heat(eps, w - a, 1.0);
            occupation += if k == n_steps { 0.5 * g } else { g };
        }
        occupation *= h;
        let w2 = horizon.sqrt() * rng.sample::<f64, _>(StandardNormal);
        let weight = if coupling == 0.0 { 1.0 } else { (coupling * occupation).exp() };
        Ok(PathValue::Value(
            u0.eval(x1 + 0.5 * (w + w2)) * u0.eval(x2 + 0.5 * (w2 - w)) * weight,
        ))
    })?;
    summarize(&values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::KernelParams;
    use crate::kernels::two_point_lebesgue;

    const ONE: InitialFunction = InitialFunction::Constant { value: 1.0 };

    #[test]
    fn zero_coupling_is_exact() {
        let q = TwoPointQuery::new(1.0, 0.0, 0.5).unwrap();
        let out = fk_two_point(&q, &ONE, 1.0, 0.0, &McConfig::new(500, 3)).unwrap();
        assert_eq!(out.estimate.value, 1.0);
        assert_eq!(out.estimate.std_error, 0.0);
        let out = fk_two_point_occupation(&q, &ONE, 1.0, 0.0, &McConfig::new(50, 3), 1e-2, 100).unwrap();
        assert_eq!(out.estimate.value, 1.0);
        assert_eq!(out.estimate.std_error, 0.0);
    }

    #[test]
    fn constant_data_matches_closed_form() {
        let pr = KernelParams::new(1.0, 1.0).unwrap();
        for &dx in &[0.0, 1.0] {
            let q = TwoPointQuery::new(1.0, 0.0, dx).unwrap();
            let out = fk_two_point(&q, &ONE, 1.0, 1.0, &McConfig::new(100_000, 11).with_workers(2)).unwrap();
            let z = out.estimate.z_score(two_point_lebesgue(&q, &pr).unwrap());
            assert!(z.abs() < 4.0, "dx={dx} z={z} {:?}", out.estimate);
        }
    }

    #[test]
    fn occupation_estimator_is_close() {
        let pr = KernelParams::new(1.0, 1.0).unwrap();
        let q = TwoPointQuery::new(1.0, 0.0, 0.0).unwrap();
        let out = fk_two_point_occupation(&q, &ONE, 1.0, 1.0, &McConfig::new(4000, 5).with_workers(4), 1e-3, 2000).unwrap();
        let exact = two_point_lebesgue(&q, &pr).unwrap();
        assert!(((out.estimate.value - exact) / exact).abs() < 0.1, "{:?} vs {exact}", out.estimate);
    }

    #[test]
    fn initial_functions() {
        let ind = InitialFunction::Indicator { lo: -1.0, hi: 1.0, height: 2.0 };
        assert_eq!(ind.eval(0.5), 2.0);
        assert_eq!(ind.eval(1.5), 0.0);
        assert_eq!(ind.sup_norm(), 2.0);
        let mu = ind.to_measure();
        assert!(mu.is_nonnegative());
        assert_eq!(mu.continuous_density(-0.9), 2.0);
        assert!(InitialFunction::Constant { value: f64::INFINITY }.validate().is_err());
        assert!(InitialFunction::Gaussian { mean: 0.0, var: 0.0, mass: 1.0 }.validate().is_err());
        let json = serde_json::to_string(&ind).unwrap();
        assert_eq!(json, r#"{"type":"indicator","lo":-1.0,"hi":1.0,"height":2.0}"#);
    }
}
