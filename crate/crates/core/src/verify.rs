//! Deterministic verification suites: each check compares two independent
//! evaluations of the same quantity and reports the achieved error against
//! its tolerance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::gaussian::{check_gaussian_moment_bound, heat, KernelParams};
use crate::kernels::{
    kernel_k, kernel_k_dagger, kernel_k_star, kernel_k_star_inner, mgf_local_time, p_moment_upper_bound,
    second_moment_lower_bound, two_point_delta, two_point_lebesgue, MomentBoundParams, TwoPointQuery,
};
use crate::local_time::{
    expect_joint, first_passage_convolution, marginal_v_by_quadrature, marginal_y_by_quadrature, JointLocalTimeLaw,
    FIRST_PASSAGE_FACTOR,
};
use crate::measure::{dagger_double_integral, second_moment, InitialMeasure};
use crate::quadrature::Integrator;
use crate::transforms::{conv_g_h, conv_g_h_quadrature, conv_g_htilde, conv_g_htilde_quadrature, laplace_h, laplace_suite};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub measured_err: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, measured_err: f64, tolerance: f64) -> Self {
        let status = if measured_err <= tolerance { Status::Pass } else { Status::Fail };
        Check {
            name: name.into(),
            status,
            measured_err,
            tolerance,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Laplace,
    Identities,
    LocalTime,
    All,
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "laplace" => Ok(Suite::Laplace),
            "identities" => Ok(Suite::Identities),
            "local-time" => Ok(Suite::LocalTime),
            "all" => Ok(Suite::All),
            other => Err(format!("unknown suite '{other}' (laplace, identities, local-time, all)")),
        }
    }
}

pub fn run_suite(suite: Suite) -> Result<Vec<Check>> {
    Ok(match suite {
        Suite::Laplace => laplace_checks()?,
        Suite::Identities => identity_checks()?,
        Suite::LocalTime => local_time_checks()?,
        Suite::All => {
            let mut all = laplace_checks()?;
            all.extend(identity_checks()?);
            all.extend(local_time_checks()?);
            all
        }
    })
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        ((a - b) / b).abs()
    }
}

/// Worst-case summary of a batch of errors as a single check.
fn worst(name: &str, errs: impl IntoIterator<Item = f64>, tolerance: f64) -> Check {
    let m = errs.into_iter().fold(0.0, |m: f64, e| if e.is_nan() { f64::INFINITY } else { m.max(e) });
    Check::new(name, m, tolerance)
}

pub fn laplace_checks() -> Result<Vec<Check>> {
    let params = KernelParams::new(1.0, 1.0)?;
    let mut out: Vec<Check> = laplace_suite(&params, 0.7, 0.4, 1.0, &[0.3, 1.0, 3.0])?
        .into_iter()
        .map(|c| Check::new(format!("laplace {} z={}", c.case, c.z), c.rel_err, 1e-7))
        .collect();
    let mut errs = Vec::new();
    for &(nu, lambda) in &[(1.0, 1.0), (0.5, 1.7), (3.0, 0.4)] {
        let p = KernelParams::new(nu, lambda)?;
        for &z in &[0.3, 1.0, 3.0] {
            let (printed, recomposed) = laplace_h(z, &p);
            errs.push((printed - recomposed).abs() / printed.abs().max(1.0));
        }
    }
    out.push(worst("laplace H partial fractions", errs, 1e-12));
    Ok(out)
}

/// Draws for the pointwise kernel identities.
fn kernel_draw(rng: &mut ChaCha8Rng) -> (f64, [f64; 4], KernelParams) {
    let t = rng.random_range(0.01..5.0);
    let pts = [
        rng.random_range(-4.0..4.0),
        rng.random_range(-4.0..4.0),
        rng.random_range(-4.0..4.0),
        rng.random_range(-4.0..4.0),
    ];
    let nu = rng.random_range(0.3..5.0);
    let lambda = rng.random_range(-2.0..2.0);
    (t, pts, KernelParams::new(nu, lambda).expect("finite draw"))
}

pub fn kernel_decomposition_errors(draws: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut errs = Vec::with_capacity(draws);
    for _ in 0..draws {
        let (t, [z1, z2, y, _], p) = kernel_draw(&mut rng);
        let star = kernel_k_star(t, z1, z2, y, &p)?;
        let sum = heat(t, z1, p.nu) * heat(t, z2, p.nu) + kernel_k_dagger(t, z1, z2, y, &p)?;
        errs.push(rel(star, sum));
    }
    Ok(errs)
}

pub fn form_equivalence_errors(draws: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut errs = Vec::with_capacity(draws);
    for _ in 0..draws {
        let (t, [x1, x2, z1, z2], p) = kernel_draw(&mut rng);
        let inner = kernel_k_star_inner(t, x1, x2, z1, z2, &p)?;
        let conv = kernel_k_star(t, x1 - z1, x2 - z2, x1 - x2, &p)?;
        errs.push(rel(inner, conv));
    }
    Ok(errs)
}

/// `(t, dx, lambda)` grid for the Lebesgue and convolution identities.
pub const IDENTITY_GRID: [(f64, f64, f64); 9] = [
    (0.3, 0.0, 1.0),
    (0.3, 0.7, 0.5),
    (0.3, 2.0, 1.5),
    (1.0, 0.0, 0.5),
    (1.0, 0.7, 1.5),
    (1.0, 2.0, 1.0),
    (2.0, 0.0, 1.5),
    (2.0, 0.7, 1.0),
    (2.0, 2.0, 0.5),
];

/// `iint K-dagger dz1 dz2` against `two_point_lebesgue - 1`.
pub fn lebesgue_identity_errors() -> Result<Vec<f64>> {
    let mut errs = Vec::new();
    for &(t, dx, lambda) in &IDENTITY_GRID {
        let p = KernelParams::new(1.0, lambda)?;
        let q = TwoPointQuery::new(t, -0.3, -0.3 + dx)?;
        let quad = dagger_double_integral(&q, &InitialMeasure::lebesgue(), &p)?;
        errs.push(rel(quad, two_point_lebesgue(&q, &p)? - 1.0));
    }
    Ok(errs)
}

/// Second moment for `mu = delta_0` through the measure machinery against
/// `lambda^-2 K(t, x)`.
pub fn delta_second_moment_errors() -> Result<Vec<f64>> {
    let mut errs = Vec::new();
    for &(t, x, lambda) in &IDENTITY_GRID {
        let p = KernelParams::new(1.0, lambda)?;
        let v = second_moment(t, x, &InitialMeasure::delta(0.0), &p)?;
        errs.push(rel(v, kernel_k(t, x, &p)? / p.lambda_sq()));
    }
    Ok(errs)
}

pub fn convolution_identity_errors() -> Result<Vec<f64>> {
    let mut errs = Vec::new();
    for &(t, d, lambda) in &IDENTITY_GRID {
        let p = KernelParams::new(1.0, lambda)?;
        errs.push(rel(conv_g_h_quadrature(t, d, &p)?, conv_g_h(t, d, &p)?));
        errs.push(rel(conv_g_htilde_quadrature(t, 0.5 * d, d, &p)?, conv_g_htilde(t, 0.5 * d, d, &p)?));
    }
    Ok(errs)
}

/// For `rho(u) = lambda u` both moment bounds coincide with the exact
/// second moment.
pub fn linear_sandwich_errors() -> Result<Vec<f64>> {
    let mut errs = Vec::new();
    for &(t, x, lambda) in &IDENTITY_GRID {
        let bounds = MomentBoundParams::new(2.0, lambda, lambda)?;
        let p = KernelParams::new(1.0, lambda)?;
        let q = TwoPointQuery::new(t, x, x)?;
        for (mu, exact) in [
            (InitialMeasure::delta(0.0), two_point_delta(&q, &p)?),
            (InitialMeasure::lebesgue(), two_point_lebesgue(&q, &p)?),
        ] {
            let upper = p_moment_upper_bound(t, x, &mu, &bounds, 1.0)?;
            let lower = second_moment_lower_bound(t, x, &mu, lambda, 1.0)?;
            errs.push(rel(upper, exact).max(rel(lower, exact)));
        }
    }
    Ok(errs)
}

/// Draws `(s, t, x, ys)` with `s, t` log-uniform on `[0.05, 5]`,
/// `p` in `1..=4`, `x, y` uniform on `[-3, 3]`.
pub fn gaussian_bound_draws(n: usize, seed: u64) -> Vec<(f64, f64, f64, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let s = (rng.random_range(0.05f64.ln()..5.0f64.ln())).exp();
            let t = (rng.random_range(0.05f64.ln()..5.0f64.ln())).exp();
            let x = rng.random_range(-3.0..3.0);
            let p = rng.random_range(1..=4);
            let ys = (0..p).map(|_| rng.random_range(-3.0..3.0)).collect();
            (s, t, x, ys)
        })
        .collect()
}

/// Largest relative excess `lhs / rhs - 1` (zero when the bound holds
/// with the `1e-9` slack).
pub fn gaussian_bound_excess(draws: &[(f64, f64, f64, Vec<f64>)]) -> Result<Vec<f64>> {
    draws
        .iter()
        .map(|(s, t, x, ys)| {
            let (lhs, rhs) = check_gaussian_moment_bound(*s, *t, *x, ys)?;
            Ok((lhs / (rhs * (1.0 + 1e-9)) - 1.0).max(0.0))
        })
        .collect()
}

pub fn identity_checks() -> Result<Vec<Check>> {
    let mut out = vec![
        worst("K* = G G + K-dagger (1000 draws)", kernel_decomposition_errors(1000, 1)?, 1e-12),
        worst("inner-product form = convolution form (1000 draws)", form_equivalence_errors(1000, 2)?, 1e-12),
        worst("Lebesgue: iint K-dagger = closed form - 1", lebesgue_identity_errors()?, 1e-6),
        worst("delta: second moment = K / lambda^2", delta_second_moment_errors()?, 1e-8),
        worst("time convolutions G*H and G*H~", convolution_identity_errors()?, 1e-7),
        worst("linear rho: upper = lower = exact (p = 2)", linear_sandwich_errors()?, 1e-10),
    ];
    let draws = gaussian_bound_draws(200, 3);
    out.push(worst(
        "Gaussian product moment bound (200 draws)",
        gaussian_bound_excess(&draws)?,
        0.0,
    ));
    let restricted: Vec<_> = draws
        .into_iter()
        .filter(|(s, t, _, ys)| {
            let p = ys.len() as f64;
            2.0 * p * s <= (p - 1.0) * t
        })
        .collect();
    out.push(worst(
        "Gaussian product moment bound where 2ps <= (p-1)t",
        gaussian_bound_excess(&restricted)?,
        0.0,
    ));
    Ok(out)
}

/// `(t, a)` pairs for the joint-law checks.
pub fn joint_law_grid() -> Vec<(f64, f64)> {
    let mut v = Vec::new();
    for &t in &[0.5, 1.0, 4.0] {
        for &a in &[-2.0, -0.5, 0.0, 1.0, 3.0] {
            v.push((t, a));
        }
    }
    v
}

pub fn joint_mass_errors(q: &Integrator) -> Result<Vec<f64>> {
    joint_law_grid()
        .into_iter()
        .map(|(t, a)| {
            let law = JointLocalTimeLaw::new(t, a)?;
            Ok((expect_joint(&law, |_| 1.0, q)? - 1.0).abs())
        })
        .collect()
}

pub fn marginal_y_errors(q: &Integrator) -> Result<Vec<f64>> {
    let mut errs = Vec::new();
    for (t, a) in joint_law_grid() {
        let law = JointLocalTimeLaw::new(t, a)?;
        for k in 0..20 {
            let y = -4.0 + 8.0 * k as f64 / 19.0;
            errs.push((marginal_y_by_quadrature(&law, y, q)? - heat(t, y, 1.0)).abs());
        }
    }
    Ok(errs)
}

pub fn marginal_v_errors(q: &Integrator) -> Result<Vec<f64>> {
    let mut errs = Vec::new();
    for (t, a) in joint_law_grid() {
        let law = JointLocalTimeLaw::new(t, a)?;
        for &v in &[0.01, 0.3, 1.0, 2.5] {
            errs.push((marginal_v_by_quadrature(&law, v, q)? - law.marginal_l(v)?.0).abs());
        }
    }
    Ok(errs)
}

/// Quadrature of `e^{lambda^2 v}` against the joint law vs the closed MGF,
/// over the grid with `lambda^2 sqrt(t) <= 2`.
pub fn mgf_quadrature_errors(q: &Integrator) -> Result<Vec<f64>> {
    let mut errs = Vec::new();
    for (t, a) in joint_law_grid() {
        for &lambda in &[0.5, 1.0] {
            if lambda * lambda * f64::sqrt(t) > 2.0 {
                continue;
            }
            let law = JointLocalTimeLaw::new(t, a)?;
            let l2 = lambda * lambda;
            let num = expect_joint(&law, |v| (l2 * v).exp(), q)?;
            errs.push(rel(num, mgf_local_time(t, a, lambda)?));
        }
    }
    Ok(errs)
}

/// Closed-form MGF against its bound `2 e^{lambda^4 t/2} + 1` on random
/// draws; returns the largest `value / bound - 1` clipped at zero.
pub fn mgf_bound_excess(draws: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..draws)
        .map(|_| {
            let t = rng.random_range(0.01..5.0);
            let x = rng.random_range(-5.0..5.0);
            let lambda: f64 = rng.random_range(-1.5..1.5);
            let v = mgf_local_time(t, x, lambda)?;
            let bound = 2.0 * (0.5 * lambda.powi(4) * t).exp() + 1.0;
            Ok((v / bound - 1.0).max(0.0).max(if v >= 1.0 - 1e-15 { 0.0 } else { 1.0 }))
        })
        .collect()
}

pub fn first_passage_factor_errors(draws: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut errs = vec![rel(first_passage_convolution(1.0, 1.0, 1.0)?.factor, FIRST_PASSAGE_FACTOR)];
    for _ in 0..draws {
        let t = rng.random_range(0.1..5.0);
        let a = nonzero(&mut rng);
        let b = nonzero(&mut rng);
        errs.push(rel(first_passage_convolution(t, a, b)?.factor, FIRST_PASSAGE_FACTOR));
    }
    Ok(errs)
}

/// `lhs(c^2 t, c a, c b) = c^{-2} lhs(t, a, b)`.
pub fn first_passage_scaling_errors(draws: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut errs = Vec::with_capacity(draws);
    for _ in 0..draws {
        let t = rng.random_range(0.1..5.0);
        let a = nonzero(&mut rng);
        let b = nonzero(&mut rng);
        let c: f64 = rng.random_range(0.3..3.0);
        let base = first_passage_convolution(t, a, b)?.lhs;
        let scaled = first_passage_convolution(c * c * t, c * a, c * b)?.lhs;
        errs.push(rel(scaled, base / (c * c)));
    }
    Ok(errs)
}

fn nonzero(rng: &mut ChaCha8Rng) -> f64 {
    let m: f64 = rng.random_range(0.05..3.0);
    if rng.random::<bool>() {
        m
    } else {
        -m
    }
}

pub fn local_time_checks() -> Result<Vec<Check>> {
    let q = Integrator::new(1e-13, 1e-11);
    Ok(vec![
        worst("joint law total mass (15 (t,a) pairs)", joint_mass_errors(&q)?, 1e-8),
        worst("marginal over v = G_1(t, y)", marginal_y_errors(&q)?, 1e-8),
        worst("marginal over y = law of L", marginal_v_errors(&q)?, 1e-8),
        worst("E[e^(lambda^2 L)] by quadrature = closed form", mgf_quadrature_errors(&q)?, 1e-7),
        worst("MGF <= 2 e^(lambda^4 t/2) + 1 (1000 draws)", mgf_bound_excess(1000, 4)?, 0.0),
        worst("first-passage convolution: lhs = 2 pi rhs", first_passage_factor_errors(200, 5)?, 1e-7),
        worst("first-passage convolution scaling c^-2", first_passage_scaling_errors(200, 6)?, 1e-9),
    ])
}
