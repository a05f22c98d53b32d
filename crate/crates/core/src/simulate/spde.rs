//! Explicit finite-difference scheme for `du = (nu/2) u'' dt + rho(u) W(dt, dx)`:
//!
//! `u_j += (nu dt / 2dx^2)(u_{j+1} - 2u_j + u_{j-1}) + rho(u_j) sqrt(dt/dx) xi_j`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{run_paths, summarize, McConfig, PathValue, SimOutcome};
use crate::error::{Error, Result};
use crate::kernels::TwoPointQuery;
use crate::measure::InitialMeasure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Dirichlet0,
    Neumann0,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpdeGrid {
    pub half_width: f64,
    pub dx: f64,
    pub dt: f64,
    pub t_final: f64,
    pub boundary: Boundary,
}

impl SpdeGrid {
    /// Number of intervals; nodes are `-L + j dx` for `j = 0..=cells`.
    pub fn cells(&self) -> usize {
        (2.0 * self.half_width / self.dx).round() as usize
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt - 1e-9).ceil().max(1.0) as usize
    }

    /// Time step actually used: `t_final / steps`, never above `dt`.
    pub fn step_size(&self) -> f64 {
        self.t_final / self.steps() as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx
    }

    pub fn nearest_node(&self, x: f64) -> Option<usize> {
        let j = ((x + self.half_width) / self.dx).round();
        if j < 0.0 || j > self.cells() as f64 {
            None
        } else {
            Some(j as usize)
        }
    }

    pub fn validate(&self, nu: f64) -> Result<()> {
        for (name, v) in [
            ("half_width", self.half_width),
            ("dx", self.dx),
            ("dt", self.dt),
            ("t_final", self.t_final),
            ("nu", nu),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.dt > self.dx * self.dx / nu {
            return Err(Error::Config(format!(
                "CFL violated: dt = {} > dx^2/nu = {}",
                self.dt,
                self.dx * self.dx / nu
            )));
        }
        let cells = self.cells();
        if cells < 2 || ((cells as f64) * self.dx - 2.0 * self.half_width).abs() > 1e-9 * self.half_width {
            return Err(Error::Config(format!(
                "2 * half_width = {} is not a multiple of dx = {}",
                2.0 * self.half_width,
                self.dx
            )));
        }
        Ok(())
    }

    /// Requires `L >= 6 sqrt(nu t) + extent(mu)`.
    pub fn validate_for(&self, mu: &InitialMeasure, nu: f64) -> Result<()> {
        self.validate(nu)?;
        let need = 6.0 * (nu * self.t_final).sqrt() + mu.support_extent();
        if self.half_width < need {
            return Err(Error::Config(format!(
                "half_width = {} is below 6 sqrt(nu t) + support extent = {need}",
                self.half_width
            )));
        }
        Ok(())
    }
}

/// Diffusion coefficient presets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Rho {
    Zero,
    Linear { lambda: f64 },
    /// `lambda * clamp(u, -cap, cap)`; Lipschitz constant `|lambda|`.
    ClippedLinear { lambda: f64, cap: f64 },
}

impl Rho {
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            Rho::Zero => 0.0,
            Rho::Linear { lambda } => lambda * u,
            Rho::ClippedLinear { lambda, cap } => lambda * u.clamp(-cap, cap),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            Rho::Zero => 0.0,
            Rho::Linear { lambda } | Rho::ClippedLinear { lambda, .. } => lambda.abs(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Rho::Zero) || self.lipschitz() == 0.0
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Rho::Zero => Ok(()),
            Rho::Linear { lambda } if lambda.is_finite() => Ok(()),
            Rho::ClippedLinear { lambda, cap } if lambda.is_finite() && cap >= 0.0 && cap.is_finite() => Ok(()),
            other => Err(Error::Config(format!("invalid rho {other:?}"))),
        }
    }
}

/// Initial field: continuous part sampled at the nodes plus atoms as
/// `mass / dx` at the nearest node.
pub fn discretize(grid: &SpdeGrid, mu: &InitialMeasure) -> Result<Vec<f64>> {
    mu.validate()?;
    let n = grid.cells() + 1;
    let mut u: Vec<f64> = (0..n).map(|j| mu.continuous_density(grid.node(j))).collect();
    for (x, m) in mu.atoms() {
        let j = grid
            .nearest_node(x)
            .ok_or_else(|| Error::Config(format!("atom at {x} lies outside the grid")))?;
        u[j] += m / grid.dx;
    }
    if grid.boundary == Boundary::Dirichlet0 {
        u[0] = 0.0;
        u[n - 1] = 0.0;
    }
    Ok(u)
}

/// Advances `u` to `t_final`. Returns the first step at which the field
/// stopped being finite.
fn evolve(grid: &SpdeGrid, u: &mut Vec<f64>, rho: &Rho, nu: f64, rng: &mut ChaCha8Rng) -> std::result::Result<(), usize> {
    let n = u.len();
    let dt = grid.step_size();
    let r = nu * dt / (2.0 * grid.dx * grid.dx);
    let noise = (dt / grid.dx).sqrt();
    let stochastic = !rho.is_zero();
    let mut next = vec![0.0; n];
    for step in 1..=grid.steps() {
        let mut finite = true;
        let (lo, hi) = match grid.boundary {
            Boundary::Neumann0 => (0, n),
            Boundary::Dirichlet0 => (1, n - 1),
        };
        for j in lo..hi {
            let left = if j == 0 { u[1] } else { u[j - 1] };
            let right = if j + 1 == n { u[n - 2] } else { u[j + 1] };
            let mut v = u[j] + r * (left - 2.0 * u[j] + right);
            if stochastic {
                let xi: f64 = rng.sample(StandardNormal);
                v += rho.eval(u[j]) * noise * xi;
            }
            finite &= v.is_finite();
            next[j] = v;
        }
        if !finite {
            return Err(step);
        }
        std::mem::swap(u, &mut next);
    }
    Ok(())
}

/// One sample of the field at `t_final` on the grid nodes.
pub fn spde_solve_path(grid: &SpdeGrid, mu: &InitialMeasure, rho: &Rho, nu: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    grid.validate(nu)?;
    rho.validate()?;
    let mut u = discretize(grid, mu)?;
    evolve(grid, &mut u, rho, nu, rng).map_err(|step| Error::Divergence {
        divergent: 1,
        total: 1,
        first_step: step,
    })?;
    Ok(u)
}

/// Monte Carlo estimate of `E[u(t,x1) u(t,x2)]` at the nearest nodes.
pub fn spde_estimate_two_point(
    q: &TwoPointQuery,
    mu: &InitialMeasure,
    rho: &Rho,
    nu: f64,
    grid: &SpdeGrid,
    mc: &McConfig,
) -> Result<SimOutcome> {
    grid.validate_for(mu, nu)?;
    rho.validate()?;
    if (grid.t_final - q.t).abs() > 1e-12 * q.t {
        return Err(Error::Config(format!("grid t_final = {} differs from query t = {}", grid.t_final, q.t)));
    }
    let margin = grid.half_width - 4.0 * (nu * q.t).sqrt();
    for x in [q.x1, q.x2] {
        if x.is_nan() || x.abs() >= margin {
            return Err(Error::Config(format!(
                "evaluation point {x} is outside (-{margin}, {margin})"
            )));
        }
    }
    let i1 = grid.nearest_node(q.x1).expect("inside margin");
    let i2 = grid.nearest_node(q.x2).expect("inside margin");
    let u0 = discretize(grid, mu)?;
    let values = run_paths(mc, |_, rng| {
        let mut u = u0.clone();
        Ok(match evolve(grid, &mut u, rho, nu, rng) {
            Ok(()) => PathValue::Value(u[i1] * u[i2]),
            Err(step) => PathValue::Diverged(step),
        })
    })?;
    summarize(&values)
}
