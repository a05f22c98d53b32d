//! Initial measures, the heat smoothing `J0 = mu * G_nu(t, .)`, and the
//! double integrals that turn the kernels into moments for general data.
//!
//! A measure is flattened into parts that are either finite atom lists or
//! continuous densities. The double integral is bilinear, so every pair of
//! parts is integrated separately: atom-atom pairs are finite sums, atom-density
//! pairs are one-dimensional integrals, density-density pairs are nested
//! integrals in rotated coordinates `(zbar, dz)` where every kernel factors
//! as `G_{nu/2}(t, xbar - zbar) * phi(dz)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{require_finite, require_positive, Error, Result};
use crate::gaussian::{heat, KernelParams};
use crate::kernels::{self, TwoPointQuery};
use crate::quadrature::Integrator;

pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Declared growth of a density. Only certificates implying
/// `int e^{-a x^2} |f(x)| dx < inf` for every `a > 0` are admissible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GrowthCertificate {
    /// `|f(x)| <= bound`.
    Bounded { bound: f64 },
    /// `|f(x)| <= bound (1 + |x|)^degree`.
    Polynomial { bound: f64, degree: f64 },
    /// `|f(x)| <= bound e^{coeff |x|^exponent}` with `exponent < 2`.
    SubGaussian { bound: f64, coeff: f64, exponent: f64 },
    /// `|f(x)| <= bound e^{rate x^2}`; admissible only for `rate <= 0`.
    Gaussian { bound: f64, rate: f64 },
    /// `f = 0` outside `[lo, hi]` and `|f| <= bound` inside.
    CompactSupport { lo: f64, hi: f64, bound: f64 },
}

impl GrowthCertificate {
    /// Smallest `a` for which `e^{-a x^2} |f|` may fail to be integrable
    /// (0 when the certificate guarantees membership).
    fn critical_rate(&self) -> f64 {
        match *self {
            GrowthCertificate::Gaussian { rate, .. } => rate.max(0.0),
            GrowthCertificate::SubGaussian { exponent, .. } if exponent >= 2.0 => f64::INFINITY,
            _ => 0.0,
        }
    }

    fn is_admissible(&self) -> bool {
        let finite = match *self {
            GrowthCertificate::Bounded { bound } => bound.is_finite(),
            GrowthCertificate::Polynomial { bound, degree } => bound.is_finite() && degree.is_finite(),
            GrowthCertificate::SubGaussian { bound, coeff, exponent } => {
                bound.is_finite() && coeff.is_finite() && exponent.is_finite()
            }
            GrowthCertificate::Gaussian { bound, rate } => bound.is_finite() && rate.is_finite(),
            GrowthCertificate::CompactSupport { lo, hi, bound } => {
                lo.is_finite() && hi.is_finite() && lo <= hi && bound.is_finite()
            }
        };
        finite && self.critical_rate() == 0.0 && !self.is_zero_rate_gaussian_growth()
    }

    // `e^{0 * x^2}` is bounded, fine; a strictly positive rate is not.
    fn is_zero_rate_gaussian_growth(&self) -> bool {
        matches!(*self, GrowthCertificate::Gaussian { rate, .. } if rate > 0.0)
    }

    fn support(&self) -> Option<(f64, f64)> {
        match *self {
            GrowthCertificate::CompactSupport { lo, hi, .. } => Some((lo, hi)),
            _ => None,
        }
    }
}

/// A density `mu(dx) = f(x) dx` with its growth certificate.
#[derive(Clone)]
pub struct Density {
    f: DensityFn,
    pub certificate: GrowthCertificate,
    /// Caller's declaration that `f >= 0`.
    pub nonnegative: bool,
    pub label: String,
}

impl Density {
    pub fn new<F>(f: F, certificate: GrowthCertificate) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Density {
            f: Arc::new(f),
            certificate,
            nonnegative: false,
            label: "density".into(),
        }
    }

    pub fn nonnegative(mut self) -> Self {
        self.nonnegative = true;
        self
    }

    pub fn labelled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Density")
            .field("label", &self.label)
            .field("certificate", &self.certificate)
            .field("nonnegative", &self.nonnegative)
            .finish()
    }
}

/// A signed measure with Gaussian-tempered total variation.
#[derive(Debug, Clone)]
pub enum InitialMeasure {
    /// `sum_i m_i delta_{x_i}` as `(location, mass)` pairs.
    Atoms(Vec<(f64, f64)>),
    /// `c * dx`.
    Lebesgue(f64),
    /// `mass * N(mean, var)(x) dx`.
    Gaussian { mean: f64, var: f64, mass: f64 },
    Density(Density),
    Sum(Vec<InitialMeasure>),
}

impl InitialMeasure {
    pub fn delta(at: f64) -> Self {
        InitialMeasure::Atoms(vec![(at, 1.0)])
    }

    pub fn lebesgue() -> Self {
        InitialMeasure::Lebesgue(1.0)
    }

    /// Checks finiteness and that density certificates imply membership.
    pub fn validate(&self) -> Result<()> {
        match self {
            InitialMeasure::Atoms(atoms) => {
                for &(x, m) in atoms {
                    if !(x.is_finite() && m.is_finite()) {
                        return Err(Error::InadmissibleMeasure(format!("non-finite atom ({x}, {m})")));
                    }
                }
                Ok(())
            }
            InitialMeasure::Lebesgue(c) => {
                require_finite("Lebesgue scale", *c).map_err(|e| Error::InadmissibleMeasure(e.to_string()))
            }
            InitialMeasure::Gaussian { mean, var, mass } => {
                if mean.is_finite() && mass.is_finite() && *var > 0.0 && var.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InadmissibleMeasure(format!(
                        "Gaussian measure needs finite mean/mass and var > 0 (mean={mean}, var={var}, mass={mass})"
                    )))
                }
            }
            InitialMeasure::Density(d) => {
                if d.certificate.is_admissible() {
                    Ok(())
                } else {
                    Err(Error::InadmissibleMeasure(format!(
                        "growth certificate {:?} of '{}' does not imply e^(-a x^2)-integrability for every a > 0",
                        d.certificate, d.label
                    )))
                }
            }
            InitialMeasure::Sum(parts) => parts.iter().try_for_each(|p| p.validate()),
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        match self {
            InitialMeasure::Atoms(atoms) => atoms.iter().all(|&(_, m)| m >= 0.0),
            InitialMeasure::Lebesgue(c) => *c >= 0.0,
            InitialMeasure::Gaussian { mass, .. } => *mass >= 0.0,
            InitialMeasure::Density(d) => d.nonnegative,
            InitialMeasure::Sum(parts) => parts.iter().all(|p| p.is_nonnegative()),
        }
    }

    /// Termwise total variation `|mu|`.
    pub fn total_variation(&self) -> InitialMeasure {
        match self {
            InitialMeasure::Atoms(atoms) => InitialMeasure::Atoms(atoms.iter().map(|&(x, m)| (x, m.abs())).collect()),
            InitialMeasure::Lebesgue(c) => InitialMeasure::Lebesgue(c.abs()),
            InitialMeasure::Gaussian { mean, var, mass } => InitialMeasure::Gaussian {
                mean: *mean,
                var: *var,
                mass: mass.abs(),
            },
            InitialMeasure::Density(d) => {
                if d.nonnegative {
                    return self.clone();
                }
                let f = d.f.clone();
                InitialMeasure::Density(Density {
                    f: Arc::new(move |x| f(x).abs()),
                    certificate: d.certificate,
                    nonnegative: true,
                    label: format!("|{}|", d.label),
                })
            }
            InitialMeasure::Sum(parts) => InitialMeasure::Sum(parts.iter().map(|p| p.total_variation()).collect()),
        }
    }

    pub fn scaled(&self, c: f64) -> InitialMeasure {
        match self {
            InitialMeasure::Atoms(atoms) => InitialMeasure::Atoms(atoms.iter().map(|&(x, m)| (x, c * m)).collect()),
            InitialMeasure::Lebesgue(s) => InitialMeasure::Lebesgue(c * s),
            InitialMeasure::Gaussian { mean, var, mass } => InitialMeasure::Gaussian {
                mean: *mean,
                var: *var,
                mass: c * mass,
            },
            InitialMeasure::Density(d) => {
                let f = d.f.clone();
                InitialMeasure::Density(Density {
                    f: Arc::new(move |x| c * f(x)),
                    certificate: d.certificate,
                    nonnegative: d.nonnegative && c >= 0.0,
                    label: format!("{c}*{}", d.label),
                })
            }
            InitialMeasure::Sum(parts) => InitialMeasure::Sum(parts.iter().map(|p| p.scaled(c)).collect()),
        }
    }

    /// All atoms, with the continuous parts dropped.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for part in self.parts() {
            if let Part::Atoms(a) = part {
                out.extend(a);
            }
        }
        out
    }

    /// Pointwise value of the absolutely continuous part.
    pub fn continuous_density(&self, x: f64) -> f64 {
        self.parts()
            .iter()
            .map(|p| match p {
                Part::Atoms(_) => 0.0,
                Part::Cont(c) => c.eval(x),
            })
            .sum()
    }

    /// Largest `|x|` where the measure lives, when that is bounded above by
    /// something finite. Lebesgue parts are ignored (they are translation
    /// invariant); Gaussian parts count six standard deviations.
    pub fn support_extent(&self) -> f64 {
        match self {
            InitialMeasure::Atoms(a) => a.iter().map(|&(x, _)| x.abs()).fold(0.0, f64::max),
            InitialMeasure::Lebesgue(_) => 0.0,
            InitialMeasure::Gaussian { mean, var, .. } => mean.abs() + 6.0 * var.sqrt(),
            InitialMeasure::Density(d) => match d.certificate.support() {
                Some((lo, hi)) => lo.abs().max(hi.abs()),
                None => 0.0,
            },
            InitialMeasure::Sum(parts) => parts.iter().map(|p| p.support_extent()).fold(0.0, f64::max),
        }
    }

    pub(crate) fn parts(&self) -> Vec<Part> {
        let mut out = Vec::new();
        self.collect_parts(&mut out);
        out
    }

    fn collect_parts(&self, out: &mut Vec<Part>) {
        match self {
            InitialMeasure::Atoms(a) => {
                if !a.is_empty() {
                    out.push(Part::Atoms(a.clone()))
                }
            }
            InitialMeasure::Lebesgue(c) => out.push(Part::Cont(ContPart::Lebesgue(*c))),
            InitialMeasure::Gaussian { mean, var, mass } => out.push(Part::Cont(ContPart::Gaussian {
                mean: *mean,
                var: *var,
                mass: *mass,
            })),
            InitialMeasure::Density(d) => out.push(Part::Cont(ContPart::Density(d.clone()))),
            InitialMeasure::Sum(parts) => parts.iter().for_each(|p| p.collect_parts(out)),
        }
    }
}

/// JSON form of a measure: `{"type":"atoms","atoms":[[x,m],...]}`,
/// `{"type":"lebesgue","scale":c}`, `{"type":"gaussian","mean":m,"var":v,"mass":c}`,
/// `{"type":"exp_quadratic","scale":c,"rate":r}` or `{"type":"sum","parts":[...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum MeasureSpec {
    Atoms { atoms: Vec<(f64, f64)> },
    Lebesgue { scale: f64 },
    Gaussian { mean: f64, var: f64, mass: f64 },
    /// Density `scale * e^{rate x^2}`; admissible only for `rate <= 0`.
    #[serde(rename = "exp_quadratic")]
    ExpQuadratic { scale: f64, rate: f64 },
    Sum { parts: Vec<MeasureSpec> },
}

impl MeasureSpec {
    pub fn to_measure(&self) -> Result<InitialMeasure> {
        let m = self.build()?;
        m.validate()?;
        Ok(m)
    }

    /// The measure without the admissibility check, for membership reports.
    pub fn build(&self) -> Result<InitialMeasure> {
        Ok(match self {
            MeasureSpec::Atoms { atoms } => InitialMeasure::Atoms(atoms.clone()),
            MeasureSpec::Lebesgue { scale } => InitialMeasure::Lebesgue(*scale),
            MeasureSpec::Gaussian { mean, var, mass } => InitialMeasure::Gaussian {
                mean: *mean,
                var: *var,
                mass: *mass,
            },
            MeasureSpec::ExpQuadratic { scale, rate } => {
                let (c, r) = (*scale, *rate);
                let mut d = Density::new(
                    move |x: f64| c * (r * x * x).exp(),
                    GrowthCertificate::Gaussian { bound: c.abs(), rate: r },
                )
                .labelled(format!("{c}*exp({r}*x^2)"));
                if c >= 0.0 {
                    d = d.nonnegative();
                }
                InitialMeasure::Density(d)
            }
            MeasureSpec::Sum { parts } => InitialMeasure::Sum(parts.iter().map(|p| p.build()).collect::<Result<_>>()?),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("measure spec: {e}")))
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Part {
    Atoms(Vec<(f64, f64)>),
    Cont(ContPart),
}

#[derive(Debug, Clone)]
pub(crate) enum ContPart {
    Lebesgue(f64),
    Gaussian { mean: f64, var: f64, mass: f64 },
    Density(Density),
}

impl ContPart {
    #[inline]
    fn eval(&self, x: f64) -> f64 {
        match self {
            ContPart::Lebesgue(c) => *c,
            ContPart::Gaussian { mean, var, mass } => mass * heat(*var, x - mean, 1.0),
            ContPart::Density(d) => d.eval(x),
        }
    }

    fn support(&self) -> (f64, f64) {
        match self {
            ContPart::Density(d) => d.certificate.support().unwrap_or((f64::NEG_INFINITY, f64::INFINITY)),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// `(center, variance)` hint for where the mass sits; infinite variance
    /// means no preferred location.
    fn location_hint(&self) -> (f64, f64) {
        match self {
            ContPart::Gaussian { mean, var, .. } => (*mean, *var),
            ContPart::Density(d) => match d.certificate.support() {
                Some((lo, hi)) => (0.5 * (lo + hi), ((hi - lo) * 0.5).powi(2).max(1e-300)),
                None => (0.0, f64::INFINITY),
            },
            ContPart::Lebesgue(_) => (0.0, f64::INFINITY),
        }
    }
}

fn inner_rule() -> Integrator {
    Integrator::new(1e-17, 1e-12)
}

fn outer_rule() -> Integrator {
    Integrator::new(1e-16, 1e-11)
}

/// `J0(t, x) = int G_nu(t, x - y) mu(dy)`.
pub fn j0(t: f64, x: f64, mu: &InitialMeasure, nu: f64) -> Result<f64> {
    require_positive("t", t)?;
    require_positive("nu", nu)?;
    require_finite("x", x)?;
    mu.validate()?;
    let mut total = 0.0;
    for part in mu.parts() {
        total += match &part {
            Part::Atoms(atoms) => atoms.iter().map(|&(z, m)| m * heat(t, x - z, nu)).sum(),
            Part::Cont(ContPart::Lebesgue(c)) => *c,
            Part::Cont(ContPart::Gaussian { mean, var, mass }) => mass * heat(1.0, x - mean, var + nu * t),
            Part::Cont(c @ ContPart::Density(_)) => {
                let f = |y: f64| c.eval(y) * heat(t, x - y, nu);
                let (lo, hi) = c.support();
                let q = Integrator::new(1e-12, 1e-12);
                if lo.is_finite() && hi.is_finite() {
                    let mut pts = vec![lo, hi];
                    if x > lo && x < hi {
                        pts.insert(1, x);
                    }
                    q.finite_with_breaks(f, &pts)?.value
                } else {
                    q.real_line(f, x, (nu * t).sqrt())?.value
                }
            }
        };
    }
    Ok(total)
}

/// Which closed form to integrate against `mu x mu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    /// `iint mu mu K*(t, x1-z1, x2-z2, x1-x2)`.
    Convolution,
    /// `J0(t,x1) J0(t,x2) + iint mu mu K-dagger(...)`; the default.
    Split,
}

/// Pairwise kernel in rotated form: `G_{nu/2}(t, xbar - zbar) * phi(dz)`.
struct RotatedKernel {
    t: f64,
    xbar: f64,
    dx: f64,
    params: KernelParams,
    with_product: bool,
}

impl RotatedKernel {
    #[inline]
    fn phi(&self, dz: f64) -> f64 {
        let nu = self.params.nu;
        let tail = kernels::tail_term(self.t, self.dx.abs() + dz.abs(), &self.params).unwrap_or(f64::NAN);
        if self.with_product {
            heat(self.t, self.dx - dz, 2.0 * nu) + tail
        } else {
            tail
        }
    }

    #[inline]
    fn center_factor(&self, zbar: f64) -> f64 {
        heat(self.t, self.xbar - zbar, 0.5 * self.params.nu)
    }

    #[inline]
    fn eval(&self, z1: f64, z2: f64) -> f64 {
        self.center_factor(0.5 * (z1 + z2)) * self.phi(z2 - z1)
    }
}

fn atom_atom(k: &RotatedKernel, a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut total = 0.0;
    for &(z1, m1) in a {
        for &(z2, m2) in b {
            total += m1 * m2 * k.eval(z1, z2);
        }
    }
    total
}

/// `sum_i m_i int f(z) k(a_i, z) dz` (or with the roles swapped when
/// `atom_first` is false).
fn atom_cont(k: &RotatedKernel, atoms: &[(f64, f64)], c: &ContPart, atom_first: bool) -> Result<f64> {
    let (lo, hi) = c.support();
    let scale = (2.0 * k.params.nu * k.t).sqrt();
    let q = inner_rule();
    let mut total = 0.0;
    for &(a, m) in atoms {
        let f = |z: f64| {
            let kv = if atom_first { k.eval(a, z) } else { k.eval(z, a) };
            if kv == 0.0 {
                0.0
            } else {
                c.eval(z) * kv
            }
        };
        // Kink at z = a; the centre factor peaks at z = 2 xbar - a.
        let peak = 2.0 * k.xbar - a;
        let value = if lo.is_finite() && hi.is_finite() {
            let mut pts = vec![lo, hi];
            for b in [a, peak] {
                if b > lo && b < hi {
                    pts.push(b);
                }
            }
            pts.sort_by(f64::total_cmp);
            q.finite_with_breaks(f, &pts)?.value
        } else {
            q.real_line_with_breaks(f, &[a, peak], scale)?.value
        };
        total += m * value;
    }
    Ok(total)
}

fn cont_cont(k: &RotatedKernel, c1: &ContPart, c2: &ContPart) -> Result<f64> {
    let (lo1, hi1) = c1.support();
    let (lo2, hi2) = c2.support();
    let nu = k.params.nu;
    let t = k.t;
    let d_scale = (2.0 * nu * t).sqrt();

    let inner = |zbar: f64| -> Result<f64> {
        // z1 = zbar - d/2 in [lo1, hi1], z2 = zbar + d/2 in [lo2, hi2].
        let d_lo = (2.0 * (zbar - hi1)).max(2.0 * (lo2 - zbar));
        let d_hi = (2.0 * (zbar - lo1)).min(2.0 * (hi2 - zbar));
        if d_lo >= d_hi {
            return Ok(0.0);
        }
        let f = |d: f64| {
            let v = k.phi(d);
            if v == 0.0 {
                0.0
            } else {
                c1.eval(zbar - 0.5 * d) * c2.eval(zbar + 0.5 * d) * v
            }
        };
        let q = inner_rule();
        let r = match (d_lo.is_finite(), d_hi.is_finite()) {
            (true, true) => {
                let mut pts = vec![d_lo, d_hi];
                if d_lo < 0.0 && d_hi > 0.0 {
                    pts.insert(1, 0.0);
                }
                q.finite_with_breaks(f, &pts)?
            }
            (false, false) => q.real_line(f, 0.0, d_scale)?,
            (true, false) => {
                if d_lo < 0.0 {
                    q.finite(f, d_lo, 0.0)? + q.upper_tail(f, 0.0, d_scale)?
                } else {
                    q.upper_tail(f, d_lo, d_scale)?
                }
            }
            (false, true) => {
                if d_hi > 0.0 {
                    q.lower_tail(f, 0.0, d_scale)? + q.finite(f, 0.0, d_hi)?
                } else {
                    q.lower_tail(f, d_hi, d_scale)?
                }
            }
        };
        Ok(r.value * k.center_factor(zbar))
    };

    // Propagate the first inner failure instead of turning it into NaN.
    let failure = std::cell::RefCell::new(None);
    let outer_f = |zbar: f64| match inner(zbar) {
        Ok(v) => v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };

    let u_lo = 0.5 * (lo1 + lo2);
    let u_hi = 0.5 * (hi1 + hi2);
    let q = outer_rule();
    let result = if u_lo.is_finite() && u_hi.is_finite() {
        let mut pts = vec![u_lo, u_hi];
        if k.xbar > u_lo && k.xbar < u_hi {
            pts.insert(1, k.xbar);
        }
        q.finite_with_breaks(outer_f, &pts)
    } else {
        // Precision-weighted centre of the kernel and the two parts.
        let mut w = 2.0 / (nu * t);
        let mut wc = w * k.xbar;
        for c in [c1, c2] {
            let (m, v) = c.location_hint();
            if v.is_finite() {
                w += 1.0 / v;
                wc += m / v;
            }
        }
        let center = wc / w;
        let scale = (1.0 / w).sqrt();
        match (u_lo.is_finite(), u_hi.is_finite()) {
            (false, false) => q.real_line(outer_f, center, scale),
            (true, false) => q.upper_tail(outer_f, u_lo, scale),
            (false, true) => q.lower_tail(outer_f, u_hi, scale),
            (true, true) => unreachable!(),
        }
    };
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(result?.value)
}

fn double_integral(q: &TwoPointQuery, mu: &InitialMeasure, params: &KernelParams, with_product: bool) -> Result<f64> {
    // Largest exponent sits at dz = 0; surface overflow before integrating.
    kernels::tail_term(q.t, q.separation().abs(), params)?;
    let k = RotatedKernel {
        t: q.t,
        xbar: q.midpoint(),
        dx: q.separation(),
        params: *params,
        with_product,
    };
    let parts = mu.parts();
    let mut total = 0.0;
    for p1 in &parts {
        for p2 in &parts {
            total += match (p1, p2) {
                (Part::Atoms(a), Part::Atoms(b)) => atom_atom(&k, a, b),
                (Part::Atoms(a), Part::Cont(c)) => atom_cont(&k, a, c, true)?,
                (Part::Cont(c), Part::Atoms(b)) => atom_cont(&k, b, c, false)?,
                (Part::Cont(c1), Part::Cont(c2)) => cont_cont(&k, c1, c2)?,
            };
        }
    }
    if !total.is_finite() {
        return Err(Error::Internal("double integral is not finite".into()));
    }
    Ok(total)
}

/// `iint mu(dz1) mu(dz2) K-dagger(t, x1-z1, x2-z2, x1-x2)`: the correlation
/// in excess of `J0(t,x1) J0(t,x2)`.
pub fn dagger_double_integral(q: &TwoPointQuery, mu: &InitialMeasure, params: &KernelParams) -> Result<f64> {
    mu.validate()?;
    double_integral(q, mu, params, false)
}

/// `E[u(t,x1) u(t,x2)]` via the split formula `J0 J0 + iint K-dagger`.
pub fn two_point(q: &TwoPointQuery, mu: &InitialMeasure, params: &KernelParams) -> Result<f64> {
    two_point_with(q, mu, params, Formula::Split)
}

pub fn two_point_with(q: &TwoPointQuery, mu: &InitialMeasure, params: &KernelParams, formula: Formula) -> Result<f64> {
    mu.validate()?;
    match formula {
        Formula::Split => {
            let j1 = j0(q.t, q.x1, mu, params.nu)?;
            let j2 = j0(q.t, q.x2, mu, params.nu)?;
            Ok(j1 * j2 + double_integral(q, mu, params, false)?)
        }
        Formula::Convolution => double_integral(q, mu, params, true),
    }
}

/// `||u(t,x)||_2^2`.
pub fn second_moment(t: f64, x: f64, mu: &InitialMeasure, params: &KernelParams) -> Result<f64> {
    two_point(&TwoPointQuery::new(t, x, x)?, mu, params)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipEntry {
    pub a: f64,
    pub integral: f64,
}

/// `int e^{-a x^2} |mu|(dx)` for each `a` on the grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipReport {
    pub entries: Vec<MembershipEntry>,
}

pub fn check_membership(mu: &InitialMeasure, a_grid: &[f64]) -> Result<MembershipReport> {
    if a_grid.is_empty() {
        return Err(Error::Domain("a_grid must be nonempty".into()));
    }
    for &a in a_grid {
        require_positive("a", a)?;
    }
    let a_min = a_grid.iter().copied().fold(f64::INFINITY, f64::min);
    check_certificates(mu, a_min)?;

    let abs_mu = mu.total_variation();
    let mut entries = Vec::with_capacity(a_grid.len());
    for &a in a_grid {
        let mut integral = 0.0;
        for part in abs_mu.parts() {
            integral += match &part {
                Part::Atoms(atoms) => atoms.iter().map(|&(x, m)| m * (-a * x * x).exp()).sum(),
                Part::Cont(ContPart::Lebesgue(c)) => c * (std::f64::consts::PI / a).sqrt(),
                Part::Cont(ContPart::Gaussian { mean, var, mass }) => {
                    let s = 1.0 + 2.0 * a * var;
                    mass / s.sqrt() * (-a * mean * mean / s).exp()
                }
                Part::Cont(c @ ContPart::Density(_)) => {
                    let f = |x: f64| c.eval(x) * (-a * x * x).exp();
                    let (lo, hi) = c.support();
                    let q = Integrator::new(1e-12, 1e-10);
                    let r = if lo.is_finite() && hi.is_finite() {
                        q.finite(f, lo, hi)
                    } else {
                        q.real_line(f, 0.0, (1.0 / a).sqrt())
                    };
                    match r {
                        Ok(v) if v.value.is_finite() => v.value,
                        _ => {
                            return Err(Error::InadmissibleMeasure(format!(
                                "int e^(-a x^2) |mu|(dx) did not converge at a = {a}"
                            )))
                        }
                    }
                }
            };
        }
        if !integral.is_finite() {
            return Err(Error::InadmissibleMeasure(format!("int e^(-a x^2) |mu|(dx) is infinite at a = {a}")));
        }
        entries.push(MembershipEntry { a, integral });
    }
    Ok(MembershipReport { entries })
}

fn check_certificates(mu: &InitialMeasure, a_min: f64) -> Result<()> {
    match mu {
        InitialMeasure::Density(d) => {
            let crit = d.certificate.critical_rate();
            if crit >= a_min {
                return Err(Error::InadmissibleMeasure(format!(
                    "'{}' grows like e^({crit} x^2): integral diverges at a = {a_min}",
                    d.label
                )));
            }
            if crit > 0.0 {
                return Err(Error::InadmissibleMeasure(format!(
                    "'{}' grows like e^({crit} x^2): integral diverges for every a <= {crit}",
                    d.label
                )));
            }
            mu.validate()
        }
        InitialMeasure::Sum(parts) => parts.iter().try_for_each(|p| check_certificates(p, a_min)),
        other => other.validate(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{kernel_k, kernel_k_star, two_point_delta, two_point_lebesgue};

    fn rel(a: f64, b: f64) -> f64 {
        if a == b {
            0.0
        } else {
            ((a - b) / b).abs()
        }
    }

    fn kp(nu: f64, lambda: f64) -> KernelParams {
        KernelParams::new(nu, lambda).unwrap()
    }

    #[test]
    fn j0_examples() {
        let nu = 0.7;
        assert_eq!(j0(0.4, 0.3, &InitialMeasure::delta(0.0), nu).unwrap(), heat(0.4, 0.3, nu));
        assert_eq!(j0(0.4, -5.0, &InitialMeasure::lebesgue(), nu).unwrap(), 1.0);

        // e^{-x^2} = sqrt(pi) N(0, 1/2); convolving adds variances.
        let dens = Density::new(|x: f64| (-x * x).exp(), GrowthCertificate::Bounded { bound: 1.0 }).nonnegative();
        let mu = InitialMeasure::Density(dens);
        for &(t, x) in &[(0.1, 0.0), (1.0, 1.3), (3.0, -2.0)] {
            let exact = std::f64::consts::PI.sqrt() * heat(1.0, x, 0.5 + nu * t);
            assert!(rel(j0(t, x, &mu, nu).unwrap(), exact) < 1e-9);
        }
        let g = InitialMeasure::Gaussian { mean: 0.0, var: 0.5, mass: std::f64::consts::PI.sqrt() };
        assert!(rel(j0(1.0, 1.3, &g, nu).unwrap(), j0(1.0, 1.3, &mu, nu).unwrap()) < 1e-9);
    }

    #[test]
    fn second_moment_examples() {
        let pr = kp(1.1, 0.8);
        let (t, x) = (0.9, 0.4);
        let delta = second_moment(t, x, &InitialMeasure::delta(0.0), &pr).unwrap();
        assert!(rel(delta, kernel_k(t, x, &pr).unwrap() / pr.lambda_sq()) < 1e-12);

        let three = second_moment(t, x, &InitialMeasure::Atoms(vec![(0.0, 3.0)]), &pr).unwrap();
        assert!(rel(three, 9.0 * delta) < 1e-12);

        let leb = second_moment(t, x, &InitialMeasure::lebesgue(), &pr).unwrap();
        let q = TwoPointQuery::new(t, x, x).unwrap();
        assert!(rel(leb, two_point_lebesgue(&q, &pr).unwrap()) < 1e-8);
    }

    #[test]
    fn two_point_examples() {
        let pr = kp(0.9, 1.2);
        let q = TwoPointQuery::new(0.7, -0.3, 0.8).unwrap();
        let delta = two_point(&q, &InitialMeasure::delta(0.0), &pr).unwrap();
        assert!(rel(delta, two_point_delta(&q, &pr).unwrap()) < 1e-12);

        let leb = two_point(&q, &InitialMeasure::lebesgue(), &pr).unwrap();
        assert!(rel(leb, two_point_lebesgue(&q, &pr).unwrap()) < 1e-8);

        let (a, b) = (-0.5, 1.0);
        let mu = InitialMeasure::Atoms(vec![(a, 1.0), (b, 1.0)]);
        let brute: f64 = [a, b]
            .iter()
            .flat_map(|&z1| [a, b].map(|z2| (z1, z2)))
            .map(|(z1, z2)| kernel_k_star(q.t, q.x1 - z1, q.x2 - z2, q.x1 - q.x2, &pr).unwrap())
            .sum();
        assert!(rel(two_point(&q, &mu, &pr).unwrap(), brute) < 1e-12);
    }

    #[test]
    fn split_and_convolution_formulas_agree() {
        let pr = kp(1.0, 1.0);
        let q = TwoPointQuery::new(0.8, 0.2, 0.9).unwrap();
        let measures = [
            InitialMeasure::delta(0.0),
            InitialMeasure::Atoms(vec![(0.0, 1.0), (1.0, 1.0)]),
            InitialMeasure::lebesgue(),
            InitialMeasure::Gaussian { mean: 0.3, var: 0.4, mass: 2.0 },
            InitialMeasure::Sum(vec![InitialMeasure::delta(0.5), InitialMeasure::Gaussian { mean: -1.0, var: 1.0, mass: 1.0 }]),
        ];
        for mu in &measures {
            let a = two_point_with(&q, mu, &pr, Formula::Split).unwrap();
            let b = two_point_with(&q, mu, &pr, Formula::Convolution).unwrap();
            assert!(rel(a, b) < 1e-7, "{mu:?}: {a} vs {b}");
        }
    }

    #[test]
    fn compact_density_matches_lebesgue_locally() {
        // A wide box looks like Lebesgue measure near the origin.
        let dens = Density::new(
            |x: f64| if x.abs() <= 30.0 { 1.0 } else { 0.0 },
            GrowthCertificate::CompactSupport { lo: -30.0, hi: 30.0, bound: 1.0 },
        )
        .nonnegative();
        let pr = kp(1.0, 1.0);
        let q = TwoPointQuery::new(0.5, 0.0, 0.3).unwrap();
        let v = two_point(&q, &InitialMeasure::Density(dens), &pr).unwrap();
        assert!(rel(v, two_point_lebesgue(&q, &pr).unwrap()) < 1e-8);
    }

    #[test]
    fn correlation_exceeds_product_of_means() {
        let pr = kp(1.0, 0.7);
        let q = TwoPointQuery::new(1.0, -0.2, 0.6).unwrap();
        let mu = InitialMeasure::Gaussian { mean: 0.1, var: 0.3, mass: 1.0 };
        let v = two_point(&q, &mu, &pr).unwrap();
        let prod = j0(q.t, q.x1, &mu, 1.0).unwrap() * j0(q.t, q.x2, &mu, 1.0).unwrap();
        assert!(v > prod);
        let swapped = two_point(&TwoPointQuery::new(1.0, 0.6, -0.2).unwrap(), &mu, &pr).unwrap();
        assert!(rel(v, swapped) < 1e-9);
    }

    #[test]
    fn bilinear_scaling_for_atoms() {
        let pr = kp(1.3, 0.6);
        let mu = InitialMeasure::Atoms(vec![(-0.4, 0.7), (0.9, -0.2), (2.0, 1.1)]);
        let base = second_moment(0.6, 0.1, &mu, &pr).unwrap();
        for &c in &[-2.0, 0.5, 7.0] {
            let scaled = second_moment(0.6, 0.1, &mu.scaled(c), &pr).unwrap();
            assert!(rel(scaled, c * c * base) < 1e-10);
        }
    }

    #[test]
    fn membership_examples() {
        let r = check_membership(&InitialMeasure::delta(0.0), &[0.1, 1.0, 10.0]).unwrap();
        assert!(r.entries.iter().all(|e| e.integral == 1.0));
        let r = check_membership(&InitialMeasure::lebesgue(), &[1.0]).unwrap();
        assert!(rel(r.entries[0].integral, std::f64::consts::PI.sqrt()) < 1e-15);

        let bad = Density::new(|x: f64| (x * x).exp(), GrowthCertificate::Gaussian { bound: 1.0, rate: 1.0 });
        match check_membership(&InitialMeasure::Density(bad.clone()), &[0.5, 2.0]) {
            Err(Error::InadmissibleMeasure(msg)) => assert!(msg.contains("0.5"), "{msg}"),
            other => panic!("expected rejection, got {other:?}"),
        }
        assert!(InitialMeasure::Density(bad).validate().is_err());

        let poly = Density::new(|x: f64| 1.0 + x * x, GrowthCertificate::Polynomial { bound: 1.0, degree: 2.0 });
        let r = check_membership(&InitialMeasure::Density(poly), &[1.0]).unwrap();
        // int (1 + x^2) e^{-x^2} = sqrt(pi) * 3/2
        assert!(rel(r.entries[0].integral, 1.5 * std::f64::consts::PI.sqrt()) < 1e-9);

        assert!(check_membership(&InitialMeasure::lebesgue(), &[]).is_err());
    }

    #[test]
    fn measure_spec_parsing_and_echo() {
        let text = r#"{"type":"atoms","atoms":[[0.0,1.0],[1.5,-0.25]]}"#;
        let spec = MeasureSpec::from_json(text).unwrap();
        assert_eq!(serde_json::to_string(&spec).unwrap(), text);
        let mu = spec.to_measure().unwrap();
        assert_eq!(mu.atoms(), vec![(0.0, 1.0), (1.5, -0.25)]);

        let spec = MeasureSpec::from_json(r#"{"type":"lebesgue","scale":2.5}"#).unwrap();
        assert!(matches!(spec.to_measure().unwrap(), InitialMeasure::Lebesgue(c) if c == 2.5));
        let spec = MeasureSpec::from_json(r#"{"type":"gaussian","mean":0,"var":0,"mass":1}"#).unwrap();
        assert!(matches!(spec.to_measure(), Err(Error::InadmissibleMeasure(_))));
        assert!(MeasureSpec::from_json(r#"{"type":"cauchy"}"#).is_err());

        let bad = MeasureSpec::from_json(r#"{"type":"exp_quadratic","scale":1,"rate":1}"#).unwrap();
        assert!(matches!(bad.to_measure(), Err(Error::InadmissibleMeasure(_))));
        let err = check_membership(&bad.build().unwrap(), &[0.5, 2.0]).unwrap_err();
        assert!(err.to_string().contains("a = 0.5"), "{err}");
        let ok = MeasureSpec::from_json(r#"{"type":"exp_quadratic","scale":1,"rate":-1}"#).unwrap();
        let rep = check_membership(&ok.to_measure().unwrap(), &[1.0]).unwrap();
        assert!(rel(rep.entries[0].integral, (std::f64::consts::PI / 2.0).sqrt()) < 1e-9);
    }
}
