//! Globally adaptive Gauss–Kronrod quadrature.
//!
//! Every panel is evaluated with the 10-point Gauss / 21-point Kronrod pair;
//! the panel with the largest error estimate is bisected until the summed
//! error meets `max(abs_tol, rel_tol * |I|)`. Infinite ranges are folded onto
//! finite ones with `x = c + s * u / (1 - u^2)`, which keeps Gaussian-type
//! tails smooth in `u`.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

impl std::ops::Add for QuadResult {
    type Output = QuadResult;

    fn add(self, rhs: Self) -> Self {
        QuadResult {
            value: self.value + rhs.value,
            abs_error: self.abs_error + rhs.abs_error,
            evaluations: self.evaluations + rhs.evaluations,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Panel> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];

    let mut res_gauss = 0.0;
    let mut res_kronrod = f_center * WGK[10];
    let mut res_abs = res_kronrod.abs();

    #[allow(clippy::needless_range_loop)]
    for j in 0..5 {
        let jtw = 2 * j + 1;
        let dx = half * XGK[jtw];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        res_gauss += WG[j] * (f1 + f2);
        res_kronrod += WGK[jtw] * (f1 + f2);
        res_abs += WGK[jtw] * (f1.abs() + f2.abs());
    }
    #[allow(clippy::needless_range_loop)]
    for j in 0..5 {
        let jtwm1 = 2 * j;
        let dx = half * XGK[jtwm1];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[jtwm1] = f1;
        fv2[jtwm1] = f2;
        res_kronrod += WGK[jtwm1] * (f1 + f2);
        res_abs += WGK[jtwm1] * (f1.abs() + f2.abs());
    }

    let mean = 0.5 * res_kronrod;
    let mut res_asc = WGK[10] * (f_center - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let value = res_kronrod * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut error = ((res_kronrod - res_gauss) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    if !value.is_finite() || !error.is_finite() {
        return Err(Error::Domain(format!(
            "integrand is not finite on [{a}, {b}]"
        )));
    }
    Ok(Panel { a, b, value, error })
}

/// Adaptive integrator with absolute and relative targets.
#[derive(Debug, Clone, Copy)]
pub struct Integrator {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_panels: 4000,
        }
    }
}

impl Integrator {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Integrator {
            abs_tol,
            rel_tol,
            ..Default::default()
        }
    }

    pub fn with_max_panels(mut self, max_panels: usize) -> Self {
        self.max_panels = max_panels;
        self
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }

    /// Integrates over the finite interval `[a, b]`.
    pub fn finite<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<QuadResult> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::Domain(format!("finite() needs finite limits, got [{a}, {b}]")));
        }
        if a == b {
            return Ok(QuadResult { value: 0.0, abs_error: 0.0, evaluations: 0 });
        }
        let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

        let first = gauss_kronrod(&f, lo, hi)?;
        let mut evaluations = 21;
        let mut total = first.value;
        let mut total_err = first.error;
        let mut heap = BinaryHeap::new();
        heap.push(first);

        while total_err > self.target(total) {
            if heap.len() >= self.max_panels {
                return Err(Error::Quadrature {
                    estimate: sign * total,
                    achieved: total_err,
                    requested: self.target(total),
                });
            }
            let worst = heap.pop().expect("heap is never empty");
            let mid = 0.5 * (worst.a + worst.b);
            // Panel cannot be split further in floating point.
            if mid <= worst.a || mid >= worst.b {
                heap.push(worst);
                return Err(Error::Quadrature {
                    estimate: sign * total,
                    achieved: total_err,
                    requested: self.target(total),
                });
            }
            let left = gauss_kronrod(&f, worst.a, mid)?;
            let right = gauss_kronrod(&f, mid, worst.b)?;
            evaluations += 42;
            total += left.value + right.value - worst.value;
            total_err += left.error + right.error - worst.error;
            heap.push(left);
            heap.push(right);

            // Resum occasionally so cancellation in the running totals stays bounded.
            if evaluations % (42 * 64) == 21 {
                total = heap.iter().map(|p| p.value).sum();
                total_err = heap.iter().map(|p| p.error).sum();
            }
        }
        let value: f64 = heap.iter().map(|p| p.value).sum();
        let abs_error: f64 = heap.iter().map(|p| p.error).sum();
        Ok(QuadResult { value: sign * value, abs_error, evaluations })
    }

    /// Integrates over consecutive segments `[p0, p1], [p1, p2], ...`, which
    /// lets callers place kinks and jumps on panel boundaries.
    pub fn finite_with_breaks<F: Fn(f64) -> f64>(&self, f: F, points: &[f64]) -> Result<QuadResult> {
        let mut acc = QuadResult { value: 0.0, abs_error: 0.0, evaluations: 0 };
        for w in points.windows(2) {
            acc = acc + self.finite(&f, w[0], w[1])?;
        }
        Ok(acc)
    }

    /// `[a, +inf)` with `x = a + scale * u / (1 - u^2)`.
    pub fn upper_tail<F: Fn(f64) -> f64>(&self, f: F, a: f64, scale: f64) -> Result<QuadResult> {
        let g = |u: f64| {
            let d = 1.0 - u * u;
            let x = a + scale * u / d;
            if !x.is_finite() {
                return 0.0;
            }
            let v = f(x);
            if v == 0.0 {
                0.0
            } else {
                v * scale * (1.0 + u * u) / (d * d)
            }
        };
        self.finite(g, 0.0, 1.0)
    }

    /// `(-inf, b]` with `x = b - scale * u / (1 - u^2)`.
    pub fn lower_tail<F: Fn(f64) -> f64>(&self, f: F, b: f64, scale: f64) -> Result<QuadResult> {
        self.upper_tail(|x| f(2.0 * b - x), b, scale)
    }

    /// The whole real line, split at `center` so a kink there sits on a
    /// panel boundary.
    pub fn real_line<F: Fn(f64) -> f64>(&self, f: F, center: f64, scale: f64) -> Result<QuadResult> {
        let lo = self.lower_tail(&f, center, scale)?;
        let hi = self.upper_tail(&f, center, scale)?;
        Ok(lo + hi)
    }

    /// Real line with several breakpoints (sorted internally). Finite gaps
    /// between breakpoints are integrated directly; the outer tails are mapped.
    pub fn real_line_with_breaks<F: Fn(f64) -> f64>(
        &self,
        f: F,
        breaks: &[f64],
        scale: f64,
    ) -> Result<QuadResult> {
        let mut pts: Vec<f64> = breaks.iter().copied().filter(|x| x.is_finite()).collect();
        if pts.is_empty() {
            return self.real_line(f, 0.0, scale);
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let first = pts[0];
        let last = *pts.last().expect("nonempty");
        let mut acc = self.lower_tail(&f, first, scale)?;
        acc = acc + self.finite_with_breaks(&f, &pts)?;
        acc = acc + self.upper_tail(&f, last, scale)?;
        Ok(acc)
    }

    /// General limits, either of which may be infinite.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<QuadResult> {
        match (a.is_finite(), b.is_finite()) {
            (true, true) => self.finite(f, a, b),
            (true, false) if b > 0.0 => self.upper_tail(f, a, 1.0),
            (false, true) if a < 0.0 => self.lower_tail(f, b, 1.0),
            (false, false) if a < 0.0 && b > 0.0 => self.real_line(f, 0.0, 1.0),
            _ => Err(Error::Domain(format!("unsupported limits [{a}, {b}]"))),
        }
    }
}
