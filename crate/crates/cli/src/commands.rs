use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use shemoments::gaussian::KernelParams;
use shemoments::kernels::{
    h_function, h_tilde, kernel_k, kernel_k_dagger, kernel_k_star, mgf_local_time, two_point_delta,
    two_point_lebesgue, TwoPointQuery,
};
use shemoments::local_time::JointLocalTimeLaw;
use shemoments::measure::{check_membership, two_point_with, Formula, MeasureSpec};
use shemoments::simulate::{path_rng, InitialFunction, RunConfig, Rho};
use shemoments::transforms::laplace_suite;
use shemoments::verify::{run_suite, Check, Suite};
use shemoments::Error;

use crate::manifest::{sidecar_path, RunManifest};
use crate::{FormulaArg, KernelArgs, LocalTimeCommand, Method, MomentArgs, SecondMomentArgs, SimulateArgs, TwoPointArgs, VerifyArgs, Which};

/// `a` values reported when a measure fails the membership check.
const MEMBERSHIP_GRID: [f64; 4] = [1e-3, 1e-2, 1e-1, 1.0];

/// Agreement required between the closed form and quadrature.
const BOTH_TOLERANCE: f64 = 1e-6;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Lib(Error),
    Verification(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Io(_) => 2,
            Failure::Lib(e) => match e {
                Error::Domain(_)
                | Error::Overflow { .. }
                | Error::Pole(_)
                | Error::Quadrature { .. }
                | Error::Contract(_) => 3,
                Error::InadmissibleMeasure(_) => 4,
                Error::Config(_) => 2,
                Error::Divergence { .. } => 5,
                Error::Internal(_) => 1,
            },
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Verification(m) | Failure::Io(m) => f.write_str(m),
            Failure::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))
}

fn write_text(text: &str, out: Option<&Path>) -> Outcome {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Io(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::Io(format!("stdout: {e}")))
        }
    }
}

/// Pretty JSON with sorted keys.
fn emit_json(value: Value, out: Option<&Path>) -> Outcome {
    let mut text = serde_json::to_string_pretty(&value).expect("Value serializes");
    text.push('\n');
    write_text(&text, out)
}

fn emit_csv(header: &[&str], rows: &[Vec<f64>], out: Option<&Path>, manifest: &RunManifest) -> Outcome {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Failure::Io(format!("csv: {e}"));
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Io(format!("csv: {e}")))?;
    let text = String::from_utf8(bytes).expect("csv output is UTF-8");
    write_text(&text, out)?;
    if let Some(p) = out {
        emit_json(manifest.to_value(), Some(&sidecar_path(p)))?;
    }
    Ok(())
}

pub fn kernel(a: KernelArgs) -> Outcome {
    let p = KernelParams::new(a.nu, a.lambda)?;
    let t = a.t;
    let (header, rows): (Vec<&str>, Vec<Vec<f64>>) = match a.which {
        Which::K => (
            vec!["x", "value"],
            a.x.0.iter().map(|&x| Ok(vec![x, kernel_k(t, x, &p)?])).collect::<Result<_, Error>>()?,
        ),
        Which::Htilde => (
            vec!["x", "value"],
            a.x.0.iter().map(|&x| Ok(vec![x, h_tilde(t, x, &p)?])).collect::<Result<_, Error>>()?,
        ),
        Which::H => (vec!["t", "value"], vec![vec![t, h_function(t, &p)?]]),
        Which::Kdagger | Which::Kstar => {
            let f = if a.which == Which::Kstar { kernel_k_star } else { kernel_k_dagger };
            let mut rows = Vec::new();
            for &z1 in &a.z1.0 {
                for &z2 in &a.z2.0 {
                    for &y in &a.y.0 {
                        rows.push(vec![z1, z2, y, f(t, z1, z2, y, &p)?]);
                    }
                }
            }
            (vec!["z1", "z2", "y", "value"], rows)
        }
    };
    let echo = json!({
        "which": format!("{:?}", a.which),
        "t": t, "nu": a.nu, "lambda": a.lambda,
        "x": a.x.0, "z1": a.z1.0, "z2": a.z2.0, "y": a.y.0,
    });
    emit_csv(&header, &rows, a.out.as_deref(), &RunManifest::new("kernel", echo, None))
}

/// Closed form of `E[u(t,x1) u(t,x2)]` for a single atom or a Lebesgue
/// multiple; `None` for every other measure.
fn closed_form(spec: &MeasureSpec, q: &TwoPointQuery, p: &KernelParams) -> Result<Option<f64>, Error> {
    Ok(match spec {
        MeasureSpec::Atoms { atoms } if atoms.len() == 1 => {
            let (z, m) = atoms[0];
            let shifted = TwoPointQuery::new(q.t, q.x1 - z, q.x2 - z)?;
            Some(m * m * two_point_delta(&shifted, p)?)
        }
        MeasureSpec::Lebesgue { scale } => Some(scale * scale * two_point_lebesgue(q, p)?),
        _ => None,
    })
}

fn load_measure(path: &Path) -> Result<(MeasureSpec, shemoments::InitialMeasure), Failure> {
    let spec = MeasureSpec::from_json(&read(path)?)?;
    match spec.to_measure() {
        Ok(mu) => Ok((spec, mu)),
        Err(Error::InadmissibleMeasure(msg)) => {
            let report = match check_membership(&spec.build()?, &MEMBERSHIP_GRID) {
                Ok(r) => serde_json::to_value(r).expect("report serializes"),
                Err(e) => Value::String(e.to_string()),
            };
            emit_json(
                json!({ "status": "inadmissible", "detail": msg, "a_grid": MEMBERSHIP_GRID, "membership": report }),
                None,
            )?;
            Err(Failure::Lib(Error::InadmissibleMeasure(msg)))
        }
        Err(e) => Err(e.into()),
    }
}

fn moment(command: &str, x1: f64, x2: f64, a: MomentArgs) -> Outcome {
    let (spec, mu) = load_measure(&a.measure)?;
    let p = KernelParams::new(a.nu, a.lambda)?;
    let q = TwoPointQuery::new(a.t, x1, x2)?;
    let formula = match a.formula {
        FormulaArg::Split => Formula::Split,
        FormulaArg::Convolution => Formula::Convolution,
    };
    let closed = match a.method {
        Method::Closed | Method::Both => Some(closed_form(&spec, &q, &p)?.ok_or_else(|| {
            Failure::Usage("no closed form for this measure (single atom or lebesgue only); use --method quadrature".into())
        })?),
        Method::Quadrature => None,
    };
    let quad = match a.method {
        Method::Quadrature | Method::Both => Some(two_point_with(&q, &mu, &p, formula)?),
        Method::Closed => None,
    };
    let echo = json!({
        "measure": spec, "t": a.t, "x1": x1, "x2": x2, "nu": a.nu, "lambda": a.lambda,
        "method": format!("{:?}", a.method).to_lowercase(),
        "formula": format!("{:?}", a.formula).to_lowercase(),
    });
    let mut out = json!({ "manifest": RunManifest::new(command, echo, None).to_value() });
    if let Some(c) = closed {
        out["closed"] = json!(c);
    }
    if let Some(v) = quad {
        out["quadrature"] = json!(v);
    }
    let mut failure = None;
    if let (Some(c), Some(v)) = (closed, quad) {
        let rel = if c == v { 0.0 } else { ((c - v) / c).abs() };
        out["rel_diff"] = json!(rel);
        if rel.is_nan() || rel > BOTH_TOLERANCE {
            failure = Some(Failure::Verification(format!("closed and quadrature differ by {rel:.3e} > {BOTH_TOLERANCE:e}")));
        }
    }
    emit_json(out, a.out.as_deref())?;
    failure.map_or(Ok(()), Err)
}

pub fn two_point(a: TwoPointArgs) -> Outcome {
    moment("two-point", a.x1, a.x2, a.common)
}

pub fn second_moment(a: SecondMomentArgs) -> Outcome {
    moment("second-moment", a.x, a.x, a.common)
}

pub fn verify(a: VerifyArgs) -> Outcome {
    let checks: Vec<Check> = run_suite(a.suite)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed()).map(|c| c.name.as_str()).collect();
    let suite = serde_json::to_value(a.suite).expect("suite serializes");
    match a.format {
        crate::Format::Json => {
            let mut out = json!({
                "suite": suite,
                "passed": failed.is_empty(),
                "checks": checks,
                "manifest": RunManifest::new("verify", json!({ "suite": suite }), None).to_value(),
            });
            if matches!(a.suite, Suite::Laplace | Suite::All) {
                let p = KernelParams::new(1.0, 1.0)?;
                out["laplace_table"] = json!(laplace_suite(&p, 0.7, 0.4, 1.0, &[0.3, 1.0, 3.0])?);
            }
            emit_json(out, a.out.as_deref())?;
        }
        crate::Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| Failure::Io(format!("csv: {e}"));
            w.write_record(["name", "status", "measured_err", "tolerance"]).map_err(io)?;
            for c in &checks {
                let status = if c.passed() { "pass" } else { "fail" };
                w.write_record([c.name.clone(), status.into(), c.measured_err.to_string(), c.tolerance.to_string()])
                    .map_err(io)?;
            }
            let text = String::from_utf8(w.into_inner().map_err(|e| Failure::Io(format!("csv: {e}")))?).expect("UTF-8");
            write_text(&text, a.out.as_deref())?;
            if let Some(p) = &a.out {
                emit_json(RunManifest::new("verify", json!({ "suite": suite }), None).to_value(), Some(&sidecar_path(p)))?;
            }
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(format!("{} check(s) failed: {}", failed.len(), failed.join("; "))))
    }
}

fn load_run_config(a: &SimulateArgs) -> Result<RunConfig, Failure> {
    if let Some(path) = &a.manifest {
        let v: Value = serde_json::from_str(&read(path)?).map_err(|e| Failure::Usage(format!("manifest: {e}")))?;
        // Accept either a bare manifest or a full simulate output.
        let m = v.get("manifest").cloned().unwrap_or(v);
        let m: RunManifest = serde_json::from_value(m).map_err(|e| Failure::Usage(format!("manifest: {e}")))?;
        if m.command != "simulate" {
            return Err(Failure::Usage(format!("manifest is for '{}', not simulate", m.command)));
        }
        return serde_json::from_value(m.config_echo).map_err(|e| Failure::Usage(format!("manifest config: {e}")));
    }
    let engine = a.engine.expect("clap requires engine without manifest");
    let path: &PathBuf = a.config.as_ref().expect("clap requires config without manifest");
    Ok(RunConfig::from_json(engine, &read(path)?)?)
}

fn oracle(cfg: &RunConfig) -> Result<Option<f64>, Error> {
    let q = cfg.target().query()?;
    match cfg {
        RunConfig::Spde(c) => {
            let lambda = match c.rho {
                Rho::Zero => 0.0,
                Rho::Linear { lambda } => lambda,
                Rho::ClippedLinear { .. } => return Ok(None),
            };
            closed_form(&c.measure, &q, &KernelParams::new(c.nu, lambda)?)
        }
        RunConfig::Fk(c) | RunConfig::FkOccupation(c) => match c.u0 {
            InitialFunction::Constant { value } => {
                Ok(Some(value * value * two_point_lebesgue(&q, &KernelParams::new(c.nu, c.lambda)?)?))
            }
            _ => Ok(None),
        },
    }
}

pub fn simulate(a: SimulateArgs) -> Outcome {
    let mut cfg = load_run_config(&a)?;
    {
        let mc = cfg.mc_mut();
        if let Some(s) = a.seed {
            mc.seed = s;
        }
        if let Some(n) = a.paths {
            mc.n_paths = n;
        }
        if let Some(w) = a.workers {
            mc.workers = w;
        }
    }
    cfg.mc().validate()?;
    let reference = if a.oracle {
        Some(oracle(&cfg)?.ok_or_else(|| {
            Failure::Usage("--oracle needs a single atom or lebesgue measure (constant u0) and linear rho".into())
        })?)
    } else {
        None
    };
    let outcome = cfg.run()?;
    let echo = serde_json::to_value(&cfg).expect("config serializes");
    let e = outcome.estimate;
    let mut out = json!({
        "value": e.value,
        "std_error": e.std_error,
        "n": e.n,
        "divergent_paths": outcome.divergent_paths,
        "config_echo": echo,
        "manifest": RunManifest::new("simulate", echo.clone(), Some(cfg.mc().seed)).to_value(),
    });
    if let Some(r) = reference {
        out["oracle"] = json!({ "value": r, "z_score": e.z_score(r) });
    }
    emit_json(out, a.out.as_deref())
}

pub fn local_time(c: LocalTimeCommand) -> Outcome {
    match c {
        LocalTimeCommand::Density { t, a, y, v, out } => {
            let law = JointLocalTimeLaw::new(t, a)?;
            let mut rows = Vec::with_capacity(y.0.len() * v.0.len());
            for &yy in &y.0 {
                for &vv in &v.0 {
                    rows.push(vec![yy, vv, law.joint_density_cont(yy, vv)?]);
                }
            }
            let echo = json!({ "t": t, "a": a, "y": y.0, "v": v.0 });
            emit_csv(&["y", "v", "f"], &rows, out.as_deref(), &RunManifest::new("local-time density", echo, None))
        }
        LocalTimeCommand::Sample { t, a, n, seed, out } => {
            if n == 0 {
                return Err(Failure::Usage("--n must be at least 1".into()));
            }
            let law = JointLocalTimeLaw::new(t, a)?;
            let mut rng = path_rng(seed, 0);
            let rows = (0..n)
                .map(|_| law.sample(&mut rng).map(|(y, v)| vec![y, v]))
                .collect::<Result<Vec<_>, Error>>()?;
            let echo = json!({ "t": t, "a": a, "n": n, "seed": seed });
            emit_csv(&["y", "v"], &rows, out.as_deref(), &RunManifest::new("local-time sample", echo, Some(seed)))
        }
        LocalTimeCommand::Mgf { t, a, lambda } => {
            let m = mgf_local_time(t, a, lambda)?;
            let echo = json!({ "t": t, "a": a, "lambda": lambda });
            emit_csv(&["t", "a", "lambda", "mgf"], &[vec![t, a, lambda, m]], None, &RunManifest::new("local-time mgf", echo, None))
        }
    }
}
