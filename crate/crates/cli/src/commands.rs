use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use magbill::algebra::{self, AlgebraError, SearchBudget};
use magbill::dynamics::{lyapunov_estimate, phase_portrait, DynamicsError, LarmorState};
use magbill::geom::{Boundary, BoundaryShape, GeomError, Side};
use magbill::integrals::{self, GrazingCase, IntegralError};
use magbill::io::{self as table, IoError};
use magbill::outer::{equivalence_deviations, OuterConfig, OuterError, Orientation};
use magbill::poly::PolyError;
use magbill::report::{CheckReport, Sig17};
use magbill::rng::{seed_from_env, seeded};
use magbill::{Billiard, Params, Poly, Vec2, VelocityPoly};

use crate::args::*;

/// Anything that makes the run itself invalid; reported with exit code 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Outer(#[from] OuterError),
    #[error(transparent)]
    Integral(#[from] IntegralError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Output(#[from] IoError),
}

/// Result of a successful run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    CheckFailed,
}

impl Outcome {
    fn from_pass(pass: bool) -> Self {
        if pass {
            Outcome::Pass
        } else {
            Outcome::CheckFailed
        }
    }
}

type Run = Result<Outcome, CliError>;

pub fn run(cli: Cli) -> Run {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Portrait(a) => portrait(a),
        Command::Check { check } => match check {
            CheckCommand::Integral(a) => check_integral(a),
            CheckCommand::Remarkable(a) => check_remarkable(a),
            CheckCommand::Rem1(a) => check_rem1(a),
            CheckCommand::Equivalence(a) => check_equivalence(a),
        },
        Command::Offset(a) => offset(a),
        Command::Outer(a) => outer(a),
        Command::Lyapunov(a) => lyapunov(a),
    }
}

fn seed(s: &Seed) -> u64 {
    seed_from_env(s.seed)
}

fn billiard(field: &Field) -> Result<Billiard<BoundaryShape<f64>>, CliError> {
    let shape: BoundaryShape<f64> = field.boundary.parse()?;
    Ok(Billiard::new(shape, Params::new(field.beta)?)?)
}

fn numbers(text: &str, n: usize, what: &str) -> Result<Vec<f64>, CliError> {
    let vals: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect::<Option<_>>()
        .ok_or_else(|| CliError::Invalid(format!("{what} `{text}` is not a comma-separated list of numbers")))?;
    if vals.len() != n {
        return Err(CliError::Invalid(format!("{what} `{text}` needs {n} numbers")));
    }
    Ok(vals)
}

fn point(text: &str, what: &str) -> Result<Vec2, CliError> {
    let v = numbers(text, 2, what)?;
    Ok(Vec2::new(v[0], v[1]))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::File { path: path.to_path_buf(), source })
}

/// Writes to the file, or to stdout when no path is given.
fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|source| CliError::File { path: p.to_path_buf(), source }),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|source| CliError::File { path: PathBuf::from("<stdout>"), source }),
    }
}

fn emit_report(path: Option<&Path>, report: &CheckReport) -> Run {
    let mut text = report.to_json();
    text.push('\n');
    emit(path, text.as_bytes())?;
    Ok(Outcome::from_pass(report.pass))
}

fn warn_partial(done: usize, wanted: usize, err: &dyn std::fmt::Display) {
    eprintln!("warning: orbit stopped after {done} of {wanted} steps: {err}");
}

fn load_integral(spec: &str, beta: f64) -> Result<VelocityPoly, CliError> {
    if spec == "circle" {
        return Ok(integrals::circle_integral(beta));
    }
    let path = spec
        .strip_prefix("file:")
        .ok_or_else(|| CliError::Invalid(format!("integral `{spec}` must be `circle` or `file:PATH`")))?;
    Ok(VelocityPoly::parse_text(&read(Path::new(path))?)?)
}

fn load_poly(path: &Path) -> Result<Poly, CliError> {
    Ok(Poly::parse_text(&read(path)?)?)
}

fn simulate(a: SimulateArgs) -> Run {
    let bil = billiard(&a.field)?;
    let orbit = match (&a.start, &a.center) {
        (Some(start), _) => {
            let v = numbers(start, 3, "start")?;
            let x = Vec2::new(v[0], v[1]);
            let b = bil.boundary();
            let on_boundary = magbill::geom::distance_to_curve(b, x, 1024) < 1e-9;
            if !(b.inside(x) || on_boundary) {
                return Err(CliError::Invalid(format!("start point ({}, {}) lies outside the domain", v[0], v[1])));
            }
            let state = LarmorState::from_angle(x, v[2]);
            let phi = a.integral.as_deref().map(|s| load_integral(s, a.field.beta)).transpose()?;
            let eval = phi.as_ref().map(|p| move |s: &LarmorState<f64>| p.eval(s.x, s.v));
            bil.orbit(state, a.steps, eval.as_ref().map(|f| f as &dyn Fn(&LarmorState<f64>) -> f64))
        }
        (None, Some(center)) => {
            let c = point(center, "center")?;
            if !bil.is_interior_with_margin(c, 0.0) {
                return Err(CliError::Invalid(format!("center ({}, {}) is not inside the phase space", c.x, c.y)));
            }
            if a.integral.is_some() {
                return Err(CliError::Invalid("--integral needs a --start state".into()));
            }
            bil.center_orbit(c, a.steps)
        }
        (None, None) => return Err(CliError::Invalid("give --start x,y,theta or --center x,y".into())),
    };
    let mut buf = Vec::new();
    table::write_orbit_csv(&mut buf, &orbit.records)?;
    emit(a.out.as_deref(), &buf)?;
    if let Some(e) = &orbit.terminated {
        warn_partial(orbit.records.len(), a.steps, e);
    }
    Ok(Outcome::Pass)
}

fn portrait(a: PortraitArgs) -> Run {
    let bil = billiard(&a.field)?;
    let orbits = phase_portrait(&bil, a.seeds, a.iters, seed(&a.seed));
    let mut buf = Vec::new();
    table::write_portrait_csv(&mut buf, &orbits)?;
    emit(a.out.as_deref(), &buf)?;
    if let Some(path) = &a.svg {
        let b = bil.boundary();
        let outline: Vec<Vec2> = (0..512).map(|i| b.eval(b.period() * i as f64 / 512.0)).collect();
        let svg = table::portrait_svg(&orbits, &outline, bil.phase_space_bounds());
        emit(Some(path), svg.as_bytes())?;
    }
    for o in &orbits {
        if let Some(e) = &o.terminated {
            eprintln!("warning: portrait orbit {} stopped after {} steps: {e}", o.id, o.points.len());
        }
    }
    Ok(Outcome::Pass)
}

fn check_integral(a: IntegralArgs) -> Run {
    let bil = billiard(&a.field)?;
    let phi = load_integral(&a.integral, a.field.beta)?;
    let res = integrals::phi_billiard_residual(&phi, &bil, a.samples, seed(&a.seed))?;
    let report = CheckReport::new("integral", a.samples, res.stats.mean, res.stats.max_abs, 1e-9 * res.scale)
        .with("scale", res.scale);
    emit_report(a.report.as_deref(), &report)
}

fn side(s: SideArg) -> Side {
    match s {
        SideArg::Plus => Side::Plus,
        SideArg::Minus => Side::Minus,
    }
}

fn check_remarkable(a: RemarkableArgs) -> Run {
    let bil = billiard(&a.field)?;
    let f = load_poly(&a.poly)?;
    let samples = integrals::parallel_samples(bil.boundary(), side(a.side), bil.r(), a.samples);
    let c = integrals::rem3_residual(&f, &samples, a.field.beta)?;
    let nonzero = integrals::rem5_residual(&f, &Poly::constant(1.0), 1, a.field.beta, &samples)?.nonzero;
    let tol = 1e-9 * c.mean.abs().max(1.0);
    let report = CheckReport::new("remarkable", samples.len(), c.mean, c.max_deviation, tol)
        .with("nonzero_constant", nonzero)
        .require(nonzero);
    emit_report(a.report.as_deref(), &report)
}

fn check_rem1(a: Rem1Args) -> Run {
    let bil = billiard(&a.field)?;
    let f = load_poly(&a.poly)?;
    if a.eps_ladder.len() < 2 || a.eps_ladder.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
        return Err(CliError::Invalid("--eps-ladder needs at least two values in (0, 1)".into()));
    }
    let case = match a.case {
        CaseArg::A => GrazingCase::A,
        CaseArg::B => GrazingCase::B,
    };
    let b = bil.boundary();
    let mut deviations = Vec::new();
    for i in 0..a.samples {
        let t = b.period() * (i as f64 + 0.5) / a.samples as f64;
        let check = integrals::rem1_eps_check(&f, b, bil.params(), t, case, &a.eps_ladder)?;
        if let Some(ratio) = check.ratio {
            deviations.push((ratio - 1.0).abs());
        }
    }
    let defined = deviations.len();
    let (mean, max) = if defined == 0 {
        (f64::NAN, f64::NAN)
    } else {
        (deviations.iter().sum::<f64>() / defined as f64, deviations.iter().cloned().fold(0.0, f64::max))
    };
    let report = CheckReport::new("rem1", defined, mean, max, 1e-5)
        .with("undefined_ratios", a.samples - defined)
        .require(defined > 0);
    emit_report(a.report.as_deref(), &report)
}

fn check_equivalence(a: EquivalenceArgs) -> Run {
    let shape: BoundaryShape<f64> = a.field.boundary.parse()?;
    let params = Params::new(a.field.beta)?;
    params.admissible(&shape)?;
    let devs = equivalence_deviations(&shape, params, a.samples, seed(&a.seed))?;
    let mean = if devs.is_empty() { 0.0 } else { devs.iter().sum::<f64>() / devs.len() as f64 };
    let max = devs.iter().cloned().fold(0.0, f64::max);
    let report = CheckReport::new("equivalence", devs.len(), mean, max, 1e-8);
    emit_report(a.report.as_deref(), &report)
}

#[derive(Serialize)]
struct ScanRow {
    r: Sig17,
    certified: bool,
    max_residual: Option<Sig17>,
    failure: Option<String>,
}

fn offset(a: OffsetArgs) -> Run {
    if !(a.a > 0.0 && a.b > 0.0 && a.a >= a.b) {
        return Err(CliError::Invalid(format!("need a >= b > 0, got a = {}, b = {}", a.a, a.b)));
    }
    let out = a.out.as_deref();
    let need_r = || {
        a.r.filter(|r| *r > 0.0)
            .ok_or_else(|| CliError::Invalid("--r (positive) is required for this action".into()))
    };
    match a.action {
        OffsetAction::Eval => {
            let f = algebra::ellipse_offset_poly(a.a, a.b, need_r()?);
            emit(out, f.to_text().as_bytes())?;
            Ok(Outcome::Pass)
        }
        OffsetAction::Vanish => {
            let res = algebra::offset_residuals(a.a, a.b, need_r()?, a.samples);
            let mean = if res.is_empty() { 0.0 } else { res.iter().sum::<f64>() / res.len() as f64 };
            let max = res.iter().cloned().fold(0.0, f64::max);
            emit_report(out, &CheckReport::new("offset_vanishing", res.len(), mean, max, 1e-6))
        }
        OffsetAction::Singular => {
            let budget = SearchBudget { n_starts: a.starts, seed: seed(&a.seed), ..Default::default() };
            let report = algebra::ellipse_offset_report(a.a, a.b, need_r()?, budget)?;
            emit(out, (report.to_json() + "\n").as_bytes())?;
            Ok(Outcome::Pass)
        }
        OffsetAction::Infinity => {
            let f = algebra::ellipse_offset_poly(a.a, a.b, need_r()?);
            let points = algebra::infinity_report(&f)?;
            emit(out, (algebra::infinity_json(&points) + "\n").as_bytes())?;
            Ok(Outcome::Pass)
        }
        OffsetAction::Scan => {
            let (lo, hi) = match (a.r_min, a.r_max) {
                (Some(lo), Some(hi)) if lo <= hi => (lo, hi),
                _ => return Err(CliError::Invalid("scan needs --r-min <= --r-max".into())),
            };
            let bound = a.a * a.a / a.b;
            if lo <= bound {
                return Err(CliError::Invalid(format!("scan grid must lie in r > a^2/b = {bound}")));
            }
            let n = a.r_steps;
            let grid: Vec<f64> = (0..n)
                .map(|i| if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
                .collect();
            let rows: Vec<ScanRow> = algebra::r_scan(a.a, a.b, &grid)
                .into_iter()
                .map(|e| ScanRow {
                    r: Sig17(e.r),
                    certified: e.certified,
                    max_residual: e.max_residual.map(Sig17),
                    failure: e.failure,
                })
                .collect();
            let all = rows.iter().all(|r| r.certified);
            let text = serde_json::to_string_pretty(&rows).expect("scan serializes") + "\n";
            emit(out, text.as_bytes())?;
            Ok(Outcome::from_pass(all))
        }
    }
}

fn outer(a: OuterArgs) -> Run {
    let gamma: BoundaryShape<f64> = a.gamma.parse()?;
    let orientation = match a.orientation {
        OrientationArg::Cw => Orientation::Clockwise,
        OrientationArg::Ccw => Orientation::Counterclockwise,
    };
    let cfg = OuterConfig::new(gamma, orientation, a.r)?;
    let p = point(&a.start, "start")?;
    if !cfg.in_annulus(p, 0.0) {
        return Err(CliError::Invalid(format!("start ({}, {}) is not inside the annulus", p.x, p.y)));
    }
    let (steps, err) = cfg.orbit(p, a.steps);
    let mut buf = Vec::new();
    table::write_outer_csv(&mut buf, &steps)?;
    emit(a.out.as_deref(), &buf)?;
    if let Some(e) = err {
        warn_partial(steps.len(), a.steps, &e);
    }
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct LyapunovRow {
    start: [Sig17; 2],
    lambda: Sig17,
    stderr: Sig17,
    iterations: usize,
    terminated: Option<String>,
}

#[derive(Serialize)]
struct LyapunovOut {
    max_lambda: Sig17,
    estimates: Vec<LyapunovRow>,
}

fn lyapunov(a: LyapunovArgs) -> Run {
    let bil = billiard(&a.field)?;
    if a.iters < 1000 {
        return Err(DynamicsError::TooFewIterations { needed: 1000, got: a.iters }.into());
    }
    let base = seed(&a.seed);
    let starts: Vec<Vec2> = match &a.center {
        Some(c) => {
            let p = point(c, "center")?;
            if !bil.is_interior_with_margin(p, 0.0) {
                return Err(CliError::Invalid(format!("center ({}, {}) is not inside the phase space", p.x, p.y)));
            }
            vec![p]
        }
        None => {
            let mut rng = seeded(base);
            (0..a.starts).map(|_| bil.sample_center(&mut rng, 1e-3)).collect()
        }
    };
    let mut rows = Vec::with_capacity(starts.len());
    for (k, p) in starts.iter().enumerate() {
        let est = lyapunov_estimate(&bil, *p, a.iters, base.wrapping_add(k as u64 + 1))?;
        rows.push(LyapunovRow {
            start: [Sig17(p.x), Sig17(p.y)],
            lambda: Sig17(est.lambda),
            stderr: Sig17(est.stderr),
            iterations: est.iterations,
            terminated: est.terminated.map(|e| e.to_string()),
        });
    }
    let max_lambda = rows.iter().map(|r| r.lambda.0).filter(|v| v.is_finite()).fold(f64::NAN, f64::max);
    let text = serde_json::to_string_pretty(&LyapunovOut { max_lambda: Sig17(max_lambda), estimates: rows })
        .expect("estimates serialize")
        + "\n";
    emit(a.out.as_deref(), text.as_bytes())?;
    Ok(Outcome::Pass)
}
