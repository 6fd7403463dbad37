//! Algebraic side of non-integrability: the ellipse offset curve, its complex
//! singular points, and the behaviour of plane curves at the infinite line.

use num_complex::Complex;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::geom::{parallel_point, ComplexPoint, Ellipse, PlanarVector, Side};
use crate::poly::{BivarPoly, PolyError, CLUSTER_RADIUS};
use crate::report::Sig17;
use crate::rng::seeded;
use crate::scalar::Real;

/// Relative threshold for "on the curve" and "singular" in certification.
pub const CERTIFY_TOL: f64 = 1e-6;
/// Relative threshold used by the heuristic search and the infinity classification.
pub const SEARCH_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgebraError {
    #[error("certification failed: {0}")]
    CertificationFailed(String),
    #[error("r = {r} is outside the regime r > a²/b = {bound}")]
    OutsideRegime { r: f64, bound: f64 },
    #[error("invalid ellipse/offset parameters: {0}")]
    BadParameters(String),
    #[error("gradient vanishes at the point")]
    VanishingGradient,
    #[error("point is not on the curve (|f| = {residual:e})")]
    NotOnCurve { residual: f64 },
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Residual scale `max|coef| · max(1, |p|)^deg`.
pub fn residual_scale<T: Real>(f: &BivarPoly<T>, p_norm: T) -> T {
    f.max_abs_coef() * p_norm.max(T::one()).powi(f.degree() as i32)
}

fn check_params<T: Real>(a: T, b: T, r: T) -> Result<(), AlgebraError> {
    if !(a > T::zero() && b > T::zero() && r > T::zero()) || a < b {
        return Err(AlgebraError::BadParameters(format!("need a >= b > 0 and r > 0, got a={a}, b={b}, r={r}")));
    }
    Ok(())
}

/// Implicit degree-8 equation of both offset curves of `x²/a² + y²/b² = 1` at distance `r`.
pub fn ellipse_offset_poly<T: Real>(a: T, b: T, r: T) -> BivarPoly<T> {
    type P<T> = BivarPoly<T>;
    let k = |v: f64| P::constant(T::lit(v));
    let x2 = P::monomial(2, 0, T::one());
    let y2 = P::monomial(0, 2, T::one());
    let x4 = x2.pow(2);
    let y4 = y2.pow(2);
    let x6 = x2.pow(3);
    let y6 = y2.pow(3);
    let x2y2 = &x2 * &y2;
    let (a2, b2, r2) = (a * a, b * b, r * r);
    let a4 = a2 * a2;
    let b4 = b2 * b2;
    let r4 = r2 * r2;
    let c = |v: T| P::constant(v);
    let sq = |p: &P<T>| p * p;

    let r2_y2 = &c(r2) - &y2;
    let r2_x2 = &c(r2) - &x2;
    let s = &(&x2 + &y2) - &c(r2);

    let t1 = (&(&c(b4) + &sq(&r2_y2)) - &(&c(r2) + &y2).scale(T::two() * b2)).scale(a4 * a4);

    let t2_inner = &(&c(b4) - &(&(&c(r2) - &x2) + &y2).scale(T::two() * b2)) + &sq(&s);
    let t2 = (&sq(&r2_x2) * &t2_inner).scale(b4);

    let t3_inner = {
        let p1 = c(b4 * b2);
        let p2 = &sq(&r2_y2) * &(&(&c(r2) + &x2) - &y2);
        let p3 = (&(&c(r2) - &x2.scale(T::two())) + &y2.scale(T::lit(3.0))).scale(b4);
        let p4 = (&(&c(r4) + &(&x2y2 - &y4).scale(T::lit(3.0)))
            + &(&x2.scale(T::lit(3.0)) + &y2.scale(T::two())).scale(r2))
            .scale(b2);
        &(&(&p1 + &p2) - &p3) - &p4
    };
    let t3 = t3_inner.scale(-T::two() * a4 * a2);

    let t4_inner = {
        let p1 = (&c(r2) + &x2).scale(-b4 * b2);
        let p2 = &sq(&s) * &(&(&c(r4) - &x2y2) - &(&x2 + &y2).scale(r2));
        let p3 = (&(&(&c(r4) - &x4.scale(T::lit(3.0))) + &x2y2.scale(T::lit(3.0)))
            + &(&x2.scale(T::two()) + &y2.scale(T::lit(3.0))).scale(r2))
            .scale(b4);
        let p4 = {
            let q = &(&(&(&c(r4 * r2) - &x6.scale(T::two())) + &(&x4 * &y2))
                - &(&x2 * &y4).scale(T::lit(3.0)))
                + &(&x2.scale(-T::lit(4.0)) + &y2.scale(T::two())).scale(r4);
            let q2 = (&(&x4.scale(T::lit(5.0)) - &x2y2.scale(T::lit(3.0))) - &y4.scale(T::lit(3.0))).scale(r2);
            (&q + &q2).scale(b2)
        };
        &(&(&p1 - &p2) + &p3) + &p4
    };
    let t4 = t4_inner.scale(T::two() * a2 * b2);

    let t5_inner = {
        let p1 = c(b4 * b4);
        let p2 = (&(&c(r2) + &x2.scale(T::lit(3.0))) - &y2.scale(T::two())).scale(T::two() * b4 * b2);
        let p3 = &sq(&r2_y2) * &sq(&s);
        let p4 = (&(&(&(&c(T::lit(3.0) * r4) - &x4.scale(T::lit(3.0))) + &x2y2.scale(T::lit(5.0)))
            - &y4.scale(T::lit(3.0)))
            + &(&x2 + &y2).scale(T::lit(4.0) * r2))
            .scale(-T::two() * b4);
        let p5 = {
            let q = &(&(&(&c(r4 * r2) - &(&x4 * &y2).scale(T::lit(3.0))) + &(&x2 * &y4))
                - &y6.scale(T::two()))
                + &(&x2 - &y2.scale(T::two())).scale(T::two() * r4);
            let q2 = (&(&x4.scale(-T::lit(3.0)) - &x2y2.scale(T::lit(3.0))) + &y4.scale(T::lit(5.0))).scale(r2);
            (&q + &q2).scale(T::two() * b2)
        };
        &(&(&(&p1 + &p2) + &p3) + &p4) + &p5
    };
    let t5 = t5_inner.scale(a4);
    let _ = k;

    &(&(&(&t1 + &t2) + &t3) + &t4) + &t5
}

/// Largest `|f(γ±r(t))| / scale` over `n_samples` parameters on each side.
pub fn offset_vanishing_check<T: Real>(a: T, b: T, r: T, n_samples: usize) -> T {
    offset_residuals(a, b, r, n_samples).into_iter().fold(T::zero(), T::max)
}

/// Scaled residuals `|f(γ±r(t))| / scale`, both sides interleaved per parameter.
pub fn offset_residuals<T: Real>(a: T, b: T, r: T, n_samples: usize) -> Vec<T> {
    let f = ellipse_offset_poly(a, b, r);
    let e = Ellipse::new(a, b);
    let mut out = Vec::with_capacity(2 * n_samples);
    for i in 0..n_samples {
        let t = T::TAU() * T::count(i) / T::count(n_samples);
        for side in [Side::Plus, Side::Minus] {
            let p = parallel_point(&e, t, side, r);
            out.push(f.eval_point(p).abs() / residual_scale(&f, p.norm()));
        }
    }
    out
}

/// `|f|`, `|f_x|`, `|f_y|` at a complex point, each relative to [`residual_scale`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularResidual<T> {
    pub f: T,
    pub fx: T,
    pub fy: T,
}

impl<T: Real> SingularResidual<T> {
    pub fn max(&self) -> T {
        self.f.max(self.fx).max(self.fy)
    }
}

pub fn singular_residual<T: Real>(f: &BivarPoly<T>, p: &ComplexPoint<T>) -> SingularResidual<T> {
    let scale = residual_scale(f, p.norm());
    SingularResidual {
        f: f.eval_complex_point(p).norm() / scale,
        fx: f.dx().eval_complex_point(p).norm() / scale,
        fy: f.dy().eval_complex_point(p).norm() / scale,
    }
}

/// The four closed-form complex singular points of the ellipse offset curve,
/// `(0, ±√(b²-a²)√(a²-r²)/a)` and `(±√(a²-b²)√(b²-r²)/b, 0)` with principal roots,
/// each certified against [`ellipse_offset_poly`].
pub fn ellipse_offset_singular_points<T: Real>(a: T, b: T, r: T) -> Result<Vec<ComplexPoint<T>>, AlgebraError> {
    check_params(a, b, r)?;
    if a == b {
        return Err(AlgebraError::CertificationFailed(
            "circle has smooth offsets: the closed-form points collapse to the center".into(),
        ));
    }
    let bound = a * a / b;
    if r <= bound {
        return Err(AlgebraError::OutsideRegime { r: r.as_f64(), bound: bound.as_f64() });
    }
    let root = |v: T| Complex::new(v, T::zero()).sqrt();
    let zero = Complex::new(T::zero(), T::zero());
    let y0 = root(b * b - a * a) * root(a * a - r * r) / a;
    let x0 = root(a * a - b * b) * root(b * b - r * r) / b;
    let points = vec![
        ComplexPoint::new(zero, y0),
        ComplexPoint::new(zero, -y0),
        ComplexPoint::new(x0, zero),
        ComplexPoint::new(-x0, zero),
    ];
    let f = ellipse_offset_poly(a, b, r);
    for p in &points {
        let res = singular_residual(&f, p);
        if !(res.max() < T::lit(CERTIFY_TOL)) {
            return Err(AlgebraError::CertificationFailed(format!(
                "residual {:e} at ({}, {})",
                res.max().as_f64(),
                p.x,
                p.y
            )));
        }
    }
    Ok(points)
}

/// Heuristic search for complex singular points of `f = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBudget {
    pub n_starts: usize,
    pub seed: u64,
    /// Real and imaginary parts of the starts are uniform in `[-half_width, half_width]`.
    pub half_width: f64,
    pub max_newton: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self { n_starts: 2000, seed: 0, half_width: 10.0, max_newton: 100 }
    }
}

/// `Σ |c_ij| X^i Y^j` with `X = max(1, |x|)`, `Y = max(1, |y|)`: the size of the
/// terms whose cancellation produces `f(p)`.
fn term_magnitude<T: Real>(f: &BivarPoly<T>, p: &ComplexPoint<T>) -> T {
    let (ax, ay) = (p.x.norm().max(T::one()), p.y.norm().max(T::one()));
    f.terms().into_iter().fold(T::zero(), |acc, (i, j, c)| acc + c.abs() * ax.powi(i as i32) * ay.powi(j as i32))
}

/// Multistart Newton on `f_x = f_y = 0` in `C²`, keeping critical points on the
/// curve. Finding nothing does not prove smoothness.
///
/// A critical point is kept when `|f|`, `|f_x|`, `|f_y|` are below `1e-8` of
/// [`residual_scale`] and `|f|` is also within `1e4` rounding units of the term
/// magnitude at the point; the second test rejects critical points with a small
/// but clearly nonzero critical value, which the coarse scale alone lets
/// through. Degenerate singular points converge only linearly, so duplicates
/// are merged within `1e-6` or ten times the last Newton step, whichever is larger.
pub fn singular_search<T: Real>(f: &BivarPoly<T>, budget: SearchBudget) -> Vec<ComplexPoint<T>> {
    let fx = f.dx();
    let fy = f.dy();
    let fxx = fx.dx();
    let fxy = fx.dy();
    let fyy = fy.dy();
    let mut rng = seeded(budget.seed);
    let w = budget.half_width;
    let mut found: Vec<(ComplexPoint<T>, T)> = Vec::new();
    let mut draw = || Complex::new(T::lit(rng.gen_range(-w..=w)), T::lit(rng.gen_range(-w..=w)));
    for _ in 0..budget.n_starts {
        let mut x = draw();
        let mut y = draw();
        let mut last_step = T::infinity();
        for _ in 0..budget.max_newton {
            let (gx, gy) = (fx.eval_complex(x, y), fy.eval_complex(x, y));
            let (hxx, hxy, hyy) = (fxx.eval_complex(x, y), fxy.eval_complex(x, y), fyy.eval_complex(x, y));
            let det = hxx * hyy - hxy * hxy;
            if det.norm() == T::zero() || !det.re.is_finite() {
                break;
            }
            let dx = (hyy * gx - hxy * gy) / det;
            let dy = (hxx * gy - hxy * gx) / det;
            x = x - dx;
            y = y - dy;
            last_step = dx.norm() + dy.norm();
            if !(x.norm().is_finite() && y.norm().is_finite()) {
                break;
            }
            if last_step <= T::lit(1e-15) * (T::one() + x.norm() + y.norm()) {
                break;
            }
        }
        let p = ComplexPoint::new(x, y);
        if !p.norm().is_finite() {
            continue;
        }
        let res = singular_residual(f, &p);
        let tol = T::lit(SEARCH_TOL);
        let rounding = T::lit(1e4) * T::epsilon() * term_magnitude(f, &p);
        let on_curve = f.eval_complex_point(&p).norm() <= rounding;
        if res.f < tol && res.fx < tol && res.fy < tol && on_curve {
            let spread = T::lit(10.0) * if last_step.is_finite() { last_step } else { T::zero() };
            let radius = (T::lit(CLUSTER_RADIUS) * (T::one() + p.norm())).max(spread);
            match found.iter_mut().find(|(q, r)| q.distance(&p) < radius.max(*r)) {
                Some(entry) if spread < entry.1 => *entry = (p, spread),
                Some(_) => {}
                None => found.push((p, spread)),
            }
        }
    }
    found.into_iter().map(|(p, _)| p).collect()
}

/// Curvature `H(f)/|∇f|³` of `f = 0` at a point of the curve (signed by the gradient orientation).
pub fn implicit_curvature<T: Real>(f: &BivarPoly<T>, p: PlanarVector<T>) -> Result<T, AlgebraError> {
    let value = f.eval_point(p);
    if !(value.abs() < T::lit(SEARCH_TOL) * residual_scale(f, p.norm())) {
        return Err(AlgebraError::NotOnCurve { residual: value.as_f64() });
    }
    let g = f.gradient(p).norm();
    if g < T::lit(1e-10) {
        return Err(AlgebraError::VanishingGradient);
    }
    Ok(f.h_operator().eval_point(p) / (g * g * g))
}

/// A point of `f̃ = 0` on the infinite line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfinityPoint<T> {
    /// `x/y` of the point `(x : y : 0)`; `None` for `(1 : 0 : 0)`.
    pub ratio: Option<Complex<T>>,
    pub multiplicity: usize,
    /// One of `(1 : ±i : 0)`.
    pub isotropic: bool,
    /// Smooth point whose tangent line is the infinite line.
    pub tangency: bool,
    /// Smooth, non-isotropic and transversal: excluded for an integrable boundary.
    pub obstruction: bool,
}

/// Classifies the intersection of the projective closure of `f = 0` with the infinite line.
///
/// Roots of the leading form `f_d(ρ, 1)`, `ρ = x/y`, give the points; a drop in
/// degree of `f_d(ρ, 1)` puts points at `(1 : 0 : 0)`. A multiple root is a
/// tangency when `f_{d-1}` does not vanish there (the homogenized gradient is
/// then `(0, 0, f_{d-1})`), and a singular point otherwise.
pub fn infinity_report<T: Real>(f: &BivarPoly<T>) -> Result<Vec<InfinityPoint<T>>, AlgebraError> {
    let d = f.degree();
    if d == 0 {
        return Ok(Vec::new());
    }
    let lead = f.leading_form();
    let next = f.sub_leading_form(1);
    let tol = T::lit(SEARCH_TOL);
    let big = f.max_abs_coef();
    let mut out = Vec::new();
    if lead.degree() >= 1 {
        for c in lead.root_clusters()? {
            let rho = c.value;
            let i = Complex::new(T::zero(), T::one());
            let isotropic = (rho - i).norm() < tol || (rho + i).norm() < tol;
            let scale = big * rho.norm().max(T::one()).powi(d as i32 - 1);
            let smooth_tangent = next.eval(rho).norm() > tol * scale;
            let tangency = c.multiplicity >= 2 && smooth_tangent;
            let obstruction = c.multiplicity == 1 && !isotropic;
            out.push(InfinityPoint { ratio: Some(rho), multiplicity: c.multiplicity, isotropic, tangency, obstruction });
        }
    }
    let at_x = d - lead.degree();
    if at_x > 0 {
        // (1 : 0 : 0): the role of f_{d-1} is played by its x^{d-1} coefficient
        let smooth_tangent = f.coef(d - 1, 0).abs() > tol * big;
        out.push(InfinityPoint {
            ratio: None,
            multiplicity: at_x,
            isotropic: false,
            tangency: at_x >= 2 && smooth_tangent,
            obstruction: at_x == 1,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NoObstruction,
    ObstructedAffineSingularity,
    ObstructedTransversalInfinity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstructionReport<T> {
    pub affine_singular_points: Vec<ComplexPoint<T>>,
    pub infinity_points: Vec<InfinityPoint<T>>,
    pub verdict: Verdict,
}

#[derive(Serialize)]
struct InfinityJson {
    ratio: Option<[Sig17; 2]>,
    multiplicity: usize,
    isotropic: bool,
    tangency: bool,
}

fn infinity_rows<T: Real>(points: &[InfinityPoint<T>]) -> Vec<InfinityJson> {
    points
        .iter()
        .map(|q| InfinityJson {
            ratio: q.ratio.map(|z| [Sig17(z.re.as_f64()), Sig17(z.im.as_f64())]),
            multiplicity: q.multiplicity,
            isotropic: q.isotropic,
            tangency: q.tangency,
        })
        .collect()
}

#[derive(Serialize)]
struct InfinityOnly {
    infinity: Vec<InfinityJson>,
}

/// The `infinity` list of a report on its own, as `{"infinity": [...]}`.
pub fn infinity_json<T: Real>(points: &[InfinityPoint<T>]) -> String {
    serde_json::to_string_pretty(&InfinityOnly { infinity: infinity_rows(points) }).expect("report serializes")
}

#[derive(Serialize)]
struct ReportJson {
    verdict: Verdict,
    affine_singular: Vec<[Sig17; 4]>,
    infinity: Vec<InfinityJson>,
}

impl<T: Real> ObstructionReport<T> {
    pub fn to_json(&self) -> String {
        let body = ReportJson {
            verdict: self.verdict,
            affine_singular: self
                .affine_singular_points
                .iter()
                .map(|p| [p.x.re, p.x.im, p.y.re, p.y.im].map(|v| Sig17(v.as_f64())))
                .collect(),
            infinity: infinity_rows(&self.infinity_points),
        };
        serde_json::to_string_pretty(&body).expect("report serializes")
    }
}

/// Combines the singular-point search, any known closed-form candidates and the
/// infinity classification. Affine singularities take precedence in the verdict.
pub fn obstruction_report<T: Real>(
    f: &BivarPoly<T>,
    budget: SearchBudget,
    candidates: &[ComplexPoint<T>],
) -> Result<ObstructionReport<T>, AlgebraError> {
    let mut affine: Vec<ComplexPoint<T>> = candidates
        .iter()
        .filter(|p| singular_residual(f, p).max() < T::lit(CERTIFY_TOL))
        .cloned()
        .collect();
    if f.degree() >= 2 {
        for p in singular_search(f, budget) {
            let radius = T::lit(CLUSTER_RADIUS) * (T::one() + p.norm());
            if !affine.iter().any(|q| q.distance(&p) < radius) {
                affine.push(p);
            }
        }
    }
    let infinity_points = infinity_report(f)?;
    let verdict = if !affine.is_empty() {
        Verdict::ObstructedAffineSingularity
    } else if infinity_points.iter().any(|q| q.obstruction) {
        Verdict::ObstructedTransversalInfinity
    } else {
        Verdict::NoObstruction
    };
    Ok(ObstructionReport { affine_singular_points: affine, infinity_points, verdict })
}

/// Report for the offset curve of the ellipse, seeded with the closed-form points.
pub fn ellipse_offset_report<T: Real>(a: T, b: T, r: T, budget: SearchBudget) -> Result<ObstructionReport<T>, AlgebraError> {
    let f = ellipse_offset_poly(a, b, r);
    let known = ellipse_offset_singular_points(a, b, r)?;
    obstruction_report(&f, budget, &known)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanEntry<T> {
    pub r: T,
    pub certified: bool,
    /// Largest relative residual among the four points, when they could be formed.
    pub max_residual: Option<T>,
    pub failure: Option<String>,
}

/// Certifies the closed-form singular points for each `r`.
pub fn r_scan<T: Real>(a: T, b: T, rs: &[T]) -> Vec<ScanEntry<T>> {
    rs.iter()
        .map(|&r| match ellipse_offset_singular_points(a, b, r) {
            Ok(points) => {
                let f = ellipse_offset_poly(a, b, r);
                let worst = points.iter().fold(T::zero(), |m, p| m.max(singular_residual(&f, p).max()));
                ScanEntry { r, certified: true, max_residual: Some(worst), failure: None }
            }
            Err(e) => ScanEntry { r, certified: false, max_residual: None, failure: Some(e.to_string()) },
        })
        .collect()
}

/// `(x² + y²)^m` minus lower-order terms; used to probe isotropic-only behaviour.
pub fn isotropic_power<T: Real>(m: u32, lower: &BivarPoly<T>) -> BivarPoly<T> {
    &BivarPoly::from_terms([(2, 0, T::one()), (0, 2, T::one())]).pow(m) - lower
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Boundary;

    type P = BivarPoly<f64>;
    type V = PlanarVector<f64>;

    fn ellipse_boundary(a: f64, b: f64) -> P {
        P::from_terms([(2, 0, 1.0 / (a * a)), (0, 2, 1.0 / (b * b)), (0, 0, -1.0)])
    }

    #[test]
    fn offset_vertices() {
        let f = ellipse_offset_poly(2.0, 1.0, 5.0);
        assert_eq!(f.degree(), 8);
        for p in [V::new(-3.0, 0.0), V::new(7.0, 0.0)] {
            assert!(f.eval_point(p).abs() < 1e-6 * residual_scale(&f, p.norm()), "{p}");
        }
    }

    #[test]
    fn transcription_gate() {
        assert!(offset_vanishing_check(2.0, 1.0, 5.0, 4096) < 1e-6);
        assert!(offset_vanishing_check(3.0, 1.0, 10.0, 4096) < 1e-6);
        assert!(offset_vanishing_check(1.0, 1.0, 2.0, 1024) < 1e-10);
        assert!(offset_vanishing_check(3.0, 2.0, 7.0, 1024) < 1e-6);
        for r in [4.1, 4.5, 6.0, 8.0] {
            assert!(offset_vanishing_check(2.0, 1.0, r, 1024) < 1e-6);
        }
    }

    #[test]
    fn circle_degeneration() {
        let f = ellipse_offset_poly(1.5, 1.5, 4.0);
        for i in 0..64 {
            let th = 0.1 * i as f64;
            for rho in [2.5, 5.5] {
                let p = V::from_angle(th) * rho;
                assert!(f.eval_point(p).abs() < 1e-6 * residual_scale(&f, rho));
            }
        }
    }

    #[test]
    fn closed_form_singular_points() {
        let pts = ellipse_offset_singular_points(2.0f64, 1.0, 5.0).unwrap();
        assert!((pts[0].y.re.abs() - 63f64.sqrt() / 2.0).abs() < 1e-12 && pts[0].y.im == 0.0);
        assert!((pts[2].x.im.abs() - 72f64.sqrt()).abs() < 1e-12 && pts[2].x.re.abs() < 1e-15);
        let pts = ellipse_offset_singular_points(2.0f64, 1.0, 8.0).unwrap();
        assert!((pts[0].y.re.abs() - 6.708_203_932_499_369).abs() < 1e-12);
        assert!((pts[2].x.im.abs() - 13.747_727_084_867_52).abs() < 1e-11);
        assert!(ellipse_offset_singular_points(3.0, 2.0, 7.0).is_ok());
        assert!(matches!(
            ellipse_offset_singular_points(2.0, 1.0, 3.0),
            Err(AlgebraError::OutsideRegime { .. })
        ));
        assert!(matches!(
            ellipse_offset_singular_points(1.0, 1.0, 3.0),
            Err(AlgebraError::CertificationFailed(_))
        ));
    }

    #[test]
    fn search_finds_closed_form_points() {
        let f = ellipse_offset_poly(2.0, 1.0, 5.0);
        let found = singular_search(&f, SearchBudget { seed: 1, ..Default::default() });
        for p in ellipse_offset_singular_points(2.0, 1.0, 5.0).unwrap() {
            assert!(found.iter().any(|q| q.distance(&p) < 1e-6), "missing {:?}; found {found:?}", p);
        }
        for p in &found {
            assert!(f.eval_complex_point(p).norm() < 1e-3, "off-curve critical point {p:?}");
        }
        for (i, p) in found.iter().enumerate() {
            assert!(found[i + 1..].iter().all(|q| q.distance(p) > 1e-3), "duplicate {p:?}");
        }
        assert!(singular_search(&P::from_terms([(2, 0, 1.0), (0, 2, 1.0), (0, 0, -1.0)]), SearchBudget::default()).is_empty());
        let cusp = singular_search(&P::from_terms([(2, 0, 1.0), (0, 3, -1.0)]), SearchBudget { n_starts: 50, ..Default::default() });
        assert_eq!(cusp.len(), 1);
        assert!(cusp[0].norm() < 1e-6);
    }

    #[test]
    fn curvature_examples() {
        let k = implicit_curvature(&ellipse_boundary(2.0, 1.0), V::new(2.0, 0.0)).unwrap();
        assert!((k.abs() - 2.0).abs() < 1e-14);
        let rho: f64 = 1.7;
        let circle = P::from_terms([(2, 0, 1.0), (0, 2, 1.0), (0, 0, -rho * rho)]);
        assert!((implicit_curvature(&circle, V::new(rho, 0.0)).unwrap().abs() - 1.0 / rho).abs() < 1e-14);
        let parabola = P::from_terms([(0, 1, 1.0), (2, 0, -1.0)]);
        assert!((implicit_curvature(&parabola, V::zero()).unwrap().abs() - 2.0).abs() < 1e-14);
        assert!(matches!(implicit_curvature(&circle, V::zero()), Err(AlgebraError::NotOnCurve { .. })));
        // agrees with the parametric curvature of the ellipse
        let e = Ellipse::new(2.0, 1.0);
        let f = ellipse_boundary(2.0, 1.0);
        for i in 0..100 {
            let t = 0.0628 * i as f64;
            let k = implicit_curvature(&f, e.eval(t)).unwrap().abs();
            assert!((k - e.curvature(t)).abs() < 1e-8 * e.curvature(t));
        }
    }

    #[test]
    fn infinity_examples() {
        let rep = infinity_report(&ellipse_boundary(2.0, 1.0)).unwrap();
        assert_eq!(rep.len(), 2);
        for q in &rep {
            let z = q.ratio.unwrap();
            assert!((z.norm() - 2.0).abs() < 1e-12 && z.re.abs() < 1e-12);
            assert!(!q.isotropic && !q.tangency && q.obstruction && q.multiplicity == 1);
        }
        let rep = infinity_report(&P::from_terms([(2, 0, 1.0), (0, 2, 1.0), (0, 0, -4.0)])).unwrap();
        assert!(rep.iter().all(|q| q.isotropic && !q.obstruction));
        let rep = infinity_report(&P::from_terms([(0, 1, 1.0), (2, 0, -1.0)])).unwrap();
        assert_eq!(rep.len(), 1);
        assert_eq!(rep[0].multiplicity, 2);
        assert!(rep[0].ratio.unwrap().norm() < 1e-12);
        assert!(rep[0].tangency && !rep[0].obstruction);
        // x - y²: the point (1 : 0 : 0) appears as a degree drop
        let rep = infinity_report(&P::from_terms([(1, 0, 1.0), (0, 2, -1.0)])).unwrap();
        assert_eq!(rep.len(), 1);
        assert!(rep[0].ratio.is_none() && rep[0].multiplicity == 2 && rep[0].tangency);
    }

    #[test]
    fn isotropic_powers() {
        for m in 1..=4 {
            let lower = P::from_terms([(1, 0, 0.3), (0, 1, -1.2), (0, 0, 2.0)]);
            let rep = infinity_report(&isotropic_power(m, &lower)).unwrap();
            assert!(rep.iter().all(|q| q.isotropic), "m={m} {rep:?}");
            assert_eq!(rep.iter().map(|q| q.multiplicity).sum::<usize>(), 2 * m as usize);
        }
    }

    #[test]
    fn verdicts() {
        let budget = SearchBudget { n_starts: 200, ..Default::default() };
        let rep = ellipse_offset_report(2.0, 1.0, 5.0, budget).unwrap();
        assert_eq!(rep.verdict, Verdict::ObstructedAffineSingularity);
        assert!(rep.affine_singular_points.len() >= 4);
        let circle = P::from_terms([(2, 0, 1.0), (0, 2, 1.0), (0, 0, -4.0)]);
        assert_eq!(obstruction_report(&circle, budget, &[]).unwrap().verdict, Verdict::NoObstruction);
        let rep = obstruction_report(&ellipse_boundary(2.0, 1.0), budget, &[]).unwrap();
        assert_eq!(rep.verdict, Verdict::ObstructedTransversalInfinity);
        let json: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
        assert_eq!(json["verdict"], "obstructed_transversal_infinity");
        assert_eq!(json["infinity"].as_array().unwrap().len(), 2);
        assert!(json["affine_singular"].as_array().unwrap().is_empty());
    }

    #[test]
    fn offsets_never_unobstructed() {
        let budget = SearchBudget { n_starts: 20, ..Default::default() };
        for (a, b, r) in [(2.0, 1.0, 4.5), (3.0, 2.0, 5.0), (1.5, 1.0, 3.0)] {
            assert_ne!(ellipse_offset_report(a, b, r, budget).unwrap().verdict, Verdict::NoObstruction);
        }
    }

    #[test]
    fn scans() {
        let s = r_scan(2.0, 1.0, &[4.1, 4.5, 5.0, 6.0, 8.0]);
        assert!(s.iter().all(|e| e.certified), "{s:?}");
        assert!(r_scan(3.0, 2.0, &[4.6, 5.0, 7.0]).iter().all(|e| e.certified));
        assert!(r_scan::<f64>(2.0, 1.0, &[]).is_empty());
        assert!(!r_scan(2.0, 1.0, &[3.0])[0].certified);
    }
}
