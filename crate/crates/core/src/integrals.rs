//! Polynomial integrals of the magnetic billiard.
//!
//! An integral `Φ(x, v)` polynomial in the velocity corresponds to a polynomial
//! `F` in the Larmor center, `Φ = F ∘ L`. This module converts between the
//! two, measures invariance under `M`, and evaluates the identities that
//! `F` must satisfy along the parallel curves.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

use crate::dynamics::{DynamicsError, MagneticBilliard};
use crate::geom::{parallel_point, Boundary, MagneticParams, PlanarVector, Side};
use crate::poly::{trig_coefficients, BivarPoly, PolyError};
use crate::rng::seeded;
use crate::scalar::Real;

/// `|∇F|` below this is treated as a critical point.
pub const GRADIENT_GUARD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegralError {
    #[error("gradient vanishes at ({x}, {y})")]
    VanishingGradient { x: f64, y: f64 },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("need at least one sample")]
    NoSamples,
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// `Σ a_kl(x) v1^k v2^l`.
#[derive(Clone, PartialEq, Default)]
pub struct VelocityPoly<T> {
    terms: BTreeMap<(usize, usize), BivarPoly<T>>,
}

impl<T: Real> VelocityPoly<T> {
    pub fn new() -> Self {
        Self { terms: BTreeMap::new() }
    }

    /// Adds `coef · v1^k v2^l`.
    pub fn add_term(&mut self, k: usize, l: usize, coef: &BivarPoly<T>) {
        let entry = self.terms.entry((k, l)).or_insert_with(BivarPoly::zero);
        *entry = &*entry + coef;
        if entry.is_zero() {
            self.terms.remove(&(k, l));
        }
    }

    pub fn coefficient(&self, k: usize, l: usize) -> BivarPoly<T> {
        self.terms.get(&(k, l)).cloned().unwrap_or_else(BivarPoly::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(usize, usize), &BivarPoly<T>)> {
        self.terms.iter()
    }

    /// Largest `k + l` present (the `N` of the integral).
    pub fn velocity_degree(&self) -> usize {
        self.terms.keys().map(|&(k, l)| k + l).max().unwrap_or(0)
    }

    pub fn eval(&self, x: PlanarVector<T>, v: PlanarVector<T>) -> T {
        self.terms.iter().fold(T::zero(), |acc, (&(k, l), a)| {
            acc + a.eval_point(x) * v.x.powi(k as i32) * v.y.powi(l as i32)
        })
    }

    /// Harmonics of `θ -> Φ(x, (cos θ, sin θ))`. Two velocity polynomials
    /// agree on the unit tangent bundle iff these agree at every `x`.
    pub fn angular_spectrum(&self, x: PlanarVector<T>) -> crate::poly::TrigPoly<T> {
        let n = self.velocity_degree();
        let m = 4 * n + 4;
        let samples: Vec<T> = (0..m)
            .map(|i| self.eval(x, PlanarVector::from_angle(T::TAU() * T::count(i) / T::count(m))))
            .collect();
        trig_coefficients(&samples, n)
    }

    /// Text form: one `k l i j coefficient` line per term.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (&(k, l), a) in &self.terms {
            for (i, j, c) in a.terms() {
                s.push_str(&format!("{k} {l} {i} {j} {:.16e}\n", c.as_f64()));
            }
        }
        s
    }

    pub fn parse_text(text: &str) -> Result<Self, IntegralError> {
        let mut out = Self::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: &str| IntegralError::Parse { line: ln + 1, reason: reason.to_string() };
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 5 {
                return Err(err("expected `k l i j coefficient`"));
            }
            let mut idx = [0usize; 4];
            for (slot, field) in idx.iter_mut().zip(&f[..4]) {
                *slot = field.parse().map_err(|_| err("bad exponent"))?;
            }
            let c: f64 = f[4].parse().map_err(|_| err("bad coefficient"))?;
            if !c.is_finite() {
                return Err(err("coefficient is not finite"));
            }
            if idx[2] + idx[3] > crate::poly::MAX_DEGREE {
                return Err(PolyError::DegreeTooLarge(idx[2] + idx[3]).into());
            }
            out.add_term(idx[0], idx[1], &BivarPoly::monomial(idx[2], idx[3], T::lit(c)));
        }
        Ok(out)
    }
}

impl<T: Real> fmt::Debug for VelocityPoly<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.terms.iter()).finish()
    }
}

/// `h(x, v) = |x|² + (2/β)(v1 x2 - v2 x1)`, conserved in a circular domain centered at 0.
pub fn circle_integral<T: Real>(beta: T) -> VelocityPoly<T> {
    let k = T::two() / beta;
    let mut h = VelocityPoly::new();
    h.add_term(0, 0, &BivarPoly::from_terms([(2, 0, T::one()), (0, 2, T::one())]));
    h.add_term(1, 0, &BivarPoly::monomial(0, 1, k));
    h.add_term(0, 1, &BivarPoly::monomial(1, 0, -k));
    h
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `Φ(x, v) = F(x1 - r v2, x2 + r v1)`, expanded in `v`.
pub fn phi_from_f<T: Real>(f: &BivarPoly<T>, r: T) -> VelocityPoly<T> {
    let mut phi = VelocityPoly::new();
    for (i, j, c) in f.terms() {
        for a in 0..=i {
            for b in 0..=j {
                // x^(i-a) (-r v2)^a  ·  y^(j-b) (r v1)^b
                let coef = c
                    * T::lit(binomial(i, a) * binomial(j, b))
                    * (-r).powi(a as i32)
                    * r.powi(b as i32);
                phi.add_term(b, a, &BivarPoly::monomial(i - a, j - b, coef));
            }
        }
    }
    phi
}

/// Least-squares reconstruction of `F` from `Φ`.
#[derive(Clone)]
pub struct CenterFit<T> {
    pub f: BivarPoly<T>,
    /// `max |F(x + rJv) - Φ(x, v)|` over the samples.
    pub residual: T,
    /// `max |Φ|` over the samples, at least 1.
    pub scale: T,
    pub rank: usize,
    pub unknowns: usize,
    /// A polynomial vanishing on all sampled centers when the fit is rank deficient.
    pub null_direction: Option<BivarPoly<T>>,
}

impl<T: Real> fmt::Debug for CenterFit<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CenterFit")
            .field("f", &self.f)
            .field("residual", &self.residual)
            .field("scale", &self.scale)
            .field("rank", &self.rank)
            .field("unknowns", &self.unknowns)
            .field("null_direction", &self.null_direction)
            .finish()
    }
}

impl<T: Real> CenterFit<T> {
    pub fn relative_residual(&self) -> T {
        self.residual / self.scale
    }
}

/// Fits `F` of degree `≤ 2N` with `F(x + rJv) = Φ(x, v)`, positions uniform in
/// the box `[lo, hi]` and velocity angles uniform.
///
/// The monomials are taken in coordinates normalized to the bounding box of
/// the sampled centers and solved by SVD; singular values below `1e-10` of the
/// largest count as rank loss.
pub fn f_from_phi<T: Real>(
    phi: &VelocityPoly<T>,
    r: T,
    lo: PlanarVector<T>,
    hi: PlanarVector<T>,
    n_samples: Option<usize>,
    seed: u64,
) -> CenterFit<T> {
    let deg = 2 * phi.velocity_degree();
    let exps: Vec<(usize, usize)> =
        (0..=deg).flat_map(|d| (0..=d).map(move |i| (i, d - i))).collect();
    let dim = exps.len();
    let n = n_samples.unwrap_or(0).max(10 * dim);
    let mut rng = seeded(seed);
    let mut centers = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let x = PlanarVector::new(
            lo.x + (hi.x - lo.x) * T::lit(rng.gen::<f64>()),
            lo.y + (hi.y - lo.y) * T::lit(rng.gen::<f64>()),
        );
        let v = PlanarVector::from_angle(T::lit(rng.gen::<f64>() * std::f64::consts::TAU));
        centers.push(x + v.rotate90() * r);
        values.push(phi.eval(x, v));
    }
    let (mut cmin, mut cmax) = (centers[0], centers[0]);
    for c in &centers {
        cmin = PlanarVector::new(cmin.x.min(c.x), cmin.y.min(c.y));
        cmax = PlanarVector::new(cmax.x.max(c.x), cmax.y.max(c.y));
    }
    let mid = (cmin + cmax) * T::lit(0.5);
    let half = ((cmax.x - cmin.x).max(cmax.y - cmin.y) * T::lit(0.5)).max(T::lit(1e-12));
    let a = DMatrix::from_fn(n, dim, |row, col| {
        let u = (centers[row] - mid) / half;
        let (i, j) = exps[col];
        (u.x.powi(i as i32) * u.y.powi(j as i32)).as_f64()
    });
    let b = DVector::from_iterator(n, values.iter().map(|v| v.as_f64()));
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = 1e-10 * smax;
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    let g = svd.solve(&b, tol).expect("U and V were computed");
    let null_direction = if rank < dim {
        let v_t = svd.v_t.as_ref().expect("V was computed");
        let (k, _) = svd.singular_values.argmin();
        Some(scaled_to_plain(&exps, |c| v_t[(k, c)], mid, half))
    } else {
        None
    };
    let f = scaled_to_plain(&exps, |c| g[c], mid, half);
    let scale = values.iter().fold(T::one(), |m, v| m.max(v.abs()));
    let residual = centers
        .iter()
        .zip(&values)
        .fold(T::zero(), |m, (c, v)| m.max((f.eval_point(*c) - *v).abs()));
    CenterFit { f, residual, scale, rank, unknowns: dim, null_direction }
}

/// `G((c - mid)/half)` expanded into plain monomials in `c`.
fn scaled_to_plain<T: Real>(
    exps: &[(usize, usize)],
    coef: impl Fn(usize) -> f64,
    mid: PlanarVector<T>,
    half: T,
) -> BivarPoly<T> {
    let g = BivarPoly::from_terms(exps.iter().enumerate().map(|(c, &(i, j))| (i, j, T::lit(coef(c)))));
    let inv = T::one() / half;
    let ux = BivarPoly::from_terms([(1, 0, inv), (0, 0, -mid.x * inv)]);
    let uy = BivarPoly::from_terms([(0, 1, inv), (0, 0, -mid.y * inv)]);
    g.compose(&ux, &uy)
}

/// Sample statistics of a residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualStats<T> {
    pub samples: usize,
    pub mean: T,
    pub max_abs: T,
}

/// Mean and largest deviation from the mean of values sampled along a curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constancy<T> {
    pub mean: T,
    pub max_deviation: T,
}

fn constancy<T: Real>(values: &[T]) -> Constancy<T> {
    let mean = values.iter().fold(T::zero(), |a, v| a + *v) / T::count(values.len().max(1));
    let max_deviation = values.iter().fold(T::zero(), |m, v| m.max((*v - mean).abs()));
    Constancy { mean, max_deviation }
}

/// `|F(M(P)) - F(P)|` over random `P` in `Ω_r`, at least `1e-3` from `γ±r`.
///
/// Points where `M` fails (grazing) are redrawn; after ten failures in a row the error is returned.
pub fn invariance_residual<T: Real, B: Boundary<T>>(
    f: &BivarPoly<T>,
    billiard: &MagneticBilliard<T, B>,
    n_samples: usize,
    seed: u64,
) -> Result<ResidualStats<T>, IntegralError> {
    let mut rng = seeded(seed);
    let margin = T::lit(1e-3);
    let mut sum = T::zero();
    let mut worst = T::zero();
    for _ in 0..n_samples {
        let mut failures = 0;
        let res = loop {
            let p = billiard.sample_center(&mut rng, margin);
            match billiard.center_map(p) {
                Ok(m) => break (f.eval_point(m) - f.eval_point(p)).abs(),
                Err(e) if failures >= 10 => return Err(e.into()),
                Err(_) => failures += 1,
            }
        };
        sum = sum + res;
        worst = worst.max(res);
    }
    let mean = if n_samples == 0 { T::zero() } else { sum / T::count(n_samples) };
    Ok(ResidualStats { samples: n_samples, mean, max_abs: worst })
}

/// Residual of a velocity polynomial along the billiard, with the scale it is measured against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiResidual<T> {
    pub stats: ResidualStats<T>,
    /// Largest `|Φ|` seen, floored at 1.
    pub scale: T,
}

/// Checks `Φ` directly on states: for random centers `P`, compares `Φ` after
/// one reflection with `Φ` just before the next impact (flow) and just after it
/// (reflection). Each sample contributes the larger of the two differences.
pub fn phi_billiard_residual<T: Real, B: Boundary<T>>(
    phi: &VelocityPoly<T>,
    billiard: &MagneticBilliard<T, B>,
    n_samples: usize,
    seed: u64,
) -> Result<PhiResidual<T>, IntegralError> {
    let mut rng = seeded(seed);
    let margin = T::lit(1e-3);
    let mut sum = T::zero();
    let mut worst = T::zero();
    let mut scale = T::one();
    for _ in 0..n_samples {
        let mut failures = 0;
        let res = loop {
            let p = billiard.sample_center(&mut rng, margin);
            let pair = billiard
                .center_impact(p)
                .and_then(|first| billiard.center_impact(first.center_after).map(|second| (first, second)));
            match pair {
                Ok((first, second)) => {
                    let after = phi.eval(first.q, first.v_out);
                    let before_next = phi.eval(second.q, second.v_in);
                    let after_next = phi.eval(second.q, second.v_out);
                    scale = scale.max(after.abs()).max(before_next.abs()).max(after_next.abs());
                    break (before_next - after).abs().max((after_next - before_next).abs());
                }
                Err(e) if failures >= 10 => return Err(e.into()),
                Err(_) => failures += 1,
            }
        };
        sum = sum + res;
        worst = worst.max(res);
    }
    let mean = if n_samples == 0 { T::zero() } else { sum / T::count(n_samples) };
    Ok(PhiResidual { stats: ResidualStats { samples: n_samples, mean, max_abs: worst }, scale })
}

/// Equispaced samples of `γ±r`.
pub fn parallel_samples<T: Real, B: Boundary<T> + ?Sized>(
    boundary: &B,
    side: Side,
    r: T,
    n: usize,
) -> Vec<PlanarVector<T>> {
    let period = boundary.period();
    (0..n)
        .map(|i| parallel_point(boundary, period * T::count(i) / T::count(n), side, r))
        .collect()
}

/// `F` along `γ±r`: mean and largest deviation.
pub fn boundary_constancy<T: Real, B: Boundary<T> + ?Sized>(
    f: &BivarPoly<T>,
    boundary: &B,
    params: MagneticParams<T>,
    side: Side,
    n_samples: usize,
) -> Constancy<T> {
    let values: Vec<T> = parallel_samples(boundary, side, params.r, n_samples)
        .into_iter()
        .map(|p| f.eval_point(p))
        .collect();
    constancy(&values)
}

/// `F² - (c1 + c2) F + c1 c2`, which vanishes wherever `F = c1` or `F = c2`.
pub fn normalize_integral<T: Real>(f: &BivarPoly<T>, c1: T, c2: T) -> BivarPoly<T> {
    let sq = f * f;
    &(&sq - &f.scale(c1 + c2)) + &BivarPoly::constant(c1 * c2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrazingCase {
    /// Centers near `γ+r`.
    A,
    /// Centers near `γ-r`.
    B,
}

impl std::str::FromStr for GrazingCase {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "a" | "A" => Ok(GrazingCase::A),
            "b" | "B" => Ok(GrazingCase::B),
            other => Err(format!("unknown grazing case `{other}` (expected a or b)")),
        }
    }
}

impl GrazingCase {
    /// Parallel curve containing the base point `P0`.
    pub fn side(self) -> Side {
        match self {
            GrazingCase::A => Side::Plus,
            GrazingCase::B => Side::Minus,
        }
    }
}

/// Centers `(P-, P+)` of the Larmor circles through `Q = γ(t)` whose velocities
/// at `Q` make angle `ε` with the tangent.
pub fn grazing_centers<T: Real, B: Boundary<T> + ?Sized>(
    boundary: &B,
    r: T,
    t: T,
    eps: T,
    case: GrazingCase,
) -> (PlanarVector<T>, PlanarVector<T>) {
    let q = boundary.eval(t);
    let tau = boundary.tangent(t);
    let arm = |angle: T| tau.rotate(angle).rotate90() * r;
    match case {
        GrazingCase::A => (q + arm(-eps), q + arm(eps)),
        GrazingCase::B => (q - arm(eps), q - arm(-eps)),
    }
}

/// First, second and third partial derivatives of `F`, evaluated at a point.
#[derive(Debug, Clone, Copy)]
struct Jet<T> {
    fx: T,
    fy: T,
    fxx: T,
    fxy: T,
    fyy: T,
    fxxx: T,
    fxxy: T,
    fxyy: T,
    fyyy: T,
}

impl<T: Real> Jet<T> {
    fn at(f: &BivarPoly<T>, p: PlanarVector<T>) -> Self {
        let fx = f.dx();
        let fy = f.dy();
        let fxx = fx.dx();
        let fxy = fx.dy();
        let fyy = fy.dy();
        Self {
            fx: fx.eval_point(p),
            fy: fy.eval_point(p),
            fxx: fxx.eval_point(p),
            fxy: fxy.eval_point(p),
            fyy: fyy.eval_point(p),
            fxxx: fxx.dx().eval_point(p),
            fxxy: fxx.dy().eval_point(p),
            fxyy: fxy.dy().eval_point(p),
            fyyy: fyy.dy().eval_point(p),
        }
    }

    fn grad_norm(&self) -> T {
        (self.fx * self.fx + self.fy * self.fy).sqrt()
    }

    fn h(&self) -> T {
        self.fxx * self.fy * self.fy - T::two() * self.fxy * self.fx * self.fy + self.fyy * self.fx * self.fx
    }

    /// Third-derivative part and bracket of the β part of the ε³ expression.
    fn rem2_parts(&self) -> (T, T) {
        let (fx, fy) = (self.fx, self.fy);
        let three = T::lit(3.0);
        let cubic = self.fxxx * fy * fy * fy - three * self.fxxy * fy * fy * fx
            + three * self.fxyy * fy * fx * fx
            - self.fyyy * fx * fx * fx;
        let bracket = self.fxx * fx * fy + self.fxy * (fy * fy - fx * fx) - self.fyy * fx * fy;
        (cubic, bracket)
    }
}

fn guarded_jet<T: Real>(f: &BivarPoly<T>, p: PlanarVector<T>) -> Result<Jet<T>, IntegralError> {
    let jet = Jet::at(f, p);
    if jet.grad_norm() < T::lit(GRADIENT_GUARD) {
        return Err(IntegralError::VanishingGradient { x: p.x.as_f64(), y: p.y.as_f64() });
    }
    Ok(jet)
}

/// `H(F) + β|∇F|³` at `p`.
pub fn remarkable_value<T: Real>(f: &BivarPoly<T>, p: PlanarVector<T>, beta: T) -> T {
    let jet = Jet::at(f, p);
    let g = jet.grad_norm();
    jet.h() + beta * g * g * g
}

/// The ε³ expression
/// `F_xxx F_y³ - 3F_xxy F_y² F_x + 3F_xyy F_y F_x² - F_yyy F_x³
///  + 3β|∇F|(F_xx F_x F_y + F_xy(F_y² - F_x²) - F_yy F_x F_y)` at `p`.
pub fn rem2_expression<T: Real>(f: &BivarPoly<T>, p: PlanarVector<T>, beta: T) -> T {
    let jet = Jet::at(f, p);
    let (cubic, bracket) = jet.rem2_parts();
    cubic + T::lit(3.0) * beta * jet.grad_norm() * bracket
}

/// Derivative of `H(F) + β|∇F|³` along `(F_y, -F_x)`, from exact polynomial
/// derivatives of `H(F)` and the chain rule for `|∇F|³`.
pub fn remarkable_derivative<T: Real>(f: &BivarPoly<T>, p: PlanarVector<T>, beta: T) -> T {
    let h = f.h_operator();
    let jet = Jet::at(f, p);
    let w = PlanarVector::new(jet.fy, -jet.fx);
    let dh = PlanarVector::new(h.dx().eval_point(p), h.dy().eval_point(p)).dot(w);
    // ∇|∇F|³ = 3|∇F| Hess(F) ∇F
    let hg = PlanarVector::new(jet.fxx * jet.fx + jet.fxy * jet.fy, jet.fxy * jet.fx + jet.fyy * jet.fy);
    dh + T::lit(3.0) * beta * jet.grad_norm() * hg.dot(w)
}

/// `H(F) + β|∇F|³` along sampled curve points.
pub fn rem3_residual<T: Real>(
    f: &BivarPoly<T>,
    samples: &[PlanarVector<T>],
    beta: T,
) -> Result<Constancy<T>, IntegralError> {
    if samples.is_empty() {
        return Err(IntegralError::NoSamples);
    }
    let values = samples
        .iter()
        .map(|p| {
            let jet = guarded_jet(f, *p)?;
            let g = jet.grad_norm();
            Ok(jet.h() + beta * g * g * g)
        })
        .collect::<Result<Vec<T>, IntegralError>>()?;
    Ok(constancy(&values))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rem5<T> {
    pub mean: T,
    pub max_deviation: T,
    /// The constant is distinguishable from zero at its own scale.
    pub nonzero: bool,
}

/// `g³ (H(f) + β|∇f|³)^k` along sampled curve points.
///
/// `nonzero` holds when `|mean|` exceeds `1e-9` of the largest
/// `|g|³ (|H(f)| + β|∇f|³)^k`, i.e. the constant is not a cancellation artefact.
pub fn rem5_residual<T: Real>(
    f: &BivarPoly<T>,
    g: &BivarPoly<T>,
    k: u32,
    beta: T,
    samples: &[PlanarVector<T>],
) -> Result<Rem5<T>, IntegralError> {
    if samples.is_empty() {
        return Err(IntegralError::NoSamples);
    }
    let mut values = Vec::with_capacity(samples.len());
    let mut scale = T::zero();
    for p in samples {
        let jet = guarded_jet(f, *p)?;
        let gn = jet.grad_norm();
        let cube = gn * gn * gn;
        let gv = g.eval_point(*p);
        let g3 = gv * gv * gv;
        values.push(g3 * (jet.h() + beta * cube).powi(k as i32));
        scale = scale.max(g3.abs() * (jet.h().abs() + beta * cube).powi(k as i32));
    }
    let c = constancy(&values);
    let nonzero = c.mean.abs() > T::lit(1e-9) * scale;
    Ok(Rem5 { mean: c.mean, max_deviation: c.max_deviation, nonzero })
}

/// Result of the ε-expansion check at one base point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rem1Check<T> {
    /// Richardson-extrapolated coefficient of `ε³` in `D(ε)`.
    pub coefficient: T,
    /// `r³ / (3|∇F|³)` times the ε³ expression.
    pub predicted: T,
    /// `coefficient / predicted`; `None` when the expression vanishes.
    pub ratio: Option<T>,
}

/// Default step ladder for [`rem1_eps_check_at`].
pub const EPS_LADDER: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// `D(ε) = F(P0 + r(I - R_ε)n) - F(P0 + r(I - R_{-ε})n)` with `n = ∇F/|∇F|` at `P0`.
pub fn grazing_difference<T: Real>(f: &BivarPoly<T>, p0: PlanarVector<T>, r: T, eps: T) -> Result<T, IntegralError> {
    let jet = guarded_jet(f, p0)?;
    let n = PlanarVector::new(jet.fx, jet.fy) / jet.grad_norm();
    let shift = |e: T| (n - n.rotate(e)) * r;
    Ok(f.eval_point(p0 + shift(eps)) - f.eval_point(p0 + shift(-eps)))
}

/// Extracts the `ε³` coefficient of `D(ε)` and compares it with the prediction.
///
/// `D` is odd in `ε` with no linear term, so `D(ε)/ε³` is a polynomial in `ε²`
/// up to `O(ε^{2m})`; Neville extrapolation of it to `ε² = 0` over the ladder
/// removes the `ε²`, `ε⁴`, ... corrections.
pub fn rem1_eps_check_at<T: Real>(
    f: &BivarPoly<T>,
    p0: PlanarVector<T>,
    beta: T,
    ladder: &[T],
) -> Result<Rem1Check<T>, IntegralError> {
    let jet = guarded_jet(f, p0)?;
    let r = T::one() / beta;
    let hs: Vec<T> = ladder.iter().map(|e| *e * *e).collect();
    let mut table = ladder
        .iter()
        .map(|e| Ok(grazing_difference(f, p0, r, *e)? / (*e * *e * *e)))
        .collect::<Result<Vec<T>, IntegralError>>()?;
    for level in 1..table.len() {
        for i in (level..table.len()).rev() {
            let (h_far, h_near) = (hs[i - level], hs[i]);
            table[i] = (h_far * table[i] - h_near * table[i - 1]) / (h_far - h_near);
        }
    }
    let coefficient = *table.last().ok_or(IntegralError::NoSamples)?;
    let (cubic, bracket) = jet.rem2_parts();
    let g = jet.grad_norm();
    let three = T::lit(3.0);
    let rem2 = cubic + three * beta * g * bracket;
    let predicted = r * r * r / (three * g * g * g) * rem2;
    // both sides vanish identically for conics and linear F
    let magnitude = cubic.abs() + (three * beta * g * bracket).abs()
        + (jet.fxxx.abs() + jet.fxxy.abs() + jet.fxyy.abs() + jet.fyyy.abs()) * g * g * g;
    let ratio = if rem2.abs() > T::lit(1e-8) * magnitude && magnitude > T::zero() {
        Some(coefficient / predicted)
    } else {
        None
    };
    Ok(Rem1Check { coefficient, predicted, ratio })
}

/// [`rem1_eps_check_at`] with `P0` the grazing base point `γ±r(t)`.
pub fn rem1_eps_check<T: Real, B: Boundary<T> + ?Sized>(
    f: &BivarPoly<T>,
    boundary: &B,
    params: MagneticParams<T>,
    t: T,
    case: GrazingCase,
    ladder: &[T],
) -> Result<Rem1Check<T>, IntegralError> {
    let p0 = parallel_point(boundary, t, case.side(), params.r);
    rem1_eps_check_at(f, p0, params.beta, ladder)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Circle, Ellipse};
    use proptest::prelude::*;

    type P = BivarPoly<f64>;
    type V = PlanarVector<f64>;

    fn circle_f(r: f64) -> P {
        P::from_terms([(2, 0, 1.0), (0, 2, 1.0), (0, 0, -r * r)])
    }

    #[test]
    fn phi_residual_separates_integrals() {
        let bil = MagneticBilliard::new(Circle::centered(2.0), MagneticParams::new(1.0 / 3.0).unwrap()).unwrap();
        let good = phi_billiard_residual(&circle_integral(1.0 / 3.0), &bil, 200, 3).unwrap();
        assert!(good.stats.max_abs < 1e-9 * good.scale, "{good:?}");
        let mut v1 = VelocityPoly::new();
        v1.add_term(1, 0, &P::constant(1.0));
        let bad = phi_billiard_residual(&v1, &bil, 200, 3).unwrap();
        assert!(bad.stats.max_abs > 0.1);
    }

    #[test]
    fn circle_integral_examples() {
        let h = circle_integral(1.0 / 3.0);
        let x = V::new(2.0, 0.0);
        assert!((h.eval(x, V::new(0.0, 1.0)) + 8.0).abs() < 1e-14);
        let c = crate::geom::larmor_center(x, V::new(0.0, 1.0), 3.0).unwrap();
        assert!((circle_f(3.0).eval_point(c) + 8.0).abs() < 1e-14);
        assert_eq!(h.eval(V::new(1.0, 2.0), V::zero()), 5.0);
    }

    #[test]
    fn phi_from_f_examples() {
        let r = 3.0;
        let phi = phi_from_f(&circle_f(r), r);
        let h = circle_integral(1.0 / r);
        for i in 0..20 {
            let x = V::new(0.1 * i as f64 - 1.0, 0.05 * i as f64);
            let v = V::from_angle(0.9 * i as f64);
            assert!((phi.eval(x, v) - h.eval(x, v)).abs() < 1e-12);
        }
        let phi = phi_from_f(&P::constant(4.0), r);
        assert_eq!(phi.velocity_degree(), 0);
        assert_eq!(phi.coefficient(0, 0), P::constant(4.0));
        let phi = phi_from_f(&P::x(), r);
        assert_eq!(phi.coefficient(0, 0), P::x());
        assert_eq!(phi.coefficient(0, 1), P::constant(-r));
        assert!(phi.coefficient(1, 0).is_zero());
    }

    #[test]
    fn velocity_poly_text_round_trip() {
        let h = circle_integral(0.25);
        let back = VelocityPoly::<f64>::parse_text(&h.to_text()).unwrap();
        assert_eq!(back, h);
        let p = VelocityPoly::<f64>::parse_text("# v1\n1 0 0 0 1\n1 0 0 0 2\n").unwrap();
        assert_eq!(p.coefficient(1, 0), P::constant(3.0));
        assert!(VelocityPoly::<f64>::parse_text("1 0 0 1").is_err());
    }

    #[test]
    fn fit_recovers_circle_integral() {
        let lo = V::new(-2.0, -2.0);
        let hi = V::new(2.0, 2.0);
        let fit = f_from_phi(&circle_integral(1.0 / 3.0), 3.0, lo, hi, None, 1);
        assert!(fit.relative_residual() < 1e-9, "{fit:?}");
        assert!(fit.null_direction.is_none());
        let target = circle_f(3.0);
        for (i, j, c) in (&fit.f - &target).terms() {
            assert!(c.abs() < 1e-8, "{i} {j} {c}");
        }
        let mut v1 = VelocityPoly::new();
        v1.add_term(1, 0, &P::constant(1.0));
        assert!(f_from_phi(&v1, 3.0, lo, hi, None, 2).residual > 0.1);
        let mut one = VelocityPoly::new();
        one.add_term(0, 0, &P::constant(1.0));
        let fit = f_from_phi(&one, 3.0, lo, hi, None, 3);
        assert!(fit.residual < 1e-14);
        assert!((fit.f.eval(0.3, 0.2) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn angular_spectrum_ignores_unit_relation() {
        // v1² + v2² and 1 agree on unit velocities
        let mut a = VelocityPoly::new();
        a.add_term(2, 0, &P::constant(1.0));
        a.add_term(0, 2, &P::constant(1.0));
        let mut b = VelocityPoly::new();
        b.add_term(0, 0, &P::constant(1.0));
        let x = V::new(0.3, -0.2);
        let (sa, sb) = (a.angular_spectrum(x), b.angular_spectrum(x));
        assert!((sa.a[0] - sb.a[0]).abs() < 1e-14);
        assert!(sa.max_amplitude_above(0) < 1e-14);
    }

    #[test]
    fn invariance_examples() {
        let bil = MagneticBilliard::new(Circle::centered(2.0), MagneticParams::from_radius(3.0).unwrap()).unwrap();
        let res = invariance_residual(&circle_f(0.0), &bil, 200, 4).unwrap();
        assert!(res.max_abs < 1e-9, "{res:?}");
        let res = invariance_residual(&P::constant(2.0), &bil, 20, 4).unwrap();
        assert_eq!(res.max_abs, 0.0);
    }

    #[test]
    fn boundary_constancy_examples() {
        let c = Circle::centered(2.0);
        let params = MagneticParams::from_radius(3.0).unwrap();
        let k = boundary_constancy(&circle_f(0.0), &c, params, Side::Plus, 512);
        assert!((k.mean - 1.0).abs() < 1e-12 && k.max_deviation < 1e-12);
        let k = boundary_constancy(&P::x(), &c, params, Side::Minus, 512);
        assert!((k.max_deviation - 5.0).abs() < 1e-9);
    }

    #[test]
    fn normalization_examples() {
        let f = circle_f(0.0);
        let g = normalize_integral(&f, 25.0, 1.0);
        assert_eq!(g.eval(5.0, 0.0), 0.0);
        assert_eq!(g.eval(0.0, 1.0), 0.0);
        assert_eq!(normalize_integral(&f, 0.0, 0.0), &f * &f);
        let c = normalize_integral(&P::constant(3.0), 3.0, 3.0);
        assert!(c.is_zero());
    }

    #[test]
    fn grazing_examples() {
        let c = Circle::centered(2.0f64);
        let eps = 0.01;
        let (pm, pp) = grazing_centers(&c, 3.0, 0.0, eps, GrazingCase::A);
        assert!(pp.distance(V::new(2.0 - 3.0 * eps.cos(), -3.0 * eps.sin())) < 1e-15);
        assert!(pm.distance(V::new(2.0 - 3.0 * eps.cos(), 3.0 * eps.sin())) < 1e-15);
        let (pm, pp) = grazing_centers(&c, 3.0, 0.0, 0.0, GrazingCase::B);
        assert_eq!(pm, pp);
        assert!(pm.distance(V::new(5.0, 0.0)) < 1e-15);
        let e = Ellipse::new(2.0f64, 1.0);
        for case in [GrazingCase::A, GrazingCase::B] {
            for t in [0.0, 0.7, 2.9] {
                let (pm, pp) = grazing_centers(&e, 5.0, t, eps, case);
                let q = e.eval(t);
                let p0 = parallel_point(&e, t, case.side(), 5.0);
                let mid = ((pm - q) + (pp - q)).normalize() * 5.0 + q;
                assert!(mid.distance(p0) < 1e-10);
            }
        }
    }

    #[test]
    fn remarkable_on_circles() {
        let f = circle_f(3.0);
        let beta = 1.0 / 3.0;
        let c = Circle::centered(2.0);
        let inner = parallel_samples(&c, Side::Plus, 3.0, 256);
        let outer = parallel_samples(&c, Side::Minus, 3.0, 256);
        let k = rem3_residual(&f, &inner, beta).unwrap();
        assert!((k.mean - (8.0 + 8.0 / 3.0)).abs() < 1e-10 && k.max_deviation < 1e-10);
        let k = rem3_residual(&f, &outer, beta).unwrap();
        assert!((k.mean - (200.0 + 1000.0 / 3.0)).abs() < 1e-9 && k.max_deviation < 1e-9);
        let lin = P::from_terms([(1, 0, 3.0), (0, 1, 4.0)]);
        let k = rem3_residual(&lin, &inner, beta).unwrap();
        assert!((k.mean - 125.0 / 3.0).abs() < 1e-12);
        let r5 = rem5_residual(&f, &P::constant(1.0), 1, beta, &inner).unwrap();
        assert!(r5.nonzero && (r5.mean - 32.0 / 3.0).abs() < 1e-10);
        let r5 = rem5_residual(&f, &P::constant(1.0), 2, beta, &inner).unwrap();
        assert!((r5.mean - (32.0f64 / 3.0).powi(2)).abs() < 1e-9 && r5.max_deviation < 1e-9);
        assert!(matches!(
            rem3_residual(&f, &[V::zero()], beta),
            Err(IntegralError::VanishingGradient { .. })
        ));
    }

    #[test]
    fn rem1_examples() {
        let params = MagneticParams::from_radius(3.0).unwrap();
        let c = Circle::centered(2.0);
        let ladder = EPS_LADDER;
        let chk = rem1_eps_check(&circle_f(3.0), &c, params, 0.4, GrazingCase::A, &ladder).unwrap();
        assert!(chk.ratio.is_none());
        let lin = P::from_terms([(1, 0, 1.0), (0, 1, -2.0)]);
        let chk = rem1_eps_check(&lin, &c, params, 1.1, GrazingCase::A, &ladder).unwrap();
        // D vanishes exactly; what remains is rounding divided by ε³
        assert!(chk.ratio.is_none() && chk.coefficient.abs() < 1e-6);
        let cubic = P::from_terms([(3, 0, 1.0), (0, 3, 1.0)]);
        for t in [0.3, 1.7, 4.0] {
            let chk = rem1_eps_check(&cubic, &c, params, t, GrazingCase::A, &ladder).unwrap();
            let ratio = chk.ratio.unwrap();
            assert!((ratio - 1.0).abs() < 1e-5, "t={t} {chk:?}");
        }
    }

    fn arb_poly(max_deg: usize) -> impl Strategy<Value = P> {
        prop::collection::vec(((0..=max_deg), (0..=max_deg), -1.0f64..1.0), 2..10).prop_map(move |t| {
            P::from_terms(t.into_iter().filter(|&(i, j, _)| i + j <= max_deg))
        })
    }

    proptest! {
        #[test]
        fn complete_derivative_identity(f in arb_poly(5), x in -1.0f64..1.0, y in -1.0f64..1.0, beta in 0.05f64..2.0) {
            let p = V::new(x, y);
            prop_assume!(f.gradient(p).norm() > 1e-3);
            let lhs = remarkable_derivative(&f, p, beta);
            let rhs = rem2_expression(&f, p, beta);
            prop_assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + lhs.abs().max(rhs.abs())));
            // finite-difference oracle for the analytic directional derivative
            let g = f.gradient(p);
            let w = V::new(g.y, -g.x);
            let h = 1e-5 / (1.0 + w.norm());
            let fd = (remarkable_value(&f, p + w * h, beta) - remarkable_value(&f, p - w * h, beta)) / (2.0 * h);
            prop_assert!((fd - lhs).abs() <= 1e-4 * (1.0 + lhs.abs()));
        }

        #[test]
        fn phi_f_round_trip(f in arb_poly(3), r in 0.5f64..3.0) {
            let phi = phi_from_f(&f, r);
            for (&(k, l), a) in phi.terms() {
                prop_assert!(a.degree() + k + l <= f.degree());
                prop_assert!(a.degree() + k + l <= 2 * phi.velocity_degree());
            }
            let fit = f_from_phi(&phi, r, V::new(-1.0, -1.0), V::new(1.0, 1.0), None, 9);
            prop_assert!(fit.relative_residual() < 1e-8, "{:?}", fit);
            let x = V::new(0.2, -0.3);
            prop_assert!((fit.f.eval_point(x) - f.eval_point(x)).abs() < 1e-7 * (1.0 + f.max_abs_coef()));
        }

        #[test]
        fn grazing_midpoint(t in 0.0f64..std::f64::consts::TAU, eps in 1e-6f64..1e-2) {
            let e = Ellipse::new(2.0f64, 1.0);
            let (pm, pp) = grazing_centers(&e, 5.0, t, eps, GrazingCase::A);
            let q = e.eval(t);
            let mid = ((pm - q) + (pp - q)).normalize() * 5.0 + q;
            prop_assert!(mid.distance(parallel_point(&e, t, Side::Plus, 5.0)) < 1e-10);
        }
    }
}
