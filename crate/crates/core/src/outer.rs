//! Outer magnetic billiard `T` on the annulus between `Γ` and its offset `Γ_{±2r}`.

use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dynamics::{DynamicsError, MagneticBilliard, SCAN_POINTS};
use crate::geom::{Boundary, GeomError, MagneticParams, ParallelCurve, PlanarVector, Side};
use crate::rng::seeded;
use crate::scalar::{wrap_two_pi, Real};
use crate::scan::SampledCurve;

/// Distance from `∂A` below which `T` is the identity.
pub const ON_BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OuterError {
    #[error("no Larmor circle through the point is tangent to the curve")]
    NoTangency,
    #[error("point lies on the boundary of the annulus, where T is the identity")]
    OnBoundary,
    #[error("unknown orientation `{0}` (expected cw or ccw)")]
    BadOrientation(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Clockwise,
    Counterclockwise,
}

impl Orientation {
    /// `+1` for counterclockwise, `-1` for clockwise.
    pub fn sign<T: Real>(self) -> T {
        match self {
            Orientation::Counterclockwise => T::one(),
            Orientation::Clockwise => -T::one(),
        }
    }
}

impl FromStr for Orientation {
    type Err = OuterError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ccw" | "counterclockwise" => Ok(Orientation::Counterclockwise),
            "cw" | "clockwise" => Ok(Orientation::Clockwise),
            other => Err(OuterError::BadOrientation(other.to_string())),
        }
    }
}

/// Center of the Larmor circle tangent to `Γ` at `Γ(s)` with matching orientation.
///
/// `τ` is the counterclockwise tangent of the parametrization; the clockwise
/// case puts the center on the outer side.
pub fn tangent_center<T: Real, B: Boundary<T> + ?Sized>(
    gamma: &B,
    s: T,
    orientation: Orientation,
    r: T,
) -> PlanarVector<T> {
    gamma.eval(s) + gamma.tangent(s).rotate90() * (orientation.sign::<T>() * r)
}

/// One application of `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterStep<T> {
    pub image: PlanarVector<T>,
    pub s: T,
    pub center: PlanarVector<T>,
    /// Counterclockwise angle about `center` from the point to `Γ(s)`.
    pub half_arc: T,
}

/// `Γ`, an orientation and a Larmor radius, with a sampled tangency-center curve.
#[derive(Debug, Clone)]
pub struct OuterConfig<T, B> {
    gamma: B,
    orientation: Orientation,
    r: T,
    centers: SampledCurve<T>,
}

impl<T: Real, B: Boundary<T>> OuterConfig<T, B> {
    /// The counterclockwise case requires `1/r < min k(Γ)`.
    pub fn new(gamma: B, orientation: Orientation, r: T) -> Result<Self, OuterError> {
        let params = MagneticParams::from_radius(r)?;
        if orientation == Orientation::Counterclockwise {
            params.admissible(&gamma)?;
        }
        let centers =
            SampledCurve::new(gamma.period(), SCAN_POINTS, |s| tangent_center(&gamma, s, orientation, r));
        Ok(Self { gamma, orientation, r, centers })
    }

    pub fn gamma(&self) -> &B {
        &self.gamma
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn r(&self) -> T {
        self.r
    }

    pub fn center(&self, s: T) -> PlanarVector<T> {
        tangent_center(&self.gamma, s, self.orientation, self.r)
    }

    /// Far boundary `Γ_{±2r}` of the annulus at parameter `s`.
    pub fn far_boundary(&self, s: T) -> PlanarVector<T> {
        let two_r = T::two() * self.r;
        self.gamma.eval(s) + self.gamma.tangent(s).rotate90() * (self.orientation.sign::<T>() * two_r)
    }

    /// `true` when `p` lies in the open annulus, at least `margin` from both sides.
    pub fn in_annulus(&self, p: PlanarVector<T>, margin: T) -> bool {
        let (lo, hi) = self.extremes(p);
        lo < -margin && hi > margin
    }

    fn extremes(&self, p: PlanarVector<T>) -> (T, T) {
        let near = T::lit(1e-2) * (T::one() + self.r);
        self.centers.distance_extremes(p, self.r, near, |s| self.center(s))
    }

    /// `T(P)` with the tangency used.
    pub fn step(&self, p: PlanarVector<T>) -> Result<OuterStep<T>, OuterError> {
        let (lo, hi) = self.extremes(p);
        let tol = T::lit(ON_BOUNDARY_TOL);
        if lo.abs() < tol || hi.abs() < tol {
            return Err(OuterError::OnBoundary);
        }
        let mut best: Option<(T, T, PlanarVector<T>)> = None;
        for s in self.centers.circle_roots(p, self.r, |s| self.center(s)) {
            let o = self.center(s);
            let arc = wrap_two_pi((self.gamma.eval(s) - o).angle() - (p - o).angle());
            if arc > T::PI() {
                continue;
            }
            if best.is_none_or(|(_, a, _)| arc < a) {
                best = Some((s, arc, o));
            }
        }
        let (s, half_arc, o) = best.ok_or(OuterError::NoTangency)?;
        let u = (self.gamma.eval(s) - o) / self.r;
        let w = p - o;
        let image = o + u * (T::two() * w.dot(u)) - w;
        Ok(OuterStep { image, s, center: o, half_arc })
    }

    /// `T(P)`.
    pub fn outer_step(&self, p: PlanarVector<T>) -> Result<PlanarVector<T>, OuterError> {
        self.step(p).map(|s| s.image)
    }

    /// Iterates `T`; stops at the first error and returns it alongside the steps taken.
    pub fn orbit(&self, p: PlanarVector<T>, n_steps: usize) -> (Vec<OuterStep<T>>, Option<OuterError>) {
        let mut out = Vec::with_capacity(n_steps);
        let mut cur = p;
        for _ in 0..n_steps {
            match self.step(cur) {
                Ok(st) => {
                    cur = st.image;
                    out.push(st);
                }
                Err(e) => return (out, Some(e)),
            }
        }
        (out, None)
    }

    /// Rejection sample of the annulus with the given margin.
    pub fn sample_point(&self, rng: &mut ChaCha8Rng, margin: T) -> PlanarVector<T> {
        use rand::Rng;
        let far = |s: T| self.far_boundary(s);
        let n = 1024;
        let period = self.gamma.period();
        let mut lo = self.gamma.eval(T::zero());
        let mut hi = lo;
        for i in 0..n {
            let s = period * T::count(i) / T::count(n);
            for q in [self.gamma.eval(s), far(s)] {
                lo = PlanarVector::new(lo.x.min(q.x), lo.y.min(q.y));
                hi = PlanarVector::new(hi.x.max(q.x), hi.y.max(q.y));
            }
        }
        loop {
            let p = PlanarVector::new(
                lo.x + (hi.x - lo.x) * T::lit(rng.gen::<f64>()),
                lo.y + (hi.y - lo.y) * T::lit(rng.gen::<f64>()),
            );
            if self.in_annulus(p, margin) {
                return p;
            }
        }
    }
}

/// Largest `|T(P) - M(P)|` over random centers, with `T` built on `γ+r`.
///
/// Samples that fail either map are redrawn; a persistent failure is returned.
pub fn equivalence_check<T: Real, B: Boundary<T> + Clone>(
    gamma: &B,
    params: MagneticParams<T>,
    n_samples: usize,
    seed: u64,
) -> Result<T, OuterError> {
    equivalence_deviations(gamma, params, n_samples, seed).map(|d| d.into_iter().fold(T::zero(), T::max))
}

/// The individual deviations behind [`equivalence_check`], in sampling order.
pub fn equivalence_deviations<T: Real, B: Boundary<T> + Clone>(
    gamma: &B,
    params: MagneticParams<T>,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<T>, OuterError> {
    if n_samples == 0 {
        return Ok(Vec::new());
    }
    let billiard = MagneticBilliard::new(gamma.clone(), params)?;
    let outer_gamma = ParallelCurve::new(gamma.clone(), Side::Plus, params.r.as_f64());
    let outer = OuterConfig::new(outer_gamma, Orientation::Counterclockwise, params.r)?;
    let mut rng = seeded(seed);
    let margin = T::lit(1e-3);
    let mut out = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let mut attempts = 0;
        loop {
            let p = billiard.sample_center(&mut rng, margin);
            match (billiard.center_map(p), outer.outer_step(p)) {
                (Ok(m), Ok(t)) => {
                    out.push(m.distance(t));
                    break;
                }
                (Err(e), _) if attempts >= 10 => return Err(e.into()),
                (_, Err(e)) if attempts >= 10 => return Err(e),
                _ => attempts += 1,
            }
        }
    }
    Ok(out)
}
