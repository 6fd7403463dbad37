//! Magnetic billiard flow and the center map `M` on the phase space `Ω_r`.
//!
//! A state `(x, v)` moves counterclockwise on its Larmor circle of radius `r`
//! until it exits the domain at `Q`, where the velocity is reflected. In
//! center coordinates the whole step is the map `M: P_- -> P_+`, which is
//! area preserving and fixes the parallel curves `γ±r` pointwise.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geom::{Boundary, GeomError, MagneticParams, ParallelCurve, PlanarVector, Side};
use crate::rng::seeded;
use crate::scan::SampledCurve;
use crate::scalar::{wrap_two_pi, Real};

/// Boundary samples used to bracket circle/boundary intersections.
pub const SCAN_POINTS: usize = 1024;
/// `|<v, n>|` below this at an exit point is treated as a tangential impact.
pub const GRAZING_TOL: f64 = 1e-9;
/// Distance from `γ±r` below which `M` is the identity.
pub const FIXED_POINT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("Larmor circle does not cross the boundary")]
    NoImpact,
    #[error("tangential impact at t = {t} (|<v, n>| = {normal_speed:e})")]
    GrazingImpact { t: f64, normal_speed: f64 },
    #[error("center lies on a parallel curve, where M is the identity")]
    FixedBoundaryPoint,
    #[error("radius {rho} outside the annulus [{inner}, {outer}]")]
    OutsideAnnulus { rho: f64, inner: f64, outer: f64 },
    #[error("orbit does not stay in an annulus around the reference point")]
    NotAnnular,
    #[error("need at least {needed} iterations, got {got}")]
    TooFewIterations { needed: usize, got: usize },
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// `v - 2<n, v> n`; independent of the sign of `n`.
#[inline]
pub fn reflect<T: Real>(v: PlanarVector<T>, n: PlanarVector<T>) -> PlanarVector<T> {
    v - n * (T::two() * n.dot(v))
}

/// Observable evaluated on each post-reflection state.
pub type StateFn<'a, T> = &'a dyn Fn(&LarmorState<T>) -> T;

/// Position and unit velocity of the particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LarmorState<T> {
    pub x: PlanarVector<T>,
    pub v: PlanarVector<T>,
}

impl<T: Real> LarmorState<T> {
    /// Checks `|v| = 1` to 1e-9 and renormalizes.
    pub fn new(x: PlanarVector<T>, v: PlanarVector<T>) -> Result<Self, GeomError> {
        let n = v.norm();
        if (n - T::one()).abs() > T::lit(1e-9) {
            return Err(GeomError::InvalidVelocity(n.as_f64()));
        }
        Ok(Self { x, v: v / n })
    }

    pub fn from_angle(x: PlanarVector<T>, theta: T) -> Self {
        Self { x, v: PlanarVector::from_angle(theta) }
    }

    pub fn center(&self, r: T) -> PlanarVector<T> {
        self.x + self.v.rotate90() * r
    }
}

/// One reflection: impact point, velocities and the centers before and after.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Impact<T> {
    pub t: T,
    pub q: PlanarVector<T>,
    pub v_in: PlanarVector<T>,
    pub v_out: PlanarVector<T>,
    pub center_before: PlanarVector<T>,
    pub center_after: PlanarVector<T>,
    /// Counterclockwise angle about `center_before` swept to reach `q`.
    pub arc_angle: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitRecord<T> {
    pub step: usize,
    pub impact: Impact<T>,
    pub integral_value: Option<T>,
}

/// Orbit records, plus the error that stopped the orbit early, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct Orbit<T> {
    pub records: Vec<OrbitRecord<T>>,
    pub terminated: Option<DynamicsError>,
}

impl<T: Real> Orbit<T> {
    pub fn centers(&self) -> Vec<PlanarVector<T>> {
        let mut out = Vec::with_capacity(self.records.len() + 1);
        if let Some(first) = self.records.first() {
            out.push(first.impact.center_before);
        }
        out.extend(self.records.iter().map(|r| r.impact.center_after));
        out
    }
}

/// Where a candidate center sits relative to the phase space `Ω_r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CenterClass {
    Interior,
    /// On `γ+r` (inner boundary), where `M` is the identity.
    OnInner,
    /// On `γ-r` (outer boundary), where `M` is the identity.
    OnOuter,
    Outside,
}

/// Magnetic billiard in a convex domain for a fixed field.
///
/// Holds a 1024-point sample of the boundary, shared by every intersection
/// search. Immutable and `Sync`, so one instance can serve many threads.
#[derive(Debug, Clone)]
pub struct MagneticBilliard<T, B> {
    boundary: B,
    params: MagneticParams<T>,
    grid: SampledCurve<T>,
}

impl<T: Real, B: Boundary<T>> MagneticBilliard<T, B> {
    /// Requires `beta < min k` (with the admissibility margin).
    pub fn new(boundary: B, params: MagneticParams<T>) -> Result<Self, GeomError> {
        params.admissible(&boundary)?;
        Ok(Self::new_unchecked(boundary, params))
    }

    pub fn new_unchecked(boundary: B, params: MagneticParams<T>) -> Self {
        let grid = SampledCurve::new(boundary.period(), SCAN_POINTS, |t| boundary.eval(t));
        Self { boundary, params, grid }
    }

    pub fn boundary(&self) -> &B {
        &self.boundary
    }

    pub fn params(&self) -> MagneticParams<T> {
        self.params
    }

    pub fn r(&self) -> T {
        self.params.r
    }

    fn circle_roots(&self, c: PlanarVector<T>) -> Vec<T> {
        self.grid.circle_roots(c, self.params.r, |t| self.boundary.eval(t))
    }

    /// `<J(Q - c)/r, n_out(Q)>`: positive where the circle leaves the domain.
    fn exit_speed(&self, c: PlanarVector<T>, t: T) -> T {
        let q = self.boundary.eval(t);
        ((q - c).rotate90() / self.params.r).dot(self.boundary.outward_normal(t))
    }

    fn reflect_at(&self, c: PlanarVector<T>, t: T, arc_angle: T) -> Result<Impact<T>, DynamicsError> {
        let r = self.params.r;
        let q = self.boundary.eval(t);
        let n = self.boundary.outward_normal(t);
        let v_in = (q - c).rotate90() / r;
        let speed = v_in.dot(n);
        if speed.abs() < T::lit(GRAZING_TOL) {
            return Err(DynamicsError::GrazingImpact { t: t.as_f64(), normal_speed: speed.as_f64() });
        }
        let v_out = reflect(v_in, n);
        Ok(Impact {
            t,
            q,
            v_in,
            v_out,
            center_before: c,
            center_after: q + v_out.rotate90() * r,
            arc_angle,
        })
    }

    /// Exit point of the Larmor arc starting at `state`.
    ///
    /// Among the intersections of the Larmor circle with the boundary, keeps
    /// those where the motion points outward and returns the first one reached
    /// counterclockwise from `state.x`.
    pub fn next_hit(&self, state: &LarmorState<T>) -> Result<Impact<T>, DynamicsError> {
        let c = state.center(self.params.r);
        let start_angle = (state.x - c).angle();
        let tiny = T::lit(1e-12);
        let mut best: Option<(T, T)> = None;
        for t in self.circle_roots(c) {
            if self.exit_speed(c, t) <= T::zero() {
                continue;
            }
            let q = self.boundary.eval(t);
            let mut arc = wrap_two_pi((q - c).angle() - start_angle);
            if arc < tiny {
                arc = arc + T::TAU();
            }
            if best.is_none_or(|(_, a)| arc < a) {
                best = Some((t, arc));
            }
        }
        let (t, arc) = best.ok_or(DynamicsError::NoImpact)?;
        self.reflect_at(c, t, arc)
    }

    /// Flies to the boundary and reflects; returns the new state and the impact.
    pub fn billiard_step(
        &self,
        state: &LarmorState<T>,
    ) -> Result<(LarmorState<T>, Impact<T>), DynamicsError> {
        let hit = self.next_hit(state)?;
        Ok((LarmorState { x: hit.q, v: hit.v_out }, hit))
    }

    /// Extremes of `|γ(t) - p| - r` over the boundary.
    fn distance_extremes(&self, p: PlanarVector<T>) -> (T, T) {
        let r = self.params.r;
        // refine only when an extreme is close to the circle
        let near = T::lit(1e-2) * (T::one() + r);
        self.grid.distance_extremes(p, r, near, |t| self.boundary.eval(t))
    }

    /// Classifies a center with respect to `Ω_r` and its fixed boundary curves.
    pub fn classify(&self, p: PlanarVector<T>) -> CenterClass {
        let (dmin, dmax) = self.distance_extremes(p);
        let tol = T::lit(FIXED_POINT_TOL);
        if dmin.abs() < tol {
            CenterClass::OnOuter
        } else if dmax.abs() < tol {
            CenterClass::OnInner
        } else if dmin < T::zero() && dmax > T::zero() {
            CenterClass::Interior
        } else {
            CenterClass::Outside
        }
    }

    /// `true` when `p` is in `Ω_r` at least `margin` away from both parallel curves.
    pub fn is_interior_with_margin(&self, p: PlanarVector<T>, margin: T) -> bool {
        let (dmin, dmax) = self.distance_extremes(p);
        dmin < -margin && dmax > margin
    }

    /// The center map `M` with the full impact record.
    pub fn center_impact(&self, p: PlanarVector<T>) -> Result<Impact<T>, DynamicsError> {
        match self.classify(p) {
            CenterClass::OnInner | CenterClass::OnOuter => {
                return Err(DynamicsError::FixedBoundaryPoint)
            }
            CenterClass::Outside => return Err(DynamicsError::NoImpact),
            CenterClass::Interior => {}
        }
        let roots = self.circle_roots(p);
        // order the crossings along the Larmor circle and take an exit that
        // directly follows an entry
        let mut crossings: Vec<(T, T, bool)> = roots
            .into_iter()
            .map(|t| {
                let angle = wrap_two_pi((self.boundary.eval(t) - p).angle());
                (angle, t, self.exit_speed(p, t) > T::zero())
            })
            .collect();
        crossings.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite angles"));
        let n = crossings.len();
        for i in 0..n {
            let (angle, t, is_exit) = crossings[i];
            let (prev_angle, _, prev_exit) = crossings[(i + n - 1) % n];
            if is_exit && !prev_exit {
                let arc = wrap_two_pi(angle - prev_angle);
                return self.reflect_at(p, t, arc);
            }
        }
        Err(DynamicsError::NoImpact)
    }

    /// `M(P)`.
    pub fn center_map(&self, p: PlanarVector<T>) -> Result<PlanarVector<T>, DynamicsError> {
        self.center_impact(p).map(|i| i.center_after)
    }

    /// `M(P)`, returning `P` itself on the fixed curves `γ±r`.
    pub fn center_map_or_fixed(&self, p: PlanarVector<T>) -> Result<PlanarVector<T>, DynamicsError> {
        match self.center_map(p) {
            Err(DynamicsError::FixedBoundaryPoint) => Ok(p),
            other => other,
        }
    }

    /// Iterates the billiard from a state. `integral`, when given, is evaluated
    /// on the post-reflection state of every record.
    pub fn orbit(
        &self,
        start: LarmorState<T>,
        n_steps: usize,
        integral: Option<StateFn<'_, T>>,
    ) -> Orbit<T> {
        let mut records = Vec::with_capacity(n_steps);
        let mut state = start;
        for step in 0..n_steps {
            match self.billiard_step(&state) {
                Ok((next, impact)) => {
                    let integral_value = integral.map(|f| f(&next));
                    records.push(OrbitRecord { step, impact, integral_value });
                    state = next;
                }
                Err(e) => return Orbit { records, terminated: Some(e) },
            }
        }
        Orbit { records, terminated: None }
    }

    /// Iterates `M` from a center.
    pub fn center_orbit(&self, p: PlanarVector<T>, n_steps: usize) -> Orbit<T> {
        let mut records = Vec::with_capacity(n_steps);
        let mut c = p;
        for step in 0..n_steps {
            match self.center_impact(c) {
                Ok(impact) => {
                    c = impact.center_after;
                    records.push(OrbitRecord { step, impact, integral_value: None });
                }
                Err(e) => return Orbit { records, terminated: Some(e) },
            }
        }
        Orbit { records, terminated: None }
    }

    /// Bounding box of `Ω_r`, i.e. of the outer parallel curve `γ-r`.
    pub fn phase_space_bounds(&self) -> (PlanarVector<T>, PlanarVector<T>) {
        let outer = ParallelCurve::new(&self.boundary, Side::Minus, self.params.r.as_f64());
        crate::geom::bounding_box(&outer, 2048)
    }

    /// Uniform sample of `Ω_r` at least `margin` from both parallel curves.
    pub fn sample_center(&self, rng: &mut ChaCha8Rng, margin: T) -> PlanarVector<T> {
        let (lo, hi) = self.phase_space_bounds();
        loop {
            let p = PlanarVector::new(
                lo.x + (hi.x - lo.x) * T::lit(rng.gen::<f64>()),
                lo.y + (hi.y - lo.y) * T::lit(rng.gen::<f64>()),
            );
            if self.is_interior_with_margin(p, margin) {
                return p;
            }
        }
    }
}

/// Rotation of the center about the origin for the circular billiard of radius `d`:
/// `α(ρ) = 2 arccos((ρ² + d² - r²) / (2ρd))`.
pub fn rotation_angle_circle<T: Real>(d: T, r: T, rho: T) -> Result<T, DynamicsError> {
    let (inner, outer) = ((r - d).abs(), r + d);
    let slack = T::lit(1e-12) * outer;
    if rho < inner - slack || rho > outer + slack || rho <= T::zero() {
        return Err(DynamicsError::OutsideAnnulus {
            rho: rho.as_f64(),
            inner: inner.as_f64(),
            outer: outer.as_f64(),
        });
    }
    let arg = (rho * rho + d * d - r * r) / (T::two() * rho * d);
    Ok(T::two() * arg.max(-T::one()).min(T::one()).acos())
}

/// Average polar-angle advance per step about `origin`, in turns.
///
/// Each step's advance is taken in `[0, 2π)`, which makes the rotation number
/// of the inner parallel curve 0 and that of the outer one 1 for the circle.
pub fn rotation_number_estimate<T: Real>(
    centers: &[PlanarVector<T>],
    origin: PlanarVector<T>,
) -> Result<T, DynamicsError> {
    if centers.len() < 2 {
        return Ok(T::zero());
    }
    let tiny = T::lit(1e-12);
    let mut total = T::zero();
    let mut prev = centers[0] - origin;
    if prev.norm() < tiny {
        return Err(DynamicsError::NotAnnular);
    }
    for c in &centers[1..] {
        let cur = *c - origin;
        if cur.norm() < tiny {
            return Err(DynamicsError::NotAnnular);
        }
        total = total + wrap_two_pi(prev.cross(cur).atan2(prev.dot(cur)));
        prev = cur;
    }
    Ok(total / (T::count(centers.len() - 1) * T::TAU()))
}

/// Finite-difference Jacobian determinant of a planar map.
pub fn jacobian_determinant<T: Real, F>(f: F, p: PlanarVector<T>, h: T) -> Result<T, DynamicsError>
where
    F: Fn(PlanarVector<T>) -> Result<PlanarVector<T>, DynamicsError>,
{
    // fourth-order stencil: derivatives of M grow quickly near the annulus edges
    let partial = |e: PlanarVector<T>| -> Result<PlanarVector<T>, DynamicsError> {
        let near = f(p + e)? - f(p - e)?;
        let far = f(p + e * T::two())? - f(p - e * T::two())?;
        Ok((near * T::lit(8.0) - far) / (T::lit(12.0) * h))
    };
    let dx = partial(PlanarVector::new(h, T::zero()))?;
    let dy = partial(PlanarVector::new(T::zero(), h))?;
    Ok(dx.cross(dy))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovEstimate<T> {
    /// Largest exponent per iteration of `M`.
    pub lambda: T,
    /// Standard error over block averages.
    pub stderr: T,
    pub iterations: usize,
    /// Set when the orbit stopped early; the estimate is then partial.
    pub terminated: Option<DynamicsError>,
}

pub const LYAPUNOV_OFFSET: f64 = 1e-7;
const LYAPUNOV_BLOCKS: usize = 10;

/// Largest Lyapunov exponent of `M` by two-trajectory tangent propagation.
///
/// The companion trajectory starts `1e-7` away in a seeded random direction
/// and is pulled back to that distance after every step. The first tenth of
/// the iterations is spent aligning the separation and is not averaged.
pub fn lyapunov_estimate<T: Real, B: Boundary<T>>(
    billiard: &MagneticBilliard<T, B>,
    start: PlanarVector<T>,
    n_iters: usize,
    seed: u64,
) -> Result<LyapunovEstimate<T>, DynamicsError> {
    if n_iters < 1000 {
        return Err(DynamicsError::TooFewIterations { needed: 1000, got: n_iters });
    }
    let mut rng = seeded(seed);
    let delta = T::lit(LYAPUNOV_OFFSET);
    let dir = PlanarVector::from_angle(T::lit(rng.gen::<f64>() * std::f64::consts::TAU));
    let mut p = start;
    let mut q = start + dir * delta;
    let transient = n_iters / 10;
    let kept = n_iters - transient;
    let block_len = (kept / LYAPUNOV_BLOCKS).max(1);
    let mut logs = Vec::with_capacity(kept);
    let mut terminated = None;
    for i in 0..n_iters {
        let step = billiard.center_map(p).and_then(|p1| billiard.center_map(q).map(|q1| (p1, q1)));
        let (p1, q1) = match step {
            Ok(pair) => pair,
            Err(e) => {
                terminated = Some(e);
                break;
            }
        };
        let sep = q1 - p1;
        let d = sep.norm();
        if i >= transient {
            logs.push((d / delta).ln());
        }
        p = p1;
        q = if d > T::zero() { p1 + sep * (delta / d) } else { p1 + dir * delta };
    }
    let iterations = logs.len() + transient.min(n_iters);
    if logs.is_empty() {
        return Ok(LyapunovEstimate {
            lambda: T::zero(),
            stderr: T::infinity(),
            iterations,
            terminated,
        });
    }
    let lambda = logs.iter().fold(T::zero(), |a, b| a + *b) / T::count(logs.len());
    let blocks: Vec<T> = logs
        .chunks(block_len)
        .filter(|c| c.len() == block_len)
        .map(|c| c.iter().fold(T::zero(), |a, b| a + *b) / T::count(c.len()))
        .collect();
    let stderr = if blocks.len() > 1 {
        let m = blocks.iter().fold(T::zero(), |a, b| a + *b) / T::count(blocks.len());
        let var = blocks.iter().fold(T::zero(), |a, b| a + (*b - m) * (*b - m))
            / T::count(blocks.len() - 1);
        (var / T::count(blocks.len())).sqrt()
    } else {
        T::infinity()
    };
    Ok(LyapunovEstimate { lambda, stderr, iterations, terminated })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortraitPoint<T> {
    pub step: usize,
    pub center: PlanarVector<T>,
    pub t_impact: T,
    /// `<v_out, τ>` at the impact (Birkhoff momentum coordinate).
    pub tangential_velocity: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortraitOrbit<T> {
    pub id: usize,
    pub start: PlanarVector<T>,
    pub points: Vec<PortraitPoint<T>>,
    pub terminated: Option<DynamicsError>,
}

/// Center orbits from `n_seeds` seeded starts in `Ω_r`.
pub fn phase_portrait<T: Real, B: Boundary<T>>(
    billiard: &MagneticBilliard<T, B>,
    n_seeds: usize,
    n_iters: usize,
    seed: u64,
) -> Vec<PortraitOrbit<T>> {
    let mut rng = seeded(seed);
    let margin = T::lit(1e-3);
    (0..n_seeds)
        .map(|id| {
            let start = billiard.sample_center(&mut rng, margin);
            let orbit = billiard.center_orbit(start, n_iters);
            let points = orbit
                .records
                .iter()
                .map(|rec| PortraitPoint {
                    step: rec.step,
                    center: rec.impact.center_after,
                    t_impact: rec.impact.t,
                    tangential_velocity: rec.impact.v_out.dot(billiard.boundary().tangent(rec.impact.t)),
                })
                .collect();
            PortraitOrbit { id, start, points, terminated: orbit.terminated }
        })
        .collect()
}

/// Radial spread `max ρ - min ρ` of an orbit about `origin`.
pub fn radial_scatter<T: Real>(points: &[PlanarVector<T>], origin: PlanarVector<T>) -> T {
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for p in points {
        let rho = (*p - origin).norm();
        lo = lo.min(rho);
        hi = hi.max(rho);
    }
    if points.is_empty() {
        T::zero()
    } else {
        hi - lo
    }
}
