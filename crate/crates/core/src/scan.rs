//! Circle/curve intersection on a pre-sampled periodic curve.

use crate::geom::PlanarVector;
use crate::numeric::{golden_min, periodic_roots};
use crate::scalar::Real;

const ROOT_XTOL: f64 = 1e-15;
const EXTREMUM_XTOL: f64 = 1e-11;

/// Uniform samples of `curve(t)` over one period.
#[derive(Debug, Clone)]
pub(crate) struct SampledCurve<T> {
    period: T,
    points: Vec<PlanarVector<T>>,
}

impl<T: Real> SampledCurve<T> {
    pub fn new(period: T, n: usize, curve: impl Fn(T) -> PlanarVector<T>) -> Self {
        let points = (0..n).map(|i| curve(period * T::count(i) / T::count(n))).collect();
        Self { period, points }
    }

    pub fn step(&self) -> T {
        self.period / T::count(self.points.len())
    }

    /// Parameters in `[0, period)` where `|curve(t) - c| = r`, sorted.
    pub fn circle_roots(&self, c: PlanarVector<T>, r: T, curve: impl Fn(T) -> PlanarVector<T>) -> Vec<T> {
        let r2 = r * r;
        let values: Vec<T> = self.points.iter().map(|p| (*p - c).norm_sq() - r2).collect();
        let f = |t: T| (curve(t) - c).norm_sq() - r2;
        periodic_roots(&f, self.period, &values, T::lit(ROOT_XTOL))
    }

    /// `(min, max)` of `|curve(t) - p| - r`. Extremes within `near` of zero are
    /// refined by golden section; the others keep their grid value.
    pub fn distance_extremes(
        &self,
        p: PlanarVector<T>,
        r: T,
        near: T,
        curve: impl Fn(T) -> PlanarVector<T>,
    ) -> (T, T) {
        let h = self.step();
        let dist = |t: T| (curve(t) - p).norm() - r;
        let (mut imin, mut imax) = (0, 0);
        let mut dmin = T::infinity();
        let mut dmax = T::neg_infinity();
        for (i, q) in self.points.iter().enumerate() {
            let d = (*q - p).norm() - r;
            if d < dmin {
                dmin = d;
                imin = i;
            }
            if d > dmax {
                dmax = d;
                imax = i;
            }
        }
        let xtol = T::lit(EXTREMUM_XTOL);
        if dmin.abs() < near {
            let t0 = T::count(imin) * h;
            dmin = dmin.min(golden_min(dist, t0 - h, t0 + h, xtol).1);
        }
        if dmax.abs() < near {
            let t0 = T::count(imax) * h;
            dmax = dmax.max(-golden_min(|t| -dist(t), t0 - h, t0 + h, xtol).1);
        }
        (dmin, dmax)
    }
}
