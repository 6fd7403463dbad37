//! Derivative-free one-dimensional solvers used by the hit and tangency searches.

use crate::scalar::Real;

/// Brent's bracketing root finder on `[a, b]`.
///
/// Requires `f(a)` and `f(b)` of opposite sign (or one of them zero). Iterates
/// until the bracket is below `xtol` plus a few ulps of the root.
pub fn brent_root<T: Real, F: Fn(T) -> T>(f: F, mut a: T, mut b: T, xtol: T) -> Option<T> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == T::zero() {
        return Some(a);
    }
    if fb == T::zero() {
        return Some(b);
    }
    if (fa > T::zero()) == (fb > T::zero()) {
        return None;
    }
    let two = T::two();
    let half = T::lit(0.5);
    let eps = T::epsilon();
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if (fb > T::zero()) == (fc > T::zero()) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = two * eps * b.abs() + half * xtol;
        let xm = half * (c - b);
        if xm.abs() <= tol1 || fb == T::zero() {
            return Some(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // inverse quadratic interpolation, secant when only two points differ
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = two * xm * s;
                q = T::one() - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (two * xm * qa * (qa - r) - (b - a) * (r - T::one()));
                q = (qa - T::one()) * (r - T::one()) * (s - T::one());
            }
            if p > T::zero() {
                q = -q;
            }
            p = p.abs();
            let min1 = T::lit(3.0) * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if two * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if d.abs() > tol1 {
            b = b + d;
        } else {
            b = b + if xm > T::zero() { tol1 } else { -tol1 };
        }
        fb = f(b);
    }
    Some(b)
}

/// Golden-section minimization on `[a, b]`; returns `(argmin, min)`.
pub fn golden_min<T: Real, F: Fn(T) -> T>(f: F, mut a: T, mut b: T, xtol: T) -> (T, T) {
    let inv_phi = T::lit(0.618_033_988_749_894_9);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if (b - a).abs() <= xtol {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    if f1 < f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Tolerance used when refining extrema of a scanned periodic function.
const EXTREMUM_XTOL: f64 = 1e-11;

/// Finds every root of a periodic function sampled on a uniform grid.
///
/// `values[i]` must equal `f(i * period / values.len())`. Sign changes between
/// neighbours are refined with [`brent_root`]; local minima above zero (and
/// maxima below zero) are refined with [`golden_min`] so that a pair of roots
/// closer together than the grid spacing is not lost. Roots are returned in
/// `[0, period)`, sorted.
pub fn periodic_roots<T: Real, F: Fn(T) -> T>(f: &F, period: T, values: &[T], xtol: T) -> Vec<T> {
    let n = values.len();
    let mut roots = Vec::new();
    if n < 3 {
        return roots;
    }
    let h = period / T::count(n);
    let at = |i: usize| values[i % n];
    let zero = T::zero();
    for i in 0..n {
        let t0 = T::count(i) * h;
        let t1 = t0 + h;
        let (f0, f1) = (at(i), at(i + 1));
        if f0 == zero {
            roots.push(t0);
            continue;
        }
        if f1 != zero && (f0 > zero) != (f1 > zero) {
            if let Some(t) = brent_root(f, t0, t1, xtol) {
                roots.push(t);
            }
            continue;
        }
        // interior extremum at grid point i + 1 that may hide two roots
        let fm = f1;
        let f2 = at(i + 2);
        let hidden = (fm > zero && fm <= f0 && fm <= f2) || (fm < zero && fm >= f0 && fm >= f2);
        if !hidden || (f2 > zero) != (fm > zero) || f2 == zero {
            continue;
        }
        let flip = if fm > zero { T::one() } else { -T::one() };
        let g = |t: T| flip * f(t);
        let t2 = t1 + h;
        let (tm, gm) = golden_min(g, t0, t2, T::lit(EXTREMUM_XTOL));
        if gm < zero {
            if let Some(t) = brent_root(f, t0, tm, xtol) {
                roots.push(t);
            }
            if let Some(t) = brent_root(f, tm, t2, xtol) {
                roots.push(t);
            }
        } else if gm == zero {
            roots.push(tm);
        }
    }
    let mut out: Vec<T> = roots
        .into_iter()
        .map(|t| {
            let w = t % period;
            if w < zero {
                w + period
            } else {
                w
            }
        })
        .collect();
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite roots"));
    // a root landing exactly on a bracket end may be reported twice
    out.dedup_by(|a, b| (*a - *b).abs() <= xtol * T::lit(4.0));
    if out.len() > 1 {
        let first = out[0];
        let last = *out.last().unwrap();
        if (first + period - last).abs() <= xtol * T::lit(4.0) {
            out.pop();
        }
    }
    out
}

/// Global extremum of a periodic function sampled on a uniform grid, refined
/// by golden section around the best grid point. Returns `(argmin, min)`.
pub fn periodic_min<T: Real, F: Fn(T) -> T>(f: &F, period: T, values: &[T]) -> (T, T) {
    let n = values.len();
    let h = period / T::count(n);
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    let tb = T::count(best) * h;
    let (t, v) = golden_min(f, tb - h, tb + h, T::lit(EXTREMUM_XTOL));
    if v < values[best] {
        (t, v)
    } else {
        (tb, values[best])
    }
}
