//! Dense bivariate polynomials, univariate complex root finding and
//! Fourier restriction to circles.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use nalgebra::{DMatrix, Schur};
use num_complex::Complex;
use thiserror::Error;

use crate::geom::{ComplexPoint, PlanarVector};
use crate::scalar::Real;

/// Largest total degree accepted by the text parser.
pub const MAX_DEGREE: usize = 64;
/// Coefficients below this fraction of the largest one are dropped when trimming.
pub const TRIM_REL: f64 = 1e-13;
/// Roots closer than this are reported as one root with multiplicity.
pub const CLUSTER_RADIUS: f64 = 1e-6;
/// Iteration cap of the simultaneous root iteration.
pub const ROOT_ITERATIONS: usize = 500;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolyError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("degree {0} exceeds the supported maximum {MAX_DEGREE}")]
    DegreeTooLarge(usize),
    #[error("constant polynomial has no roots")]
    NoRoots,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// `Σ c[i][j] x^i y^j` on a square coefficient grid.
#[derive(Clone, PartialEq)]
pub struct BivarPoly<T> {
    /// Grid side minus one; every stored `(i, j)` has `i, j <= n`.
    n: usize,
    c: Vec<T>,
}

impl<T: Real> BivarPoly<T> {
    pub fn zero() -> Self {
        Self { n: 0, c: vec![T::zero()] }
    }

    pub fn constant(v: T) -> Self {
        Self { n: 0, c: vec![v] }
    }

    pub fn x() -> Self {
        Self::monomial(1, 0, T::one())
    }

    pub fn y() -> Self {
        Self::monomial(0, 1, T::one())
    }

    pub fn monomial(i: usize, j: usize, coef: T) -> Self {
        let mut p = Self::with_bound(i.max(j));
        p.set(i, j, coef);
        p
    }

    /// Sums `(i, j, coef)` terms; repeated exponents add up.
    pub fn from_terms<I: IntoIterator<Item = (usize, usize, T)>>(terms: I) -> Self {
        let terms: Vec<_> = terms.into_iter().collect();
        let n = terms.iter().map(|&(i, j, _)| i.max(j)).max().unwrap_or(0);
        let mut p = Self::with_bound(n);
        for (i, j, v) in terms {
            let cur = p.coef(i, j);
            p.set(i, j, cur + v);
        }
        p.trimmed()
    }

    fn with_bound(n: usize) -> Self {
        Self { n, c: vec![T::zero(); (n + 1) * (n + 1)] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.n + 1) + j
    }

    pub fn coef(&self, i: usize, j: usize) -> T {
        if i > self.n || j > self.n {
            T::zero()
        } else {
            self.c[self.idx(i, j)]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        if i > self.n || j > self.n {
            let mut grown = Self::with_bound(i.max(j));
            for (a, b, w) in self.terms() {
                let k = grown.idx(a, b);
                grown.c[k] = w;
            }
            *self = grown;
        }
        let k = self.idx(i, j);
        self.c[k] = v;
    }

    /// Nonzero terms `(i, j, coef)` in lexicographic order.
    pub fn terms(&self) -> Vec<(usize, usize, T)> {
        let mut out = Vec::new();
        for i in 0..=self.n {
            for j in 0..=self.n {
                let v = self.c[self.idx(i, j)];
                if v != T::zero() {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|v| *v == T::zero())
    }

    /// Largest `i + j` with a nonzero coefficient (0 for constants and zero).
    pub fn degree(&self) -> usize {
        self.terms().iter().map(|&(i, j, _)| i + j).max().unwrap_or(0)
    }

    pub fn max_abs_coef(&self) -> T {
        self.c.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Shrinks the grid to the exponents actually present.
    fn trimmed(self) -> Self {
        let n = self.terms().iter().map(|&(i, j, _)| i.max(j)).max().unwrap_or(0);
        if n == self.n {
            return self;
        }
        let mut out = Self::with_bound(n);
        for (i, j, v) in self.terms() {
            let k = out.idx(i, j);
            out.c[k] = v;
        }
        out
    }

    pub fn eval(&self, x: T, y: T) -> T {
        let mut acc = T::zero();
        for i in (0..=self.n).rev() {
            let mut row = T::zero();
            for j in (0..=self.n).rev() {
                row = row * y + self.c[self.idx(i, j)];
            }
            acc = acc * x + row;
        }
        acc
    }

    pub fn eval_point(&self, p: PlanarVector<T>) -> T {
        self.eval(p.x, p.y)
    }

    pub fn eval_complex(&self, x: Complex<T>, y: Complex<T>) -> Complex<T> {
        let mut acc = Complex::new(T::zero(), T::zero());
        for i in (0..=self.n).rev() {
            let mut row = Complex::new(T::zero(), T::zero());
            for j in (0..=self.n).rev() {
                row = row * y + Complex::new(self.c[self.idx(i, j)], T::zero());
            }
            acc = acc * x + row;
        }
        acc
    }

    pub fn eval_complex_point(&self, p: &ComplexPoint<T>) -> Complex<T> {
        self.eval_complex(p.x, p.y)
    }

    pub fn derivative(&self, axis: Axis) -> Self {
        let mut out = Self::with_bound(self.n);
        for (i, j, v) in self.terms() {
            match axis {
                Axis::X if i > 0 => {
                    let k = out.idx(i - 1, j);
                    out.c[k] = v * T::count(i);
                }
                Axis::Y if j > 0 => {
                    let k = out.idx(i, j - 1);
                    out.c[k] = v * T::count(j);
                }
                _ => {}
            }
        }
        out.trimmed()
    }

    pub fn dx(&self) -> Self {
        self.derivative(Axis::X)
    }

    pub fn dy(&self) -> Self {
        self.derivative(Axis::Y)
    }

    pub fn scale(&self, s: T) -> Self {
        Self { n: self.n, c: self.c.iter().map(|v| *v * s).collect() }.trimmed()
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::constant(T::one());
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    /// Terms of total degree exactly `j`.
    pub fn homogeneous_part(&self, j: usize) -> Self {
        Self::from_terms(self.terms().into_iter().filter(|&(a, b, _)| a + b == j))
    }

    /// Top-degree form `f_d(ρ, 1)` as a polynomial in the ratio `ρ = x/y`.
    ///
    /// Its coefficient of `ρ^i` is the coefficient of `x^i y^(d-i)`. When the
    /// coefficient of `x^d` vanishes the result has lower degree, which
    /// corresponds to a root at `ρ = ∞`, i.e. the point `(1 : 0 : 0)`.
    pub fn leading_form(&self) -> UniPoly<T> {
        let d = self.degree();
        UniPoly::new((0..=d).map(|i| Complex::new(self.coef(i, d - i), T::zero())).collect())
    }

    /// Homogeneous part of degree `d - k` restricted to the infinite line, in `ρ = x/y`.
    pub fn sub_leading_form(&self, k: usize) -> UniPoly<T> {
        let d = self.degree();
        if k > d {
            return UniPoly::new(vec![]);
        }
        let e = d - k;
        UniPoly::new((0..=e).map(|i| Complex::new(self.coef(i, e - i), T::zero())).collect())
    }

    /// `F_xx F_y² - 2 F_xy F_x F_y + F_yy F_x²`.
    pub fn h_operator(&self) -> Self {
        let fx = self.dx();
        let fy = self.dy();
        let fxx = fx.dx();
        let fxy = fx.dy();
        let fyy = fy.dy();
        let a = &(&fxx * &fy) * &fy;
        let b = &(&(&fxy * &fx) * &fy).scale(T::two());
        let c = &(&fyy * &fx) * &fx;
        &(&a - b) + &c
    }

    /// `(f_x, f_y)` at a real point.
    pub fn gradient(&self, p: PlanarVector<T>) -> PlanarVector<T> {
        PlanarVector::new(self.dx().eval_point(p), self.dy().eval_point(p))
    }

    /// Substitutes `x -> X(x, y)`, `y -> Y(x, y)`.
    pub fn compose(&self, x_sub: &Self, y_sub: &Self) -> Self {
        let mut out = Self::zero();
        let xp: Vec<Self> = (0..=self.n).scan(Self::constant(T::one()), |acc, _| {
            let cur = acc.clone();
            *acc = &*acc * x_sub;
            Some(cur)
        }).collect();
        let yp: Vec<Self> = (0..=self.n).scan(Self::constant(T::one()), |acc, _| {
            let cur = acc.clone();
            *acc = &*acc * y_sub;
            Some(cur)
        }).collect();
        for (i, j, v) in self.terms() {
            out = &out + &(&xp[i] * &yp[j]).scale(v);
        }
        out
    }

    /// Text form: one `i j coefficient` line per term.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, j, v) in self.terms() {
            s.push_str(&format!("{i} {j} {:.16e}\n", v.as_f64()));
        }
        s
    }

    pub fn parse_text(text: &str) -> Result<Self, PolyError> {
        let mut terms = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: &str| PolyError::Parse { line: ln + 1, reason: reason.to_string() };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(err("expected `i j coefficient`"));
            }
            let i: usize = fields[0].parse().map_err(|_| err("bad x exponent"))?;
            let j: usize = fields[1].parse().map_err(|_| err("bad y exponent"))?;
            let v: f64 = fields[2].parse().map_err(|_| err("bad coefficient"))?;
            if !v.is_finite() {
                return Err(err("coefficient is not finite"));
            }
            if i + j > MAX_DEGREE {
                return Err(PolyError::DegreeTooLarge(i + j));
            }
            terms.push((i, j, T::lit(v)));
        }
        Ok(Self::from_terms(terms))
    }

    /// Converts the coefficient type.
    pub fn cast<U: Real>(&self) -> BivarPoly<U> {
        BivarPoly::from_terms(self.terms().into_iter().map(|(i, j, v)| (i, j, U::lit(v.as_f64()))))
    }
}

impl<T: Real> FromStr for BivarPoly<T> {
    type Err = PolyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse_text(s)
    }
}

impl<T: Real> fmt::Debug for BivarPoly<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BivarPoly[")?;
        for (k, (i, j, v)) in self.terms().into_iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{v}*x^{i}*y^{j}")?;
        }
        write!(f, "]")
    }
}

impl<T: Real> fmt::Display for BivarPoly<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl<T: Real> Add for &BivarPoly<T> {
    type Output = BivarPoly<T>;
    fn add(self, o: &BivarPoly<T>) -> BivarPoly<T> {
        let mut out = BivarPoly::with_bound(self.n.max(o.n));
        for p in [self, o] {
            for (i, j, v) in p.terms() {
                let k = out.idx(i, j);
                out.c[k] = out.c[k] + v;
            }
        }
        out.trimmed()
    }
}

impl<T: Real> Sub for &BivarPoly<T> {
    type Output = BivarPoly<T>;
    fn sub(self, o: &BivarPoly<T>) -> BivarPoly<T> {
        self + &(-o)
    }
}

impl<T: Real> Neg for &BivarPoly<T> {
    type Output = BivarPoly<T>;
    fn neg(self) -> BivarPoly<T> {
        BivarPoly { n: self.n, c: self.c.iter().map(|v| -*v).collect() }
    }
}

impl<T: Real> Mul for &BivarPoly<T> {
    type Output = BivarPoly<T>;
    fn mul(self, o: &BivarPoly<T>) -> BivarPoly<T> {
        let mut out = BivarPoly::with_bound(self.n + o.n);
        let rhs = o.terms();
        for (i, j, v) in self.terms() {
            for &(a, b, w) in &rhs {
                let k = out.idx(i + a, j + b);
                out.c[k] = out.c[k] + v * w;
            }
        }
        out.trimmed()
    }
}

macro_rules! owned_ops {
    ($($tr:ident $m:ident),*) => {$(
        impl<T: Real> $tr for BivarPoly<T> {
            type Output = BivarPoly<T>;
            fn $m(self, o: BivarPoly<T>) -> BivarPoly<T> {
                (&self).$m(&o)
            }
        }
    )*};
}
owned_ops!(Add add, Sub sub, Mul mul);

impl<T: Real> Neg for BivarPoly<T> {
    type Output = BivarPoly<T>;
    fn neg(self) -> BivarPoly<T> {
        -&self
    }
}

/// Univariate polynomial with complex coefficients, lowest degree first.
#[derive(Debug, Clone, PartialEq)]
pub struct UniPoly<T> {
    coeffs: Vec<Complex<T>>,
}

/// A root and how many times it occurs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootCluster<T> {
    pub value: Complex<T>,
    pub multiplicity: usize,
}

impl<T: Real> UniPoly<T> {
    /// Drops leading coefficients below `1e-13` of the largest.
    pub fn new(mut coeffs: Vec<Complex<T>>) -> Self {
        let big = coeffs.iter().fold(T::zero(), |m, c| m.max(c.norm()));
        let cut = big * T::lit(TRIM_REL);
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.norm() <= cut) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(Complex::new(T::zero(), T::zero()));
        }
        Self { coeffs }
    }

    pub fn from_real(coeffs: &[T]) -> Self {
        Self::new(coeffs.iter().map(|c| Complex::new(*c, T::zero())).collect())
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, z: Complex<T>) -> Complex<T> {
        self.coeffs.iter().rev().fold(Complex::new(T::zero(), T::zero()), |acc, c| acc * z + c)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::new(vec![]);
        }
        Self {
            coeffs: self.coeffs.iter().enumerate().skip(1).map(|(k, c)| c * T::count(k)).collect(),
        }
    }

    /// `Σ |a_k| |z|^k`, the natural size of rounding errors in `eval(z)`.
    pub fn eval_scale(&self, z: Complex<T>) -> T {
        let m = z.norm();
        self.coeffs.iter().rev().fold(T::zero(), |acc, c| acc * m + c.norm())
    }

    /// All roots, repeated according to multiplicity.
    pub fn roots(&self) -> Result<Vec<Complex<T>>, PolyError> {
        if self.degree() == 0 {
            return Err(PolyError::NoRoots);
        }
        let zero = Complex::new(T::zero(), T::zero());
        let lead = self.coeffs.iter().position(|c| c.norm() > T::zero()).unwrap_or(0);
        let mut roots = vec![zero; lead];
        let rest = Self { coeffs: self.coeffs[lead..].to_vec() };
        if rest.degree() > 0 {
            let found = rest.aberth().unwrap_or_else(|| rest.companion_roots());
            roots.extend(rest.merge_multiple(found));
        }
        Ok(roots)
    }

    /// Roots grouped at radius `1e-6`.
    pub fn root_clusters(&self) -> Result<Vec<RootCluster<T>>, PolyError> {
        Ok(cluster_roots(&self.roots()?, T::lit(CLUSTER_RADIUS)))
    }

    fn residual_ok(&self, z: Complex<T>) -> bool {
        self.eval(z).norm() <= T::lit(1e-8) * self.eval_scale(z).max(T::min_positive_value())
    }

    /// Aberth–Ehrlich simultaneous iteration; `None` when it stagnates.
    fn aberth(&self) -> Option<Vec<Complex<T>>> {
        let n = self.degree();
        let d = self.derivative();
        let an = self.coeffs[n].norm();
        let a0 = self.coeffs[0].norm();
        let radius = if a0 > T::zero() { (a0 / an).powf(T::one() / T::count(n)) } else { T::one() };
        let mut z: Vec<Complex<T>> = (0..n)
            .map(|k| {
                let th = T::TAU() * T::count(k) / T::count(n) + T::lit(0.4);
                Complex::from_polar(radius, th)
            })
            .collect();
        let one = Complex::new(T::one(), T::zero());
        for _ in 0..ROOT_ITERATIONS {
            let mut biggest = T::zero();
            for i in 0..n {
                let p = self.eval(z[i]);
                if p.norm() == T::zero() {
                    continue;
                }
                let ratio = p / d.eval(z[i]);
                let mut s = Complex::new(T::zero(), T::zero());
                for j in 0..n {
                    if j != i {
                        let diff = z[i] - z[j];
                        if diff.norm() > T::zero() {
                            s = s + one / diff;
                        }
                    }
                }
                let step = ratio / (one - ratio * s);
                if !step.re.is_finite() || !step.im.is_finite() {
                    return None;
                }
                z[i] = z[i] - step;
                biggest = biggest.max(step.norm() / (T::one() + z[i].norm()));
            }
            if biggest < T::lit(4.0) * T::epsilon() {
                break;
            }
        }
        if z.iter().all(|r| self.residual_ok(*r)) {
            Some(z)
        } else {
            None
        }
    }

    /// Eigenvalues of the companion matrix, computed in double precision.
    fn companion_roots(&self) -> Vec<Complex<T>> {
        let n = self.degree();
        let lead = Complex::new(self.coeffs[n].re.as_f64(), self.coeffs[n].im.as_f64());
        let mut m = DMatrix::<Complex<f64>>::zeros(n, n);
        for i in 1..n {
            m[(i, i - 1)] = Complex::new(1.0, 0.0);
        }
        for i in 0..n {
            let c = Complex::new(self.coeffs[i].re.as_f64(), self.coeffs[i].im.as_f64());
            m[(i, n - 1)] = -c / lead;
        }
        let t = match Schur::try_new(m, f64::EPSILON, 100_000) {
            Some(s) => s.unpack().1,
            None => return vec![Complex::new(T::nan(), T::nan()); n],
        };
        (0..n).map(|i| Complex::new(T::lit(t[(i, i)].re), T::lit(t[(i, i)].im))).collect()
    }

    /// Replaces near-coincident roots by their mean when the derivatives confirm
    /// the multiplicity; the mean of a perturbed cluster is far more accurate
    /// than its members.
    fn merge_multiple(&self, mut roots: Vec<Complex<T>>) -> Vec<Complex<T>> {
        // an m-fold root splits by about eps^(1/m), so high multiplicities need a wide net
        let loose = T::lit(1e-2);
        let mut used = vec![false; roots.len()];
        let mut derivs = vec![self.clone()];
        for i in 0..roots.len() {
            if used[i] {
                continue;
            }
            let scale = T::one() + roots[i].norm();
            let mut near: Vec<usize> = (i..roots.len())
                .filter(|&j| !used[j] && (roots[j] - roots[i]).norm() < loose * scale)
                .collect();
            near.sort_by(|&a, &b| {
                let da = (roots[a] - roots[i]).norm();
                let db = (roots[b] - roots[i]).norm();
                da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
            });
            while derivs.len() <= near.len() {
                let next = derivs.last().unwrap().derivative();
                derivs.push(next);
            }
            for m in (2..=near.len()).rev() {
                let members = &near[..m];
                let mean = members.iter().fold(Complex::new(T::zero(), T::zero()), |a, &j| a + roots[j])
                    / T::count(m);
                // the root is simple for the (m-1)-th derivative; polish there, then confirm
                let mut mean = mean;
                for _ in 0..30 {
                    let dz = derivs[m - 1].eval(mean) / derivs[m].eval(mean);
                    if !dz.re.is_finite() || !dz.im.is_finite() {
                        break;
                    }
                    mean = mean - dz;
                    if dz.norm() <= T::epsilon() * (T::one() + mean.norm()) {
                        break;
                    }
                }
                let confirmed = (mean - roots[i]).norm() < loose * scale
                    && derivs[..m].iter().all(|q| {
                        q.eval(mean).norm() <= T::lit(1e-6) * q.eval_scale(mean).max(T::min_positive_value())
                    });
                if !confirmed {
                    continue;
                }
                for &j in members {
                    roots[j] = mean;
                    used[j] = true;
                }
                break;
            }
        }
        roots
    }
}

/// Groups roots lying within `radius` (relative to `1 + |z|`) of a cluster's first member.
pub fn cluster_roots<T: Real>(roots: &[Complex<T>], radius: T) -> Vec<RootCluster<T>> {
    let mut clusters: Vec<(Complex<T>, Complex<T>, usize)> = Vec::new();
    for &z in roots {
        match clusters
            .iter_mut()
            .find(|(first, _, _)| (z - *first).norm() <= radius * (T::one() + first.norm()))
        {
            Some(c) => {
                c.1 = c.1 + z;
                c.2 += 1;
            }
            None => clusters.push((z, z, 1)),
        }
    }
    clusters
        .into_iter()
        .map(|(_, sum, m)| RootCluster { value: sum / T::count(m), multiplicity: m })
        .collect()
}

/// `A_0 + Σ_k (A_k cos kt + B_k sin kt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly<T> {
    pub a: Vec<T>,
    pub b: Vec<T>,
}

impl<T: Real> TrigPoly<T> {
    pub fn degree_bound(&self) -> usize {
        self.a.len().saturating_sub(1)
    }

    pub fn eval(&self, t: T) -> T {
        let mut s = self.a.first().copied().unwrap_or_else(T::zero);
        for k in 1..self.a.len() {
            let kt = T::count(k) * t;
            s = s + self.a[k] * kt.cos() + self.b[k] * kt.sin();
        }
        s
    }

    /// Amplitude `sqrt(A_k² + B_k²)` of harmonic `k`.
    pub fn amplitude(&self, k: usize) -> T {
        if k >= self.a.len() {
            return T::zero();
        }
        (self.a[k] * self.a[k] + self.b[k] * self.b[k]).sqrt()
    }

    /// Largest amplitude among harmonics above `d`.
    pub fn max_amplitude_above(&self, d: usize) -> T {
        (d + 1..self.a.len()).fold(T::zero(), |m, k| m.max(self.amplitude(k)))
    }
}

/// Fourier coefficients of `t -> F(center + r (cos t, sin t))` up to harmonic `K`,
/// from `4K + 4` equispaced samples.
pub fn fourier_restriction<T: Real>(
    f: &BivarPoly<T>,
    center: PlanarVector<T>,
    r: T,
    max_harmonic: usize,
) -> TrigPoly<T> {
    let m = 4 * max_harmonic + 4;
    let samples: Vec<T> = (0..m)
        .map(|i| f.eval_point(center + PlanarVector::from_angle(T::TAU() * T::count(i) / T::count(m)) * r))
        .collect();
    trig_coefficients(&samples, max_harmonic)
}

/// Discrete Fourier coefficients of equispaced samples over one period.
pub fn trig_coefficients<T: Real>(samples: &[T], max_harmonic: usize) -> TrigPoly<T> {
    let m = samples.len();
    let mut a = vec![T::zero(); max_harmonic + 1];
    let mut b = vec![T::zero(); max_harmonic + 1];
    for (i, v) in samples.iter().enumerate() {
        let t = T::TAU() * T::count(i) / T::count(m);
        for k in 0..=max_harmonic {
            let kt = T::count(k) * t;
            a[k] = a[k] + *v * kt.cos();
            b[k] = b[k] + *v * kt.sin();
        }
    }
    let norm = T::two() / T::count(m);
    for k in 0..=max_harmonic {
        a[k] = a[k] * norm;
        b[k] = b[k] * norm;
    }
    a[0] = a[0] / T::two();
    b[0] = T::zero();
    TrigPoly { a, b }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type P = BivarPoly<f64>;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn circle_form() -> P {
        P::from_terms([(2, 0, 1.0), (0, 2, 1.0)])
    }

    #[test]
    fn evaluation_examples() {
        assert_eq!(circle_form().eval(3.0, 4.0), 25.0);
        assert_eq!(circle_form().eval_complex(c(0.0, 1.0), c(0.0, 0.0)), c(-1.0, 0.0));
        assert_eq!(P::monomial(1, 1, 1.0).eval(2.0, -3.0), -6.0);
    }

    #[test]
    fn derivative_examples() {
        let x2y = P::monomial(2, 1, 1.0);
        assert_eq!(x2y.dx(), P::monomial(1, 1, 2.0));
        assert!(P::monomial(2, 0, 1.0).dy().is_zero());
    }

    #[test]
    fn h_operator_examples() {
        assert_eq!(circle_form().h_operator(), circle_form().scale(8.0));
        assert!(P::from_terms([(1, 0, 2.0), (0, 1, -1.0), (0, 0, 5.0)]).h_operator().is_zero());
        assert_eq!(P::monomial(1, 1, 1.0).h_operator(), P::monomial(1, 1, -2.0));
    }

    #[test]
    fn homogeneous_parts() {
        let f = P::from_terms([(2, 0, 0.25), (0, 2, 1.0), (0, 0, -1.0)]);
        assert_eq!(f.homogeneous_part(2), P::from_terms([(2, 0, 0.25), (0, 2, 1.0)]));
        assert_eq!(f.homogeneous_part(0), P::constant(-1.0));
        assert!(f.homogeneous_part(1).is_zero());
        let g = P::from_terms([(0, 1, 1.0), (2, 0, -1.0)]);
        assert_eq!(g.homogeneous_part(2), P::monomial(2, 0, -1.0));
        assert_eq!(g.homogeneous_part(1), P::y());
        // in ρ = x/y: f_d(ρ, 1) = -ρ², f_{d-1}(ρ, 1) = 1
        assert_eq!(g.leading_form().coeffs(), &[c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        assert_eq!(g.sub_leading_form(1).coeffs(), &[c(1.0, 0.0)]);
    }

    #[test]
    fn text_round_trip() {
        let f = P::from_terms([(3, 1, -2.5), (0, 0, 1e-3), (0, 7, 4.0)]);
        assert_eq!(P::parse_text(&f.to_text()).unwrap(), f);
        let g: P = "# comment\n1 0 2\n1 0 3 # dup\n\n0 2 -1\n".parse().unwrap();
        assert_eq!(g, P::from_terms([(1, 0, 5.0), (0, 2, -1.0)]));
        assert!(matches!(P::parse_text("1 2"), Err(PolyError::Parse { line: 1, .. })));
        assert!(matches!(P::parse_text("40 30 1"), Err(PolyError::DegreeTooLarge(70))));
    }

    #[test]
    fn compose_shift() {
        // (x + 1)^2 + y^2 at (x, y) equals circle_form at (x + 1, y)
        let f = circle_form().compose(&(P::x() + P::constant(1.0)), &P::y());
        assert!((f.eval(0.3, -0.7) - circle_form().eval(1.3, -0.7)).abs() < 1e-14);
    }

    #[test]
    fn root_examples() {
        let r = UniPoly::from_real(&[1.0, 0.0, 1.0]).root_clusters().unwrap();
        assert_eq!(r.len(), 2);
        assert!(r.iter().any(|z| (z.value - c(0.0, 1.0)).norm() < 1e-12));
        assert!(r.iter().any(|z| (z.value - c(0.0, -1.0)).norm() < 1e-12));
        let mut r: Vec<f64> =
            UniPoly::from_real(&[2.0, -3.0, 1.0]).roots().unwrap().iter().map(|z| z.re).collect();
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((r[0] - 1.0).abs() < 1e-12 && (r[1] - 2.0).abs() < 1e-12);
        let d = UniPoly::from_real(&[1.0, -2.0, 1.0]).root_clusters().unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].multiplicity, 2);
        assert!((d[0].value - c(1.0, 0.0)).norm() < 1e-7);
        assert_eq!(UniPoly::from_real(&[3.0]).roots(), Err(PolyError::NoRoots));
    }

    #[test]
    fn isotropic_triple_root() {
        // (ρ² + 1)³
        let p = UniPoly::<f64>::from_real(&[1.0, 0.0, 3.0, 0.0, 3.0, 0.0, 1.0]);
        let r = p.root_clusters().unwrap();
        assert_eq!(r.len(), 2, "{r:?}");
        for z in r {
            assert_eq!(z.multiplicity, 3);
            assert!((z.value.norm() - 1.0).abs() < 1e-8 && z.value.re.abs() < 1e-8);
        }
    }

    #[test]
    fn companion_fallback_agrees() {
        let p = UniPoly::from_real(&[-6.0, 11.0, -6.0, 1.0]);
        let mut r: Vec<f64> = p.companion_roots().iter().map(|z| z.re).collect();
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn fourier_examples() {
        let a = 1.3;
        let r = 0.7;
        let t = fourier_restriction(&circle_form(), PlanarVector::new(a, 0.0), r, 4);
        assert!((t.a[0] - (a * a + r * r)).abs() < 1e-12);
        assert!((t.a[1] - 2.0 * a * r).abs() < 1e-12);
        assert!(t.b[1].abs() < 1e-12 && t.max_amplitude_above(1) < 1e-12);
        let t = fourier_restriction(&P::x(), PlanarVector::new(a, 0.0), r, 2);
        assert!((t.a[0] - a).abs() < 1e-14 && (t.a[1] - r).abs() < 1e-14);
        let t = fourier_restriction(&P::constant(2.0), PlanarVector::new(a, 0.0), r, 3);
        assert!((t.a[0] - 2.0).abs() < 1e-14 && t.max_amplitude_above(0) < 1e-14);
        assert!((t.eval(0.4) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn f32_evaluation() {
        let f = BivarPoly::<f32>::from_terms([(2, 0, 1.0), (0, 2, 1.0)]);
        assert_eq!(f.eval(3.0, 4.0), 25.0f32);
    }

    fn arb_poly(max_deg: usize) -> impl Strategy<Value = P> {
        prop::collection::vec(((0..=max_deg), (0..=max_deg), -2.0f64..2.0), 1..12).prop_map(move |t| {
            P::from_terms(t.into_iter().filter(|&(i, j, _)| i + j <= max_deg))
        })
    }

    proptest! {
        #[test]
        fn parts_sum_to_poly(f in arb_poly(6)) {
            let sum = (0..=f.degree()).fold(P::zero(), |acc, j| &acc + &f.homogeneous_part(j));
            prop_assert_eq!(sum, f);
        }

        #[test]
        fn derivative_matches_differences(f in arb_poly(5), x in -1.5f64..1.5, y in -1.5f64..1.5) {
            let h = 1e-5;
            let fd = (f.eval(x + h, y) - f.eval(x - h, y)) / (2.0 * h);
            let scale = 1.0 + f.max_abs_coef() * 10.0f64.powi(5);
            prop_assert!((fd - f.dx().eval(x, y)).abs() < 1e-6 * scale);
            let fd = (f.eval(x, y + h) - f.eval(x, y - h)) / (2.0 * h);
            prop_assert!((fd - f.dy().eval(x, y)).abs() < 1e-6 * scale);
        }

        #[test]
        fn h_degree_bound(f in arb_poly(5)) {
            let d = f.degree();
            if d >= 2 {
                let h = f.h_operator();
                prop_assert!(h.is_zero() || h.degree() <= 3 * d - 4);
            }
        }

        #[test]
        fn product_evaluates_as_product(f in arb_poly(4), g in arb_poly(4), x in -1.0f64..1.0, y in -1.0f64..1.0) {
            let lhs = (&f * &g).eval(x, y);
            prop_assert!((lhs - f.eval(x, y) * g.eval(x, y)).abs() < 1e-10 * (1.0 + lhs.abs()));
        }

        #[test]
        fn restriction_is_band_limited(f in arb_poly(4), cx in -2.0f64..2.0, cy in -2.0f64..2.0, r in 0.1f64..3.0) {
            let t = fourier_restriction(&f, PlanarVector::new(cx, cy), r, 8);
            let scale = 1.0 + f.max_abs_coef() * (1.0 + cx.abs() + cy.abs() + r).powi(4);
            prop_assert!(t.max_amplitude_above(f.degree()) < 1e-10 * scale);
        }

        #[test]
        fn root_residuals(coefs in prop::collection::vec(-3.0f64..3.0, 2..12)) {
            let p = UniPoly::from_real(&coefs);
            prop_assume!(p.degree() >= 1);
            let roots = p.roots().unwrap();
            prop_assert_eq!(roots.len(), p.degree());
            for z in roots {
                prop_assert!(p.eval(z).norm() <= 1e-8 * p.eval_scale(z));
            }
        }
    }
}
