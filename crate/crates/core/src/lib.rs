//! Magnetic billiards in convex planar domains.
//!
//! A charged particle moves along counterclockwise Larmor circles of radius
//! `r = 1/β` and reflects specularly at the boundary. The crate provides:
//!
//! * [`geom`]: boundaries, parallel curves, Larmor centers;
//! * [`dynamics`]: the billiard flow, the center map `M`, rotation numbers and Lyapunov estimates;
//! * [`outer`]: the outer magnetic billiard `T` and its agreement with `M`;
//! * [`poly`]: dense bivariate and univariate polynomials over real or complex points;
//! * [`integrals`]: polynomial integrals and the boundary identities they force;
//! * [`algebra`]: the ellipse offset curve, complex singular points and behaviour at infinity;
//! * [`io`] and [`report`]: CSV, SVG and JSON output.
//!
//! The numerics are generic over [`scalar::Real`] (`f32` or `f64`); the aliases
//! below fix `f64`, which every check in the crate is calibrated for.

// `!(x > 0)` guards are deliberate: NaN must fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod dynamics;
pub mod geom;
pub mod integrals;
pub mod io;
pub mod numeric;
pub mod outer;
pub mod poly;
pub mod report;
pub mod rng;
pub mod scalar;
mod scan;

pub use scalar::Real;

pub type Vec2 = geom::PlanarVector<f64>;
pub type Complex2 = geom::ComplexPoint<f64>;
pub type Params = geom::MagneticParams<f64>;
pub type Billiard<B> = dynamics::MagneticBilliard<f64, B>;
pub type State = dynamics::LarmorState<f64>;
pub type Outer<B> = outer::OuterConfig<f64, B>;
pub type Poly = poly::BivarPoly<f64>;
pub type UniPoly = poly::UniPoly<f64>;
pub type VelocityPoly = integrals::VelocityPoly<f64>;
pub type Report = algebra::ObstructionReport<f64>;
