//! Complete minimal surfaces with prescribed coordinates and flux.

pub mod completeness;
pub mod error;
pub mod geometry;
pub mod holofun;
pub mod linalg;
pub mod pipeline;
pub mod scalar;
pub mod spray;
pub mod weierstrass;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Point = num_complex::Complex64;
pub type Domain = geometry::PlanarDomain<f64>;
pub type Curve = geometry::OrientedCurve<f64>;
pub type Holo = holofun::HoloFunction<f64>;
pub type Pair = weierstrass::PairData<f64>;
pub type Tuple = weierstrass::WeierstrassTuple<f64>;
pub type Surface = weierstrass::Immersion<f64>;
