//! Geodesics between closed planar curves under the BV2 Finsler metric and
//! the second-order Sobolev metric.
//!
//! Curves are closed piecewise-affine polylines ([`curve::PolyCurve`]);
//! paths are time-discrete homotopies ([`path::Homotopy`]). A geodesic is
//! approximated by minimizing `H(last slice, target) + E_eps(path)` with the
//! source slice pinned, where `E_eps` is the smoothed path energy and `H` a
//! kernel dissimilarity.

pub mod config;
pub mod curve;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod matching;
pub mod metrics;
pub mod optimizer;
pub mod path;
pub mod pipeline;


pub use config::RunConfig;
pub use curve::{PolyCurve, TangentField};
pub use error::{Error, Result};
pub use matching::{KernelParams, MatchKind};
pub use metrics::{Exponent, MetricFamily, MetricSpec};
pub use optimizer::{OptimConfig, OptimReport};
pub use path::{Homotopy, VelocityConvention};

/// Plane vectors and points.
pub type Vec2 = nalgebra::Vector2<f64>;
