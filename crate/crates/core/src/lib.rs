//! Distance fields, cut times and cut loci of points on Riemannian 2-tori.
//!
//! The torus is the periodic chart `[0, 2π)²` carrying an arbitrary smooth
//! SPD metric. The crate computes
//!
//! - geodesics and the exponential map ([`geodesic`]),
//! - the distance function `d_g(p, ·)` as the viscosity solution of the
//!   eikonal equation on a periodic grid ([`eikonal`]),
//! - cut times, cut-locus samples, separating points, injectivity radius and
//!   diameter ([`cut`]),
//! - Hausdorff distances between compact samples ([`hausdorff`]),
//! - exact lattice ground truth for constant metrics ([`oracle`]),
//! - stability sweeps over metric perturbation families ([`experiment`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod chart;
pub mod cut;
pub mod eikonal;
pub mod error;
pub mod experiment;
pub mod geodesic;
pub mod hausdorff;
pub mod metric;
pub mod oracle;
pub mod svg;

pub use chart::{ChartPoint, TangentVector};
pub use error::{Error, Result};
pub use metric::MetricField;
