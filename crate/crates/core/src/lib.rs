//! Minimal-path networks on voxel grids.
//!
//! The crate grows an action (geodesic distance) map from a small zero set
//! under an isotropic image metric, either with the classical update
//! `dS = phi * ds` or with a curvature-corrected update
//! `dS = phi * ds * (1 - lambda * K * ds)` that slows down fronts where the
//! level-set normals diverge. Minimal paths are then traced back from a
//! contour on a user plane and scored by how much of the object surface
//! they cover.
//!
//! Module map:
//!
//! * [`grid`]: lattices, fields, finite differences, curvature, interpolation.
//! * [`phantom`]: synthetic ellipsoid volumes and the image metric.
//! * [`eikonal`]: update formulas and the ordered front-propagation solver.
//! * [`paths`]: contour detection, backtracking, networks, coverage.
//! * [`surfana`]: analytic area relations used as verification oracles.
//! * [`io`], [`export`], [`pipeline`]: file formats and the end-to-end run.

// `!(x > 0.0)` style checks reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eikonal;
pub mod error;
pub mod export;
pub mod grid;
pub mod io;
pub mod par;
pub mod paths;
pub mod phantom;
pub mod pipeline;
pub mod surfana;

pub use error::{Error, Result};

/// World-space 3-vector.
pub type Vec3 = nalgebra::Vector3<f64>;
