//! Seed contours, minimal-path backtracking and network scoring.

mod contour;
mod score;
mod trace;

pub use contour::{detect_plane_contour, marching_squares, DEGENERATE_CONTOUR_POINTS};
pub use score::{
    network_energy, reference_surface_mask, surface_coverage, surface_coverage_with,
};
pub use trace::{backtrace, build_network, build_network_with, TraceParams};

use serde::{Deserialize, Serialize};

use crate::grid::{Lattice, VoxelMask};
use crate::{Error, Result, Vec3};

/// A plane given by a point and a unit normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneSpec {
    pub point: Vec3,
    pub normal: Vec3,
}

impl PlaneSpec {
    /// Normalizes `normal`; errors on a (near) zero normal.
    pub fn new(point: Vec3, normal: Vec3) -> Result<Self> {
        let n = normal.norm();
        if !(n > 1e-12) || !n.is_finite() || point.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("plane normal must be a finite non-zero vector"));
        }
        Ok(PlaneSpec {
            point,
            normal: normal / n,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if (self.normal.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "plane normal must have unit length, got |n| = {}",
                self.normal.norm()
            )));
        }
        Ok(())
    }

    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        (p - self.point).dot(&self.normal)
    }

    /// Orthonormal in-plane basis `(u, v)` with `u x v = normal`.
    pub fn basis(&self) -> (Vec3, Vec3) {
        let n = self.normal;
        let helper = if n.x.abs() <= n.y.abs() && n.x.abs() <= n.z.abs() {
            Vec3::x()
        } else if n.y.abs() <= n.z.abs() {
            Vec3::y()
        } else {
            Vec3::z()
        };
        let u = (helper - n * helper.dot(&n)).normalize();
        let v = n.cross(&u);
        (u, v)
    }

    /// Voxels whose centers lie within `h/2` of the plane.
    pub fn rasterize(&self, lat: &Lattice) -> VoxelMask {
        let half = 0.5 * lat.h();
        VoxelMask::from_fn(*lat, |idx| {
            self.signed_distance(&lat.position(idx)).abs() <= half
        })
    }
}

/// Ordered points on a plane; closed contours connect last to first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub points: Vec<Vec3>,
    pub closed: bool,
}

impl Contour {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Contours with fewer points than [`DEGENERATE_CONTOUR_POINTS`].
    pub fn is_degenerate(&self) -> bool {
        self.points.len() < DEGENERATE_CONTOUR_POINTS
    }

    pub fn perimeter(&self) -> f64 {
        let n = self.points.len();
        let open: f64 = self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        if self.closed && n > 1 {
            open + (self.points[0] - self.points[n - 1]).norm()
        } else {
            open
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathStatus {
    /// Reached the zero set.
    Converged,
    /// Gradient vanished before the zero set.
    Stalled,
    /// Action stopped decreasing even with reduced steps.
    NoDescent,
    /// Iteration budget exhausted.
    MaxIterations,
    /// Seed not inside the accepted region.
    OutsideMap,
}

/// A minimal path from a contour seed down to the zero set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub points: Vec<Vec3>,
    pub actions: Vec<f64>,
    pub status: PathStatus,
}

impl Path {
    pub fn converged(&self) -> bool {
        self.status == PathStatus::Converged
    }

    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }
}

/// Provenance attached to a network.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NetworkProvenance {
    pub scheme: String,
    pub metric_id: u64,
}

/// One path per contour seed, in seed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathNetwork {
    pub paths: Vec<Path>,
    pub provenance: NetworkProvenance,
}

impl PathNetwork {
    pub fn new(paths: Vec<Path>) -> Self {
        PathNetwork {
            paths,
            provenance: NetworkProvenance::default(),
        }
    }

    pub fn failed(&self) -> usize {
        self.paths.iter().filter(|p| !p.converged()).count()
    }

    pub fn point_count(&self) -> usize {
        self.paths.iter().map(|p| p.points.len()).sum()
    }
}
