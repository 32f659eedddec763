//! Network energy, analytic surface masks and surface coverage.

use super::PathNetwork;
use crate::grid::{trilinear_sample, Lattice, ScalarField3, VoxelMask};
use crate::par::Parallelism;
use crate::phantom::EllipsoidSpec;
use crate::{Error, Result, Vec3};

/// `sum over paths of the integral of phi ds`, with phi sampled at segment
/// midpoints.
pub fn network_energy(net: &PathNetwork, phi: &ScalarField3) -> Result<f64> {
    let mut total = 0.0;
    for path in &net.paths {
        for w in path.points.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            total += trilinear_sample(phi, &mid)? * (w[1] - w[0]).norm();
        }
    }
    Ok(total)
}

/// Voxels whose centers lie within `h/2` of the boundary of the union of
/// ellipsoids.
///
/// Distances use the first-order estimate `(rho - 1) / |grad rho|` of each
/// ellipsoid's normalized radius `rho`, which is exact for spheres; the union
/// takes the minimum, so boundaries nested inside another ellipsoid are not
/// marked.
pub fn reference_surface_mask(specs: &[EllipsoidSpec], lattice: &Lattice) -> VoxelMask {
    let half = 0.5 * lattice.h();
    VoxelMask::from_fn(*lattice, |idx| {
        let p = lattice.position(idx);
        let d = specs
            .iter()
            .map(|s| s.signed_distance_estimate(&p))
            .fold(f64::INFINITY, f64::min);
        d.abs() <= half
    })
}

fn point_segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + t * ab)).norm()
}

/// Uniform bucket grid over segments for radius queries.
struct SegmentIndex {
    segments: Vec<(Vec3, Vec3)>,
    origin: Vec3,
    cell: f64,
    dims: [usize; 3],
    buckets: Vec<Vec<u32>>,
}

impl SegmentIndex {
    fn new(net: &PathNetwork, lattice: &Lattice, radius: f64) -> Self {
        let mut segments = Vec::new();
        for path in &net.paths {
            match path.points.len() {
                0 => {}
                1 => segments.push((path.points[0], path.points[0])),
                _ => segments.extend(path.points.windows(2).map(|w| (w[0], w[1]))),
            }
        }
        let cell = (4.0 * lattice.h()).max(radius);
        let origin = Vec3::from(lattice.origin) - Vec3::repeat(cell);
        let dims = [0, 1, 2].map(|a| {
            ((lattice.dims[a] as f64 * lattice.spacing[a]) / cell).ceil() as usize + 3
        });
        let mut buckets = vec![Vec::new(); dims[0] * dims[1] * dims[2]];
        let clamp_cell = |v: f64, a: usize| -> usize {
            (((v - origin[a]) / cell).floor().max(0.0) as usize).min(dims[a] - 1)
        };
        for (s, (a, b)) in segments.iter().enumerate() {
            let lo = [0, 1, 2].map(|k| clamp_cell(a[k].min(b[k]) - radius, k));
            let hi = [0, 1, 2].map(|k| clamp_cell(a[k].max(b[k]) + radius, k));
            for k in lo[2]..=hi[2] {
                for j in lo[1]..=hi[1] {
                    for i in lo[0]..=hi[0] {
                        buckets[i + dims[0] * (j + dims[1] * k)].push(s as u32);
                    }
                }
            }
        }
        SegmentIndex {
            segments,
            origin,
            cell,
            dims,
            buckets,
        }
    }

    fn within(&self, p: &Vec3, radius: f64) -> bool {
        let mut c = [0usize; 3];
        for a in 0..3 {
            let v = ((p[a] - self.origin[a]) / self.cell).floor();
            if v < 0.0 || v as usize >= self.dims[a] {
                return false;
            }
            c[a] = v as usize;
        }
        self.buckets[c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])]
            .iter()
            .any(|&s| {
                let (a, b) = &self.segments[s as usize];
                point_segment_distance(p, a, b) <= radius
            })
    }
}

/// Fraction of surface voxels whose center lies within `radius` of any path
/// segment.
pub fn surface_coverage(net: &PathNetwork, surface: &VoxelMask, radius: f64) -> Result<f64> {
    surface_coverage_with(net, surface, radius, Parallelism::default())
}

pub fn surface_coverage_with(
    net: &PathNetwork,
    surface: &VoxelMask,
    radius: f64,
    par: Parallelism,
) -> Result<f64> {
    if !(radius >= 0.0) {
        return Err(Error::invalid("coverage radius must be non-negative"));
    }
    let voxels = surface.indices();
    if voxels.is_empty() {
        return Err(Error::invalid("surface mask is empty"));
    }
    let lat = surface.lattice;
    let index = SegmentIndex::new(net, &lat, radius);
    let hits = par.map_slice(&voxels, |&l| index.within(&lat.position(lat.coords(l)), radius));
    let covered = hits.iter().filter(|&&h| h).count();
    Ok(covered as f64 / voxels.len() as f64)
}
