//! Finite differences on lattices: gradients, divergence and level-set
//! curvature.
//!
//! Stencils are central where both neighbors on an axis are usable, one-sided
//! against the center voxel where only one is, and undefined otherwise.
//! "Usable" means inside the grid and inside the supplied voxel set.

use super::{AllVoxels, Lattice, ScalarField3, Vec3Field, VoxelMask, VoxelSet};
use crate::eikonal::ArrivalMap;
use crate::{Error, Result, Vec3};

/// Gradient magnitude below which a normal is undefined.
pub const NORMAL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureOptions {
    /// Curvatures are clamped to `[-kappa_clamp / h, kappa_clamp / h]`.
    pub kappa_clamp: f64,
    /// Pre-smooth action values with a 3x3x3 Gaussian (sigma 0.5 voxel)
    /// restricted to the usable set.
    pub smoothing: bool,
}

impl Default for CurvatureOptions {
    fn default() -> Self {
        CurvatureOptions {
            kappa_clamp: 0.5,
            smoothing: false,
        }
    }
}

/// Sum curvature `K_S = -div(m)` at one voxel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureSample {
    pub sum: f64,
    /// The stencil was unusable; `sum` is 0 and the caller should apply no
    /// correction.
    pub fallback: bool,
}

impl CurvatureSample {
    pub const FALLBACK: CurvatureSample = CurvatureSample {
        sum: 0.0,
        fallback: true,
    };

    /// Mean curvature `H = K_S / 2`.
    pub fn mean(&self) -> f64 {
        0.5 * self.sum
    }
}

#[inline]
fn neighbor(lat: &Lattice, idx: [usize; 3], axis: usize, step: i64) -> Option<usize> {
    let mut n = idx.map(|v| v as i64);
    n[axis] += step;
    lat.checked(n).map(|c| lat.linear(c))
}

/// Central / one-sided difference of `value` along `axis`, or `None` when
/// neither neighbor is usable.
#[inline]
fn axis_difference<M, V>(
    lat: &Lattice,
    idx: [usize; 3],
    axis: usize,
    mask: &M,
    value: &V,
) -> Option<f64>
where
    M: VoxelSet + ?Sized,
    V: Fn(usize) -> f64,
{
    let h = lat.spacing[axis];
    let plus = neighbor(lat, idx, axis, 1).filter(|&l| mask.contains(l));
    let minus = neighbor(lat, idx, axis, -1).filter(|&l| mask.contains(l));
    match (plus, minus) {
        (Some(p), Some(m)) => Some((value(p) - value(m)) / (2.0 * h)),
        (Some(p), None) => Some((value(p) - value(lat.linear(idx))) / h),
        (None, Some(m)) => Some((value(lat.linear(idx)) - value(m)) / h),
        (None, None) => None,
    }
}

/// Gradient of an arbitrary value source; axes without a usable neighbor
/// contribute zero.
pub(crate) fn gradient_with<M, V>(lat: &Lattice, idx: [usize; 3], mask: &M, value: &V) -> Vec3
where
    M: VoxelSet + ?Sized,
    V: Fn(usize) -> f64,
{
    let mut g = Vec3::zeros();
    for axis in 0..3 {
        g[axis] = axis_difference(lat, idx, axis, mask, value).unwrap_or(0.0);
    }
    g
}

/// Gradient of `field` at a voxel, optionally restricted to `mask`.
///
/// Returns the zero vector where no axis has a usable neighbor.
pub fn gradient_at(field: &ScalarField3, idx: [usize; 3], mask: Option<&VoxelMask>) -> Result<Vec3> {
    let lat = &field.lattice;
    lat.require(idx)?;
    let value = |l: usize| field.values[l];
    match mask {
        Some(m) => {
            if m.lattice.dims != lat.dims {
                return Err(Error::invalid("mask shape does not match field"));
            }
            if !m.get(idx) {
                return Err(Error::invalid(format!("voxel {idx:?} is outside the mask")));
            }
            Ok(gradient_with(lat, idx, m, &value))
        }
        None => Ok(gradient_with(lat, idx, &AllVoxels, &value)),
    }
}

/// 3x3x3 Gaussian smoothing (sigma = 0.5 voxel) over the usable neighbors.
pub(crate) fn smoothed_value<M, V>(lat: &Lattice, lin: usize, mask: &M, value: &V) -> f64
where
    M: VoxelSet + ?Sized,
    V: Fn(usize) -> f64,
{
    // exp(-d^2 / (2 sigma^2)) with sigma = 0.5 and d^2 in {0, 1, 2, 3}
    const W: [f64; 4] = [1.0, 0.135_335_283_236_612_7, 0.018_315_638_888_734_18, 0.002_478_752_176_666_358_4];
    let c = lat.coords(lin).map(|v| v as i64);
    let mut acc = 0.0;
    let mut wsum = 0.0;
    for dz in -1..=1i64 {
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                let Some(n) = lat.checked([c[0] + dx, c[1] + dy, c[2] + dz]) else {
                    continue;
                };
                let nl = lat.linear(n);
                if !mask.contains(nl) {
                    continue;
                }
                let w = W[(dx.abs() + dy.abs() + dz.abs()) as usize];
                acc += w * value(nl);
                wsum += w;
            }
        }
    }
    if wsum > 0.0 {
        acc / wsum
    } else {
        value(lin)
    }
}

/// Unit normal `grad S / |grad S|` at a voxel of the usable set.
pub(crate) fn normal_with<M, V>(lat: &Lattice, idx: [usize; 3], mask: &M, value: &V) -> Option<Vec3>
where
    M: VoxelSet + ?Sized,
    V: Fn(usize) -> f64,
{
    if !mask.contains(lat.linear(idx)) {
        return None;
    }
    let g = gradient_with(lat, idx, mask, value);
    let n = g.norm();
    (n >= NORMAL_EPS).then(|| g / n)
}

/// Unit normal of the level sets of `field` at `idx`, restricted to `mask`.
/// `None` where the normal is undefined.
pub fn normal_at(field: &ScalarField3, idx: [usize; 3], mask: &VoxelMask) -> Option<Vec3> {
    let value = |l: usize| field.values[l];
    normal_with(&field.lattice, idx, mask, &value)
}

/// Divergence of a vector field at a voxel. `None` when some axis has no
/// usable neighbor.
pub fn divergence_at(vf: &Vec3Field, idx: [usize; 3], mask: Option<&VoxelMask>) -> Result<Option<f64>> {
    let lat = &vf.lattice;
    lat.require(idx)?;
    let mut div = 0.0;
    for axis in 0..3 {
        let comp = |l: usize| vf.values[l][axis];
        let d = match mask {
            Some(m) => axis_difference(lat, idx, axis, m, &comp),
            None => axis_difference(lat, idx, axis, &AllVoxels, &comp),
        };
        match d {
            Some(d) => div += d,
            None => return Ok(None),
        }
    }
    Ok(Some(div))
}

/// Sum curvature at `idx` computed from the action values of the usable
/// set, evaluating the required normals on demand.
pub(crate) fn sum_curvature_with<M, V>(
    lat: &Lattice,
    idx: [usize; 3],
    mask: &M,
    value: &V,
    opts: &CurvatureOptions,
) -> CurvatureSample
where
    M: VoxelSet + ?Sized,
    V: Fn(usize) -> f64,
{
    if opts.smoothing {
        let smooth = |l: usize| smoothed_value(lat, l, mask, value);
        sum_curvature_raw(lat, idx, mask, &smooth, opts)
    } else {
        sum_curvature_raw(lat, idx, mask, value, opts)
    }
}

fn sum_curvature_raw<M, V>(
    lat: &Lattice,
    idx: [usize; 3],
    mask: &M,
    value: &V,
    opts: &CurvatureOptions,
) -> CurvatureSample
where
    M: VoxelSet + ?Sized,
    V: Fn(usize) -> f64,
{
    let Some(m0) = normal_with(lat, idx, mask, value) else {
        return CurvatureSample::FALLBACK;
    };
    let ii = idx.map(|v| v as i64);
    let normal_of = |axis: usize, step: i64| -> Option<Vec3> {
        let mut n = ii;
        n[axis] += step;
        let c = lat.checked(n)?;
        normal_with(lat, c, mask, value)
    };
    let mut div = 0.0;
    for axis in 0..3 {
        let h = lat.spacing[axis];
        let d = match (normal_of(axis, 1), normal_of(axis, -1)) {
            (Some(p), Some(m)) => (p[axis] - m[axis]) / (2.0 * h),
            (Some(p), None) => (p[axis] - m0[axis]) / h,
            (None, Some(m)) => (m0[axis] - m[axis]) / h,
            (None, None) => return CurvatureSample::FALLBACK,
        };
        div += d;
    }
    let k_max = opts.kappa_clamp / lat.h();
    CurvatureSample {
        sum: (-div).clamp(-k_max, k_max),
        fallback: false,
    }
}

/// Curvature of a freshly accepted front voxel: the mean of
/// [`sum_curvature_with`] over the usable voxels of its 5x5x5 block whose six
/// axis neighbors are all usable. Falls back when the voxel touches the zero
/// set.
///
/// Stencils at the front itself are one-sided and, on the faceted level
/// sets of a chamfer distance, frequently report the wrong sign. Behind the
/// front every stencil is complete, and averaging over two layers keeps the
/// correction from amplifying the facets.
/// Half-width of the block averaged by [`front_curvature_with`].
const FRONT_BLOCK: i64 = 2;

pub(crate) fn front_curvature_with<M, V>(
    lat: &Lattice,
    idx: [usize; 3],
    mask: &M,
    value: &V,
    opts: &CurvatureOptions,
) -> CurvatureSample
where
    M: VoxelSet + ?Sized,
    V: Fn(usize) -> f64,
{
    let complete = |c: [usize; 3]| {
        (0..3).all(|axis| {
            [1, -1]
                .iter()
                .all(|&st| neighbor(lat, c, axis, st).is_some_and(|l| mask.contains(l)))
        })
    };
    let ii = idx.map(|v| v as i64);
    let mut sum = 0.0;
    let mut count = 0usize;
    for dz in -FRONT_BLOCK..=FRONT_BLOCK {
        for dy in -FRONT_BLOCK..=FRONT_BLOCK {
            for dx in -FRONT_BLOCK..=FRONT_BLOCK {
                let Some(c) = lat.checked([ii[0] + dx, ii[1] + dy, ii[2] + dz]) else {
                    continue;
                };
                let l = lat.linear(c);
                if !mask.contains(l) {
                    continue;
                }
                // the zero set has no front geometry; right next to it the
                // front is not resolved yet
                if value(l) <= 0.0 {
                    if dx.abs() <= 1 && dy.abs() <= 1 && dz.abs() <= 1 {
                        return CurvatureSample::FALLBACK;
                    }
                    continue;
                }
                if !complete(c) {
                    continue;
                }
                let k = sum_curvature_with(lat, c, mask, value, opts);
                if !k.fallback {
                    sum += k.sum;
                    count += 1;
                }
            }
        }
    }
    if count == 0 {
        return CurvatureSample::FALLBACK;
    }
    CurvatureSample {
        sum: sum / count as f64,
        fallback: false,
    }
}

/// `K_S = -div(m)` of the accepted action map at `idx`, with the default
/// clamp of `0.5 / h`.
pub fn sum_curvature_at(action: &ArrivalMap, idx: [usize; 3]) -> Result<CurvatureSample> {
    action.lattice().require(idx)?;
    Ok(action.curvature_at(idx, &CurvatureOptions::default()))
}

/// Unit normals of the accepted region; zero where undefined.
pub fn unit_normal_field(action: &ArrivalMap) -> Vec3Field {
    let lat = *action.lattice();
    let accepted = |l: usize| action.is_accepted(l);
    let value = |l: usize| action.action.values[l];
    let values = (0..lat.len())
        .map(|lin| normal_with(&lat, lat.coords(lin), &accepted, &value).unwrap_or_else(Vec3::zeros))
        .collect();
    Vec3Field { lattice: lat, values }
}
