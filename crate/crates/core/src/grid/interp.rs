//! Trilinear interpolation of values and of per-corner gradients.

use super::diff::gradient_with;
use super::{AllVoxels, Lattice, ScalarField3, VoxelSet};
use crate::{Error, Result, Vec3};

/// The eight corners of the cell containing a point with their weights.
pub(crate) fn cell_corners(lat: &Lattice, p: &Vec3) -> Option<[([usize; 3], f64); 8]> {
    if !lat.contains_point(p) {
        return None;
    }
    let c = lat.to_voxel(p);
    let mut base = [0usize; 3];
    let mut frac = [0.0f64; 3];
    for a in 0..3 {
        let n = lat.dims[a];
        if n == 1 {
            base[a] = 0;
            frac[a] = 0.0;
            continue;
        }
        let x = c[a].clamp(0.0, (n - 1) as f64);
        let b = (x.floor() as usize).min(n - 2);
        base[a] = b;
        frac[a] = x - b as f64;
    }
    let mut out = [([0usize; 3], 0.0); 8];
    for (k, slot) in out.iter_mut().enumerate() {
        let mut idx = base;
        let mut w = 1.0;
        for a in 0..3 {
            let bit = (k >> a) & 1;
            if lat.dims[a] == 1 {
                if bit == 1 {
                    w = 0.0;
                }
                continue;
            }
            idx[a] += bit;
            w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
        }
        *slot = (idx, w);
    }
    Some(out)
}

/// Trilinear interpolation over the usable corners, with weights
/// renormalized when some corners are excluded. `None` if the point is
/// outside or no corner with positive weight is usable.
pub(crate) fn sample_masked<M, V>(lat: &Lattice, p: &Vec3, mask: &M, value: &V) -> Option<f64>
where
    M: VoxelSet + ?Sized,
    V: Fn(usize) -> f64,
{
    let corners = cell_corners(lat, p)?;
    let mut acc = 0.0;
    let mut wsum = 0.0;
    for (idx, w) in corners {
        if w == 0.0 {
            continue;
        }
        let l = lat.linear(idx);
        if mask.contains(l) {
            acc += w * value(l);
            wsum += w;
        }
    }
    (wsum > 0.0).then(|| if wsum == 1.0 { acc } else { acc / wsum })
}

/// Trilinear interpolation of per-corner finite-difference gradients over
/// the usable corners.
pub(crate) fn gradient_masked<M, V>(lat: &Lattice, p: &Vec3, mask: &M, value: &V) -> Option<Vec3>
where
    M: VoxelSet + ?Sized,
    V: Fn(usize) -> f64,
{
    let corners = cell_corners(lat, p)?;
    let mut acc = Vec3::zeros();
    let mut wsum = 0.0;
    for (idx, w) in corners {
        if w == 0.0 {
            continue;
        }
        if mask.contains(lat.linear(idx)) {
            acc += w * gradient_with(lat, idx, mask, value);
            wsum += w;
        }
    }
    (wsum > 0.0).then(|| acc / wsum)
}

/// Trilinear interpolation of `field` at a world point.
pub fn trilinear_sample(field: &ScalarField3, point: &Vec3) -> Result<f64> {
    let value = |l: usize| field.values[l];
    sample_masked(&field.lattice, point, &AllVoxels, &value).ok_or(Error::PointOutside {
        point: [point.x, point.y, point.z],
    })
}

/// Trilinear interpolation of the per-corner central-difference gradients.
pub fn trilinear_gradient(field: &ScalarField3, point: &Vec3) -> Result<Vec3> {
    let value = |l: usize| field.values[l];
    gradient_masked(&field.lattice, point, &AllVoxels, &value).ok_or(Error::PointOutside {
        point: [point.x, point.y, point.z],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lattice() -> Lattice {
        Lattice::new([10, 8, 6], [1.0, 0.5, 2.0], [-1.0, 0.0, 3.0]).unwrap()
    }

    #[test]
    fn reproduces_lattice_values() {
        let f = ScalarField3::from_fn(lattice(), |p| p.x * p.y + p.z.sin());
        for idx in [[0, 0, 0], [3, 4, 2], [9, 7, 5]] {
            let p = f.lattice.position(idx);
            assert_eq!(trilinear_sample(&f, &p).unwrap(), f.get(idx));
        }
    }

    #[test]
    fn distance_field_sample() {
        let l = Lattice::unit([12, 3, 3]).unwrap();
        let f = ScalarField3::from_fn(l, |p| (p - Vec3::new(0.0, 1.0, 1.0)).norm());
        let v = trilinear_sample(&f, &Vec3::new(4.5, 1.0, 1.0)).unwrap();
        assert!((v - 4.5).abs() < 0.05);
    }

    #[test]
    fn outside_is_error() {
        let f = ScalarField3::filled(lattice(), 1.0);
        assert!(trilinear_sample(&f, &Vec3::new(-2.0, 0.0, 4.0)).is_err());
        assert!(trilinear_gradient(&f, &Vec3::new(0.0, 100.0, 4.0)).is_err());
    }

    #[test]
    fn masked_sample_skips_excluded_corners() {
        let l = Lattice::unit([2, 2, 2]).unwrap();
        let values = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, f64::INFINITY];
        let value = |i: usize| values[i];
        let finite = |i: usize| values[i].is_finite();
        let v = sample_masked(&l, &Vec3::new(0.5, 0.5, 0.5), &finite, &value).unwrap();
        assert_eq!(v, 1.0);
    }

    proptest! {
        #[test]
        fn affine_fields_are_exact(
            a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64, d in -5.0..5.0f64,
            u in 0.0..1.0f64, v in 0.0..1.0f64, w in 0.0..1.0f64,
        ) {
            let lat = lattice();
            let f = ScalarField3::from_fn(lat, |p| a * p.x + b * p.y + c * p.z + d);
            let p = Vec3::new(-1.0 + 9.0 * u, 3.5 * v, 3.0 + 10.0 * w);
            let s = trilinear_sample(&f, &p).unwrap();
            prop_assert!((s - (a * p.x + b * p.y + c * p.z + d)).abs() < 1e-11);
            let g = trilinear_gradient(&f, &p).unwrap();
            prop_assert!((g - Vec3::new(a, b, c)).norm() < 1e-11);
        }
    }
}
