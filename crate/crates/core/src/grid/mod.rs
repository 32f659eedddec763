//! Voxel lattices, fields defined on them, and finite-difference operators.
//!
//! Linear indices run x fastest, then y, then z, so ordering by linear index
//! is lexicographic ordering by `(z, y, x)`.

mod diff;
mod interp;

pub use diff::{
    divergence_at, gradient_at, normal_at, sum_curvature_at, unit_normal_field, CurvatureOptions,
    CurvatureSample,
};
pub use interp::{trilinear_gradient, trilinear_sample};

/// Mask-aware building blocks shared with the solver and the tracer.
pub(crate) mod diff_internals {
    pub(crate) use super::diff::{front_curvature_with, sum_curvature_with};
    pub(crate) use super::interp::{gradient_masked, sample_masked};
}

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vec3};

/// Lattice metadata shared by every field type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl Lattice {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::invalid(format!("dims must be positive, got {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::invalid(format!(
                "spacing must be strictly positive, got {spacing:?}"
            )));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::invalid("origin must be finite"));
        }
        Ok(Lattice {
            dims,
            spacing,
            origin,
        })
    }

    /// Unit spacing, zero origin.
    pub fn unit(dims: [usize; 3]) -> Result<Self> {
        Self::new(dims, [1.0; 3], [0.0; 3])
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Smallest spacing component, used as the nominal voxel size `h`.
    pub fn h(&self) -> f64 {
        self.spacing.iter().copied().fold(f64::INFINITY, f64::min)
    }

    #[inline]
    pub fn linear(&self, [i, j, k]: [usize; 3]) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, lin: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [lin % nx, (lin / nx) % ny, lin / (nx * ny)]
    }

    /// Checked conversion of a signed index.
    #[inline]
    pub fn checked(&self, idx: [i64; 3]) -> Option<[usize; 3]> {
        let mut out = [0usize; 3];
        for a in 0..3 {
            if idx[a] < 0 || idx[a] as usize >= self.dims[a] {
                return None;
            }
            out[a] = idx[a] as usize;
        }
        Some(out)
    }

    pub fn require(&self, idx: [usize; 3]) -> Result<()> {
        if (0..3).all(|a| idx[a] < self.dims[a]) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                index: idx.map(|v| v as i64),
                dims: self.dims,
            })
        }
    }

    /// World position of a voxel center.
    #[inline]
    pub fn position(&self, idx: [usize; 3]) -> Vec3 {
        Vec3::new(
            self.origin[0] + idx[0] as f64 * self.spacing[0],
            self.origin[1] + idx[1] as f64 * self.spacing[1],
            self.origin[2] + idx[2] as f64 * self.spacing[2],
        )
    }

    /// Continuous voxel coordinates of a world point.
    #[inline]
    pub fn to_voxel(&self, p: &Vec3) -> Vec3 {
        Vec3::new(
            (p[0] - self.origin[0]) / self.spacing[0],
            (p[1] - self.origin[1]) / self.spacing[1],
            (p[2] - self.origin[2]) / self.spacing[2],
        )
    }

    /// Whether a world point lies inside the closed bounding box of voxel centers.
    pub fn contains_point(&self, p: &Vec3) -> bool {
        let c = self.to_voxel(p);
        (0..3).all(|a| c[a] >= -1e-9 && c[a] <= (self.dims[a] - 1) as f64 + 1e-9)
    }

    /// Nearest voxel to a world point, if inside the grid.
    pub fn nearest_voxel(&self, p: &Vec3) -> Option<[usize; 3]> {
        let c = self.to_voxel(p);
        self.checked([
            c[0].round() as i64,
            c[1].round() as i64,
            c[2].round() as i64,
        ])
    }
}

/// Membership test over linear voxel indices.
pub trait VoxelSet {
    fn contains(&self, lin: usize) -> bool;
}

/// Every voxel of the lattice.
#[derive(Debug, Clone, Copy)]
pub struct AllVoxels;

impl VoxelSet for AllVoxels {
    #[inline]
    fn contains(&self, _lin: usize) -> bool {
        true
    }
}

impl<F: Fn(usize) -> bool> VoxelSet for F {
    #[inline]
    fn contains(&self, lin: usize) -> bool {
        self(lin)
    }
}

/// A 3D lattice of scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField3 {
    pub lattice: Lattice,
    pub values: Vec<f64>,
}

impl ScalarField3 {
    pub fn new(lattice: Lattice, values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(Error::invalid(format!(
                "value count {} does not match dims {:?}",
                values.len(),
                lattice.dims
            )));
        }
        Ok(ScalarField3 { lattice, values })
    }

    pub fn filled(lattice: Lattice, value: f64) -> Self {
        ScalarField3 {
            lattice,
            values: vec![value; lattice.len()],
        }
    }

    /// Evaluate `f` at every voxel center.
    pub fn from_fn(lattice: Lattice, f: impl Fn(Vec3) -> f64) -> Self {
        let values = (0..lattice.len())
            .map(|lin| f(lattice.position(lattice.coords(lin))))
            .collect();
        ScalarField3 { lattice, values }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.lattice.dims
    }

    #[inline]
    pub fn get(&self, idx: [usize; 3]) -> f64 {
        self.values[self.lattice.linear(idx)]
    }

    #[inline]
    pub fn set(&mut self, idx: [usize; 3], v: f64) {
        let lin = self.lattice.linear(idx);
        self.values[lin] = v;
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// FNV-1a hash of lattice and value bits, used as a provenance id.
    pub fn fingerprint(&self) -> u64 {
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |bits: u64| {
            for b in bits.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(PRIME);
            }
        };
        for a in 0..3 {
            feed(self.lattice.dims[a] as u64);
            feed(self.lattice.spacing[a].to_bits());
            feed(self.lattice.origin[a].to_bits());
        }
        for v in &self.values {
            feed(v.to_bits());
        }
        h
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// One 3-vector per voxel. Unit-normal fields store the zero vector where
/// the normal is undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct Vec3Field {
    pub lattice: Lattice,
    pub values: Vec<Vec3>,
}

impl Vec3Field {
    pub fn new(lattice: Lattice, values: Vec<Vec3>) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(Error::invalid(format!(
                "vector count {} does not match dims {:?}",
                values.len(),
                lattice.dims
            )));
        }
        Ok(Vec3Field { lattice, values })
    }

    pub fn from_fn(lattice: Lattice, f: impl Fn(Vec3) -> Vec3) -> Self {
        let values = (0..lattice.len())
            .map(|lin| f(lattice.position(lattice.coords(lin))))
            .collect();
        Vec3Field { lattice, values }
    }

    #[inline]
    pub fn get(&self, idx: [usize; 3]) -> Vec3 {
        self.values[self.lattice.linear(idx)]
    }

    /// Voxels holding a non-zero vector.
    pub fn defined_mask(&self) -> VoxelMask {
        VoxelMask {
            lattice: self.lattice,
            bits: self.values.iter().map(|v| v.norm_squared() > 0.0).collect(),
        }
    }
}

/// One boolean per voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelMask {
    pub lattice: Lattice,
    pub bits: Vec<bool>,
}

impl VoxelMask {
    pub fn empty(lattice: Lattice) -> Self {
        VoxelMask {
            lattice,
            bits: vec![false; lattice.len()],
        }
    }

    pub fn from_fn(lattice: Lattice, f: impl Fn([usize; 3]) -> bool) -> Self {
        let bits = (0..lattice.len()).map(|lin| f(lattice.coords(lin))).collect();
        VoxelMask { lattice, bits }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    #[inline]
    pub fn get(&self, idx: [usize; 3]) -> bool {
        self.bits[self.lattice.linear(idx)]
    }

    pub fn set(&mut self, idx: [usize; 3], v: bool) {
        let lin = self.lattice.linear(idx);
        self.bits[lin] = v;
    }

    /// Linear indices of set voxels, ascending.
    pub fn indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }
}

impl VoxelSet for VoxelMask {
    #[inline]
    fn contains(&self, lin: usize) -> bool {
        self.bits[lin]
    }
}
