//! Synthetic test volumes and the isotropic image metric.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::grid::{gradient_at, Lattice, ScalarField3};
use crate::par::Parallelism;
use crate::{Error, Result, Vec3};

/// Smallest admissible phantom size per axis.
pub const MIN_PHANTOM_DIM: usize = 16;

/// An ellipsoid with linearly shaded interior intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidSpec {
    /// World coordinates.
    pub center: Vec3,
    pub semi_axes: Vec3,
    pub intensity_base: f64,
    /// Intensity change per world unit away from the center.
    #[serde(default = "Vec3::zeros")]
    pub intensity_gradient: Vec3,
}

impl EllipsoidSpec {
    pub fn validate(&self) -> Result<()> {
        if self.semi_axes.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::invalid("ellipsoid semi-axes must be positive"));
        }
        if !(0.0..=1.0).contains(&self.intensity_base) {
            return Err(Error::invalid("ellipsoid base intensity must lie in [0, 1]"));
        }
        if self.center.iter().chain(self.intensity_gradient.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("ellipsoid center and shading must be finite"));
        }
        Ok(())
    }

    /// Normalized radius `sqrt(sum(((p - c) / a)^2))`; `<= 1` inside.
    pub fn rho(&self, p: &Vec3) -> f64 {
        (p - self.center).component_div(&self.semi_axes).norm()
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        self.rho(p) <= 1.0
    }

    /// Shaded intensity at `p`, clipped to `[0, 1]`.
    pub fn shade(&self, p: &Vec3) -> f64 {
        (self.intensity_base + self.intensity_gradient.dot(&(p - self.center))).clamp(0.0, 1.0)
    }

    /// First-order signed distance `(rho - 1) / |grad rho|`; exact for
    /// spheres, negative inside.
    pub fn signed_distance_estimate(&self, p: &Vec3) -> f64 {
        let d = p - self.center;
        let rho = self.rho(p);
        if rho == 0.0 {
            return -self.semi_axes.min();
        }
        let a2 = self.semi_axes.component_mul(&self.semi_axes);
        let grad = d.component_div(&a2) / rho;
        (rho - 1.0) / grad.norm()
    }
}

/// The default two-ellipsoid phantom, placed relative to the grid center.
pub fn default_specs(lattice: &Lattice) -> Vec<EllipsoidSpec> {
    let c = lattice.position([0, 0, 0])
        + 0.5 * Vec3::new(
            (lattice.dims[0] - 1) as f64 * lattice.spacing[0],
            (lattice.dims[1] - 1) as f64 * lattice.spacing[1],
            (lattice.dims[2] - 1) as f64 * lattice.spacing[2],
        );
    let h = lattice.h();
    vec![
        EllipsoidSpec {
            center: c + h * Vec3::new(-10.0, 0.0, 0.0),
            semi_axes: h * Vec3::new(18.0, 12.0, 10.0),
            intensity_base: 0.8,
            intensity_gradient: Vec3::new(0.003, 0.002, 0.0) / h,
        },
        EllipsoidSpec {
            center: c + h * Vec3::new(14.0, 2.0, -1.0),
            semi_axes: h * Vec3::new(12.0, 10.0, 8.0),
            intensity_base: 0.6,
            intensity_gradient: Vec3::new(-0.002, 0.0, 0.003) / h,
        },
    ]
}

/// Union of shaded ellipsoids plus seeded additive Gaussian noise, clipped
/// to `[0, 1]`.
pub fn make_phantom(
    specs: &[EllipsoidSpec],
    lattice: &Lattice,
    noise_sigma: f64,
    seed: u64,
) -> Result<ScalarField3> {
    make_phantom_with(specs, lattice, noise_sigma, seed, Parallelism::default())
}

pub fn make_phantom_with(
    specs: &[EllipsoidSpec],
    lattice: &Lattice,
    noise_sigma: f64,
    seed: u64,
    par: Parallelism,
) -> Result<ScalarField3> {
    if specs.is_empty() {
        return Err(Error::invalid("phantom needs at least one ellipsoid"));
    }
    for s in specs {
        s.validate()?;
    }
    if lattice.dims.iter().any(|&d| d < MIN_PHANTOM_DIM) {
        return Err(Error::invalid(format!(
            "phantom dims must be at least {MIN_PHANTOM_DIM} per axis, got {:?}",
            lattice.dims
        )));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::invalid("noise sigma must be non-negative"));
    }
    let base_rng = ChaCha8Rng::seed_from_u64(seed);
    let values = par.map_range(lattice.len(), |lin| {
        let p = lattice.position(lattice.coords(lin));
        let clean = specs
            .iter()
            .filter(|s| s.contains(&p))
            .map(|s| s.shade(&p))
            .fold(0.0, f64::max);
        let noise = if noise_sigma > 0.0 {
            // one independent stream per voxel keeps the result order-free
            let mut rng = base_rng.clone();
            rng.set_stream(lin as u64);
            let z: f64 = StandardNormal.sample(&mut rng);
            noise_sigma * z
        } else {
            0.0
        };
        (clean + noise).clamp(0.0, 1.0)
    });
    ScalarField3::new(*lattice, values)
}

/// `|grad I|` at every voxel (central differences, one-sided at borders).
pub fn gradient_magnitude(intensity: &ScalarField3) -> ScalarField3 {
    gradient_magnitude_with(intensity, Parallelism::default())
}

pub fn gradient_magnitude_with(intensity: &ScalarField3, par: Parallelism) -> ScalarField3 {
    let lat = intensity.lattice;
    let values = par.map_range(lat.len(), |lin| {
        gradient_at(intensity, lat.coords(lin), None)
            .map(|g| g.norm())
            .unwrap_or(0.0)
    });
    ScalarField3 { lattice: lat, values }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricVariant {
    /// `alpha + (1 - alpha) * exp(-beta |grad I|)`: 1 in flat regions, `alpha`
    /// at strong edges.
    #[default]
    ConvexCombination,
    /// `alpha + (1 - alpha * exp(-beta |grad I|))`, grows with the gradient.
    Unscaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub variant: MetricVariant,
    #[serde(default = "default_floor")]
    pub epsilon_floor: f64,
}

fn default_floor() -> f64 {
    1e-6
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams {
            alpha: 0.01,
            beta: 14.0,
            variant: MetricVariant::ConvexCombination,
            epsilon_floor: default_floor(),
        }
    }
}

impl MetricParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.epsilon_floor > 0.0) {
            return Err(Error::invalid("epsilon_floor must be positive"));
        }
        Ok(())
    }

    /// Metric value for a gradient magnitude.
    pub fn phi(&self, grad_mag: f64) -> f64 {
        let e = (-self.beta * grad_mag).exp();
        let phi = match self.variant {
            MetricVariant::ConvexCombination => self.alpha + (1.0 - self.alpha) * e,
            MetricVariant::Unscaled => self.alpha + (1.0 - self.alpha * e),
        };
        phi.max(self.epsilon_floor)
    }
}

/// Isotropic metric `phi(|grad I|)` of an intensity volume in `[0, 1]`.
pub fn build_metric(intensity: &ScalarField3, params: &MetricParams) -> Result<ScalarField3> {
    build_metric_with(intensity, params, Parallelism::default())
}

pub fn build_metric_with(
    intensity: &ScalarField3,
    params: &MetricParams,
    par: Parallelism,
) -> Result<ScalarField3> {
    params.validate()?;
    if let Some(v) = intensity
        .values
        .iter()
        .find(|v| !(**v >= -1e-12 && **v <= 1.0 + 1e-12))
    {
        return Err(Error::invalid(format!("intensity must lie in [0, 1], found {v}")));
    }
    let mut g = gradient_magnitude_with(intensity, par);
    for v in &mut g.values {
        *v = params.phi(*v);
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(c: Vec3, r: f64, base: f64) -> EllipsoidSpec {
        EllipsoidSpec {
            center: c,
            semi_axes: Vec3::repeat(r),
            intensity_base: base,
            intensity_gradient: Vec3::zeros(),
        }
    }

    #[test]
    fn noiseless_sphere() {
        let l = Lattice::unit([24, 24, 24]).unwrap();
        let f = make_phantom(&[sphere(Vec3::repeat(12.0), 6.0, 0.7)], &l, 0.0, 1).unwrap();
        assert_eq!(f.get([12, 12, 12]), 0.7);
        assert_eq!(f.get([0, 0, 0]), 0.0);
        assert_eq!(f.get([23, 23, 23]), 0.0);
    }

    #[test]
    fn phantom_is_deterministic_and_order_free() {
        let l = Lattice::unit([20, 18, 16]).unwrap();
        let specs = default_specs(&l);
        let a = make_phantom_with(&specs, &l, 0.05, 42, Parallelism::Sequential).unwrap();
        let b = make_phantom_with(&specs, &l, 0.05, 42, Parallelism::Parallel).unwrap();
        assert_eq!(a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                   b.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        let c = make_phantom(&specs, &l, 0.05, 43).unwrap();
        assert_ne!(a, c);
        assert!(a.values.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn phantom_errors() {
        let l = Lattice::unit([16, 16, 16]).unwrap();
        assert!(make_phantom(&[], &l, 0.0, 0).is_err());
        let small = Lattice::unit([8, 16, 16]).unwrap();
        assert!(make_phantom(&[sphere(Vec3::repeat(4.0), 2.0, 0.5)], &small, 0.0, 0).is_err());
        assert!(make_phantom(&[sphere(Vec3::repeat(4.0), 2.0, 0.5)], &l, -0.1, 0).is_err());
    }

    #[test]
    fn two_mode_histogram() {
        let l = Lattice::unit([40, 40, 40]).unwrap();
        let specs = vec![
            sphere(Vec3::new(16.0, 20.0, 20.0), 9.0, 0.8),
            sphere(Vec3::new(26.0, 20.0, 20.0), 7.0, 0.5),
        ];
        let f = make_phantom(&specs, &l, 0.02, 7).unwrap();
        // bins centered on multiples of 0.05
        let mut hist = [0usize; 21];
        for &v in &f.values {
            hist[(v * 20.0).round() as usize] += 1;
        }
        // local maxima with a meaningful population
        let total = f.values.len();
        let modes: Vec<usize> = (0..21)
            .filter(|&b| {
                let left = if b > 0 { hist[b - 1] } else { 0 };
                let right = if b < 20 { hist[b + 1] } else { 0 };
                hist[b] > left && hist[b] >= right && hist[b] * 200 > total
            })
            .collect();
        // background near 0; objects at 0.5 and 0.8 (bins 10 and 16)
        assert_eq!(modes[0], 0);
        assert!(modes.contains(&16), "{modes:?} {hist:?}");
        assert!(modes.contains(&10), "{modes:?} {hist:?}");
        assert_eq!(modes.len(), 3, "{modes:?} {hist:?}");
    }

    #[test]
    fn gradient_magnitude_examples() {
        let l = Lattice::unit([8, 8, 8]).unwrap();
        let flat = ScalarField3::filled(l, 0.3);
        assert!(gradient_magnitude(&flat).values.iter().all(|&v| v == 0.0));
        let ramp = ScalarField3::from_fn(l, |p| p.x);
        assert!(gradient_magnitude(&ramp).values.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let step = ScalarField3::from_fn(l, |p| if p.x >= 4.0 { 1.0 } else { 0.0 });
        let g = gradient_magnitude(&step);
        assert_eq!(g.get([3, 4, 4]), 0.5);
        assert_eq!(g.get([4, 4, 4]), 0.5);
        assert_eq!(g.get([2, 4, 4]), 0.0);
        assert_eq!(g.get([5, 4, 4]), 0.0);
    }

    #[test]
    fn metric_formulas() {
        let p = MetricParams::default();
        assert!((p.phi(0.0) - 1.0).abs() < 1e-15);
        assert!((p.phi(1e6) - 0.01).abs() < 1e-15);
        let lit = MetricParams {
            variant: MetricVariant::Unscaled,
            ..p
        };
        assert!((lit.phi(0.0) - 1.0).abs() < 1e-15);
        assert!((lit.phi(1e6) - 1.01).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for k in 0..200 {
            let v = p.phi(k as f64 * 0.01);
            assert!(v <= prev && v >= p.epsilon_floor);
            prev = v;
        }
    }

    #[test]
    fn metric_validation() {
        let l = Lattice::unit([4, 4, 4]).unwrap();
        let f = ScalarField3::filled(l, 0.5);
        for (alpha, beta) in [(0.0, 14.0), (1.0, 14.0), (0.5, 0.0), (0.5, -1.0)] {
            let p = MetricParams {
                alpha,
                beta,
                ..Default::default()
            };
            assert!(build_metric(&f, &p).is_err());
        }
        let bad = ScalarField3::filled(l, 1.5);
        assert!(build_metric(&bad, &MetricParams::default()).is_err());
        let m = build_metric(&f, &MetricParams::default()).unwrap();
        assert!(m.values.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }
}
