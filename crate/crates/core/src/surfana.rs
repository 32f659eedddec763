//! Analytic area relations for equidistant surfaces and quadrature of the
//! isotropic surface action. These are verification oracles rather than
//! solvers.

use serde::{Deserialize, Serialize};

use crate::grid::{trilinear_sample, ScalarField3};
use crate::paths::PathNetwork;
use crate::{Error, Result, Vec3};

/// Area ratio `|M(s)| / |M(0)| = 1 + s div(m) + s^2 K_G` of the surface
/// displaced by `s` along its unit normal. Exact for spheres.
pub fn equidistant_area_factor(div_m: f64, gaussian_curvature: f64, s: f64) -> f64 {
    1.0 + s * div_m + s * s * gaussian_curvature
}

/// First-order area ratio `1 - K_S ds` for an infinitesimal normal step.
pub fn immediate_area_ratio(sum_curvature: f64, ds: f64) -> f64 {
    1.0 - sum_curvature * ds
}

/// First-order rate `1 - H ds` of mean inter-path distances, `H = K_S / 2`.
pub fn mean_distance_rate(sum_curvature: f64, ds: f64) -> f64 {
    1.0 - 0.5 * sum_curvature * ds
}

/// `initial * exp(-integral)` where the integrand `K_S ds/dS` is sampled
/// uniformly over `[0, span]` and integrated with the trapezoid rule.
pub fn cumulative_area(initial: f64, integrand: &[f64], span: f64) -> Result<f64> {
    if integrand.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("integrand samples must be finite"));
    }
    let integral = match integrand.len() {
        0 | 1 => 0.0,
        n => {
            let dx = span / (n - 1) as f64;
            let inner: f64 = integrand[1..n - 1].iter().sum();
            dx * (0.5 * (integrand[0] + integrand[n - 1]) + inner)
        }
    };
    Ok(initial * (-integral).exp())
}

/// Samples `S(u, v)` of a parametric surface on a regular `nu x nv` grid,
/// u-major (`index = i * nv + j`).
#[derive(Debug, Clone)]
pub struct ParametricSurfaceSamples {
    pub nu: usize,
    pub nv: usize,
    pub u_range: (f64, f64),
    pub v_range: (f64, f64),
    pub positions: Vec<Vec3>,
    /// `S_u` and `S_v`; finite-differenced from positions when absent.
    pub partials: Option<(Vec<Vec3>, Vec<Vec3>)>,
}

impl ParametricSurfaceSamples {
    pub fn from_fn(
        nu: usize,
        nv: usize,
        u_range: (f64, f64),
        v_range: (f64, f64),
        f: impl Fn(f64, f64) -> Vec3,
    ) -> Result<Self> {
        if nu < 2 || nv < 2 {
            return Err(Error::invalid("need at least 2x2 surface samples"));
        }
        let du = (u_range.1 - u_range.0) / (nu - 1) as f64;
        let dv = (v_range.1 - v_range.0) / (nv - 1) as f64;
        let mut positions = Vec::with_capacity(nu * nv);
        for i in 0..nu {
            for j in 0..nv {
                positions.push(f(u_range.0 + i as f64 * du, v_range.0 + j as f64 * dv));
            }
        }
        Ok(ParametricSurfaceSamples {
            nu,
            nv,
            u_range,
            v_range,
            positions,
            partials: None,
        })
    }

    fn du(&self) -> f64 {
        (self.u_range.1 - self.u_range.0) / (self.nu - 1) as f64
    }

    fn dv(&self) -> f64 {
        (self.v_range.1 - self.v_range.0) / (self.nv - 1) as f64
    }

    /// `(S_u, S_v)` at every sample; central differences inside, one-sided at
    /// the parameter boundaries.
    pub fn tangents(&self) -> (Vec<Vec3>, Vec<Vec3>) {
        if let Some((su, sv)) = &self.partials {
            return (su.clone(), sv.clone());
        }
        let at = |i: usize, j: usize| self.positions[i * self.nv + j];
        let (du, dv) = (self.du(), self.dv());
        let diff = |lo: Vec3, hi: Vec3, span: f64| (hi - lo) / span;
        let mut su = Vec::with_capacity(self.positions.len());
        let mut sv = Vec::with_capacity(self.positions.len());
        for i in 0..self.nu {
            for j in 0..self.nv {
                su.push(match i {
                    0 => diff(at(0, j), at(1, j), du),
                    i if i == self.nu - 1 => diff(at(i - 1, j), at(i, j), du),
                    i => diff(at(i - 1, j), at(i + 1, j), 2.0 * du),
                });
                sv.push(match j {
                    0 => diff(at(i, 0), at(i, 1), dv),
                    j if j == self.nv - 1 => diff(at(i, j - 1), at(i, j), dv),
                    j => diff(at(i, j - 1), at(i, j + 1), 2.0 * dv),
                });
            }
        }
        (su, sv)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceElement {
    /// Orthogonal parameter lines: `|S_u| |S_v|`.
    ProductOfTangents,
    /// General form `|S_u x S_v|`.
    NormalMagnitude,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceAction {
    pub value: f64,
    pub element: SurfaceElement,
}

/// Tensor-product trapezoid quadrature of `Phi(S) dA` over the sampled
/// surface.
pub fn isotropic_surface_action(
    surf: &ParametricSurfaceSamples,
    phi: impl Fn(&Vec3) -> f64,
) -> Result<SurfaceAction> {
    let (su, sv) = surf.tangents();
    let (nu, nv) = (surf.nu, surf.nv);
    let mut orthogonal = true;
    for i in 0..nu {
        for j in 0..nv {
            let k = i * nv + j;
            let (a, b) = (su[k], sv[k]);
            let interior = i > 0 && i < nu - 1 && j > 0 && j < nv - 1;
            let n = a.cross(&b).norm();
            if interior && !(n > 1e-14 * (a.norm() * b.norm()).max(f64::MIN_POSITIVE)) {
                return Err(Error::invalid(format!("degenerate surface sample at ({i}, {j})")));
            }
            // one-sided boundary tangents are skewed by the discretization
            if interior && a.dot(&b).abs() > 1e-6 * a.norm() * b.norm() {
                orthogonal = false;
            }
        }
    }
    let element = if orthogonal {
        SurfaceElement::ProductOfTangents
    } else {
        SurfaceElement::NormalMagnitude
    };
    let weight = |idx: usize, n: usize| if idx == 0 || idx == n - 1 { 0.5 } else { 1.0 };
    let mut total = 0.0;
    for i in 0..nu {
        let wu = weight(i, nu);
        for j in 0..nv {
            let k = i * nv + j;
            let area = match element {
                SurfaceElement::ProductOfTangents => su[k].norm() * sv[k].norm(),
                SurfaceElement::NormalMagnitude => su[k].cross(&sv[k]).norm(),
            };
            total += wu * weight(j, nv) * phi(&surf.positions[k]) * area;
        }
    }
    Ok(SurfaceAction {
        value: total * surf.du() * surf.dv(),
        element,
    })
}

fn point_polyline_distance(p: &Vec3, line: &[Vec3]) -> f64 {
    match line.len() {
        0 => f64::INFINITY,
        1 => (p - line[0]).norm(),
        _ => line
            .windows(2)
            .map(|w| {
                let ab = w[1] - w[0];
                let len2 = ab.norm_squared();
                let t = if len2 > 0.0 { ((p - w[0]).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
                (p - (w[0] + t * ab)).norm()
            })
            .fold(f64::INFINITY, f64::min),
    }
}

/// Mean distance from the segment midpoints of `a` to the polyline `b`.
pub fn pair_spacing(a: &[Vec3], b: &[Vec3]) -> f64 {
    if a.len() < 2 {
        return a.first().map_or(f64::INFINITY, |p| point_polyline_distance(p, b));
    }
    let n = (a.len() - 1) as f64;
    a.windows(2)
        .map(|w| point_polyline_distance(&(0.5 * (w[0] + w[1])), b))
        .sum::<f64>()
        / n
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacingStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionResidual {
    /// Sum of path actions (no inter-path spacing factor).
    pub s_net: f64,
    /// Path segments weighted by the distance to the nearest other path.
    pub weighted_estimate: f64,
    pub spacing: Vec<SpacingStats>,
}

/// Compare the network energy with a surface-action estimate obtained by
/// weighting each segment with its nearest-neighbor path distance.
pub fn network_action_residual(net: &PathNetwork, phi: &ScalarField3) -> Result<ActionResidual> {
    if net.paths.len() < 8 {
        return Err(Error::invalid(format!(
            "action residual needs at least 8 paths, got {}",
            net.paths.len()
        )));
    }
    let mut s_net = 0.0;
    let mut weighted = 0.0;
    let mut spacing = Vec::with_capacity(net.paths.len());
    for (k, path) in net.paths.iter().enumerate() {
        let mut stats = SpacingStats {
            mean: 0.0,
            min: f64::INFINITY,
            max: 0.0,
        };
        let mut count = 0usize;
        for w in path.points.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let ds = (w[1] - w[0]).norm();
            let cost = trilinear_sample(phi, &mid)? * ds;
            let gap = net
                .paths
                .iter()
                .enumerate()
                .filter(|(m, _)| *m != k)
                .map(|(_, other)| point_polyline_distance(&mid, &other.points))
                .fold(f64::INFINITY, f64::min);
            s_net += cost;
            weighted += cost * gap;
            stats.mean += gap;
            stats.min = stats.min.min(gap);
            stats.max = stats.max.max(gap);
            count += 1;
        }
        if count > 0 {
            stats.mean /= count as f64;
        } else {
            stats.min = 0.0;
        }
        spacing.push(stats);
    }
    Ok(ActionResidual {
        s_net,
        weighted_estimate: weighted,
        spacing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Lattice;
    use crate::paths::{Path, PathStatus};
    use std::f64::consts::PI;

    fn unit_sphere(nu: usize, nv: usize) -> ParametricSurfaceSamples {
        ParametricSurfaceSamples::from_fn(nu, nv, (0.0, PI), (0.0, 2.0 * PI), |t, p| {
            Vec3::new(t.sin() * p.cos(), t.sin() * p.sin(), t.cos())
        })
        .unwrap()
    }

    #[test]
    fn area_factor_examples() {
        assert_eq!(equidistant_area_factor(1.0, 0.25, 0.5), 1.5625);
        assert_eq!(equidistant_area_factor(3.0, 7.0, 0.0), 1.0);
        assert_eq!(equidistant_area_factor(0.0, 0.0, 12.0), 1.0);
    }

    #[test]
    fn area_factor_exact_for_spheres() {
        for r in [0.1, 1.0, 2.0, 7.5, 100.0] {
            for frac in [-0.9, -0.3, 0.0, 0.4, 2.0, 10.0] {
                let s = frac * r;
                let got = equidistant_area_factor(2.0 / r, 1.0 / (r * r), s);
                let want = ((r + s) / r).powi(2);
                assert!((got - want).abs() <= 1e-12 * want.max(1.0), "{r} {s}");
            }
        }
    }

    #[test]
    fn immediate_ratio_examples() {
        assert!((immediate_area_ratio(-0.2, 0.1) - 1.02).abs() < 1e-15);
        assert!((immediate_area_ratio(-0.2, 0.1) - (10.1f64 / 10.0).powi(2)).abs() < 1e-3);
        assert_eq!(immediate_area_ratio(0.0, 0.3), 1.0);
        assert_eq!(immediate_area_ratio(2.0, 0.0), 1.0);
        assert!((mean_distance_rate(-0.2, 0.1) - 1.01).abs() < 1e-15);
    }

    #[test]
    fn immediate_vs_equidistant_second_order() {
        for r in [1.0, 3.0, 10.0] {
            for ds in [0.001, 0.01, 0.1] {
                let kg = 1.0 / (r * r);
                let diff = immediate_area_ratio(-2.0 / r, ds) - equidistant_area_factor(2.0 / r, kg, ds);
                assert!(diff.abs() <= kg * ds * ds + 1e-12);
            }
        }
    }

    #[test]
    fn cumulative_examples() {
        assert_eq!(cumulative_area(3.0, &[0.0; 10], 1.0).unwrap(), 3.0);
        let v = cumulative_area(2.0, &[0.7; 11], 1.0).unwrap();
        assert!((v - 2.0 * (-0.7f64).exp()).abs() < 1e-14);
        assert!(cumulative_area(1.0, &[f64::NAN], 1.0).is_err());
    }

    #[test]
    fn product_of_ratios_tracks_cumulative_form() {
        // sphere growing from r = 10 to r = 20 in N steps
        let n = 100;
        let ds = 10.0 / n as f64;
        let product: f64 = (0..n)
            .map(|k| immediate_area_ratio(-2.0 / (10.0 + (k as f64 + 0.5) * ds), ds))
            .product();
        let samples: Vec<f64> = (0..=n).map(|k| -2.0 / (10.0 + k as f64 * ds)).collect();
        let cumulative = cumulative_area(1.0, &samples, 10.0).unwrap();
        assert!((cumulative - 4.0).abs() / 4.0 < 1e-4);
        // the gap is the neglected second-order term sum (K ds)^2 / 2
        let second_order: f64 = (0..n)
            .map(|k| (2.0 * ds / (10.0 + (k as f64 + 0.5) * ds)).powi(2) / 2.0)
            .sum();
        let rel = (product - cumulative).abs() / cumulative;
        assert!(rel < 1.1 * second_order, "{rel} vs {second_order}");
        assert!(rel < 0.015);
    }

    #[test]
    fn unit_sphere_area() {
        let got = isotropic_surface_action(&unit_sphere(256, 512), |_| 1.0).unwrap();
        assert_eq!(got.element, SurfaceElement::ProductOfTangents);
        assert!((got.value - 4.0 * PI).abs() / (4.0 * PI) < 1e-3);
    }

    #[test]
    fn second_order_convergence() {
        let errs: Vec<f64> = [(16, 32), (32, 64), (64, 128), (128, 256)]
            .iter()
            .map(|&(a, b)| (isotropic_surface_action(&unit_sphere(a, b), |_| 1.0).unwrap().value - 4.0 * PI).abs())
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 1.8, "{errs:?}");
        }
    }

    #[test]
    fn flat_square_and_cylinder() {
        let sq = ParametricSurfaceSamples::from_fn(11, 11, (0.0, 1.0), (0.0, 1.0), |u, v| Vec3::new(u, v, 0.0)).unwrap();
        let got = isotropic_surface_action(&sq, |_| 2.5).unwrap();
        assert!((got.value - 2.5).abs() < 1e-12);
        let cyl = ParametricSurfaceSamples::from_fn(64, 256, (0.0, 2.0), (0.0, 2.0 * PI), |z, t| {
            Vec3::new(t.cos(), t.sin(), z)
        })
        .unwrap();
        let got = isotropic_surface_action(&cyl, |_| 1.0).unwrap();
        assert!((got.value - 4.0 * PI).abs() / (4.0 * PI) < 1e-3);
    }

    #[test]
    fn skewed_parameterization_uses_normal_form() {
        // sheared square: u-lines and v-lines not orthogonal, area still 1
        let s = ParametricSurfaceSamples::from_fn(9, 9, (0.0, 1.0), (0.0, 1.0), |u, v| Vec3::new(u + 0.5 * v, v, 0.0)).unwrap();
        let got = isotropic_surface_action(&s, |_| 1.0).unwrap();
        assert_eq!(got.element, SurfaceElement::NormalMagnitude);
        assert!((got.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_surface_rejected() {
        let s = ParametricSurfaceSamples::from_fn(5, 5, (0.0, 1.0), (0.0, 1.0), |u, _| Vec3::new(u, 0.0, 0.0)).unwrap();
        assert!(isotropic_surface_action(&s, |_| 1.0).is_err());
    }

    fn meridian(r: f64, c: Vec3, az: f64, n: usize) -> Path {
        let points: Vec<Vec3> = (0..=n)
            .map(|k| {
                let t = 0.5 * PI * (1.0 - k as f64 / n as f64);
                c + r * Vec3::new(t.sin() * az.cos(), t.sin() * az.sin(), t.cos())
            })
            .collect();
        Path {
            actions: (0..=n).rev().map(|v| v as f64).collect(),
            points,
            status: PathStatus::Converged,
        }
    }

    #[test]
    fn meridians_estimate_hemisphere_area() {
        let c = Vec3::repeat(16.0);
        let r = 10.0;
        let phi = ScalarField3::filled(Lattice::unit([33, 33, 33]).unwrap(), 1.0);
        let m = 48;
        let net = PathNetwork::new(
            (0..m)
                .map(|k| meridian(r, c, 2.0 * PI * k as f64 / m as f64, 200))
                .collect(),
        );
        let res = network_action_residual(&net, &phi).unwrap();
        let hemisphere = 2.0 * PI * r * r;
        assert!((res.weighted_estimate - hemisphere).abs() / hemisphere < 0.1, "{res:?}");
        assert!((res.s_net - m as f64 * 0.5 * PI * r).abs() < 0.1 * res.s_net);
    }

    #[test]
    fn residual_edge_cases() {
        let phi = ScalarField3::filled(Lattice::unit([33, 33, 33]).unwrap(), 1.0);
        let p = meridian(10.0, Vec3::repeat(16.0), 0.0, 20);
        assert!(pair_spacing(&p.points, &p.points) < 1e-12);
        let single = PathNetwork::new(vec![p]);
        assert!(network_action_residual(&single, &phi).is_err());
    }
}
