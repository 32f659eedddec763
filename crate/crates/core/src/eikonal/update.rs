//! Closed-form action/dilation updates.
//!
//! The classical isotropic scheme advances the front by `ds = dS / phi`. The
//! divergence-corrected scheme solves `dS = phi * ds * (1 - K * ds)` for `ds`,
//! which slows points where the front stretches forward (`K < 0` under the
//! `K_S = -div(m)` convention) and speeds up points lagging behind (`K > 0`).

use crate::{Error, Result};

/// Below this curvature magnitude the corrected dilation uses its `K -> 0`
/// limit `dS / phi`.
pub const CURVATURE_EPS: f64 = 1e-10;

/// Discriminants within this distance of zero are treated as exactly zero.
const DISCRIMINANT_SNAP: f64 = 8.0 * f64::EPSILON;

/// Smallest admissible value of `1 - lambda * K * ds` for `K > 0`.
pub const MIN_COST_FACTOR: f64 = 0.5;

fn check_phi(phi: f64) -> Result<()> {
    if phi > 0.0 && phi.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("metric must be positive, got {phi}")))
    }
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be non-negative, got {v}")))
    }
}

/// `dS = phi * ds`.
pub fn baseline_increment(phi: f64, ds: f64) -> Result<f64> {
    check_phi(phi)?;
    check_nonneg("ds", ds)?;
    Ok(phi * ds)
}

/// `ds = dS / phi`.
pub fn baseline_dilation(phi: f64, d_action: f64) -> Result<f64> {
    check_phi(phi)?;
    check_nonneg("dS", d_action)?;
    Ok(d_action / phi)
}

/// Cost multiplier `1 - lambda * K * ds`, floored at 0.5 for positive
/// curvature. At the floor `ds = 1 / (2K)`, which is the dilation cap.
#[inline]
pub(crate) fn cost_factor(ds: f64, curvature: f64, lambda: f64) -> f64 {
    let f = 1.0 - lambda * curvature * ds;
    if curvature > 0.0 && f < MIN_COST_FACTOR {
        MIN_COST_FACTOR
    } else {
        f
    }
}

/// `dS = phi * ds * (1 - lambda * K * ds)`, with the factor floored at 0.5
/// when `K > 0`.
pub fn corrected_increment(phi: f64, ds: f64, curvature: f64, lambda: f64) -> Result<f64> {
    check_phi(phi)?;
    check_nonneg("ds", ds)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    if !curvature.is_finite() {
        return Err(Error::invalid("curvature must be finite"));
    }
    Ok(phi * ds * cost_factor(ds, curvature, lambda))
}

/// Normal dilation `ds` produced by an action elevation `dS` under the
/// corrected scheme: the root of `K ds^2 - ds + dS/phi = 0` that tends to
/// `dS/phi` as `K -> 0`.
///
/// A negative discriminant (only possible for `K > 0`) yields the cap
/// `2 dS / phi`.
pub fn corrected_dilation(phi: f64, d_action: f64, curvature: f64) -> Result<f64> {
    check_phi(phi)?;
    check_nonneg("dS", d_action)?;
    if !curvature.is_finite() {
        return Err(Error::invalid("curvature must be finite"));
    }
    let x = d_action / phi;
    if curvature.abs() < CURVATURE_EPS {
        return Ok(x);
    }
    let disc = 1.0 - 4.0 * curvature * x;
    if disc <= DISCRIMINANT_SNAP {
        return Ok(2.0 * x);
    }
    // (1 - sqrt(D)) / (2K) rewritten without the cancellation
    Ok(2.0 * x / (1.0 + disc.sqrt()))
}

/// Largest action elevation with a non-negative discriminant, `phi / (4K)`;
/// infinite when `K <= 0`.
pub fn action_cap(phi: f64, curvature: f64) -> Result<f64> {
    check_phi(phi)?;
    if curvature > 0.0 {
        Ok(phi / (4.0 * curvature))
    } else {
        Ok(f64::INFINITY)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn baseline_examples() {
        assert_eq!(baseline_increment(1.0, 0.5).unwrap(), 0.5);
        assert!((baseline_increment(2.0, 0.1).unwrap() - 0.2).abs() < 1e-16);
        for (phi, ds) in [(1.0, 0.5), (2.0, 0.1), (0.37, 3.3)] {
            let back = baseline_dilation(phi, baseline_increment(phi, ds).unwrap()).unwrap();
            assert!((back - ds).abs() < 1e-15);
        }
        assert!(baseline_increment(0.0, 1.0).is_err());
        assert!(baseline_increment(-1.0, 1.0).is_err());
        assert!(baseline_dilation(0.0, 1.0).is_err());
    }

    #[test]
    fn corrected_increment_examples() {
        assert!((corrected_increment(1.0, 0.112702, 1.0, 1.0).unwrap() - 0.1).abs() < 1e-6);
        assert!((corrected_increment(2.0, 0.0916080, -1.0, 1.0).unwrap() - 0.2).abs() < 1e-6);
        for (phi, ds, k) in [(1.0, 0.3, 2.0), (0.2, 1.7, -0.4), (3.0, 0.0, 9.0)] {
            assert_eq!(
                corrected_increment(phi, ds, k, 0.0).unwrap(),
                baseline_increment(phi, ds).unwrap()
            );
        }
        assert!(corrected_increment(1.0, 0.1, 1.0, 1.5).is_err());
        assert!(corrected_increment(0.0, 0.1, 1.0, 1.0).is_err());
    }

    #[test]
    fn increment_floor() {
        // factor 1 - 2 * 0.4 = 0.2 is floored to 0.5
        assert_eq!(corrected_increment(1.0, 0.4, 2.0, 1.0).unwrap(), 0.2);
        // negative curvature is never floored
        let v = corrected_increment(1.0, 0.4, -2.0, 1.0).unwrap();
        assert!((v - 0.4 * 1.8).abs() < 1e-15);
    }

    #[test]
    fn corrected_dilation_examples() {
        assert_eq!(corrected_dilation(1.0, 0.1, 0.0).unwrap(), 0.1);
        let cap = corrected_dilation(1.0, 0.1, 2.5).unwrap();
        assert!((cap - 0.2).abs() < 1e-12);
        let v = corrected_dilation(2.0, 0.2, -1.0).unwrap();
        assert!((v - (1.4f64.sqrt() - 1.0) / 2.0).abs() < 1e-15);
        assert!((v - 0.0916080).abs() < 1e-6);
        let v = corrected_dilation(1.0, 0.1, 1.0).unwrap();
        assert!((v - (1.0 - 0.6f64.sqrt()) / 2.0).abs() < 1e-15);
        assert!((v - 0.112702).abs() < 1e-6);
        assert!(v > 0.1);
        assert!(corrected_dilation(0.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn negative_discriminant_is_capped() {
        let v = corrected_dilation(1.0, 0.5, 1.0).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn action_cap_examples() {
        assert!((action_cap(1.0, 2.5).unwrap() - 0.1).abs() < 1e-16);
        assert_eq!(action_cap(2.0, 4.0).unwrap(), 0.125);
        assert_eq!(action_cap(1.0, 0.0).unwrap(), f64::INFINITY);
        assert_eq!(action_cap(1.0, -3.0).unwrap(), f64::INFINITY);
    }

    proptest! {
        #[test]
        fn roundtrip(phi in 0.01..10.0f64, k in -5.0..5.0f64, u in 0.0..1.0f64) {
            let d_action = if k > 0.0 { u * action_cap(phi, k).unwrap() } else { u * phi };
            let ds = corrected_dilation(phi, d_action, k).unwrap();
            let back = corrected_increment(phi, ds, k, 1.0).unwrap();
            prop_assert!((back - d_action).abs() <= 1e-12, "{back} vs {d_action}");
        }

        #[test]
        fn ordering(phi in 0.01..10.0f64, k in 1e-6..5.0f64, u in 0.01..1.0f64) {
            let d_action = u * action_cap(phi, k).unwrap();
            let x = d_action / phi;
            prop_assert!(corrected_dilation(phi, d_action, k).unwrap() > x);
            prop_assert!(corrected_dilation(phi, d_action, -k).unwrap() < x);
        }
    }
}
