//! Normalized gradient descent on the action map.

use super::{Contour, NetworkProvenance, Path, PathNetwork, PathStatus};
use crate::eikonal::ArrivalMap;
use crate::grid::Lattice;
use crate::par::Parallelism;
use crate::{Error, Result, Vec3};

/// Gradient magnitude below which descent stalls.
const GRADIENT_EPS: f64 = 1e-9;
/// Step halvings tried before a path is declared non-descending.
const MAX_HALVINGS: u32 = 4;
/// Largest tolerated share of failed paths in a network.
const MAX_FAILED_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceParams {
    /// Descent step in world units.
    pub step: f64,
    /// Paths stop once the interpolated action drops to this value.
    pub eps_stop: f64,
    pub max_iters: usize,
}

impl TraceParams {
    /// Step `h/2`, stop at `0.5 h phi_min`, and `10 * extent / step`
    /// iterations.
    pub fn for_lattice(lat: &Lattice, phi_min: f64) -> Self {
        let h = lat.h();
        let step = 0.5 * h;
        Self::with_step(lat, step, 0.5 * h * phi_min)
    }

    pub fn with_step(lat: &Lattice, step: f64, eps_stop: f64) -> Self {
        let extent = (0..3)
            .map(|a| lat.dims[a] as f64 * lat.spacing[a])
            .fold(0.0, f64::max);
        TraceParams {
            step,
            eps_stop,
            max_iters: (10.0 * extent / step).ceil() as usize,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::invalid("trace step must be positive"));
        }
        if !(self.eps_stop >= 0.0) {
            return Err(Error::invalid("eps_stop must be non-negative"));
        }
        Ok(())
    }
}

/// Descend from `seed` along `-grad S / |grad S|` until the zero set is
/// reached. The recorded action is strictly decreasing; a step that fails
/// to decrease it is retried with half the length a few times, then
/// replaced by a jump to the lowest neighboring voxel. Narrow low-cost
/// channels along object edges are where this matters: the interpolated
/// gradient points across the channel and continuous steps climb the far
/// wall.
pub fn backtrace(action: &ArrivalMap, seed: &Vec3, params: &TraceParams) -> Result<Path> {
    params.validate()?;
    let lat = action.lattice();
    let mut points = Vec::new();
    let mut actions = Vec::new();
    let Some(mut s) = action.sample(seed) else {
        return Ok(Path {
            points: vec![*seed],
            actions: vec![f64::INFINITY],
            status: PathStatus::OutsideMap,
        });
    };
    let mut x = *seed;
    points.push(x);
    actions.push(s);
    let finish = |points, actions, status| Ok(Path { points, actions, status });
    if s <= params.eps_stop {
        return finish(points, actions, PathStatus::Converged);
    }
    for _ in 0..params.max_iters {
        let Some(g) = action.gradient(&x) else {
            return finish(points, actions, PathStatus::OutsideMap);
        };
        let gn = g.norm();
        if gn < GRADIENT_EPS {
            return finish(points, actions, PathStatus::Stalled);
        }
        let dir = -g / gn;
        let mut next = None;
        let mut step = params.step;
        for _ in 0..=MAX_HALVINGS {
            let y = x + step * dir;
            if lat.contains_point(&y) {
                if let Some(sy) = action.sample(&y) {
                    if sy < s {
                        next = Some((y, sy));
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        let Some((y, sy)) = next.or_else(|| discrete_step(action, &x, s)) else {
            return finish(points, actions, PathStatus::NoDescent);
        };
        x = y;
        s = sy;
        points.push(x);
        actions.push(s);
        if s <= params.eps_stop {
            return finish(points, actions, PathStatus::Converged);
        }
    }
    finish(points, actions, PathStatus::MaxIterations)
}

/// Lowest accepted voxel in the 3x3x3 block around `v`.
fn block_min(action: &ArrivalMap, v: [usize; 3]) -> Option<([usize; 3], f64)> {
    let lat = action.lattice();
    let c = v.map(|a| a as i64);
    let mut best: Option<([usize; 3], f64)> = None;
    for dz in -1..=1i64 {
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                let Some(n) = lat.checked([c[0] + dx, c[1] + dy, c[2] + dz]) else {
                    continue;
                };
                let Some(val) = action.value(n) else {
                    continue;
                };
                if best.is_none_or(|(_, b)| val < b) {
                    best = Some((n, val));
                }
            }
        }
    }
    best
}

/// Steepest descent on the voxel graph. Every accepted voxel outside the
/// zero set has a neighbor with smaller action (its Dijkstra predecessor),
/// so two block searches always find a strictly lower voxel.
fn discrete_step(action: &ArrivalMap, x: &Vec3, s: f64) -> Option<(Vec3, f64)> {
    let lat = action.lattice();
    let mut v = lat.nearest_voxel(x)?;
    for _ in 0..2 {
        let (n, val) = block_min(action, v)?;
        if val < s {
            return Some((lat.position(n), val));
        }
        v = n;
    }
    None
}

/// One backtrace per contour point, in contour order.
pub fn build_network(action: &ArrivalMap, contour: &Contour, params: &TraceParams) -> Result<PathNetwork> {
    build_network_with(action, contour, params, Parallelism::default())
}

pub fn build_network_with(
    action: &ArrivalMap,
    contour: &Contour,
    params: &TraceParams,
    par: Parallelism,
) -> Result<PathNetwork> {
    if contour.is_empty() {
        return Err(Error::invalid("contour has no points"));
    }
    params.validate()?;
    let paths = par
        .map_slice(&contour.points, |p| backtrace(action, p, params))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let net = PathNetwork {
        paths,
        provenance: NetworkProvenance {
            scheme: String::new(),
            metric_id: action.metric_id,
        },
    };
    let failed = net.failed();
    if failed as f64 > MAX_FAILED_FRACTION * net.paths.len() as f64 {
        return Err(Error::Network {
            failed,
            total: net.paths.len(),
        });
    }
    Ok(net)
}
