//! Dijkstra-style ordered propagation on the voxel neighborhood graph.
//!
//! An edge from accepted voxel `a` to neighbor `b` over the Euclidean step
//! `d` costs `phi_bar * d` (baseline) or `phi_bar * d * (1 - lambda * K * d)`
//! (corrected), where `phi_bar` is the mean metric of the two voxels and `K`
//! is the curvature of the accepted action map around `a`, evaluated once
//! when `a` is accepted.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use ordered_float::OrderedFloat;

use super::update::cost_factor;
use super::{
    ArrivalMap, CurvatureVariant, Neighborhood, Scheme, SolveStats, SolverConfig, Status, StopRule,
    ZeroSet, UNRANKED,
};
use crate::grid::{CurvatureOptions, Lattice, ScalarField3};
use crate::{Error, Result};

type Entry = Reverse<(OrderedFloat<f64>, usize)>;

/// Neighbor offsets with their world step lengths.
struct Stencil {
    offsets: Vec<([i64; 3], f64)>,
}

impl Stencil {
    fn new(nb: Neighborhood, lat: &Lattice) -> Self {
        let offsets = nb
            .offsets()
            .into_iter()
            .map(|o| {
                let d2: f64 = (0..3).map(|a| (o[a] as f64 * lat.spacing[a]).powi(2)).sum();
                (o, d2.sqrt())
            })
            .collect();
        Stencil { offsets }
    }
}

struct Front {
    lat: Lattice,
    action: Vec<f64>,
    status: Vec<Status>,
    order: Vec<u32>,
    heap: BinaryHeap<Entry>,
    rank: u32,
}

impl Front {
    fn new(lat: Lattice) -> Self {
        let n = lat.len();
        Front {
            lat,
            action: vec![f64::INFINITY; n],
            status: vec![Status::Far; n],
            order: vec![UNRANKED; n],
            heap: BinaryHeap::new(),
            rank: 0,
        }
    }

    fn accept(&mut self, lin: usize) {
        self.status[lin] = Status::Accepted;
        self.order[lin] = self.rank;
        self.rank += 1;
    }

    /// Relax every out-edge of accepted voxel `lin` with a cost multiplier
    /// depending on the step length.
    #[inline]
    fn relax(&mut self, lin: usize, metric: &[f64], stencil: &Stencil, factor: impl Fn(f64) -> f64) {
        let c = self.lat.coords(lin).map(|v| v as i64);
        let s = self.action[lin];
        let phi_a = metric[lin];
        for &(o, d) in &stencil.offsets {
            let Some(nb) = self.lat.checked([c[0] + o[0], c[1] + o[1], c[2] + o[2]]) else {
                continue;
            };
            let nl = self.lat.linear(nb);
            if self.status[nl] == Status::Accepted {
                continue;
            }
            let phi_bar = 0.5 * (phi_a + metric[nl]);
            let cand = s + phi_bar * d * factor(d);
            if cand < self.action[nl] {
                self.action[nl] = cand;
                self.status[nl] = Status::Trial;
                self.heap.push(Reverse((OrderedFloat(cand), nl)));
            }
        }
    }

    fn into_map(self, metric_id: u64, stats: SolveStats) -> ArrivalMap {
        ArrivalMap {
            action: ScalarField3 {
                lattice: self.lat,
                values: self.action,
            },
            status: self.status,
            accept_order: self.order,
            metric_id,
            stats,
        }
    }
}

fn check_metric(metric: &ScalarField3) -> Result<()> {
    if let Some(v) = metric.values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::invalid(format!(
            "metric must be strictly positive and finite, found {v}"
        )));
    }
    Ok(())
}

fn seed(metric: &ScalarField3, zs: &ZeroSet, nb: Neighborhood) -> Result<(Front, Stencil)> {
    let lat = metric.lattice;
    let voxels = zs.voxels(&lat)?;
    let stencil = Stencil::new(nb, &lat);
    let mut front = Front::new(lat);
    for &l in &voxels {
        front.action[l] = 0.0;
        front.accept(l);
    }
    // the zero set is flat, so every stencil there falls back to K = 0
    for &l in &voxels {
        front.relax(l, &metric.values, &stencil, |_| 1.0);
    }
    Ok((front, stencil))
}

/// Zero set accepted with action 0, its 26-neighbors TRIAL with their
/// one-step baseline action, everything else FAR.
pub fn init_zero_set(metric: &ScalarField3, zs: &ZeroSet) -> Result<ArrivalMap> {
    init_zero_set_with(metric, zs, Neighborhood::TwentySix)
}

pub fn init_zero_set_with(
    metric: &ScalarField3,
    zs: &ZeroSet,
    nb: Neighborhood,
) -> Result<ArrivalMap> {
    check_metric(metric)?;
    let (front, _) = seed(metric, zs, nb)?;
    let accepted = front.rank as usize;
    Ok(front.into_map(
        metric.fingerprint(),
        SolveStats {
            accepted,
            curvature_fallbacks: 0,
        },
    ))
}

/// Grow the action map from `zs` until the stop rule holds.
pub fn solve(metric: &ScalarField3, zs: &ZeroSet, cfg: &SolverConfig) -> Result<ArrivalMap> {
    cfg.validate()?;
    check_metric(metric)?;
    let lat = metric.lattice;
    let (mut front, stencil) = seed(metric, zs, cfg.neighborhood)?;

    let plane_mask = match &cfg.stop {
        StopRule::PlaneReached { plane } => {
            let mask = plane.rasterize(&lat);
            if mask.is_empty() {
                return Err(Error::invalid("plane does not intersect the grid"));
            }
            Some(mask)
        }
        _ => None,
    };
    let mut remaining = plane_mask
        .as_ref()
        .map(|m| m.bits.iter().zip(&front.status).filter(|(&b, &s)| b && s != Status::Accepted).count())
        .unwrap_or(0);
    let action_limit = match cfg.stop {
        StopRule::ActionLimit { max_action } => max_action,
        _ => f64::INFINITY,
    };

    let corrected = cfg.scheme == Scheme::Corrected && cfg.lambda > 0.0;
    let opts: CurvatureOptions = cfg.curvature_options();
    let mut fallbacks = 0usize;

    if plane_mask.is_none() || remaining > 0 {
        while let Some(Reverse((OrderedFloat(s), lin))) = front.heap.pop() {
            if front.status[lin] == Status::Accepted || s != front.action[lin] {
                continue;
            }
            if s > action_limit {
                break;
            }
            front.accept(lin);

            if corrected {
                let k = {
                    let status = &front.status;
                    let action = &front.action;
                    let accepted = |l: usize| status[l] == Status::Accepted;
                    let value = |l: usize| action[l];
                    crate::grid::diff_internals::front_curvature_with(
                        &lat,
                        lat.coords(lin),
                        &accepted,
                        &value,
                        &opts,
                    )
                };
                if k.fallback {
                    fallbacks += 1;
                }
                let k = match cfg.curvature {
                    CurvatureVariant::Sum => k.sum,
                    CurvatureVariant::Mean => k.mean(),
                };
                let lambda = cfg.lambda;
                front.relax(lin, &metric.values, &stencil, |d| cost_factor(d, k, lambda));
            } else {
                front.relax(lin, &metric.values, &stencil, |_| 1.0);
            }

            if let Some(mask) = &plane_mask {
                if mask.bits[lin] {
                    remaining -= 1;
                    if remaining == 0 {
                        break;
                    }
                }
            }
        }
    }

    if remaining > 0 {
        return Err(Error::PlaneUnreachable { remaining });
    }
    let accepted = front.rank as usize;
    Ok(front.into_map(
        metric.fingerprint(),
        SolveStats {
            accepted,
            curvature_fallbacks: fallbacks,
        },
    ))
}
