//! Action maps and the ordered front-propagation solver.

mod solver;
mod update;

pub use solver::{init_zero_set, init_zero_set_with, solve};
pub use update::{
    action_cap, baseline_dilation, baseline_increment, corrected_dilation, corrected_increment,
    CURVATURE_EPS, MIN_COST_FACTOR,
};

use serde::{Deserialize, Serialize};

use crate::grid::{
    diff_internals as diff, CurvatureOptions, CurvatureSample, Lattice, ScalarField3, VoxelMask,
};
use crate::paths::PlaneSpec;
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Far,
    Trial,
    Accepted,
}

/// Rank of voxels that were never accepted.
pub const UNRANKED: u32 = u32::MAX;

/// The static action map under construction: action values, per-voxel
/// status and acceptance rank.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalMap {
    /// Action values; `+inf` where unreached.
    pub action: ScalarField3,
    pub status: Vec<Status>,
    pub accept_order: Vec<u32>,
    /// Fingerprint of the metric the map was grown on (0 if unknown).
    pub metric_id: u64,
    pub stats: SolveStats,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveStats {
    pub accepted: usize,
    /// Accepted voxels whose curvature stencil was unusable.
    pub curvature_fallbacks: usize,
}

impl ArrivalMap {
    /// Treat every finite value of `action` as accepted, ranked by
    /// `(action, index)`. Used for maps loaded from disk and analytic fields.
    pub fn from_action(action: ScalarField3) -> Self {
        let n = action.values.len();
        let mut status = vec![Status::Far; n];
        let mut finite: Vec<usize> = (0..n).filter(|&l| action.values[l].is_finite()).collect();
        finite.sort_by(|&a, &b| action.values[a].total_cmp(&action.values[b]).then(a.cmp(&b)));
        let mut accept_order = vec![UNRANKED; n];
        for (rank, &l) in finite.iter().enumerate() {
            status[l] = Status::Accepted;
            accept_order[l] = rank as u32;
        }
        let mut action = action;
        for (v, s) in action.values.iter_mut().zip(&status) {
            if *s == Status::Far {
                *v = f64::INFINITY;
            }
        }
        ArrivalMap {
            stats: SolveStats {
                accepted: finite.len(),
                curvature_fallbacks: 0,
            },
            action,
            status,
            accept_order,
            metric_id: 0,
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.action.lattice
    }

    #[inline]
    pub fn is_accepted(&self, lin: usize) -> bool {
        self.status[lin] == Status::Accepted
    }

    pub fn accepted_count(&self) -> usize {
        self.status.iter().filter(|&&s| s == Status::Accepted).count()
    }

    pub fn accepted_mask(&self) -> VoxelMask {
        VoxelMask {
            lattice: *self.lattice(),
            bits: self.status.iter().map(|&s| s == Status::Accepted).collect(),
        }
    }

    /// Action at a voxel, `None` unless accepted.
    pub fn value(&self, idx: [usize; 3]) -> Option<f64> {
        let l = self.lattice().linear(idx);
        self.is_accepted(l).then(|| self.action.values[l])
    }

    /// Sum curvature of the accepted action map at a voxel.
    pub fn curvature_at(&self, idx: [usize; 3], opts: &CurvatureOptions) -> CurvatureSample {
        let accepted = |l: usize| self.status[l] == Status::Accepted;
        let value = |l: usize| self.action.values[l];
        diff::sum_curvature_with(self.lattice(), idx, &accepted, &value, opts)
    }

    /// Trilinear action at a world point using accepted corners only.
    pub fn sample(&self, p: &Vec3) -> Option<f64> {
        let accepted = |l: usize| self.status[l] == Status::Accepted;
        let value = |l: usize| self.action.values[l];
        diff::sample_masked(self.lattice(), p, &accepted, &value)
    }

    /// Trilinear action gradient at a world point using accepted corners and
    /// accepted-restricted stencils.
    pub fn gradient(&self, p: &Vec3) -> Option<Vec3> {
        let accepted = |l: usize| self.status[l] == Status::Accepted;
        let value = |l: usize| self.action.values[l];
        diff::gradient_masked(self.lattice(), p, &accepted, &value)
    }

    /// Largest accepted action value.
    pub fn max_accepted(&self) -> f64 {
        self.action
            .values
            .iter()
            .zip(&self.status)
            .filter(|(_, &s)| s == Status::Accepted)
            .map(|(&v, _)| v)
            .fold(0.0, f64::max)
    }

    #[cfg(test)]
    pub(crate) fn retain_accepted(&mut self, keep: impl Fn([usize; 3]) -> bool) {
        let lat = *self.lattice();
        for l in 0..lat.len() {
            if self.status[l] == Status::Accepted && !keep(lat.coords(l)) {
                self.status[l] = Status::Far;
                self.action.values[l] = f64::INFINITY;
                self.accept_order[l] = UNRANKED;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// `dS = phi * ds`.
    #[default]
    Baseline,
    /// `dS = phi * ds * (1 - lambda * K * ds)`.
    Corrected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureVariant {
    /// `K_S = -div(m)`.
    #[default]
    Sum,
    /// `H = K_S / 2`.
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Neighborhood {
    Six,
    Eighteen,
    #[default]
    TwentySix,
}

impl TryFrom<u8> for Neighborhood {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            6 => Ok(Neighborhood::Six),
            18 => Ok(Neighborhood::Eighteen),
            26 => Ok(Neighborhood::TwentySix),
            other => Err(format!("neighborhood must be 6, 18 or 26, got {other}")),
        }
    }
}

impl From<Neighborhood> for u8 {
    fn from(n: Neighborhood) -> u8 {
        match n {
            Neighborhood::Six => 6,
            Neighborhood::Eighteen => 18,
            Neighborhood::TwentySix => 26,
        }
    }
}

impl Neighborhood {
    /// Integer offsets of the stencil in `(dz, dy, dx)`-lexicographic order.
    pub fn offsets(self) -> Vec<[i64; 3]> {
        let max_l1 = match self {
            Neighborhood::Six => 1,
            Neighborhood::Eighteen => 2,
            Neighborhood::TwentySix => 3,
        };
        let mut out = Vec::new();
        for dz in -1..=1i64 {
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    let l1 = dx.abs() + dy.abs() + dz.abs();
                    if l1 > 0 && l1 <= max_l1 {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StopRule {
    /// Stop once every voxel within `h/2` of the plane is accepted.
    PlaneReached { plane: PlaneSpec },
    /// Run until no trial voxels remain.
    FullGrid,
    /// Stop before accepting any voxel with action above the limit.
    ActionLimit { max_action: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub scheme: Scheme,
    pub curvature: CurvatureVariant,
    pub lambda: f64,
    pub neighborhood: Neighborhood,
    /// Largest normal dilation per update in voxels. Each graph edge spans at
    /// most `sqrt(3) h`, so the solver needs no separate action clock; the
    /// value is kept for the constant-increment oracle and provenance.
    pub delta_s_max: f64,
    pub kappa_clamp: f64,
    pub smoothing: bool,
    pub stop: StopRule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            scheme: Scheme::Baseline,
            curvature: CurvatureVariant::Sum,
            lambda: 1.0,
            neighborhood: Neighborhood::TwentySix,
            delta_s_max: 1.0,
            kappa_clamp: 0.5,
            smoothing: false,
            stop: StopRule::FullGrid,
        }
    }
}

impl SolverConfig {
    pub fn baseline() -> Self {
        Self::default()
    }

    pub fn corrected() -> Self {
        SolverConfig {
            scheme: Scheme::Corrected,
            ..Self::default()
        }
    }

    pub fn with_stop(mut self, stop: StopRule) -> Self {
        self.stop = stop;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::invalid(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        if !(self.delta_s_max > 0.0 && self.delta_s_max.is_finite()) {
            return Err(Error::invalid("delta_s_max must be positive"));
        }
        if !(self.kappa_clamp > 0.0 && self.kappa_clamp.is_finite()) {
            return Err(Error::invalid("kappa_clamp must be positive"));
        }
        match &self.stop {
            StopRule::PlaneReached { plane } => plane.validate()?,
            StopRule::ActionLimit { max_action } if max_action.is_nan() => {
                return Err(Error::invalid("action limit must be a number"))
            }
            _ => {}
        }
        Ok(())
    }

    pub fn curvature_options(&self) -> CurvatureOptions {
        CurvatureOptions {
            kappa_clamp: self.kappa_clamp,
            smoothing: self.smoothing,
        }
    }
}

/// Initial region where the action is zero.
#[derive(Debug, Clone, PartialEq)]
pub enum ZeroSet {
    /// Voxels within `radius_voxels` (in voxel units) of a world point.
    Ball { center: Vec3, radius_voxels: f64 },
    Mask(VoxelMask),
}

impl ZeroSet {
    pub fn ball(center: Vec3, radius_voxels: f64) -> Self {
        ZeroSet::Ball {
            center,
            radius_voxels,
        }
    }

    /// Rasterize onto a lattice; errors when empty or centered outside.
    pub fn voxels(&self, lat: &Lattice) -> Result<Vec<usize>> {
        let out = match self {
            ZeroSet::Ball {
                center,
                radius_voxels,
            } => {
                if !lat.contains_point(center) {
                    return Err(Error::invalid("zero-set center lies outside the grid"));
                }
                if !(*radius_voxels >= 0.0) {
                    return Err(Error::invalid("zero-set radius must be non-negative"));
                }
                let c = lat.to_voxel(center);
                let r2 = radius_voxels * radius_voxels + 1e-9;
                let r = radius_voxels.ceil() as i64 + 1;
                let base = c.map(|v| v.round() as i64);
                let mut out = Vec::new();
                for k in base[2] - r..=base[2] + r {
                    for j in base[1] - r..=base[1] + r {
                        for i in base[0] - r..=base[0] + r {
                            let Some(idx) = lat.checked([i, j, k]) else {
                                continue;
                            };
                            let d2 = (i as f64 - c[0]).powi(2)
                                + (j as f64 - c[1]).powi(2)
                                + (k as f64 - c[2]).powi(2);
                            if d2 <= r2 {
                                out.push(lat.linear(idx));
                            }
                        }
                    }
                }
                out.sort_unstable();
                out
            }
            ZeroSet::Mask(mask) => {
                if mask.lattice.dims != lat.dims {
                    return Err(Error::invalid("zero-set mask shape does not match metric"));
                }
                mask.indices()
            }
        };
        if out.is_empty() {
            return Err(Error::invalid("zero set contains no voxels"));
        }
        Ok(out)
    }
}
