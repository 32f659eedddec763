//! End-to-end run: phantom, metric, contour, then solve/trace/score once per
//! update scheme on identical inputs.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::eikonal::{
    solve, ArrivalMap, CurvatureVariant, Neighborhood, Scheme, SolverConfig, StopRule, ZeroSet,
};
use crate::export::{export_network, NetworkFormat};
use crate::grid::{Lattice, ScalarField3, VoxelMask};
use crate::io::save_volume;
use crate::paths::{
    build_network, detect_plane_contour, network_energy, reference_surface_mask, surface_coverage,
    Contour, PathNetwork, PlaneSpec, TraceParams,
};
use crate::phantom::{
    build_metric, default_specs, make_phantom, EllipsoidSpec, MetricParams, MIN_PHANTOM_DIM,
};
use crate::{Error, Result, Vec3};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub dims: [usize; 3],
    pub spacing: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            dims: [96, 96, 96],
            spacing: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomConfig {
    /// `None` selects the built-in two-ellipsoid phantom.
    pub ellipsoids: Option<Vec<EllipsoidSpec>>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            ellipsoids: None,
            noise_sigma: 0.02,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub lambda: f64,
    pub curvature: CurvatureVariant,
    pub neighborhood: Neighborhood,
    pub zero_set_radius: f64,
    pub delta_s_max: f64,
    pub kappa_clamp: f64,
    pub smoothing: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverSettings {
            lambda: d.lambda,
            curvature: d.curvature,
            neighborhood: d.neighborhood,
            zero_set_radius: 3.0,
            delta_s_max: d.delta_s_max,
            kappa_clamp: d.kappa_clamp,
            smoothing: d.smoothing,
        }
    }
}

/// Plane carrying the seed contour. Missing fields are placed relative to
/// the default phantom: through the second ellipsoid, normal along +x
/// rotated by `tilt_deg` about z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlaneConfig {
    pub point: Option<Vec3>,
    pub normal: Option<Vec3>,
    pub tilt_deg: f64,
}

impl Default for PlaneConfig {
    fn default() -> Self {
        PlaneConfig {
            point: None,
            normal: None,
            tilt_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContourConfig {
    pub iso: f64,
}

impl Default for ContourConfig {
    fn default() -> Self {
        ContourConfig { iso: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverageConfig {
    /// Tube radius in voxels.
    pub radius: f64,
    /// Score only surface voxels on the zero-set side of the plane.
    pub seed_side_only: bool,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        CoverageConfig {
            radius: 1.5,
            seed_side_only: true,
        }
    }
}

/// The single declarative run document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    pub grid: GridConfig,
    pub phantom: PhantomConfig,
    pub metric: MetricParams,
    /// World point of the zero-set center; defaults to the far tip of the
    /// first ellipsoid.
    pub seed_point: Option<Vec3>,
    pub solver: SolverSettings,
    pub plane: PlaneConfig,
    pub contour: ContourConfig,
    pub coverage: CoverageConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            schema_version: SCHEMA_VERSION,
            grid: GridConfig::default(),
            phantom: PhantomConfig::default(),
            metric: MetricParams::default(),
            seed_point: None,
            solver: SolverSettings::default(),
            plane: PlaneConfig::default(),
            contour: ContourConfig::default(),
            coverage: CoverageConfig::default(),
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text).map_err(config_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn lattice(&self) -> Result<Lattice> {
        let s = self.grid.spacing;
        Lattice::new(self.grid.dims, [s; 3], [0.0; 3]).map_err(config_err)
    }

    pub fn specs(&self, lat: &Lattice) -> Vec<EllipsoidSpec> {
        self.phantom
            .ellipsoids
            .clone()
            .unwrap_or_else(|| default_specs(lat))
    }

    fn center(lat: &Lattice) -> Vec3 {
        let far = lat.position([lat.dims[0] - 1, lat.dims[1] - 1, lat.dims[2] - 1]);
        0.5 * (lat.position([0, 0, 0]) + far)
    }

    pub fn seed_point(&self, lat: &Lattice) -> Vec3 {
        self.seed_point
            .unwrap_or_else(|| Self::center(lat) + lat.h() * Vec3::new(-26.0, 0.0, 0.0))
    }

    pub fn plane(&self, lat: &Lattice) -> Result<PlaneSpec> {
        let point = self
            .plane
            .point
            .unwrap_or_else(|| Self::center(lat) + lat.h() * Vec3::new(16.0, 0.0, 0.0));
        let normal = self.plane.normal.unwrap_or_else(|| {
            let t = self.plane.tilt_deg.to_radians();
            Vec3::new(t.cos(), t.sin(), 0.0)
        });
        PlaneSpec::new(point, normal).map_err(config_err)
    }

    pub fn solver_config(&self, scheme: Scheme, plane: PlaneSpec) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            scheme,
            curvature: s.curvature,
            lambda: s.lambda,
            neighborhood: s.neighborhood,
            delta_s_max: s.delta_s_max,
            kappa_clamp: s.kappa_clamp,
            smoothing: s.smoothing,
            stop: StopRule::PlaneReached { plane },
        }
    }

    /// Checks needed to build the phantom and metric.
    pub fn validate_volumes(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_err(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let lat = self.lattice()?;
        if lat.dims.iter().any(|&d| d < MIN_PHANTOM_DIM) {
            return Err(config_err(format!(
                "grid.dims must be at least {MIN_PHANTOM_DIM} per axis, got {:?}",
                lat.dims
            )));
        }
        let specs = self.specs(&lat);
        if specs.is_empty() {
            return Err(config_err("phantom.ellipsoids must not be empty"));
        }
        for s in specs {
            s.validate().map_err(config_err)?;
        }
        if !(self.phantom.noise_sigma >= 0.0 && self.phantom.noise_sigma.is_finite()) {
            return Err(config_err("phantom.noise_sigma must be non-negative"));
        }
        self.metric.validate().map_err(config_err)
    }

    /// Every check that does not need the volumes; failures are config
    /// errors.
    pub fn validate(&self) -> Result<()> {
        self.validate_volumes()?;
        let lat = self.lattice()?;
        let plane = self.plane(&lat)?;
        self.solver_config(Scheme::Corrected, plane.clone())
            .validate()
            .map_err(config_err)?;
        if !(self.solver.zero_set_radius >= 0.0) {
            return Err(config_err("solver.zero_set_radius must be non-negative"));
        }
        let seed = self.seed_point(&lat);
        if !lat.contains_point(&seed) {
            return Err(config_err("seed point lies outside the grid"));
        }
        if plane.signed_distance(&seed).abs() <= 0.5 * lat.h() {
            return Err(config_err("seed point lies on the contour plane"));
        }
        if !(self.contour.iso > 0.0 && self.contour.iso < 1.0) {
            return Err(config_err("contour.iso must lie in (0, 1)"));
        }
        if !(self.coverage.radius >= 0.0 && self.coverage.radius.is_finite()) {
            return Err(config_err("coverage.radius must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub crate_version: String,
    pub os: String,
    pub arch: String,
    pub parallel: bool,
}

impl Environment {
    pub fn current() -> Self {
        Environment {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            parallel: cfg!(feature = "parallel"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub phantom: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSummary {
    pub phantom_fingerprint: String,
    pub metric_fingerprint: String,
    pub seed_point: Vec3,
    pub plane: PlaneSpec,
    pub contour_points: usize,
    pub surface_voxels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeReport {
    pub accepted_voxels: usize,
    pub curvature_fallbacks: usize,
    pub arrival_fingerprint: String,
    pub s_net: f64,
    pub coverage: f64,
    pub paths: usize,
    pub failed_paths: usize,
}

/// Deterministic run summary. Wall times live in [`Timings`] so that
/// repeated runs produce byte-identical reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config: Config,
    pub environment: Environment,
    pub seeds: Seeds,
    pub inputs: InputSummary,
    pub baseline: SchemeReport,
    pub corrected: SchemeReport,
    pub coverage_gap: f64,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub phantom_s: f64,
    pub metric_s: f64,
    pub contour_s: f64,
    pub baseline_s: f64,
    pub corrected_s: f64,
    pub total_s: f64,
}

/// Everything produced by [`run_compare`].
#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub report: RunReport,
    pub timings: Timings,
    pub intensity: ScalarField3,
    pub metric: ScalarField3,
    pub contour: Contour,
    pub baseline: SchemeRun,
    pub corrected: SchemeRun,
}

#[derive(Debug, Clone)]
pub struct SchemeRun {
    pub arrival: ArrivalMap,
    pub network: PathNetwork,
}

fn hex(v: u64) -> String {
    format!("{v:016x}")
}

/// Ground-truth surface voxels used for coverage.
pub fn coverage_mask(cfg: &Config, lat: &Lattice, plane: &PlaneSpec, seed: &Vec3) -> VoxelMask {
    let mut mask = reference_surface_mask(&cfg.specs(lat), lat);
    if cfg.coverage.seed_side_only {
        let side = plane.signed_distance(seed).signum();
        for lin in mask.indices() {
            if plane.signed_distance(&lat.position(lat.coords(lin))) * side < 0.0 {
                mask.set(lat.coords(lin), false);
            }
        }
    }
    mask
}

/// Solve, trace and score one scheme.
pub fn run_scheme(
    cfg: &Config,
    scheme: Scheme,
    metric: &ScalarField3,
    contour: &Contour,
    surface: &VoxelMask,
) -> Result<(SchemeRun, SchemeReport)> {
    let lat = metric.lattice;
    let plane = cfg.plane(&lat)?;
    let seed = cfg.seed_point(&lat);
    let tag = |base: &'static str, corr: &'static str| match scheme {
        Scheme::Baseline => base,
        Scheme::Corrected => corr,
    };
    let zs = ZeroSet::ball(seed, cfg.solver.zero_set_radius);
    let arrival = solve(metric, &zs, &cfg.solver_config(scheme, plane))
        .map_err(|e| e.in_stage(tag("solve baseline", "solve corrected")))?;
    let phi_min = metric.min_max().0;
    let params = TraceParams::for_lattice(&lat, phi_min);
    let mut network = build_network(&arrival, contour, &params)
        .map_err(|e| e.in_stage(tag("trace baseline", "trace corrected")))?;
    network.provenance.scheme = tag("baseline", "corrected").to_string();
    let s_net = network_energy(&network, metric).map_err(|e| e.in_stage("energy"))?;
    let coverage = surface_coverage(&network, surface, cfg.coverage.radius * lat.h())
        .map_err(|e| e.in_stage("coverage"))?;
    let report = SchemeReport {
        accepted_voxels: arrival.stats.accepted,
        curvature_fallbacks: arrival.stats.curvature_fallbacks,
        arrival_fingerprint: hex(arrival.action.fingerprint()),
        s_net,
        coverage,
        paths: network.paths.len(),
        failed_paths: network.failed(),
    };
    Ok((SchemeRun { arrival, network }, report))
}

/// Full baseline-versus-corrected comparison.
pub fn run_compare(cfg: &Config) -> Result<CompareOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let mut timings = Timings::default();
    let lap = |t: &mut Instant| {
        let s = t.elapsed().as_secs_f64();
        *t = Instant::now();
        s
    };
    let mut t = Instant::now();
    let lat = cfg.lattice()?;
    let specs = cfg.specs(&lat);
    let intensity = make_phantom(&specs, &lat, cfg.phantom.noise_sigma, cfg.phantom.seed)
        .map_err(|e| e.in_stage("phantom"))?;
    timings.phantom_s = lap(&mut t);
    let metric = build_metric(&intensity, &cfg.metric).map_err(|e| e.in_stage("metric"))?;
    timings.metric_s = lap(&mut t);
    let plane = cfg.plane(&lat)?;
    let seed = cfg.seed_point(&lat);
    let contour =
        detect_plane_contour(&intensity, &plane, cfg.contour.iso).map_err(|e| e.in_stage("contour"))?;
    let surface = coverage_mask(cfg, &lat, &plane, &seed);
    timings.contour_s = lap(&mut t);

    let (baseline, base_report) = run_scheme(cfg, Scheme::Baseline, &metric, &contour, &surface)?;
    timings.baseline_s = lap(&mut t);
    let (corrected, corr_report) = run_scheme(cfg, Scheme::Corrected, &metric, &contour, &surface)?;
    timings.corrected_s = lap(&mut t);
    timings.total_s = start.elapsed().as_secs_f64();

    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        environment: Environment::current(),
        seeds: Seeds {
            phantom: cfg.phantom.seed,
        },
        inputs: InputSummary {
            phantom_fingerprint: hex(intensity.fingerprint()),
            metric_fingerprint: hex(metric.fingerprint()),
            seed_point: seed,
            plane,
            contour_points: contour.len(),
            surface_voxels: surface.count(),
        },
        coverage_gap: corr_report.coverage - base_report.coverage,
        baseline: base_report,
        corrected: corr_report,
    };
    let finite = [
        report.baseline.s_net,
        report.baseline.coverage,
        report.corrected.s_net,
        report.corrected.coverage,
    ];
    if finite.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("report contains non-finite numbers").in_stage("report"));
    }
    Ok(CompareOutcome {
        report,
        timings,
        intensity,
        metric,
        contour,
        baseline,
        corrected,
    })
}

/// Arrival map as a plain field; voxels never accepted are written as -1.
pub fn arrival_field(map: &ArrivalMap) -> ScalarField3 {
    let mut f = map.action.clone();
    for (lin, v) in f.values.iter_mut().enumerate() {
        if !map.is_accepted(lin) {
            *v = -1.0;
        }
    }
    f
}

/// Inverse of [`arrival_field`]: negative values mark voxels never accepted.
pub fn arrival_from_field(mut field: ScalarField3) -> ArrivalMap {
    for v in &mut field.values {
        if *v < 0.0 {
            *v = f64::INFINITY;
        }
    }
    ArrivalMap::from_action(field)
}

/// Write `report.json`, `timings.json`, both networks (CSV and PLY) and
/// both arrival maps into `dir`.
pub fn write_outputs(out: &CompareOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), out.report.to_json())?;
    let timings = serde_json::to_string_pretty(&out.timings).expect("timings serialize");
    fs::write(dir.join("timings.json"), timings + "\n")?;
    for (name, run) in [("baseline", &out.baseline), ("corrected", &out.corrected)] {
        export_network(&run.network, NetworkFormat::Csv, &dir.join(format!("{name}_paths.csv")))?;
        export_network(&run.network, NetworkFormat::Ply, &dir.join(format!("{name}_paths.ply")))?;
        save_volume(&arrival_field(&run.arrival), &dir.join(format!("{name}_action")))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Config {
        let mut cfg = Config::default();
        cfg.grid.dims = [40, 40, 40];
        cfg.phantom.ellipsoids = Some(vec![EllipsoidSpec {
            center: Vec3::new(20.0, 19.5, 19.5),
            semi_axes: Vec3::new(14.0, 9.0, 8.0),
            intensity_base: 0.8,
            intensity_gradient: Vec3::zeros(),
        }]);
        cfg.seed_point = Some(Vec3::new(8.0, 19.5, 19.5));
        cfg.plane.point = Some(Vec3::new(26.0, 19.5, 19.5));
        cfg
    }

    #[test]
    fn defaults_roundtrip_through_json() {
        let cfg = Config::default();
        let back = Config::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(Config::from_json("{}").unwrap(), cfg);
        assert_eq!(cfg.metric.alpha, 0.01);
        assert_eq!(cfg.metric.beta, 14.0);
        assert_eq!(cfg.solver.lambda, 1.0);
        assert_eq!(cfg.solver.zero_set_radius, 3.0);
    }

    #[test]
    fn config_errors() {
        let zero_normal = r#"{"plane": {"normal": [0, 0, 0]}}"#;
        let err = Config::from_json(zero_normal).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
        assert_eq!(err.exit_code(), 2);
        assert!(matches!(Config::from_json(r#"{"schema_version": 9}"#), Err(Error::Config(_))));
        assert!(matches!(Config::from_json(r#"{"bogus": 1}"#), Err(Error::Config(_))));
        assert!(matches!(
            Config::from_json(r#"{"solver": {"lambda": 2.0}}"#),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn lambda_zero_matches_baseline() {
        let mut cfg = small();
        cfg.solver.lambda = 0.0;
        let out = run_compare(&cfg).unwrap();
        assert_eq!(
            out.baseline.arrival.action.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            out.corrected.arrival.action.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(out.report.baseline, out.report.corrected);
    }

    #[test]
    fn small_compare_is_deterministic() {
        let cfg = small();
        let a = run_compare(&cfg).unwrap();
        let b = run_compare(&cfg).unwrap();
        assert_eq!(a.report.to_json(), b.report.to_json());
        assert_eq!(a.report.baseline.failed_paths, 0);
        assert!(a.report.baseline.coverage > 0.0);
        let dir = tempfile::tempdir().unwrap();
        write_outputs(&a, dir.path()).unwrap();
        for f in ["report.json", "timings.json", "baseline_paths.csv", "corrected_paths.ply", "corrected_action.raw"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }

    #[test]
    fn stage_errors_are_tagged() {
        let mut cfg = small();
        cfg.contour.iso = 0.95;
        match run_compare(&cfg) {
            Err(Error::Stage { stage, .. }) => assert_eq!(stage, "contour"),
            other => panic!("{other:?}"),
        }
    }
}
