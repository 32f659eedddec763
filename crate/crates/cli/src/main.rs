//! `geonet`: phantoms, metrics, Eikonal solves, path tracing and the
//! baseline-versus-corrected comparison from the command line.
//!
//! Precedence is flag > config file > built-in default. Exit codes: 0 ok,
//! 2 config or usage, 3 numeric/solver failure, 4 I/O or format.

// `!(x > 0.0)` style checks reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use geonet_core::eikonal::{solve, CurvatureVariant, Scheme, StopRule, ZeroSet};
use geonet_core::export::{export_network, read_network_csv, NetworkFormat};
use geonet_core::io::{load_volume, save_volume};
use geonet_core::paths::{build_network, detect_plane_contour, network_energy, TraceParams};
use geonet_core::phantom::{build_metric, make_phantom, MetricVariant};
use geonet_core::pipeline::{arrival_field, arrival_from_field, run_compare, write_outputs, Config};
use geonet_core::surfana::{
    equidistant_area_factor, isotropic_surface_action, network_action_residual,
    ParametricSurfaceSamples,
};
use geonet_core::grid::ScalarField3;
use geonet_core::{Error, Result, Vec3};
use serde_json::json;

#[derive(Parser)]
#[command(name = "geonet", version, about = "Minimal-path networks on voxel grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic ellipsoid phantom.
    Phantom {
        #[command(flatten)]
        opts: ConfigArgs,
        /// Output volume stem (`.raw` + `.json`).
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the image metric from an intensity volume.
    Metric {
        #[command(flatten)]
        opts: ConfigArgs,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grow an action map from the zero set.
    Solve {
        #[command(flatten)]
        opts: ConfigArgs,
        #[arg(long)]
        metric: PathBuf,
        #[arg(long, value_enum, default_value_t = SchemeArg::Corrected)]
        scheme: SchemeArg,
        #[arg(long, value_enum, default_value_t = StopArg::Plane)]
        stop: StopArg,
        /// Action ceiling for `--stop limit`.
        #[arg(long)]
        max_action: Option<f64>,
        /// Output stem; unaccepted voxels are written as -1.
        #[arg(long)]
        out: PathBuf,
    },
    /// Trace a path network from a saved action map.
    Trace {
        #[command(flatten)]
        opts: ConfigArgs,
        /// Intensity volume the contour is detected on.
        #[arg(long)]
        intensity: PathBuf,
        #[arg(long)]
        action: PathBuf,
        /// Metric for the network energy in the summary.
        #[arg(long)]
        metric: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run both schemes on identical inputs and write the report.
    Compare {
        #[command(flatten)]
        opts: ConfigArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Analytic area checks, optionally on a traced network.
    Analyze {
        /// Sphere radius for the surface-action quadrature.
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        /// Samples per parameter direction.
        #[arg(long, default_value_t = 64)]
        samples: usize,
        /// Divergence of the normal field and Gaussian curvature for the
        /// equidistant area factor.
        #[arg(long, num_args = 2, value_names = ["DIV", "KG"], allow_hyphen_values = true)]
        area_factor: Option<Vec<f64>>,
        /// Distance for `--area-factor`.
        #[arg(long, default_value_t = 1.0)]
        distance: f64,
        /// Network CSV to compare against the metric-weighted area estimate.
        #[arg(long, requires = "metric")]
        network: Option<PathBuf>,
        #[arg(long)]
        metric: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Baseline,
    Corrected,
}

#[derive(Clone, Copy, ValueEnum)]
enum StopArg {
    Plane,
    Full,
    Limit,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Ply,
}

#[derive(Clone, Copy, ValueEnum)]
enum CurvatureArg {
    Sum,
    Mean,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    ConvexCombination,
    Unscaled,
}

/// Overrides layered on top of `--config`.
#[derive(Args, Default)]
struct ConfigArgs {
    /// JSON run document.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, num_args = 3, value_names = ["NX", "NY", "NZ"])]
    dims: Option<Vec<usize>>,
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Phantom noise seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, value_enum)]
    metric_variant: Option<VariantArg>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_enum)]
    curvature: Option<CurvatureArg>,
    /// 6, 18 or 26.
    #[arg(long)]
    neighborhood: Option<u8>,
    #[arg(long)]
    zero_set_radius: Option<f64>,
    #[arg(long)]
    kappa_clamp: Option<f64>,
    #[arg(long)]
    smoothing: Option<bool>,
    #[arg(long, num_args = 3, value_names = ["X", "Y", "Z"], allow_hyphen_values = true)]
    seed_point: Option<Vec<f64>>,
    #[arg(long, num_args = 3, value_names = ["X", "Y", "Z"], allow_hyphen_values = true)]
    plane_point: Option<Vec<f64>>,
    #[arg(long, num_args = 3, value_names = ["X", "Y", "Z"], allow_hyphen_values = true)]
    plane_normal: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    tilt_deg: Option<f64>,
    #[arg(long)]
    iso: Option<f64>,
    #[arg(long)]
    coverage_radius: Option<f64>,
}

fn vec3(v: &[f64]) -> Vec3 {
    Vec3::new(v[0], v[1], v[2])
}

impl ConfigArgs {
    /// Full config for runs that solve or trace. A loaded volume fixes the
    /// grid, whatever the config says.
    fn resolve_on(&self, vol: &ScalarField3) -> Result<Config> {
        let mut c = self.layered()?;
        let s = vol.lattice.spacing;
        if s[0] != s[1] || s[1] != s[2] || vol.lattice.origin != [0.0; 3] {
            return Err(Error::Config("volume must have isotropic spacing and zero origin".into()));
        }
        c.grid.dims = vol.lattice.dims;
        c.grid.spacing = s[0];
        c.validate()?;
        Ok(c)
    }

    fn resolve(&self) -> Result<Config> {
        let c = self.layered()?;
        c.validate()?;
        Ok(c)
    }

    /// Config for building volumes only; seed and plane are not checked.
    fn resolve_volumes(&self) -> Result<Config> {
        let c = self.layered()?;
        c.validate_volumes()?;
        Ok(c)
    }

    fn layered(&self) -> Result<Config> {
        let mut c = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        if let Some(d) = &self.dims {
            c.grid.dims = [d[0], d[1], d[2]];
        }
        set(&mut c.grid.spacing, self.spacing);
        set(&mut c.phantom.noise_sigma, self.noise_sigma);
        set(&mut c.phantom.seed, self.seed);
        set(&mut c.metric.alpha, self.alpha);
        set(&mut c.metric.beta, self.beta);
        if let Some(v) = self.metric_variant {
            c.metric.variant = match v {
                VariantArg::ConvexCombination => MetricVariant::ConvexCombination,
                VariantArg::Unscaled => MetricVariant::Unscaled,
            };
        }
        set(&mut c.solver.lambda, self.lambda);
        if let Some(v) = self.curvature {
            c.solver.curvature = match v {
                CurvatureArg::Sum => CurvatureVariant::Sum,
                CurvatureArg::Mean => CurvatureVariant::Mean,
            };
        }
        if let Some(n) = self.neighborhood {
            c.solver.neighborhood = n.try_into().map_err(Error::Config)?;
        }
        set(&mut c.solver.zero_set_radius, self.zero_set_radius);
        set(&mut c.solver.kappa_clamp, self.kappa_clamp);
        set(&mut c.solver.smoothing, self.smoothing);
        if let Some(p) = &self.seed_point {
            c.seed_point = Some(vec3(p));
        }
        if let Some(p) = &self.plane_point {
            c.plane.point = Some(vec3(p));
        }
        if let Some(n) = &self.plane_normal {
            c.plane.normal = Some(vec3(n));
        }
        set(&mut c.plane.tilt_deg, self.tilt_deg);
        set(&mut c.contour.iso, self.iso);
        set(&mut c.coverage.radius, self.coverage_radius);
        Ok(c)
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn print(v: serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(&v).expect("json"));
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Phantom { opts, out } => {
            let cfg = opts.resolve_volumes()?;
            let lat = cfg.lattice()?;
            let vol = make_phantom(&cfg.specs(&lat), &lat, cfg.phantom.noise_sigma, cfg.phantom.seed)?;
            save_volume(&vol, &out)?;
            print(json!({ "dims": lat.dims, "fingerprint": format!("{:016x}", vol.fingerprint()) }));
        }
        Command::Metric { opts, input, out } => {
            let cfg = opts.resolve_volumes()?;
            let phi = build_metric(&load_volume(&input)?, &cfg.metric)?;
            save_volume(&phi, &out)?;
            let (lo, hi) = phi.min_max();
            print(json!({ "phi_min": lo, "phi_max": hi }));
        }
        Command::Solve { opts, metric, scheme, stop, max_action, out } => {
            let phi = load_volume(&metric)?;
            let cfg = opts.resolve_on(&phi)?;
            let lat = phi.lattice;
            let scheme = match scheme {
                SchemeArg::Baseline => Scheme::Baseline,
                SchemeArg::Corrected => Scheme::Corrected,
            };
            let mut sc = cfg.solver_config(scheme, cfg.plane(&lat)?);
            match stop {
                StopArg::Plane => {}
                StopArg::Full => sc.stop = StopRule::FullGrid,
                StopArg::Limit => {
                    let max_action = max_action
                        .ok_or_else(|| Error::Config("--stop limit needs --max-action".into()))?;
                    sc.stop = StopRule::ActionLimit { max_action };
                }
            }
            let zs = ZeroSet::ball(cfg.seed_point(&lat), cfg.solver.zero_set_radius);
            let map = solve(&phi, &zs, &sc)?;
            save_volume(&arrival_field(&map), &out)?;
            print(json!({
                "accepted_voxels": map.stats.accepted,
                "curvature_fallbacks": map.stats.curvature_fallbacks,
                "max_action": map.max_accepted(),
            }));
        }
        Command::Trace { opts, intensity, action, metric, format, out } => {
            let img = load_volume(&intensity)?;
            let cfg = opts.resolve_on(&img)?;
            let map = arrival_from_field(load_volume(&action)?);
            if map.lattice() != &img.lattice {
                return Err(Error::Config("action and intensity lattices differ".into()));
            }
            let contour = detect_plane_contour(&img, &cfg.plane(&img.lattice)?, cfg.contour.iso)?;
            let phi = metric.as_deref().map(load_volume).transpose()?;
            let phi_min = phi.as_ref().map_or(cfg.metric.alpha, |p| p.min_max().0);
            let net = build_network(&map, &contour, &TraceParams::for_lattice(&img.lattice, phi_min))?;
            let format = match format {
                FormatArg::Csv => NetworkFormat::Csv,
                FormatArg::Ply => NetworkFormat::Ply,
            };
            export_network(&net, format, &out)?;
            let energy = phi.as_ref().map(|p| network_energy(&net, p)).transpose()?;
            print(json!({
                "paths": net.paths.len(),
                "failed_paths": net.failed(),
                "points": net.point_count(),
                "s_net": energy,
            }));
        }
        Command::Compare { opts, out } => {
            let cfg = opts.resolve()?;
            let res = run_compare(&cfg)?;
            write_outputs(&res, &out)?;
            let r = &res.report;
            print(json!({
                "baseline": { "coverage": r.baseline.coverage, "s_net": r.baseline.s_net },
                "corrected": { "coverage": r.corrected.coverage, "s_net": r.corrected.s_net },
                "coverage_gap": r.coverage_gap,
                "out": out,
            }));
        }
        Command::Analyze { radius, samples, area_factor, distance, network, metric } => {
            analyze(radius, samples, area_factor, distance, network.as_deref(), metric.as_deref())?;
        }
    }
    Ok(())
}

fn analyze(
    radius: f64,
    samples: usize,
    area_factor: Option<Vec<f64>>,
    distance: f64,
    network: Option<&Path>,
    metric: Option<&Path>,
) -> Result<()> {
    if !(radius > 0.0) || samples < 3 {
        return Err(Error::Config("--radius must be positive and --samples at least 3".into()));
    }
    let pi = std::f64::consts::PI;
    let sphere = ParametricSurfaceSamples::from_fn(samples, samples, (0.0, pi), (0.0, 2.0 * pi), |u, v| {
        radius * Vec3::new(u.sin() * v.cos(), u.sin() * v.sin(), u.cos())
    })?;
    let area = isotropic_surface_action(&sphere, |_| 1.0)?;
    let exact = 4.0 * pi * radius * radius;
    let mut out = json!({
        "sphere": {
            "radius": radius,
            "samples": samples,
            "area": area.value,
            "exact": exact,
            "relative_error": (area.value - exact).abs() / exact,
        }
    });
    if let Some(a) = area_factor {
        out["area_factor"] = json!({
            "div_m": a[0],
            "gaussian_curvature": a[1],
            "distance": distance,
            "factor": equidistant_area_factor(a[0], a[1], distance),
        });
    }
    if let (Some(n), Some(m)) = (network, metric) {
        let net = read_network_csv(n)?;
        let phi = load_volume(m)?;
        let r = network_action_residual(&net, &phi)?;
        let means: Vec<f64> = r.spacing.iter().map(|s| s.mean).collect();
        out["network"] = json!({
            "paths": net.paths.len(),
            "s_net": r.s_net,
            "weighted_estimate": r.weighted_estimate,
            "spacing_mean": means.iter().sum::<f64>() / means.len() as f64,
            "spacing_max": r.spacing.iter().map(|s| s.max).fold(0.0, f64::max),
        });
    }
    print(out);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
