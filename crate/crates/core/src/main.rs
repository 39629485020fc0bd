use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use poroelastography::derived::TumorReport;
use poroelastography::domain::{compression_modulus, MapKind, ScalarMap, TumorRegion};
use poroelastography::fields::{radial_profile_with, smooth_profile, ProfileMode, SteadyState};
use poroelastography::fitting::{fit_alpha_with, AlphaFitOptions};
use poroelastography::forward::synthesize_creep_sequence;
use poroelastography::io::{
    alpha_fit_block, parse_report_block, profile_csv, read_map_csv, read_sequence, read_synthetic_config,
    report_block, report_csv_header, report_csv_row, write_map_csv, write_pgm, write_sequence, write_text,
    GroundTruth, RegionSpec,
};
use poroelastography::pipeline::{analyze, run_validation, AnalysisOptions, Sample, ValidationOptions};

/// Poroelastography maps and tumor transport parameters from creep strain sequences.
#[derive(Parser)]
#[command(name = "poro", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic creep sequence from a key=value config.
    Synth { config: PathBuf, out_dir: PathBuf },
    /// Compute maps, the radial profile, the alpha fit and the tumor report.
    Analyze(AnalyzeArgs),
    /// Fit alpha to the radial profile of a pressure map CSV.
    Fit(FitArgs),
    /// Run the two-sample synthetic validation and check the recovery tolerance.
    Validate(ValidateArgs),
    /// Collect report.txt files into one CSV table.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RegionArgs {
    /// Tumor center row (pixels); overrides the manifest region.
    #[arg(long, requires_all = ["center_col", "radius_mm"])]
    center_row: Option<f64>,
    #[arg(long, requires_all = ["center_row", "radius_mm"])]
    center_col: Option<f64>,
    #[arg(long, requires_all = ["center_row", "center_col"])]
    radius_mm: Option<f64>,
}

impl RegionArgs {
    fn spec(&self) -> Option<RegionSpec> {
        Some(RegionSpec {
            center_row: self.center_row?,
            center_col: self.center_col?,
            radius_mm: self.radius_mm?,
        })
    }
}

#[derive(Args)]
struct ProfileArgs {
    /// Radial bins (default: about one per pixel).
    #[arg(long)]
    bins: Option<usize>,
    /// Sample one ray at this angle instead of averaging over angle.
    #[arg(long)]
    ray_angle_deg: Option<f64>,
    /// Profile smoothing window before the fit (odd).
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 5.0)]
    init_alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    init_psi: f64,
    /// Fit the smoothed profile without per-bin noise weights.
    #[arg(long)]
    unweighted: bool,
}

impl ProfileArgs {
    fn mode(&self) -> ProfileMode {
        match self.ray_angle_deg {
            Some(deg) => ProfileMode::SingleRay { angle_rad: deg.to_radians() },
            None => ProfileMode::Averaged,
        }
    }

    fn fit_options(&self) -> AlphaFitOptions {
        AlphaFitOptions {
            init_alpha: self.init_alpha,
            init_psi: self.init_psi,
            smoothing_window: self.window,
            weighted: !self.unweighted,
            ..AlphaFitOptions::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SteadyArg {
    /// Last frame stands in for the drained state.
    Last,
    /// Per-pixel exponential fit extrapolated to t -> infinity.
    Extrapolated,
}

#[derive(Args)]
struct AnalyzeArgs {
    manifest: PathBuf,
    out_dir: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    t_pressure: f64,
    /// Flow window `t1,t2` in seconds.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [10.0, 60.0])]
    t_flow: Vec<f64>,
    /// Compression modulus K (kPa).
    #[arg(long, conflicts_with_all = ["e_kpa", "nu"])]
    k_kpa: Option<f64>,
    /// Young's modulus (kPa); needs --nu.
    #[arg(long, requires = "nu")]
    e_kpa: Option<f64>,
    #[arg(long, requires = "e_kpa")]
    nu: Option<f64>,
    /// Divide pressure, velocity and flow maps by this applied pressure (kPa).
    #[arg(long)]
    applied_kpa: Option<f64>,
    /// Median filter half-width applied to the pressure map (0 disables).
    #[arg(long, default_value_t = 0)]
    denoise: usize,
    #[arg(long, value_enum, default_value_t = SteadyArg::Last)]
    steady_state: SteadyArg,
    /// Starting time constant of the per-pixel fits (s).
    #[arg(long, default_value_t = 10.0)]
    init_tau: f64,
    #[command(flatten)]
    region: RegionArgs,
    #[command(flatten)]
    profile: ProfileArgs,
}

#[derive(Args)]
struct FitArgs {
    /// Pressure map CSV, e.g. `pressure.csv` written by `analyze`.
    pressure: PathBuf,
    #[command(flatten)]
    region: RegionArgs,
    #[command(flatten)]
    profile: ProfileArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SampleArg {
    A,
    B,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, value_enum, ignore_case = true)]
    sample: SampleArg,
    /// Finite-difference nodes of the oracle profile.
    #[arg(long, default_value_t = 4096)]
    nodes: usize,
    /// Add strain noise at 2% of the peak fluid-driven strain.
    #[arg(long)]
    noise: bool,
    /// Noise realizations scored by their median.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
}

/// Exit status of a command that ran to completion.
enum Outcome {
    Success,
    ThresholdFailure,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth { config, out_dir } => synth(&config, &out_dir),
        Command::Analyze(args) => analyze_cmd(&args),
        Command::Fit(args) => fit_cmd(&args),
        Command::Validate(args) => validate(&args),
        Command::Report { reports, out } => report(&reports, out.as_deref()),
    };
    match result {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::ThresholdFailure) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn synth(config: &Path, out_dir: &Path) -> anyhow::Result<Outcome> {
    let cfg = read_synthetic_config(config)?;
    let (seq, truth) = synthesize_creep_sequence(&cfg)?;
    let (center_row, center_col) = cfg.center();
    let region = RegionSpec { center_row, center_col, radius_mm: cfg.a_mm };
    let ground_truth = GroundTruth {
        alpha: truth.alpha,
        tau_s: truth.tau_s,
        psi_kpa: truth.psi_kpa,
        a_mm: truth.a_mm,
    };
    let manifest = write_sequence(&seq, out_dir, Some(region), Some(ground_truth))?;
    println!("wrote {} frame pairs; manifest {}", seq.len(), manifest.display());
    Ok(Outcome::Success)
}

fn modulus(args: &AnalyzeArgs) -> anyhow::Result<f64> {
    match (args.k_kpa, args.e_kpa, args.nu) {
        (Some(k), _, _) if k.is_finite() && k > 0.0 => Ok(k),
        (Some(k), _, _) => bail!("--k-kpa must be positive, got {k}"),
        (None, Some(e), Some(nu)) => Ok(compression_modulus(e, nu)?),
        _ => bail!("elasticity input missing: give --k-kpa or --e-kpa with --nu"),
    }
}

fn write_map(map: &ScalarMap, t_s: f64, dir: &Path, stem: &str) -> anyhow::Result<()> {
    write_map_csv(map, t_s, &dir.join(format!("{stem}.csv")))?;
    write_pgm(map, &dir.join(format!("{stem}.pgm")))?;
    Ok(())
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn analyze_cmd(args: &AnalyzeArgs) -> anyhow::Result<Outcome> {
    let k_kpa = modulus(args)?;
    let (manifest, seq) = read_sequence(&args.manifest)?;
    let spec = args
        .region
        .spec()
        .or(manifest.region)
        .ok_or_else(|| anyhow!("no tumor region: the manifest has none and no region flags were given"))?;
    let region = spec.to_region(manifest.rows, manifest.cols, manifest.pixel_spacing_mm)?;

    let mut opts = AnalysisOptions::new(k_kpa);
    opts.t_pressure_s = args.t_pressure;
    opts.t_flow_s = (args.t_flow[0], args.t_flow[1]);
    opts.applied_kpa = args.applied_kpa;
    opts.n_bins = args.profile.bins;
    opts.denoise_half_width = args.denoise;
    opts.steady_state = match args.steady_state {
        SteadyArg::Last => SteadyState::LastFrame,
        SteadyArg::Extrapolated => SteadyState::Extrapolated { init_tau_s: args.init_tau },
    };
    opts.profile_mode = args.profile.mode();
    opts.init_tau_s = args.init_tau;
    opts.fit = args.profile.fit_options();
    let result = analyze(&seq, &region, &opts)?;

    let out = &args.out_dir;
    create_dir(out)?;
    write_map(&result.pressure, args.t_pressure, out, "pressure")?;
    write_map(&result.velocity, args.t_pressure, out, "velocity")?;
    write_map(&result.flow, args.t_flow[1], out, "flow")?;
    write_map(&result.tc, 0.0, out, "tc")?;
    write_text(&out.join("profile.csv"), &profile_csv(&result.profile, &result.smoothed_profile))?;
    write_text(&out.join("alpha_fit.txt"), &alpha_fit_block(&result.alpha_fit))?;
    write_text(&out.join("report.txt"), &report_block(&result.report))?;
    let name = tumor_name(&args.manifest);
    write_text(
        &out.join("report.csv"),
        &format!("{}\n{}\n", report_csv_header(), report_csv_row(&name, &result.report)),
    )?;

    let r = &result.report;
    println!(
        "alpha={:.6} converged={} peak_ifp_ratio={:.6} perm_ratio_per_m2={:.6e} sv_ratio_per_cm={:.3}",
        r.alpha, r.fit_converged, r.peak_ifp_ratio, r.perm_ratio_per_m2, r.sv_ratio_per_cm
    );
    if let Some(truth) = manifest.ground_truth {
        println!(
            "ground truth alpha={:.6} relative error={:.3e}",
            truth.alpha,
            (r.alpha / truth.alpha - 1.0).abs()
        );
    }
    if !r.fit_converged {
        eprintln!("warning: alpha fit did not converge; report flags fit_converged=false");
    }
    Ok(Outcome::Success)
}

fn tumor_name(path: &Path) -> String {
    path.parent()
        .and_then(|p| p.file_name())
        .or_else(|| path.file_stem())
        .map(|s| s.to_string_lossy().replace(',', "_"))
        .unwrap_or_else(|| "tumor".into())
}

fn fit_cmd(args: &FitArgs) -> anyhow::Result<Outcome> {
    let (map, _) = read_map_csv(&args.pressure, MapKind::PressureKpa)?;
    let spec = args
        .region
        .spec()
        .ok_or_else(|| anyhow!("give the tumor region with --center-row, --center-col and --radius-mm"))?;
    let region: TumorRegion = spec.to_region(map.rows(), map.cols(), map.pixel_spacing_mm())?;
    let bins = args
        .profile
        .bins
        .unwrap_or_else(|| (region.radius_mm() / region.pixel_spacing_mm()).round() as usize)
        .max(6);
    let profile = radial_profile_with(&map, &region, bins, args.profile.mode())?;
    let fit = fit_alpha_with(&profile, region.radius_mm(), &args.profile.fit_options())?;
    let block = alpha_fit_block(&fit);
    match &args.out {
        Some(path) => {
            write_text(path, &block)?;
            let smoothed = smooth_profile(&profile, args.profile.window)?;
            write_text(&path.with_extension("profile.csv"), &profile_csv(&profile, &smoothed))?;
        }
        None => print!("{block}"),
    }
    Ok(Outcome::Success)
}

fn validate(args: &ValidateArgs) -> anyhow::Result<Outcome> {
    let sample = match args.sample {
        SampleArg::A => Sample::A,
        SampleArg::B => Sample::B,
    };
    let mut opts = ValidationOptions::new(sample);
    opts.oracle_nodes = args.nodes;
    opts.seeds = args.seeds;
    if args.noise {
        opts = opts.noisy();
    }
    let outcome = run_validation(&opts)?;
    println!("sample={}", sample.name());
    println!("alpha_true={}", outcome.alpha_true);
    println!("alpha_recovered={}", outcome.median_alpha);
    println!("realizations={}", outcome.recovered.len());
    println!("relative_error={}", outcome.relative_error);
    println!("tolerance={}", outcome.tolerance);
    println!("oracle_nodes={}", args.nodes);
    println!("oracle_max_relative_error={}", outcome.oracle_error);
    println!("result={}", if outcome.passed { "PASS" } else { "FAIL" });
    Ok(if outcome.passed {
        Outcome::Success
    } else {
        Outcome::ThresholdFailure
    })
}

fn report(paths: &[PathBuf], out: Option<&Path>) -> anyhow::Result<Outcome> {
    let mut table = report_csv_header() + "\n";
    for path in paths {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let rep: TumorReport = parse_report_block(&text).with_context(|| format!("in {}", path.display()))?;
        table += &report_csv_row(&tumor_name(path), &rep);
        table.push('\n');
    }
    match out {
        Some(path) => write_text(path, &table)?,
        None => print!("{table}"),
    }
    Ok(Outcome::Success)
}
