//! End-to-end analysis of a creep sequence and the synthetic validation
//! protocol built on it.

use crate::derived::{build_report, ReportMaps, TumorReport};
use crate::domain::{compression_modulus, ScalarMap, StrainSequence, TumorRegion};
use crate::error::{Error, Result};
use crate::fields::{
    denoise_map, fluid_flow_map, fluid_pressure_map_with, fluid_velocity_map, normalize_map, radial_profile_with,
    smooth_profile, ProfileMode, RadialProfile, SteadyState,
};
use crate::fitting::{fit_alpha_with, tc_map, AlphaFit, AlphaFitOptions};
use crate::forward::{analytical_pressure, helmholtz_oracle, synthesize_creep_sequence, ProfileSource, SyntheticConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub t_pressure_s: f64,
    pub t_flow_s: (f64, f64),
    pub k_kpa: f64,
    pub applied_kpa: Option<f64>,
    /// Radial bins; `None` picks about one bin per pixel.
    pub n_bins: Option<usize>,
    pub denoise_half_width: usize,
    pub steady_state: SteadyState,
    pub profile_mode: ProfileMode,
    pub init_tau_s: f64,
    pub fit: AlphaFitOptions,
}

impl AnalysisOptions {
    pub fn new(k_kpa: f64) -> Self {
        Self {
            t_pressure_s: 10.0,
            t_flow_s: (10.0, 60.0),
            k_kpa,
            applied_kpa: None,
            n_bins: None,
            denoise_half_width: 0,
            steady_state: SteadyState::LastFrame,
            profile_mode: ProfileMode::Averaged,
            init_tau_s: 10.0,
            fit: AlphaFitOptions::default(),
        }
    }

    fn bins_for(&self, region: &TumorRegion) -> usize {
        self.n_bins
            .unwrap_or_else(|| (region.radius_mm() / region.pixel_spacing_mm()).round() as usize)
            .max(6)
    }
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub pressure: ScalarMap,
    pub velocity: ScalarMap,
    pub flow: ScalarMap,
    pub tc: ScalarMap,
    pub profile: RadialProfile,
    pub smoothed_profile: RadialProfile,
    pub alpha_fit: AlphaFit,
    pub report: TumorReport,
}

/// Pressure map at the configured time, optionally median-filtered and load-normalized.
pub fn pressure_for_fit(seq: &StrainSequence, region: &TumorRegion, opts: &AnalysisOptions) -> Result<ScalarMap> {
    let mut pressure = fluid_pressure_map_with(seq, opts.t_pressure_s, opts.k_kpa, region, opts.steady_state)?;
    pressure = denoise_map(&pressure, opts.denoise_half_width)?;
    if let Some(applied) = opts.applied_kpa {
        pressure = normalize_map(&pressure, applied)?;
    }
    Ok(pressure)
}

/// Radial profile of the pressure map and the `alpha` fit on it.
pub fn fit_pressure_profile(
    pressure: &ScalarMap,
    region: &TumorRegion,
    opts: &AnalysisOptions,
) -> Result<(RadialProfile, AlphaFit)> {
    let profile = radial_profile_with(pressure, region, opts.bins_for(region), opts.profile_mode)?;
    let fit = fit_alpha_with(&profile, region.radius_mm(), &opts.fit)?;
    Ok((profile, fit))
}

pub fn analyze(seq: &StrainSequence, region: &TumorRegion, opts: &AnalysisOptions) -> Result<Analysis> {
    let pressure = pressure_for_fit(seq, region, opts)?;
    let velocity = fluid_velocity_map(&pressure, region)?;
    let mut flow = fluid_flow_map(seq, opts.t_flow_s.0, opts.t_flow_s.1, region)?;
    if let Some(applied) = opts.applied_kpa {
        flow = normalize_map(&flow, applied)?;
    }
    let tc = tc_map(seq, region, opts.init_tau_s)?;
    let (profile, alpha_fit) = fit_pressure_profile(&pressure, region, opts)?;
    let smoothed_profile = smooth_profile(&profile, opts.fit.smoothing_window.max(1))?;
    let report = build_report(
        &alpha_fit,
        region,
        ReportMaps {
            velocity: &velocity,
            flow: &flow,
            tc: &tc,
        },
    )?;
    Ok(Analysis {
        pressure,
        velocity,
        flow,
        tc,
        profile,
        smoothed_profile,
        alpha_fit,
        report,
    })
}

/// The two simulated tumors of the validation protocol (inclusion properties).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sample {
    A,
    B,
}

impl Sample {
    pub const RADIUS_M: f64 = 0.003;
    pub const YOUNG_KPA: f64 = 97.02;
    pub const POISSON: f64 = 0.47;

    /// Interstitial permeability `k` (m^4 N^-1 s^-1).
    pub fn interstitial_permeability(self) -> f64 {
        match self {
            Sample::A => 3.19e-12,
            Sample::B => 3.10e-14,
        }
    }

    /// Microfiltration coefficient `chi` ((Pa s)^-1).
    pub fn microfiltration(self) -> f64 {
        match self {
            Sample::A => 5.67e-8,
            Sample::B => 5.67e-7,
        }
    }

    /// `alpha = a sqrt(chi / k)`.
    pub fn alpha(self) -> f64 {
        Self::RADIUS_M * (self.microfiltration() / self.interstitial_permeability()).sqrt()
    }

    pub fn name(self) -> &'static str {
        match self {
            Sample::A => "A",
            Sample::B => "B",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationOptions {
    pub sample: Sample,
    pub oracle_nodes: usize,
    /// Strain noise as a fraction of the peak fluid-driven volumetric strain; 0 disables.
    pub noise_fraction: f64,
    pub seeds: u64,
    pub rows: usize,
    pub pixel_spacing_mm: f64,
    pub tau_s: f64,
    pub n_frames: usize,
    pub dt_s: f64,
    pub t_pressure_s: f64,
}

impl ValidationOptions {
    pub fn new(sample: Sample) -> Self {
        Self {
            sample,
            oracle_nodes: 4096,
            noise_fraction: 0.0,
            seeds: 20,
            rows: 128,
            pixel_spacing_mm: 0.1,
            tau_s: 20.0,
            n_frames: 601,
            dt_s: 0.1,
            t_pressure_s: 10.0,
        }
    }

    pub fn noisy(mut self) -> Self {
        self.noise_fraction = 0.02;
        self
    }

    pub fn tolerance(&self) -> f64 {
        if self.noise_fraction > 0.0 {
            0.20
        } else {
            0.10
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationOutcome {
    pub sample: Sample,
    pub alpha_true: f64,
    pub recovered: Vec<f64>,
    pub median_alpha: f64,
    pub relative_error: f64,
    pub tolerance: f64,
    /// Max oracle deviation from the closed-form profile, relative to its peak.
    pub oracle_error: f64,
    pub passed: bool,
}

/// Max `|oracle - closed form|` over the nodes, relative to the profile peak.
pub fn oracle_closed_form_error(alpha: f64, a_m: f64, nodes: usize) -> Result<f64> {
    let w = (alpha / a_m).powi(2);
    let samples = helmholtz_oracle(alpha, a_m, w, nodes)?;
    let mut worst: f64 = 0.0;
    let mut peak: f64 = 0.0;
    for s in &samples {
        let exact = analytical_pressure(s.r.min(a_m), 1.0, alpha, a_m)?;
        worst = worst.max((s.p - exact).abs());
        peak = peak.max(exact.abs());
    }
    Ok(worst / peak)
}

/// Oracle profile, creep synthesis, pressure extraction and `alpha` fit for one
/// sample; with noise, the median over `seeds` realizations is scored.
pub fn run_validation(opts: &ValidationOptions) -> Result<ValidationOutcome> {
    let alpha_true = opts.sample.alpha();
    let k_kpa = compression_modulus(Sample::YOUNG_KPA, Sample::POISSON)?;
    let a_mm = Sample::RADIUS_M * 1e3;
    let base = SyntheticConfig {
        alpha: alpha_true,
        psi_kpa: 1.0,
        a_mm,
        rows: opts.rows,
        cols: opts.rows,
        pixel_spacing_mm: opts.pixel_spacing_mm,
        tau_s: opts.tau_s,
        eps_inf: -1.0 / k_kpa,
        compression_modulus_kpa: k_kpa,
        n_frames: opts.n_frames,
        dt_s: opts.dt_s,
        noise_sigma: 0.0,
        seed: 0,
        axial_share: 2.0,
        profile: ProfileSource::Oracle { nodes: opts.oracle_nodes },
    };
    let mut analysis = AnalysisOptions::new(k_kpa);
    analysis.t_pressure_s = opts.t_pressure_s;

    let seeds: Vec<u64> = if opts.noise_fraction > 0.0 {
        if opts.seeds == 0 {
            return Err(Error::Parameter("need at least one seed".into()));
        }
        (0..opts.seeds).collect()
    } else {
        vec![0]
    };
    let mut recovered = Vec::with_capacity(seeds.len());
    for seed in seeds {
        let mut cfg = SyntheticConfig { seed, ..base.clone() };
        if opts.noise_fraction > 0.0 {
            let (_, truth) = synthesize_creep_sequence(&base)?;
            cfg.noise_sigma = opts.noise_fraction * truth.peak_fluid_strain();
        }
        let (seq, truth) = synthesize_creep_sequence(&cfg)?;
        let pressure = pressure_for_fit(&seq, &truth.region, &analysis)?;
        let (_, fit) = fit_pressure_profile(&pressure, &truth.region, &analysis)?;
        recovered.push(fit.alpha);
    }
    let median_alpha = median(&recovered);
    let relative_error = (median_alpha / alpha_true - 1.0).abs();
    let tolerance = opts.tolerance();
    Ok(ValidationOutcome {
        sample: opts.sample,
        alpha_true,
        recovered,
        median_alpha,
        relative_error,
        tolerance,
        oracle_error: oracle_closed_form_error(alpha_true, Sample::RADIUS_M, opts.oracle_nodes)?,
        passed: relative_error < tolerance,
    })
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
