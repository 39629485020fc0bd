use rayon::prelude::*;

use super::analytic::analytical_pressure;
use super::noise::add_noise;
use super::oracle::{helmholtz_oracle, interpolate_profile};
use crate::domain::{MapKind, ScalarMap, StrainField, StrainSequence, TumorRegion};
use crate::error::{Error, Result};

/// Where the spatial pressure profile of a synthetic tumor comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileSource {
    /// Closed-form `psi (1 - sinh(alpha R/a) / ((R/a) sinh alpha))`.
    Analytical,
    /// Finite-difference Helmholtz solution on this many nodes, linearly interpolated.
    Oracle { nodes: usize },
}

/// Parameters of a synthetic creep experiment on a single spherical tumor
/// centered in the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub alpha: f64,
    pub psi_kpa: f64,
    pub a_mm: f64,
    pub rows: usize,
    pub cols: usize,
    pub pixel_spacing_mm: f64,
    pub tau_s: f64,
    /// Steady-state volumetric strain (applied stress over K; negative under compression).
    pub eps_inf: f64,
    pub compression_modulus_kpa: f64,
    pub n_frames: usize,
    pub dt_s: f64,
    /// Per-channel strain noise standard deviation.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Fraction `s` of the volumetric strain carried by the axial channel:
    /// `eps_zz = s eps`, `eps_rr = (1 - s) eps / 2`.
    pub axial_share: f64,
    pub profile: ProfileSource,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            psi_kpa: 1.0,
            a_mm: 3.0,
            rows: 128,
            cols: 128,
            pixel_spacing_mm: 0.1,
            tau_s: 20.0,
            eps_inf: -1.0 / 539.0,
            compression_modulus_kpa: 539.0,
            n_frames: 601,
            dt_s: 0.1,
            noise_sigma: 0.0,
            seed: 0,
            // eps_rr / eps_zz = -0.25
            axial_share: 2.0,
            profile: ProfileSource::Analytical,
        }
    }
}

impl SyntheticConfig {
    pub fn center(&self) -> (f64, f64) {
        ((self.rows / 2) as f64, (self.cols / 2) as f64)
    }

    pub fn timestamps(&self) -> Vec<f64> {
        (0..self.n_frames).map(|k| k as f64 * self.dt_s).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("a_mm", self.a_mm),
            ("pixel_spacing_mm", self.pixel_spacing_mm),
            ("tau_s", self.tau_s),
            ("k_kpa", self.compression_modulus_kpa),
            ("dt_s", self.dt_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.psi_kpa.is_finite() && self.eps_inf.is_finite() && self.axial_share.is_finite()) {
            return Err(Error::Config("psi_kpa, eps_inf and axial_share must be finite".into()));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Config(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        if self.n_frames < 2 {
            return Err(Error::Config("need at least two frames".into()));
        }
        let radius_px = self.a_mm / self.pixel_spacing_mm;
        let (cr, cc) = self.center();
        let room = cr
            .min(cc)
            .min((self.rows - 1) as f64 - cr)
            .min((self.cols - 1) as f64 - cc);
        if self.rows == 0 || self.cols == 0 || radius_px + 2.0 > room {
            return Err(Error::Config(format!(
                "tumor of {radius_px:.1} pixels radius does not fit a {}x{} grid with a 2-pixel margin",
                self.rows, self.cols
            )));
        }
        let span = (self.n_frames - 1) as f64 * self.dt_s;
        if span < 3.0 * self.tau_s * (1.0 - 1e-12) {
            return Err(Error::Config(format!(
                "acquisition of {span} s is shorter than 3 tau = {} s",
                3.0 * self.tau_s
            )));
        }
        if let ProfileSource::Oracle { nodes } = self.profile {
            if nodes < 64 {
                return Err(Error::Config(format!("oracle needs >= 64 nodes, got {nodes}")));
            }
        }
        Ok(())
    }

    pub fn region(&self) -> Result<TumorRegion> {
        let (cr, cc) = self.center();
        TumorRegion::disc(self.rows, self.cols, self.pixel_spacing_mm, cr, cc, self.a_mm)
    }
}

/// Ground truth behind a synthetic sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTruth {
    pub alpha: f64,
    pub psi_kpa: f64,
    pub tau_s: f64,
    pub a_mm: f64,
    pub compression_modulus_kpa: f64,
    pub eps_inf: f64,
    pub axial_share: f64,
    pub region: TumorRegion,
    /// Time-independent pressure amplitude `p_spatial(R)` on the tumor mask.
    pub pressure_spatial: ScalarMap,
}

impl SyntheticTruth {
    /// Fluid pressure `p_spatial(R) exp(-t / tau)`.
    pub fn pressure_at(&self, t_s: f64) -> ScalarMap {
        let decay = (-t_s / self.tau_s).exp();
        self.pressure_spatial.map_values(|p| p * decay)
    }

    /// Largest magnitude of the fluid-driven volumetric strain, `max |p_spatial| / K`.
    pub fn peak_fluid_strain(&self) -> f64 {
        self.pressure_spatial
            .values()
            .iter()
            .filter(|v| !v.is_nan())
            .fold(0.0, |m: f64, v| m.max(v.abs()))
            / self.compression_modulus_kpa
    }
}

/// Builds a creep sequence whose volumetric strain is
/// `eps(R, t) = eps_inf - p_spatial(R) exp(-t / tau) / K` inside the tumor and
/// `eps_inf` outside it.
pub fn synthesize_creep_sequence(config: &SyntheticConfig) -> Result<(StrainSequence, SyntheticTruth)> {
    config.validate()?;
    let region = config.region()?;
    let (rows, cols) = (config.rows, config.cols);

    let oracle = match config.profile {
        ProfileSource::Analytical => None,
        ProfileSource::Oracle { nodes } => {
            let a_m = config.a_mm * 1e-3;
            let w = config.psi_kpa * (config.alpha / a_m).powi(2);
            Some(helmholtz_oracle(config.alpha, a_m, w, nodes)?)
        }
    };
    let spatial = |row: usize, col: usize| -> f64 {
        let r = region.radius_of(row, col).min(config.a_mm);
        match &oracle {
            None => analytical_pressure(r, config.psi_kpa, config.alpha, config.a_mm)
                .expect("radius clamped to the tumor"),
            Some(samples) => interpolate_profile(samples, r * 1e-3),
        }
    };
    let pressure_spatial = ScalarMap::from_mask(
        MapKind::PressureKpa,
        rows,
        cols,
        config.pixel_spacing_mm,
        region.mask().to_vec(),
        spatial,
    )?;

    let p_spatial: Vec<f64> = pressure_spatial
        .values()
        .iter()
        .map(|&v| if v.is_nan() { 0.0 } else { v })
        .collect();
    let share = config.axial_share;
    let frames: Vec<(StrainField, StrainField)> = config
        .timestamps()
        .into_par_iter()
        .map(|t| {
            let decay = (-t / config.tau_s).exp();
            let eps: Vec<f64> = p_spatial
                .iter()
                .map(|p| config.eps_inf - p * decay / config.compression_modulus_kpa)
                .collect();
            let axial = eps.iter().map(|e| share * e).collect();
            let lateral = eps.iter().map(|e| 0.5 * (1.0 - share) * e).collect();
            Ok((
                StrainField::new(rows, cols, config.pixel_spacing_mm, t, axial)?,
                StrainField::new(rows, cols, config.pixel_spacing_mm, t, lateral)?,
            ))
        })
        .collect::<Result<_>>()?;
    let (axial, lateral) = frames.into_iter().unzip();
    let mut seq = StrainSequence::new(axial, lateral)?;
    if config.noise_sigma > 0.0 {
        seq = add_noise(&seq, config.noise_sigma, config.seed)?;
    }

    let truth = SyntheticTruth {
        alpha: config.alpha,
        psi_kpa: config.psi_kpa,
        tau_s: config.tau_s,
        a_mm: config.a_mm,
        compression_modulus_kpa: config.compression_modulus_kpa,
        eps_inf: config.eps_inf,
        axial_share: config.axial_share,
        region,
        pressure_spatial,
    };
    Ok((seq, truth))
}
