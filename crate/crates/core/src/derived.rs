//! Transport parameters derived from `alpha` and tumor size, and the per-tumor report.

use std::f64::consts::PI;

use crate::domain::{ScalarMap, TumorRegion, MISSING};
use crate::error::{Error, Result};
use crate::fitting::AlphaFit;
use crate::forward::pressure_shape;

/// Empirical capillary `S/V = 10 f V_t^g` (cm^-1, `V_t` in mm^3).
const SV_COEFFICIENT: f64 = 54.68;
const SV_EXPONENT: f64 = -0.2021;

/// `L_p S / (k V) = (alpha / a)^2`, in m^-2 for `a` in meters.
pub fn permeability_ratio(alpha: f64, a_m: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 0.0 && a_m.is_finite() && a_m > 0.0) {
        return Err(Error::Domain(format!(
            "alpha and radius must be positive, got alpha = {alpha}, a = {a_m} m"
        )));
    }
    Ok((alpha / a_m).powi(2))
}

/// Ratio of the central interstitial pressure to the effective vascular
/// pressure, `1 - alpha cosech(alpha)`.
pub fn peak_ifp_ratio(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    Ok(if alpha < 1.0 {
        // (sinh a - a) / sinh a with the numerator summed as a series
        let a2 = alpha * alpha;
        let (mut term, mut excess, mut k) = (alpha, 0.0, 1.0);
        loop {
            term *= a2 / ((k + 1.0) * (k + 2.0));
            k += 2.0;
            excess += term;
            if term <= excess * 1e-17 {
                break;
            }
        }
        excess / alpha.sinh()
    } else if alpha > 30.0 {
        1.0 - 2.0 * alpha * (-alpha).exp()
    } else {
        1.0 - pressure_shape(alpha, 0.0)
    })
}

/// `alpha cosech(alpha) = 1 - peak_ifp_ratio(alpha)`, kept separately because
/// it stays resolvable in f64 after the ratio itself has rounded to 1.
pub fn peak_ifp_deficit(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    Ok(pressure_shape(alpha, 0.0))
}

pub fn tumor_volume_mm3(a_mm: f64) -> f64 {
    4.0 / 3.0 * PI * a_mm.powi(3)
}

/// Capillary surface-to-volume ratio (cm^-1) for a spherical tumor of radius `a_mm`.
pub fn surface_to_volume(a_mm: f64) -> Result<f64> {
    if !(a_mm.is_finite() && a_mm > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {a_mm}")));
    }
    Ok(10.0 * SV_COEFFICIENT * tumor_volume_mm3(a_mm).powf(SV_EXPONENT))
}

pub struct ReportMaps<'a> {
    pub velocity: &'a ScalarMap,
    pub flow: &'a ScalarMap,
    pub tc: &'a ScalarMap,
}

/// Per-tumor summary. Map means cover on-mask, non-missing pixels only; the
/// matching `*_count` fields say how many.
#[derive(Debug, Clone, PartialEq)]
pub struct TumorReport {
    pub alpha: f64,
    pub perm_ratio_per_m2: f64,
    pub peak_ifp_ratio: f64,
    pub sv_ratio_per_cm: f64,
    pub tumor_radius_mm: f64,
    pub tumor_volume_mm3: f64,
    pub mean_velocity: f64,
    pub velocity_count: usize,
    pub mean_flow: f64,
    pub flow_count: usize,
    pub mean_tc_s: f64,
    pub tc_count: usize,
    pub fit_residual_rms: f64,
    pub fit_converged: bool,
}

fn region_mean(map: &ScalarMap, region: &TumorRegion) -> Result<(f64, usize)> {
    if !region.matches(map.rows(), map.cols(), map.pixel_spacing_mm()) {
        return Err(Error::Shape(format!("{} map grid differs from the region", map.kind())));
    }
    let (sum, n) = map
        .values()
        .iter()
        .zip(region.mask())
        .filter(|(v, &m)| m && !v.is_nan())
        .fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
    Ok(if n > 0 { (sum / n as f64, n) } else { (MISSING, 0) })
}

pub fn build_report(fit: &AlphaFit, region: &TumorRegion, maps: ReportMaps<'_>) -> Result<TumorReport> {
    if region.pixel_count() == 0 {
        return Err(Error::EmptyRegion);
    }
    let a_mm = region.radius_mm();
    let (mean_velocity, velocity_count) = region_mean(maps.velocity, region)?;
    let (mean_flow, flow_count) = region_mean(maps.flow, region)?;
    let (mean_tc_s, tc_count) = region_mean(maps.tc, region)?;
    Ok(TumorReport {
        alpha: fit.alpha,
        perm_ratio_per_m2: permeability_ratio(fit.alpha, a_mm * 1e-3)?,
        peak_ifp_ratio: peak_ifp_ratio(fit.alpha)?,
        sv_ratio_per_cm: surface_to_volume(a_mm)?,
        tumor_radius_mm: a_mm,
        tumor_volume_mm3: tumor_volume_mm3(a_mm),
        mean_velocity,
        velocity_count,
        mean_flow,
        flow_count,
        mean_tc_s,
        tc_count,
        fit_residual_rms: fit.residual_rms,
        fit_converged: fit.converged,
    })
}
