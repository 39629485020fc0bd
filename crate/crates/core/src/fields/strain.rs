use rayon::prelude::*;

use crate::domain::{is_missing, MapKind, ScalarMap, StrainField, StrainSequence, TumorRegion, MISSING};
use crate::error::{Error, Result};
use crate::fitting::fit_axial_tc;

/// How `eps(R, inf)` is approximated.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SteadyState {
    /// The last acquired frame.
    #[default]
    LastFrame,
    /// Offset `A` of a per-pixel `A + B exp(-t / tau)` fit to the volumetric strain.
    Extrapolated { init_tau_s: f64 },
}

/// `eps = eps_zz + 2 eps_rr` per pixel.
pub fn volumetric_strain(axial: &StrainField, lateral: &StrainField) -> Result<ScalarMap> {
    if !axial.same_geometry(lateral) {
        return Err(Error::Shape(format!(
            "axial {}x{} @ {} mm vs lateral {}x{} @ {} mm",
            axial.rows(),
            axial.cols(),
            axial.pixel_spacing_mm(),
            lateral.rows(),
            lateral.cols(),
            lateral.pixel_spacing_mm()
        )));
    }
    if axial.timestamp_s() != lateral.timestamp_s() {
        return Err(Error::Shape(format!(
            "axial t = {} s vs lateral t = {} s",
            axial.timestamp_s(),
            lateral.timestamp_s()
        )));
    }
    let values = axial
        .values()
        .iter()
        .zip(lateral.values())
        .map(|(a, l)| a + 2.0 * l)
        .collect();
    ScalarMap::new(
        MapKind::VolumetricStrain,
        axial.rows(),
        axial.cols(),
        axial.pixel_spacing_mm(),
        values,
        vec![true; axial.rows() * axial.cols()],
    )
}

fn check_region(seq: &StrainSequence, region: &TumorRegion) -> Result<()> {
    if !region.matches(seq.rows(), seq.cols(), seq.pixel_spacing_mm()) {
        return Err(Error::Shape(format!(
            "region grid {}x{} @ {} mm does not match sequence {}x{} @ {} mm",
            region.rows(),
            region.cols(),
            region.pixel_spacing_mm(),
            seq.rows(),
            seq.cols(),
            seq.pixel_spacing_mm()
        )));
    }
    Ok(())
}

/// Fluid pressure `p = -K (eps(t) - eps(inf))` with the last frame as `eps(inf)`.
pub fn fluid_pressure_map(
    seq: &StrainSequence,
    t_s: f64,
    k_kpa: f64,
    region: &TumorRegion,
) -> Result<ScalarMap> {
    fluid_pressure_map_with(seq, t_s, k_kpa, region, SteadyState::LastFrame)
}

pub fn fluid_pressure_map_with(
    seq: &StrainSequence,
    t_s: f64,
    k_kpa: f64,
    region: &TumorRegion,
    steady: SteadyState,
) -> Result<ScalarMap> {
    if seq.len() < 2 {
        return Err(Error::InsufficientData(
            "pressure needs a creep frame and a steady-state frame".into(),
        ));
    }
    if !(k_kpa.is_finite() && k_kpa > 0.0) {
        return Err(Error::Domain(format!("compression modulus must be positive, got {k_kpa}")));
    }
    check_region(seq, region)?;
    let idx = seq.frame_index(t_s)?;
    let eps_t = seq.volumetric(idx);
    let eps_inf = match steady {
        SteadyState::LastFrame => seq.volumetric(seq.len() - 1),
        SteadyState::Extrapolated { init_tau_s } => extrapolate_steady_state(seq, region, init_tau_s)?,
    };
    ScalarMap::from_mask(
        MapKind::PressureKpa,
        seq.rows(),
        seq.cols(),
        seq.pixel_spacing_mm(),
        region.mask().to_vec(),
        |r, c| {
            let i = r * seq.cols() + c;
            -k_kpa * (eps_t[i] - eps_inf[i])
        },
    )
}

fn extrapolate_steady_state(seq: &StrainSequence, region: &TumorRegion, init_tau_s: f64) -> Result<Vec<f64>> {
    if seq.len() < 4 {
        return Err(Error::InsufficientData(
            "extrapolating the steady state needs at least 4 frames".into(),
        ));
    }
    let times = seq.timestamps();
    let volumetric: Vec<Vec<f64>> = (0..seq.len()).map(|k| seq.volumetric(k)).collect();
    let last = &volumetric[seq.len() - 1];
    Ok((0..seq.rows() * seq.cols())
        .into_par_iter()
        .map(|i| {
            if !region.mask()[i] {
                return last[i];
            }
            let series: Vec<f64> = volumetric.iter().map(|v| v[i]).collect();
            match fit_axial_tc(&times, &series, init_tau_s) {
                Ok(fit) if fit.is_reliable() => fit.offset,
                // flat or unfittable series: already at steady state
                _ => last[i],
            }
        })
        .collect())
}

/// Divides every valid value by the applied pressure, giving values per kPa of load.
pub fn normalize_map(map: &ScalarMap, applied_pressure_kpa: f64) -> Result<ScalarMap> {
    if !(applied_pressure_kpa.is_finite() && applied_pressure_kpa > 0.0) {
        return Err(Error::Domain(format!(
            "applied pressure must be positive, got {applied_pressure_kpa}"
        )));
    }
    Ok(map.map_values(|v| v / applied_pressure_kpa))
}

/// Unguarded flow kernel in milli-strain per second.
#[inline]
pub fn flow_kernel(eps1: f64, eps2: f64, t1: f64, t2: f64) -> f64 {
    1e3 * (eps2 - eps1) / (t2 - t1)
}

/// Fluid flow `w = (eps(t2) - eps(t1)) / (t2 - t1)` in milli-strain per second.
pub fn fluid_flow_map(seq: &StrainSequence, t1: f64, t2: f64, region: &TumorRegion) -> Result<ScalarMap> {
    if !(t1 < t2) {
        return Err(Error::Parameter(format!("flow window needs t1 < t2, got [{t1}, {t2}]")));
    }
    check_region(seq, region)?;
    let e1 = seq.volumetric(seq.frame_index(t1)?);
    let e2 = seq.volumetric(seq.frame_index(t2)?);
    let ts = seq.timestamps();
    let (t1, t2) = (ts[seq.frame_index(t1)?], ts[seq.frame_index(t2)?]);
    ScalarMap::from_mask(
        MapKind::FlowMilliStrainPerS,
        seq.rows(),
        seq.cols(),
        seq.pixel_spacing_mm(),
        region.mask().to_vec(),
        |r, c| {
            let i = r * seq.cols() + c;
            let (a, b) = (e1[i], e2[i]);
            if is_missing(a) || is_missing(b) {
                MISSING
            } else {
                flow_kernel(a, b, t1, t2)
            }
        },
    )
}
