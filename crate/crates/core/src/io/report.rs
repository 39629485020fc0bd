//! Report serialization: a `key=value` block and a single CSV row. Floats use
//! Rust's shortest round-trip formatting, so parsing a block restores it exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::key_values;
use crate::derived::TumorReport;
use crate::error::{Error, Result};
use crate::fields::RadialProfile;
use crate::fitting::AlphaFit;
use super::grid::format_value;

const FIELDS: [&str; 14] = [
    "alpha",
    "perm_ratio_per_m2",
    "peak_ifp_ratio",
    "sv_ratio_per_cm",
    "tumor_radius_mm",
    "tumor_volume_mm3",
    "mean_velocity_kpa_per_pixel",
    "velocity_count",
    "mean_flow_millistrain_per_s",
    "flow_count",
    "mean_tc_s",
    "tc_count",
    "fit_residual_rms",
    "fit_converged",
];

fn values(r: &TumorReport) -> [String; 14] {
    [
        r.alpha.to_string(),
        r.perm_ratio_per_m2.to_string(),
        r.peak_ifp_ratio.to_string(),
        r.sv_ratio_per_cm.to_string(),
        r.tumor_radius_mm.to_string(),
        r.tumor_volume_mm3.to_string(),
        r.mean_velocity.to_string(),
        r.velocity_count.to_string(),
        r.mean_flow.to_string(),
        r.flow_count.to_string(),
        r.mean_tc_s.to_string(),
        r.tc_count.to_string(),
        r.fit_residual_rms.to_string(),
        r.fit_converged.to_string(),
    ]
}

pub fn report_block(report: &TumorReport) -> String {
    let mut s = String::new();
    for (k, v) in FIELDS.iter().zip(values(report)) {
        let _ = writeln!(s, "{k}={v}");
    }
    s
}

pub fn report_csv_header() -> String {
    format!("tumor,{}", FIELDS.join(","))
}

pub fn report_csv_row(name: &str, report: &TumorReport) -> String {
    format!("{name},{}", values(report).join(","))
}

pub fn parse_report_block(text: &str) -> Result<TumorReport> {
    let mut found: [Option<&str>; 14] = [None; 14];
    for (line, key, value) in key_values(text) {
        let idx = FIELDS
            .iter()
            .position(|f| *f == key)
            .ok_or_else(|| Error::Config(format!("line {line}: unknown report key '{key}'")))?;
        found[idx] = value;
    }
    let get = |i: usize| found[i].ok_or_else(|| Error::Config(format!("report is missing '{}'", FIELDS[i])));
    let f = |i: usize| -> Result<f64> {
        get(i)?
            .parse()
            .map_err(|_| Error::Config(format!("bad number for '{}'", FIELDS[i])))
    };
    let n = |i: usize| -> Result<usize> {
        get(i)?
            .parse()
            .map_err(|_| Error::Config(format!("bad count for '{}'", FIELDS[i])))
    };
    Ok(TumorReport {
        alpha: f(0)?,
        perm_ratio_per_m2: f(1)?,
        peak_ifp_ratio: f(2)?,
        sv_ratio_per_cm: f(3)?,
        tumor_radius_mm: f(4)?,
        tumor_volume_mm3: f(5)?,
        mean_velocity: f(6)?,
        velocity_count: n(7)?,
        mean_flow: f(8)?,
        flow_count: n(9)?,
        mean_tc_s: f(10)?,
        tc_count: n(11)?,
        fit_residual_rms: f(12)?,
        fit_converged: get(13)?
            .parse()
            .map_err(|_| Error::Config("bad boolean for 'fit_converged'".into()))?,
    })
}

pub fn alpha_fit_block(fit: &AlphaFit) -> String {
    format!(
        "alpha={}\npsi={}\nresidual_rms={}\niterations={}\nconverged={}\n",
        fit.alpha, fit.psi, fit.residual_rms, fit.iterations, fit.converged
    )
}

/// Raw and smoothed radial profile as CSV, one row per bin.
pub fn profile_csv(raw: &RadialProfile, smoothed: &RadialProfile) -> String {
    let mut s = String::from("radius_mm,mean_radius_mm,count,value,smoothed\n");
    for k in 0..raw.len() {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            raw.radii_mm[k],
            raw.mean_radii_mm[k],
            raw.counts[k],
            format_value(raw.values[k]),
            format_value(smoothed.values[k])
        );
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
