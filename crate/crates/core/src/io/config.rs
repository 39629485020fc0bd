//! Flat `key=value` synthesis configuration. Keys mirror [`SyntheticConfig`];
//! omitted keys keep their defaults.

use std::fs;
use std::path::Path;

use super::key_values;
use crate::error::{Error, Result};
use crate::forward::{ProfileSource, SyntheticConfig};

pub fn parse_synthetic_config(text: &str) -> Result<SyntheticConfig> {
    let mut cfg = SyntheticConfig::default();
    let mut profile = "analytical".to_string();
    let mut oracle_nodes = 4096usize;
    for (line, key, value) in key_values(text) {
        let value = value.ok_or_else(|| Error::Config(format!("line {line}: expected key=value, got '{key}'")))?;
        let num = || {
            value
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("line {line}: bad number '{value}' for '{key}'")))
        };
        let int = || {
            value
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("line {line}: bad integer '{value}' for '{key}'")))
        };
        match key {
            "alpha" => cfg.alpha = num()?,
            "psi_kpa" => cfg.psi_kpa = num()?,
            "a_mm" => cfg.a_mm = num()?,
            "rows" => cfg.rows = int()? as usize,
            "cols" => cfg.cols = int()? as usize,
            "pixel_spacing_mm" => cfg.pixel_spacing_mm = num()?,
            "tau_s" => cfg.tau_s = num()?,
            "eps_inf" => cfg.eps_inf = num()?,
            "k_kpa" => cfg.compression_modulus_kpa = num()?,
            "n_frames" => cfg.n_frames = int()? as usize,
            "dt_s" => cfg.dt_s = num()?,
            "noise_sigma" => cfg.noise_sigma = num()?,
            "seed" => cfg.seed = int()?,
            "axial_share" => cfg.axial_share = num()?,
            "profile" => profile = value.to_ascii_lowercase(),
            "oracle_nodes" => oracle_nodes = int()? as usize,
            _ => return Err(Error::Config(format!("line {line}: unknown key '{key}'"))),
        }
    }
    cfg.profile = match profile.as_str() {
        "analytical" => ProfileSource::Analytical,
        "oracle" => ProfileSource::Oracle { nodes: oracle_nodes },
        other => return Err(Error::Config(format!("unknown profile source '{other}'"))),
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn read_synthetic_config(path: &Path) -> Result<SyntheticConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_synthetic_config(&text)
}
