//! On-disk formats: CSV grids, sequence manifests, synthesis configs, reports
//! and PGM previews.

mod config;
mod grid;
mod manifest;
mod pgm;
mod report;

pub use config::{parse_synthetic_config, read_synthetic_config};
pub use grid::{
    format_value, parse_grid_csv, read_grid_csv, read_map_csv, write_grid_csv, write_map_csv, GridHeader,
};
pub use manifest::{
    read_sequence, write_sequence, FrameEntry, GroundTruth, RegionSpec, SequenceManifest, MANIFEST_VERSION,
};
pub use pgm::write_pgm;
pub use report::{
    alpha_fit_block, parse_report_block, profile_csv, report_block, report_csv_header, report_csv_row, write_text,
};

/// Splits `key=value` lines, skipping blanks and `#` comments. Yields `(line_number, key, value)`.
pub(crate) fn key_values(text: &str) -> impl Iterator<Item = (usize, &str, Option<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            return None;
        }
        Some(match line.split_once('=') {
            Some((k, v)) => (i + 1, k.trim(), Some(v.trim())),
            None => (i + 1, line, None),
        })
    })
}
