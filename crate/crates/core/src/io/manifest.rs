//! Sequence manifest: line-oriented `key=value` text. Top-level keys describe
//! the grid; optional `[region]` and `[ground_truth]` sections follow; each
//! `[frame]` section lists one timestamp and its two strain files (paths
//! relative to the manifest).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::grid::{read_grid_csv, write_grid_csv};
use super::key_values;
use crate::domain::{StrainSequence, TumorRegion};
use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameEntry {
    pub timestamp_s: f64,
    pub axial_path: PathBuf,
    pub lateral_path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth {
    pub alpha: f64,
    pub tau_s: f64,
    pub psi_kpa: f64,
    pub a_mm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionSpec {
    pub center_row: f64,
    pub center_col: f64,
    pub radius_mm: f64,
}

impl RegionSpec {
    pub fn to_region(&self, rows: usize, cols: usize, pixel_spacing_mm: f64) -> Result<TumorRegion> {
        TumorRegion::disc(rows, cols, pixel_spacing_mm, self.center_row, self.center_col, self.radius_mm)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceManifest {
    pub version: u32,
    pub rows: usize,
    pub cols: usize,
    pub pixel_spacing_mm: f64,
    pub frames: Vec<FrameEntry>,
    pub ground_truth: Option<GroundTruth>,
    pub region: Option<RegionSpec>,
}

/// `[frame]` section being parsed: start line, timestamp, axial and lateral paths.
type PartialFrame = (usize, Option<f64>, Option<PathBuf>, Option<PathBuf>);

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Top,
    Region,
    Truth,
    Frame,
}

impl SequenceManifest {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "version={}", self.version);
        let _ = writeln!(s, "rows={}", self.rows);
        let _ = writeln!(s, "cols={}", self.cols);
        let _ = writeln!(s, "pixel_spacing_mm={}", self.pixel_spacing_mm);
        if let Some(r) = &self.region {
            let _ = writeln!(s, "[region]");
            let _ = writeln!(s, "center_row={}", r.center_row);
            let _ = writeln!(s, "center_col={}", r.center_col);
            let _ = writeln!(s, "radius_mm={}", r.radius_mm);
        }
        if let Some(g) = &self.ground_truth {
            let _ = writeln!(s, "[ground_truth]");
            let _ = writeln!(s, "alpha={}", g.alpha);
            let _ = writeln!(s, "tau_s={}", g.tau_s);
            let _ = writeln!(s, "psi_kpa={}", g.psi_kpa);
            let _ = writeln!(s, "a_mm={}", g.a_mm);
        }
        for f in &self.frames {
            let _ = writeln!(s, "[frame]");
            let _ = writeln!(s, "timestamp_s={}", f.timestamp_s);
            let _ = writeln!(s, "axial_path={}", f.axial_path.display());
            let _ = writeln!(s, "lateral_path={}", f.lateral_path.display());
        }
        s
    }

    /// Parses manifest text; `path` labels errors.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut section = Section::Top;
        let mut version = None;
        let mut rows = None;
        let mut cols = None;
        let mut spacing = None;
        let mut region = [None; 3];
        let mut truth = [None; 4];
        let mut frames: Vec<PartialFrame> = Vec::new();

        for (line, key, value) in key_values(text) {
            let err = |msg: String| Error::format(path, line, msg);
            let Some(value) = value else {
                section = match key {
                    "[region]" => Section::Region,
                    "[ground_truth]" => Section::Truth,
                    "[frame]" => {
                        frames.push((line, None, None, None));
                        Section::Frame
                    }
                    _ => return Err(err(format!("expected key=value or a section, got '{key}'"))),
                };
                continue;
            };
            let num = || value.parse::<f64>().map_err(|_| err(format!("bad number '{value}' for '{key}'")));
            let int = || value.parse::<usize>().map_err(|_| err(format!("bad integer '{value}' for '{key}'")));
            match (section, key) {
                (Section::Top, "version") => version = Some(int()? as u32),
                (Section::Top, "rows") => rows = Some(int()?),
                (Section::Top, "cols") => cols = Some(int()?),
                (Section::Top, "pixel_spacing_mm") => spacing = Some(num()?),
                (Section::Region, "center_row") => region[0] = Some(num()?),
                (Section::Region, "center_col") => region[1] = Some(num()?),
                (Section::Region, "radius_mm") => region[2] = Some(num()?),
                (Section::Truth, "alpha") => truth[0] = Some(num()?),
                (Section::Truth, "tau_s") => truth[1] = Some(num()?),
                (Section::Truth, "psi_kpa") => truth[2] = Some(num()?),
                (Section::Truth, "a_mm") => truth[3] = Some(num()?),
                (Section::Frame, "timestamp_s") => frames.last_mut().unwrap().1 = Some(num()?),
                (Section::Frame, "axial_path") => frames.last_mut().unwrap().2 = Some(PathBuf::from(value)),
                (Section::Frame, "lateral_path") => frames.last_mut().unwrap().3 = Some(PathBuf::from(value)),
                _ => return Err(err(format!("unexpected key '{key}' here"))),
            }
        }

        let missing = |name: &str| Error::format(path, 0, format!("missing '{name}'"));
        let version = version.ok_or_else(|| missing("version"))?;
        if version != MANIFEST_VERSION {
            return Err(Error::format(path, 0, format!("unsupported manifest version {version}")));
        }
        let region = match region {
            [None, None, None] => None,
            [Some(center_row), Some(center_col), Some(radius_mm)] => Some(RegionSpec {
                center_row,
                center_col,
                radius_mm,
            }),
            _ => return Err(Error::format(path, 0, "incomplete [region] section")),
        };
        let ground_truth = match truth {
            [None, None, None, None] => None,
            [Some(alpha), Some(tau_s), Some(psi_kpa), Some(a_mm)] => Some(GroundTruth {
                alpha,
                tau_s,
                psi_kpa,
                a_mm,
            }),
            _ => return Err(Error::format(path, 0, "incomplete [ground_truth] section")),
        };
        let frames = frames
            .into_iter()
            .map(|(line, t, ax, lat)| match (t, ax, lat) {
                (Some(timestamp_s), Some(axial_path), Some(lateral_path)) => Ok(FrameEntry {
                    timestamp_s,
                    axial_path,
                    lateral_path,
                }),
                (_, _, None) => Err(Error::format(path, line, "frame has no lateral_path")),
                (_, None, _) => Err(Error::format(path, line, "frame has no axial_path")),
                (None, _, _) => Err(Error::format(path, line, "frame has no timestamp_s")),
            })
            .collect::<Result<Vec<_>>>()?;
        if frames.windows(2).any(|w| !(w[1].timestamp_s > w[0].timestamp_s)) {
            return Err(Error::format(path, 0, "frame timestamps must be strictly increasing"));
        }
        Ok(Self {
            version,
            rows: rows.ok_or_else(|| missing("rows"))?,
            cols: cols.ok_or_else(|| missing("cols"))?,
            pixel_spacing_mm: spacing.ok_or_else(|| missing("pixel_spacing_mm"))?,
            frames,
            ground_truth,
            region,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

/// Loads a manifest and every frame it references, checking dimensions and timestamps.
pub fn read_sequence(manifest_path: &Path) -> Result<(SequenceManifest, StrainSequence)> {
    let manifest = SequenceManifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let frames = manifest
        .frames
        .par_iter()
        .map(|entry| {
            let ax = read_grid_csv(&base.join(&entry.axial_path))?;
            let lat = read_grid_csv(&base.join(&entry.lateral_path))?;
            for (f, p) in [(&ax, &entry.axial_path), (&lat, &entry.lateral_path)] {
                if f.rows() != manifest.rows || f.cols() != manifest.cols || f.pixel_spacing_mm() != manifest.pixel_spacing_mm {
                    return Err(Error::format(base.join(p), 1, "grid does not match the manifest dimensions"));
                }
                if f.timestamp_s() != entry.timestamp_s {
                    return Err(Error::format(base.join(p), 1, "timestamp does not match the manifest"));
                }
            }
            Ok((ax, lat))
        })
        .collect::<Result<Vec<_>>>()?;
    let (axial, lateral) = frames.into_iter().unzip();
    let seq = StrainSequence::new(axial, lateral)?;
    Ok((manifest, seq))
}

/// Writes every frame under `dir/frames/` and the manifest as `dir/manifest.txt`.
pub fn write_sequence(
    seq: &StrainSequence,
    dir: &Path,
    region: Option<RegionSpec>,
    ground_truth: Option<GroundTruth>,
) -> Result<PathBuf> {
    let frames_dir = dir.join("frames");
    fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    let entries: Vec<FrameEntry> = (0..seq.len())
        .map(|k| FrameEntry {
            timestamp_s: seq.axial()[k].timestamp_s(),
            axial_path: PathBuf::from(format!("frames/axial_{k:05}.csv")),
            lateral_path: PathBuf::from(format!("frames/lateral_{k:05}.csv")),
        })
        .collect();
    entries
        .par_iter()
        .enumerate()
        .try_for_each(|(k, e)| {
            write_grid_csv(&seq.axial()[k], &dir.join(&e.axial_path))?;
            write_grid_csv(&seq.lateral()[k], &dir.join(&e.lateral_path))
        })?;
    let manifest = SequenceManifest {
        version: MANIFEST_VERSION,
        rows: seq.rows(),
        cols: seq.cols(),
        pixel_spacing_mm: seq.pixel_spacing_mm(),
        frames: entries,
        ground_truth,
        region,
    };
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest.to_text()).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
