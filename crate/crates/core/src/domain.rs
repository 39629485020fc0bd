//! Shared domain types and the isotropic elastic-moduli relations.
//!
//! All grids are row-major. Pixel `(row, col)` sits at physical offset
//! `((row - center_row), (col - center_col)) * pixel_spacing_mm` from a region
//! center. Compressive strain is stored negative.

use std::fmt;

use crate::error::{Error, Result};

/// Marker for off-mask or failed pixels. Every reducer skips it.
pub const MISSING: f64 = f64::NAN;

#[inline]
pub fn is_missing(v: f64) -> bool {
    v.is_nan()
}

/// Drained bulk (compression) modulus `K = E / (3 (1 - 2 nu))`.
pub fn compression_modulus(young_kpa: f64, poisson: f64) -> Result<f64> {
    check_elastic(young_kpa, poisson)?;
    Ok(young_kpa / (3.0 * (1.0 - 2.0 * poisson)))
}

/// Confined-compression (aggregate) modulus `H_A = E (1 - nu) / ((1 + nu)(1 - 2 nu))`.
pub fn aggregate_modulus(young_kpa: f64, poisson: f64) -> Result<f64> {
    check_elastic(young_kpa, poisson)?;
    Ok(young_kpa * (1.0 - poisson) / ((1.0 + poisson) * (1.0 - 2.0 * poisson)))
}

fn check_elastic(young_kpa: f64, poisson: f64) -> Result<()> {
    if !(young_kpa.is_finite() && young_kpa > 0.0) {
        return Err(Error::Domain(format!(
            "Young's modulus must be positive and finite, got {young_kpa}"
        )));
    }
    if !(0.0..0.5).contains(&poisson) {
        return Err(Error::Domain(format!(
            "Poisson's ratio must lie in [0, 0.5), got {poisson}"
        )));
    }
    Ok(())
}

fn check_geometry(rows: usize, cols: usize, pixel_spacing_mm: f64) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::Shape(format!("empty grid {rows}x{cols}")));
    }
    if !(pixel_spacing_mm.is_finite() && pixel_spacing_mm > 0.0) {
        return Err(Error::Domain(format!(
            "pixel spacing must be positive, got {pixel_spacing_mm}"
        )));
    }
    Ok(())
}

/// One strain frame: `rows x cols` dimensionless values at a single time.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainField {
    rows: usize,
    cols: usize,
    pixel_spacing_mm: f64,
    timestamp_s: f64,
    values: Vec<f64>,
}

impl StrainField {
    pub fn new(
        rows: usize,
        cols: usize,
        pixel_spacing_mm: f64,
        timestamp_s: f64,
        values: Vec<f64>,
    ) -> Result<Self> {
        check_geometry(rows, cols, pixel_spacing_mm)?;
        if values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "expected {} values for a {rows}x{cols} grid, got {}",
                rows * cols,
                values.len()
            )));
        }
        if !(timestamp_s.is_finite() && timestamp_s >= 0.0) {
            return Err(Error::Domain(format!(
                "timestamp must be finite and non-negative, got {timestamp_s}"
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite strain at pixel ({}, {})",
                i / cols,
                i % cols
            )));
        }
        Ok(Self {
            rows,
            cols,
            pixel_spacing_mm,
            timestamp_s,
            values,
        })
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        pixel_spacing_mm: f64,
        timestamp_s: f64,
        f: impl Fn(usize, usize) -> f64,
    ) -> Result<Self> {
        let values = (0..rows * cols).map(|i| f(i / cols, i % cols)).collect();
        Self::new(rows, cols, pixel_spacing_mm, timestamp_s, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pixel_spacing_mm(&self) -> f64 {
        self.pixel_spacing_mm
    }

    pub fn timestamp_s(&self) -> f64 {
        self.timestamp_s
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn same_geometry(&self, other: &StrainField) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.pixel_spacing_mm == other.pixel_spacing_mm
    }
}

/// Axial and lateral strain frames sharing geometry and timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainSequence {
    axial: Vec<StrainField>,
    lateral: Vec<StrainField>,
}

impl StrainSequence {
    pub fn new(axial: Vec<StrainField>, lateral: Vec<StrainField>) -> Result<Self> {
        if axial.is_empty() {
            return Err(Error::InsufficientData("sequence has no frames".into()));
        }
        if axial.len() != lateral.len() {
            return Err(Error::Shape(format!(
                "{} axial frames but {} lateral frames",
                axial.len(),
                lateral.len()
            )));
        }
        let first = &axial[0];
        for (i, (ax, lat)) in axial.iter().zip(&lateral).enumerate() {
            if !ax.same_geometry(first) || !lat.same_geometry(first) {
                return Err(Error::Shape(format!("frame {i} differs in geometry")));
            }
            if ax.timestamp_s != lat.timestamp_s {
                return Err(Error::Shape(format!(
                    "frame {i}: axial t = {} s but lateral t = {} s",
                    ax.timestamp_s, lat.timestamp_s
                )));
            }
        }
        if let Some(w) = axial
            .windows(2)
            .position(|w| w[1].timestamp_s <= w[0].timestamp_s)
        {
            return Err(Error::Domain(format!(
                "timestamps not strictly increasing at frame {}",
                w + 1
            )));
        }
        Ok(Self { axial, lateral })
    }

    pub fn len(&self) -> usize {
        self.axial.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axial.is_empty()
    }

    pub fn axial(&self) -> &[StrainField] {
        &self.axial
    }

    pub fn lateral(&self) -> &[StrainField] {
        &self.lateral
    }

    pub fn rows(&self) -> usize {
        self.axial[0].rows
    }

    pub fn cols(&self) -> usize {
        self.axial[0].cols
    }

    pub fn pixel_spacing_mm(&self) -> f64 {
        self.axial[0].pixel_spacing_mm
    }

    pub fn timestamps(&self) -> Vec<f64> {
        self.axial.iter().map(|f| f.timestamp_s).collect()
    }

    /// Index of the frame acquired at `t_s`, matched to within 1e-9 s
    /// (relative for large times).
    pub fn frame_index(&self, t_s: f64) -> Result<usize> {
        let tol = 1e-9 * t_s.abs().max(1.0);
        self.axial
            .iter()
            .position(|f| (f.timestamp_s - t_s).abs() <= tol)
            .ok_or(Error::FrameLookup(t_s))
    }

    /// Volumetric strain `axial + 2 lateral` of frame `index`.
    pub fn volumetric(&self, index: usize) -> Vec<f64> {
        self.axial[index]
            .values
            .iter()
            .zip(&self.lateral[index].values)
            .map(|(a, l)| a + 2.0 * l)
            .collect()
    }
}

/// Spherical-model domain: center in pixel coordinates, radius `a`, and mask.
#[derive(Debug, Clone, PartialEq)]
pub struct TumorRegion {
    center_row: f64,
    center_col: f64,
    radius_mm: f64,
    pixel_spacing_mm: f64,
    rows: usize,
    cols: usize,
    mask: Vec<bool>,
}

impl TumorRegion {
    pub fn new(
        center_row: f64,
        center_col: f64,
        radius_mm: f64,
        pixel_spacing_mm: f64,
        rows: usize,
        cols: usize,
        mask: Vec<bool>,
    ) -> Result<Self> {
        check_geometry(rows, cols, pixel_spacing_mm)?;
        if mask.len() != rows * cols {
            return Err(Error::Shape(format!(
                "mask has {} entries for a {rows}x{cols} grid",
                mask.len()
            )));
        }
        if !(center_row.is_finite() && center_col.is_finite()) {
            return Err(Error::Domain("region center must be finite".into()));
        }
        if !(radius_mm.is_finite() && radius_mm >= 2.0 * pixel_spacing_mm) {
            return Err(Error::Domain(format!(
                "radius {radius_mm} mm spans fewer than two pixels of {pixel_spacing_mm} mm"
            )));
        }
        let region = Self {
            center_row,
            center_col,
            radius_mm,
            pixel_spacing_mm,
            rows,
            cols,
            mask,
        };
        let limit = radius_mm + pixel_spacing_mm;
        for (i, _) in region.mask.iter().enumerate().filter(|(_, &m)| m) {
            if region.radius_of(i / cols, i % cols) > limit {
                return Err(Error::Domain(format!(
                    "mask pixel ({}, {}) lies outside radius + one pixel",
                    i / cols,
                    i % cols
                )));
            }
        }
        Ok(region)
    }

    /// Disc of all pixels whose centers lie within `radius_mm` of the center.
    pub fn disc(
        rows: usize,
        cols: usize,
        pixel_spacing_mm: f64,
        center_row: f64,
        center_col: f64,
        radius_mm: f64,
    ) -> Result<Self> {
        let mask = (0..rows * cols)
            .map(|i| {
                let dr = (i / cols) as f64 - center_row;
                let dc = (i % cols) as f64 - center_col;
                dr.hypot(dc) * pixel_spacing_mm <= radius_mm
            })
            .collect();
        Self::new(
            center_row,
            center_col,
            radius_mm,
            pixel_spacing_mm,
            rows,
            cols,
            mask,
        )
    }

    pub fn center_row(&self) -> f64 {
        self.center_row
    }

    pub fn center_col(&self) -> f64 {
        self.center_col
    }

    pub fn radius_mm(&self) -> f64 {
        self.radius_mm
    }

    pub fn pixel_spacing_mm(&self) -> f64 {
        self.pixel_spacing_mm
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.cols + col]
    }

    pub fn pixel_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Physical distance (mm) from the region center to a pixel center.
    #[inline]
    pub fn radius_of(&self, row: usize, col: usize) -> f64 {
        (row as f64 - self.center_row).hypot(col as f64 - self.center_col) * self.pixel_spacing_mm
    }

    pub fn matches(&self, rows: usize, cols: usize, pixel_spacing_mm: f64) -> bool {
        self.rows == rows && self.cols == cols && self.pixel_spacing_mm == pixel_spacing_mm
    }
}

/// Elastic inputs with the derived moduli cached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    pub young_modulus_kpa: f64,
    pub poisson_ratio: f64,
    pub compression_modulus_kpa: f64,
    pub aggregate_modulus_kpa: f64,
    pub applied_pressure_kpa: f64,
}

impl MaterialParams {
    pub fn new(young_modulus_kpa: f64, poisson_ratio: f64, applied_pressure_kpa: f64) -> Result<Self> {
        if !(applied_pressure_kpa.is_finite() && applied_pressure_kpa > 0.0) {
            return Err(Error::Domain(format!(
                "applied pressure must be positive, got {applied_pressure_kpa}"
            )));
        }
        Ok(Self {
            young_modulus_kpa,
            poisson_ratio,
            compression_modulus_kpa: compression_modulus(young_modulus_kpa, poisson_ratio)?,
            aggregate_modulus_kpa: aggregate_modulus(young_modulus_kpa, poisson_ratio)?,
            applied_pressure_kpa,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MapKind {
    PressureKpa,
    VelocityRadialKpaPerPixel,
    FlowMilliStrainPerS,
    TimeConstantS,
    VolumetricStrain,
}

impl MapKind {
    pub fn name(self) -> &'static str {
        match self {
            MapKind::PressureKpa => "pressure_kpa",
            MapKind::VelocityRadialKpaPerPixel => "velocity_kpa_per_pixel",
            MapKind::FlowMilliStrainPerS => "flow_millistrain_per_s",
            MapKind::TimeConstantS => "tc_s",
            MapKind::VolumetricStrain => "volumetric_strain",
        }
    }
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Typed 2D map. Off-mask entries hold [`MISSING`]; on-mask entries are finite
/// or [`MISSING`] where a per-pixel estimate failed.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    kind: MapKind,
    rows: usize,
    cols: usize,
    pixel_spacing_mm: f64,
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl ScalarMap {
    /// Builds a map by evaluating `f` on every mask pixel.
    pub fn from_mask(
        kind: MapKind,
        rows: usize,
        cols: usize,
        pixel_spacing_mm: f64,
        mask: Vec<bool>,
        f: impl Fn(usize, usize) -> f64,
    ) -> Result<Self> {
        let values = (0..rows * cols)
            .map(|i| if mask[i] { f(i / cols, i % cols) } else { MISSING })
            .collect();
        Self::new(kind, rows, cols, pixel_spacing_mm, values, mask)
    }

    pub fn new(
        kind: MapKind,
        rows: usize,
        cols: usize,
        pixel_spacing_mm: f64,
        mut values: Vec<f64>,
        mask: Vec<bool>,
    ) -> Result<Self> {
        check_geometry(rows, cols, pixel_spacing_mm)?;
        if values.len() != rows * cols || mask.len() != rows * cols {
            return Err(Error::Shape(format!(
                "map of {rows}x{cols} needs {} values and mask entries, got {} and {}",
                rows * cols,
                values.len(),
                mask.len()
            )));
        }
        for (v, &m) in values.iter_mut().zip(&mask) {
            if !m || !v.is_finite() {
                *v = MISSING;
            }
        }
        Ok(Self {
            kind,
            rows,
            cols,
            pixel_spacing_mm,
            values,
            mask,
        })
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pixel_spacing_mm(&self) -> f64 {
        self.pixel_spacing_mm
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    /// On-mask and not missing.
    #[inline]
    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        let i = row * self.cols + col;
        self.mask[i] && !is_missing(self.values[i])
    }

    /// Mean over valid pixels together with their count. `None` when no pixel is valid.
    pub fn masked_mean(&self) -> Option<(f64, usize)> {
        let (sum, n) = self
            .values
            .iter()
            .zip(&self.mask)
            .filter(|(v, &m)| m && !is_missing(**v))
            .fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
        (n > 0).then(|| (sum / n as f64, n))
    }

    /// Same mask and kind, values mapped through `f` (missing stays missing).
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        let values = self
            .values
            .iter()
            .map(|&v| if is_missing(v) { MISSING } else { f(v) })
            .collect();
        Self {
            values,
            ..self.clone()
        }
    }
}
