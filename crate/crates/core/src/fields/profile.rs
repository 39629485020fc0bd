use crate::domain::{is_missing, ScalarMap, TumorRegion, MISSING};
use crate::error::{Error, Result};

/// Radius-binned profile from the region center out to the rim.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    /// Bin centers (mm).
    pub radii_mm: Vec<f64>,
    /// Mean radius of the pixels that fell into each bin (bin center when empty
    /// or in single-ray mode).
    pub mean_radii_mm: Vec<f64>,
    /// Radius of every pixel averaged into each bin (the sample radius in
    /// single-ray mode, empty when the bin is missing).
    pub member_radii_mm: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub counts: Vec<usize>,
}

impl RadialProfile {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn populated(&self) -> usize {
        self.values.iter().filter(|v| !is_missing(**v)).count()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self
                .values
                .iter()
                .map(|&v| if is_missing(v) { MISSING } else { v * factor })
                .collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ProfileMode {
    /// Mean of every on-mask pixel in each radius bin.
    #[default]
    Averaged,
    /// Bilinear samples along one ray; the angle is measured from the +column
    /// axis towards +row, in radians.
    SingleRay { angle_rad: f64 },
}

pub fn radial_profile(map: &ScalarMap, region: &TumorRegion, n_bins: usize) -> Result<RadialProfile> {
    radial_profile_with(map, region, n_bins, ProfileMode::Averaged)
}

pub fn radial_profile_with(
    map: &ScalarMap,
    region: &TumorRegion,
    n_bins: usize,
    mode: ProfileMode,
) -> Result<RadialProfile> {
    if n_bins < 4 {
        return Err(Error::Parameter(format!("need at least 4 bins, got {n_bins}")));
    }
    if !region.matches(map.rows(), map.cols(), map.pixel_spacing_mm()) {
        return Err(Error::Shape("region and map grids differ".into()));
    }
    if region.pixel_count() == 0 {
        return Err(Error::EmptyRegion);
    }
    let a = region.radius_mm();
    let width = a / n_bins as f64;
    let radii_mm: Vec<f64> = (0..n_bins).map(|k| (k as f64 + 0.5) * width).collect();
    match mode {
        ProfileMode::Averaged => {
            let mut sum = vec![0.0; n_bins];
            let mut rsum = vec![0.0; n_bins];
            let mut counts = vec![0usize; n_bins];
            let mut members = vec![Vec::new(); n_bins];
            for r in 0..map.rows() {
                for c in 0..map.cols() {
                    if !region.contains(r, c) || !map.is_valid(r, c) {
                        continue;
                    }
                    let radius = region.radius_of(r, c);
                    if radius > a {
                        continue;
                    }
                    let k = ((radius / width) as usize).min(n_bins - 1);
                    sum[k] += map.get(r, c);
                    rsum[k] += radius;
                    members[k].push(radius);
                    counts[k] += 1;
                }
            }
            let values = sum
                .iter()
                .zip(&counts)
                .map(|(s, &n)| if n > 0 { s / n as f64 } else { MISSING })
                .collect();
            let mean_radii_mm = rsum
                .iter()
                .zip(&counts)
                .zip(&radii_mm)
                .map(|((s, &n), &center)| if n > 0 { s / n as f64 } else { center })
                .collect();
            Ok(RadialProfile {
                radii_mm,
                mean_radii_mm,
                member_radii_mm: members,
                values,
                counts,
            })
        }
        ProfileMode::SingleRay { angle_rad } => {
            let (sin, cos) = angle_rad.sin_cos();
            let spacing = map.pixel_spacing_mm();
            let (values, counts): (Vec<f64>, Vec<usize>) = radii_mm
                .iter()
                .map(|&radius| {
                    let row = region.center_row() + radius / spacing * sin;
                    let col = region.center_col() + radius / spacing * cos;
                    bilinear(map, region, row, col)
                })
                .unzip();
            let member_radii_mm = radii_mm
                .iter()
                .zip(&values)
                .map(|(&r, v)| if is_missing(*v) { Vec::new() } else { vec![r] })
                .collect();
            Ok(RadialProfile {
                mean_radii_mm: radii_mm.clone(),
                member_radii_mm,
                radii_mm,
                values,
                counts,
            })
        }
    }
}

/// Bilinear interpolation renormalized over the valid corners.
fn bilinear(map: &ScalarMap, region: &TumorRegion, row: f64, col: f64) -> (f64, usize) {
    let (r0, c0) = (row.floor(), col.floor());
    let (fr, fc) = (row - r0, col - c0);
    let mut acc = 0.0;
    let mut wsum = 0.0;
    let mut used = 0;
    for (dr, wr) in [(0, 1.0 - fr), (1, fr)] {
        for (dc, wc) in [(0, 1.0 - fc), (1, fc)] {
            let (r, c) = (r0 as isize + dr, c0 as isize + dc);
            if r < 0 || c < 0 || r >= map.rows() as isize || c >= map.cols() as isize {
                continue;
            }
            let (r, c) = (r as usize, c as usize);
            let w = wr * wc;
            if w > 0.0 && region.contains(r, c) && map.is_valid(r, c) {
                acc += w * map.get(r, c);
                wsum += w;
                used += 1;
            }
        }
    }
    if used == 0 || wsum <= 0.0 {
        (MISSING, 0)
    } else {
        (acc / wsum, used)
    }
}

/// Centered moving average of odd length. Near the ends the window is cut to
/// the available bins; missing bins are skipped and stay missing.
pub fn smooth_profile(profile: &RadialProfile, window: usize) -> Result<RadialProfile> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::Parameter(format!("smoothing window must be odd, got {window}")));
    }
    let n = profile.len();
    if window > n {
        return Err(Error::Parameter(format!(
            "smoothing window {window} exceeds profile length {n}"
        )));
    }
    let half = window / 2;
    let v = &profile.values;
    let values = (0..n)
        .map(|i| {
            if is_missing(v[i]) {
                return MISSING;
            }
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let (s, k) = v[lo..=hi]
                .iter()
                .filter(|x| !is_missing(**x))
                .fold((0.0, 0usize), |(s, k), x| (s + x, k + 1));
            s / k as f64
        })
        .collect();
    Ok(RadialProfile {
        values,
        ..profile.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::MapKind;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn profile(values: Vec<f64>) -> RadialProfile {
        let n = values.len();
        RadialProfile {
            radii_mm: (0..n).map(|i| i as f64 + 0.5).collect(),
            mean_radii_mm: (0..n).map(|i| i as f64 + 0.5).collect(),
            member_radii_mm: (0..n).map(|i| vec![i as f64 + 0.5]).collect(),
            counts: vec![1; n],
            values,
        }
    }

    fn region() -> TumorRegion {
        TumorRegion::disc(101, 101, 0.1, 50.0, 50.0, 4.0).unwrap()
    }

    fn radial_map(region: &TumorRegion, f: impl Fn(f64) -> f64) -> ScalarMap {
        ScalarMap::from_mask(MapKind::PressureKpa, 101, 101, 0.1, region.mask().to_vec(), |r, c| {
            f(region.radius_of(r, c))
        })
        .unwrap()
    }

    #[test]
    fn impulse_under_truncated_edges() {
        let s = smooth_profile(&profile(vec![0.0, 0.0, 1.0, 0.0, 0.0]), 5).unwrap();
        let expected = [1.0 / 3.0, 0.25, 0.2, 0.25, 1.0 / 3.0];
        for (a, b) in s.values.iter().zip(expected) {
            assert_relative_eq!(*a, b, max_relative = 1e-15);
        }
    }

    #[test]
    fn smoothing_keeps_constants_and_interior_ramps() {
        let s = smooth_profile(&profile(vec![2.5; 9]), 5).unwrap();
        assert!(s.values.iter().all(|&v| v == 2.5));
        let ramp: Vec<f64> = (0..12).map(|i| 0.5 + 0.25 * i as f64).collect();
        let s = smooth_profile(&profile(ramp.clone()), 5).unwrap();
        for (got, want) in s.values[2..10].iter().zip(&ramp[2..10]) {
            assert_relative_eq!(*got, *want, max_relative = 1e-14);
        }
    }

    #[test]
    fn smoothing_skips_missing() {
        let s = smooth_profile(&profile(vec![1.0, MISSING, 3.0, 5.0, 7.0]), 3).unwrap();
        assert!(is_missing(s.values[1]));
        assert_eq!(s.values[0], 1.0);
        assert_eq!(s.values[2], 4.0);
    }

    #[test]
    fn smoothing_rejects_bad_windows() {
        let p = profile(vec![1.0; 4]);
        assert!(matches!(smooth_profile(&p, 4), Err(Error::Parameter(_))));
        assert!(matches!(smooth_profile(&p, 5), Err(Error::Parameter(_))));
        assert_eq!(smooth_profile(&p, 1).unwrap(), p);
    }

    #[test]
    fn constant_map_gives_constant_profile() {
        let reg = region();
        let p = radial_profile(&radial_map(&reg, |_| 1.7), &reg, 40).unwrap();
        assert_eq!(p.populated(), 40);
        for v in &p.values {
            assert_relative_eq!(*v, 1.7, max_relative = 1e-14);
        }
        assert_eq!(p.counts.iter().sum::<usize>(), reg.pixel_count());
    }

    #[test]
    fn radial_function_within_half_bin_lipschitz_bound() {
        // f(R) = R^2 has Lipschitz constant 2a on [0, a]
        let reg = region();
        let f = |r: f64| r * r;
        let n = 20;
        let p = radial_profile(&radial_map(&reg, f), &reg, n).unwrap();
        let half_bin = 0.5 * reg.radius_mm() / n as f64;
        let bound = 2.0 * reg.radius_mm() * half_bin;
        for (r, v) in p.radii_mm.iter().zip(&p.values) {
            assert!((v - f(*r)).abs() <= bound);
        }
    }

    #[test]
    fn single_ray_matches_averaged_profile() {
        let reg = region();
        let f = |r: f64| (-(r / 2.0).powi(2)).exp();
        let map = radial_map(&reg, f);
        let avg = radial_profile(&map, &reg, 20).unwrap();
        for angle in [0.0, 0.7, std::f64::consts::PI] {
            let ray = radial_profile_with(&map, &reg, 20, ProfileMode::SingleRay { angle_rad: angle }).unwrap();
            for (a, b) in avg.values.iter().zip(&ray.values) {
                // half-bin Lipschitz bound, |f'| <= 0.43
                assert!((a - b).abs() < 0.43 * 0.2, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn profile_errors() {
        let reg = region();
        let map = radial_map(&reg, |_| 1.0);
        assert!(matches!(radial_profile(&map, &reg, 3), Err(Error::Parameter(_))));
    }

    proptest! {
        #[test]
        fn smoothing_preserves_constant_and_bounds(c in -1e3f64..1e3, n in 5usize..40, w in 0usize..3) {
            let window = 2 * w + 1;
            let s = smooth_profile(&profile(vec![c; n]), window).unwrap();
            for v in &s.values {
                prop_assert!((v - c).abs() <= 1e-12 * (1.0 + c.abs()));
            }
        }

        #[test]
        fn smoothing_stays_within_range(values in proptest::collection::vec(-10.0f64..10.0, 5..30)) {
            let s = smooth_profile(&profile(values.clone()), 5).unwrap();
            let lo = values.iter().cloned().fold(f64::MAX, f64::min);
            let hi = values.iter().cloned().fold(f64::MIN, f64::max);
            for v in &s.values {
                prop_assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
            }
        }
    }
}
