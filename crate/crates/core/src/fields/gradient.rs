use crate::domain::{MapKind, ScalarMap, TumorRegion};
use crate::error::{Error, Result};

/// Derivative in pixel units along one axis from the valid neighbors at
/// offsets -2..=2. Central where both sides exist, second-order one-sided
/// where two points lie on one side, first-order with only one.
fn axis_derivative(center: f64, nb: impl Fn(isize) -> Option<f64>) -> f64 {
    match (nb(-1), nb(1)) {
        (Some(l), Some(r)) => 0.5 * (r - l),
        (None, Some(r)) => match nb(2) {
            Some(r2) => 0.5 * (-3.0 * center + 4.0 * r - r2),
            None => r - center,
        },
        (Some(l), None) => match nb(-2) {
            Some(l2) => 0.5 * (3.0 * center - 4.0 * l + l2),
            None => center - l,
        },
        (None, None) => 0.0,
    }
}

/// Radial fluid velocity `v_R = -dp/dR` (kPa per pixel), the pressure
/// gradient projected on the unit vector pointing away from the region center.
/// The pixel at the exact center gets 0.
pub fn fluid_velocity_map(pressure: &ScalarMap, region: &TumorRegion) -> Result<ScalarMap> {
    let (rows, cols) = (pressure.rows(), pressure.cols());
    if !region.matches(rows, cols, pressure.pixel_spacing_mm()) {
        return Err(Error::Shape("region and pressure map grids differ".into()));
    }
    if let Some(i) = (0..rows * cols).find(|&i| region.mask()[i] && !pressure.mask()[i]) {
        return Err(Error::Shape(format!(
            "region pixel ({}, {}) lies outside the pressure mask",
            i / cols,
            i % cols
        )));
    }
    let valid = |r: isize, c: isize| -> Option<f64> {
        if r < 0 || c < 0 || r >= rows as isize || c >= cols as isize {
            return None;
        }
        let (r, c) = (r as usize, c as usize);
        (region.contains(r, c) && pressure.is_valid(r, c)).then(|| pressure.get(r, c))
    };
    ScalarMap::from_mask(
        MapKind::VelocityRadialKpaPerPixel,
        rows,
        cols,
        pressure.pixel_spacing_mm(),
        region.mask().to_vec(),
        |r, c| {
            let p = pressure.get(r, c);
            let dy = r as f64 - region.center_row();
            let dx = c as f64 - region.center_col();
            let dist = dx.hypot(dy);
            if dist < 1e-9 {
                return 0.0;
            }
            let (ri, ci) = (r as isize, c as isize);
            let dp_dx = axis_derivative(p, |k| valid(ri, ci + k));
            let dp_dy = axis_derivative(p, |k| valid(ri + k, ci));
            -(dp_dx * dx + dp_dy * dy) / dist
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::is_missing;
    use crate::forward::{analytical_pressure, pressure_gradient};
    use approx::assert_relative_eq;

    fn analytic_map(region: &TumorRegion, psi: f64, alpha: f64) -> ScalarMap {
        let a = region.radius_mm();
        ScalarMap::from_mask(
            MapKind::PressureKpa,
            region.rows(),
            region.cols(),
            region.pixel_spacing_mm(),
            region.mask().to_vec(),
            |r, c| analytical_pressure(region.radius_of(r, c).min(a), psi, alpha, a).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn uniform_pressure_has_zero_velocity() {
        let region = TumorRegion::disc(21, 21, 0.5, 10.0, 10.0, 4.0).unwrap();
        let p = ScalarMap::from_mask(MapKind::PressureKpa, 21, 21, 0.5, region.mask().to_vec(), |_, _| 3.0)
            .unwrap();
        let v = fluid_velocity_map(&p, &region).unwrap();
        for (i, x) in v.values().iter().enumerate() {
            if region.mask()[i] {
                assert!(x.abs() < 1e-15);
            } else {
                assert!(is_missing(*x));
            }
        }
    }

    #[test]
    fn center_pixel_is_zero() {
        let region = TumorRegion::disc(21, 21, 0.5, 10.0, 10.0, 4.0).unwrap();
        let p = ScalarMap::from_mask(MapKind::PressureKpa, 21, 21, 0.5, region.mask().to_vec(), |r, c| {
            (r * 7 + c * 3) as f64
        })
        .unwrap();
        assert_eq!(fluid_velocity_map(&p, &region).unwrap().get(10, 10), 0.0);
    }

    #[test]
    fn rim_velocity_on_coarse_grid() {
        // a = 3 mm, 1 mm pixels: v at R = a close to (psi/a)(alpha coth alpha - 1)
        let region = TumorRegion::disc(9, 9, 1.0, 4.0, 4.0, 3.0).unwrap();
        let v = fluid_velocity_map(&analytic_map(&region, 1.0, 1.0), &region).unwrap();
        let exact = -pressure_gradient(3.0, 1.0, 1.0, 3.0);
        assert_relative_eq!(exact, 0.1043, epsilon = 5e-5);
        // one-sided second-order stencil at the rim, three pixels across the radius
        assert_relative_eq!(v.get(4, 7), exact, max_relative = 0.1);
    }

    #[test]
    fn pressure_mask_must_cover_region() {
        let region = TumorRegion::disc(21, 21, 0.5, 10.0, 10.0, 4.0).unwrap();
        let small = TumorRegion::disc(21, 21, 0.5, 10.0, 10.0, 2.0).unwrap();
        let p = analytic_map(&small, 1.0, 2.0);
        assert!(fluid_velocity_map(&p, &region).is_err());
    }

    fn max_relative_error(spacing: f64) -> f64 {
        let a = 3.0;
        let n = (2.0 * a / spacing).round() as usize + 7;
        let c = (n / 2) as f64;
        let region = TumorRegion::disc(n, n, spacing, c, c, a).unwrap();
        let v = fluid_velocity_map(&analytic_map(&region, 1.0, 2.0), &region).unwrap();
        let mut worst: f64 = 0.0;
        let mut peak: f64 = 0.0;
        for r in 0..n {
            for col in 0..n {
                if region.contains(r, col) {
                    let exact = -pressure_gradient(region.radius_of(r, col), 1.0, 2.0, a) * spacing;
                    worst = worst.max((v.get(r, col) - exact).abs());
                    peak = peak.max(exact.abs());
                }
            }
        }
        worst / peak
    }

    #[test]
    fn second_order_in_pixel_spacing() {
        let e1 = max_relative_error(0.1);
        let e2 = max_relative_error(0.05);
        assert!(e1 < 0.02, "{e1}");
        assert!(e1 / e2 > 3.0, "ratio {}", e1 / e2);
    }
}
