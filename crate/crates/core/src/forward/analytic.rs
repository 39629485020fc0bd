use crate::error::{Error, Result};

/// Below this normalized radius the model switches to its `R -> 0` limit.
pub(crate) const CENTER_LIMIT: f64 = 1e-6;

/// `sinh(alpha x) / sinh(alpha)` without overflow for large `alpha`.
#[inline]
fn sinh_ratio(alpha: f64, x: f64) -> f64 {
    (alpha * (x - 1.0)).exp() * (-(-2.0 * alpha * x).exp_m1()) / (-(-2.0 * alpha).exp_m1())
}

/// `cosh(alpha x) / sinh(alpha)`.
#[inline]
fn cosh_sinh_ratio(alpha: f64, x: f64) -> f64 {
    (alpha * (x - 1.0)).exp() * (1.0 + (-2.0 * alpha * x).exp()) / (-(-2.0 * alpha).exp_m1())
}

#[inline]
fn coth(alpha: f64) -> f64 {
    (1.0 + (-2.0 * alpha).exp()) / (-(-2.0 * alpha).exp_m1())
}

/// `alpha / sinh(alpha)`.
#[inline]
pub(crate) fn alpha_cosech(alpha: f64) -> f64 {
    if alpha < 1e-4 {
        1.0 - alpha * alpha / 6.0
    } else {
        2.0 * alpha * (-alpha).exp() / (-(-2.0 * alpha).exp_m1())
    }
}

/// Shape term `g(x) = sinh(alpha x) / (x sinh(alpha))`, `x = R / a`, so that
/// `p = psi (1 - g)`. At `x -> 0`, `g -> alpha cosech(alpha)`.
pub fn pressure_shape(alpha: f64, x: f64) -> f64 {
    if x < CENTER_LIMIT {
        alpha_cosech(alpha)
    } else {
        sinh_ratio(alpha, x) / x
    }
}

/// `d g / d alpha` of [`pressure_shape`].
pub fn pressure_shape_dalpha(alpha: f64, x: f64) -> f64 {
    if x < CENTER_LIMIT {
        // (1 - alpha coth(alpha)) / sinh(alpha)
        let cosech = alpha_cosech(alpha) / alpha;
        cosech * (1.0 - alpha * coth(alpha))
    } else {
        cosh_sinh_ratio(alpha, x) - pressure_shape(alpha, x) * coth(alpha)
    }
}

/// Spherical-tumor pressure profile
/// `p(R) = psi (1 - sinh(alpha R / a) / ((R / a) sinh(alpha)))`, defined on `0 <= R <= a`.
pub fn analytical_pressure(r_mm: f64, psi: f64, alpha: f64, a_mm: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    if !(a_mm > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {a_mm}")));
    }
    if !(0.0..=a_mm).contains(&r_mm) {
        return Err(Error::Domain(format!(
            "R = {r_mm} mm outside the tumor [0, {a_mm}] mm"
        )));
    }
    Ok(psi * (1.0 - pressure_shape(alpha, r_mm / a_mm)))
}

/// Closed-form `dp/dR` (kPa per mm) of [`analytical_pressure`]; zero at the center.
pub fn pressure_gradient(r_mm: f64, psi: f64, alpha: f64, a_mm: f64) -> f64 {
    let x = r_mm / a_mm;
    if x < CENTER_LIMIT {
        return 0.0;
    }
    // d/dx [sinh(alpha x) / (x sinh alpha)] = (alpha cosh(alpha x)/sinh(alpha) - g) / x
    let dg_dx = (alpha * cosh_sinh_ratio(alpha, x) - sinh_ratio(alpha, x) / x) / x;
    -psi * dg_dx / a_mm
}
