use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSample {
    /// Radius in the units of `a_m` passed to the solver.
    pub r: f64,
    pub p: f64,
}

/// Finite-difference solution of the radially symmetric Helmholtz problem
///
/// ```text
/// p'' + (2 / R) p' - (alpha / a)^2 p + W = 0,   p'(0) = 0,   p(a) = 0
/// ```
///
/// on `n_nodes` equally spaced nodes over `[0, a]`. Interior nodes use the
/// standard second-order stencil; the center uses the regular-point limit
/// `p'' + (2/R) p' -> 3 p''(0)` with the mirror node `p(-h) = p(h)`.
/// `alpha = 0` reduces to the Poisson problem.
pub fn helmholtz_oracle(alpha: f64, a_m: f64, w: f64, n_nodes: usize) -> Result<Vec<OracleSample>> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!("alpha must be non-negative, got {alpha}")));
    }
    if !(a_m > 0.0 && a_m.is_finite()) {
        return Err(Error::Domain(format!("radius must be positive, got {a_m}")));
    }
    if n_nodes < 64 {
        return Err(Error::Parameter(format!("need at least 64 nodes, got {n_nodes}")));
    }
    let h = a_m / (n_nodes - 1) as f64;
    let h2 = h * h;
    let kappa2 = (alpha / a_m).powi(2);

    // unknowns p_0 .. p_{n-2}; p_{n-1} = 0
    let n = n_nodes - 1;
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let rhs = vec![-w; n];

    diag[0] = -6.0 / h2 - kappa2;
    upper[0] = 6.0 / h2;
    for i in 1..n {
        let inv_i = 1.0 / i as f64;
        lower[i] = (1.0 - inv_i) / h2;
        diag[i] = -2.0 / h2 - kappa2;
        upper[i] = (1.0 + inv_i) / h2;
    }

    let mut p = solve_tridiagonal(&lower, &diag, &upper, &rhs)?;
    p.push(0.0);
    Ok(p
        .into_iter()
        .enumerate()
        .map(|(i, p)| OracleSample { r: i as f64 * h, p })
        .collect())
}

/// Thomas algorithm. `lower[0]` and `upper[n-1]` are ignored.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom.abs() < f64::MIN_POSITIVE {
        return Err(Error::Solver("singular tridiagonal system at row 0".into()));
    }
    c[0] = upper[0] / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        if denom.abs() < f64::MIN_POSITIVE {
            return Err(Error::Solver(format!("singular tridiagonal system at row {i}")));
        }
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// Linear interpolation of oracle samples at radius `r` (clamped to the node range).
pub fn interpolate_profile(samples: &[OracleSample], r: f64) -> f64 {
    let n = samples.len();
    let h = samples[1].r - samples[0].r;
    let s = (r / h).clamp(0.0, (n - 1) as f64);
    let i = (s.floor() as usize).min(n - 2);
    let t = s - i as f64;
    samples[i].p * (1.0 - t) + samples[i + 1].p * t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::analytical_pressure;
    use approx::assert_relative_eq;

    fn max_error_vs_closed_form(alpha: f64, n: usize) -> f64 {
        let a = 1.0;
        let samples = helmholtz_oracle(alpha, a, alpha * alpha, n).unwrap();
        let peak = samples.iter().map(|s| s.p.abs()).fold(0.0, f64::max);
        samples
            .iter()
            .map(|s| (s.p - analytical_pressure(s.r.min(a), 1.0, alpha, a).unwrap()).abs())
            .fold(0.0, f64::max)
            / peak
    }

    #[test]
    fn poisson_limit_matches_parabola() {
        // p = W (a^2 - R^2) / 6
        let s = helmholtz_oracle(0.0, 1.0, 1.0, 256).unwrap();
        assert_relative_eq!(s[0].p, 1.0 / 6.0, max_relative = 1e-10);
        for x in &s {
            assert_relative_eq!(x.p, (1.0 - x.r * x.r) / 6.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn matches_closed_form_at_4096_nodes() {
        assert!(max_error_vs_closed_form(2.0, 4096) < 1e-3);
    }

    #[test]
    fn second_order_convergence() {
        let e1 = max_error_vs_closed_form(2.0, 257);
        let e2 = max_error_vs_closed_form(2.0, 513);
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn maximum_principle() {
        for alpha in [0.4, 3.0, 12.83] {
            let s = helmholtz_oracle(alpha, 0.003, 1.0, 512).unwrap();
            assert!(s.iter().all(|x| x.p >= 0.0));
            let max = s.iter().map(|x| x.p).fold(f64::MIN, f64::max);
            assert_eq!(s[0].p, max);
        }
    }

    #[test]
    fn rejects_small_grids() {
        assert!(matches!(helmholtz_oracle(1.0, 1.0, 1.0, 63), Err(Error::Parameter(_))));
    }

    #[test]
    fn interpolation_hits_nodes() {
        let s = helmholtz_oracle(1.0, 2.0, 1.0, 65).unwrap();
        assert_relative_eq!(interpolate_profile(&s, s[10].r), s[10].p, max_relative = 1e-12);
        assert_eq!(interpolate_profile(&s, 2.0), 0.0);
    }
}
