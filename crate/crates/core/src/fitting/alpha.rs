use nalgebra::{DMatrix, DVector};

use super::lm::{levenberg_marquardt, LmConfig, LmReport};
use crate::domain::is_missing;
use crate::error::{Error, Result};
use crate::fields::{smooth_profile, RadialProfile};
use crate::forward::{pressure_shape, pressure_shape_dalpha};

const MAX_ALPHA: f64 = 1e3;

/// Result of fitting `psi (1 - sinh(alpha R/a) / ((R/a) sinh alpha))` to a
/// peak-normalized radial pressure profile. `psi` is on the normalized scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaFit {
    pub alpha: f64,
    pub psi: f64,
    pub residual_rms: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaFitOptions {
    pub init_alpha: f64,
    /// Fallback `psi` start, used only when the least-squares amplitude at
    /// `init_alpha` is zero or not finite.
    pub init_psi: f64,
    /// Moving-average length applied to the profile before fitting (1 disables).
    pub smoothing_window: usize,
    /// Starting `alpha` values tried when the first start does not converge.
    pub restarts: Vec<f64>,
    /// Weight each smoothed bin by the inverse noise level its pixel count implies.
    pub weighted: bool,
    pub lm: LmConfig,
}

impl Default for AlphaFitOptions {
    fn default() -> Self {
        Self {
            init_alpha: 5.0,
            init_psi: 1.0,
            smoothing_window: 5,
            restarts: vec![0.5, 5.0, 12.0],
            weighted: true,
            lm: LmConfig::default(),
        }
    }
}

/// Fits `alpha` and `psi` after window-5 smoothing and peak normalization.
pub fn fit_alpha(profile: &RadialProfile, a_mm: f64, init_alpha: f64, init_psi: f64) -> Result<AlphaFit> {
    fit_alpha_with(
        profile,
        a_mm,
        &AlphaFitOptions {
            init_alpha,
            init_psi,
            ..AlphaFitOptions::default()
        },
    )
}

/// Linear map from model values at sample radii to fitted observations: each
/// group averages nodes (the pixels of one bin) and each observation averages
/// groups (the smoothing window). The fit runs the model through the same
/// binning and smoothing as the data.
struct Observation {
    nodes: Vec<f64>,
    groups: Vec<Vec<usize>>,
    rows: Vec<Vec<usize>>,
    weights: Vec<f64>,
}

impl Observation {
    fn identity(x: &[f64]) -> Self {
        Self {
            nodes: x.to_vec(),
            groups: (0..x.len()).map(|i| vec![i]).collect(),
            rows: (0..x.len()).map(|i| vec![i]).collect(),
            weights: vec![1.0; x.len()],
        }
    }

    fn len(&self) -> usize {
        self.rows.len()
    }

    fn apply(&self, node_values: impl Fn(f64) -> f64) -> Vec<f64> {
        let f: Vec<f64> = self.nodes.iter().map(|&x| node_values(x)).collect();
        let mean = |idx: &[usize], v: &[f64]| idx.iter().map(|&i| v[i]).sum::<f64>() / idx.len() as f64;
        let g: Vec<f64> = self.groups.iter().map(|idx| mean(idx, &f)).collect();
        self.rows.iter().map(|idx| mean(idx, &g)).collect()
    }
}

pub fn fit_alpha_with(profile: &RadialProfile, a_mm: f64, options: &AlphaFitOptions) -> Result<AlphaFit> {
    if !(a_mm.is_finite() && a_mm > 0.0) {
        return Err(Error::Domain(format!("tumor radius must be positive, got {a_mm}")));
    }
    if profile.populated() == 0 {
        return Err(Error::Degenerate("profile has no populated bins".into()));
    }
    if profile.populated() < 6 {
        return Err(Error::InsufficientData(format!(
            "need at least 6 populated bins, got {}",
            profile.populated()
        )));
    }
    let window = options.smoothing_window.max(1);
    let smoothed = smooth_profile(profile, window)?;
    let populated: Vec<usize> = (0..profile.len()).filter(|&k| !is_missing(profile.values[k])).collect();
    let peak = populated
        .iter()
        .fold(0.0, |m: f64, &k| m.max(smoothed.values[k].abs()));
    if peak == 0.0 || !peak.is_finite() {
        return Err(Error::Degenerate("profile peak is zero".into()));
    }

    let mut nodes = Vec::new();
    let mut groups: Vec<Vec<usize>> = Vec::with_capacity(populated.len());
    for &k in &populated {
        let members = &profile.member_radii_mm[k];
        let radii = if members.is_empty() {
            std::slice::from_ref(&profile.mean_radii_mm[k])
        } else {
            members.as_slice()
        };
        groups.push((nodes.len()..nodes.len() + radii.len()).collect());
        nodes.extend(radii.iter().map(|r| r / a_mm));
    }
    let half = window / 2;
    let rows: Vec<Vec<usize>> = populated
        .iter()
        .map(|&k| {
            (0..populated.len())
                .filter(|&q| populated[q] + half >= k && populated[q] <= k + half)
                .collect()
        })
        .collect();
    let weights = if options.weighted {
        inverse_noise_weights(&groups, &rows)
    } else {
        vec![1.0; rows.len()]
    };
    let observation = Observation { nodes, groups, rows, weights };
    let y: Vec<f64> = populated.iter().map(|&k| smoothed.values[k] / peak).collect();
    fit_observed(&observation, &y, options)
}

/// `1 / sd` of each smoothed bin under i.i.d. pixel noise, scaled to a maximum of 1.
fn inverse_noise_weights(groups: &[Vec<usize>], rows: &[Vec<usize>]) -> Vec<f64> {
    let w: Vec<f64> = rows
        .iter()
        .map(|row| {
            let var = row.iter().map(|&j| 1.0 / groups[j].len() as f64).sum::<f64>() / (row.len() * row.len()) as f64;
            1.0 / var.sqrt()
        })
        .collect();
    let max = w.iter().cloned().fold(0.0, f64::max);
    w.iter().map(|v| v / max).collect()
}

/// `[d/d alpha, d/d psi]` of the pressure model at normalized radius `x`.
pub fn pressure_model_jacobian(alpha: f64, psi: f64, x: f64) -> [f64; 2] {
    [-psi * pressure_shape_dalpha(alpha, x), 1.0 - pressure_shape(alpha, x)]
}

/// Fits the model to samples `y` at normalized radii `x = R / a` directly.
pub fn fit_alpha_points(x: &[f64], y: &[f64], options: &AlphaFitOptions) -> Result<AlphaFit> {
    if x.len() != y.len() {
        return Err(Error::Shape("radius and value counts differ".into()));
    }
    fit_observed(&Observation::identity(x), y, options)
}

/// LM runs on `(ln alpha, c)` with `c = psi (1 - alpha cosech alpha)` the
/// central value, i.e. on `c h(alpha, x)` with `h = (1 - g(x)) / (1 - g(0))`.
/// At small `alpha` the profile is nearly `psi alpha^2 (1 - x^2) / 6`, so the
/// direct `(alpha, psi)` pair is almost collinear; `(alpha, c)` is not.
fn fit_observed(obs: &Observation, y: &[f64], options: &AlphaFitOptions) -> Result<AlphaFit> {
    if obs.len() < 2 {
        return Err(Error::InsufficientData("need at least two samples".into()));
    }
    if !(options.init_alpha > 0.0 && options.init_alpha.is_finite()) {
        return Err(Error::Domain(format!(
            "initial alpha must be positive, got {}",
            options.init_alpha
        )));
    }
    let m = obs.len();
    let residual = |p: &DVector<f64>| {
        let alpha = p[0].exp();
        let center = 1.0 - pressure_shape(alpha, 0.0);
        let g = obs.apply(|x| pressure_shape(alpha, x));
        DVector::from_iterator(
            m,
            (0..m).map(|i| obs.weights[i] * (p[1] * (1.0 - g[i]) / center - y[i])),
        )
    };
    let jacobian = |p: &DVector<f64>| {
        let alpha = p[0].exp();
        let center = 1.0 - pressure_shape(alpha, 0.0);
        let center_da = -pressure_shape_dalpha(alpha, 0.0);
        let g = obs.apply(|x| pressure_shape(alpha, x));
        let dg = obs.apply(|x| pressure_shape_dalpha(alpha, x));
        let mut j = DMatrix::zeros(m, 2);
        for i in 0..m {
            let h = (1.0 - g[i]) / center;
            j[(i, 0)] = obs.weights[i] * p[1] * alpha * (-dg[i] - h * center_da) / center;
            j[(i, 1)] = obs.weights[i] * h;
        }
        j
    };
    // amplitude starts at its least-squares value for the starting alpha
    let run = |alpha0: f64| {
        let center = 1.0 - pressure_shape(alpha0, 0.0);
        let h: Vec<f64> = obs.apply(|x| (1.0 - pressure_shape(alpha0, x)) / center);
        let hh: f64 = h.iter().map(|v| v * v).sum();
        let c0 = h.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / hh;
        let c0 = if c0.is_finite() && c0 != 0.0 { c0 } else { options.init_psi * center };
        let init = DVector::from_vec(vec![alpha0.ln(), c0]);
        levenberg_marquardt(residual, jacobian, &init, &options.lm).map(|mut rep| {
            // beyond this the profile is a step at the rim and alpha is not identifiable
            if !(rep.params[0].exp() <= MAX_ALPHA) {
                rep.converged = false;
            }
            rep
        })
    };

    let mut best: LmReport = run(options.init_alpha)?;
    let mut iterations = best.iterations;
    if !best.converged {
        for &alpha0 in &options.restarts {
            let Ok(rep) = run(alpha0) else { continue };
            iterations += rep.iterations;
            if (rep.converged && !best.converged) || (rep.converged == best.converged && rep.cost < best.cost) {
                best = rep;
            }
        }
    }
    let alpha = best.params[0].exp();
    Ok(AlphaFit {
        alpha,
        psi: best.params[1] / (1.0 - pressure_shape(alpha, 0.0)),
        residual_rms: best.residual_rms,
        iterations,
        converged: best.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::analytical_pressure;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model_profile(alpha: f64, psi: f64, a: f64, n: usize) -> RadialProfile {
        let radii: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) * a / n as f64).collect();
        RadialProfile {
            values: radii.iter().map(|&r| analytical_pressure(r, psi, alpha, a).unwrap()).collect(),
            mean_radii_mm: radii.clone(),
            member_radii_mm: radii.iter().map(|&r| vec![r]).collect(),
            radii_mm: radii,
            counts: vec![1; n],
        }
    }

    #[test]
    fn noiseless_recovery_without_smoothing() {
        let p = model_profile(2.0, 1.0, 3.0, 50);
        let opts = AlphaFitOptions {
            smoothing_window: 1,
            ..AlphaFitOptions::default()
        };
        let fit = fit_alpha_with(&p, 3.0, &opts).unwrap();
        assert!(fit.converged);
        assert_relative_eq!(fit.alpha, 2.0, max_relative = 1e-4);
    }

    #[test]
    fn noiseless_recovery_with_default_smoothing() {
        let p = model_profile(2.0, 1.0, 3.0, 50);
        let fit = fit_alpha(&p, 3.0, 5.0, 1.0).unwrap();
        assert!(fit.converged);
        assert_relative_eq!(fit.alpha, 2.0, max_relative = 1e-6);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let alpha = rng.random_range(0.2..15.0);
            let psi = rng.random_range(0.5..2.0);
            let x = rng.random_range(0.0..1.0);
            let f = |a: f64, s: f64| s * (1.0 - pressure_shape(a, x));
            let [da, ds] = pressure_model_jacobian(alpha, psi, x);
            let h = 1e-5 * alpha;
            let fda = (f(alpha + h, psi) - f(alpha - h, psi)) / (2.0 * h);
            let fds = (f(alpha, psi + 1e-5) - f(alpha, psi - 1e-5)) / 2e-5;
            assert!((da - fda).abs() <= 1e-6 * fda.abs().max(1e-4), "alpha {alpha} x {x}: {da} vs {fda}");
            assert!((ds - fds).abs() <= 1e-6 * fds.abs().max(1e-4));
        }
    }

    #[test]
    fn scale_invariant() {
        let p = model_profile(3.0, 1.0, 3.0, 30);
        let base = fit_alpha(&p, 3.0, 5.0, 1.0).unwrap().alpha;
        for c in [0.1, 7.0, 1000.0] {
            let a = fit_alpha(&p.scaled(c), 3.0, 5.0, 1.0).unwrap().alpha;
            assert!((a - base).abs() <= 1e-8 * base);
        }
    }

    #[test]
    fn degenerate_profiles_rejected() {
        let mut p = model_profile(2.0, 1.0, 3.0, 20);
        p.values.iter_mut().for_each(|v| *v = 0.0);
        assert!(matches!(fit_alpha(&p, 3.0, 5.0, 1.0), Err(Error::Degenerate(_))));
        p.values.iter_mut().for_each(|v| *v = f64::NAN);
        assert!(matches!(fit_alpha(&p, 3.0, 5.0, 1.0), Err(Error::Degenerate(_))));
        let mut q = model_profile(2.0, 1.0, 3.0, 20);
        q.values.iter_mut().skip(5).for_each(|v| *v = f64::NAN);
        assert!(matches!(fit_alpha(&q, 3.0, 5.0, 1.0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn noisy_recovery() {
        let clean = model_profile(2.0, 1.0, 3.0, 50);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let normal = rand_distr::Normal::new(0.0, 0.02).unwrap();
        let mut errors = Vec::new();
        for _ in 0..20 {
            let mut p = clean.clone();
            for v in &mut p.values {
                *v += rand_distr::Distribution::sample(&normal, &mut rng) * (1.0 - 2.0 / 2f64.sinh());
            }
            let fit = fit_alpha(&p, 3.0, 5.0, 1.0).unwrap();
            errors.push((fit.alpha / 2.0 - 1.0).abs());
        }
        errors.sort_by(f64::total_cmp);
        assert!(errors[10] < 0.2, "median error {}", errors[10]);
    }
}
