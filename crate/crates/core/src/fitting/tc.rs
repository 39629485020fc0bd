//! Axial-strain time constants by variable projection.
//!
//! The model `A + B exp(-t / tau)` is linear in `(A, B)`. For a trial `tau`
//! the pair is solved in closed form, leaving a one-parameter problem in
//! `u = ln(tau)` whose Jacobian is the Kaufman approximation
//! `-P_perp (d Phi / du) c`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::lm::{levenberg_marquardt, LmConfig};
use crate::domain::{MapKind, ScalarMap, StrainSequence, TumorRegion, MISSING};
use crate::error::{Error, Result};

/// Fits explaining less of the variance than this are treated as noise.
pub const MIN_R_SQUARED: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TcFit {
    pub tau_s: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub residual_rms: f64,
    pub r_squared: f64,
    pub converged: bool,
}

impl TcFit {
    /// Converged with `tau` inside the sampled time scales and a fit that
    /// explains at least [`MIN_R_SQUARED`] of the variance.
    pub fn is_reliable(&self) -> bool {
        self.converged && self.r_squared >= MIN_R_SQUARED
    }
}

struct Projection {
    offset: f64,
    amplitude: f64,
    residual: DVector<f64>,
}

/// Closed-form `(A, B)` for basis `[1, phi]`.
fn project(phi: &[f64], y: &[f64]) -> Projection {
    let n = y.len() as f64;
    let phi_mean = phi.iter().sum::<f64>() / n;
    let y_mean = y.iter().sum::<f64>() / n;
    let (sxy, sxx) = phi
        .iter()
        .zip(y)
        .fold((0.0, 0.0), |(sxy, sxx), (p, v)| {
            let dp = p - phi_mean;
            (sxy + dp * (v - y_mean), sxx + dp * dp)
        });
    let amplitude = if sxx > 1e-300 { sxy / sxx } else { 0.0 };
    let offset = y_mean - amplitude * phi_mean;
    let residual = DVector::from_iterator(
        y.len(),
        phi.iter().zip(y).map(|(p, v)| offset + amplitude * p - v),
    );
    Projection {
        offset,
        amplitude,
        residual,
    }
}

/// Fits `strain(t) = offset + amplitude * exp(-t / tau)`.
pub fn fit_axial_tc(times: &[f64], strains: &[f64], init_tau: f64) -> Result<TcFit> {
    let n = times.len();
    if n != strains.len() {
        return Err(Error::Shape(format!("{n} times but {} strains", strains.len())));
    }
    if n < 4 {
        return Err(Error::InsufficientData(format!("need at least 4 samples, got {n}")));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("times must be strictly increasing".into()));
    }
    if strains.iter().chain(times).any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite sample".into()));
    }
    if !(init_tau.is_finite() && init_tau > 0.0) {
        return Err(Error::Domain(format!("initial tau must be positive, got {init_tau}")));
    }
    let scale = strains.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let lo = strains.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = strains.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 64.0 * f64::EPSILON * scale {
        return Err(Error::Degenerate("constant series, time constant unidentifiable".into()));
    }

    let t0 = times[0];
    let span = times[n - 1] - t0;
    let min_dt = times
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let basis = |tau: f64| -> Vec<f64> { times.iter().map(|t| (-(t - t0) / tau).exp()).collect() };
    let cost = |tau: f64| project(&basis(tau), strains).residual.norm_squared();

    // coarse log-spaced scan guards against a poor initial tau
    let (tau_lo, tau_hi) = (0.1 * min_dt, 100.0 * span);
    let steps = 48;
    let mut start = init_tau;
    let mut best = cost(init_tau);
    for k in 0..=steps {
        let tau = tau_lo * (tau_hi / tau_lo).powf(k as f64 / steps as f64);
        let c = cost(tau);
        if c < best {
            best = c;
            start = tau;
        }
    }

    let residual = |u: &DVector<f64>| project(&basis(u[0].exp()), strains).residual;
    let jacobian = |u: &DVector<f64>| {
        let tau = u[0].exp();
        let phi = basis(tau);
        let amplitude = project(&phi, strains).amplitude;
        let dphi: Vec<f64> = phi
            .iter()
            .zip(times)
            .map(|(p, t)| amplitude * p * (t - t0) / tau)
            .collect();
        // the residual is (A + B phi) - y, so its derivative is P_perp(B dphi/du)
        let proj = project(&phi, &dphi);
        DMatrix::from_iterator(n, 1, proj.residual.iter().map(|v| -v))
    };
    let rep = levenberg_marquardt(
        residual,
        jacobian,
        &DVector::from_vec(vec![start.ln()]),
        &LmConfig::default(),
    )?;
    let tau = rep.params[0].exp();
    let fit = project(&basis(tau), strains);
    let y_mean = strains.iter().sum::<f64>() / n as f64;
    let sst: f64 = strains.iter().map(|v| (v - y_mean).powi(2)).sum();
    let ssr = fit.residual.norm_squared();
    let in_range = tau >= min_dt && tau <= 10.0 * span;
    Ok(TcFit {
        tau_s: tau,
        amplitude: fit.amplitude * (t0 / tau).exp(),
        offset: fit.offset,
        residual_rms: (ssr / n as f64).sqrt(),
        r_squared: if sst > 0.0 { 1.0 - ssr / sst } else { 0.0 },
        converged: rep.converged && in_range,
    })
}

/// Per-pixel time constant of the axial strain inside the region; pixels
/// without a reliable fit are missing.
pub fn tc_map(seq: &StrainSequence, region: &TumorRegion, init_tau: f64) -> Result<ScalarMap> {
    if seq.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "time-constant fitting needs at least 4 frames, got {}",
            seq.len()
        )));
    }
    if !region.matches(seq.rows(), seq.cols(), seq.pixel_spacing_mm()) {
        return Err(Error::Shape("region and sequence grids differ".into()));
    }
    let times = seq.timestamps();
    let values: Vec<f64> = (0..seq.rows() * seq.cols())
        .into_par_iter()
        .map(|i| {
            if !region.mask()[i] {
                return MISSING;
            }
            let series: Vec<f64> = seq.axial().iter().map(|f| f.values()[i]).collect();
            match fit_axial_tc(&times, &series, init_tau) {
                Ok(fit) if fit.is_reliable() => fit.tau_s,
                _ => MISSING,
            }
        })
        .collect();
    ScalarMap::new(
        MapKind::TimeConstantS,
        seq.rows(),
        seq.cols(),
        seq.pixel_spacing_mm(),
        values,
        region.mask().to_vec(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::StrainField;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn creep(tau: f64) -> (Vec<f64>, Vec<f64>) {
        let t: Vec<f64> = (0..=600).map(|k| k as f64 * 0.1).collect();
        let y = t.iter().map(|t| 0.010 - 0.004 * (-t / tau).exp()).collect();
        (t, y)
    }

    #[test]
    fn noiseless_recovery() {
        let (t, y) = creep(30.0);
        for init in [1.0, 30.0, 500.0] {
            let fit = fit_axial_tc(&t, &y, init).unwrap();
            assert!(fit.converged);
            assert_relative_eq!(fit.tau_s, 30.0, max_relative = 1e-3);
            assert_relative_eq!(fit.offset, 0.010, max_relative = 1e-6);
            assert_relative_eq!(fit.amplitude, -0.004, max_relative = 1e-6);
        }
    }

    #[test]
    fn shifted_time_origin() {
        let t: Vec<f64> = (0..200).map(|k| 5.0 + k as f64 * 0.25).collect();
        let y: Vec<f64> = t.iter().map(|t| 0.2 + 0.3 * (-t / 12.0).exp()).collect();
        let fit = fit_axial_tc(&t, &y, 3.0).unwrap();
        assert_relative_eq!(fit.tau_s, 12.0, max_relative = 1e-6);
        assert_relative_eq!(fit.amplitude, 0.3, max_relative = 1e-6);
    }

    #[test]
    fn constant_series_rejected() {
        let t: Vec<f64> = (0..10).map(|k| k as f64).collect();
        assert!(matches!(fit_axial_tc(&t, &[0.01; 10], 5.0), Err(Error::Degenerate(_))));
        assert!(matches!(fit_axial_tc(&t[..3], &[0.0, 1.0, 2.0], 5.0), Err(Error::InsufficientData(_))));
        assert!(fit_axial_tc(&[0.0, 2.0, 1.0, 3.0], &[0.0, 1.0, 2.0, 3.0], 1.0).is_err());
    }

    #[test]
    fn noise_only_series_is_unreliable() {
        let t: Vec<f64> = (0..=600).map(|k| k as f64 * 0.1).collect();
        let normal = Normal::new(0.0, 1e-4).unwrap();
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<f64> = t.iter().map(|_| 0.01 + normal.sample(&mut rng)).collect();
            let fit = fit_axial_tc(&t, &y, 10.0).unwrap();
            assert!(!fit.is_reliable(), "seed {seed}: {fit:?}");
        }
    }

    #[test]
    fn noisy_median_within_five_percent() {
        let (t, clean) = creep(30.0);
        let normal = Normal::new(0.0, 1e-4).unwrap();
        let mut errors: Vec<f64> = (0..100)
            .map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let y: Vec<f64> = clean.iter().map(|v| v + normal.sample(&mut rng)).collect();
                (fit_axial_tc(&t, &y, 10.0).unwrap().tau_s / 30.0 - 1.0).abs()
            })
            .collect();
        errors.sort_by(f64::total_cmp);
        assert!(errors[50] < 0.05, "median {}", errors[50]);
    }

    #[test]
    fn agrees_with_joint_three_parameter_fit() {
        let (t, y) = creep(30.0);
        let vp = fit_axial_tc(&t, &y, 10.0).unwrap();
        let n = t.len();
        let res = |p: &DVector<f64>| {
            DVector::from_iterator(n, t.iter().zip(&y).map(|(t, v)| p[0] + p[1] * (-t / p[2].exp()).exp() - v))
        };
        let jac = |p: &DVector<f64>| {
            let tau = p[2].exp();
            let mut j = DMatrix::zeros(n, 3);
            for (i, t) in t.iter().enumerate() {
                let e = (-t / tau).exp();
                j[(i, 0)] = 1.0;
                j[(i, 1)] = e;
                j[(i, 2)] = p[1] * e * t / tau;
            }
            j
        };
        let joint = levenberg_marquardt(res, jac, &DVector::from_vec(vec![0.0, -0.001, 20f64.ln()]), &LmConfig::default())
            .unwrap();
        assert_relative_eq!(joint.params[2].exp(), vp.tau_s, max_relative = 1e-6);
    }

    fn sequence(tau_at: impl Fn(usize, usize) -> f64, rows: usize, cols: usize) -> StrainSequence {
        let times: Vec<f64> = (0..=300).map(|k| k as f64 * 0.5).collect();
        let frame = |t: f64, f: &dyn Fn(usize, usize) -> f64| StrainField::from_fn(rows, cols, 0.2, t, f).unwrap();
        let axial = times
            .iter()
            .map(|&t| frame(t, &|r, c| -0.01 + 0.004 * (-t / tau_at(r, c)).exp()))
            .collect();
        let lateral = times.iter().map(|&t| frame(t, &|_, _| 0.0)).collect();
        StrainSequence::new(axial, lateral).unwrap()
    }

    #[test]
    fn uniform_map() {
        let seq = sequence(|_, _| 30.0, 12, 12);
        let region = TumorRegion::disc(12, 12, 0.2, 6.0, 6.0, 1.0).unwrap();
        let map = tc_map(&seq, &region, 10.0).unwrap();
        for (i, v) in map.values().iter().enumerate() {
            if region.mask()[i] {
                assert_relative_eq!(*v, 30.0, max_relative = 1e-3);
            } else {
                assert!(v.is_nan());
            }
        }
    }

    #[test]
    fn two_region_map() {
        let (rows, cols) = (24, 24);
        let inner = TumorRegion::disc(rows, cols, 0.2, 12.0, 12.0, 1.2).unwrap();
        let all = TumorRegion::disc(rows, cols, 0.2, 12.0, 12.0, 2.2).unwrap();
        let seq = sequence(|r, c| if inner.contains(r, c) { 30.0 } else { 90.0 }, rows, cols);
        let map = tc_map(&seq, &all, 10.0).unwrap();
        let (mut s_in, mut n_in, mut s_out, mut n_out) = (0.0, 0, 0.0, 0);
        for r in 0..rows {
            for c in 0..cols {
                if all.contains(r, c) {
                    if inner.contains(r, c) {
                        s_in += map.get(r, c);
                        n_in += 1;
                    } else {
                        s_out += map.get(r, c);
                        n_out += 1;
                    }
                }
            }
        }
        assert_relative_eq!(s_in / n_in as f64, 30.0, max_relative = 0.02);
        assert_relative_eq!(s_out / n_out as f64, 90.0, max_relative = 0.02);
    }

    #[test]
    fn noise_pixel_becomes_missing() {
        let mut seq = sequence(|_, _| 30.0, 6, 6);
        // overwrite pixel (3, 3) with white noise around a plateau
        let normal = Normal::new(0.0, 1e-4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let axial = seq
            .axial()
            .iter()
            .map(|f| {
                let mut v = f.values().to_vec();
                v[3 * 6 + 3] = -0.01 + normal.sample(&mut rng);
                StrainField::new(6, 6, 0.2, f.timestamp_s(), v).unwrap()
            })
            .collect();
        seq = StrainSequence::new(axial, seq.lateral().to_vec()).unwrap();
        let region = TumorRegion::disc(6, 6, 0.2, 3.0, 3.0, 0.5).unwrap();
        let map = tc_map(&seq, &region, 10.0).unwrap();
        assert!(map.get(3, 3).is_nan());
        assert_relative_eq!(map.get(3, 2), 30.0, max_relative = 1e-3);
    }
}
