//! Levenberg–Marquardt with Marquardt's diagonal scaling.
//!
//! Minimizes `0.5 * |r(x)|^2`. Each iteration solves
//! `(J^T J + lambda diag(J^T J)) dx = -J^T r`; an improving step is accepted
//! and `lambda` divided by 10, otherwise `lambda` is multiplied by 10 and the
//! step retried. Accepted costs therefore never increase.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const MAX_DAMPING: f64 = 1e16;
const MIN_DAMPING: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmConfig {
    pub max_iter: usize,
    /// Stop when `|J^T r|_inf <= gtol`.
    pub gtol: f64,
    /// Stop when an accepted step lowers the cost by at most this fraction.
    pub ftol: f64,
    pub initial_damping: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            gtol: 1e-10,
            ftol: 1e-12,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Gradient,
    CostDecrease,
    ZeroResidual,
    MaxIterations,
    /// No damping up to the limit produced a usable step.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmReport {
    pub params: DVector<f64>,
    pub residual_rms: f64,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// Cost at the start and after every accepted step.
    pub cost_history: Vec<f64>,
}

fn cost_of(r: &DVector<f64>) -> f64 {
    0.5 * r.norm_squared()
}

pub fn levenberg_marquardt<R, J>(
    residual_fn: R,
    jacobian_fn: J,
    init: &DVector<f64>,
    config: &LmConfig,
) -> Result<LmReport>
where
    R: Fn(&DVector<f64>) -> DVector<f64>,
    J: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    let n = init.len();
    if n == 0 || init.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("initial parameters must be finite and non-empty".into()));
    }
    let mut x = init.clone();
    let mut r = residual_fn(&x);
    let m = r.len();
    if m < n {
        return Err(Error::Parameter(format!(
            "{m} residuals cannot determine {n} parameters"
        )));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("residual is not finite at the initial point".into()));
    }
    let mut cost = cost_of(&r);
    let mut history = vec![cost];
    let mut lambda = config.initial_damping;
    let mut iterations = 0;

    let finish = |x: DVector<f64>, cost: f64, iterations, termination, history| {
        let converged = matches!(
            termination,
            Termination::Gradient | Termination::CostDecrease | Termination::ZeroResidual
        );
        Ok(LmReport {
            params: x,
            residual_rms: (2.0 * cost / m as f64).sqrt(),
            cost,
            iterations,
            converged,
            termination,
            cost_history: history,
        })
    };

    loop {
        if cost == 0.0 {
            return finish(x, cost, iterations, Termination::ZeroResidual, history);
        }
        let jac = jacobian_fn(&x);
        let grad = jac.tr_mul(&r);
        if grad.amax() <= config.gtol {
            return finish(x, cost, iterations, Termination::Gradient, history);
        }
        if iterations >= config.max_iter {
            return finish(x, cost, iterations, Termination::MaxIterations, history);
        }
        iterations += 1;
        let jtj = jac.tr_mul(&jac);
        let diag_floor = jtj.diagonal().amax().max(1.0) * 1e-12;

        loop {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * jtj[(i, i)].max(diag_floor);
            }
            let step = a.cholesky().map(|ch| ch.solve(&(-&grad)));
            let Some(step) = step.filter(|s| s.iter().all(|v| v.is_finite())) else {
                lambda *= 10.0;
                if lambda > MAX_DAMPING {
                    return finish(x, cost, iterations, Termination::Stalled, history);
                }
                continue;
            };
            let x_new = &x + &step;
            let r_new = residual_fn(&x_new);
            let cost_new = if r_new.iter().all(|v| v.is_finite()) {
                cost_of(&r_new)
            } else {
                f64::INFINITY
            };
            if cost_new < cost {
                let relative = (cost - cost_new) / cost;
                x = x_new;
                r = r_new;
                cost = cost_new;
                history.push(cost);
                lambda = (lambda / 10.0).max(MIN_DAMPING);
                if relative <= config.ftol {
                    return finish(x, cost, iterations, Termination::CostDecrease, history);
                }
                break;
            }
            // At a minimum in floating point: even the model predicts no real gain.
            let predicted = -(grad.dot(&step) + 0.5 * step.dot(&(&jtj * &step)));
            if predicted <= config.ftol * cost {
                return finish(x, cost, iterations, Termination::CostDecrease, history);
            }
            lambda *= 10.0;
            if lambda > MAX_DAMPING {
                return finish(x, cost, iterations, Termination::Stalled, history);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rosenbrock_residual(p: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![10.0 * (p[1] - p[0] * p[0]), 1.0 - p[0]])
    }

    fn rosenbrock_jacobian(p: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[-20.0 * p[0], 10.0, -1.0, 0.0])
    }

    #[test]
    fn banana_valley_minimum() {
        // grid search oracle: the sum of squares vanishes only at (1, 1)
        let mut best = (f64::MAX, 0.0, 0.0);
        for i in 0..=400 {
            for j in 0..=400 {
                let (x, y) = (-2.0 + i as f64 * 0.01, -1.0 + j as f64 * 0.01);
                let c = rosenbrock_residual(&DVector::from_vec(vec![x, y])).norm_squared();
                if c < best.0 {
                    best = (c, x, y);
                }
            }
        }
        assert_relative_eq!(best.1, 1.0, epsilon = 1e-9);
        assert_relative_eq!(best.2, 1.0, epsilon = 1e-9);

        let init = DVector::from_vec(vec![-1.2, 1.0]);
        let rep = levenberg_marquardt(rosenbrock_residual, rosenbrock_jacobian, &init, &LmConfig::default()).unwrap();
        assert!(rep.converged);
        assert!((rep.params[0] - 1.0).abs() < 1e-6);
        assert!((rep.params[1] - 1.0).abs() < 1e-6);
        assert!(rep.cost_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn linear_model_closed_form() {
        let xs: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        // closed-form least squares slope: sum(xy) / sum(x^2)
        let slope = xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>() / xs.iter().map(|x| x * x).sum::<f64>();
        let res = |p: &DVector<f64>| DVector::from_iterator(10, xs.iter().zip(&ys).map(|(x, y)| p[0] * x - y));
        let jac = |_: &DVector<f64>| DMatrix::from_column_slice(10, 1, &xs);
        let init = DVector::from_vec(vec![0.0]);
        // damping 1e-3, 1e-4, 1e-5 leaves a relative error of about 1e-12 after three steps
        let three = LmConfig { max_iter: 3, ..LmConfig::default() };
        let rep = levenberg_marquardt(res, jac, &init, &three).unwrap();
        assert!(rep.iterations <= 3);
        assert_relative_eq!(rep.params[0], slope, max_relative = 1e-9);
        let full = levenberg_marquardt(res, jac, &init, &LmConfig::default()).unwrap();
        assert!(full.converged);
        assert_relative_eq!(full.params[0], 2.0, max_relative = 1e-12);
    }

    #[test]
    fn zero_residual_at_init() {
        let res = |p: &DVector<f64>| DVector::from_vec(vec![p[0] - 3.0, 2.0 * (p[0] - 3.0)]);
        let jac = |_: &DVector<f64>| DMatrix::from_column_slice(2, 1, &[1.0, 2.0]);
        let init = DVector::from_vec(vec![3.0]);
        let rep = levenberg_marquardt(res, jac, &init, &LmConfig::default()).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 0);
        assert_eq!(rep.params, init);
    }

    #[test]
    fn non_finite_initial_residual_rejected() {
        let res = |p: &DVector<f64>| DVector::from_vec(vec![p[0].ln(), 0.0]);
        let jac = |p: &DVector<f64>| DMatrix::from_column_slice(2, 1, &[1.0 / p[0], 0.0]);
        let out = levenberg_marquardt(res, jac, &DVector::from_vec(vec![-1.0]), &LmConfig::default());
        assert!(matches!(out, Err(Error::Domain(_))));
    }

    #[test]
    fn underdetermined_rejected() {
        let res = |p: &DVector<f64>| DVector::from_vec(vec![p[0] + p[1]]);
        let jac = |_: &DVector<f64>| DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let out = levenberg_marquardt(res, jac, &DVector::from_vec(vec![0.0, 0.0]), &LmConfig::default());
        assert!(matches!(out, Err(Error::Parameter(_))));
    }

    #[test]
    fn max_iterations_flagged() {
        let init = DVector::from_vec(vec![-1.2, 1.0]);
        let cfg = LmConfig { max_iter: 2, ..LmConfig::default() };
        let rep = levenberg_marquardt(rosenbrock_residual, rosenbrock_jacobian, &init, &cfg).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.termination, Termination::MaxIterations);
        assert!(rep.cost < rep.cost_history[0]);
    }
}
