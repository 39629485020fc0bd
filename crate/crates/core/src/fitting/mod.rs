//! Damped nonlinear least squares and the two model fits built on it.

mod alpha;
mod lm;
mod tc;

pub use alpha::{fit_alpha, fit_alpha_points, fit_alpha_with, pressure_model_jacobian, AlphaFit, AlphaFitOptions};
pub use lm::{levenberg_marquardt, LmConfig, LmReport, Termination};
pub use tc::{fit_axial_tc, tc_map, TcFit, MIN_R_SQUARED};
