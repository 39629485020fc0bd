//! Ground truth: closed-form pressure profiles, a finite-difference solver for
//! the radial Helmholtz problem, creep-sequence synthesis and noise injection.

mod analytic;
mod noise;
mod oracle;
mod synth;

pub use analytic::{
    analytical_pressure, pressure_gradient, pressure_shape, pressure_shape_dalpha,
};
pub use noise::add_noise;
pub use oracle::{helmholtz_oracle, interpolate_profile, OracleSample};
pub use synth::{synthesize_creep_sequence, ProfileSource, SyntheticConfig, SyntheticTruth};
