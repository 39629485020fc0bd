//! Poroelastography post-processing.
//!
//! Converts time series of axial and lateral strain maps acquired under creep
//! compression into fluid pressure, radial fluid velocity, fluid flow and
//! axial-strain time-constant maps, and estimates tumor transport parameters
//! (`alpha`, `L_p S / (k V)`, peak IFP ratio, `S/V`) by fitting the
//! spherical-tumor pressure profile
//!
//! ```text
//! p(R) = psi * (1 - sinh(alpha R / a) / ((R / a) sinh(alpha)))
//! ```
//!
//! The [`forward`] module synthesizes ground-truth sequences and solves the
//! underlying radial Helmholtz problem by finite differences, so every inverse
//! step can be checked against an independent route.

// `!(x > 0.0)` guards reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod derived;
pub mod domain;
pub mod error;
pub mod fields;
pub mod fitting;
pub mod forward;
pub mod io;
pub mod pipeline;

pub use domain::{
    aggregate_modulus, compression_modulus, is_missing, MapKind, MaterialParams, ScalarMap,
    StrainField, StrainSequence, TumorRegion, MISSING,
};
pub use error::{Error, Result};
