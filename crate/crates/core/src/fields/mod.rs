//! Pixel-wise field computations on strain sequences and scalar maps.

mod filter;
mod gradient;
mod profile;
mod strain;

pub use filter::denoise_map;
pub use gradient::fluid_velocity_map;
pub use profile::{radial_profile, radial_profile_with, smooth_profile, ProfileMode, RadialProfile};
pub use strain::{
    flow_kernel, fluid_flow_map, fluid_pressure_map, fluid_pressure_map_with, normalize_map,
    volumetric_strain, SteadyState,
};
