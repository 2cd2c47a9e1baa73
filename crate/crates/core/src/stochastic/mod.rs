//! Randomness-driven primitives: Brownian paths, transition kernels,
//! obstacle intensity fields and Poisson point sampling.

mod brownian;
mod intensity;
mod kernels;
mod poisson;

pub use brownian::{n_steps, sample_brownian_path, validate_step_for_radius, BrownianPath, BrownianStepper};
pub use intensity::{BoxedCell, IntensityField, RadialProfile};
pub use kernels::{gamma_half, green_constant, green_function, heat_kernel};
pub use poisson::sample_poisson_points;
