//! Simulation and numerical verification for critical super-Brownian motion
//! among hard Poissonian obstacles.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod obstacle;
pub mod rng;
pub mod sausage;
pub mod solver;
pub mod stats;
pub mod stochastic;
pub mod superprocess;

pub use error::{Error, Result};
pub use rng::RandomSource;
