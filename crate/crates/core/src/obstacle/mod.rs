//! Obstacle environments and hitting/exit times along discretized paths.

mod domain;
mod environment;
mod hitting;
mod index;
mod io;

pub use domain::Domain;
pub use environment::{generate_environment, sd_scale, Environment};
pub use hitting::{
    bridge_crossing_probability, bridge_margin, exit_time, first_obstacle_hit, first_obstacle_hit_linear, Bridge,
    SegmentEvent,
};
pub use index::CenterIndex;
pub use io::{read_environment, write_environment, EnvironmentHeader, ENV_FORMAT_VERSION, ENV_MAGIC};
