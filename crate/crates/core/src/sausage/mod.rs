//! Monte Carlo estimators for Wiener sausage functionals.

mod cloud;
mod functionals;
mod hitting;
mod volume;

pub use cloud::{Coverage, PolylineMarker, SampleCloud, BRIDGE_REACH};
pub use functionals::{l2_error_h, l2_error_sweep, sausage_sweep, v_bias_estimate, v_bias_sweep, PathSausages, SausageSweep};
pub use hitting::{occupation_time_f, point_hitting_probability, spitzer_reference};
pub use volume::{
    integral_from_coverage, intersection_volume, kd_constant, path_time_integral, sausage_volume,
    sausage_weighted_integral, stream_sausages, SausageQuery, StreamedSausage,
};
