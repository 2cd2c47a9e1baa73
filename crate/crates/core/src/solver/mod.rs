//! Finite-difference solution of the log-Laplace equations on a box.

mod checks;
mod grid;
mod heat;
mod solve;

pub use checks::{feynman_kac_equivalence_check, feynman_kac_residual, laplace_from_w, FeynmanKacForm};
pub use grid::{l1_distance, GridFunction, GridHeader, GRID_MAGIC};
pub use heat::{heat_step, lattice_kernel};
pub use solve::{
    constant_rate_closed_form, reaction_flow, solve, solve_with_diagnostics, time_grid, SolveDiagnostics, SolveMode,
    SolveSpec, Solution,
};
