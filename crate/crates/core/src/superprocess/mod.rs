//! Branching-particle approximations of super-Brownian motion, free, killed
//! by hard obstacles, or killed at a spatial rate.

mod functionals;
mod io;
mod mass;
mod measure;
mod system;

pub use functionals::{
    domination_check, laplace_functional, laplace_of_masses, quadratic_variation_check, total_mass_moments,
    DominationReport, LaplaceProbe, MassMoments,
};
pub use io::{read_snapshots, write_snapshots, SnapshotRecord};
pub use mass::{birth_death_marginal, birth_death_population, sample_total_masses};
pub use measure::{Atom, InitialMeasure, MeasureState};
pub use system::{simulate, Genealogy, KillingMode, LineagePath, ParticleSystem, Run};
