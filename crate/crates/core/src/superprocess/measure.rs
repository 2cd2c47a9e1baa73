use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::Aabb;
use crate::rng::RandomSource;
use crate::stochastic::IntensityField;

/// Atomic approximation of `X_t`: equal-mass particles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureState {
    pub time: f64,
    pub dim: usize,
    pub unit_mass: f64,
    /// Flattened particle positions.
    pub positions: Vec<f64>,
    /// Genealogical labels, one per particle.
    pub labels: Vec<u64>,
}

impl MeasureState {
    pub fn empty(time: f64, dim: usize, unit_mass: f64) -> Self {
        Self { time, dim, unit_mass, positions: Vec::new(), labels: Vec::new() }
    }

    pub fn count(&self) -> usize {
        self.labels.len()
    }

    /// `<X_t, 1>`
    pub fn total_mass(&self) -> f64 {
        self.count() as f64 * self.unit_mass
    }

    pub fn particles(&self) -> impl Iterator<Item = &[f64]> {
        self.positions.chunks_exact(self.dim)
    }

    /// `<X_t, f>`
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.unit_mass * self.particles().map(f).sum::<f64>()
    }

    pub fn pair(&self, f: &IntensityField) -> f64 {
        match f {
            IntensityField::Constant { nu } => nu * self.total_mass(),
            _ => self.integrate(|x| f.eval(x)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.len() != self.labels.len() * self.dim {
            return Err(invalid("positions and labels disagree"));
        }
        if !(self.unit_mass >= 0.0) || self.positions.iter().any(|v| !v.is_finite()) {
            return Err(invalid("measure has a non-finite position or negative mass"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub position: Vec<f64>,
    pub mass: f64,
}

/// Finite initial measure `mu`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialMeasure {
    Atoms { atoms: Vec<Atom> },
    /// `mass` spread uniformly over the box.
    Uniform { region: Aabb, mass: f64 },
}

impl InitialMeasure {
    pub fn dirac(position: Vec<f64>, mass: f64) -> Result<Self> {
        let m = Self::Atoms { atoms: vec![Atom { position, mass }] };
        m.validate()?;
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Atoms { atoms } => atoms.first().map_or(0, |a| a.position.len()),
            Self::Uniform { region, .. } => region.dim(),
        }
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            Self::Atoms { atoms } => atoms.iter().map(|a| a.mass).sum(),
            Self::Uniform { mass, .. } => *mass,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if dim < 1 {
            return Err(invalid("initial measure has no atoms"));
        }
        match self {
            Self::Atoms { atoms } => {
                for a in atoms {
                    if a.position.len() != dim || a.position.iter().any(|v| !v.is_finite()) {
                        return Err(invalid("atoms must share a dimension and be finite"));
                    }
                    if !(a.mass >= 0.0 && a.mass.is_finite()) {
                        return Err(invalid("atom masses must be finite and >= 0"));
                    }
                }
            }
            Self::Uniform { mass, .. } => {
                if !(*mass >= 0.0 && mass.is_finite()) {
                    return Err(invalid("mass must be finite and >= 0"));
                }
            }
        }
        Ok(())
    }

    /// A point drawn from `mu / |mu|`.
    pub fn sample(&self, rng: &mut RandomSource) -> Vec<f64> {
        match self {
            Self::Atoms { atoms } => {
                let total = self.total_mass();
                let mut u = rng.uniform() * total;
                for a in atoms {
                    if u < a.mass {
                        return a.position.clone();
                    }
                    u -= a.mass;
                }
                atoms.last().map(|a| a.position.clone()).unwrap_or_default()
            }
            Self::Uniform { region, .. } => {
                let mut x = vec![0.0; region.dim()];
                region.sample_into(rng, &mut x);
                x
            }
        }
    }

    /// `<mu, f>` for `f` given pointwise, when `mu` is atomic.
    pub fn integrate_atoms(&self, f: impl Fn(&[f64]) -> Result<f64>) -> Result<f64> {
        match self {
            Self::Atoms { atoms } => atoms.iter().map(|a| Ok(a.mass * f(&a.position)?)).sum(),
            Self::Uniform { .. } => Err(Error::Unsupported("pairing with a diffuse measure".into())),
        }
    }
}
