use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{dist2, Aabb};

/// Shape of a radially symmetric intensity `c(x) = g(|x - center|)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum RadialProfile {
    /// `amplitude * exp(-r^2 / (2 width^2))`
    Gaussian { amplitude: f64, width: f64 },
    /// `value` on the closed ball of the given radius, zero outside.
    Ball { value: f64, radius: f64 },
    /// `amplitude * (1 - r / radius)_+`
    Tent { amplitude: f64, radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxedCell {
    pub region: Aabb,
    pub value: f64,
}

/// Bounded nonnegative obstacle density `c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntensityField {
    Constant { nu: f64 },
    Radial { center: Vec<f64>, profile: RadialProfile },
    /// First cell containing `x` wins; `background` elsewhere.
    Boxed { cells: Vec<BoxedCell>, background: f64 },
}

fn check_level(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite and >= 0, got {v}")))
    }
}

impl IntensityField {
    pub fn constant(nu: f64) -> Result<Self> {
        let f = Self::Constant { nu };
        f.validate()?;
        Ok(f)
    }

    pub fn zero() -> Self {
        Self::Constant { nu: 0.0 }
    }

    pub fn gaussian_bump(center: Vec<f64>, amplitude: f64, width: f64) -> Result<Self> {
        let f = Self::Radial {
            center,
            profile: RadialProfile::Gaussian { amplitude, width },
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Constant { nu } => check_level("nu", *nu),
            Self::Radial { center, profile } => {
                if center.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("radial center must be finite"));
                }
                match profile {
                    RadialProfile::Gaussian { amplitude, width } => {
                        check_level("amplitude", *amplitude)?;
                        if !(*width > 0.0 && width.is_finite()) {
                            return Err(invalid("gaussian width must be positive"));
                        }
                        Ok(())
                    }
                    RadialProfile::Ball { value, radius } => {
                        check_level("value", *value)?;
                        check_level("radius", *radius)
                    }
                    RadialProfile::Tent { amplitude, radius } => {
                        check_level("amplitude", *amplitude)?;
                        if !(*radius > 0.0 && radius.is_finite()) {
                            return Err(invalid("tent radius must be positive"));
                        }
                        Ok(())
                    }
                }
            }
            Self::Boxed { cells, background } => {
                check_level("background", *background)?;
                for c in cells {
                    check_level("cell value", c.value)?;
                }
                Ok(())
            }
        }
    }

    /// Supremum norm of `c`.
    pub fn bound(&self) -> f64 {
        match self {
            Self::Constant { nu } => *nu,
            Self::Radial { profile, .. } => match profile {
                RadialProfile::Gaussian { amplitude, .. } => *amplitude,
                RadialProfile::Ball { value, .. } => *value,
                RadialProfile::Tent { amplitude, .. } => *amplitude,
            },
            Self::Boxed { cells, background } => {
                cells.iter().map(|c| c.value).fold(*background, f64::max)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.bound() == 0.0
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::Constant { nu } => *nu,
            Self::Radial { center, profile } => {
                let r2 = dist2(x, center);
                match profile {
                    RadialProfile::Gaussian { amplitude, width } => {
                        amplitude * (-r2 / (2.0 * width * width)).exp()
                    }
                    RadialProfile::Ball { value, radius } => {
                        if r2 <= radius * radius {
                            *value
                        } else {
                            0.0
                        }
                    }
                    RadialProfile::Tent { amplitude, radius } => {
                        amplitude * (1.0 - r2.sqrt() / radius).max(0.0)
                    }
                }
            }
            Self::Boxed { cells, background } => cells
                .iter()
                .find(|c| c.region.contains(x))
                .map_or(*background, |c| c.value),
        }
    }

    /// True for the continuous shapes (constants, Gaussians, tents).
    pub fn is_continuous(&self) -> bool {
        match self {
            Self::Constant { .. } => true,
            Self::Radial { profile, .. } => match profile {
                RadialProfile::Gaussian { .. } | RadialProfile::Tent { .. } => true,
                RadialProfile::Ball { value, .. } => *value == 0.0,
            },
            Self::Boxed { cells, background } => cells.iter().all(|c| c.value == *background),
        }
    }

    /// `(1/2) Laplacian c` at `x`, for the smooth shapes.
    pub fn half_laplacian(&self, x: &[f64]) -> Result<f64> {
        match self {
            Self::Constant { .. } => Ok(0.0),
            Self::Radial {
                center,
                profile: RadialProfile::Gaussian { width, .. },
            } => {
                let w2 = width * width;
                let r2 = dist2(x, center);
                Ok(0.5 * self.eval(x) * (r2 / (w2 * w2) - x.len() as f64 / w2))
            }
            _ => Err(crate::Error::Unsupported("Laplacian of a non-smooth field".into())),
        }
    }
}
