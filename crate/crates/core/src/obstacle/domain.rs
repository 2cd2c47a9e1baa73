use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{dist2, Aabb};

/// Open spatial domain `E` in which particles live.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    FullSpace,
    Ball { center: Vec<f64>, radius: f64 },
    Box { region: Aabb },
}

impl Domain {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || center.iter().any(|v| !v.is_finite()) {
            return Err(invalid("ball domain needs a finite center and positive radius"));
        }
        Ok(Self::Ball { center, radius })
    }

    pub fn open_box(region: Aabb) -> Self {
        Self::Box { region }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, Self::FullSpace)
    }

    /// Membership in the open set.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Self::FullSpace => true,
            Self::Ball { center, radius } => dist2(x, center) < radius * radius,
            Self::Box { region } => x
                .iter()
                .zip(region.lo.iter().zip(&region.hi))
                .all(|(v, (l, h))| *v > *l && *v < *h),
        }
    }

    /// Distance from `x` to the boundary, for `x` inside; zero outside.
    pub fn depth(&self, x: &[f64]) -> f64 {
        match self {
            Self::FullSpace => f64::INFINITY,
            Self::Ball { center, radius } => (radius - dist2(x, center).sqrt()).max(0.0),
            Self::Box { region } => region.depth(x),
        }
    }

    /// Bounding box of the closure, when bounded.
    pub fn bounding_box(&self) -> Option<Aabb> {
        match self {
            Self::FullSpace => None,
            Self::Ball { center, radius } => Aabb::cube(center, *radius).ok(),
            Self::Box { region } => Some(region.clone()),
        }
    }
}
