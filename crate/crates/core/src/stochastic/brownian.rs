use crate::error::{ensure_finite, invalid, Result};
use crate::geometry::{segment_dist2, Aabb};
use crate::rng::RandomSource;

/// A Brownian trajectory sampled on the uniform grid `t0 + i * step`.
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianPath {
    dim: usize,
    t0: f64,
    step: f64,
    positions: Vec<f64>,
}

/// Number of increments needed to cover `[t0, t1]` with step `step`.
/// A ratio within 1e-9 of an integer is treated as that integer.
pub fn n_steps(t0: f64, t1: f64, step: f64) -> usize {
    ((t1 - t0) / step - 1e-9).ceil().max(1.0) as usize
}

/// Checks the resolution rule `step <= (radius / 5)^2` used wherever a path
/// is tested against balls of the given radius.
pub fn validate_step_for_radius(step: f64, radius: f64) -> Result<()> {
    let max = (radius / 5.0).powi(2);
    if step > max * (1.0 + 1e-9) {
        return Err(invalid(format!(
            "time step {step:e} too coarse for radius {radius}: need <= {max:e}"
        )));
    }
    Ok(())
}

fn validate_start(x: &[f64], dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(invalid(format!("dimension must be >= 2, got {dim}")));
    }
    if x.len() != dim {
        return Err(invalid(format!("start point has {} coordinates, expected {dim}", x.len())));
    }
    for v in x {
        ensure_finite("start coordinate", *v)?;
    }
    Ok(())
}

impl BrownianPath {
    pub fn new(dim: usize, t0: f64, step: f64, positions: Vec<f64>) -> Result<Self> {
        ensure_finite("t0", t0)?;
        if !(step > 0.0 && step.is_finite()) {
            return Err(invalid(format!("step must be positive, got {step}")));
        }
        if dim == 0 || positions.is_empty() || positions.len() % dim != 0 {
            return Err(invalid("path needs at least one point of the right dimension"));
        }
        if positions.iter().any(|v| !v.is_finite()) {
            return Err(invalid("path positions must be finite"));
        }
        Ok(Self {
            dim,
            t0,
            step,
            positions,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Number of stored points (increments + 1).
    pub fn len(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn n_steps(&self) -> usize {
        self.len() - 1
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.step
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn start(&self) -> &[f64] {
        self.point(0)
    }

    pub fn end(&self) -> &[f64] {
        self.point(self.len() - 1)
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.positions.chunks_exact(self.dim)
    }

    pub fn bbox(&self) -> Aabb {
        Aabb::bounding(self.dim, &self.positions).expect("path is nonempty")
    }

    /// Points `i0..=i1` as a path starting at time `time(i0)`.
    pub fn window(&self, i0: usize, i1: usize) -> Result<Self> {
        if i0 > i1 || i1 >= self.len() {
            return Err(invalid(format!("window {i0}..={i1} outside path of {} points", self.len())));
        }
        Ok(Self {
            dim: self.dim,
            t0: self.time(i0),
            step: self.step,
            positions: self.positions[i0 * self.dim..(i1 + 1) * self.dim].to_vec(),
        })
    }

    /// Every `k`-th point, giving a coarser path of the same Brownian motion.
    pub fn subsample(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(invalid("subsample factor must be >= 1"));
        }
        let positions: Vec<f64> = self
            .points()
            .step_by(k)
            .flat_map(|p| p.iter().copied())
            .collect();
        Self::new(self.dim, self.t0, self.step * k as f64, positions)
    }

    /// Squared distance from `q` to the polyline, by linear scan.
    pub fn dist2_to(&self, q: &[f64]) -> f64 {
        if self.len() == 1 {
            return crate::geometry::dist2(self.start(), q);
        }
        (0..self.n_steps())
            .map(|i| segment_dist2(self.point(i), self.point(i + 1), q))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Generates the grid positions of a Brownian path one step at a time, so
/// very long paths never need to be stored.
#[derive(Clone, Debug)]
pub struct BrownianStepper {
    rng: RandomSource,
    current: Vec<f64>,
    sd: f64,
    remaining: usize,
}

impl BrownianStepper {
    pub fn new(rng: RandomSource, x: &[f64], t0: f64, t1: f64, step: f64) -> Result<Self> {
        validate_start(x, x.len())?;
        ensure_finite("t0", t0)?;
        ensure_finite("t1", t1)?;
        if !(step > 0.0 && step.is_finite()) {
            return Err(invalid(format!("step must be positive, got {step}")));
        }
        if t1 <= t0 {
            return Err(invalid(format!("need t1 > t0, got [{t0}, {t1}]")));
        }
        Ok(Self {
            rng,
            current: x.to_vec(),
            sd: step.sqrt(),
            remaining: n_steps(t0, t1, step),
        })
    }

    pub fn current(&self) -> &[f64] {
        &self.current
    }

    pub fn remaining(&self) -> usize {
        self.remaining
    }

    /// Advances one step; returns the new position or `None` when done.
    #[inline]
    pub fn advance(&mut self) -> Option<&[f64]> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        for v in self.current.iter_mut() {
            *v += self.sd * self.rng.normal();
        }
        Some(&self.current)
    }
}

/// Samples a Brownian path from `x` at time `t0` on the grid of step `step`
/// up to the first grid time `>= t1`.
pub fn sample_brownian_path(
    rng: &mut RandomSource,
    x: &[f64],
    t0: f64,
    t1: f64,
    step: f64,
    dim: usize,
) -> Result<BrownianPath> {
    validate_start(x, dim)?;
    let mut stepper = BrownianStepper::new(rng.clone(), x, t0, t1, step)?;
    let mut positions = Vec::with_capacity((stepper.remaining() + 1) * dim);
    positions.extend_from_slice(x);
    while let Some(p) = stepper.advance() {
        positions.extend_from_slice(p);
    }
    *rng = stepper.rng;
    BrownianPath::new(dim, t0, step, positions)
}
