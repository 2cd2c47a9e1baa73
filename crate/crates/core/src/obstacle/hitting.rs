//! Entrance times into `Gamma_eps` and exit times from a domain.
//!
//! A grid segment `[x_i, x_{i+1}]` registers a hit when the chord comes
//! within `eps` of a center (entry time from the line-sphere intersection).
//! Otherwise, with the bridge correction on, the Brownian bridge between the
//! endpoints may still have touched the nearest ball: its crossing
//! probability is approximated by the half-space formula
//! `exp(-2 a0 a1 / dt)` with `a0, a1` the endpoint clearances, and a keyed
//! uniform decides the Bernoulli outcome.

use crate::error::{invalid, Result};
use crate::geometry::{dist2, segment_ball_entry};
use crate::obstacle::{Domain, Environment};
use crate::rng::RandomSource;
use crate::stochastic::BrownianPath;

/// Whether sub-step crossings are sampled, and from which stream.
#[derive(Clone, Copy, Debug)]
pub enum Bridge<'a> {
    Off,
    /// Segment `i` uses `keyed_uniform(i)` of this source.
    Sampled(&'a RandomSource),
}

/// Probability that a Brownian bridge of duration `dt` whose endpoints sit
/// at distances `a0`, `a1` from a hyperplane crosses it.
#[inline]
pub fn bridge_crossing_probability(a0: f64, a1: f64, dt: f64) -> f64 {
    if a0 <= 0.0 || a1 <= 0.0 {
        1.0
    } else {
        (-2.0 * a0 * a1 / dt).exp()
    }
}

/// First contact with an obstacle within one grid segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentEvent {
    /// Position of the contact within the step, in [0, 1].
    pub fraction: f64,
    /// True when the contact came from the bridge correction.
    pub bridged: bool,
}

/// Reach beyond `eps` within which bridge crossings are considered.
#[inline]
pub fn bridge_margin(dt: f64) -> f64 {
    6.0 * dt.sqrt()
}

struct SegmentScan<'a> {
    a: &'a [f64],
    b: &'a [f64],
    eps: f64,
    dt: f64,
    margin: f64,
    entry: Option<f64>,
    best_p: f64,
    best_fraction: f64,
}

impl<'a> SegmentScan<'a> {
    fn new(a: &'a [f64], b: &'a [f64], eps: f64, dt: f64, bridging: bool) -> Self {
        Self {
            a,
            b,
            eps,
            dt,
            margin: if bridging { bridge_margin(dt) } else { 0.0 },
            entry: None,
            best_p: 0.0,
            best_fraction: 0.0,
        }
    }

    #[inline]
    fn consider(&mut self, c: &[f64]) {
        if let Some(s) = segment_ball_entry(self.a, self.b, c, self.eps) {
            self.entry = Some(self.entry.map_or(s, |e: f64| e.min(s)));
            return;
        }
        if self.margin == 0.0 || self.entry.is_some() {
            return;
        }
        let a0 = dist2(self.a, c).sqrt() - self.eps;
        let a1 = dist2(self.b, c).sqrt() - self.eps;
        if a0.min(a1) > self.margin {
            return;
        }
        let p = bridge_crossing_probability(a0, a1, self.dt);
        if p > self.best_p {
            self.best_p = p;
            self.best_fraction = a0 / (a0 + a1);
        }
    }

    fn finish(self, u: Option<f64>) -> Option<SegmentEvent> {
        if let Some(s) = self.entry {
            return Some(SegmentEvent {
                fraction: s,
                bridged: false,
            });
        }
        match u {
            Some(u) if u < self.best_p => Some(SegmentEvent {
                fraction: self.best_fraction,
                bridged: true,
            }),
            _ => None,
        }
    }
}

impl Environment {
    /// Contact with `Gamma_eps` during a step from `a` to `b` of duration
    /// `dt`. `u` is the uniform for the bridge draw; `None` disables it.
    pub fn segment_event(&self, a: &[f64], b: &[f64], dt: f64, u: Option<f64>) -> Option<SegmentEvent> {
        let mut scan = SegmentScan::new(a, b, self.eps(), dt, u.is_some());
        let r = self.eps() + scan.margin;
        let mut lo = [0.0; 8];
        let mut hi = [0.0; 8];
        let d = a.len();
        for k in 0..d {
            lo[k] = a[k].min(b[k]) - r;
            hi[k] = a[k].max(b[k]) + r;
        }
        let centers = self.centers();
        self.index().visit_box(&lo[..d], &hi[..d], |i| {
            scan.consider(centers.get(i as usize));
            true
        });
        scan.finish(u)
    }

    /// [`segment_event`](Self::segment_event) by scanning every center.
    pub fn segment_event_linear(
        &self,
        a: &[f64],
        b: &[f64],
        dt: f64,
        u: Option<f64>,
    ) -> Option<SegmentEvent> {
        let mut scan = SegmentScan::new(a, b, self.eps(), dt, u.is_some());
        for c in self.centers().iter() {
            scan.consider(c);
        }
        scan.finish(u)
    }
}

fn hit_time(
    path: &BrownianPath,
    env: &Environment,
    bridge: Bridge<'_>,
    covers: impl Fn(&[f64]) -> bool,
    event: impl Fn(&[f64], &[f64], f64, Option<f64>) -> Option<SegmentEvent>,
) -> Result<Option<f64>> {
    if path.dim() != env.dim() {
        return Err(invalid("path and environment differ in dimension"));
    }
    let dt = path.step();
    env.check_coverage(&path.bbox(), env.eps() + bridge_margin(dt))?;
    if covers(path.start()) {
        return Ok(Some(path.t0()));
    }
    for i in 0..path.n_steps() {
        let u = match bridge {
            Bridge::Off => None,
            Bridge::Sampled(rng) => Some(rng.keyed_uniform(i as u64)),
        };
        if let Some(ev) = event(path.point(i), path.point(i + 1), dt, u) {
            return Ok(Some(path.time(i) + ev.fraction * dt));
        }
    }
    Ok(None)
}

/// `T_eps`: first time the path touches `Gamma_eps`, `None` if it never does.
pub fn first_obstacle_hit(path: &BrownianPath, env: &Environment, bridge: Bridge<'_>) -> Result<Option<f64>> {
    hit_time(
        path,
        env,
        bridge,
        |q| env.covers(q),
        |a, b, dt, u| env.segment_event(a, b, dt, u),
    )
}

/// Reference implementation of [`first_obstacle_hit`] without the spatial index.
pub fn first_obstacle_hit_linear(
    path: &BrownianPath,
    env: &Environment,
    bridge: Bridge<'_>,
) -> Result<Option<f64>> {
    hit_time(
        path,
        env,
        bridge,
        |q| env.covers_linear(q),
        |a, b, dt, u| env.segment_event_linear(a, b, dt, u),
    )
}

/// `T^E`: first grid time at which the path is outside the open domain.
pub fn exit_time(path: &BrownianPath, domain: &Domain) -> Option<f64> {
    if !domain.is_bounded() {
        return None;
    }
    (0..path.len())
        .find(|&i| !domain.contains(path.point(i)))
        .map(|i| path.time(i))
}
