//! Branching Brownian particles with mass `1/N`, branching at rate `2N`
//! (death or twin with probability 1/2), optionally killed by hard
//! obstacles, by leaving a domain, or at a spatial rate `k_d c(x)`.
//!
//! Each lineage is simulated depth first from its own stream, derived from
//! its genealogical label; killing decisions use a second stream of the same
//! label. Two runs from the same source and initial measure therefore share
//! the branching tree and every particle motion, and killing can only prune
//! subtrees.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::obstacle::{bridge_crossing_probability, Domain, Environment};
use crate::rng::{mix64, RandomSource};
use crate::sausage::kd_constant;
use crate::stochastic::IntensityField;

use super::measure::{InitialMeasure, MeasureState};

const KILL_STREAM: u64 = 0x6b69_6c6c;
const ROOT_SALT: u64 = 0x726f_6f74;
/// Bridge corrections against a boundary are skipped beyond this many
/// standard deviations of clearance.
const BRIDGE_SDS: f64 = 6.0;

#[derive(Clone, Debug)]
pub enum KillingMode {
    Free,
    /// Removed at the first contact with `Gamma_eps` or exit from `domain`.
    Obstacles { env: Arc<Environment>, domain: Domain, bridge: bool },
    /// Removed at rate `k_d c(x)`, and on exit from `domain`.
    Rate { c: IntensityField, domain: Domain },
}

impl KillingMode {
    fn domain(&self) -> Option<&Domain> {
        match self {
            Self::Free => None,
            Self::Obstacles { domain, .. } | Self::Rate { domain, .. } => Some(domain),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Free => "free",
            Self::Obstacles { .. } => "obstacles",
            Self::Rate { .. } => "rate",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParticleSystem {
    /// `N`: particles per unit of initial mass; each carries mass `1/N`.
    pub particles_per_mass: f64,
    /// Per-particle branching rate, `2N` unless overridden.
    pub branch_rate: f64,
    /// Euler step `delta`.
    pub step: f64,
    pub mode: KillingMode,
    pub record_paths: bool,
}

impl ParticleSystem {
    pub fn new(particles_per_mass: f64, step: f64, mode: KillingMode) -> Result<Self> {
        if !(particles_per_mass > 0.0 && particles_per_mass.is_finite()) {
            return Err(invalid(format!("N must be positive, got {particles_per_mass}")));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(invalid(format!("step must be positive, got {step}")));
        }
        if let KillingMode::Rate { c, .. } = &mode {
            c.validate()?;
        }
        Ok(Self {
            particles_per_mass,
            branch_rate: 2.0 * particles_per_mass,
            step,
            mode,
            record_paths: false,
        })
    }

    pub fn with_branch_rate(mut self, rate: f64) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(invalid("branch rate must be finite and >= 0"));
        }
        self.branch_rate = rate;
        Ok(self)
    }

    pub fn recording_paths(mut self, on: bool) -> Self {
        self.record_paths = on;
        self
    }

    pub fn unit_mass(&self) -> f64 {
        1.0 / self.particles_per_mass
    }
}

/// Identifies the branching tree and motion noise of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Genealogy {
    pub seed: u64,
    pub stream_id: u64,
    pub particles_per_mass: f64,
    pub branch_rate: f64,
    pub step: f64,
    pub initial_particles: usize,
    pub snapshot_times: Vec<f64>,
}

/// Trajectory of one lineage between its birth and its death or branching.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineagePath {
    pub label: u64,
    pub parent: Option<u64>,
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub killed: bool,
}

#[derive(Clone, Debug)]
pub struct Run {
    pub genealogy: Genealogy,
    pub mode: &'static str,
    pub snapshots: Vec<MeasureState>,
    pub killed: usize,
    pub branchings: usize,
    pub paths: Option<Vec<LineagePath>>,
}

impl Run {
    pub fn snapshot_at(&self, t: f64) -> Result<&MeasureState> {
        self.snapshots
            .iter()
            .find(|s| (s.time - t).abs() <= 1e-12 * t.abs().max(1.0))
            .ok_or(Error::MissingSnapshot(t))
    }
}

fn child_label(label: u64, k: u64) -> u64 {
    mix64(label ^ (k + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(29))
}

struct Lineage {
    label: u64,
    parent: Option<u64>,
    birth: f64,
    pos: Vec<f64>,
}

enum Fate {
    Killed,
    Branched,
    Survived,
}

/// Runs one replicate of the particle system from `mu` up to `t_end`,
/// recording the measure at each of `times` (sorted, within `[0, t_end]`).
pub fn simulate(
    sys: &ParticleSystem,
    mu: &InitialMeasure,
    rng: &RandomSource,
    t_end: f64,
    times: &[f64],
) -> Result<Run> {
    mu.validate()?;
    let dim = mu.dim();
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(invalid("t_end must be finite and >= 0"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) || times.iter().any(|t| !(*t >= 0.0 && *t <= t_end)) {
        return Err(invalid("snapshot times must increase within [0, t_end]"));
    }
    let kd = kd_constant(dim.max(2))?;
    if let KillingMode::Obstacles { env, .. } = &sys.mode {
        if env.dim() != dim {
            return Err(invalid("environment and initial measure differ in dimension"));
        }
    }

    let unit = sys.unit_mass();
    let n0 = (sys.particles_per_mass * mu.total_mass() - 1e-9).ceil().max(0.0) as usize;
    let mut snaps: Vec<MeasureState> = times.iter().map(|&t| MeasureState::empty(t, dim, unit)).collect();
    let mut paths = sys.record_paths.then(Vec::new);
    let mut killed = 0usize;
    let mut branchings = 0usize;

    let mut init = rng.derive(ROOT_SALT);
    let mut stack: Vec<Lineage> = (0..n0)
        .rev()
        .map(|i| Lineage {
            label: mix64(ROOT_SALT ^ mix64(i as u64)),
            parent: None,
            birth: 0.0,
            pos: Vec::new(),
        })
        .collect();
    // positions are drawn in particle order
    for l in stack.iter_mut().rev() {
        l.pos = mu.sample(&mut init);
    }

    let mut next = vec![0.0; dim];
    while let Some(mut lin) = stack.pop() {
        let mut motion = rng.derive(lin.label);
        let mut kill = motion.derive(KILL_STREAM);
        let life = if sys.branch_rate > 0.0 { motion.exponential(sys.branch_rate) } else { f64::INFINITY };
        let end = (lin.birth + life).min(t_end);
        let branches = lin.birth + life < t_end;
        let mut rec = paths.as_ref().map(|_| (vec![lin.birth], lin.pos.clone()));
        let mut t = lin.birth;
        let mut snap = if lin.parent.is_none() {
            times.partition_point(|&s| s < t)
        } else {
            // a snapshot at the branching instant was taken by the parent
            times.partition_point(|&s| s <= t)
        };

        let mut fate = Fate::Survived;
        if lin.parent.is_none() && !initially_alive(&sys.mode, &lin.pos) {
            fate = Fate::Killed;
        } else {
            if snap < times.len() && times[snap] == t {
                record(&mut snaps[snap], &lin);
                snap += 1;
            }
            loop {
                let stop = if snap < times.len() { times[snap].min(end) } else { end };
                if t >= end {
                    break;
                }
                let h = if stop - t <= sys.step * (1.0 + 1e-12) { stop - t } else { sys.step };
                let sd = h.sqrt();
                for (n, x) in next.iter_mut().zip(&lin.pos) {
                    *n = x + sd * motion.normal();
                }
                let t_new = if h == stop - t { stop } else { t + h };
                let dead = killed_on_step(&sys.mode, kd, &lin.pos, &next, h, &mut kill)?;
                lin.pos.copy_from_slice(&next);
                t = t_new;
                if let Some((ts, xs)) = rec.as_mut() {
                    ts.push(t);
                    xs.extend_from_slice(&lin.pos);
                }
                if dead {
                    fate = Fate::Killed;
                    break;
                }
                if snap < times.len() && times[snap] == t {
                    record(&mut snaps[snap], &lin);
                    snap += 1;
                }
            }
            if !matches!(fate, Fate::Killed) && branches {
                fate = Fate::Branched;
            }
        }

        if let (Some(store), Some((ts, xs))) = (paths.as_mut(), rec) {
            store.push(LineagePath {
                label: lin.label,
                parent: lin.parent,
                times: ts,
                positions: xs,
                killed: matches!(fate, Fate::Killed),
            });
        }
        match fate {
            Fate::Killed => killed += 1,
            Fate::Survived => {}
            Fate::Branched => {
                branchings += 1;
                if motion.bernoulli(0.5) {
                    for k in [1, 0] {
                        stack.push(Lineage {
                            label: child_label(lin.label, k),
                            parent: Some(lin.label),
                            birth: end,
                            pos: lin.pos.clone(),
                        });
                    }
                }
            }
        }
    }

    Ok(Run {
        genealogy: Genealogy {
            seed: rng.seed(),
            stream_id: rng.stream_id(),
            particles_per_mass: sys.particles_per_mass,
            branch_rate: sys.branch_rate,
            step: sys.step,
            initial_particles: n0,
            snapshot_times: times.to_vec(),
        },
        mode: sys.mode.name(),
        snapshots: snaps,
        killed,
        branchings,
        paths,
    })
}

fn record(snap: &mut MeasureState, lin: &Lineage) {
    snap.positions.extend_from_slice(&lin.pos);
    snap.labels.push(lin.label);
}

fn initially_alive(mode: &KillingMode, x: &[f64]) -> bool {
    match mode {
        KillingMode::Free => true,
        KillingMode::Rate { domain, .. } => domain.contains(x),
        KillingMode::Obstacles { env, domain, .. } => domain.contains(x) && !env.covers(x),
    }
}

fn killed_on_step(
    mode: &KillingMode,
    kd: f64,
    a: &[f64],
    b: &[f64],
    h: f64,
    kill: &mut RandomSource,
) -> Result<bool> {
    let Some(domain) = mode.domain() else {
        return Ok(false);
    };
    if !domain.contains(b) {
        return Ok(true);
    }
    if domain.is_bounded() {
        let (a0, a1) = (domain.depth(a), domain.depth(b));
        if a0.min(a1) <= BRIDGE_SDS * h.sqrt() && kill.uniform() < bridge_crossing_probability(a0, a1, h) {
            return Ok(true);
        }
    }
    match mode {
        KillingMode::Free => Ok(false),
        KillingMode::Rate { c, .. } => {
            let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
            let rate = kd * c.eval(&mid);
            Ok(rate > 0.0 && kill.uniform() < -(-rate * h).exp_m1())
        }
        KillingMode::Obstacles { env, bridge, .. } => {
            let need = env.eps() + BRIDGE_SDS * h.sqrt();
            if env.gen_region().depth(b) < need || env.gen_region().depth(a) < need {
                return Err(Error::CoverageViolation(format!(
                    "particle at {b:?} is within {need} of the edge of the obstacle region"
                )));
            }
            let u = bridge.then(|| kill.uniform());
            Ok(env.segment_event(a, b, h, u).is_some())
        }
    }
}
