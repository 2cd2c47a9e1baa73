use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geometry::Aabb;
use crate::stochastic::IntensityField;
use crate::superprocess::InitialMeasure;

use super::checks::Check;
use super::subsequence::{subsequence, summable};

pub const SCHEMA_VERSION: u32 = 1;
const MERGED: [&str; 3] = ["solver", "environments", "thresholds"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    Ksw,
    Spitzer,
    AnnealedSurvival,
    L2Rate,
    FellerMoments,
    LaplaceMatch,
    QuenchedSweep,
    SolveW,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 8] = [
        Self::Ksw,
        Self::Spitzer,
        Self::AnnealedSurvival,
        Self::L2Rate,
        Self::FellerMoments,
        Self::LaplaceMatch,
        Self::QuenchedSweep,
        Self::SolveW,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ksw => "ksw",
            Self::Spitzer => "spitzer",
            Self::AnnealedSurvival => "annealed-survival",
            Self::L2Rate => "l2-rate",
            Self::FellerMoments => "feller-moments",
            Self::LaplaceMatch => "laplace-match",
            Self::QuenchedSweep => "quenched-sweep",
            Self::SolveW => "solve-w",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|e| e.as_str() == s).ok_or_else(|| Error::Config {
            field: "experiment".into(),
            message: format!(
                "unknown experiment `{s}`; expected one of {}",
                Self::ALL.map(|e| e.as_str()).join(", ")
            ),
        })
    }
}

/// `eps_n = n^{-alpha}` (d >= 3) or `exp(-n^alpha)` (d = 2) for the listed `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsequenceSpec {
    pub alpha: f64,
    pub n: Vec<u32>,
}

/// How total masses are drawn for the Feller checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassSampler {
    /// The particle count is a linear birth-death process; sample its law.
    Exact,
    /// Simulate the spatial particle system.
    Particles,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridFormat {
    Csv,
    Binary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    pub dt: f64,
    pub spacing: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub format: GridFormat,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { dt: 0.01, spacing: 0.25, picard_tol: 1e-9, picard_max: 50, format: GridFormat::Csv }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentStore {
    pub dir: PathBuf,
    pub seeds: Vec<u64>,
    /// Fail instead of generating when a file is missing.
    #[serde(default)]
    pub require_existing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentId,
    pub dim: usize,
    /// Radius, or radii for sweeps.
    pub eps: Vec<f64>,
    pub subsequence: Option<SubsequenceSpec>,
    pub c: IntensityField,
    /// Bounded domain `B` for the solver and killed particle systems.
    pub domain: Option<Aabb>,
    /// `N` for the exact mass sampler.
    pub particles_per_mass: f64,
    /// `N` for spatial particle simulations.
    pub spatial_particles_per_mass: f64,
    /// Euler step; derived from the radius when absent.
    pub step: Option<f64>,
    pub replicates: usize,
    /// Hit-or-miss samples per path at the smallest radius.
    pub samples: usize,
    pub horizon: f64,
    pub lambda: f64,
    /// Initial mass `y`.
    pub mass: f64,
    /// Initial measure; a Dirac mass `mass` at the origin when absent.
    pub initial: Option<InitialMeasure>,
    /// Target point for hitting probabilities.
    pub point: Option<Vec<f64>>,
    pub sampler: MassSampler,
    pub solver: SolverSettings,
    pub environments: Option<EnvironmentStore>,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
    pub thresholds: BTreeMap<String, Check>,
}

fn cfg_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config { field: field.into(), message: message.into() }
}

impl ExperimentConfig {
    /// The acceptance-scale configuration of each experiment.
    pub fn defaults(id: ExperimentId) -> Self {
        use Check::*;
        let mut cfg = Self {
            schema_version: SCHEMA_VERSION,
            experiment: id,
            dim: 3,
            eps: vec![0.02],
            subsequence: None,
            c: IntensityField::Constant { nu: 1.0 },
            domain: None,
            particles_per_mass: 1e4,
            spatial_particles_per_mass: 100.0,
            step: None,
            replicates: 200,
            samples: 2_000_000,
            horizon: 1.0,
            lambda: 1.0,
            mass: 1.0,
            initial: None,
            point: None,
            sampler: MassSampler::Exact,
            solver: SolverSettings::default(),
            environments: None,
            seed: 20240611,
            output: None,
            threads: None,
            thresholds: BTreeMap::new(),
        };
        let t = &mut cfg.thresholds;
        match id {
            ExperimentId::Ksw => {
                t.insert("ksw".into(), Relative { tol: 0.05 });
                t.insert("ksw_d2".into(), Relative { tol: 0.3 });
                t.insert("ksw_trend".into(), AtMost { max: 0.0 });
            }
            ExperimentId::Spitzer => {
                cfg.dim = 2;
                cfg.eps = vec![1e-3];
                cfg.replicates = 20_000;
                cfg.point = Some(vec![0.5, 0.0]);
                t.insert("spitzer".into(), RelativeOrSigmas { tol: 0.25, k: 3.0 });
                t.insert("hit_ever".into(), Sigmas { k: 3.0 });
                t.insert("occupation".into(), Relative { tol: 0.1 });
            }
            ExperimentId::AnnealedSurvival => {
                cfg.horizon = 0.2;
                cfg.replicates = 20_000;
                t.insert("survival".into(), Relative { tol: 0.1 });
            }
            ExperimentId::L2Rate => {
                cfg.eps = vec![0.08, 0.04, 0.02];
                cfg.horizon = 0.5;
                t.insert("slope".into(), Range { lo: 1.4, hi: 2.2 });
                t.insert("scaled_ratio".into(), AtMost { max: 2.0 });
                t.insert("bias_bound".into(), AtMost { max: 12.0 });
                t.insert("bias_ratio".into(), AtMost { max: 2.0 });
            }
            ExperimentId::FellerMoments => {
                cfg.horizon = 0.5;
                cfg.replicates = 100_000;
                t.insert("mean".into(), Sigmas { k: 3.0 });
                t.insert("variance".into(), Relative { tol: 0.1 });
                t.insert("third".into(), Info);
                t.insert("fourth".into(), Relative { tol: 0.15 });
            }
            ExperimentId::LaplaceMatch => {
                cfg.dim = 2;
                cfg.replicates = 20_000;
                cfg.c = IntensityField::Constant { nu: 0.25 };
                cfg.domain = Some(Aabb { lo: vec![-5.0; 2], hi: vec![5.0; 2] });
                t.insert("free_particles".into(), Relative { tol: 0.02 });
                t.insert("free_solver".into(), Absolute { tol: 1e-3 });
                t.insert("killed_closed_form".into(), Absolute { tol: 1e-3 });
                t.insert("killed_constant".into(), Relative { tol: 0.03 });
                t.insert("killed_varying".into(), Relative { tol: 0.05 });
            }
            ExperimentId::QuenchedSweep => {
                cfg.c = IntensityField::Constant { nu: 0.6 };
                cfg.horizon = 0.25;
                cfg.replicates = 400;
                cfg.spatial_particles_per_mass = 50.0;
                cfg.eps = Vec::new();
                cfg.subsequence = Some(SubsequenceSpec { alpha: 2.0, n: vec![2, 3, 4, 5] });
                cfg.domain = Some(Aabb { lo: vec![-3.0; 3], hi: vec![3.0; 3] });
                cfg.initial = Some(InitialMeasure::Uniform { region: Aabb { lo: vec![-0.5; 3], hi: vec![0.5; 3] }, mass: 1.0 });
                cfg.solver.spacing = 0.1;
                cfg.solver.dt = 0.0025;
                cfg.environments = Some(EnvironmentStore {
                    dir: PathBuf::from("environments"),
                    seeds: vec![1, 2, 3, 4, 5],
                    require_existing: false,
                });
                // about one Monte Carlo standard error of a single cell at R = 400
                t.insert("median_trend".into(), AtMost { max: 0.01 });
                t.insert("dispersion".into(), Below { max: 1.0 });
                t.insert("escape".into(), AtMost { max: 1e-3 });
            }
            ExperimentId::SolveW => {
                cfg.dim = 2;
                cfg.c = IntensityField::Constant { nu: 0.0 };
                cfg.domain = Some(Aabb { lo: vec![-5.0; 2], hi: vec![5.0; 2] });
                cfg.replicates = 2000;
                t.insert("closed_form".into(), Absolute { tol: 1e-3 });
                t.insert("w_bound".into(), AtMost { max: 0.0 });
                t.insert("terminal_support".into(), AtMost { max: 0.0 });
                t.insert("feynman_kac".into(), AbsoluteOrSigmas { tol: 1e-3, k: 3.0 });
            }
        }
        cfg
    }

    /// Parses a JSON config; fields that are absent take the defaults of the
    /// named experiment, and `thresholds` entries override individually.
    pub fn from_json(text: &str) -> Result<Self> {
        let user: Value = serde_json::from_str(text).map_err(|e| cfg_err("<root>", e.to_string()))?;
        let Value::Object(map) = user else {
            return Err(cfg_err("<root>", "config must be a JSON object"));
        };
        let id = match map.get("experiment") {
            Some(Value::String(s)) => s.parse::<ExperimentId>()?,
            Some(_) => return Err(cfg_err("experiment", "must be a string")),
            None => return Err(cfg_err("experiment", "missing")),
        };
        let mut base = serde_json::to_value(Self::defaults(id))?;
        let target = base.as_object_mut().expect("config serializes to an object");
        for (k, v) in map {
            match (target.get_mut(&k), v) {
                // nested settings merge key by key
                (Some(Value::Object(existing)), Value::Object(given)) if MERGED.contains(&k.as_str()) => {
                    existing.extend(given);
                }
                (_, v) => {
                    target.insert(k, v);
                }
            }
        }
        let cfg: Self = serde_path_to_error::deserialize(base).map_err(|e| {
            let field = e.path().to_string();
            cfg_err(&field, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg_err("--config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Changes the dimension, carrying the target point and the box along:
    /// extra axes get coordinate 0 and the half-width of the first axis.
    pub fn set_dim(&mut self, dim: usize) {
        if let Some(p) = &mut self.point {
            p.resize(dim, 0.0);
        }
        let resize = |b: &mut Aabb| {
            let (lo, hi) = (b.lo[0], b.hi[0]);
            b.lo.resize(dim, lo);
            b.hi.resize(dim, hi);
        };
        if let Some(b) = &mut self.domain {
            resize(b);
        }
        match &mut self.initial {
            Some(InitialMeasure::Uniform { region, .. }) => resize(region),
            Some(InitialMeasure::Atoms { atoms }) => atoms.iter_mut().for_each(|a| a.position.resize(dim, 0.0)),
            None => {}
        }
        self.dim = dim;
    }

    /// The configured initial measure, or `mass` at the origin.
    pub fn initial_measure(&self) -> Result<InitialMeasure> {
        match &self.initial {
            Some(m) => Ok(m.clone()),
            None => InitialMeasure::dirac(vec![0.0; self.dim], self.mass),
        }
    }

    pub fn check(&self, key: &str) -> Check {
        self.thresholds.get(key).cloned().unwrap_or(Check::Info)
    }

    /// Step for radius `eps`: the configured one, or `(eps / 5)^2`.
    pub fn step_for(&self, eps: f64) -> f64 {
        self.step.unwrap_or((eps / 5.0).powi(2))
    }

    /// The radii of the experiment: the subsequence when given, else `eps`.
    pub fn radii(&self) -> Result<Vec<f64>> {
        match &self.subsequence {
            Some(s) => s.n.iter().map(|&n| subsequence(s.alpha, self.dim, n)).collect(),
            None => Ok(self.eps.clone()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(cfg_err(
                "schema_version",
                format!("unsupported version {}; this build reads {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if self.dim < 2 {
            return Err(cfg_err("dim", format!("must be >= 2, got {}", self.dim)));
        }
        if let Some(s) = &self.subsequence {
            if !(s.alpha > 1.0) {
                return Err(cfg_err("subsequence.alpha", format!("must exceed 1, got {}", s.alpha)));
            }
            if s.n.is_empty() || s.n.contains(&0) {
                return Err(cfg_err("subsequence.n", "needs indices n >= 1"));
            }
            if !summable(s.alpha, self.dim) {
                return Err(cfg_err("subsequence", "radii are not summable"));
            }
        }
        let radii = self.radii()?;
        let needs_radius = !matches!(
            self.experiment,
            ExperimentId::FellerMoments | ExperimentId::LaplaceMatch | ExperimentId::SolveW
        );
        if needs_radius && radii.is_empty() {
            return Err(cfg_err("eps", "at least one radius is required"));
        }
        if let Some((i, e)) = radii.iter().enumerate().find(|(_, e)| !(**e > 0.0 && **e < 0.5)) {
            return Err(cfg_err(&format!("eps[{i}]"), format!("must lie in (0, 1/2), got {e}")));
        }
        self.c.validate().map_err(|e| cfg_err("c", e.to_string()))?;
        if let Some(b) = &self.domain {
            if b.dim() != self.dim {
                return Err(cfg_err("domain", format!("has dimension {}, expected {}", b.dim(), self.dim)));
            }
        }
        if let Some(m) = &self.initial {
            m.validate().map_err(|e| cfg_err("initial", e.to_string()))?;
            if m.dim() != self.dim {
                return Err(cfg_err("initial", format!("has dimension {}, expected {}", m.dim(), self.dim)));
            }
        }
        if let Some(p) = &self.point {
            if p.len() != self.dim {
                return Err(cfg_err("point", format!("has dimension {}, expected {}", p.len(), self.dim)));
            }
        }
        for (field, v) in [
            ("particles_per_mass", self.particles_per_mass),
            ("spatial_particles_per_mass", self.spatial_particles_per_mass),
            ("horizon", self.horizon),
            ("solver.dt", self.solver.dt),
            ("solver.spacing", self.solver.spacing),
            ("solver.picard_tol", self.solver.picard_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(cfg_err(field, format!("must be positive and finite, got {v}")));
            }
        }
        for (field, v) in [("lambda", self.lambda), ("mass", self.mass)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(cfg_err(field, format!("must be finite and >= 0, got {v}")));
            }
        }
        if let Some(s) = self.step {
            if !(s > 0.0 && s.is_finite()) {
                return Err(cfg_err("step", format!("must be positive, got {s}")));
            }
        }
        if self.replicates < 2 {
            return Err(cfg_err("replicates", "need at least 2"));
        }
        if self.samples == 0 {
            return Err(cfg_err("samples", "must be positive"));
        }
        if self.threads == Some(0) {
            return Err(cfg_err("threads", "must be positive"));
        }
        if self.experiment == ExperimentId::QuenchedSweep {
            if self.subsequence.is_none() {
                return Err(cfg_err("subsequence", "the quenched sweep needs a summable subsequence"));
            }
            if self.domain.is_none() {
                return Err(cfg_err("domain", "the quenched sweep needs a bounded box"));
            }
            match &self.environments {
                Some(s) if !s.seeds.is_empty() => {}
                _ => return Err(cfg_err("environments.seeds", "the quenched sweep needs environment seeds")),
            }
        }
        for (k, c) in &self.thresholds {
            c.validate().map_err(|m| cfg_err(&format!("thresholds.{k}"), m))?;
        }
        Ok(())
    }
}
