//! Quenched sweep: for fixed obstacle environments along a summable
//! sequence `eps_n`, the distance between Laplace functionals of the
//! obstacle-killed process and of the rate-killed limit.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::json;

use crate::error::{Error, Result};
use crate::geometry::Aabb;
use crate::obstacle::{bridge_margin, generate_environment, Domain, Environment};
use crate::rng::{par_replicates, stream_for, RandomSource};
use crate::solver::{laplace_from_w, solve_with_diagnostics, SolveSpec};
use crate::stats::{median, std_dev, EstimateWithError};
use crate::stochastic::IntensityField;
use crate::superprocess::{simulate, InitialMeasure, KillingMode, LaplaceProbe, ParticleSystem};

use super::config::{ExperimentConfig, ExperimentId};
use super::report::{params, Outcome};

pub fn environment_path(dir: &Path, seed: u64, n: u32) -> PathBuf {
    dir.join(format!("env_s{seed}_n{n}.sbmo"))
}

#[derive(Clone, Debug)]
pub struct StoredEnvironment {
    pub seed: u64,
    pub n: u32,
    pub eps: f64,
    pub path: PathBuf,
    pub env: Arc<Environment>,
    pub sha256: String,
}

fn quenched_parts(cfg: &ExperimentConfig) -> Result<(Aabb, Vec<(u32, f64)>, &super::config::EnvironmentStore)> {
    let missing = |field: &str| Error::Config { field: field.into(), message: "required by the quenched sweep".into() };
    let b = cfg.domain.clone().ok_or_else(|| missing("domain"))?;
    let sub = cfg.subsequence.as_ref().ok_or_else(|| missing("subsequence"))?;
    let store = cfg.environments.as_ref().ok_or_else(|| missing("environments"))?;
    let radii = cfg.radii()?;
    Ok((b, sub.n.iter().cloned().zip(radii).collect(), store))
}

/// Generation region for radius `eps`: the box plus the obstacle radius and
/// the bridge reach of one step.
pub fn generation_region(cfg: &ExperimentConfig, b: &Aabb, eps: f64) -> Aabb {
    b.inflate(eps + bridge_margin(cfg.step_for(eps)))
}

/// Writes one environment per (seed, `eps_n`) unless already present, then
/// loads them all. Environments at different `n` are independent draws.
pub fn persist_environments(cfg: &ExperimentConfig) -> Result<Vec<StoredEnvironment>> {
    let (b, ns, store) = quenched_parts(cfg)?;
    std::fs::create_dir_all(&store.dir)?;
    let mut out = Vec::new();
    for &seed in &store.seeds {
        for &(n, eps) in &ns {
            let path = environment_path(&store.dir, seed, n);
            if !path.exists() {
                if store.require_existing {
                    return Err(Error::Config {
                        field: "environments.dir".into(),
                        message: format!("missing environment file {}", path.display()),
                    });
                }
                let mut rng = RandomSource::new(seed, stream_for("environment", n as u64));
                let env = generate_environment(&mut rng, eps, &cfg.c, &generation_region(cfg, &b, eps), cfg.dim, Some(&b))?;
                let meta = BTreeMap::from([
                    ("seed".to_string(), seed.to_string()),
                    ("n".to_string(), n.to_string()),
                    ("c".to_string(), serde_json::to_string(&cfg.c)?),
                ]);
                env.save(&path, meta)?;
            }
            out.push(load_environment(&path, seed, n, eps, cfg)?);
        }
    }
    Ok(out)
}

fn load_environment(path: &Path, seed: u64, n: u32, eps: f64, cfg: &ExperimentConfig) -> Result<StoredEnvironment> {
    let (env, header) = Environment::load(path)?;
    if (header.eps - eps).abs() > 1e-12 * eps || header.dim != cfg.dim {
        return Err(Error::Config {
            field: "environments".into(),
            message: format!("{} holds eps = {}, d = {}; expected eps = {eps}, d = {}", path.display(), header.eps, header.dim, cfg.dim),
        });
    }
    Ok(StoredEnvironment { seed, n, eps, path: path.to_path_buf(), env: Arc::new(env), sha256: header.sha256 })
}

/// Loads the persisted environments; a missing file is an error.
pub fn load_environments(cfg: &ExperimentConfig) -> Result<Vec<StoredEnvironment>> {
    let (_, ns, store) = quenched_parts(cfg)?;
    let mut out = Vec::new();
    for &seed in &store.seeds {
        for &(n, eps) in &ns {
            let path = environment_path(&store.dir, seed, n);
            if !path.exists() {
                return Err(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("missing environment file {}", path.display()),
                )));
            }
            out.push(load_environment(&path, seed, n, eps, cfg)?);
        }
    }
    Ok(out)
}

/// Per-environment discrepancy `|L(X^{eps_n, B}) - L(X*)|` for the probe
/// `f = lambda` at the horizon, its median and spread across environments
/// for each `n`, and the escape rate of the free process from `B`.
pub fn quenched_sweep(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::new(ExperimentId::QuenchedSweep);
    let (b, ns, _) = quenched_parts(cfg)?;
    let envs = persist_environments(cfg)?;
    let t = cfg.horizon;
    let probe = LaplaceProbe::constant(t, cfg.lambda)?;
    let mu = cfg.initial_measure()?;
    out.note(
        "the Prohorov distance is not computed; convergence is judged on a fixed family of Laplace functionals \
         (here f = lambda at the horizon)",
    );

    let mut spec = SolveSpec::star(probe.clone(), cfg.c.clone(), b.clone(), cfg.solver.dt, cfg.solver.spacing);
    spec.picard_tol = cfg.solver.picard_tol;
    spec.picard_max = cfg.solver.picard_max;
    let star = solve_with_diagnostics(&spec)?;
    let reference = laplace_from_w(&star.w, &mu)?;
    let solver_p = params(&[("h", format!("{}", cfg.solver.spacing)), ("dt", format!("{}", cfg.solver.dt))]);
    out.push("limit", solver_p, reference, 0.0, None, &cfg.check("limit"));

    // common particle randomness across all cells
    let particles = RandomSource::new(cfg.seed, stream_for("quenched-particles", 0));
    let mut by_n: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for s in &envs {
        let mode = KillingMode::Obstacles { env: s.env.clone(), domain: Domain::open_box(b.clone()), bridge: true };
        let sys = ParticleSystem::new(cfg.spatial_particles_per_mass, cfg.step_for(s.eps), mode)?;
        let values = par_replicates(&particles, cfg.replicates, |_, r| {
            let run = simulate(&sys, &mu, &r, t, &[t])?;
            Ok((-probe.exponent(&run)?).exp())
        })?;
        let e = EstimateWithError::from_samples(&values)?;
        let signed = e.mean - reference;
        by_n.entry(s.n).or_default().push(signed);
        let p = params(&[
            ("seed", s.seed.to_string()),
            ("n", s.n.to_string()),
            ("eps", format!("{:.6}", s.eps)),
            ("obstacles", s.env.len().to_string()),
            ("R", cfg.replicates.to_string()),
        ]);
        out.push("discrepancy", p, signed.abs(), e.std_error, None, &cfg.check("discrepancy"));
        out.raw.push(json!({
            "seed": s.seed,
            "n": s.n,
            "eps": s.eps,
            "file": s.path.display().to_string(),
            "sha256": s.sha256,
            "obstacles": s.env.len(),
            "laplace": e.mean,
            "std_error": e.std_error,
            "limit": reference,
        }));
        out.note(format!("environment seed {} n {}: sha256 {}", s.seed, s.n, s.sha256));
    }

    let mut medians = Vec::new();
    let mut spreads = Vec::new();
    for (&n, signed) in &by_n {
        let abs: Vec<f64> = signed.iter().map(|v| v.abs()).collect();
        let m = median(&abs);
        let sd = if signed.len() > 1 { std_dev(signed) } else { 0.0 };
        let eps = ns.iter().find(|(k, _)| *k == n).map(|p| p.1).unwrap_or(f64::NAN);
        let p = params(&[("n", n.to_string()), ("eps", format!("{eps:.6}")), ("environments", signed.len().to_string())]);
        out.push("median", p.clone(), m, f64::NAN, None, &cfg.check("median"));
        out.push("spread", p, sd, f64::NAN, None, &cfg.check("spread"));
        medians.push(m);
        spreads.push(sd);
    }
    if medians.len() >= 2 {
        let worst = medians.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        out.push("median_trend", params(&[("n", format!("{:?}", by_n.keys().collect::<Vec<_>>()))]), worst, f64::NAN, None, &cfg.check("median_trend"));
        let ratio = spreads[spreads.len() - 1] / spreads[0];
        out.push("dispersion", params(&[("n", "last/first".into())]), ratio, f64::NAN, None, &cfg.check("dispersion"));
    }

    let escape = escape_rate(cfg, &b, &mu)?;
    out.push_estimate(
        "escape",
        params(&[("N", cfg.spatial_particles_per_mass.to_string()), ("R", cfg.replicates.to_string())]),
        &escape,
        None,
        &cfg.check("escape"),
    );
    Ok(out)
}

/// Fraction of free runs in which some particle leaves `B` before the horizon.
pub fn escape_rate(cfg: &ExperimentConfig, b: &Aabb, mu: &InitialMeasure) -> Result<EstimateWithError> {
    let mode = KillingMode::Rate { c: IntensityField::zero(), domain: Domain::open_box(b.clone()) };
    let step = cfg.step.unwrap_or(cfg.solver.dt);
    let sys = ParticleSystem::new(cfg.spatial_particles_per_mass, step, mode)?;
    let t = cfg.horizon;
    let rng = RandomSource::new(cfg.seed, stream_for("quenched-escape", 0));
    let left = par_replicates(&rng, cfg.replicates, |_, r| {
        Ok(if simulate(&sys, mu, &r, t, &[t])?.killed > 0 { 1.0 } else { 0.0 })
    })?;
    EstimateWithError::from_samples(&left)
}
