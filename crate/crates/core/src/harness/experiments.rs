use std::path::Path;

use serde_json::json;

use crate::error::{Error, Result};
use crate::obstacle::{bridge_margin, first_obstacle_hit, generate_environment, Bridge, Domain};
use crate::rng::{par_replicates, stream_for, RandomSource};
use crate::sausage::{
    kd_constant, occupation_time_f, path_time_integral, point_hitting_probability, sausage_sweep, spitzer_reference,
    SausageSweep,
};
use crate::solver::{
    constant_rate_closed_form, feynman_kac_equivalence_check, laplace_from_w, solve_with_diagnostics, SolveSpec,
};
use crate::stats::EstimateWithError;
use crate::stochastic::{sample_brownian_path, IntensityField};
use crate::superprocess::{
    laplace_of_masses, sample_total_masses, simulate, total_mass_moments, KillingMode, LaplaceProbe,
    ParticleSystem,
};

use super::config::{ExperimentConfig, ExperimentId, MassSampler};
use super::quenched::quenched_sweep;
use super::regression::rate_regression;
use super::report::{params, Outcome};

/// Runs the configured experiment, on a dedicated pool when `threads` is set.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config { field: "threads".into(), message: e.to_string() })?
            .install(|| dispatch(cfg)),
        None => dispatch(cfg),
    }
}

/// [`run`], then writes the report files into `dir`.
pub fn run_to(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    let out = run(cfg)?;
    out.write(cfg, dir)?;
    Ok(out)
}

fn dispatch(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.experiment {
        ExperimentId::Ksw => ksw(cfg),
        ExperimentId::Spitzer => spitzer(cfg),
        ExperimentId::AnnealedSurvival => annealed_survival(cfg),
        ExperimentId::L2Rate => l2_rate(cfg),
        ExperimentId::FellerMoments => feller_moments(cfg),
        ExperimentId::LaplaceMatch => laplace_match(cfg),
        ExperimentId::QuenchedSweep => quenched_sweep(cfg),
        ExperimentId::SolveW => solve_w(cfg),
    }
}

fn rng(cfg: &ExperimentConfig, part: u64) -> RandomSource {
    RandomSource::new(cfg.seed, stream_for(cfg.experiment.as_str(), part))
}

fn origin(cfg: &ExperimentConfig) -> Vec<f64> {
    vec![0.0; cfg.dim]
}

fn descending(mut radii: Vec<f64>) -> Vec<f64> {
    radii.sort_by(|a, b| b.total_cmp(a));
    radii
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn domain(cfg: &ExperimentConfig) -> Result<crate::geometry::Aabb> {
    cfg.domain.clone().ok_or_else(|| Error::Config {
        field: "domain".into(),
        message: format!("{} needs a bounded box", cfg.experiment),
    })
}

/// The common-path sausage sweep behind `ksw` and `l2-rate`.
pub fn sweep_for(cfg: &ExperimentConfig, t: f64, part: u64) -> Result<SausageSweep> {
    let radii = descending(cfg.radii()?);
    sausage_sweep(&cfg.c, &radii, &origin(cfg), t, &rng(cfg, part), cfg.replicates, cfg.samples)
}

fn sweep_raw(sweep: &SausageSweep, out: &mut Outcome) {
    for (i, p) in sweep.paths.iter().enumerate() {
        out.raw.push(json!({
            "replicate": i,
            "horizon": sweep.horizon,
            "eps": sweep.radii,
            "scaled": p.scaled,
            "scaled_se": p.scaled_se,
            "limit": p.limit,
        }));
    }
}

fn ksw(cfg: &ExperimentConfig) -> Result<Outcome> {
    let sweep = sweep_for(cfg, cfg.horizon, 0)?;
    let mut out = Outcome::new(ExperimentId::Ksw);
    ksw_rows(cfg, &sweep, &mut out)?;
    sweep_raw(&sweep, &mut out);
    Ok(out)
}

/// Capacity rows `s_d(eps) int_{S_eps} c / t` against `k_d c` (or the mean
/// limit for non-constant `c`), plus the trend toward the target.
pub fn ksw_rows(cfg: &ExperimentConfig, sweep: &SausageSweep, out: &mut Outcome) -> Result<()> {
    let kd = kd_constant(cfg.dim)?;
    let target = match &cfg.c {
        IntensityField::Constant { nu } => kd * nu,
        _ => sweep.paths.iter().map(|p| p.limit).sum::<f64>() / sweep.paths.len() as f64 / sweep.horizon,
    };
    let key = if cfg.dim == 2 { "ksw_d2" } else { "ksw" };
    let mut gaps = Vec::new();
    for (k, &eps) in sweep.radii.iter().enumerate() {
        let e = sweep.scaled_mean(k)?;
        gaps.push((e.mean - target).abs());
        let p = params(&[
            ("d", cfg.dim.to_string()),
            ("eps", fmt(eps)),
            ("t", fmt(sweep.horizon)),
            ("paths", sweep.paths.len().to_string()),
            ("samples", sweep.samples.to_string()),
            ("step", format!("{:.3e}", sweep.step)),
        ]);
        out.push_estimate(key, p, &e, Some(target), &cfg.check(key));
        if e.meta.get("inner_dominates").is_some_and(|v| v == "true") {
            out.note(format!("eps = {eps}: hit-or-miss error is not small against the spread across paths"));
        }
    }
    if gaps.len() >= 2 {
        let worst = gaps.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        let p = params(&[("d", cfg.dim.to_string()), ("eps", format!("{:?}", sweep.radii))]);
        out.push("ksw_trend", p, worst, 0.0, None, &cfg.check("ksw_trend"));
    }
    Ok(())
}

fn spitzer(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::new(ExperimentId::Spitzer);
    let eps = cfg.radii()?[0];
    let y = cfg.point.clone().unwrap_or_else(|| {
        let mut y = origin(cfg);
        y[0] = 0.5;
        y
    });
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let base = params(&[("d", cfg.dim.to_string()), ("eps", fmt(eps)), ("y", format!("{y:?}")), ("R", cfg.replicates.to_string())]);
    if cfg.dim == 2 {
        let e = point_hitting_probability(&y, eps, cfg.horizon, &rng(cfg, 0), cfg.replicates)?;
        let reference = spitzer_reference(&y, eps)?;
        out.push_estimate("spitzer", format!("{base};t={}", cfg.horizon), &e, Some(reference), &cfg.check("spitzer"));
        out.raw.push(json!({"quantity": "spitzer", "mean": e.mean, "std_error": e.std_error, "replicates": e.replicates, "reference": reference}));
        let occ = occupation_time_f(eps, &rng(cfg, 1), cfg.replicates)?;
        let lead = eps * eps * eps.ln().abs();
        let ratio = occ.clone().scaled(1.0 / lead);
        out.push_estimate("occupation", params(&[("eps", fmt(eps)), ("R", cfg.replicates.to_string())]), &ratio, Some(1.0), &cfg.check("occupation"));
        out.raw.push(json!({"quantity": "occupation", "mean": occ.mean, "std_error": occ.std_error, "leading_term": lead}));
        out.note("occupation is reported as f(eps) / (eps^2 |log eps|)");
    } else {
        let e = point_hitting_probability(&y, eps, f64::INFINITY, &rng(cfg, 0), cfg.replicates)?;
        let exact = (eps / norm).min(1.0);
        out.push_estimate("hit_ever", base, &e, Some(exact), &cfg.check("hit_ever"));
        out.raw.push(json!({"quantity": "hit_ever", "mean": e.mean, "std_error": e.std_error, "replicates": e.replicates, "exact": exact}));
    }
    Ok(out)
}

fn annealed_survival(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::new(ExperimentId::AnnealedSurvival);
    let eps = cfg.radii()?[0];
    let (d, t) = (cfg.dim, cfg.horizon);
    let step = cfg.step_for(eps);
    let kd = kd_constant(d)?;
    let x = origin(cfg);
    let reps = par_replicates(&rng(cfg, 0), cfg.replicates, |_, r| {
        let path = sample_brownian_path(&mut r.derive(0), &x, 0.0, t, step, d)?;
        let bbox = path.bbox();
        let region = bbox.inflate(eps + bridge_margin(step));
        let env = generate_environment(&mut r.derive(1), eps, &cfg.c, &region, d, Some(&bbox))?;
        let hit = first_obstacle_hit(&path, &env, Bridge::Sampled(&r.derive(2)))?;
        let limit = (-kd * path_time_integral(&path, &cfg.c)).exp();
        Ok((hit, limit, env.len()))
    })?;
    let survived: Vec<f64> = reps.iter().map(|(h, _, _)| if h.is_none() { 1.0 } else { 0.0 }).collect();
    let e = EstimateWithError::from_samples(&survived)?;
    let target = match &cfg.c {
        IntensityField::Constant { nu } => (-kd * nu * t).exp(),
        _ => reps.iter().map(|(_, l, _)| l).sum::<f64>() / reps.len() as f64,
    };
    let p = params(&[
        ("d", d.to_string()),
        ("eps", fmt(eps)),
        ("t", fmt(t)),
        ("R", cfg.replicates.to_string()),
        ("step", format!("{step:.3e}")),
    ]);
    out.push_estimate("survival", p, &e, Some(target), &cfg.check("survival"));
    for (i, (hit, limit, n)) in reps.iter().enumerate() {
        out.raw.push(json!({"replicate": i, "hit_time": hit, "obstacles": n, "limit_weight": limit}));
    }
    Ok(out)
}

fn l2_rate(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::new(ExperimentId::L2Rate);
    let sweep = sweep_for(cfg, cfg.horizon, 0)?;
    l2_rows(cfg, &sweep, &mut out)?;
    if cfg.dim >= 3 {
        if (cfg.horizon - 0.5).abs() < 1e-12 {
            bias_rows(cfg, &sweep, &mut out)?;
        } else {
            bias_rows(cfg, &sweep_for(cfg, 0.5, 1)?, &mut out)?;
        }
    }
    sweep_raw(&sweep, &mut out);
    Ok(out)
}

/// `h(eps)` rows: a log-log slope in `d >= 3`, and `h |log eps|^2` with its
/// successive ratios in `d = 2`.
pub fn l2_rows(cfg: &ExperimentConfig, sweep: &SausageSweep, out: &mut Outcome) -> Result<()> {
    let hs = sweep.all(SausageSweep::h)?;
    let mut scaled = Vec::new();
    for (e, &eps) in hs.iter().zip(&sweep.radii) {
        let p = params(&[("d", cfg.dim.to_string()), ("eps", fmt(eps)), ("t", fmt(sweep.horizon)), ("paths", sweep.paths.len().to_string())]);
        out.push_estimate("h", p.clone(), e, None, &cfg.check("h"));
        if cfg.dim == 2 {
            let s = e.clone().scaled(eps.ln().powi(2));
            out.push_estimate("h_log2", p, &s, None, &cfg.check("h_log2"));
            scaled.push(s.mean);
        }
    }
    if cfg.dim >= 3 {
        let pts: Vec<(f64, f64)> = sweep.radii.iter().cloned().zip(hs.iter().map(|e| e.mean)).collect();
        match rate_regression(&pts) {
            Ok(r) => {
                let p = params(&[("eps", format!("{:?}", sweep.radii)), ("r_squared", format!("{:.4}", r.r_squared))]);
                out.push("slope", p, r.slope, f64::NAN, None, &cfg.check("slope"));
            }
            Err(e) => {
                out.note(format!("rate regression failed: {e}"));
                out.push("slope", String::new(), f64::NAN, f64::NAN, None, &cfg.check("slope"));
            }
        }
    } else {
        for (w, r) in scaled.windows(2).zip(sweep.radii.windows(2)) {
            let ratio = if w[0] > 0.0 { w[1].max(0.0) / w[0] } else { f64::NAN };
            let p = params(&[("eps", format!("{}->{}", r[0], r[1]))]);
            out.push("scaled_ratio", p, ratio, f64::NAN, None, &cfg.check("scaled_ratio"));
        }
    }
    Ok(())
}

/// `|v(eps, 0)| / eps` at each radius and the spread of these values.
pub fn bias_rows(cfg: &ExperimentConfig, sweep: &SausageSweep, out: &mut Outcome) -> Result<()> {
    let vs = sweep.all(SausageSweep::bias)?;
    let mut ratios = Vec::new();
    for (v, &eps) in vs.iter().zip(&sweep.radii) {
        let p = params(&[("d", cfg.dim.to_string()), ("eps", fmt(eps)), ("t", fmt(sweep.horizon)), ("paths", sweep.paths.len().to_string())]);
        out.push("bias_bound", p, v.mean.abs() / eps, v.std_error / eps, None, &cfg.check("bias_bound"));
        ratios.push(v.mean.abs() / eps);
    }
    let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    out.push("bias_ratio", params(&[("eps", format!("{:?}", sweep.radii))]), spread, f64::NAN, None, &cfg.check("bias_ratio"));
    Ok(())
}

/// Total masses at the horizon, from the birth-death law or the spatial
/// system, with constant killing `kappa`.
fn total_masses(cfg: &ExperimentConfig, kappa: f64, part: u64) -> Result<Vec<f64>> {
    match cfg.sampler {
        MassSampler::Exact => {
            let y = cfg.initial_measure()?.total_mass();
            sample_total_masses(&rng(cfg, part), cfg.particles_per_mass, kappa, y, cfg.horizon, cfg.replicates)
        }
        MassSampler::Particles => {
            let mode = if kappa > 0.0 {
                let nu = kappa / kd_constant(cfg.dim)?;
                KillingMode::Rate { c: IntensityField::constant(nu)?, domain: Domain::FullSpace }
            } else {
                KillingMode::Free
            };
            let sys = ParticleSystem::new(cfg.spatial_particles_per_mass, cfg.step.unwrap_or(0.01), mode)?;
            let mu = cfg.initial_measure()?;
            let t = cfg.horizon;
            par_replicates(&rng(cfg, part), cfg.replicates, |_, r| {
                Ok(simulate(&sys, &mu, &r, t, &[t])?.snapshots[0].total_mass())
            })
        }
    }
}

fn sampler_params(cfg: &ExperimentConfig) -> Vec<(&'static str, String)> {
    let n = match cfg.sampler {
        MassSampler::Exact => cfg.particles_per_mass,
        MassSampler::Particles => cfg.spatial_particles_per_mass,
    };
    vec![
        ("sampler", format!("{:?}", cfg.sampler).to_lowercase()),
        ("N", fmt(n)),
        ("y", fmt(cfg.initial_measure().map_or(cfg.mass, |m| m.total_mass()))),
        ("t", fmt(cfg.horizon)),
        ("R", cfg.replicates.to_string()),
    ]
}

fn feller_moments(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::new(ExperimentId::FellerMoments);
    let masses = total_masses(cfg, 0.0, 0)?;
    let (y, t) = (cfg.initial_measure()?.total_mass(), cfg.horizon);
    let m = total_mass_moments(&masses, y)?;
    let p = params(&sampler_params(cfg));
    out.push("mean", p.clone(), m.mean, m.se_mean, Some(y), &cfg.check("mean"));
    out.push("variance", p.clone(), m.var, m.se_var, Some(2.0 * t * y), &cfg.check("variance"));
    out.push("third", p.clone(), m.m3, f64::NAN, Some(6.0 * t * t * y), &cfg.check("third"));
    let fourth = 24.0 * t.powi(3) * y + 12.0 * t * t * y * y;
    out.push("fourth", p, m.m4, m.se_m4, Some(fourth), &cfg.check("fourth"));
    let zero = masses.iter().filter(|&&v| v == 0.0).count() as f64 / masses.len() as f64;
    out.note(format!("extinct by t: {:.4} (limit exp(-y/(2t)) = {:.4})", zero, (-y / (2.0 * t)).exp()));
    out.raw.extend(masses.iter().enumerate().map(|(i, v)| json!({"replicate": i, "mass": v})));
    Ok(out)
}

fn laplace_match(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::new(ExperimentId::LaplaceMatch);
    let (t, lambda) = (cfg.horizon, cfg.lambda);
    let b = domain(cfg)?;
    let x = origin(cfg);
    let kd = kd_constant(cfg.dim)?;
    let probe = LaplaceProbe::constant(t, lambda)?;
    let mu = cfg.initial_measure()?;
    let y = mu.total_mass();
    let grid = |c: IntensityField| -> Result<crate::solver::Solution> {
        let mut spec = SolveSpec::star(probe.clone(), c, b.clone(), cfg.solver.dt, cfg.solver.spacing);
        spec.picard_tol = cfg.solver.picard_tol;
        spec.picard_max = cfg.solver.picard_max;
        solve_with_diagnostics(&spec)
    };
    let solver_p = params(&[("h", fmt(cfg.solver.spacing)), ("dt", fmt(cfg.solver.dt)), ("t", fmt(t)), ("lambda", fmt(lambda))]);

    let masses = total_masses(cfg, 0.0, 0)?;
    let free = laplace_of_masses(&masses, lambda)?;
    let exact = (-lambda * y / (1.0 + lambda * t)).exp();
    out.push_estimate("free_particles", params(&sampler_params(cfg)), &free, Some(exact), &cfg.check("free_particles"));
    out.raw.extend(masses.iter().enumerate().map(|(i, v)| json!({"part": "free", "replicate": i, "mass": v})));

    let w_free = grid(IntensityField::zero())?;
    let w0 = w_free.w.value(0.0, &x);
    out.push("free_solver", solver_p.clone(), w0, 0.0, Some(lambda / (1.0 + lambda * t)), &cfg.check("free_solver"));

    if cfg.c.is_zero() {
        return Ok(out);
    }
    let killed = grid(cfg.c.clone())?;
    let w0 = killed.w.value(0.0, &x);
    if let IntensityField::Constant { nu } = cfg.c {
        let kappa = kd * nu;
        let closed = constant_rate_closed_form(lambda, kappa, t);
        out.push("killed_closed_form", format!("{solver_p};kappa={kappa}"), w0, 0.0, Some(closed), &cfg.check("killed_closed_form"));
        let masses = total_masses(cfg, kappa, 1)?;
        let sim = laplace_of_masses(&masses, lambda)?;
        let p = params(&sampler_params(cfg));
        let target = laplace_from_w(&killed.w, &mu)?;
        out.push_estimate("killed_constant", format!("{p};kappa={kappa}"), &sim, Some(target), &cfg.check("killed_constant"));
        out.raw.extend(masses.iter().enumerate().map(|(i, v)| json!({"part": "killed", "replicate": i, "mass": v})));
    } else {
        let mode = KillingMode::Rate { c: cfg.c.clone(), domain: Domain::open_box(b.clone()) };
        let step = cfg.step.unwrap_or(0.01);
        let sys = ParticleSystem::new(cfg.spatial_particles_per_mass, step, mode)?;
        let values = par_replicates(&rng(cfg, 2), cfg.replicates, |_, r| {
            let run = simulate(&sys, &mu, &r, t, &[t])?;
            Ok((-probe.exponent(&run)?).exp())
        })?;
        let sim = EstimateWithError::from_samples(&values)?;
        let target = laplace_from_w(&killed.w, &mu)?;
        let p = params(&[
            ("N", fmt(cfg.spatial_particles_per_mass)),
            ("step", fmt(step)),
            ("R", cfg.replicates.to_string()),
            ("t", fmt(t)),
            ("lambda", fmt(lambda)),
        ]);
        out.push_estimate("killed_varying", p, &sim, Some(target), &cfg.check("killed_varying"));
        out.raw.extend(values.iter().enumerate().map(|(i, v)| json!({"part": "killed", "replicate": i, "laplace": v})));
    }
    out.note(format!("solver boundary leakage {:.3e}", killed.diagnostics.boundary_leakage));
    out.notes.extend(killed.diagnostics.warnings.iter().cloned());
    Ok(out)
}

fn solve_w(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::new(ExperimentId::SolveW);
    let (t, lambda) = (cfg.horizon, cfg.lambda);
    let b = domain(cfg)?;
    let probe = LaplaceProbe::constant(t, lambda)?;
    let mut spec = SolveSpec::star(probe.clone(), cfg.c.clone(), b, cfg.solver.dt, cfg.solver.spacing);
    spec.picard_tol = cfg.solver.picard_tol;
    spec.picard_max = cfg.solver.picard_max;
    let sol = solve_with_diagnostics(&spec)?;
    let x = origin(cfg);
    let w0 = sol.w.value(0.0, &x);
    let p = params(&[
        ("d", cfg.dim.to_string()),
        ("h", fmt(cfg.solver.spacing)),
        ("dt", fmt(cfg.solver.dt)),
        ("t", fmt(t)),
        ("lambda", fmt(lambda)),
    ]);
    if let IntensityField::Constant { nu } = cfg.c {
        let closed = constant_rate_closed_form(lambda, kd_constant(cfg.dim)? * nu, t);
        out.push("closed_form", p.clone(), w0, 0.0, Some(closed), &cfg.check("closed_form"));
    } else {
        out.push("w0", p.clone(), w0, 0.0, None, &cfg.check("w0"));
    }
    let bound = sol.w.max_value() - probe.norm_sum();
    out.push("w_bound", p.clone(), bound, 0.0, None, &cfg.check("w_bound"));
    let after = sol.w.at_time(t + cfg.solver.dt)?.into_iter().fold(0.0, f64::max);
    out.push("terminal_support", p.clone(), after, 0.0, None, &cfg.check("terminal_support"));
    let fk = feynman_kac_equivalence_check(&spec, &sol.w, &rng(cfg, 0), cfg.replicates)?;
    out.push_estimate("feynman_kac", format!("{p};R={}", cfg.replicates), &fk, Some(0.0), &cfg.check("feynman_kac"));
    let d = &sol.diagnostics;
    out.raw.push(serde_json::to_value(d)?);
    out.note(format!(
        "{} steps, {} Picard sweeps (max {} per step), boundary leakage {:.3e}",
        d.steps, d.total_sweeps, d.max_sweeps, d.boundary_leakage
    ));
    out.notes.extend(d.warnings.iter().cloned());
    out.grid = Some(sol.w);
    Ok(out)
}
