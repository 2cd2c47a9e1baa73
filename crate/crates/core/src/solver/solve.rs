use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::Aabb;
use crate::obstacle::Environment;
use crate::sausage::kd_constant;
use crate::stochastic::IntensityField;
use crate::superprocess::LaplaceProbe;

use super::grid::GridFunction;
use super::heat::{heat_step, lattice_kernel};

const MAX_GRID_CELLS: usize = 1 << 26;

/// Which equation to solve: killing at rate `k_d c(x)`, or Dirichlet zero
/// on the obstacles of a fixed environment.
#[derive(Clone, Debug)]
pub enum SolveMode {
    Star,
    Eps(Arc<Environment>),
}

#[derive(Clone, Debug)]
pub struct SolveSpec {
    pub probe: LaplaceProbe,
    pub c: IntensityField,
    /// The bounded domain `B`; `w` vanishes outside.
    pub domain: Aabb,
    pub mode: SolveMode,
    pub dt: f64,
    /// Target grid spacing; each axis uses the largest `h_k <= spacing`
    /// that divides the box.
    pub spacing: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
    /// Store every k-th time slice (probe times and 0 are always stored).
    pub store_every: usize,
}

impl SolveSpec {
    pub fn star(probe: LaplaceProbe, c: IntensityField, domain: Aabb, dt: f64, spacing: f64) -> Self {
        Self {
            probe,
            c,
            domain,
            mode: SolveMode::Star,
            dt,
            spacing,
            picard_tol: 1e-9,
            picard_max: 50,
            store_every: 1,
        }
    }

    pub fn eps(probe: LaplaceProbe, env: Arc<Environment>, domain: Aabb, dt: f64, spacing: f64) -> Self {
        Self {
            mode: SolveMode::Eps(env),
            ..Self::star(probe, IntensityField::zero(), domain, dt, spacing)
        }
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn shape(&self) -> Vec<usize> {
        (0..self.dim())
            .map(|k| ((self.domain.extent(k) / self.spacing) * (1.0 - 1e-12)).ceil().max(1.0) as usize)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.probe.validate()?;
        self.c.validate()?;
        if self.dim() < 2 {
            return Err(invalid("the solver needs d >= 2"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        let min_gap = self.probe.times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        if self.dt > min_gap * (1.0 + 1e-9) {
            return Err(invalid(format!("dt = {} exceeds the smallest probe gap {min_gap}", self.dt)));
        }
        if !(self.picard_tol > 0.0) || self.picard_max == 0 {
            return Err(invalid("picard_tol must be positive and picard_max at least 1"));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) || self.store_every == 0 {
            return Err(invalid("spacing and store_every must be positive"));
        }
        let cells: f64 = self.shape().iter().map(|&n| n as f64).product();
        if cells > MAX_GRID_CELLS as f64 {
            return Err(invalid(format!("grid of {cells:.0} cells is too large")));
        }
        if let Some(f) = self.probe.functions.iter().find(|f| !f.is_continuous()) {
            return Err(Error::Unsupported(format!("discontinuous test function {f:?}")));
        }
        if let SolveMode::Eps(env) = &self.mode {
            if env.dim() != self.dim() {
                return Err(invalid("environment and domain dimensions differ"));
            }
            let h = self.domain.extent(0) / self.shape()[0] as f64;
            let h = (1..self.dim()).map(|k| self.domain.extent(k) / self.shape()[k] as f64).fold(h, f64::max);
            if h > env.eps() / 2.0 {
                return Err(invalid(format!("spacing {h} does not resolve obstacles of radius {}", env.eps())));
            }
            env.check_coverage(&self.domain, env.eps())?;
        }
        Ok(())
    }
}

/// Times `t_p = s_0 > s_1 > ... > 0`, with every probe time on the grid and
/// steps no longer than `dt`.
pub fn time_grid(probe_times: &[f64], dt: f64) -> Vec<f64> {
    let mut marks = vec![0.0];
    marks.extend_from_slice(probe_times);
    let mut out = vec![*marks.last().unwrap()];
    for w in marks.windows(2).rev() {
        let (lo, hi) = (w[0], w[1]);
        let n = ((hi - lo) / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        for j in (0..n).rev() {
            out.push(lo + (hi - lo) * j as f64 / n as f64);
        }
    }
    out
}

/// Flow of `w' = -w^2 - kappa w` for a time `tau`.
pub fn reaction_flow(w0: f64, kappa: f64, tau: f64) -> f64 {
    if w0 <= 0.0 {
        return 0.0;
    }
    if kappa * tau < 1e-12 {
        return w0 / (1.0 + w0 * tau);
    }
    let e = (-kappa * tau).exp();
    kappa * w0 * e / (kappa + w0 * (1.0 - e))
}

/// `w(0)` of the spatially constant problem with `f = lambda` at `t1` and
/// killing rate `kappa0`.
pub fn constant_rate_closed_form(lambda: f64, kappa0: f64, t1: f64) -> f64 {
    reaction_flow(lambda, kappa0, t1)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub steps: usize,
    pub total_sweeps: usize,
    pub max_sweeps: usize,
    /// Fraction of the mass of `w` that diffused out of the box, compounded
    /// over all steps.
    pub boundary_leakage: f64,
    pub masked_cells: usize,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub w: GridFunction,
    pub diagnostics: SolveDiagnostics,
}

pub fn solve(spec: &SolveSpec) -> Result<GridFunction> {
    Ok(solve_with_diagnostics(spec)?.w)
}

/// Backward time stepping. Each step takes a Strang-split predictor (exact
/// reaction, lattice heat kernel `P`) and then iterates the symmetric split
/// step with the reaction rate frozen at `kappa + sqrt(w_n w)`,
/// `w = E P(E w_n)`, `E = exp(-dt/2 (kappa + sqrt(w_n w)))`, until successive
/// iterates differ by less than `picard_tol` in `L^1`. Every sweep is a
/// positive map, so the scheme stays nonnegative for any `dt`.
pub fn solve_with_diagnostics(spec: &SolveSpec) -> Result<Solution> {
    spec.validate()?;
    let shape = spec.shape();
    let mut grid = GridFunction::zeros(spec.domain.clone(), shape.clone())?;
    let n = grid.cells();
    let h = grid.spacing();
    let vol = grid.cell_volume();
    let mut diag = SolveDiagnostics::default();
    let h_min = h.iter().cloned().fold(f64::INFINITY, f64::min);
    if spec.dt > h_min * h_min {
        diag.warnings.push(format!("dt = {} exceeds h^2 = {:.3e}", spec.dt, h_min * h_min));
    }

    let centers: Vec<Vec<f64>> = (0..n).map(|i| grid.center(i)).collect();
    let kappa: Vec<f64> = match &spec.mode {
        SolveMode::Star => {
            let kd = kd_constant(spec.dim())?;
            centers.iter().map(|x| kd * spec.c.eval(x)).collect()
        }
        SolveMode::Eps(_) => vec![0.0; n],
    };
    let open: Vec<bool> = match &spec.mode {
        SolveMode::Star => vec![true; n],
        SolveMode::Eps(env) => centers.iter().map(|x| !env.covers(x)).collect(),
    };
    diag.masked_cells = open.iter().filter(|o| !**o).count();
    let sampled: Vec<Vec<f64>> = spec
        .probe
        .functions
        .iter()
        .map(|f| centers.iter().zip(&open).map(|(x, &o)| if o { f.eval(x) } else { 0.0 }).collect())
        .collect();

    let times = time_grid(&spec.probe.times, spec.dt);
    let probe_index = |t: f64| spec.probe.times.iter().position(|&s| (s - t).abs() <= 1e-12 * s.max(1.0));
    let kernels_for = |step: f64| -> Vec<Vec<f64>> { h.iter().map(|hk| lattice_kernel(step / (hk * hk))).collect() };
    let mut cached: Option<(f64, Vec<Vec<f64>>)> = None;

    let mut w = sampled[spec.probe.times.len() - 1].clone();
    grid.push_slice(times[0], &w)?;
    let mut kept = 1.0;
    let (mut pred, mut next, mut damp, mut scratch) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], Vec::with_capacity(n));
    for (k, pair) in times.windows(2).enumerate() {
        let step = pair[0] - pair[1];
        let kernels = match &cached {
            Some((s, ks)) if (s - step).abs() <= 1e-14 * step => ks.clone(),
            _ => {
                let ks = kernels_for(step);
                cached = Some((step, ks.clone()));
                ks
            }
        };
        // predictor: Strang splitting with the exact reaction flow
        for (p, (v, kap)) in pred.iter_mut().zip(w.iter().zip(&kappa)) {
            *p = reaction_flow(*v, *kap, step / 2.0);
        }
        let before: f64 = pred.iter().sum();
        heat_step(&mut pred, &mut scratch, &shape, &kernels);
        let after: f64 = pred.iter().sum();
        if before > 0.0 {
            kept *= (after / before).min(1.0);
        }
        for i in 0..n {
            pred[i] = if open[i] { reaction_flow(pred[i], kappa[i], step / 2.0) } else { 0.0 };
        }

        // corrector: w = E (P (E w_n)) with E = exp(-dt/2 (kappa + sqrt(w_n w)))
        let mut sweeps = 0;
        loop {
            sweeps += 1;
            for i in 0..n {
                damp[i] = (-0.5 * step * (kappa[i] + (w[i] * pred[i]).sqrt())).exp();
                next[i] = damp[i] * w[i];
            }
            heat_step(&mut next, &mut scratch, &shape, &kernels);
            let mut change = 0.0;
            for i in 0..n {
                next[i] = if open[i] { damp[i] * next[i] } else { 0.0 };
                change += (next[i] - pred[i]).abs();
            }
            std::mem::swap(&mut pred, &mut next);
            let change = change * vol;
            if change < spec.picard_tol {
                break;
            }
            if sweeps >= spec.picard_max {
                return Err(Error::NonConvergence { sweeps, residual: change });
            }
        }
        diag.total_sweeps += sweeps;
        diag.max_sweeps = diag.max_sweeps.max(sweeps);
        std::mem::swap(&mut w, &mut pred);

        let t = pair[1];
        let jump = probe_index(t);
        if let Some(j) = jump {
            w.iter_mut().zip(&sampled[j]).for_each(|(v, f)| *v += f);
        }
        if jump.is_some() || t == 0.0 || (k + 1) % spec.store_every == 0 {
            grid.push_slice(t, &w)?;
        }
    }
    diag.steps = times.len() - 1;
    diag.boundary_leakage = 1.0 - kept;
    Ok(Solution { w: grid, diagnostics: diag })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PointCloud;

    fn big_box(d: usize, half: f64) -> Aabb {
        Aabb::cube(&vec![0.0; d], half).unwrap()
    }

    fn center_value(w: &GridFunction) -> f64 {
        w.value(0.0, &w.region.center())
    }

    /// Backward Euler with Newton steps on `w' = -w^2 - k w`, a stiff oracle
    /// independent of the closed form.
    fn implicit_ode(w0: f64, k: f64, t: f64, steps: usize) -> f64 {
        let dt = t / steps as f64;
        let mut w = w0;
        for _ in 0..steps {
            let mut v = w;
            for _ in 0..30 {
                let f = v - w + dt * (v * v + k * v);
                v -= f / (1.0 + dt * (2.0 * v + k));
            }
            w = v;
        }
        w
    }

    #[test]
    fn closed_form_matches_stiff_oracle() {
        for &(l, k, t) in &[(1.0, 0.0, 1.0), (1.0, 2.0, 0.5), (3.0, 10.0, 1.0), (0.2, 0.5, 2.0)] {
            let a = constant_rate_closed_form(l, k, t);
            let b = implicit_ode(l, k, t, 200_000);
            assert!((a - b).abs() < 1e-5, "{l} {k} {t}: {a} vs {b}");
        }
        assert!((constant_rate_closed_form(1.0, 0.0, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn time_grid_hits_probe_times() {
        let g = time_grid(&[0.25, 1.0], 0.1);
        assert_eq!(g[0], 1.0);
        assert_eq!(*g.last().unwrap(), 0.0);
        assert!(g.iter().any(|&t| (t - 0.25).abs() < 1e-15));
        assert!(g.windows(2).all(|w| w[0] > w[1] && w[0] - w[1] <= 0.1 + 1e-12));
    }

    #[test]
    fn zero_probe_gives_zero() {
        let probe = LaplaceProbe::constant(0.5, 0.0).unwrap();
        let w = solve(&SolveSpec::star(probe, IntensityField::constant(1.0).unwrap(), big_box(2, 1.0), 0.05, 0.1)).unwrap();
        assert_eq!(w.max_value(), 0.0);
    }

    #[test]
    fn feller_value_at_the_centre() {
        let probe = LaplaceProbe::constant(1.0, 1.0).unwrap();
        let spec = SolveSpec::star(probe, IntensityField::zero(), big_box(2, 5.0), 0.01, 0.25);
        let sol = solve_with_diagnostics(&spec).unwrap();
        assert!((center_value(&sol.w) - 0.5).abs() < 1e-3, "{}", center_value(&sol.w));
        assert!(sol.diagnostics.warnings.is_empty());
        assert!(sol.diagnostics.boundary_leakage > 0.0 && sol.diagnostics.boundary_leakage < 1.0);
    }

    #[test]
    fn constant_killing_matches_closed_form() {
        let kd = kd_constant(2).unwrap();
        let kappa0 = 0.8;
        let probe = LaplaceProbe::constant(1.0, 2.0).unwrap();
        let c = IntensityField::constant(kappa0 / kd).unwrap();
        let spec = SolveSpec::star(probe, c, big_box(2, 5.0), 0.01, 0.25);
        let w = solve(&spec).unwrap();
        let target = constant_rate_closed_form(2.0, kappa0, 1.0);
        assert!((center_value(&w) - target).abs() < 1e-3);

        let fine = SolveSpec { dt: 0.005, spacing: 0.125, ..spec };
        assert!((center_value(&solve(&fine).unwrap()) - center_value(&w)).abs() < 1e-3);
    }

    #[test]
    fn terminal_support_bound_and_comparison() {
        let bump = IntensityField::gaussian_bump(vec![0.3, 0.0], 1.5, 0.4).unwrap();
        let probe = LaplaceProbe::new(vec![0.3, 0.6], vec![bump.clone(), IntensityField::constant(0.5).unwrap()]).unwrap();
        let c = IntensityField::gaussian_bump(vec![0.0, 0.0], 2.0, 0.5).unwrap();
        let domain = big_box(2, 2.0);
        let killed = solve(&SolveSpec::star(probe.clone(), c, domain.clone(), 0.02, 0.1)).unwrap();
        let free = solve(&SolveSpec::star(probe.clone(), IntensityField::zero(), domain.clone(), 0.02, 0.1)).unwrap();
        assert_eq!(killed.at_time(0.61).unwrap(), vec![0.0; killed.cells()]);
        assert!(killed.max_value() <= probe.norm_sum());
        assert!(killed.values.iter().all(|v| *v >= 0.0));
        assert!(killed.values.iter().zip(&free.values).all(|(a, b)| *a <= b + 1e-6));

        let bigger = LaplaceProbe::new(
            vec![0.3, 0.6],
            vec![IntensityField::gaussian_bump(vec![0.3, 0.0], 2.0, 0.4).unwrap(), IntensityField::constant(0.5).unwrap()],
        )
        .unwrap();
        let more = solve(&SolveSpec::star(bigger, IntensityField::zero(), domain, 0.02, 0.1)).unwrap();
        assert!(more.values.iter().zip(&free.values).all(|(a, b)| a + 1e-6 >= *b));
    }

    #[test]
    fn obstacles_are_dirichlet_cells() {
        let region = big_box(2, 1.5);
        let centers = PointCloud::from_coords(2, vec![0.0, 0.0, 0.5, -0.4]).unwrap();
        let env = Arc::new(Environment::from_centers(0.1, region, centers).unwrap());
        let probe = LaplaceProbe::constant(0.2, 1.0).unwrap();
        let domain = big_box(2, 1.0);
        let spec = SolveSpec::eps(probe.clone(), env.clone(), domain.clone(), 0.01, 0.05);
        let sol = solve_with_diagnostics(&spec).unwrap();
        assert!(sol.diagnostics.masked_cells > 0);
        for k in 0..sol.w.times.len() {
            for (i, v) in sol.w.slice(k).iter().enumerate() {
                if env.covers(&sol.w.center(i)) {
                    assert_eq!(*v, 0.0);
                }
            }
        }
        let free = solve(&SolveSpec::star(probe.clone(), IntensityField::zero(), domain.clone(), 0.01, 0.05)).unwrap();
        let worst = sol.w.values.iter().zip(&free.values).map(|(a, b)| a - b).fold(f64::MIN, f64::max);
        assert!(worst <= 1e-6, "{worst}");

        let coarse = SolveSpec::eps(probe.clone(), env.clone(), domain, 0.01, 0.1);
        assert!(coarse.validate().is_err());
        let outside = SolveSpec::eps(probe, env, big_box(2, 1.45), 0.01, 0.05);
        assert!(matches!(outside.validate(), Err(Error::CoverageViolation(_))));
    }

    #[test]
    fn invalid_specs_and_warnings() {
        let probe = LaplaceProbe::new(vec![0.1, 0.15], vec![IntensityField::zero(), IntensityField::zero()]).unwrap();
        let spec = SolveSpec::star(probe, IntensityField::zero(), big_box(2, 1.0), 0.1, 0.1);
        assert!(spec.validate().is_err());
        let spec = SolveSpec { dt: 0.05, picard_tol: 0.0, ..spec };
        assert!(spec.validate().is_err());
        let spec = SolveSpec { picard_tol: 1e-9, ..spec };
        let sol = solve_with_diagnostics(&spec).unwrap();
        assert_eq!(sol.diagnostics.warnings.len(), 1);

        let lumpy = IntensityField::Radial {
            center: vec![0.0, 0.0],
            profile: crate::stochastic::RadialProfile::Ball { value: 1.0, radius: 0.5 },
        };
        let probe = LaplaceProbe::new(vec![0.5], vec![lumpy]).unwrap();
        let spec = SolveSpec::star(probe, IntensityField::zero(), big_box(2, 1.0), 0.05, 0.1);
        assert!(matches!(spec.validate(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn picard_cap_is_reported() {
        let probe = LaplaceProbe::constant(0.5, 50.0).unwrap();
        let mut spec = SolveSpec::star(probe, IntensityField::zero(), big_box(2, 1.0), 0.1, 0.1);
        spec.picard_max = 2;
        spec.picard_tol = 1e-14;
        let r = solve(&spec);
        assert!(matches!(r, Err(Error::NonConvergence { sweeps: 2, .. })), "{r:?}");
    }
}
