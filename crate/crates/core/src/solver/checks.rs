use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{par_replicates, RandomSource};
use crate::sausage::kd_constant;
use crate::stats::EstimateWithError;
use crate::superprocess::InitialMeasure;

use super::grid::GridFunction;
use super::solve::{time_grid, SolveMode, SolveSpec};

/// How the killing term enters the probabilistic representation of `w*`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeynmanKacForm {
    /// `w = sum E[f_i] - E[int (w^2 + k_d c w)]`
    Plain,
    /// `w = sum E[f_i e^{-k_d int c}] - E[int w^2 e^{-k_d int c}]`
    Exponential,
}

/// Monte Carlo value of the chosen right-hand side at `(0, x)` minus the
/// solved `w(0, x)`. Paths run on the solver's time grid and are stopped
/// on leaving the box.
pub fn feynman_kac_residual(
    spec: &SolveSpec,
    w: &GridFunction,
    x: &[f64],
    form: FeynmanKacForm,
    rng: &RandomSource,
    replicates: usize,
) -> Result<EstimateWithError> {
    if !matches!(spec.mode, SolveMode::Star) {
        return Err(Error::Unsupported("the Feynman-Kac check applies to the rate-killed equation".into()));
    }
    if replicates < 2 {
        return Err(invalid("need at least two replicates"));
    }
    if x.len() != spec.dim() || !spec.domain.contains(x) {
        return Err(Error::SupportViolation("evaluation point lies outside the box".into()));
    }
    let kd = kd_constant(spec.dim())?;
    let mut times = time_grid(&spec.probe.times, spec.dt);
    times.reverse();
    let w0 = w.value(0.0, x);
    let d = spec.dim();
    let rhs = par_replicates(rng, replicates, |_, mut r| {
        let mut pos = x.to_vec();
        let mut next = vec![0.0; d];
        let mut killing = 0.0;
        let mut total = 0.0;
        let mut probe = 0;
        for pair in times.windows(2) {
            let (s0, s1) = (pair[0], pair[1]);
            let ds = s1 - s0;
            for (n, p) in next.iter_mut().zip(&pos) {
                *n = p + ds.sqrt() * r.normal();
            }
            if !spec.domain.contains(&next) {
                break;
            }
            let mid = 0.5 * (s0 + s1);
            let (c0, c1) = (kd * spec.c.eval(&pos), kd * spec.c.eval(&next));
            let (a, b) = (w.value(mid, &pos), w.value(mid, &next));
            let k_mid = killing + 0.25 * ds * (c0 + c1);
            total -= match form {
                FeynmanKacForm::Plain => 0.5 * ds * (a * a + c0 * a + b * b + c1 * b),
                FeynmanKacForm::Exponential => ds * (-k_mid).exp() * 0.5 * (a * a + b * b),
            };
            killing += 0.5 * ds * (c0 + c1);
            std::mem::swap(&mut pos, &mut next);
            while probe < spec.probe.times.len() && spec.probe.times[probe] <= s1 + 1e-12 {
                let f = spec.probe.functions[probe].eval(&pos);
                total += match form {
                    FeynmanKacForm::Plain => f,
                    FeynmanKacForm::Exponential => f * (-killing).exp(),
                };
                probe += 1;
            }
        }
        Ok(total)
    })?;
    let residuals: Vec<f64> = rhs.iter().map(|v| v - w0).collect();
    Ok(EstimateWithError::from_samples(&residuals)?.with_meta("w0", w0).with_meta("form", format!("{form:?}")))
}

/// Exponential-form residual at the centre of the box.
pub fn feynman_kac_equivalence_check(
    spec: &SolveSpec,
    w: &GridFunction,
    rng: &RandomSource,
    replicates: usize,
) -> Result<EstimateWithError> {
    feynman_kac_residual(spec, w, &spec.domain.center(), FeynmanKacForm::Exponential, rng, replicates)
}

/// `exp(-<mu, w(0, .)>)`, evaluating `w` at the cell of each atom; a
/// uniform measure is integrated over the cells whose centres it covers.
pub fn laplace_from_w(w: &GridFunction, mu: &InitialMeasure) -> Result<f64> {
    let slice = w.at_time(0.0)?;
    let pairing = match mu {
        InitialMeasure::Atoms { atoms } => atoms
            .iter()
            .map(|a| {
                let i = w.locate(&a.position).ok_or_else(|| {
                    Error::SupportViolation(format!("atom at {:?} lies outside the grid box", a.position))
                })?;
                Ok(a.mass * slice[i])
            })
            .sum::<Result<f64>>()?,
        InitialMeasure::Uniform { region, mass } => {
            if !w.region.contains_box(region) {
                return Err(Error::SupportViolation("uniform measure extends beyond the grid box".into()));
            }
            let mut acc = 0.0;
            let mut cells = 0usize;
            for (i, v) in slice.iter().enumerate() {
                if region.contains(&w.center(i)) {
                    acc += v;
                    cells += 1;
                }
            }
            if cells == 0 {
                return Err(Error::SupportViolation("uniform measure covers no grid cell".into()));
            }
            mass * acc / cells as f64
        }
    };
    Ok((-pairing).exp())
}
