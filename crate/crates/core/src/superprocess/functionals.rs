//! Laplace functionals, total-mass moments, pathwise domination and the
//! quadratic variation of `<X_t, phi>`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::stats::{central_moments, EstimateWithError, MeanVar};
use crate::stochastic::IntensityField;

use super::system::Run;

/// Times `t_1 < ... < t_p` and bounded nonnegative test functions `f_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaplaceProbe {
    pub times: Vec<f64>,
    pub functions: Vec<IntensityField>,
}

impl LaplaceProbe {
    pub fn new(times: Vec<f64>, functions: Vec<IntensityField>) -> Result<Self> {
        let p = Self { times, functions };
        p.validate()?;
        Ok(p)
    }

    /// `f = lambda * 1` at a single time.
    pub fn constant(t: f64, lambda: f64) -> Result<Self> {
        Self::new(vec![t], vec![IntensityField::constant(lambda)?])
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.is_empty() || self.times.len() != self.functions.len() {
            return Err(invalid("a probe needs one test function per time, and at least one time"));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) || !(self.times[0] > 0.0) {
            return Err(invalid("probe times must be positive and increasing"));
        }
        self.functions.iter().try_for_each(|f| f.validate())
    }

    /// `C_f = sum_i ||f_i||`
    pub fn norm_sum(&self) -> f64 {
        self.functions.iter().map(|f| f.bound()).sum()
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// `sum_i <X_{t_i}, f_i>` along one run.
    pub fn exponent(&self, run: &Run) -> Result<f64> {
        self.times
            .iter()
            .zip(&self.functions)
            .map(|(&t, f)| Ok(run.snapshot_at(t)?.pair(f)))
            .sum()
    }
}

/// Empirical `E[exp(-sum_i <X_{t_i}, f_i>)]` over independent runs.
pub fn laplace_functional(runs: &[Run], probe: &LaplaceProbe) -> Result<EstimateWithError> {
    probe.validate()?;
    if runs.is_empty() {
        return Err(invalid("no runs"));
    }
    let mut acc = MeanVar::default();
    for run in runs {
        acc.push((-probe.exponent(run)?).exp());
    }
    Ok(acc.estimate())
}

/// `E[exp(-lambda Y)]` from samples of the total mass `Y`.
pub fn laplace_of_masses(masses: &[f64], lambda: f64) -> Result<EstimateWithError> {
    let v: Vec<f64> = masses.iter().map(|m| (-lambda * m).exp()).collect();
    EstimateWithError::from_samples(&v)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassMoments {
    pub mean: f64,
    pub var: f64,
    pub m3: f64,
    pub m4: f64,
    pub replicates: usize,
    /// Standard errors of the mean, variance and fourth moment estimates.
    pub se_mean: f64,
    pub se_var: f64,
    pub se_m4: f64,
}

/// Central sample moments of `<X_t, 1>` across replicates. `y` is the
/// initial mass, used only to centre the moment standard errors.
pub fn total_mass_moments(masses: &[f64], y: f64) -> Result<MassMoments> {
    let n = masses.len();
    if n < 2 {
        return Err(invalid("need at least two replicates"));
    }
    if !y.is_finite() {
        return Err(invalid("initial mass must be finite"));
    }
    let (mean, var, m3, m4) = central_moments(masses);
    let nf = n as f64;
    // delta-method errors from the empirical higher moments
    let dev: Vec<f64> = masses.iter().map(|m| m - mean).collect();
    let m5 = dev.iter().map(|d| d.powi(5)).sum::<f64>() / nf;
    let m8 = dev.iter().map(|d| d.powi(8)).sum::<f64>() / nf;
    let se_var = ((m4 - var * var).max(0.0) / nf).sqrt();
    let se_m4 = ((m8 - m4 * m4 - 8.0 * m3 * m5 + 16.0 * var * m3 * m3).max(0.0) / nf).sqrt();
    Ok(MassMoments {
        mean,
        var,
        m3,
        m4,
        replicates: n,
        se_mean: (var / nf).sqrt(),
        se_var,
        se_m4,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub holds: bool,
    pub snapshots: usize,
    /// Times at which the killed mass exceeded the free mass, or a killed
    /// particle was missing from the free run.
    pub violations: Vec<f64>,
    pub free_mass: Vec<f64>,
    pub killed_mass: Vec<f64>,
}

/// Pathwise `<X^killed_t, 1> <= <X^free_t, 1>` at every snapshot, plus the
/// stronger check that every surviving killed particle is alive in the free
/// run. Both runs must come from the same source and tree.
pub fn domination_check(free: &Run, killed: &Run) -> Result<DominationReport> {
    if free.genealogy != killed.genealogy {
        return Err(Error::GenealogyMismatch(format!(
            "{:?} vs {:?}",
            free.genealogy, killed.genealogy
        )));
    }
    let mut violations = Vec::new();
    let mut free_mass = Vec::new();
    let mut killed_mass = Vec::new();
    for (a, b) in free.snapshots.iter().zip(&killed.snapshots) {
        let mut labels = a.labels.clone();
        labels.sort_unstable();
        let subset = b.labels.iter().all(|l| labels.binary_search(l).is_ok());
        if b.total_mass() > a.total_mass() || !subset {
            violations.push(a.time);
        }
        free_mass.push(a.total_mass());
        killed_mass.push(b.total_mass());
    }
    Ok(DominationReport {
        holds: violations.is_empty(),
        snapshots: free.snapshots.len(),
        violations,
        free_mass,
        killed_mass,
    })
}

/// Compares `E[M_t^2]` with `E[2 int_0^t <X_r, phi^2> dr]`, where
/// `M_t = <X_t,phi> - <X_0,phi> - int_0^t <X_r, Delta phi / 2> dr`, with time
/// integrals by the trapezoid rule over the snapshots. Returns the ratio
/// realized / predicted with a delta-method standard error.
pub fn quadratic_variation_check(runs: &[Run], phi: &IntensityField) -> Result<EstimateWithError> {
    if runs.len() < 2 {
        return Err(invalid("need at least two runs"));
    }
    let mut realized = Vec::with_capacity(runs.len());
    let mut predicted = Vec::with_capacity(runs.len());
    for run in runs {
        let s = &run.snapshots;
        if s.len() < 2 || s[0].time != 0.0 {
            return Err(invalid("need dense snapshots starting at time 0"));
        }
        let mut drift = 0.0;
        let mut qv = 0.0;
        let mut prev: Option<(f64, f64, f64)> = None;
        for snap in s {
            let lap = snap
                .particles()
                .map(|x| phi.half_laplacian(x))
                .sum::<Result<f64>>()?
                * snap.unit_mass;
            let sq = snap.integrate(|x| phi.eval(x).powi(2));
            if let Some((t0, l0, q0)) = prev {
                let dt = snap.time - t0;
                drift += 0.5 * dt * (l0 + lap);
                qv += 0.5 * dt * (q0 + sq);
            }
            prev = Some((snap.time, lap, sq));
        }
        let m = s[s.len() - 1].pair(phi) - s[0].pair(phi) - drift;
        realized.push(m * m);
        predicted.push(2.0 * qv);
    }
    let n = runs.len() as f64;
    let (ma, mb) = (mean(&realized), mean(&predicted));
    if mb == 0.0 {
        let r = EstimateWithError::from_samples(&realized)?;
        return Ok(r.with_meta("predicted", 0.0));
    }
    let cov = |x: &[f64], mx: f64, y: &[f64], my: f64| {
        x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1.0)
    };
    let (vaa, vbb, vab) = (
        cov(&realized, ma, &realized, ma),
        cov(&predicted, mb, &predicted, mb),
        cov(&realized, ma, &predicted, mb),
    );
    let ratio = ma / mb;
    let var = (vaa - 2.0 * ratio * vab + ratio * ratio * vbb) / (mb * mb * n);
    Ok(EstimateWithError {
        mean: ratio,
        std_error: var.max(0.0).sqrt(),
        replicates: runs.len(),
        meta: Default::default(),
    }
    .with_meta("realized", ma)
    .with_meta("predicted", mb))
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
