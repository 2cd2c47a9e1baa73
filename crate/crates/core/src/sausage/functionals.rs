//! Nested Monte Carlo for the mean-square error `h(eps)` and the bias
//! `v(eps, z)` of the scaled weighted sausage against its limit.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::obstacle::sd_scale;
use crate::rng::{par_replicates, RandomSource};
use crate::stats::{std_dev, EstimateWithError};
use crate::stochastic::IntensityField;

use super::volume::{kd_constant, stream_sausages};

/// Inner hit-or-miss error is flagged when it exceeds this fraction of the
/// spread across paths.
const INNER_SHARE: f64 = 0.1;

/// Per-path scaled weighted sausages `A_k = s_d(eps_k) int_{S_{eps_k}(0,t)} c`
/// at every radius, their hit-or-miss standard errors, and the limit
/// `B = k_d int_0^t c(xi_s) ds`, all along common paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SausageSweep {
    pub radii: Vec<f64>,
    pub horizon: f64,
    pub step: f64,
    pub samples: usize,
    pub paths: Vec<PathSausages>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSausages {
    pub scaled: Vec<f64>,
    pub scaled_se: Vec<f64>,
    pub limit: f64,
}

/// Runs the common-path sweep; see [`SausageSweep`]. `samples` is the cloud
/// size at the smallest radius.
#[allow(clippy::too_many_arguments)]
pub fn sausage_sweep(
    c: &IntensityField,
    radii: &[f64],
    x: &[f64],
    t: f64,
    rng: &RandomSource,
    replicates: usize,
    samples: usize,
) -> Result<SausageSweep> {
    c.validate()?;
    let dim = x.len();
    if dim < 2 || radii.is_empty() || replicates < 2 || !(t > 0.0) {
        return Err(invalid("need d >= 2, t > 0, some radii and at least two replicates"));
    }
    let scales = radii.iter().map(|&r| sd_scale(r, dim)).collect::<Result<Vec<_>>>()?;
    let kd = kd_constant(dim)?;
    let min_r = radii.iter().cloned().fold(f64::INFINITY, f64::min);
    let step = (min_r / 5.0).powi(2);
    let paths = if c.is_zero() {
        let zero = PathSausages { scaled: vec![0.0; radii.len()], scaled_se: vec![0.0; radii.len()], limit: 0.0 };
        vec![zero; replicates]
    } else {
        par_replicates(rng, replicates, |_, rng| {
            let s = stream_sausages(&rng.derive(0), &rng.derive(1), x, 0.0, t, step, radii, samples, true, Some(c))?;
            let (scaled, scaled_se) = (0..radii.len())
                .map(|k| {
                    let e = s.integral(k, Some(c));
                    (scales[k] * e.mean, scales[k] * e.std_error)
                })
                .unzip();
            Ok(PathSausages { scaled, scaled_se, limit: kd * s.time_integral.unwrap_or(0.0) })
        })?
    };
    Ok(SausageSweep { radii: radii.to_vec(), horizon: t, step, samples, paths })
}

impl SausageSweep {
    fn summarize(&self, k: usize, vals: &[f64], spread: impl Fn(f64) -> f64) -> Result<EstimateWithError> {
        let n = self.paths.len() as f64;
        let inner = (self.paths.iter().map(|p| p.scaled_se[k].powi(2)).sum::<f64>() / n).sqrt();
        let outer = std_dev(vals);
        Ok(EstimateWithError::from_samples(vals)?
            .with_meta("eps", self.radii[k])
            .with_meta("step", self.step)
            .with_meta("samples", self.samples)
            .with_meta("inner_se_rms", inner)
            .with_meta("outer_sd", outer)
            .with_meta("inner_dominates", inner > INNER_SHARE * spread(outer)))
    }

    /// Mean of `A_k / t`; for `c = 1` this is the capacity estimate
    /// `s_d(eps) lambda(S_eps(0,t)) / t`.
    pub fn scaled_mean(&self, k: usize) -> Result<EstimateWithError> {
        let vals: Vec<f64> = self.paths.iter().map(|p| p.scaled[k] / self.horizon).collect();
        self.summarize(k, &vals, |o| o)
    }

    /// `h(eps_k) = E[(A_k - B)^2]`, with the inner hit-or-miss variance
    /// subtracted per path so the estimate is unbiased (and may come out
    /// slightly negative when `h` is tiny).
    pub fn h(&self, k: usize) -> Result<EstimateWithError> {
        let vals: Vec<f64> =
            self.paths.iter().map(|p| (p.scaled[k] - p.limit).powi(2) - p.scaled_se[k].powi(2)).collect();
        self.summarize(k, &vals, |o| o.max(f64::MIN_POSITIVE).sqrt())
    }

    /// `E[A_k - B]`.
    pub fn bias(&self, k: usize) -> Result<EstimateWithError> {
        let vals: Vec<f64> = self.paths.iter().map(|p| p.scaled[k] - p.limit).collect();
        self.summarize(k, &vals, |o| o)
    }

    pub fn all(&self, f: impl Fn(&Self, usize) -> Result<EstimateWithError>) -> Result<Vec<EstimateWithError>> {
        (0..self.radii.len()).map(|k| f(self, k)).collect()
    }
}

/// `h(eps) = E_x[(s_d(eps) int_{S_eps(0,t)} c - k_d int_0^t c(xi_s) ds)^2]`.
/// The inner hit-or-miss variance is subtracted per path, so the estimate is
/// unbiased for `h` (and may come out slightly negative when `h` is tiny).
pub fn l2_error_h(
    c: &IntensityField,
    eps: f64,
    x: &[f64],
    t: f64,
    rng: &RandomSource,
    replicates: usize,
    samples: usize,
) -> Result<EstimateWithError> {
    sausage_sweep(c, &[eps], x, t, rng, replicates, samples)?.h(0)
}

/// `h(eps)` at several radii along common paths.
pub fn l2_error_sweep(
    c: &IntensityField,
    radii: &[f64],
    x: &[f64],
    t: f64,
    rng: &RandomSource,
    replicates: usize,
    samples: usize,
) -> Result<Vec<EstimateWithError>> {
    sausage_sweep(c, radii, x, t, rng, replicates, samples)?.all(SausageSweep::h)
}

/// `v(eps, z) = E_z[s_d(eps) int_{S_eps(0,1/2)} c - k_d int_0^{1/2} c(xi_s) ds]`.
pub fn v_bias_estimate(
    c: &IntensityField,
    eps: f64,
    z: &[f64],
    rng: &RandomSource,
    replicates: usize,
    samples: usize,
) -> Result<EstimateWithError> {
    Ok(v_bias_sweep(c, &[eps], z, rng, replicates, samples)?.remove(0))
}

/// `v(eps, z)` at several radii along common paths.
pub fn v_bias_sweep(
    c: &IntensityField,
    radii: &[f64],
    z: &[f64],
    rng: &RandomSource,
    replicates: usize,
    samples: usize,
) -> Result<Vec<EstimateWithError>> {
    sausage_sweep(c, radii, z, 0.5, rng, replicates, samples)?.all(SausageSweep::bias)
}
