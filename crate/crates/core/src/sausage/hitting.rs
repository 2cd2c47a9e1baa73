//! Hitting probabilities of small balls and occupation times, simulated with
//! clearance-adaptive time steps and bridge-corrected crossings.

use crate::error::{invalid, Error, Result};
use crate::geometry::{dist2, norm, segment_dist2};
use crate::obstacle::bridge_crossing_probability;
use crate::rng::{par_replicates, RandomSource};
use crate::stats::EstimateWithError;

/// Far from the target, a step is short enough that the path moves by at
/// most `clearance / STEP_RATIO` standard deviations.
const STEP_RATIO: f64 = 6.0;
/// Escape radius, in multiples of the starting distance, for infinite horizons.
const ESCAPE_FACTOR: f64 = 20.0;

fn adaptive_step(clearance: f64, min_step: f64) -> f64 {
    (clearance / STEP_RATIO).powi(2).max(min_step)
}

fn gaussian_step(rng: &mut RandomSource, x: &[f64], h: f64, out: &mut [f64]) {
    let sd = h.sqrt();
    for (o, v) in out.iter_mut().zip(x) {
        *o = v + sd * rng.normal();
    }
}

/// `P_0[y in S_eps(0, t)]`: the probability that Brownian motion from the
/// origin comes within `eps` of `y` by time `t`. In `d >= 3`, `t` may be
/// infinite; the walk is then stopped far away and completed with the exact
/// hitting probability `eps / |x - y|` of a ball.
pub fn point_hitting_probability(
    y: &[f64],
    eps: f64,
    t: f64,
    rng: &RandomSource,
    replicates: usize,
) -> Result<EstimateWithError> {
    let dim = y.len();
    if dim < 2 {
        return Err(invalid("need d >= 2"));
    }
    if !(eps > 0.0) || !eps.is_finite() || !(t > 0.0) || replicates == 0 {
        return Err(invalid("need eps > 0, t > 0 and at least one replicate"));
    }
    if t.is_infinite() && dim == 2 {
        return Err(Error::Unsupported("planar Brownian motion hits every ball; use a finite horizon".into()));
    }
    let r0 = norm(y);
    if r0 <= eps {
        return Ok(EstimateWithError::exact(1.0, replicates));
    }
    let min_step = (eps / 5.0).powi(2);
    let escape = ESCAPE_FACTOR * r0;
    let values = par_replicates(rng, replicates, |_, mut rng| {
        let mut x = vec![0.0; dim];
        let mut next = vec![0.0; dim];
        let mut time = 0.0;
        let mut keep = 1.0;
        let mut a = r0 - eps;
        loop {
            if t.is_infinite() {
                let r = a + eps;
                if r >= escape {
                    return Ok(1.0 - keep * (1.0 - eps / r));
                }
            } else if time >= t {
                return Ok(1.0 - keep);
            }
            let h = adaptive_step(a, min_step).min(t - time);
            gaussian_step(&mut rng, &x, h, &mut next);
            if segment_dist2(&x, &next, y) <= eps * eps {
                return Ok(1.0);
            }
            let a1 = dist2(&next, y).sqrt() - eps;
            if a.min(a1) <= 3.0 * h.sqrt() {
                keep *= 1.0 - bridge_crossing_probability(a, a1, h);
            }
            a = a1;
            time += h;
            std::mem::swap(&mut x, &mut next);
        }
    })?;
    Ok(EstimateWithError::from_samples(&values)?.with_meta("min_step", min_step))
}

/// Small-ball asymptotic of the planar hitting probability,
/// `pi / |log eps| * int_0^1 p_s(y) ds`, by adaptive Simpson quadrature.
pub fn spitzer_reference(y: &[f64], eps: f64) -> Result<f64> {
    if y.len() != 2 {
        return Err(Error::Unsupported("the small-ball asymptotic is planar".into()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("need 0 < eps < 1, got {eps}")));
    }
    let r2 = y[0] * y[0] + y[1] * y[1];
    if r2 == 0.0 {
        return Err(Error::Singularity("int_0^1 p_s(0) ds diverges".into()));
    }
    let g = |s: f64| {
        if s <= 0.0 {
            0.0
        } else {
            (-r2 / (2.0 * s)).exp() / (2.0 * std::f64::consts::PI * s)
        }
    };
    let integral = adaptive_simpson(&g, 0.0, 1.0, 1e-13, 48);
    Ok(std::f64::consts::PI / eps.ln().abs() * integral)
}

/// Adaptive Simpson quadrature. The interval is split into eight panels up
/// front so integrands that are flat near an endpoint cannot pass the first
/// error test by accident.
pub(crate) fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, ends: (f64, f64, f64), whole: f64, tol: f64, depth: u32) -> f64 {
        let (fa, fm, fb) = ends;
        let m = 0.5 * (a + b);
        let (flm, frm) = (f(0.5 * (a + m)), f(0.5 * (m + b)));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, (fa, flm, fm), left, 0.5 * tol, depth - 1)
            + rec(f, m, b, (fm, frm, fb), right, 0.5 * tol, depth - 1)
    }
    const PANELS: usize = 8;
    let w = (b - a) / PANELS as f64;
    (0..PANELS)
        .map(|k| {
            let (l, r) = (a + k as f64 * w, a + (k + 1) as f64 * w);
            let ends = (f(l), f(0.5 * (l + r)), f(r));
            let whole = w / 6.0 * (ends.0 + 4.0 * ends.1 + ends.2);
            rec(f, l, r, ends, whole, tol / PANELS as f64, depth)
        })
        .sum()
}

/// `E_a[int_0^1 1{|xi_s| <= eps} ds]` for planar Brownian motion started on
/// the circle of radius `eps`.
pub fn occupation_time_f(eps: f64, rng: &RandomSource, replicates: usize) -> Result<EstimateWithError> {
    if !(eps > 0.0 && eps < 1.0) || replicates == 0 {
        return Err(invalid("need 0 < eps < 1 and at least one replicate"));
    }
    let fine = (eps / 10.0).powi(2);
    let values = par_replicates(rng, replicates, |_, mut rng| {
        let mut x = [eps, 0.0];
        let mut next = [0.0; 2];
        let mut time = 0.0;
        let mut occ = 0.0;
        let mut inside = true;
        while time < 1.0 {
            let a = norm(&x) - eps;
            let h = adaptive_step(a.max(0.0), fine).min(1.0 - time);
            gaussian_step(&mut rng, &x, h, &mut next);
            let now_inside = norm(&next) <= eps;
            occ += 0.5 * h * (f64::from(u8::from(inside)) + f64::from(u8::from(now_inside)));
            inside = now_inside;
            time += h;
            x = next;
        }
        Ok(occ)
    })?;
    Ok(EstimateWithError::from_samples(&values)?.with_meta("leading_term", eps * eps * eps.ln().abs()))
}
