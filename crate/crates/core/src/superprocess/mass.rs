//! Exact sampling of the total particle count.
//!
//! Without spatial killing, or with a spatially constant killing rate `kappa`,
//! the particle count is a linear birth-death process (birth rate `N`, death
//! rate `N + kappa` per particle), whose law at a fixed time is explicit:
//! each ancestor leaves no descendants with probability `alpha`, otherwise a
//! geometric number with parameter `beta`.

use rand_distr::{Binomial, Distribution, Gamma, Poisson};

use crate::error::{invalid, Result};
use crate::rng::{par_replicates, RandomSource};

/// Extinction probability `alpha` and geometric ratio `beta` of a single
/// ancestor after time `t`.
pub fn birth_death_marginal(birth: f64, death: f64, t: f64) -> (f64, f64) {
    let r = birth - death;
    if r.abs() * t < 1e-9 {
        let bt = birth * t;
        return (bt / (1.0 + bt), bt / (1.0 + bt));
    }
    let rho = (r * t).exp();
    let den = birth * rho - death;
    (death * (rho - 1.0) / den, birth * (rho - 1.0) / den)
}

/// Population at time `t` of a linear birth-death process from `n0` individuals.
pub fn birth_death_population(rng: &mut RandomSource, n0: u64, birth: f64, death: f64, t: f64) -> Result<u64> {
    if !(birth >= 0.0 && death >= 0.0 && t >= 0.0) || !(birth + death).is_finite() {
        return Err(invalid("rates and time must be finite and >= 0"));
    }
    if n0 == 0 || t == 0.0 {
        return Ok(n0);
    }
    let (alpha, beta) = birth_death_marginal(birth, death, t);
    let survivors = if alpha <= 0.0 {
        n0
    } else if alpha >= 1.0 {
        0
    } else {
        Binomial::new(n0, 1.0 - alpha).map_err(|e| invalid(e.to_string()))?.sample(rng)
    };
    if survivors == 0 || beta <= 0.0 {
        return Ok(survivors);
    }
    // sum of `survivors` geometrics on {1, 2, ...}: survivors + NegBin(survivors, 1 - beta),
    // drawn as a Poisson-Gamma mixture
    let lambda = Gamma::new(survivors as f64, beta / (1.0 - beta))
        .map_err(|e| invalid(e.to_string()))?
        .sample(rng);
    let extra = if lambda > 0.0 {
        Poisson::new(lambda).map_err(|e| invalid(e.to_string()))?.sample(rng) as u64
    } else {
        0
    };
    Ok(survivors + extra)
}

/// Total masses `<X_t, 1>` of `replicates` independent particle systems with
/// `N` particles per unit mass, initial mass `y` and constant killing rate
/// `kappa`.
pub fn sample_total_masses(
    rng: &RandomSource,
    particles_per_mass: f64,
    kappa: f64,
    y: f64,
    t: f64,
    replicates: usize,
) -> Result<Vec<f64>> {
    if !(particles_per_mass > 0.0) || !(kappa >= 0.0) || !(y >= 0.0) {
        return Err(invalid("need N > 0, kappa >= 0, y >= 0"));
    }
    let n0 = (particles_per_mass * y - 1e-9).ceil().max(0.0) as u64;
    par_replicates(rng, replicates, |_, mut rng| {
        let n = birth_death_population(&mut rng, n0, particles_per_mass, particles_per_mass + kappa, t)?;
        Ok(n as f64 / particles_per_mass)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Single-ancestor law by forward Kolmogorov integration (RK4) on a
    /// truncated state space.
    fn kolmogorov(birth: f64, death: f64, t: f64, nmax: usize) -> Vec<f64> {
        let rhs = |p: &[f64]| -> Vec<f64> {
            let mut d = vec![0.0; p.len()];
            for n in 0..p.len() {
                let nf = n as f64;
                d[n] -= (birth + death) * nf * p[n];
                if n >= 1 {
                    d[n] += birth * (nf - 1.0) * p[n - 1];
                }
                if n + 1 < p.len() {
                    d[n] += death * (nf + 1.0) * p[n + 1];
                }
            }
            d
        };
        let mut p = vec![0.0; nmax];
        p[1] = 1.0;
        let steps = 20_000;
        let h = t / steps as f64;
        for _ in 0..steps {
            let k1 = rhs(&p);
            let a: Vec<f64> = p.iter().zip(&k1).map(|(x, k)| x + 0.5 * h * k).collect();
            let k2 = rhs(&a);
            let b: Vec<f64> = p.iter().zip(&k2).map(|(x, k)| x + 0.5 * h * k).collect();
            let k3 = rhs(&b);
            let c: Vec<f64> = p.iter().zip(&k3).map(|(x, k)| x + h * k).collect();
            let k4 = rhs(&c);
            for i in 0..nmax {
                p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        p
    }

    #[test]
    fn marginal_matches_kolmogorov_equations() {
        for (b, d, t) in [(1.0, 1.0, 0.7), (2.0, 1.2, 0.5), (1.0, 3.0, 0.4)] {
            let p = kolmogorov(b, d, t, 200);
            let (alpha, beta) = birth_death_marginal(b, d, t);
            assert!((p[0] - alpha).abs() < 1e-8, "{b} {d}: {} vs {alpha}", p[0]);
            for n in 1..20 {
                let want = (1.0 - alpha) * (1.0 - beta) * beta.powi(n as i32 - 1);
                assert!((p[n] - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn critical_count_has_constant_mean() {
        let rng = RandomSource::new(5, 5);
        let masses = sample_total_masses(&rng, 50.0, 0.0, 1.0, 0.5, 20_000).unwrap();
        let mean = masses.iter().sum::<f64>() / masses.len() as f64;
        let var = masses.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (masses.len() - 1) as f64;
        assert!((mean - 1.0).abs() < 4.0 * (var / masses.len() as f64).sqrt());
        // variance of the count process: 2 (b) t n0 / N^2 = 2 t y
        assert!((var - 1.0).abs() < 0.06, "{var}");
    }

    #[test]
    fn zero_time_and_zero_population() {
        let mut rng = RandomSource::new(1, 1);
        assert_eq!(birth_death_population(&mut rng, 7, 1.0, 1.0, 0.0).unwrap(), 7);
        assert_eq!(birth_death_population(&mut rng, 0, 1.0, 1.0, 3.0).unwrap(), 0);
    }
}
