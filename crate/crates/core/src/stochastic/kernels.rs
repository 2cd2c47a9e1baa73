use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::geometry::dist2;

/// Gamma function at `n / 2` for a positive integer `n`.
pub fn gamma_half(n: u32) -> f64 {
    assert!(n > 0, "gamma_half needs n >= 1");
    let (mut g, mut x) = if n % 2 == 0 { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    let target = n as f64 / 2.0;
    while x < target - 0.25 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Transition density `(2 pi s)^{-d/2} exp(-|x - z|^2 / 2s)` of standard
/// Brownian motion (generator one half of the Laplacian).
pub fn heat_kernel(s: f64, x: &[f64], z: &[f64]) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(invalid(format!("heat kernel needs s > 0, got {s}")));
    }
    if x.len() != z.len() {
        return Err(invalid("heat kernel arguments differ in dimension"));
    }
    let d = x.len() as f64;
    Ok((2.0 * PI * s).powf(-d / 2.0) * (-dist2(x, z) / (2.0 * s)).exp())
}

/// `c_d = Gamma(d/2 - 1) / (2 pi^{d/2})`, the Green function prefactor.
pub fn green_constant(dim: usize) -> Result<f64> {
    if dim < 3 {
        return Err(Error::Unsupported(format!(
            "Green function diverges in dimension {dim}"
        )));
    }
    Ok(gamma_half(dim as u32 - 2) / (2.0 * PI.powf(dim as f64 / 2.0)))
}

/// Green function `c_d |z|^{2-d}` of d-dimensional Brownian motion, d >= 3.
pub fn green_function(z: &[f64]) -> Result<f64> {
    let c = green_constant(z.len())?;
    let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(Error::Singularity("Green function at the origin".into()));
    }
    Ok(c * r.powf(2.0 - z.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Integral of the heat kernel over s in (0, inf) by trapezoid in log s.
    fn green_by_quadrature(r: f64, d: usize) -> f64 {
        let (a, b, n) = (-40.0_f64, 40.0_f64, 40_000);
        let h = (b - a) / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let u = a + i as f64 * h;
            let s = u.exp();
            let f = (2.0 * PI * s).powf(-(d as f64) / 2.0) * (-r * r / (2.0 * s)).exp() * s;
            acc += if i == 0 || i == n { 0.5 * f } else { f };
        }
        acc * h
    }

    #[test]
    fn gamma_half_values() {
        assert!((gamma_half(1) - PI.sqrt()).abs() < 1e-14);
        assert!((gamma_half(2) - 1.0).abs() < 1e-14);
        assert!((gamma_half(3) - 0.5 * PI.sqrt()).abs() < 1e-14);
        assert!((gamma_half(8) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn heat_kernel_on_diagonal() {
        let v = heat_kernel(1.0, &[0.3, 0.1], &[0.3, 0.1]).unwrap();
        assert!((v - 1.0 / (2.0 * PI)).abs() < 1e-12);
        assert!((v - 0.159155).abs() < 1e-6);
    }

    #[test]
    fn heat_kernel_direct_evaluation() {
        // s = 0.5, |x - z| = 1, d = 3: pi^{-3/2} e^{-1}
        let v = heat_kernel(0.5, &[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0]).unwrap();
        let oracle = PI.powf(-1.5) * (-1.0f64).exp();
        assert!((v - oracle).abs() < 1e-14);
        assert!((v - 0.066066).abs() < 1e-6);
    }

    #[test]
    fn heat_kernel_rejects_nonpositive_time() {
        assert!(heat_kernel(0.0, &[0.0, 0.0], &[0.0, 0.0]).is_err());
        assert!(heat_kernel(-1.0, &[0.0, 0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn heat_kernel_integrates_to_one() {
        let h = 0.01;
        let x = [0.2, -0.1];
        let mut acc = 0.0;
        for i in -600..=600 {
            for j in -600..=600 {
                let z = [i as f64 * h, j as f64 * h];
                acc += heat_kernel(0.3, &x, &z).unwrap() * h * h;
            }
        }
        assert!((acc - 1.0).abs() < 1e-3);
    }

    #[test]
    fn chapman_kolmogorov_on_grid() {
        let h = 0.02;
        let (x, y) = ([0.1, 0.0], [0.4, -0.3]);
        let (s, t) = (0.2, 0.3);
        let mut acc = 0.0;
        for i in -200..=200 {
            for j in -200..=200 {
                let z = [i as f64 * h, j as f64 * h];
                acc += heat_kernel(s, &x, &z).unwrap() * heat_kernel(t, &z, &y).unwrap() * h * h;
            }
        }
        let direct = heat_kernel(s + t, &x, &y).unwrap();
        assert!((acc - direct).abs() < 1e-3);
    }

    #[test]
    fn green_matches_quadrature() {
        let g3 = green_function(&[1.0, 0.0, 0.0]).unwrap();
        assert!((g3 - 1.0 / (2.0 * PI)).abs() < 1e-14);
        assert!((g3 - green_by_quadrature(1.0, 3)).abs() < 1e-6);
        let g3_far = green_function(&[0.0, 2.0, 0.0]).unwrap();
        assert!((g3_far - 0.5 * g3).abs() < 1e-15);
        let g4 = green_function(&[0.0, 0.0, 1.0, 0.0]).unwrap();
        assert!((g4 - 1.0 / (2.0 * PI * PI)).abs() < 1e-14);
        assert!((g4 - green_by_quadrature(1.0, 4)).abs() < 1e-6);
        let g5 = green_function(&[0.0, 0.0, 0.7, 0.0, 0.0]).unwrap();
        assert!((g5 - green_by_quadrature(0.7, 5)).abs() < 1e-6);
    }

    #[test]
    fn green_errors() {
        assert!(matches!(green_function(&[0.0, 0.0, 0.0]), Err(Error::Singularity(_))));
        assert!(matches!(green_function(&[1.0, 0.0]), Err(Error::Unsupported(_))));
    }
}
