use crate::error::{Error, Result};

/// `eps_n = exp(-n^alpha)` for d = 2 and `n^{-alpha}` for d >= 3.
pub fn subsequence(alpha: f64, dim: usize, n: u32) -> Result<f64> {
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(Error::Config {
            field: "subsequence.alpha".into(),
            message: format!("alpha must exceed 1, got {alpha}"),
        });
    }
    if n == 0 {
        return Err(Error::Config { field: "subsequence.n".into(), message: "n must be >= 1".into() });
    }
    match dim {
        0 | 1 => Err(Error::Config { field: "dim".into(), message: format!("need d >= 2, got {dim}") }),
        2 => Ok((-(n as f64).powf(alpha)).exp()),
        _ => Ok((n as f64).powf(-alpha)),
    }
}

/// Whether `sum_n eps_n |log eps_n|` (d >= 3) or `sum_n 1/|log eps_n|`
/// (d = 2) converges: both reduce to `sum n^{-alpha} (log n)` or
/// `sum n^{-alpha}`, finite exactly when `alpha > 1`.
pub fn summable(alpha: f64, dim: usize) -> bool {
    dim >= 2 && alpha > 1.0 && alpha.is_finite()
}

/// Partial sum of the summability series over `n = 1..=terms`, for reports.
pub fn summability_partial_sum(alpha: f64, dim: usize, terms: u32) -> Result<f64> {
    (1..=terms)
        .map(|n| {
            let e = subsequence(alpha, dim, n)?;
            Ok(if dim == 2 { 1.0 / e.ln().abs() } else { e * e.ln().abs() })
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert!((subsequence(2.0, 3, 5).unwrap() - 0.04).abs() < 1e-15);
        assert!((subsequence(2.0, 2, 2).unwrap() - (-4.0f64).exp()).abs() < 1e-15);
        assert!((subsequence(2.0, 2, 2).unwrap() - 0.0183).abs() < 1e-4);
        assert!(matches!(subsequence(1.0, 3, 2), Err(Error::Config { .. })));
        assert!(subsequence(2.0, 3, 0).is_err());
        assert!(!summable(1.0, 3));
        assert!(summable(1.5, 2));
    }

    #[test]
    fn partial_sums_settle_for_alpha_above_one() {
        let a = summability_partial_sum(2.0, 3, 1000).unwrap();
        let b = summability_partial_sum(2.0, 3, 2000).unwrap();
        // tail of sum 2 ln n / n^2 beyond n = 1000 is about 0.016
        assert!(b > a && b - a < 1e-2);
    }
}
