//! Monte Carlo summaries and the handful of statistical tests the suite uses.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Point estimate with its standard error, the universal result carrier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithError {
    pub mean: f64,
    pub std_error: f64,
    pub replicates: usize,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl EstimateWithError {
    /// Mean and `sd / sqrt(n)` of the samples.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("no samples"));
        }
        let mut acc = MeanVar::default();
        samples.iter().for_each(|x| acc.push(*x));
        Ok(acc.estimate())
    }

    /// A value known without sampling error.
    pub fn exact(value: f64, replicates: usize) -> Self {
        Self {
            mean: value,
            std_error: 0.0,
            replicates: replicates.max(1),
            meta: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    /// Multiplies mean and standard error by `k`.
    pub fn scaled(mut self, k: f64) -> Self {
        self.mean *= k;
        self.std_error *= k.abs();
        self
    }

    /// `[mean - z se, mean + z se]`
    pub fn interval(&self, z: f64) -> (f64, f64) {
        (self.mean - z * self.std_error, self.mean + z * self.std_error)
    }

    /// |mean - target| measured in standard errors (infinite when se = 0 and they differ).
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if d == 0.0 {
            0.0
        } else if self.std_error == 0.0 {
            f64::INFINITY
        } else {
            d / self.std_error
        }
    }

    pub fn relative_error(&self, target: f64) -> f64 {
        (self.mean - target).abs() / target.abs()
    }
}

/// Welford running mean and variance; `merge` is associative.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MeanVar {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanVar {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &MeanVar) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * self.n as f64 * other.n as f64 / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance (0 for fewer than two samples).
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }

    pub fn estimate(&self) -> EstimateWithError {
        EstimateWithError {
            mean: self.mean,
            std_error: self.std_error(),
            replicates: self.n as usize,
            meta: BTreeMap::new(),
        }
    }
}

/// Central sample moments of orders 2, 3 and 4 (divided by n).
pub fn central_moments(xs: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    (mean, m2 / n, m3 / n, m4 / n)
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Sample standard deviation (n - 1 denominator).
pub fn std_dev(xs: &[f64]) -> f64 {
    let mut acc = MeanVar::default();
    xs.iter().for_each(|x| acc.push(*x));
    acc.variance().sqrt()
}

/// Result of a two-sample Kolmogorov-Smirnov test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// Asymptotic Kolmogorov survival function `Q(lambda)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample KS test with the Stephens small-sample correction.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTest> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("KS test needs two nonempty samples"));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(|p, q| p.total_cmp(q));
    y.sort_by(|p, q| p.total_cmp(q));
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    let p = kolmogorov_q((en + 0.12 + 0.11 / en) * d);
    Ok(KsTest {
        statistic: d,
        p_value: p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomSource;

    #[test]
    fn welford_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut all = MeanVar::default();
        xs.iter().for_each(|x| all.push(*x));
        let mut a = MeanVar::default();
        let mut b = MeanVar::default();
        xs[..37].iter().for_each(|x| a.push(*x));
        xs[37..].iter().for_each(|x| b.push(*x));
        a.merge(&b);
        assert!((a.mean() - all.mean()).abs() < 1e-14);
        assert!((a.variance() - all.variance()).abs() < 1e-13);
    }

    #[test]
    fn std_error_definition() {
        let e = EstimateWithError::from_samples(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((e.std_error - sd / 2.0).abs() < 1e-14);
        assert_eq!(e.replicates, 4);
    }

    #[test]
    fn ks_same_distribution_not_rejected() {
        let mut r = RandomSource::new(1, 1);
        let a: Vec<f64> = (0..2000).map(|_| r.normal()).collect();
        let b: Vec<f64> = (0..2000).map(|_| r.normal()).collect();
        assert!(ks_two_sample(&a, &b).unwrap().p_value > 0.01);
        let c: Vec<f64> = (0..2000).map(|_| r.normal() + 0.3).collect();
        assert!(ks_two_sample(&a, &c).unwrap().p_value < 1e-6);
    }

    #[test]
    fn moments_of_symmetric_set() {
        let (m, m2, m3, m4) = central_moments(&[-1.0, 1.0]);
        assert_eq!((m, m2, m3, m4), (0.0, 1.0, 0.0, 1.0));
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }
}
