use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Least-squares line through `(log eps, log value)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRegression {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Regresses `log value` on `log eps`; needs three or more positive pairs.
pub fn rate_regression(data: &[(f64, f64)]) -> Result<RateRegression> {
    if data.len() < 3 {
        return Err(invalid(format!("rate regression needs >= 3 points, got {}", data.len())));
    }
    if let Some((e, v)) = data.iter().find(|(e, v)| !(*e > 0.0 && *v > 0.0 && e.is_finite() && v.is_finite())) {
        return Err(invalid(format!("rate regression needs positive values, got ({e}, {v})")));
    }
    let points: Vec<(f64, f64)> = data.iter().map(|(e, v)| (e.ln(), v.ln())).collect();
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("rate regression needs distinct radii"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateRegression { points, slope, intercept, r_squared })
}
