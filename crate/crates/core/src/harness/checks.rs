use serde::{Deserialize, Serialize};

/// A pass/fail rule for one summary row, stored in the config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Check {
    /// `|estimate - target| <= tol |target|`
    Relative { tol: f64 },
    /// `|estimate - target| <= tol`
    Absolute { tol: f64 },
    /// `|estimate - target| <= k std_error`
    Sigmas { k: f64 },
    /// `|estimate - target| <= max(k std_error, tol |target|)`
    RelativeOrSigmas { tol: f64, k: f64 },
    /// `|estimate - target| <= max(k std_error, tol)`
    AbsoluteOrSigmas { tol: f64, k: f64 },
    /// `lo <= estimate <= hi`
    Range { lo: f64, hi: f64 },
    /// `estimate <= max`
    AtMost { max: f64 },
    /// `estimate < max`
    Below { max: f64 },
    /// Reported, never judged.
    Info,
}

impl Check {
    pub fn validate(&self) -> Result<(), String> {
        let ok = match *self {
            Self::Relative { tol } | Self::Absolute { tol } => tol >= 0.0 && tol.is_finite(),
            Self::Sigmas { k } => k >= 0.0 && k.is_finite(),
            Self::RelativeOrSigmas { tol, k } | Self::AbsoluteOrSigmas { tol, k } => tol >= 0.0 && k >= 0.0 && tol.is_finite() && k.is_finite(),
            Self::Range { lo, hi } => lo <= hi,
            Self::AtMost { max } | Self::Below { max } => !max.is_nan(),
            Self::Info => true,
        };
        if ok {
            Ok(())
        } else {
            Err(format!("invalid threshold {self:?}"))
        }
    }

    /// `None` when the rule does not judge, or needs a target that is absent.
    pub fn evaluate(&self, estimate: f64, std_error: f64, target: Option<f64>) -> Option<bool> {
        if !estimate.is_finite() {
            return match self {
                Self::Info => None,
                _ => Some(false),
            };
        }
        let gap = target.map(|t| (estimate - t).abs());
        match *self {
            Self::Relative { tol } => Some(gap? <= tol * target?.abs()),
            Self::Absolute { tol } => Some(gap? <= tol),
            Self::Sigmas { k } => Some(gap? <= k * std_error),
            Self::RelativeOrSigmas { tol, k } => Some(gap? <= (k * std_error).max(tol * target?.abs())),
            Self::AbsoluteOrSigmas { tol, k } => Some(gap? <= (k * std_error).max(tol)),
            Self::Range { lo, hi } => Some(estimate >= lo && estimate <= hi),
            Self::AtMost { max } => Some(estimate <= max),
            Self::Below { max } => Some(estimate < max),
            Self::Info => None,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Self::Relative { tol } => format!("rel {tol}"),
            Self::Absolute { tol } => format!("abs {tol}"),
            Self::Sigmas { k } => format!("{k} se"),
            Self::RelativeOrSigmas { tol, k } => format!("max(rel {tol}, {k} se)"),
            Self::AbsoluteOrSigmas { tol, k } => format!("max(abs {tol}, {k} se)"),
            Self::Range { lo, hi } => format!("[{lo}, {hi}]"),
            Self::AtMost { max } => format!("<= {max}"),
            Self::Below { max } => format!("< {max}"),
            Self::Info => "info".into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules() {
        assert_eq!(Check::Relative { tol: 0.05 }.evaluate(6.7, 0.1, Some(6.2832)), Some(false));
        assert_eq!(Check::Relative { tol: 0.05 }.evaluate(6.4, 0.1, Some(6.2832)), Some(true));
        assert_eq!(Check::Relative { tol: 0.05 }.evaluate(6.4, 0.1, None), None);
        assert_eq!(Check::Sigmas { k: 3.0 }.evaluate(1.2, 0.1, Some(1.0)), Some(true));
        assert_eq!(Check::Sigmas { k: 3.0 }.evaluate(1.4, 0.1, Some(1.0)), Some(false));
        assert_eq!(Check::RelativeOrSigmas { tol: 0.25, k: 3.0 }.evaluate(1.2, 0.01, Some(1.0)), Some(true));
        assert_eq!(Check::AbsoluteOrSigmas { tol: 1e-3, k: 3.0 }.evaluate(-4e-6, 1e-7, Some(0.0)), Some(true));
        assert_eq!(Check::AbsoluteOrSigmas { tol: 1e-3, k: 3.0 }.evaluate(0.5, 0.1, Some(0.0)), Some(false));
        assert_eq!(Check::Range { lo: 1.4, hi: 2.2 }.evaluate(1.65, 0.1, None), Some(true));
        assert_eq!(Check::AtMost { max: 0.0 }.evaluate(f64::NAN, 0.0, None), Some(false));
        assert_eq!(Check::Below { max: 1.0 }.evaluate(1.0, 0.0, None), Some(false));
        assert_eq!(Check::AtMost { max: 1.0 }.evaluate(1.0, 0.0, None), Some(true));
        assert_eq!(Check::Info.evaluate(1.0, 0.0, Some(2.0)), None);
        assert!(Check::Relative { tol: -1.0 }.validate().is_err());
    }
}
