use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::scalar::Real;

/// Step-indexed parameter law (temperature, diffusion strength).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    Constant { value: f64 },
    /// `c / ln(k + 2)`.
    Logarithmic { c: f64 },
    /// `initial * ratio^k`.
    Geometric { initial: f64, ratio: f64 },
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Schedule::Constant { value } if value > 0.0 && value.is_finite() => Ok(()),
            Schedule::Logarithmic { c } if c > 0.0 && c.is_finite() => Ok(()),
            Schedule::Geometric { initial, ratio }
                if initial > 0.0 && initial.is_finite() && ratio > 0.0 && ratio.is_finite() =>
            {
                Ok(())
            }
            _ => arg(format!("schedule {self:?} must produce positive finite values")),
        }
    }

    pub fn value_at<T: Real>(&self, k: u64) -> T {
        match *self {
            Schedule::Constant { value } => T::lit(value),
            Schedule::Logarithmic { c } => log_cooling(k, T::lit(c)),
            Schedule::Geometric { initial, ratio } => T::lit(initial * ratio.powf(k as f64)),
        }
    }
}

/// Classical annealing temperature `c / ln(k + 2)`.
pub fn log_cooling<T: Real>(k: u64, c: T) -> T {
    c / T::lit((k as f64 + 2.0).ln())
}
