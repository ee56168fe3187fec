//! Step-size sequences `λ_n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    Constant { lambda: f64 },
    /// `λ_n = c / (n + 1)^a`
    Power { c: f64, a: f64 },
}

impl StepSchedule {
    pub fn constant(lambda: f64) -> Result<Self> {
        let s = StepSchedule::Constant { lambda };
        s.validate()?;
        Ok(s)
    }

    pub fn power(c: f64, a: f64) -> Result<Self> {
        let s = StepSchedule::Power { c, a };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSchedule::Constant { lambda } if lambda.is_finite() && lambda > 0.0 => Ok(()),
            StepSchedule::Power { c, a } if c.is_finite() && c > 0.0 && a > 0.0 && a <= 1.0 => Ok(()),
            s => Err(Error::InvalidInput(format!("invalid step schedule {s:?}"))),
        }
    }

    pub fn lambda(&self, n: usize) -> f64 {
        match *self {
            StepSchedule::Constant { lambda } => lambda,
            StepSchedule::Power { c, a } => c / ((n + 1) as f64).powf(a),
        }
    }

    /// `Σ_{n≥0} λ_n²` when it is finite.
    pub fn sum_sq_infinite(&self) -> Option<f64> {
        match *self {
            StepSchedule::Constant { .. } => None,
            StepSchedule::Power { c, a } => (a > 0.5).then(|| c * c * zeta(2.0 * a)),
        }
    }
}

/// `λ_n` for a schedule; alias kept for call sites that read better as a function.
pub fn eval_schedule(s: &StepSchedule, n: usize) -> f64 {
    s.lambda(n)
}

/// Riemann zeta for real `s > 1` by Euler–Maclaurin summation.
pub fn zeta(s: f64) -> f64 {
    assert!(s > 1.0, "zeta needs s > 1");
    const K: usize = 64;
    let head: f64 = (1..K).map(|k| (k as f64).powf(-s)).sum();
    let k = K as f64;
    let tail = k.powf(1.0 - s) / (s - 1.0) + 0.5 * k.powf(-s) + s * k.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * k.powf(-s - 3.0) / 720.0
        + s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * k.powf(-s - 5.0) / 30240.0;
    head + tail
}
