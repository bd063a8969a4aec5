use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inflation coefficients, one per assimilation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdaSchedule {
    pub alphas: Vec<f64>,
}

impl MdaSchedule {
    /// `n_a` assimilations with `alpha = n_a` each.
    pub fn constant(n_a: usize) -> Self {
        MdaSchedule {
            alphas: vec![n_a as f64; n_a],
        }
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }
}

pub const SCHEDULE_TOLERANCE: f64 = 1e-12;

/// Accepts iff every alpha is positive and `sum 1/alpha = 1` within 1e-12.
pub fn validate_schedule(schedule: &MdaSchedule) -> Result<()> {
    let sum: f64 = schedule.alphas.iter().map(|a| 1.0 / a).sum();
    if schedule.alphas.is_empty()
        || schedule.alphas.iter().any(|a| !(*a > 0.0 && a.is_finite()))
        || !((sum - 1.0).abs() <= SCHEDULE_TOLERANCE)
    {
        return Err(Error::InvalidSchedule { sum });
    }
    Ok(())
}
