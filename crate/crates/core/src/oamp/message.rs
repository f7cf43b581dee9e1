use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecops::all_finite;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    /// Transmitted coefficients `x = F·s`.
    X,
    /// Source samples `s`.
    S,
}

/// Mean vector with one scalar variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussMessage {
    pub mean: Vec<f64>,
    pub variance: f64,
    pub domain: Domain,
}

impl GaussMessage {
    pub fn new(mean: Vec<f64>, variance: f64, domain: Domain) -> Result<Self> {
        let msg = GaussMessage {
            mean,
            variance,
            domain,
        };
        msg.validate()?;
        Ok(msg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.variance >= 0.0 && self.variance.is_finite()) {
            return Err(Error::InvalidMessage(format!(
                "variance must be finite and >= 0, got {}",
                self.variance
            )));
        }
        if !all_finite(&self.mean) {
            return Err(Error::InvalidMessage("mean has non-finite entries".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}
