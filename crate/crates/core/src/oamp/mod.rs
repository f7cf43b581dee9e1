//! Receiver: messages, linear estimation and the outer OAMP loop.

pub mod linear;
pub mod message;
pub mod receiver;
pub mod trace;

pub use linear::{
    check_convergence, init_state, lmmse_estimate, mmse_beta, mmse_correction, orthogonalize,
    residual_energy,
};
pub use message::{Domain, GaussMessage};
pub use receiver::{lmmse_baseline, run_receiver, ReceiverOutput};
pub use trace::{Fault, IterationRecord, IterationTrace, Termination, TRACE_CSV_HEADER};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimension the LMMSE covariance trace is averaged over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TraceDivisor {
    /// Per transmitted coefficient. The message lives on `x` and the
    /// untransmitted source coefficients are zero-filled.
    #[default]
    M,
    /// Per source sample. The message is lifted to `s`: untransmitted
    /// coefficients keep the previous source estimate and its variance.
    N,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverConfig {
    pub max_iters: usize,
    pub tolerance: f64,
    pub variance_floor: f64,
    pub trace_divisor: TraceDivisor,
    pub subtract_noise_floor: bool,
    /// Weight on the previous mean; 0 disables damping.
    pub damping: f64,
    pub divergence_seed: u64,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        ReceiverConfig {
            max_iters: 10,
            tolerance: 1e-4,
            variance_floor: 1e-9,
            trace_divisor: TraceDivisor::M,
            subtract_noise_floor: false,
            damping: 0.0,
            divergence_seed: 0x5eed,
        }
    }
}

impl ReceiverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be > 0".into()));
        }
        if !(self.variance_floor > 0.0) {
            return Err(Error::InvalidParameter("variance_floor must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::InvalidParameter("damping must lie in [0, 1)".into()));
        }
        Ok(())
    }
}
