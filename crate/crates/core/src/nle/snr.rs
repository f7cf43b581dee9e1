use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which native noise parameterization a denoiser expects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnrKind {
    /// Returns the target `ᾱ = 1/(1+v)`.
    Ddim,
    /// Returns the path time `t = 1/(1+√v)`.
    FlowMatching,
}

/// Maps the extrinsic error variance onto the sampler's time axis.
pub fn snr_match(v_orth: f64, kind: SnrKind) -> Result<f64> {
    if !(v_orth >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "variance must be >= 0, got {v_orth}"
        )));
    }
    Ok(match kind {
        SnrKind::FlowMatching => 1.0 / (1.0 + v_orth.sqrt()),
        SnrKind::Ddim => 1.0 / (1.0 + v_orth),
    })
}

/// Discrete DDIM schedule. Index 0 is the cleanest step; `alpha_bar` is
/// strictly decreasing in the index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdimSchedule {
    alpha_bar: Vec<f64>,
}

impl DdimSchedule {
    pub fn new(alpha_bar: Vec<f64>) -> Result<Self> {
        if alpha_bar.is_empty() {
            return Err(Error::InvalidParameter("schedule needs at least one step".into()));
        }
        if alpha_bar.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
            return Err(Error::InvalidParameter("schedule entries must lie in (0, 1)".into()));
        }
        if alpha_bar.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParameter("schedule must be strictly decreasing".into()));
        }
        Ok(DdimSchedule { alpha_bar })
    }

    /// `steps` entries spaced geometrically from `first` down to `last`.
    pub fn geometric(steps: usize, first: f64, last: f64) -> Result<Self> {
        if steps < 2 {
            return Err(Error::InvalidParameter("geometric schedule needs >= 2 steps".into()));
        }
        let ratio = (last / first).powf(1.0 / (steps - 1) as f64);
        Self::new((0..steps).map(|i| first * ratio.powi(i as i32)).collect())
    }

    pub fn len(&self) -> usize {
        self.alpha_bar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha_bar.is_empty()
    }

    pub fn alpha_bar(&self) -> &[f64] {
        &self.alpha_bar
    }

    pub fn at(&self, step: usize) -> f64 {
        self.alpha_bar[step]
    }
}

impl Default for DdimSchedule {
    /// 50 steps, geometric from 0.999 to 0.005.
    fn default() -> Self {
        Self::geometric(50, 0.999, 0.005).expect("default schedule is valid")
    }
}

/// Index of the entry nearest `target`; an exact midpoint goes to the
/// noisier (larger) index. Targets beyond either end clamp.
pub fn map_alpha_to_step(target_alpha_bar: f64, sched: &DdimSchedule) -> usize {
    let a = sched.alpha_bar();
    // first index whose value is <= target
    let k = a.partition_point(|&x| x > target_alpha_bar);
    if k == 0 {
        return 0;
    }
    if k == a.len() {
        return a.len() - 1;
    }
    let above = a[k - 1] - target_alpha_bar;
    let below = target_alpha_bar - a[k];
    if below <= above {
        k
    } else {
        k - 1
    }
}
