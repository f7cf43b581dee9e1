//! Nonlinear estimation: the denoiser contract and its implementations.

pub mod analytic;
pub mod bridge;
pub mod ddim;
pub mod flow;
pub mod snr;
pub mod sure;

pub use analytic::{GaussMixture, SoftThreshold};
pub use bridge::{BridgeEndpoint, BridgeHandle};
pub use ddim::{ddim_denoise, ddim_forward, ddim_reverse_step, ddim_x0_predict, DdimMode, NoisePredictor};
pub use flow::{fm_denoise, fm_integrate, VelocityFn, VelocityPredictor, FM_END_MARGIN};
pub use snr::{map_alpha_to_step, snr_match, DdimSchedule, SnrKind};
pub use sure::{mc_divergence_with, sure_orthogonalize, SureResult, EPS_FD_REL};

use crate::error::{check_len, Error, Result};
use crate::vecops::all_finite;

/// Default Euler step count for flow-matching denoising.
pub const FM_DEFAULT_STEPS: usize = 20;

pub enum PriorKind {
    /// Exact posterior mean of an i.i.d. Gaussian or Gaussian-mixture prior.
    Analytic(GaussMixture),
    SoftThreshold(SoftThreshold),
    Ddim {
        schedule: DdimSchedule,
        predictor: Box<dyn NoisePredictor>,
        mode: DdimMode,
    },
    FlowMatching {
        predictor: Box<dyn VelocityPredictor>,
        num_steps: usize,
    },
    Bridge(BridgeHandle),
}

/// A denoiser plus a running count of predictor evaluations.
pub struct NlePrior {
    kind: PriorKind,
    nfe: u64,
}

impl std::fmt::Debug for NlePrior {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "NlePrior({}, nfe = {})", self.label(), self.nfe)
    }
}

impl NlePrior {
    pub fn new(kind: PriorKind) -> Self {
        NlePrior { kind, nfe: 0 }
    }

    pub fn gaussian(mean: f64, variance: f64) -> Self {
        Self::new(PriorKind::Analytic(GaussMixture::gaussian(mean, variance)))
    }

    pub fn mixture(gm: GaussMixture) -> Self {
        Self::new(PriorKind::Analytic(gm))
    }

    pub fn soft_threshold(st: SoftThreshold) -> Self {
        Self::new(PriorKind::SoftThreshold(st))
    }

    pub fn ddim(schedule: DdimSchedule, predictor: Box<dyn NoisePredictor>, mode: DdimMode) -> Self {
        Self::new(PriorKind::Ddim {
            schedule,
            predictor,
            mode,
        })
    }

    pub fn flow_matching(predictor: Box<dyn VelocityPredictor>, num_steps: usize) -> Self {
        Self::new(PriorKind::FlowMatching {
            predictor,
            num_steps,
        })
    }

    pub fn bridge(handle: BridgeHandle) -> Self {
        Self::new(PriorKind::Bridge(handle))
    }

    pub fn kind(&self) -> &PriorKind {
        &self.kind
    }

    pub fn nfe(&self) -> u64 {
        self.nfe
    }

    pub fn reset_nfe(&mut self) {
        self.nfe = 0;
    }

    pub fn label(&self) -> &'static str {
        match &self.kind {
            PriorKind::Analytic(gm) if gm.weights().len() == 1 => "gaussian",
            PriorKind::Analytic(_) => "gmm",
            PriorKind::SoftThreshold(_) => "soft-threshold",
            PriorKind::Ddim { .. } => "ddim",
            PriorKind::FlowMatching { .. } => "flow-matching",
            PriorKind::Bridge(_) => "bridge",
        }
    }

    /// Time axis this prior is matched on.
    pub fn snr_kind(&self) -> SnrKind {
        match self.kind {
            PriorKind::FlowMatching { .. } => SnrKind::FlowMatching,
            _ => SnrKind::Ddim,
        }
    }

    /// Raw denoiser output `φ(s_in, t*)`.
    pub fn denoise(&mut self, s_in: &[f64], t_star: f64, v: f64) -> Result<Vec<f64>> {
        let (out, calls) = match &mut self.kind {
            PriorKind::Analytic(gm) => (gm.posterior_mean(s_in, v), 1),
            PriorKind::SoftThreshold(st) => (st.denoise(s_in, v)?, 1),
            PriorKind::Ddim {
                schedule,
                predictor,
                mode,
            } => ddim_denoise(predictor.as_ref(), schedule, s_in, t_star, *mode)?,
            PriorKind::FlowMatching {
                predictor,
                num_steps,
            } => fm_denoise(predictor.as_ref(), s_in, t_star, *num_steps)?,
            PriorKind::Bridge(h) => (h.denoise(s_in, t_star, v)?, 1),
        };
        self.nfe += calls;
        check_len("denoiser output", out.len(), s_in.len())?;
        if !all_finite(&out) {
            return Err(Error::Nle(format!("{} produced non-finite output", self.label())));
        }
        Ok(out)
    }

    /// Single-probe divergence of `φ(·, t*)` at `s_in`.
    pub fn mc_divergence(
        &mut self,
        s_in: &[f64],
        phi_at_s: &[f64],
        t_star: f64,
        v: f64,
        eps_fd: f64,
        seed: u64,
    ) -> Result<f64> {
        mc_divergence_with(|x| self.denoise(x, t_star, v), s_in, phi_at_s, eps_fd, seed)
    }

    /// `φ`, its divergence with `eps_fd = EPS_FD_REL·√v`, and `φ⊥`.
    pub fn denoise_orthogonal(&mut self, s_in: &[f64], t_star: f64, v: f64, seed: u64) -> Result<SureResult> {
        let phi = self.denoise(s_in, t_star, v)?;
        let eps_fd = EPS_FD_REL * v.max(f64::MIN_POSITIVE).sqrt();
        let div = self.mc_divergence(s_in, &phi, t_star, v, eps_fd, seed)?;
        sure_orthogonalize(phi, div, s_in)
    }
}
