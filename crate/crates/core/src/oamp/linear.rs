//! The linear half of the receiver, all in the channel's singular basis.

use crate::channel::ChannelInstance;
use crate::error::{check_len, Error, Result};
use crate::oamp::message::{Domain, GaussMessage};
use crate::vecops::{dot, norm, norm_sq, sub};

/// `x = 0`, `v = ‖y‖²/M` (floored).
pub fn init_state(y: &[f64], variance_floor: f64) -> Result<GaussMessage> {
    if y.is_empty() {
        return Err(Error::InvalidDimension("observation is empty".into()));
    }
    let mut v = norm_sq(y) / y.len() as f64;
    if v <= variance_floor {
        log::warn!("all-zero observation; initial variance clamped to {variance_floor}");
        v = variance_floor;
    }
    GaussMessage::new(vec![0.0; y.len()], v, Domain::X)
}

/// LMMSE posterior of `x` given `y = A·x + n` and the pseudo-prior
/// `N(x_pri, v_pri·I)`:
///
/// ```text
/// x_post = x_pri + V·diag(v·σᵢ/(σ² + v·σᵢ²))·Uᵀ·(y − A·x_pri)
/// v_post = [Σᵢ (v − v²σᵢ²/(σ² + v·σᵢ²)) + (d − r)·v] / d
/// ```
///
/// `latent_dim` is `d`. Taking `d = n_cols` gives the per-coordinate
/// variance of `x`; a larger `d` adds `d − n_cols` coordinates that the
/// channel never sees, each keeping variance `v_pri`.
pub fn lmmse_estimate(
    ch: &ChannelInstance,
    prior: &GaussMessage,
    y: &[f64],
    latent_dim: usize,
    variance_floor: f64,
) -> Result<GaussMessage> {
    if prior.domain != Domain::X {
        return Err(Error::InvalidMessage("LMMSE prior must live in the x domain".into()));
    }
    prior.validate()?;
    let v = prior.variance;
    if !(v > 0.0) {
        return Err(Error::InvalidMessage(format!("prior variance must be > 0, got {v}")));
    }
    check_len("LMMSE prior mean", prior.mean.len(), ch.n_cols())?;
    check_len("observation", y.len(), ch.m_rows())?;
    if latent_dim < ch.n_cols() {
        return Err(Error::InvalidDimension(format!(
            "latent dimension {latent_dim} below channel input dimension {}",
            ch.n_cols()
        )));
    }
    let s2 = ch.sigma2();
    let resid = sub(y, &ch.apply(&prior.mean)?);
    let mut z = ch.u().apply_transpose(&resid)?;
    let mut tr = 0.0;
    for (zi, &sv) in z.iter_mut().zip(ch.singular_values()) {
        let den = s2 + v * sv * sv;
        if den > 0.0 {
            *zi *= v * sv / den;
            tr += v - v * v * sv * sv / den;
        } else if sv == 0.0 {
            *zi = 0.0;
            tr += v;
        } else {
            return Err(Error::SingularSystem("zero noise with zero prior variance".into()));
        }
    }
    let r = ch.singular_values().len();
    tr += (latent_dim - r) as f64 * v;
    let step = ch.v().apply(&z)?;
    let mean: Vec<f64> = prior.mean.iter().zip(&step).map(|(a, b)| a + b).collect();
    let variance = (tr / latent_dim as f64).max(variance_floor);
    GaussMessage::new(mean, variance, Domain::X)
}

/// Extrinsic message: `v_orth = (1/v_post − 1/v_pri)⁻¹`,
/// `x_orth = v_orth·(x_post/v_post − x_pri/v_pri)`.
pub fn orthogonalize(post: &GaussMessage, prior: &GaussMessage) -> Result<GaussMessage> {
    check_len("posterior mean", post.mean.len(), prior.mean.len())?;
    let (vp, vq) = (post.variance, prior.variance);
    if !(vp > 0.0) || !(vp < vq) {
        return Err(Error::NoInformation {
            v_post: vp,
            v_pri: vq,
        });
    }
    let v_orth = 1.0 / (1.0 / vp - 1.0 / vq);
    let mean = post
        .mean
        .iter()
        .zip(&prior.mean)
        .map(|(a, b)| v_orth * (a / vp - b / vq))
        .collect();
    GaussMessage::new(mean, v_orth, post.domain)
}

/// Scales the denoised estimate by `β* = ⟨x̃, x_orth⟩/‖x̃‖²` and assigns it
/// the residual variance `‖A·x − y‖²/M` (optionally minus `σ²`), floored.
pub fn mmse_correction(
    x_tilde: &[f64],
    x_orth: &[f64],
    ch: &ChannelInstance,
    y: &[f64],
    subtract_noise_floor: bool,
    variance_floor: f64,
) -> Result<GaussMessage> {
    let beta = mmse_beta(x_tilde, x_orth)?;
    let mean: Vec<f64> = x_tilde.iter().map(|v| beta * v).collect();
    let mut variance = residual_energy(ch, &mean, y)?;
    if subtract_noise_floor {
        variance -= ch.sigma2();
    }
    GaussMessage::new(mean, variance.max(variance_floor), Domain::X)
}

/// `⟨x̃, x_orth⟩/‖x̃‖²`
pub fn mmse_beta(x_tilde: &[f64], x_orth: &[f64]) -> Result<f64> {
    check_len("denoised estimate", x_tilde.len(), x_orth.len())?;
    let energy = norm_sq(x_tilde);
    if !(energy > 0.0) {
        return Err(Error::DegenerateNle("denoised estimate is identically zero".into()));
    }
    Ok(dot(x_tilde, x_orth) / energy)
}

/// `‖A·x − y‖²/M`
pub fn residual_energy(ch: &ChannelInstance, x: &[f64], y: &[f64]) -> Result<f64> {
    check_len("observation", y.len(), ch.m_rows())?;
    let ax = ch.apply(x)?;
    Ok(norm_sq(&sub(&ax, y)) / y.len() as f64)
}

/// `‖new − prev‖ / max(‖prev‖, floor) < τ`
pub fn check_convergence(prev: &[f64], new: &[f64], tau: f64, floor: f64) -> bool {
    debug_assert_eq!(prev.len(), new.len());
    norm(&sub(new, prev)) / norm(prev).max(floor) < tau
}
