//! Monte-Carlo divergence and the SURE-orthogonalized denoiser output.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::rng::{gaussian_vec, seeded};
use crate::vecops::all_finite;

/// Default finite-difference scale relative to the noise standard deviation.
pub const EPS_FD_REL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SureResult {
    pub phi_out: Vec<f64>,
    pub divergence: f64,
    pub phi_perp: Vec<f64>,
}

/// `⟨w, φ(s + ε·w) − φ(s)⟩ / (ε·N)` for one probe `w ~ N(0, I)` seeded by
/// `seed`. `phi_at_s` is `φ(s)`, already computed by the caller.
pub fn mc_divergence_with<F>(
    mut phi: F,
    s_in: &[f64],
    phi_at_s: &[f64],
    eps_fd: f64,
    seed: u64,
) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !(eps_fd > 0.0 && eps_fd.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps_fd must be > 0, got {eps_fd}")));
    }
    check_len("denoiser output", phi_at_s.len(), s_in.len())?;
    let n = s_in.len();
    if n == 0 {
        return Ok(0.0);
    }
    let w = gaussian_vec(&mut seeded(seed), n);
    let shifted: Vec<f64> = s_in.iter().zip(&w).map(|(s, wi)| s + eps_fd * wi).collect();
    let out = phi(&shifted)?;
    check_len("denoiser output", out.len(), n)?;
    if !all_finite(&out) {
        return Err(Error::Nle("non-finite denoiser output in divergence probe".into()));
    }
    let acc: f64 = w
        .iter()
        .zip(out.iter().zip(phi_at_s))
        .map(|(wi, (a, b))| wi * (a - b))
        .sum();
    Ok(acc / (eps_fd * n as f64))
}

/// `φ⊥ = φ − div·s_in`
pub fn sure_orthogonalize(phi_out: Vec<f64>, divergence: f64, s_in: &[f64]) -> Result<SureResult> {
    check_len("denoiser output", phi_out.len(), s_in.len())?;
    let phi_perp = phi_out
        .iter()
        .zip(s_in)
        .map(|(p, s)| p - divergence * s)
        .collect();
    Ok(SureResult {
        phi_out,
        divergence,
        phi_perp,
    })
}
