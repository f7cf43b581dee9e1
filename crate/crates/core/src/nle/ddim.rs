//! Deterministic DDIM mechanics over a noise predictor.
//!
//! Forward corruption: `s_t = √ᾱ·s₀ + √(1−ᾱ)·ε`. Given a predicted noise
//! `ε̂`, the clean estimate is `ŝ₀ = (s_t − √(1−ᾱ)·ε̂)/√ᾱ` and one reverse
//! step moves to `s_prev = √ᾱ_prev·ŝ₀ + √(1−ᾱ_prev)·ε̂`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::nle::snr::{map_alpha_to_step, DdimSchedule};
use crate::vecops::all_finite;

/// Noise predictor `ε̂(s_t, t)`. `step` indexes the schedule and
/// `alpha_bar` is its value there.
pub trait NoisePredictor: Send {
    fn predict_noise(&self, s_t: &[f64], step: usize, alpha_bar: f64) -> Result<Vec<f64>>;
}

pub fn ddim_forward(s0: &[f64], eps: &[f64], alpha_bar: f64) -> Vec<f64> {
    let (a, b) = (alpha_bar.sqrt(), (1.0 - alpha_bar).sqrt());
    s0.iter().zip(eps).map(|(s, e)| a * s + b * e).collect()
}

pub fn ddim_x0_predict(s_t: &[f64], eps_hat: &[f64], alpha_bar_t: f64) -> Result<Vec<f64>> {
    check_len("noise prediction", eps_hat.len(), s_t.len())?;
    if !(alpha_bar_t > 0.0 && alpha_bar_t <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha_bar must lie in (0, 1], got {alpha_bar_t}"
        )));
    }
    let b = (1.0 - alpha_bar_t).sqrt();
    let inv_a = 1.0 / alpha_bar_t.sqrt();
    Ok(s_t.iter().zip(eps_hat).map(|(s, e)| (s - b * e) * inv_a).collect())
}

pub fn ddim_reverse_step(
    s_t: &[f64],
    eps_hat: &[f64],
    alpha_bar_t: f64,
    alpha_bar_prev: f64,
) -> Result<Vec<f64>> {
    if !(alpha_bar_t > 0.0 && alpha_bar_t <= alpha_bar_prev && alpha_bar_prev <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < alpha_bar_t <= alpha_bar_prev <= 1, got {alpha_bar_t} and {alpha_bar_prev}"
        )));
    }
    let s0 = ddim_x0_predict(s_t, eps_hat, alpha_bar_t)?;
    let (a, b) = (alpha_bar_prev.sqrt(), (1.0 - alpha_bar_prev).sqrt());
    Ok(s0.iter().zip(eps_hat).map(|(s, e)| a * s + b * e).collect())
}

/// How far the DDIM denoiser runs from the matched step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DdimMode {
    /// Reverse updates from the matched step down to `ᾱ = 1`.
    #[default]
    FullTrajectory,
    /// A single `ŝ₀` prediction at the matched step.
    SingleStep,
}

/// Runs the deterministic reverse process from `start` to the clean end.
/// Returns the output and the number of predictor calls.
pub fn ddim_sample_from(
    predictor: &dyn NoisePredictor,
    sched: &DdimSchedule,
    s_start: &[f64],
    start: usize,
    mode: DdimMode,
) -> Result<(Vec<f64>, u64)> {
    if start >= sched.len() {
        return Err(Error::InvalidParameter(format!(
            "start step {start} outside a {}-step schedule",
            sched.len()
        )));
    }
    let mut s = s_start.to_vec();
    let mut calls = 0;
    let steps: Vec<usize> = match mode {
        DdimMode::FullTrajectory => (0..=start).rev().collect(),
        DdimMode::SingleStep => vec![start],
    };
    for &j in &steps {
        let a = sched.at(j);
        let eps = predictor.predict_noise(&s, j, a)?;
        calls += 1;
        check_len("noise prediction", eps.len(), s.len())?;
        s = match mode {
            DdimMode::SingleStep => ddim_x0_predict(&s, &eps, a)?,
            DdimMode::FullTrajectory => {
                let prev = if j == 0 { 1.0 } else { sched.at(j - 1) };
                ddim_reverse_step(&s, &eps, a, prev)?
            }
        };
        if !all_finite(&s) {
            return Err(Error::Nle(format!("non-finite DDIM state at step {j}")));
        }
    }
    Ok((s, calls))
}

/// Denoises `s_in ≈ s + √v·ε` given the SNR-matched target `ᾱ*`: picks the
/// nearest schedule step `k`, rescales to `s_t = √ᾱ_k·s_in` and samples.
pub fn ddim_denoise(
    predictor: &dyn NoisePredictor,
    sched: &DdimSchedule,
    s_in: &[f64],
    target_alpha_bar: f64,
    mode: DdimMode,
) -> Result<(Vec<f64>, u64)> {
    let k = map_alpha_to_step(target_alpha_bar, sched);
    let a = sched.at(k).sqrt();
    let s_t: Vec<f64> = s_in.iter().map(|v| a * v).collect();
    ddim_sample_from(predictor, sched, &s_t, k, mode)
}
