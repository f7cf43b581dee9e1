//! The outer loop.
//!
//! Each iteration: LMMSE → orthogonalize → `F⁻¹` → SNR match → denoise with
//! SURE correction → `F` → MMSE rescaling → convergence check.

use crate::channel::ChannelInstance;
use crate::error::{check_len, Error, Result};
use crate::harness::metrics::psnr;
use crate::nle::{snr_match, NlePrior};
use crate::oamp::linear::{
    check_convergence, init_state, lmmse_estimate, mmse_beta, orthogonalize, residual_energy,
};
use crate::oamp::message::{Domain, GaussMessage};
use crate::oamp::trace::{Fault, IterationRecord, IterationTrace, Termination};
use crate::oamp::{ReceiverConfig, TraceDivisor};
use crate::rm::RmOperator;
use crate::rng::derive_seed;

#[derive(Debug, Clone)]
pub struct ReceiverOutput {
    pub estimate: Vec<f64>,
    pub trace: IterationTrace,
    /// Predictor evaluations spent in this run.
    pub nfe: u64,
}

fn check_dims(y: &[f64], ch: &ChannelInstance, op: &RmOperator) -> Result<()> {
    check_len("observation", y.len(), ch.m_rows())?;
    if ch.n_cols() != op.m() {
        return Err(Error::InvalidDimension(format!(
            "channel takes {} inputs but the operator emits {}",
            ch.n_cols(),
            op.m()
        )));
    }
    Ok(())
}

fn error_moments(s_in: &[f64], truth: &[f64]) -> (f64, f64) {
    let n = s_in.len() as f64;
    let e: Vec<f64> = s_in.iter().zip(truth).map(|(a, b)| a - b).collect();
    let mean = e.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for x in &e {
        let d = (x - mean) * (x - mean);
        m2 += d;
        m4 += d * d;
    }
    let var = m2 / n;
    (var, (m4 / n) / (var * var))
}

struct State {
    x: GaussMessage,
    s: Vec<f64>,
    /// Current source estimate.
    est: Vec<f64>,
}

/// Runs the iterative receiver. Dimension mismatches are returned as
/// errors; failures inside the loop end it early and are recorded in the
/// trace, and the best estimate so far is returned.
///
/// With [`TraceDivisor::M`] the estimate is `F⁻¹·x_pri`. With
/// [`TraceDivisor::N`] it is the last raw denoiser output.
pub fn run_receiver(
    y: &[f64],
    ch: &ChannelInstance,
    op: &RmOperator,
    prior: &mut NlePrior,
    cfg: &ReceiverConfig,
    truth: Option<&[f64]>,
) -> Result<ReceiverOutput> {
    cfg.validate()?;
    check_dims(y, ch, op)?;
    if let Some(t) = truth {
        check_len("truth", t.len(), op.n())?;
    }
    let floor = cfg.variance_floor;
    let lifted = cfg.trace_divisor == TraceDivisor::N;
    let latent = if lifted { op.n() } else { ch.n_cols() };
    let nfe_start = prior.nfe();

    let init = init_state(y, floor)?;
    let mut st = State {
        x: GaussMessage::new(vec![0.0; ch.n_cols()], init.variance, Domain::X)?,
        s: vec![0.0; op.n()],
        est: vec![0.0; op.n()],
    };
    let mut records = Vec::new();
    let mut faults = Vec::new();
    let mut termination = Termination::MaxIters;

    let to_source = |x: &[f64], fill: &[f64]| -> Result<Vec<f64>> {
        if lifted {
            op.inverse_with_fill(x, fill)
        } else {
            op.inverse(x)
        }
    };
    let score = |s: &[f64]| truth.map(|t| psnr(t, s, 1.0)).transpose();

    for it in 1..=cfg.max_iters {
        let step = (|| -> Result<(IterationRecord, State, bool)> {
            let post = lmmse_estimate(ch, &st.x, y, latent, floor)?;
            if post.variance <= floor {
                let s = to_source(&post.mean, &st.s)?;
                let rec = IterationRecord {
                    iter: it,
                    v_pri: st.x.variance,
                    v_post: post.variance,
                    v_orth: post.variance,
                    t_star: 1.0,
                    psnr: score(&s)?,
                    residual: residual_energy(ch, &post.mean, y)?,
                    input_error_var: None,
                    input_error_kurtosis: None,
                    nfe: prior.nfe() - nfe_start,
                };
                let est = s.clone();
                return Ok((rec, State { x: post, s, est }, true));
            }
            let orth = orthogonalize(&post, &st.x)?;
            let s_in = to_source(&orth.mean, &st.s)?;
            let t_star = snr_match(orth.variance, prior.snr_kind())?;
            let seed = derive_seed(cfg.divergence_seed, it as u64);

            let nle = prior
                .denoise_orthogonal(&s_in, t_star, orth.variance, seed)
                .and_then(|sure| {
                    let x_tilde = op.forward(&sure.phi_perp)?;
                    // lifted runs fit the scale on the whole source vector
                    let beta = if lifted {
                        mmse_beta(&sure.phi_perp, &s_in)?
                    } else {
                        mmse_beta(&x_tilde, &orth.mean)?
                    };
                    Ok((
                        x_tilde.iter().map(|v| beta * v).collect::<Vec<_>>(),
                        sure.phi_perp.iter().map(|v| beta * v).collect::<Vec<_>>(),
                        sure.phi_out,
                    ))
                });
            let (mut x_new, mut s_new, phi) = match nle {
                Ok(pair) => pair,
                Err(e @ (Error::Nle(_) | Error::Bridge(_) | Error::Integration { .. } | Error::DegenerateNle(_))) => {
                    log::warn!("iteration {it}: denoiser fault ({e}); passing the linear estimate through");
                    faults.push(Fault {
                        iter: it,
                        message: e.to_string(),
                    });
                    (orth.mean.clone(), s_in.clone(), s_in.clone())
                }
                Err(e) => return Err(e),
            };
            if cfg.damping > 0.0 {
                let d = cfg.damping;
                for (a, b) in x_new.iter_mut().zip(&st.x.mean) {
                    *a = (1.0 - d) * *a + d * b;
                }
                for (a, b) in s_new.iter_mut().zip(&st.s) {
                    *a = (1.0 - d) * *a + d * b;
                }
            }
            let residual = residual_energy(ch, &x_new, y)?;
            let mut v_new = residual;
            if cfg.subtract_noise_floor {
                v_new -= ch.sigma2();
            }
            let x_msg = GaussMessage::new(x_new, v_new.max(floor), Domain::X)?;
            let est = if lifted { phi } else { op.inverse(&x_msg.mean)? };
            if !lifted {
                s_new = est.clone();
            }
            let (input_error_var, input_error_kurtosis) = match truth {
                Some(t) => {
                    let (v, k) = error_moments(&s_in, t);
                    (Some(v), Some(k))
                }
                None => (None, None),
            };
            let converged = check_convergence(&st.x.mean, &x_msg.mean, cfg.tolerance, floor);
            let rec = IterationRecord {
                iter: it,
                v_pri: st.x.variance,
                v_post: post.variance,
                v_orth: orth.variance,
                t_star,
                psnr: score(&est)?,
                residual,
                input_error_var,
                input_error_kurtosis,
                nfe: prior.nfe() - nfe_start,
            };
            Ok((rec, State { x: x_msg, s: s_new, est }, converged))
        })();

        match step {
            Ok((rec, next, stop)) => {
                let exact = rec.v_post <= floor;
                records.push(rec);
                st = next;
                if exact {
                    termination = Termination::ExactLinear { iter: it };
                    break;
                }
                if stop {
                    termination = Termination::Converged { iter: it };
                    break;
                }
            }
            Err(Error::NoInformation { v_post, v_pri }) => {
                log::warn!("iteration {it}: no information gained (v_post {v_post} >= v_pri {v_pri})");
                termination = Termination::NoInformation { iter: it };
                break;
            }
            Err(e) => {
                log::warn!("iteration {it}: {e}");
                termination = Termination::Error {
                    iter: it,
                    message: e.to_string(),
                };
                break;
            }
        }
    }

    let estimate = if records.is_empty() {
        op.inverse(&st.x.mean)?
    } else {
        st.est
    };
    Ok(ReceiverOutput {
        estimate,
        trace: IterationTrace {
            records,
            faults,
            termination,
        },
        nfe: prior.nfe() - nfe_start,
    })
}

/// Single LMMSE pass from the initial state, mapped back by the zero-filled
/// inverse. No denoiser is involved.
pub fn lmmse_baseline(
    y: &[f64],
    ch: &ChannelInstance,
    op: &RmOperator,
    cfg: &ReceiverConfig,
) -> Result<Vec<f64>> {
    check_dims(y, ch, op)?;
    let init = init_state(y, cfg.variance_floor)?;
    let prior = GaussMessage::new(vec![0.0; ch.n_cols()], init.variance, Domain::X)?;
    let post = lmmse_estimate(ch, &prior, y, ch.n_cols(), cfg.variance_floor)?;
    op.inverse(&post.mean)
}
