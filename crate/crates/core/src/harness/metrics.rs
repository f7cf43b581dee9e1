//! PSNR and SSIM.

use crate::error::{check_len, Error, Result};
use crate::vecops::mse;

/// Reported PSNR for an exact reconstruction.
pub const PSNR_CEILING_DB: f64 = 99.0;

/// `10·log₁₀(peak²/MSE)`, capped at [`PSNR_CEILING_DB`].
pub fn psnr(truth: &[f64], estimate: &[f64], peak: f64) -> Result<f64> {
    check_len("estimate", estimate.len(), truth.len())?;
    if !(peak > 0.0) {
        return Err(Error::InvalidParameter(format!("peak must be > 0, got {peak}")));
    }
    let e = mse(truth, estimate);
    if e == 0.0 {
        return Ok(PSNR_CEILING_DB);
    }
    Ok((10.0 * (peak * peak / e).log10()).min(PSNR_CEILING_DB))
}

const K1: f64 = 0.01;
const K2: f64 = 0.03;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, wi) in w.iter_mut().enumerate() {
        let d = i as f64 - c;
        *wi = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.map(|x| x / s)
}

fn ssim_from_moments(mx: f64, my: f64, vx: f64, vy: f64, cxy: f64) -> f64 {
    let c1 = (K1 * 1.0) * (K1 * 1.0);
    let c2 = (K2 * 1.0) * (K2 * 1.0);
    ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}

/// Mean local SSIM of one `height × width` plane (row-major, peak 1) over
/// all fully contained 11×11 Gaussian windows. Planes smaller than the
/// window use global statistics instead.
pub fn ssim_plane(truth: &[f64], estimate: &[f64], height: usize, width: usize) -> Result<f64> {
    check_len("truth plane", truth.len(), height * width)?;
    check_len("estimate plane", estimate.len(), height * width)?;
    if height == 0 || width == 0 {
        return Err(Error::InvalidDimension("empty image".into()));
    }
    if height < SSIM_WINDOW || width < SSIM_WINDOW {
        let n = truth.len() as f64;
        let mx = truth.iter().sum::<f64>() / n;
        let my = estimate.iter().sum::<f64>() / n;
        let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
        for (a, b) in truth.iter().zip(estimate) {
            vx += (a - mx) * (a - mx);
            vy += (b - my) * (b - my);
            cxy += (a - mx) * (b - my);
        }
        return Ok(ssim_from_moments(mx, my, vx / n, vy / n, cxy / n));
    }
    let g = gaussian_window();
    // separable filtering: rows first, then columns, valid region only
    let filt = |img: &[f64]| -> Vec<f64> {
        let ow = width - SSIM_WINDOW + 1;
        let oh = height - SSIM_WINDOW + 1;
        let mut rows = vec![0.0; height * ow];
        for y in 0..height {
            for x in 0..ow {
                rows[y * ow + x] = (0..SSIM_WINDOW).map(|k| g[k] * img[y * width + x + k]).sum();
            }
        }
        let mut out = vec![0.0; oh * ow];
        for y in 0..oh {
            for x in 0..ow {
                out[y * ow + x] = (0..SSIM_WINDOW).map(|k| g[k] * rows[(y + k) * ow + x]).sum();
            }
        }
        out
    };
    let xx: Vec<f64> = truth.iter().map(|a| a * a).collect();
    let yy: Vec<f64> = estimate.iter().map(|a| a * a).collect();
    let xy: Vec<f64> = truth.iter().zip(estimate).map(|(a, b)| a * b).collect();
    let (mx, my) = (filt(truth), filt(estimate));
    let (sxx, syy, sxy) = (filt(&xx), filt(&yy), filt(&xy));
    let total: f64 = (0..mx.len())
        .map(|i| {
            ssim_from_moments(
                mx[i],
                my[i],
                sxx[i] - mx[i] * mx[i],
                syy[i] - my[i] * my[i],
                sxy[i] - mx[i] * my[i],
            )
        })
        .sum();
    Ok(total / mx.len() as f64)
}

/// SSIM of an interleaved `height × width × channels` image, averaged over
/// channels.
pub fn ssim(truth: &[f64], estimate: &[f64], height: usize, width: usize, channels: usize) -> Result<f64> {
    check_len("estimate", estimate.len(), truth.len())?;
    check_len("image", truth.len(), height * width * channels)?;
    if channels == 1 {
        return ssim_plane(truth, estimate, height, width);
    }
    let mut acc = 0.0;
    for c in 0..channels {
        let a: Vec<f64> = truth.iter().skip(c).step_by(channels).copied().collect();
        let b: Vec<f64> = estimate.iter().skip(c).step_by(channels).copied().collect();
        acc += ssim_plane(&a, &b, height, width)?;
    }
    Ok(acc / channels as f64)
}
