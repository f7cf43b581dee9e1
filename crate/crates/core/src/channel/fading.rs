//! Simplified time-selective Rayleigh tapped-delay-line channel.
//!
//! Each tap is a unit-power circularly-symmetric complex Gaussian process
//! scaled by the square root of its power. Across symbol blocks the process
//! follows a first-order autoregression `g[b] = ρ·g[b−1] + sqrt(1−ρ²)·w[b]`
//! with `ρ = J0(2π·f_D)`, the lag-1 value of the Jakes autocorrelation for
//! normalized Doppler `f_D`. The stationary start `g[0] ~ CN(0, 1)` keeps
//! every block marginally Rayleigh.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FadingProfile {
    pub num_taps: usize,
    pub tap_powers: Vec<f64>,
    /// Normalized Doppler, cycles per symbol.
    pub doppler_rate: f64,
    /// Number of symbol blocks the frame is split into; taps are constant
    /// within a block.
    pub num_symbols: usize,
}

impl FadingProfile {
    /// Exponentially decaying power-delay profile, normalized to unit sum.
    pub fn exponential(num_taps: usize, decay: f64, doppler_rate: f64, num_symbols: usize) -> Self {
        let raw: Vec<f64> = (0..num_taps).map(|l| (-decay * l as f64).exp()).collect();
        let total: f64 = raw.iter().sum();
        FadingProfile {
            num_taps,
            tap_powers: raw.iter().map(|p| p / total).collect(),
            doppler_rate,
            num_symbols,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_taps == 0 || self.tap_powers.len() != self.num_taps {
            return Err(Error::InvalidParameter(format!(
                "profile declares {} taps but lists {} powers",
                self.num_taps,
                self.tap_powers.len()
            )));
        }
        if self.tap_powers.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidParameter("tap powers must be nonnegative".into()));
        }
        let total: f64 = self.tap_powers.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "tap powers must sum to 1, got {total}"
            )));
        }
        if !(self.doppler_rate >= 0.0) || !self.doppler_rate.is_finite() {
            return Err(Error::InvalidParameter("doppler rate must be >= 0".into()));
        }
        if self.num_symbols == 0 {
            return Err(Error::InvalidParameter("need at least one symbol block".into()));
        }
        Ok(())
    }

    /// Lag-1 autoregression coefficient, clamped to [0, 1].
    pub fn ar_coefficient(&self) -> f64 {
        bessel_j0(2.0 * std::f64::consts::PI * self.doppler_rate).clamp(0.0, 1.0)
    }

    /// Unit-power tap gains, indexed `[tap][block]`.
    pub fn draw_unit_gains<R: Rng + ?Sized>(&self, num_blocks: usize, rng: &mut R) -> Vec<Vec<Complex64>> {
        let rho = self.ar_coefficient();
        let innov = (1.0 - rho * rho).max(0.0).sqrt();
        let mut cn = || {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        };
        (0..self.num_taps)
            .map(|_| {
                let mut g = Vec::with_capacity(num_blocks);
                let mut cur = cn();
                g.push(cur);
                for _ in 1..num_blocks {
                    cur = cur * rho + cn() * innov;
                    g.push(cur);
                }
                g
            })
            .collect()
    }

    /// Tap coefficients `sqrt(p_l)·g_l[b]`, indexed `[tap][block]`.
    pub fn draw_taps<R: Rng + ?Sized>(&self, num_blocks: usize, rng: &mut R) -> Vec<Vec<Complex64>> {
        let mut taps = self.draw_unit_gains(num_blocks, rng);
        for (tap, &p) in taps.iter_mut().zip(&self.tap_powers) {
            let a = p.sqrt();
            for c in tap.iter_mut() {
                *c *= a;
            }
        }
        taps
    }
}

/// Realified `dim × dim` matrix of the time-varying convolution over
/// `dim / 2` complex samples.
pub(crate) fn fading_matrix(dim: usize, profile: &FadingProfile, seed: u64) -> Result<DMatrix<f64>> {
    profile.validate()?;
    if !dim.is_multiple_of(2) {
        return Err(Error::InvalidDimension(format!(
            "fading channel realifies complex samples, dim must be even, got {dim}"
        )));
    }
    let len = dim / 2;
    if profile.num_taps > len {
        return Err(Error::InvalidParameter(format!(
            "{} taps do not fit in {len} complex samples",
            profile.num_taps
        )));
    }
    let blocks = profile.num_symbols.min(len);
    let block_len = len.div_ceil(blocks);
    let taps = profile.draw_taps(blocks, &mut seeded(seed));

    let mut a = DMatrix::zeros(dim, dim);
    for t in 0..len {
        let b = (t / block_len).min(blocks - 1);
        for (l, tap) in taps.iter().enumerate() {
            if l > t {
                break;
            }
            let h = tap[b];
            let (r, c) = (2 * t, 2 * (t - l));
            // [[re, -im], [im, re]]
            a[(r, c)] = h.re;
            a[(r, c + 1)] = -h.im;
            a[(r + 1, c)] = h.im;
            a[(r + 1, c + 1)] = h.re;
        }
    }
    Ok(a)
}

/// Bessel function of the first kind, order zero.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x < 12.0 {
        // power series
        let q = -(x * x) / 4.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..80 {
            term *= q / (k as f64 * k as f64);
            sum += term;
            if term.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        sum
    } else {
        // Hankel asymptotic expansion
        let y = 1.0 / (8.0 * x);
        let y2 = y * y;
        let p = 1.0 - 4.5 * y2 + 459.375 * y2 * y2;
        let q = -y + 37.5 * y2 * y;
        let chi = x - std::f64::consts::FRAC_PI_4;
        (2.0 / (std::f64::consts::PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
    }
}

/// Outcome of a one-sample Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub samples: usize,
}

/// Rayleigh CDF `1 − exp(−r² / (2σ²))`.
pub fn rayleigh_cdf(r: f64, scale: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else {
        1.0 - (-(r * r) / (2.0 * scale * scale)).exp()
    }
}

pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> KsResult {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    KsResult {
        statistic: d,
        p_value: kolmogorov_sf(d, xs.len()),
        samples: xs.len(),
    }
}

/// Survival function of the KS statistic, asymptotic Kolmogorov series with
/// the usual small-sample correction on the argument.
pub fn kolmogorov_sf(d: f64, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Pools `count` unit-power tap amplitudes drawn from independent
/// realizations of the profile. They should follow Rayleigh(1/√2).
pub fn unit_tap_amplitudes(profile: &FadingProfile, count: usize, seed: u64) -> Result<Vec<f64>> {
    profile.validate()?;
    let mut rng = seeded(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let gains = profile.draw_unit_gains(1, &mut rng);
        for g in gains {
            if out.len() == count {
                break;
            }
            out.push(g[0].norm());
        }
    }
    Ok(out)
}

/// Normalized autocorrelation of tap 0 over `num_blocks` blocks, averaged
/// over `realizations` independent draws, for lags `0..=max_lag`.
pub fn tap_autocorrelation(
    profile: &FadingProfile,
    num_blocks: usize,
    max_lag: usize,
    realizations: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    profile.validate()?;
    let mut rng = seeded(seed);
    let mut acc = vec![0.0; max_lag + 1];
    let mut counts = vec![0usize; max_lag + 1];
    for _ in 0..realizations {
        let g = &profile.draw_unit_gains(num_blocks, &mut rng)[0];
        for lag in 0..=max_lag.min(num_blocks.saturating_sub(1)) {
            for b in lag..num_blocks {
                acc[lag] += (g[b] * g[b - lag].conj()).re;
                counts[lag] += 1;
            }
        }
    }
    let r0 = acc[0] / counts[0] as f64;
    Ok(acc
        .iter()
        .zip(&counts)
        .map(|(a, &c)| if c == 0 { f64::NAN } else { a / c as f64 / r0 })
        .collect())
}
