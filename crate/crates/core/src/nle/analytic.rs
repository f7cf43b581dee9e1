//! Closed-form priors: Gaussian, Gaussian mixture, point mass, and a DCT
//! soft-threshold shrinker.
//!
//! For an i.i.d. mixture prior `Σ πₖ N(μₖ, σₖ²)` observed as `r = s + √v·ε`
//! the posterior mean is per coordinate
//!
//! ```text
//! E[s | r] = Σₖ wₖ(r) · (μₖ + σₖ²/(σₖ² + v) · (r − μₖ)),
//! wₖ(r) ∝ πₖ · N(r; μₖ, σₖ² + v)
//! ```

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dct::Dct;
use crate::error::{Error, Result};
use crate::nle::ddim::NoisePredictor;
use crate::nle::flow::VelocityPredictor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussMixture {
    weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
}

impl GaussMixture {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.len() != k || variances.len() != k {
            return Err(Error::InvalidParameter(
                "mixture needs matching, non-empty weight/mean/variance lists".into(),
            ));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) || variances.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidParameter(
                "mixture weights and variances must be >= 0".into(),
            ));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter("mixture means must be finite".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "mixture weights must sum to 1, got {total}"
            )));
        }
        Ok(GaussMixture {
            weights,
            means,
            variances,
        })
    }

    pub fn gaussian(mean: f64, variance: f64) -> Self {
        GaussMixture {
            weights: vec![1.0],
            means: vec![mean],
            variances: vec![variance.max(0.0)],
        }
    }

    pub fn point_mass(at: f64) -> Self {
        Self::gaussian(at, 0.0)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.means).map(|(w, m)| w * m).sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.weights
            .iter()
            .zip(self.means.iter().zip(&self.variances))
            .map(|(w, (m, v))| w * (v + (m - mu) * (m - mu)))
            .sum()
    }

    /// The single Gaussian with this mixture's mean and variance.
    pub fn moment_matched(&self) -> Self {
        Self::gaussian(self.mean(), self.variance())
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                let mut k = 0;
                let mut acc = self.weights[0];
                while u >= acc && k + 1 < self.weights.len() {
                    k += 1;
                    acc += self.weights[k];
                }
                let z: f64 = rng.sample(StandardNormal);
                self.means[k] + self.variances[k].sqrt() * z
            })
            .collect()
    }

    /// Posterior mean of one coordinate under noise variance `v`.
    pub fn posterior_mean_scalar(&self, r: f64, v: f64) -> f64 {
        if self.weights.len() == 1 {
            let (m, s2) = (self.means[0], self.variances[0]);
            let tot = s2 + v;
            return if tot > 0.0 { m + s2 / tot * (r - m) } else { m };
        }
        let mut best = f64::NEG_INFINITY;
        let mut logw = [0.0; 16];
        let mut heap;
        let logw: &mut [f64] = if self.weights.len() <= 16 {
            &mut logw[..self.weights.len()]
        } else {
            heap = vec![0.0; self.weights.len()];
            &mut heap
        };
        for k in 0..self.weights.len() {
            let tot = (self.variances[k] + v).max(1e-300);
            let d = r - self.means[k];
            logw[k] = if self.weights[k] > 0.0 {
                self.weights[k].ln() - 0.5 * tot.ln() - 0.5 * d * d / tot
            } else {
                f64::NEG_INFINITY
            };
            best = best.max(logw[k]);
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 0..self.weights.len() {
            let w = (logw[k] - best).exp();
            let tot = self.variances[k] + v;
            let gain = if tot > 0.0 { self.variances[k] / tot } else { 0.0 };
            num += w * (self.means[k] + gain * (r - self.means[k]));
            den += w;
        }
        num / den
    }

    pub fn posterior_mean(&self, r: &[f64], v: f64) -> Vec<f64> {
        r.iter().map(|&x| self.posterior_mean_scalar(x, v)).collect()
    }

    /// MMSE-optimal noise predictor for DDIM at this prior.
    pub fn noise_predictor(&self) -> MixtureNoisePredictor {
        MixtureNoisePredictor(self.clone())
    }

    /// MMSE-optimal flow-matching velocity at this prior.
    pub fn velocity_predictor(&self) -> MixtureVelocity {
        MixtureVelocity(self.clone())
    }
}

/// `ε̂(s_t) = (s_t − √ᾱ·E[s₀|s_t]) / √(1−ᾱ)`
#[derive(Debug, Clone)]
pub struct MixtureNoisePredictor(pub GaussMixture);

impl NoisePredictor for MixtureNoisePredictor {
    fn predict_noise(&self, s_t: &[f64], _step: usize, alpha_bar: f64) -> Result<Vec<f64>> {
        if alpha_bar >= 1.0 {
            return Ok(vec![0.0; s_t.len()]);
        }
        let a = alpha_bar.sqrt();
        let b = (1.0 - alpha_bar).sqrt();
        // s_t/√ᾱ = s₀ + √((1−ᾱ)/ᾱ)·ε
        let v = (1.0 - alpha_bar) / alpha_bar;
        Ok(s_t
            .iter()
            .map(|&s| (s - a * self.0.posterior_mean_scalar(s / a, v)) / b)
            .collect())
    }
}

/// `v̂(z, t) = (E[s₀|z_t] − z)/(1−t)`
#[derive(Debug, Clone)]
pub struct MixtureVelocity(pub GaussMixture);

impl VelocityPredictor for MixtureVelocity {
    fn velocity(&self, z: &[f64], t: f64) -> Result<Vec<f64>> {
        if !(t < 1.0) {
            return Err(Error::InvalidParameter("velocity undefined at t = 1".into()));
        }
        let inv = 1.0 / (1.0 - t);
        if t <= 0.0 {
            let mu = self.0.mean();
            return Ok(z.iter().map(|&zi| (mu - zi) * inv).collect());
        }
        // z/t = s₀ + ((1−t)/t)·ε
        let r = (1.0 - t) / t;
        let v = r * r;
        Ok(z
            .iter()
            .map(|&zi| (self.0.posterior_mean_scalar(zi / t, v) - zi) * inv)
            .collect())
    }
}

/// Soft thresholding in the orthonormal DCT domain with `λ = scale·√v`.
/// With a `(height, width, channels)` geometry the transform is separable
/// 2-D per channel; otherwise 1-D over the whole vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftThreshold {
    pub scale: f64,
    pub geometry: Option<(usize, usize, usize)>,
}

fn soft(x: f64, lambda: f64) -> f64 {
    x.signum() * (x.abs() - lambda).max(0.0)
}

impl SoftThreshold {
    pub fn denoise(&self, r: &[f64], v: f64) -> Result<Vec<f64>> {
        let lambda = self.scale * v.max(0.0).sqrt();
        match self.geometry {
            None => {
                let dct = Dct::new(r.len())?;
                let c: Vec<f64> = dct.forward(r)?.into_iter().map(|x| soft(x, lambda)).collect();
                dct.inverse(&c)
            }
            Some((h, w, ch)) => {
                if h * w * ch != r.len() {
                    return Err(Error::InvalidDimension(format!(
                        "geometry {h}x{w}x{ch} does not match length {}",
                        r.len()
                    )));
                }
                let (row_dct, col_dct) = (Dct::new(w)?, Dct::new(h)?);
                let mut out = vec![0.0; r.len()];
                for c in 0..ch {
                    let plane: Vec<f64> = (0..h * w).map(|i| r[i * ch + c]).collect();
                    let coeffs = separable(&plane, h, w, &row_dct, &col_dct, false)?;
                    let shrunk: Vec<f64> = coeffs.into_iter().map(|x| soft(x, lambda)).collect();
                    let back = separable(&shrunk, h, w, &row_dct, &col_dct, true)?;
                    for (i, v) in back.into_iter().enumerate() {
                        out[i * ch + c] = v;
                    }
                }
                Ok(out)
            }
        }
    }
}

fn separable(plane: &[f64], h: usize, w: usize, rows: &Dct, cols: &Dct, inverse: bool) -> Result<Vec<f64>> {
    let run = |d: &Dct, x: &[f64]| if inverse { d.inverse(x) } else { d.forward(x) };
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        let out = run(rows, &plane[y * w..(y + 1) * w])?;
        tmp[y * w..(y + 1) * w].copy_from_slice(&out);
    }
    let mut res = vec![0.0; h * w];
    let mut col = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = tmp[y * w + x];
        }
        let out = run(cols, &col)?;
        for y in 0..h {
            res[y * w + x] = out[y];
        }
    }
    Ok(res)
}
