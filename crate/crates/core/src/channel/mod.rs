//! Channel generation and transmission `y = A·x + n`.
//!
//! Channels are held by their singular factors `A = U·diag(Σ)·Vᵀ`, which is
//! the form the LMMSE estimator consumes.

mod fading;
mod ortho;

pub use fading::{
    bessel_j0, kolmogorov_sf, ks_test, rayleigh_cdf, tap_autocorrelation, unit_tap_amplitudes,
    FadingProfile, KsResult,
};
pub use ortho::{haar_orthogonal, OrthoBasis};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::rm::Multiplexer;
use crate::rng::{derive_seed, gaussian_vec, seeded};

/// Above this size conditioned channels use scrambled-DCT singular bases
/// instead of dense Haar draws.
pub const DENSE_HAAR_MAX_DIM: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumShape {
    Linear,
    #[default]
    Geometric,
}

/// Regenerable channel descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ChannelSpec {
    Identity {
        dim: usize,
        sigma2: f64,
    },
    Conditioned {
        dim: usize,
        kappa: f64,
        spectrum: SpectrumShape,
        sigma2: f64,
        seed: u64,
    },
    Fading {
        dim: usize,
        profile: FadingProfile,
        sigma2: f64,
        seed: u64,
    },
}

impl ChannelSpec {
    pub fn build(&self) -> Result<ChannelInstance> {
        match self {
            ChannelSpec::Identity { dim, sigma2 } => gen_identity_channel(*dim, *sigma2),
            ChannelSpec::Conditioned {
                dim,
                kappa,
                spectrum,
                sigma2,
                seed,
            } => gen_conditioned_channel(*dim, *kappa, *spectrum, *sigma2, *seed),
            ChannelSpec::Fading {
                dim,
                profile,
                sigma2,
                seed,
            } => gen_tdl_fading_channel(*dim, profile, *sigma2, *seed),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("channel spec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct ChannelInstance {
    m_rows: usize,
    n_cols: usize,
    u: OrthoBasis,
    singular: Vec<f64>,
    v: OrthoBasis,
    sigma2: f64,
    seed: u64,
    spec: Option<ChannelSpec>,
    dense: Option<DMatrix<f64>>,
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise variance must be finite and >= 0, got {sigma2}"
        )));
    }
    Ok(())
}

impl ChannelInstance {
    /// Assembles a channel from singular factors. `u` is `m × r`, `v` is
    /// `n × r` and `singular` has `r` nonincreasing nonnegative entries.
    pub fn from_svd(u: OrthoBasis, singular: Vec<f64>, v: OrthoBasis, sigma2: f64) -> Result<Self> {
        check_sigma2(sigma2)?;
        let r = singular.len();
        if u.cols() != r || v.cols() != r {
            return Err(Error::InvalidDimension(format!(
                "singular bases have {} and {} columns for {r} singular values",
                u.cols(),
                v.cols()
            )));
        }
        if singular.iter().any(|s| !(*s >= 0.0)) || singular.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidParameter(
                "singular values must be nonnegative and nonincreasing".into(),
            ));
        }
        Ok(ChannelInstance {
            m_rows: u.rows(),
            n_cols: v.rows(),
            u,
            singular,
            v,
            sigma2,
            seed: 0,
            spec: None,
            dense: None,
        })
    }

    /// Thin SVD of an explicit matrix; the matrix is kept for export.
    pub fn from_dense(a: DMatrix<f64>, sigma2: f64) -> Result<Self> {
        check_sigma2(sigma2)?;
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::InvalidDimension("empty channel matrix".into()));
        }
        let svd = a.clone().svd(true, true);
        let (u, vt) = match (svd.u, svd.v_t) {
            (Some(u), Some(vt)) => (u, vt),
            _ => return Err(Error::SingularSystem("SVD did not converge".into())),
        };
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        let singular: Vec<f64> = order.iter().map(|&i| svd.singular_values[i].max(0.0)).collect();
        let u = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
        let v = DMatrix::from_fn(vt.ncols(), order.len(), |r, c| vt[(order[c], r)]);
        let mut ch = Self::from_svd(OrthoBasis::Dense(u), singular, OrthoBasis::Dense(v), sigma2)?;
        ch.dense = Some(a);
        Ok(ch)
    }

    pub fn m_rows(&self) -> usize {
        self.m_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular
    }

    pub fn u(&self) -> &OrthoBasis {
        &self.u
    }

    pub fn v(&self) -> &OrthoBasis {
        &self.v
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn spec(&self) -> Option<&ChannelSpec> {
        self.spec.as_ref()
    }

    /// Same matrix, different noise level.
    pub fn with_sigma2(mut self, sigma2: f64) -> Result<Self> {
        check_sigma2(sigma2)?;
        self.sigma2 = sigma2;
        if let Some(spec) = self.spec.as_mut() {
            match spec {
                ChannelSpec::Identity { sigma2: s, .. }
                | ChannelSpec::Conditioned { sigma2: s, .. }
                | ChannelSpec::Fading { sigma2: s, .. } => *s = sigma2,
            }
        }
        Ok(self)
    }

    /// Number of singular values above `tol · σ_max`.
    pub fn rank(&self, tol: f64) -> usize {
        let top = self.singular.first().copied().unwrap_or(0.0);
        self.singular.iter().filter(|&&s| s > tol * top && s > 0.0).count()
    }

    pub fn condition_number(&self) -> f64 {
        let full = self.m_rows.min(self.n_cols);
        match (self.singular.first(), self.singular.last()) {
            (Some(&hi), Some(&lo)) if self.singular.len() == full && lo > 0.0 => hi / lo,
            _ => f64::INFINITY,
        }
    }

    /// `(1/n)·tr(AᵀA)`
    pub fn mean_power(&self) -> f64 {
        self.singular.iter().map(|s| s * s).sum::<f64>() / self.n_cols as f64
    }

    /// `A·x`
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("channel input", x.len(), self.n_cols)?;
        let mut z = self.v.apply_transpose(x)?;
        for (zi, s) in z.iter_mut().zip(&self.singular) {
            *zi *= s;
        }
        self.u.apply(&z)
    }

    /// `Aᵀ·y`
    pub fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("channel output", y.len(), self.m_rows)?;
        let mut z = self.u.apply_transpose(y)?;
        for (zi, s) in z.iter_mut().zip(&self.singular) {
            *zi *= s;
        }
        self.v.apply(&z)
    }

    /// `y = A·x + n` with `n ~ N(0, σ²I)` drawn from `noise_seed`.
    pub fn transmit(&self, x: &[f64], noise_seed: u64) -> Result<Vec<f64>> {
        let mut y = self.apply(x)?;
        if self.sigma2 > 0.0 {
            let sd = self.sigma2.sqrt();
            let noise = gaussian_vec(&mut seeded(noise_seed), y.len());
            for (yi, ni) in y.iter_mut().zip(noise) {
                *yi += sd * ni;
            }
        }
        Ok(y)
    }

    /// Dense `A`, either stored or reassembled from the factors.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        if let Some(a) = &self.dense {
            return Ok(a.clone());
        }
        let u = self.u.to_dense()?;
        let v = self.v.to_dense()?;
        let s = DMatrix::from_diagonal(&DVector::from_column_slice(&self.singular));
        Ok(u * s * v.transpose())
    }

    pub fn stored_dense(&self) -> Option<&DMatrix<f64>> {
        self.dense.as_ref()
    }
}

pub fn gen_identity_channel(dim: usize, sigma2: f64) -> Result<ChannelInstance> {
    if dim == 0 {
        return Err(Error::InvalidDimension("channel dimension must be >= 1".into()));
    }
    let mut ch = ChannelInstance::from_svd(
        OrthoBasis::Identity(dim),
        vec![1.0; dim],
        OrthoBasis::Identity(dim),
        sigma2,
    )?;
    ch.spec = Some(ChannelSpec::Identity { dim, sigma2 });
    Ok(ch)
}

/// Singular values from `σ_max` down to `σ_max/κ`, scaled to unit mean
/// power.
pub fn conditioned_spectrum(dim: usize, kappa: f64, shape: SpectrumShape) -> Result<Vec<f64>> {
    if !(kappa >= 1.0) || !kappa.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "condition number must be finite and >= 1, got {kappa}"
        )));
    }
    if dim == 0 {
        return Err(Error::InvalidDimension("channel dimension must be >= 1".into()));
    }
    let raw: Vec<f64> = (0..dim)
        .map(|i| {
            let frac = if dim == 1 { 0.0 } else { i as f64 / (dim - 1) as f64 };
            match shape {
                SpectrumShape::Geometric => kappa.powf(-frac),
                SpectrumShape::Linear => 1.0 - (1.0 - 1.0 / kappa) * frac,
            }
        })
        .collect();
    let power = raw.iter().map(|s| s * s).sum::<f64>() / dim as f64;
    let c = power.sqrt().recip();
    Ok(raw.iter().map(|s| s * c).collect())
}

/// Right-unitarily-invariant style channel with controlled conditioning.
/// Singular bases are Haar draws (QR of seeded Gaussian matrices) up to
/// [`DENSE_HAAR_MAX_DIM`], scrambled-DCT bases above it.
pub fn gen_conditioned_channel(
    dim: usize,
    kappa: f64,
    spectrum_shape: SpectrumShape,
    sigma2: f64,
    seed: u64,
) -> Result<ChannelInstance> {
    let singular = conditioned_spectrum(dim, kappa, spectrum_shape)?;
    let (u, v) = if dim <= DENSE_HAAR_MAX_DIM {
        let mut rng = seeded(seed);
        let u = haar_orthogonal(dim, &mut rng);
        let v = haar_orthogonal(dim, &mut rng);
        (OrthoBasis::Dense(u), OrthoBasis::Dense(v))
    } else {
        let mux = |k| Multiplexer::from_seed(dim, derive_seed(seed, k));
        (
            OrthoBasis::Scrambled(Box::new([mux(0)?, mux(1)?])),
            OrthoBasis::Scrambled(Box::new([mux(2)?, mux(3)?])),
        )
    };
    let mut ch = ChannelInstance::from_svd(u, singular, v, sigma2)?;
    ch.seed = seed;
    ch.spec = Some(ChannelSpec::Conditioned {
        dim,
        kappa,
        spectrum: spectrum_shape,
        sigma2,
        seed,
    });
    Ok(ch)
}

/// Time-selective Rayleigh tapped-delay-line channel over `dim / 2` complex
/// samples, realified with 2×2 rotation blocks. Cost is a dense SVD.
pub fn gen_tdl_fading_channel(
    dim: usize,
    profile: &FadingProfile,
    sigma2: f64,
    seed: u64,
) -> Result<ChannelInstance> {
    let a = fading::fading_matrix(dim, profile, seed)?;
    let mut ch = ChannelInstance::from_dense(a, sigma2)?;
    ch.seed = seed;
    ch.spec = Some(ChannelSpec::Fading {
        dim,
        profile: profile.clone(),
        sigma2,
        seed,
    });
    Ok(ch)
}

pub fn transmit(ch: &ChannelInstance, x: &[f64], noise_seed: u64) -> Result<Vec<f64>> {
    ch.transmit(x, noise_seed)
}
