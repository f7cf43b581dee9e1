//! Orthonormal DCT-II / DCT-III of arbitrary length in O(N log N).
//!
//! Normalization: coefficient 0 is scaled by `sqrt(1/N)` and coefficients
//! `k >= 1` by `sqrt(2/N)`, so the transform matrix is exactly orthogonal
//! and the inverse (DCT-III) is its transpose.
//!
//! The forward transform uses Makhoul's reordering: even samples ascending,
//! odd samples descending, one complex FFT of length N, then a quarter-wave
//! twiddle. The inverse runs the same steps backwards.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_len, Error, Result};

#[derive(Clone)]
pub struct Dct {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// exp(-i*pi*k/(2N))
    twiddle: Vec<Complex64>,
    scratch_len: usize,
}

impl fmt::Debug for Dct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dct").field("n", &self.n).finish()
    }
}

impl Dct {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension("DCT length must be >= 1".into()));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        let twiddle = (0..n)
            .map(|k| {
                let theta = -std::f64::consts::PI * k as f64 / (2.0 * n as f64);
                Complex64::new(theta.cos(), theta.sin())
            })
            .collect();
        Ok(Dct {
            n,
            fwd,
            inv,
            twiddle,
            scratch_len,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Orthonormal DCT-II.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("dct input", x.len(), self.n)?;
        let n = self.n;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let half = n.div_ceil(2);
        for k in 0..half {
            buf[k].re = x[2 * k];
        }
        for k in 0..n / 2 {
            buf[n - 1 - k].re = x[2 * k + 1];
        }
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.scratch_len];
        self.fwd.process_with_scratch(&mut buf, &mut scratch);

        let s0 = (1.0 / n as f64).sqrt();
        let sk = (2.0 / n as f64).sqrt();
        Ok(buf
            .iter()
            .zip(&self.twiddle)
            .enumerate()
            .map(|(k, (v, w))| (w * v).re * if k == 0 { s0 } else { sk })
            .collect())
    }

    /// Orthonormal DCT-III, the inverse (and transpose) of [`Dct::forward`].
    pub fn inverse(&self, c: &[f64]) -> Result<Vec<f64>> {
        check_len("dct input", c.len(), self.n)?;
        let n = self.n;
        let s0 = (n as f64).sqrt();
        let sk = (n as f64 / 2.0).sqrt();
        // back to the unnormalized DCT-II coefficients
        let raw = |k: usize| c[k] * if k == 0 { s0 } else { sk };

        let mut buf: Vec<Complex64> = (0..n)
            .map(|k| {
                let z = if k == 0 {
                    Complex64::new(raw(0), 0.0)
                } else {
                    Complex64::new(raw(k), -raw(n - k))
                };
                self.twiddle[k].conj() * z
            })
            .collect();
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.scratch_len];
        self.inv.process_with_scratch(&mut buf, &mut scratch);

        let inv_n = 1.0 / n as f64;
        let mut out = vec![0.0; n];
        let half = n.div_ceil(2);
        for k in 0..half {
            out[2 * k] = buf[k].re * inv_n;
        }
        for k in 0..n / 2 {
            out[2 * k + 1] = buf[n - 1 - k].re * inv_n;
        }
        Ok(out)
    }
}

/// One-shot orthonormal DCT. Plans a fresh transform on every call; hold a
/// [`Dct`] when transforming repeatedly.
pub fn dct_transform(v: &[f64], inverse: bool) -> Result<Vec<f64>> {
    let plan = Dct::new(v.len())?;
    if inverse {
        plan.inverse(v)
    } else {
        plan.forward(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_vec, seeded};

    /// Explicit orthonormal DCT-II matrix from the cosine definition.
    fn dct_matrix(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|k| {
                let a = if k == 0 {
                    (1.0 / n as f64).sqrt()
                } else {
                    (2.0 / n as f64).sqrt()
                };
                (0..n)
                    .map(|j| {
                        a * (std::f64::consts::PI * (2 * j + 1) as f64 * k as f64
                            / (2 * n) as f64)
                            .cos()
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn constant_maps_to_dc() {
        let out = dct_transform(&[0.7; 8], false).unwrap();
        assert!((out[0] - 0.7 * 8f64.sqrt()).abs() < 1e-12);
        assert!(out[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn forward_inverse_identity_1024() {
        let x = gaussian_vec(&mut seeded(11), 1024);
        let plan = Dct::new(1024).unwrap();
        let back = plan.inverse(&plan.forward(&x).unwrap()).unwrap();
        let err = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "max err {err}");
    }

    #[test]
    fn unit_vector_matches_cosine_matrix_n4() {
        let m = dct_matrix(4);
        let out = dct_transform(&[1.0, 0.0, 0.0, 0.0], false).unwrap();
        for k in 0..4 {
            assert!((out[k] - m[k][0]).abs() < 1e-14);
        }
    }

    #[test]
    fn matches_cosine_matrix_all_small_sizes() {
        for n in 1..=13 {
            let m = dct_matrix(n);
            let plan = Dct::new(n).unwrap();
            for j in 0..n {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                let fwd = plan.forward(&e).unwrap();
                let inv = plan.inverse(&e).unwrap();
                for k in 0..n {
                    assert!((fwd[k] - m[k][j]).abs() < 1e-13, "n={n} fwd ({k},{j})");
                    // inverse is the transpose
                    assert!((inv[k] - m[j][k]).abs() < 1e-13, "n={n} inv ({k},{j})");
                }
            }
        }
    }

    #[test]
    fn rejects_empty_and_mismatched() {
        assert!(Dct::new(0).is_err());
        let plan = Dct::new(4).unwrap();
        assert!(matches!(plan.forward(&[1.0; 3]), Err(Error::InvalidDimension(_))));
    }
}
