use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_len, Result};
use crate::rm::Multiplexer;

/// A matrix with orthonormal columns, stored in whichever form is cheapest
/// to apply.
#[derive(Debug, Clone)]
pub enum OrthoBasis {
    Identity(usize),
    /// `rows × cols` with orthonormal columns.
    Dense(DMatrix<f64>),
    /// Two chained sign/DCT/permutation stages. Square, applied in
    /// O(n log n); used in place of a dense Haar draw at large sizes.
    Scrambled(Box<[Multiplexer; 2]>),
}

impl OrthoBasis {
    pub fn rows(&self) -> usize {
        match self {
            OrthoBasis::Identity(n) => *n,
            OrthoBasis::Dense(q) => q.nrows(),
            OrthoBasis::Scrambled(m) => m[0].len(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            OrthoBasis::Identity(n) => *n,
            OrthoBasis::Dense(q) => q.ncols(),
            OrthoBasis::Scrambled(m) => m[0].len(),
        }
    }

    /// `Q·z`
    pub fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len("basis coefficients", z.len(), self.cols())?;
        match self {
            OrthoBasis::Identity(_) => Ok(z.to_vec()),
            OrthoBasis::Dense(q) => Ok((q * DVector::from_column_slice(z)).data.into()),
            OrthoBasis::Scrambled(m) => m[1].apply(&m[0].apply(z)?),
        }
    }

    /// `Qᵀ·v`
    pub fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("basis input", v.len(), self.rows())?;
        match self {
            OrthoBasis::Identity(_) => Ok(v.to_vec()),
            OrthoBasis::Dense(q) => Ok((q.tr_mul(&DVector::from_column_slice(v))).data.into()),
            OrthoBasis::Scrambled(m) => m[0].apply_transpose(&m[1].apply_transpose(v)?),
        }
    }

    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        match self {
            OrthoBasis::Identity(n) => Ok(DMatrix::identity(*n, *n)),
            OrthoBasis::Dense(q) => Ok(q.clone()),
            OrthoBasis::Scrambled(_) => {
                let n = self.cols();
                let mut q = DMatrix::zeros(n, n);
                let mut e = vec![0.0; n];
                for j in 0..n {
                    e[j] = 1.0;
                    let col = self.apply(&e)?;
                    q.column_mut(j).copy_from_slice(&col);
                    e[j] = 0.0;
                }
                Ok(q)
            }
        }
    }
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// column signs fixed by `sign(diag(R))`.
pub fn haar_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    // column-major fill, so the stream order is column by column
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn orthonormality_error(q: &DMatrix<f64>) -> f64 {
        let g = q.transpose() * q;
        (g - DMatrix::identity(q.ncols(), q.ncols())).abs().max()
    }

    #[test]
    fn haar_is_orthogonal() {
        let q = haar_orthogonal(24, &mut seeded(1));
        assert!(orthonormality_error(&q) < 1e-12);
    }

    #[test]
    fn scrambled_is_orthogonal_and_consistent() {
        let b = OrthoBasis::Scrambled(Box::new([
            Multiplexer::from_seed(20, 1).unwrap(),
            Multiplexer::from_seed(20, 2).unwrap(),
        ]));
        let q = b.to_dense().unwrap();
        assert!(orthonormality_error(&q) < 1e-12);
        let v: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let fast = b.apply_transpose(&v).unwrap();
        let dense = q.tr_mul(&DVector::from_column_slice(&v));
        for (a, b) in fast.iter().zip(dense.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
