//! Joint random-multiplexing and compression operator `F = S·P·T·D`.
//!
//! `D` is a diagonal of random signs, `T` the orthonormal DCT-II, `P` a
//! random permutation and `S` keeps `m` of the `n` multiplexed coefficients.
//! The product `Ξ = P·T·D` is orthogonal, so `F` has orthonormal rows and
//! its zero-filled inverse `Ξᵀ·Sᵀ` is also its pseudo-inverse.
//!
//! All factors are regenerated from `(n, m, seed)`. Draw order from the
//! seeded stream is fixed: `n` signs, then a Fisher–Yates permutation, then
//! a partial Fisher–Yates shuffle whose first `m` entries (sorted) form the
//! selection.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dct::Dct;
use crate::error::{check_len, Error, Result};
use crate::rng::seeded;

/// The orthogonal multiplexing stage `Ξ = P·T·D`.
#[derive(Debug, Clone)]
pub struct Multiplexer {
    signs: Vec<f64>,
    perm: Vec<usize>,
    dct: Dct,
}

impl Multiplexer {
    fn draw<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        let signs = (0..n)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let mut perm: Vec<usize> = (0..n).collect();
        fisher_yates(&mut perm, n, rng);
        Ok(Multiplexer {
            signs,
            perm,
            dct: Dct::new(n)?,
        })
    }

    /// Draws a standalone multiplexer of size `n` from `seed`.
    pub fn from_seed(n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension("multiplexer size must be >= 1".into()));
        }
        Self::draw(n, &mut seeded(seed))
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// `Ξ·v`
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("multiplexer input", v.len(), self.len())?;
        let signed: Vec<f64> = v.iter().zip(&self.signs).map(|(a, s)| a * s).collect();
        let c = self.dct.forward(&signed)?;
        Ok(self.perm.iter().map(|&j| c[j]).collect())
    }

    /// `Ξᵀ·u`
    pub fn apply_transpose(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len("multiplexer input", u.len(), self.len())?;
        let mut c = vec![0.0; u.len()];
        for (i, &j) in self.perm.iter().enumerate() {
            c[j] = u[i];
        }
        let mut out = self.dct.inverse(&c)?;
        for (o, s) in out.iter_mut().zip(&self.signs) {
            *o *= s;
        }
        Ok(out)
    }
}

pub(crate) fn fisher_yates<R: Rng + ?Sized>(v: &mut [usize], steps: usize, rng: &mut R) {
    let n = v.len();
    for i in 0..steps.min(n.saturating_sub(1)) {
        let j = rng.random_range(i..n);
        v.swap(i, j);
    }
}

/// Seeded operator `F = S·Ξ` mapping a length-`n` source to `m` coefficients.
#[derive(Debug, Clone)]
pub struct RmOperator {
    n: usize,
    m: usize,
    seed: u64,
    mux: Multiplexer,
    selection: Vec<usize>,
    /// `selected[i]` is true when multiplexed coefficient `i` is transmitted.
    selected: Vec<bool>,
}

/// Number of transmitted coefficients for ratio `beta`: `round(beta·n)`,
/// at least 1.
pub fn compressed_len(n: usize, beta: f64) -> Result<usize> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "compression ratio must lie in (0, 1], got {beta}"
        )));
    }
    Ok(((beta * n as f64).round() as usize).clamp(1, n.max(1)))
}

pub fn build_rm_operator(n: usize, m: usize, seed: u64) -> Result<RmOperator> {
    RmOperator::new(n, m, seed)
}

impl RmOperator {
    pub fn new(n: usize, m: usize, seed: u64) -> Result<Self> {
        if m == 0 || m > n {
            return Err(Error::InvalidDimension(format!(
                "need 1 <= m <= n, got n = {n}, m = {m}"
            )));
        }
        let mut rng = seeded(seed);
        let mux = Multiplexer::draw(n, &mut rng)?;
        let mut pool: Vec<usize> = (0..n).collect();
        fisher_yates(&mut pool, m, &mut rng);
        let mut selection = pool[..m].to_vec();
        selection.sort_unstable();
        let mut selected = vec![false; n];
        for &i in &selection {
            selected[i] = true;
        }
        Ok(RmOperator {
            n,
            m,
            seed,
            mux,
            selection,
            selected,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn beta(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    pub fn signs(&self) -> &[f64] {
        self.mux.signs()
    }

    pub fn perm(&self) -> &[usize] {
        self.mux.perm()
    }

    pub fn selection(&self) -> &[usize] {
        &self.selection
    }

    pub fn multiplexer(&self) -> &Multiplexer {
        &self.mux
    }

    /// `x = F·s`
    pub fn forward(&self, s: &[f64]) -> Result<Vec<f64>> {
        check_len("rm_forward input", s.len(), self.n)?;
        let u = self.mux.apply(s)?;
        Ok(self.selection.iter().map(|&i| u[i]).collect())
    }

    /// Zero-filled inverse `Ξᵀ·Sᵀ·x`.
    pub fn inverse(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("rm_inverse input", x.len(), self.m)?;
        let mut u = vec![0.0; self.n];
        for (&i, &v) in self.selection.iter().zip(x) {
            u[i] = v;
        }
        self.mux.apply_transpose(&u)
    }

    /// Inverse that fills the untransmitted coefficients from `fill` instead
    /// of zeros: `Ξᵀ·(Sᵀ·x + S̄ᵀ·S̄·Ξ·fill)`. With `fill = 0` this equals
    /// [`RmOperator::inverse`].
    pub fn inverse_with_fill(&self, x: &[f64], fill: &[f64]) -> Result<Vec<f64>> {
        check_len("rm_inverse input", x.len(), self.m)?;
        let mut u = self.mux.apply(fill)?;
        for (&i, &v) in self.selection.iter().zip(x) {
            u[i] = v;
        }
        self.mux.apply_transpose(&u)
    }

    /// Projection onto the null space of `F`: `(I − FᵀF)·s`.
    pub fn null_projection(&self, s: &[f64]) -> Result<Vec<f64>> {
        let mut u = self.mux.apply(s)?;
        for (v, &keep) in u.iter_mut().zip(&self.selected) {
            if keep {
                *v = 0.0;
            }
        }
        self.mux.apply_transpose(&u)
    }

    pub fn descriptor(&self) -> RmDescriptor {
        RmDescriptor {
            n: self.n,
            m: self.m,
            seed: self.seed,
        }
    }
}

pub fn rm_forward(op: &RmOperator, s: &[f64]) -> Result<Vec<f64>> {
    op.forward(s)
}

pub fn rm_inverse(op: &RmOperator, x: &[f64]) -> Result<Vec<f64>> {
    op.inverse(x)
}

/// Text record sufficient to regenerate an operator.
///
/// ```text
/// n = 4096
/// m = 1638
/// seed = 7
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RmDescriptor {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
}

impl RmDescriptor {
    pub fn build(&self) -> Result<RmOperator> {
        RmOperator::new(self.n, self.m, self.seed)
    }
}

impl fmt::Display for RmDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n = {}", self.n)?;
        writeln!(f, "m = {}", self.m)?;
        writeln!(f, "seed = {}", self.seed)
    }
}

impl FromStr for RmDescriptor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (mut n, mut m, mut seed) = (None, None, None);
        for line in s.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("expected key = value, got {line:?}")))?;
            let v = v.trim();
            let bad = |_| Error::Format(format!("bad value for {}: {v:?}", k.trim()));
            match k.trim() {
                "n" => n = Some(v.parse().map_err(bad)?),
                "m" => m = Some(v.parse().map_err(bad)?),
                "seed" => seed = Some(v.parse().map_err(bad)?),
                other => return Err(Error::Format(format!("unknown key {other:?}"))),
            }
        }
        match (n, m, seed) {
            (Some(n), Some(m), Some(seed)) => Ok(RmDescriptor { n, m, seed }),
            _ => Err(Error::Format("descriptor needs n, m and seed".into())),
        }
    }
}
