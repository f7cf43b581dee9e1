//! Diffusion-OAMP: random-multiplexing image compression, linear channel
//! simulation and an iterative receiver that alternates an SVD-based LMMSE
//! estimator with an SNR-matched, divergence-corrected denoiser.
//!
//! The pipeline, end to end:
//!
//! ```text
//! s ──F──▶ x ──A, σ²──▶ y ──▶ [LE ─ orth ─ F⁻¹ ─ t* ─ NLE ─ F ─ MMSE]ᴷ ──▶ ŝ
//! ```
//!
//! * [`rm`]: the seeded operator `F = S·P·T_DCT·D` and its inverses.
//! * [`channel`]: identity, conditioned and fading channels in SVD form.
//! * [`oamp`]: messages, LMMSE, orthogonalization, MMSE correction and the
//!   receiver loop.
//! * [`nle`]: SNR matching, denoiser priors, DDIM / flow-matching sampler
//!   mechanics, SURE divergence and the external denoiser bridge.
//! * [`harness`]: sources, image I/O, metrics, experiments and sweeps.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod channel;
pub mod dct;
pub mod error;
pub mod harness;
pub mod matio;
pub mod nle;
pub mod oamp;
pub mod rm;
pub mod rng;
pub mod vecops;

pub use error::{Error, Result};
