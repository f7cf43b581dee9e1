//! Flow-matching ODE integration.
//!
//! Path `z_t = (1−t)·ε + t·s₀`: noise at `t = 0`, data at `t = 1`. A
//! velocity predictor `v̂(z, t)` drives `dz/dt = v̂(z, t)`, integrated here
//! with explicit Euler on a uniform grid.

use crate::error::{check_len, Error, Result};
use crate::vecops::all_finite;

pub trait VelocityPredictor: Send {
    fn velocity(&self, z: &[f64], t: f64) -> Result<Vec<f64>>;
}

/// Adapts a closure into a [`VelocityPredictor`].
pub struct VelocityFn<F>(pub F);

impl<F> VelocityPredictor for VelocityFn<F>
where
    F: Fn(&[f64], f64) -> Vec<f64> + Send,
{
    fn velocity(&self, z: &[f64], t: f64) -> Result<Vec<f64>> {
        Ok((self.0)(z, t))
    }
}

/// Euler integration from `t_start` to `t_end` in `num_steps` equal steps.
/// Returns the endpoint and the number of velocity calls.
pub fn fm_integrate(
    z0: &[f64],
    predictor: &dyn VelocityPredictor,
    t_start: f64,
    t_end: f64,
    num_steps: usize,
) -> Result<(Vec<f64>, u64)> {
    if !(0.0 <= t_start && t_start < t_end && t_end <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 <= t_start < t_end <= 1, got {t_start} and {t_end}"
        )));
    }
    if num_steps == 0 {
        return Err(Error::InvalidParameter("need at least one Euler step".into()));
    }
    let h = (t_end - t_start) / num_steps as f64;
    let mut z = z0.to_vec();
    for k in 0..num_steps {
        let t = t_start + k as f64 * h;
        let v = predictor.velocity(&z, t)?;
        check_len("velocity", v.len(), z.len())?;
        for (zi, vi) in z.iter_mut().zip(&v) {
            *zi += h * vi;
        }
        if !all_finite(&z) {
            return Err(Error::Integration {
                step: k,
                reason: "non-finite state".into(),
            });
        }
    }
    Ok((z, num_steps as u64))
}

/// Distance from the clean end where flow-matching denoising stops.
pub const FM_END_MARGIN: f64 = 1e-3;

/// Denoises `s_in ≈ s + √v·ε` given the matched time `t* = 1/(1+√v)`:
/// starts from `z = t*·s_in` (which has the path's noise level at `t*`)
/// and integrates to `1 − FM_END_MARGIN`.
pub fn fm_denoise(
    predictor: &dyn VelocityPredictor,
    s_in: &[f64],
    t_star: f64,
    num_steps: usize,
) -> Result<(Vec<f64>, u64)> {
    let t_end = 1.0 - FM_END_MARGIN;
    if t_star >= t_end {
        return Ok((s_in.to_vec(), 0));
    }
    let z: Vec<f64> = s_in.iter().map(|v| t_star * v).collect();
    fm_integrate(&z, predictor, t_star, t_end, num_steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nle::analytic::GaussMixture;
    use crate::rng::{gaussian_vec, seeded};

    #[test]
    fn constant_field_is_exact() {
        let c = [0.5, -2.0, 1.25];
        let pred = VelocityFn(move |_z: &[f64], _t| c.to_vec());
        let (z, calls) = fm_integrate(&[1.0, 1.0, 1.0], &pred, 0.2, 0.7, 7).unwrap();
        assert_eq!(calls, 7);
        for (zi, ci) in z.iter().zip(&c) {
            assert!((zi - (1.0 + 0.5 * ci)).abs() < 1e-14);
        }
    }

    #[test]
    fn point_mass_flow_matches_closed_form() {
        let s0 = 0.8;
        let pm = GaussMixture::point_mass(s0);
        let eps = gaussian_vec(&mut seeded(2), 100);
        let delta = 1e-3;
        let (z, _) = fm_integrate(&eps, &pm.velocity_predictor(), 0.0, 1.0 - delta, 100).unwrap();
        for (zi, e) in z.iter().zip(&eps) {
            let closed = delta * e + (1.0 - delta) * s0;
            assert!((zi - closed).abs() < 1e-12);
            assert!((zi - s0).abs() <= delta * (e.abs() + s0.abs()) + 1e-12);
        }
    }

    #[test]
    fn rejects_bad_interval_and_divergence() {
        let pred = VelocityFn(|z: &[f64], _t| z.to_vec());
        assert!(fm_integrate(&[1.0], &pred, 0.5, 0.5, 3).is_err());
        assert!(fm_integrate(&[1.0], &pred, 0.0, 1.0, 0).is_err());
        let blow = VelocityFn(|_z: &[f64], _t| vec![f64::INFINITY]);
        assert!(matches!(
            fm_integrate(&[1.0], &blow, 0.0, 1.0, 3),
            Err(Error::Integration { step: 0, .. })
        ));
    }
}
