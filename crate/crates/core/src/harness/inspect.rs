use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::channel::{ks_test, rayleigh_cdf, unit_tap_amplitudes, ChannelSpec, FadingProfile, KsResult};
use crate::error::Result;

pub const SPECTRUM_CSV_HEADER: &str = "index,singular_value";
pub const DEFAULT_KS_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelReport {
    pub spec: ChannelSpec,
    pub singular_values: Vec<f64>,
    pub condition_number: f64,
    pub rank: usize,
    pub mean_power: f64,
    /// Tap amplitudes against Rayleigh(1/√2); fading channels only.
    pub rayleigh_fit: Option<KsResult>,
}

impl ChannelReport {
    pub fn spectrum_csv(&self) -> String {
        let mut out = format!("{SPECTRUM_CSV_HEADER}\n");
        for (i, s) in self.singular_values.iter().enumerate() {
            let _ = writeln!(out, "{i},{s}");
        }
        out
    }

    pub fn stats_csv(&self) -> String {
        let mut out = String::from("statistic,value\n");
        let _ = writeln!(out, "dim,{}", self.singular_values.len());
        let _ = writeln!(out, "rank,{}", self.rank);
        let _ = writeln!(out, "condition_number,{}", self.condition_number);
        let _ = writeln!(out, "mean_power,{}", self.mean_power);
        if let Some(ks) = &self.rayleigh_fit {
            let _ = writeln!(out, "ks_samples,{}", ks.samples);
            let _ = writeln!(out, "ks_statistic,{}", ks.statistic);
            let _ = writeln!(out, "ks_p_value,{}", ks.p_value);
        }
        out
    }
}

pub fn rayleigh_fit(profile: &FadingProfile, samples: usize, seed: u64) -> Result<KsResult> {
    let amps = unit_tap_amplitudes(profile, samples, seed)?;
    Ok(ks_test(&amps, |r| rayleigh_cdf(r, std::f64::consts::FRAC_1_SQRT_2)))
}

pub fn inspect_channel(spec: &ChannelSpec, ks_samples: usize) -> Result<ChannelReport> {
    let ch = spec.build()?;
    let rayleigh = match spec {
        ChannelSpec::Fading { profile, seed, .. } => Some(rayleigh_fit(profile, ks_samples, *seed)?),
        _ => None,
    };
    Ok(ChannelReport {
        spec: spec.clone(),
        singular_values: ch.singular_values().to_vec(),
        condition_number: ch.condition_number(),
        rank: ch.rank(1e-12),
        mean_power: ch.mean_power(),
        rayleigh_fit: rayleigh,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::SpectrumShape;

    #[test]
    fn conditioned_report() {
        let spec = ChannelSpec::Conditioned {
            dim: 64,
            kappa: 10.0,
            spectrum: SpectrumShape::Geometric,
            sigma2: 0.01,
            seed: 4,
        };
        let r = inspect_channel(&spec, 0).unwrap();
        assert!((r.condition_number - 10.0).abs() < 1e-9);
        assert_eq!(r.rank, 64);
        assert!(r.rayleigh_fit.is_none());
        assert_eq!(r.spectrum_csv().lines().count(), 65);
    }

    #[test]
    fn fading_report_has_fit() {
        let spec = ChannelSpec::Fading {
            dim: 32,
            profile: FadingProfile::exponential(4, 1.0, 0.01, 8),
            sigma2: 0.0,
            seed: 1,
        };
        let r = inspect_channel(&spec, 20_000).unwrap();
        let ks = r.rayleigh_fit.unwrap();
        assert!(ks.p_value > 0.01, "{ks:?}");
        assert!(r.stats_csv().contains("ks_statistic,"));
    }
}
