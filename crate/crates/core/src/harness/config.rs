//! Experiment configuration.
//!
//! Two text forms parse to the same structure. JSON:
//!
//! ```text
//! { "beta": 0.4, "sigma": 0.05, "source": { "type": "gmm", "n": 4096 } }
//! ```
//!
//! or flat `key = value` lines with dotted keys for nesting, where each
//! value is read as JSON when it parses and as a bare string otherwise:
//!
//! ```text
//! beta = 0.4
//! sigma = 0.05
//! source.type = gmm
//! source.n = 4096
//! ```

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::channel::{ChannelSpec, FadingProfile, SpectrumShape};
use crate::error::{Error, Result};
use crate::harness::source::SourceSpec;
use crate::nle::{
    BridgeEndpoint, BridgeHandle, DdimMode, DdimSchedule, GaussMixture, NlePrior, SoftThreshold,
};
use crate::oamp::ReceiverConfig;

/// Environment variable naming the root that relative output paths hang off.
pub const OUTPUT_ROOT_ENV: &str = "DOAMP_OUTPUT_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChannelChoice {
    Identity,
    Conditioned {
        kappa: f64,
        #[serde(default)]
        spectrum: SpectrumShape,
    },
    /// Exponential power-delay profile.
    Fading {
        #[serde(default = "default_taps")]
        num_taps: usize,
        #[serde(default = "default_decay")]
        decay: f64,
        #[serde(default = "default_doppler")]
        doppler_rate: f64,
        #[serde(default = "default_symbols")]
        num_symbols: usize,
    },
}

fn default_taps() -> usize {
    4
}
fn default_decay() -> f64 {
    1.0
}
fn default_doppler() -> f64 {
    0.01
}
fn default_symbols() -> usize {
    8
}

impl ChannelChoice {
    pub fn label(&self) -> String {
        match self {
            ChannelChoice::Identity => "identity".into(),
            ChannelChoice::Conditioned { kappa, .. } => format!("conditioned-k{kappa}"),
            ChannelChoice::Fading { doppler_rate, .. } => format!("fading-fd{doppler_rate}"),
        }
    }

    pub fn to_spec(&self, dim: usize, sigma2: f64, seed: u64) -> ChannelSpec {
        match self {
            ChannelChoice::Identity => ChannelSpec::Identity { dim, sigma2 },
            ChannelChoice::Conditioned { kappa, spectrum } => ChannelSpec::Conditioned {
                dim,
                kappa: *kappa,
                spectrum: *spectrum,
                sigma2,
                seed,
            },
            ChannelChoice::Fading {
                num_taps,
                decay,
                doppler_rate,
                num_symbols,
            } => ChannelSpec::Fading {
                dim,
                profile: FadingProfile::exponential(*num_taps, *decay, *doppler_rate, *num_symbols),
                sigma2,
                seed,
            },
        }
    }
}

fn default_threshold_scale() -> f64 {
    1.0
}
fn default_ddim_steps() -> usize {
    50
}
fn default_ddim_first() -> f64 {
    0.999
}
fn default_ddim_last() -> f64 {
    0.005
}
fn default_fm_steps() -> usize {
    crate::nle::FM_DEFAULT_STEPS
}
fn default_timeout_ms() -> u64 {
    5000
}

/// Which denoiser the receiver uses. `source` takes the synthetic source's
/// own distribution; `ddim` and `flow-matching` drive their samplers with
/// the exact predictor for that distribution; `lmmse` skips the denoiser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PriorSpec {
    Source,
    Gaussian {
        mean: f64,
        variance: f64,
    },
    Gmm {
        weights: Vec<f64>,
        means: Vec<f64>,
        variances: Vec<f64>,
    },
    SoftThreshold {
        #[serde(default = "default_threshold_scale")]
        scale: f64,
    },
    Ddim {
        #[serde(default = "default_ddim_steps")]
        steps: usize,
        #[serde(default = "default_ddim_first")]
        first: f64,
        #[serde(default = "default_ddim_last")]
        last: f64,
        #[serde(default)]
        mode: DdimMode,
    },
    FlowMatching {
        #[serde(default = "default_fm_steps")]
        steps: usize,
    },
    Bridge {
        endpoint: BridgeEndpoint,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
    },
    Lmmse,
}

impl PriorSpec {
    pub fn label(&self) -> &'static str {
        match self {
            PriorSpec::Source => "source",
            PriorSpec::Gaussian { .. } => "gaussian",
            PriorSpec::Gmm { .. } => "gmm",
            PriorSpec::SoftThreshold { .. } => "soft-threshold",
            PriorSpec::Ddim { .. } => "ddim",
            PriorSpec::FlowMatching { .. } => "flow-matching",
            PriorSpec::Bridge { .. } => "bridge",
            PriorSpec::Lmmse => "lmmse",
        }
    }

    /// `None` for the LMMSE-only receiver.
    pub fn build(&self, source: &SourceSpec, geometry: (usize, usize, usize)) -> Result<Option<NlePrior>> {
        let dist = || {
            source.distribution().ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "prior {:?} needs a synthetic gaussian or gmm source",
                    self.label()
                ))
            })
        };
        Ok(Some(match self {
            PriorSpec::Source => NlePrior::mixture(dist()?),
            PriorSpec::Gaussian { mean, variance } => {
                NlePrior::mixture(GaussMixture::new(vec![1.0], vec![*mean], vec![*variance])?)
            }
            PriorSpec::Gmm {
                weights,
                means,
                variances,
            } => NlePrior::mixture(GaussMixture::new(weights.clone(), means.clone(), variances.clone())?),
            PriorSpec::SoftThreshold { scale } => NlePrior::soft_threshold(SoftThreshold {
                scale: *scale,
                geometry: (geometry.0 > 1).then_some(geometry),
            }),
            PriorSpec::Ddim {
                steps,
                first,
                last,
                mode,
            } => NlePrior::ddim(
                DdimSchedule::geometric(*steps, *first, *last)?,
                Box::new(dist()?.noise_predictor()),
                *mode,
            ),
            PriorSpec::FlowMatching { steps } => {
                NlePrior::flow_matching(Box::new(dist()?.velocity_predictor()), *steps)
            }
            PriorSpec::Bridge {
                endpoint,
                timeout_ms,
            } => NlePrior::bridge(BridgeHandle::open(endpoint, Duration::from_millis(*timeout_ms))?),
            PriorSpec::Lmmse => return Ok(None),
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub operator: u64,
    pub channel: u64,
    pub noise: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds {
            operator: 1,
            channel: 2,
            noise: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub label: Option<String>,
    pub source: SourceSpec,
    pub beta: f64,
    pub sigma: f64,
    #[serde(default = "default_channel")]
    pub channel: ChannelChoice,
    #[serde(default = "default_prior")]
    pub prior: PriorSpec,
    #[serde(default)]
    pub receiver: ReceiverConfig,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default = "default_trials")]
    pub num_trials: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_channel() -> ChannelChoice {
    ChannelChoice::Identity
}
fn default_prior() -> PriorSpec {
    PriorSpec::Source
}
fn default_trials() -> usize {
    1
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidParameter(format!("beta must lie in (0, 1], got {}", self.beta)));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if self.num_trials == 0 {
            return Err(Error::InvalidParameter("num_trials must be >= 1".into()));
        }
        self.receiver.validate()
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| {
            format!(
                "{}-{}-b{}-s{}",
                self.prior.label(),
                self.channel.label(),
                self.beta,
                self.sigma
            )
        })
    }

    pub fn from_value(v: Value) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_value(v).map_err(|e| Error::Format(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_value(parse_config_text(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Reads either form into a JSON tree.
pub fn parse_config_text(text: &str) -> Result<Value> {
    if text.trim_start().starts_with('{') {
        return serde_json::from_str(text).map_err(|e| Error::Format(format!("config json: {e}")));
    }
    let mut root = Value::Object(Map::new());
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, val) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("line {}: expected key = value", lineno + 1)))?;
        let key = key.trim();
        let val = val.trim();
        if key.is_empty() || key.split('.').any(str::is_empty) {
            return Err(Error::Format(format!("line {}: bad key {key:?}", lineno + 1)));
        }
        let parsed = serde_json::from_str(val).unwrap_or_else(|_| Value::String(val.to_string()));
        set_path(&mut root, key, parsed)
            .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
    }
    Ok(root)
}

/// Sets a dotted key inside a JSON object, creating objects on the way.
pub fn set_path(root: &mut Value, key: &str, value: Value) -> std::result::Result<(), String> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| format!("{key:?} descends into a non-object"))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

/// Resolves where a run writes: a relative `output_dir` and, when no
/// directory is configured, the run label are placed under
/// `$DOAMP_OUTPUT_ROOT` if it is set.
pub fn resolve_output_dir(cfg: &ExperimentConfig) -> Option<PathBuf> {
    let root = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from);
    match (&cfg.output_dir, root) {
        (Some(d), Some(r)) if d.is_relative() => Some(r.join(d)),
        (Some(d), _) => Some(d.clone()),
        (None, Some(r)) => Some(r.join(cfg.label())),
        (None, None) => None,
    }
}
