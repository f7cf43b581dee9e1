use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::config::ExperimentConfig;
use crate::harness::metrics::{psnr, ssim};
use crate::harness::source::{load_source, save_netpbm, save_tensor, SourceSignal};
use crate::oamp::{lmmse_baseline, run_receiver, IterationTrace};
use crate::rm::{compressed_len, RmOperator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub trial: usize,
    pub psnr: f64,
    pub ssim: f64,
    /// PSNR of the single-pass LMMSE estimate on the same observation.
    pub baseline_psnr: f64,
    pub iterations: usize,
    pub nfe: u64,
    pub termination: String,
    pub faults: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub label: String,
    pub beta: f64,
    pub sigma: f64,
    pub prior: String,
    pub channel: String,
    pub n: usize,
    pub m: usize,
    pub trials: Vec<TrialMetrics>,
    /// Excluded from every CSV so that reruns compare byte for byte.
    pub wall_time_s: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, v.sqrt())
}

pub const SUMMARY_CSV_HEADER: &str = "beta,sigma,prior,channel,n,m,trials,psnr_mean,psnr_std,ssim_mean,ssim_std,baseline_psnr_mean,iterations_mean,nfe_mean,failures";
pub const TRIALS_CSV_HEADER: &str = "trial,psnr,ssim,baseline_psnr,iterations,nfe,termination,faults,error";

impl MetricReport {
    fn ok_trials(&self) -> impl Iterator<Item = &TrialMetrics> {
        self.trials.iter().filter(|t| t.error.is_none())
    }

    pub fn psnr_mean_std(&self) -> (f64, f64) {
        mean_std(&self.ok_trials().map(|t| t.psnr).collect::<Vec<_>>())
    }

    pub fn ssim_mean_std(&self) -> (f64, f64) {
        mean_std(&self.ok_trials().map(|t| t.ssim).collect::<Vec<_>>())
    }

    pub fn baseline_psnr_mean(&self) -> f64 {
        mean_std(&self.ok_trials().map(|t| t.baseline_psnr).collect::<Vec<_>>()).0
    }

    pub fn failures(&self) -> usize {
        self.trials.iter().filter(|t| t.error.is_some()).count()
    }

    /// One row under [`SUMMARY_CSV_HEADER`].
    pub fn summary_row(&self) -> String {
        let (pm, ps) = self.psnr_mean_std();
        let (sm, ss) = self.ssim_mean_std();
        let ok: Vec<&TrialMetrics> = self.ok_trials().collect();
        let iters = mean_std(&ok.iter().map(|t| t.iterations as f64).collect::<Vec<_>>()).0;
        let nfe = mean_std(&ok.iter().map(|t| t.nfe as f64).collect::<Vec<_>>()).0;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.beta,
            self.sigma,
            self.prior,
            self.channel,
            self.n,
            self.m,
            self.trials.len(),
            pm,
            ps,
            sm,
            ss,
            self.baseline_psnr_mean(),
            iters,
            nfe,
            self.failures()
        )
    }

    pub fn summary_csv(&self) -> String {
        format!("{SUMMARY_CSV_HEADER}\n{}\n", self.summary_row())
    }

    pub fn trials_csv(&self) -> String {
        let mut out = format!("{TRIALS_CSV_HEADER}\n");
        for t in &self.trials {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                t.trial,
                t.psnr,
                t.ssim,
                t.baseline_psnr,
                t.iterations,
                t.nfe,
                t.termination,
                t.faults,
                t.error.as_deref().unwrap_or("").replace([',', '\n'], ";")
            ));
        }
        out
    }
}

/// Everything one trial produces.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub metrics: TrialMetrics,
    pub truth: SourceSignal,
    pub estimate: SourceSignal,
    pub trace: IterationTrace,
}

fn termination_label(trace: &IterationTrace) -> String {
    use crate::oamp::Termination::*;
    match &trace.termination {
        Converged { .. } => "converged".into(),
        MaxIters => "max-iters".into(),
        ExactLinear { .. } => "exact-linear".into(),
        NoInformation { .. } => "no-information".into(),
        Error { .. } => "error".into(),
    }
}

/// Trial `t` offsets every seed (source, operator, channel, noise,
/// divergence probe) by `t`.
pub fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialOutcome> {
    let t = trial as u64;
    let source_spec = cfg.source.for_trial(t);
    let truth = load_source(&source_spec)?;
    let n = truth.len();
    let m = compressed_len(n, cfg.beta)?;
    let op = RmOperator::new(n, m, cfg.seeds.operator.wrapping_add(t))?;
    let spec = cfg
        .channel
        .to_spec(m, cfg.sigma * cfg.sigma, cfg.seeds.channel.wrapping_add(t));
    let ch = spec.build()?;
    let x = op.forward(&truth.values)?;
    let y = ch.transmit(&x, cfg.seeds.noise.wrapping_add(t))?;

    let mut rcfg = cfg.receiver.clone();
    rcfg.divergence_seed = rcfg.divergence_seed.wrapping_add(t);
    let baseline = lmmse_baseline(&y, &ch, &op, &rcfg)?;
    let geometry = (truth.height, truth.width, truth.channels);

    let (est, trace, nfe) = match cfg.prior.build(&source_spec, geometry)? {
        Some(mut prior) => {
            let out = run_receiver(&y, &ch, &op, &mut prior, &rcfg, Some(&truth.values))?;
            (out.estimate, out.trace, out.nfe)
        }
        None => (
            baseline.clone(),
            IterationTrace {
                records: Vec::new(),
                faults: Vec::new(),
                termination: crate::oamp::Termination::MaxIters,
            },
            0,
        ),
    };
    let estimate = SourceSignal {
        values: est,
        ..truth.clone()
    };
    let metrics = TrialMetrics {
        trial,
        psnr: psnr(&truth.values, &estimate.values, 1.0)?,
        ssim: ssim(&truth.values, &estimate.values, truth.height, truth.width, truth.channels)?,
        baseline_psnr: psnr(&truth.values, &baseline, 1.0)?,
        iterations: trace.len(),
        nfe,
        termination: termination_label(&trace),
        faults: trace.faults.len(),
        error: None,
    };
    Ok(TrialOutcome {
        metrics,
        truth,
        estimate,
        trace,
    })
}

/// Runs every trial; a failing trial is recorded and the rest continue.
/// Writes traces, per-trial and summary CSVs and reconstructions when
/// `out_dir` is given.
pub fn run_experiment_to(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<MetricReport> {
    cfg.validate()?;
    let started = Instant::now();
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.json"), cfg.to_json())?;
    }
    let mut trials = Vec::with_capacity(cfg.num_trials);
    let mut dims = (0, 0);
    for t in 0..cfg.num_trials {
        match run_trial(cfg, t) {
            Ok(out) => {
                dims = (out.truth.len(), compressed_len(out.truth.len(), cfg.beta)?);
                if let Some(dir) = out_dir {
                    fs::write(dir.join(format!("trace_{t:03}.csv")), out.trace.to_csv())?;
                    if out.estimate.is_image() && matches!(out.estimate.channels, 1 | 3) {
                        save_netpbm(&dir.join(format!("estimate_{t:03}.pgm")), &out.estimate)?;
                    } else {
                        save_tensor(&dir.join(format!("estimate_{t:03}.mat")), &out.estimate)?;
                    }
                }
                trials.push(out.metrics);
            }
            Err(e) => {
                log::warn!("trial {t} failed: {e}");
                trials.push(TrialMetrics {
                    trial: t,
                    psnr: f64::NAN,
                    ssim: f64::NAN,
                    baseline_psnr: f64::NAN,
                    iterations: 0,
                    nfe: 0,
                    termination: "error".into(),
                    faults: 0,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    let report = MetricReport {
        label: cfg.label(),
        beta: cfg.beta,
        sigma: cfg.sigma,
        prior: cfg.prior.label().into(),
        channel: cfg.channel.label(),
        n: dims.0,
        m: dims.1,
        trials,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    if let Some(dir) = out_dir {
        fs::write(dir.join("trials.csv"), report.trials_csv())?;
        fs::write(dir.join("summary.csv"), report.summary_csv())?;
        fs::write(dir.join("timing.csv"), format!("wall_time_s\n{}\n", report.wall_time_s))?;
    }
    Ok(report)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricReport> {
    run_experiment_to(cfg, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::metrics::PSNR_CEILING_DB;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_text(text).unwrap()
    }

    #[test]
    fn noiseless_identity_hits_ceiling() {
        let c = cfg("beta = 1\nsigma = 0\nsource.type = gmm\nsource.n = 512\nnum_trials = 3");
        let r = run_experiment(&c).unwrap();
        assert_eq!(r.trials.len(), 3);
        assert!(r.trials.iter().all(|t| t.psnr == PSNR_CEILING_DB));
    }

    #[test]
    fn failing_trial_is_isolated() {
        let c = cfg("beta = 0.5\nsigma = 0.1\nsource.type = image\nsource.path = /nonexistent.pgm");
        let r = run_experiment(&c).unwrap();
        assert_eq!(r.failures(), 1);
        assert!(r.summary_row().ends_with(",1"));
    }

    #[test]
    fn writes_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg("beta = 0.5\nsigma = 0.1\nsource.type = gaussian\nsource.n = 256\nchannel.type = conditioned\nchannel.kappa = 4\nreceiver.max_iters = 3");
        let r = run_experiment_to(&c, Some(dir.path())).unwrap();
        for f in ["config.json", "trials.csv", "summary.csv", "timing.csv", "trace_000.csv", "estimate_000.mat"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        assert_eq!(r.m, 128);
    }
}
