//! Python module `doamp_py`.
//!
//! Vectors cross the boundary as plain lists of floats.
//!
//!     import doamp_py as d
//!     op = d.RmOperator(4096, 2048, seed=1)
//!     ch = d.Channel.conditioned(2048, kappa=10.0, sigma=0.05, seed=2)
//!     y = ch.transmit(op.forward(s), seed=3)
//!     out = d.run_receiver(y, ch, op, d.Prior.mixture(w, mu, var), truth=s)
//!     print(out.psnr)

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use doamp::channel::{ChannelInstance, ChannelSpec, FadingProfile, SpectrumShape};
use doamp::harness::config::ExperimentConfig;
use doamp::harness::experiment::run_experiment;
use doamp::harness::metrics;
use doamp::harness::sweep::{consolidated_csv, expand_grid, sweep};
use doamp::nle::{self, GaussMixture, NlePrior, SnrKind, SoftThreshold};
use doamp::oamp::{self, ReceiverConfig};
use doamp::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        Error::InvalidDimension(_) | Error::InvalidParameter(_) | Error::Format(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

#[pyclass(name = "RmOperator", frozen)]
struct PyRmOperator(doamp::rm::RmOperator);

#[pymethods]
impl PyRmOperator {
    #[new]
    #[pyo3(signature = (n, m, seed=0))]
    fn new(n: usize, m: usize, seed: u64) -> PyResult<Self> {
        doamp::rm::RmOperator::new(n, m, seed).map(Self).map_err(py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.0.m()
    }

    fn forward(&self, s: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.forward(&s).map_err(py_err)
    }

    /// Zero-filled inverse.
    fn inverse(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.inverse(&x).map_err(py_err)
    }

    fn inverse_with_fill(&self, x: Vec<f64>, fill: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.inverse_with_fill(&x, &fill).map_err(py_err)
    }
}

#[pyclass(name = "Channel", frozen)]
struct PyChannel(ChannelInstance);

#[pymethods]
impl PyChannel {
    #[staticmethod]
    #[pyo3(signature = (dim, sigma=0.0))]
    fn identity(dim: usize, sigma: f64) -> PyResult<Self> {
        build(ChannelSpec::Identity { dim, sigma2: sigma * sigma })
    }

    #[staticmethod]
    #[pyo3(signature = (dim, kappa, sigma=0.0, seed=0, linear=false))]
    fn conditioned(dim: usize, kappa: f64, sigma: f64, seed: u64, linear: bool) -> PyResult<Self> {
        let spectrum = if linear { SpectrumShape::Linear } else { SpectrumShape::Geometric };
        build(ChannelSpec::Conditioned {
            dim,
            kappa,
            spectrum,
            sigma2: sigma * sigma,
            seed,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (dim, sigma=0.0, seed=0, taps=4, decay=1.0, doppler=0.01, symbols=8))]
    #[allow(clippy::too_many_arguments)]
    fn fading(
        dim: usize,
        sigma: f64,
        seed: u64,
        taps: usize,
        decay: f64,
        doppler: f64,
        symbols: usize,
    ) -> PyResult<Self> {
        build(ChannelSpec::Fading {
            dim,
            profile: FadingProfile::exponential(taps, decay, doppler, symbols),
            sigma2: sigma * sigma,
            seed,
        })
    }

    #[getter]
    fn singular_values(&self) -> Vec<f64> {
        self.0.singular_values().to_vec()
    }

    #[getter]
    fn condition_number(&self) -> f64 {
        self.0.condition_number()
    }

    #[getter]
    fn sigma2(&self) -> f64 {
        self.0.sigma2()
    }

    fn apply(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.apply(&x).map_err(py_err)
    }

    #[pyo3(signature = (x, seed=0))]
    fn transmit(&self, x: Vec<f64>, seed: u64) -> PyResult<Vec<f64>> {
        self.0.transmit(&x, seed).map_err(py_err)
    }
}

fn build(spec: ChannelSpec) -> PyResult<PyChannel> {
    spec.build().map(PyChannel).map_err(py_err)
}

#[derive(Clone)]
enum PriorChoice {
    Mixture(GaussMixture),
    Threshold(SoftThreshold),
}

/// Analytic denoiser prior.
#[pyclass(name = "Prior", frozen)]
struct PyPrior(PriorChoice);

#[pymethods]
impl PyPrior {
    #[staticmethod]
    fn gaussian(mean: f64, variance: f64) -> Self {
        Self(PriorChoice::Mixture(GaussMixture::gaussian(mean, variance)))
    }

    #[staticmethod]
    fn mixture(weights: Vec<f64>, means: Vec<f64>, variances: Vec<f64>) -> PyResult<Self> {
        GaussMixture::new(weights, means, variances)
            .map(|g| Self(PriorChoice::Mixture(g)))
            .map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (scale=1.0))]
    fn soft_threshold(scale: f64) -> Self {
        Self(PriorChoice::Threshold(SoftThreshold { scale, geometry: None }))
    }

    /// Posterior-mean style denoising of `r` observed with noise variance `v`.
    fn denoise(&self, r: Vec<f64>, v: f64) -> PyResult<Vec<f64>> {
        self.instance().denoise(&r, 0.0, v).map_err(py_err)
    }
}

impl PyPrior {
    fn instance(&self) -> NlePrior {
        match &self.0 {
            PriorChoice::Mixture(g) => NlePrior::mixture(g.clone()),
            PriorChoice::Threshold(t) => NlePrior::soft_threshold(t.clone()),
        }
    }
}

#[pyclass(name = "ReceiverOutput", frozen, get_all)]
struct PyReceiverOutput {
    estimate: Vec<f64>,
    psnr: Vec<f64>,
    v_post: Vec<f64>,
    v_orth: Vec<f64>,
    termination: String,
    faults: Vec<String>,
    nfe: u64,
    trace_csv: String,
}

/// Runs the iterative receiver. `config` is a JSON object of receiver
/// settings, e.g. `'{"max_iters": 20, "trace_divisor": "n"}'`.
#[pyfunction]
#[pyo3(signature = (y, channel, operator, prior, config=None, truth=None))]
fn run_receiver(
    py: Python<'_>,
    y: Vec<f64>,
    channel: &PyChannel,
    operator: &PyRmOperator,
    prior: &PyPrior,
    config: Option<&str>,
    truth: Option<Vec<f64>>,
) -> PyResult<PyReceiverOutput> {
    let cfg: ReceiverConfig = match config {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => ReceiverConfig::default(),
    };
    let mut nle = prior.instance();
    let out = py
        .detach(|| oamp::run_receiver(&y, &channel.0, &operator.0, &mut nle, &cfg, truth.as_deref()))
        .map_err(py_err)?;
    let tr = &out.trace;
    Ok(PyReceiverOutput {
        psnr: tr.psnr_series(),
        v_post: tr.records.iter().map(|r| r.v_post).collect(),
        v_orth: tr.records.iter().map(|r| r.v_orth).collect(),
        termination: format!("{:?}", tr.termination),
        faults: tr.faults.iter().map(|f| format!("iter {}: {}", f.iter, f.message)).collect(),
        nfe: out.nfe,
        trace_csv: tr.to_csv(),
        estimate: out.estimate,
    })
}

#[pyfunction]
#[pyo3(signature = (y, channel, operator))]
fn lmmse_baseline(y: Vec<f64>, channel: &PyChannel, operator: &PyRmOperator) -> PyResult<Vec<f64>> {
    oamp::lmmse_baseline(&y, &channel.0, &operator.0, &ReceiverConfig::default()).map_err(py_err)
}

/// Denoiser time matched to variance `v`; `kind` is "ddim" or "flow".
#[pyfunction]
#[pyo3(signature = (v, kind="flow"))]
fn snr_match(v: f64, kind: &str) -> PyResult<f64> {
    let k = match kind {
        "ddim" => SnrKind::Ddim,
        "flow" | "fm" => SnrKind::FlowMatching,
        other => return Err(PyValueError::new_err(format!("unknown kind {other:?}"))),
    };
    nle::snr_match(v, k).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (truth, estimate, peak=1.0))]
fn psnr(truth: Vec<f64>, estimate: Vec<f64>, peak: f64) -> PyResult<f64> {
    metrics::psnr(&truth, &estimate, peak).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (truth, estimate, height, width, channels=1))]
fn ssim(truth: Vec<f64>, estimate: Vec<f64>, height: usize, width: usize, channels: usize) -> PyResult<f64> {
    metrics::ssim(&truth, &estimate, height, width, channels).map_err(py_err)
}

/// Runs an experiment config (flat or JSON text) and returns its summary CSV.
#[pyfunction]
fn run_experiment_text(py: Python<'_>, config: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::from_text(config).map_err(py_err)?;
    let report = py.detach(|| run_experiment(&cfg)).map_err(py_err)?;
    Ok(report.summary_csv())
}

/// Runs a grid (flat or JSON text) and returns the consolidated CSV.
#[pyfunction]
fn sweep_text(py: Python<'_>, grid: &str) -> PyResult<String> {
    let doc = doamp::harness::config::parse_config_text(grid).map_err(py_err)?;
    let cfgs = expand_grid(doc).map_err(py_err)?;
    let reports = py.detach(|| sweep(&cfgs)).map_err(py_err)?;
    Ok(consolidated_csv(&reports))
}

#[pymodule]
fn doamp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRmOperator>()?;
    m.add_class::<PyChannel>()?;
    m.add_class::<PyPrior>()?;
    m.add_class::<PyReceiverOutput>()?;
    m.add_function(wrap_pyfunction!(run_receiver, m)?)?;
    m.add_function(wrap_pyfunction!(lmmse_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(snr_match, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment_text, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_text, m)?)?;
    Ok(())
}
