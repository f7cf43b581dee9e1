//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::io::{self, Read, Write};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use doamp::channel::{gen_conditioned_channel, gen_identity_channel, ChannelInstance, SpectrumShape};
use doamp::harness::inspect::rayleigh_fit;
use doamp::harness::sweep::{expand_grid, sweep};
use doamp::nle::bridge::{encode_request, encode_response, read_request, read_response, serve};
use doamp::nle::{
    ddim_forward, ddim_x0_predict, fm_integrate, mc_divergence_with, snr_match, BridgeHandle, DdimMode,
    DdimSchedule, GaussMixture, NlePrior, SnrKind,
};
use doamp::nle::ddim::ddim_denoise;
use doamp::oamp::{lmmse_estimate, orthogonalize, run_receiver, Domain, GaussMessage, ReceiverConfig, TraceDivisor};
use doamp::rm::{Multiplexer, RmOperator};
use doamp::rng::{gaussian_vec, seeded};
use doamp::vecops::{norm, sub};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    norm(&sub(a, b)) / norm(b).max(1e-300)
}

fn operator_algebra() -> Verdict {
    let mut worst: f64 = 0.0;
    for n in [16usize, 256, 4096] {
        let mut rng = seeded(n as u64);
        let xi = Multiplexer::from_seed(n, 11).map_err(|e| e.to_string())?;
        for _ in 0..5 {
            let v = gaussian_vec(&mut rng, n);
            let fwd = xi.apply(&v).unwrap();
            worst = worst.max(rel(&xi.apply_transpose(&fwd).unwrap(), &v));
            worst = worst.max(rel(&xi.apply(&xi.apply_transpose(&v).unwrap()).unwrap(), &v));
        }
        for m in [n / 4, n / 2, n] {
            let op = RmOperator::new(n, m, 12).map_err(|e| e.to_string())?;
            for _ in 0..3 {
                let x = gaussian_vec(&mut rng, m);
                worst = worst.max(rel(&op.forward(&op.inverse(&x).unwrap()).unwrap(), &x));
                let s = gaussian_vec(&mut rng, n);
                let p1 = op.inverse(&op.forward(&s).unwrap()).unwrap();
                let p2 = op.inverse(&op.forward(&p1).unwrap()).unwrap();
                worst = worst.max(rel(&p2, &p1));
            }
        }
    }
    check(worst < 1e-10, format!("max relative residual {worst:.2e}"))
}

fn dense_lmmse(a: &DMatrix<f64>, x_pri: &DVector<f64>, v: f64, s2: f64, y: &DVector<f64>) -> (DVector<f64>, f64) {
    let (m, n) = a.shape();
    let gram = a * a.transpose() * v + DMatrix::identity(m, m) * s2;
    let w = a.transpose() * v * gram.try_inverse().expect("invertible");
    let x = x_pri + &w * (y - a * x_pri);
    let cov = DMatrix::identity(n, n) * v - &w * a * v;
    (x, cov.trace() / n as f64)
}

fn lmmse_oracle() -> Verdict {
    let mut rng = seeded(21);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let m = rng.random_range(1..=32usize);
        let n = rng.random_range(1..=32usize);
        let a = DMatrix::from_vec(m, n, gaussian_vec(&mut rng, m * n));
        let v = rng.random_range(0.01..4.0);
        let s2 = rng.random_range(1e-3..1.0);
        let x_pri = gaussian_vec(&mut rng, n);
        let y = gaussian_vec(&mut rng, m);
        let ch = ChannelInstance::from_dense(a.clone(), s2).map_err(|e| e.to_string())?;
        let pri = GaussMessage::new(x_pri.clone(), v, Domain::X).unwrap();
        let got = lmmse_estimate(&ch, &pri, &y, n, 1e-300).map_err(|e| e.to_string())?;
        let (x, vp) = dense_lmmse(&a, &DVector::from_vec(x_pri), v, s2, &DVector::from_vec(y));
        for (g, o) in got.mean.iter().zip(x.iter()) {
            worst = worst.max((g - o).abs());
        }
        worst = worst.max((got.variance - vp).abs());
    }
    check(worst < 1e-8, format!("max deviation from dense inversion {worst:.2e}"))
}

fn fusion_identity() -> Verdict {
    let mut rng = seeded(31);
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let len = if k % 2 == 0 { 1 } else { rng.random_range(2..64usize) };
        let v_pri = rng.random_range(0.01..10.0);
        let v_post = v_pri * rng.random_range(0.05..0.95);
        let pri = GaussMessage::new(gaussian_vec(&mut rng, len), v_pri, Domain::X).unwrap();
        let post = GaussMessage::new(gaussian_vec(&mut rng, len), v_post, Domain::X).unwrap();
        let orth = orthogonalize(&post, &pri).map_err(|e| e.to_string())?;
        let v = 1.0 / (1.0 / orth.variance + 1.0 / v_pri);
        worst = worst.max((v - v_post).abs());
        for i in 0..len {
            let x = v * (orth.mean[i] / orth.variance + pri.mean[i] / v_pri);
            worst = worst.max((x - post.mean[i]).abs());
        }
    }
    check(worst < 1e-10, format!("max fusion error {worst:.2e}"))
}

/// One fixed probe for every gain; the receiver's default seed.
const PROBE_SEED: u64 = 0x5eed;

fn sure_exactness() -> Verdict {
    let n = 10_000;
    let mut rng = seeded(41);
    let s = gaussian_vec(&mut rng, n);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let c = rng.random_range(-2.0..2.0);
        let b = rng.random_range(-1.0..1.0);
        let phi = |x: &[f64]| Ok(x.iter().map(|v| c * v + b).collect::<Vec<_>>());
        let base = phi(&s).unwrap();
        let d = mc_divergence_with(phi, &s, &base, 1e-3, PROBE_SEED).map_err(|e| e.to_string())?;
        worst = worst.max((d - c).abs() / c.abs());
    }
    let konst = |x: &[f64]| Ok(vec![0.7; x.len()]);
    let d0 = mc_divergence_with(konst, &s, &vec![0.7; n], 1e-3, 7).map_err(|e| e.to_string())?;
    check(
        worst < 0.03 && d0 == 0.0,
        format!("max relative gain error {:.2}%, constant denoiser {d0}", worst * 100.0),
    )
}

fn diffusion_algebra() -> Verdict {
    let mut rng = seeded(51);
    let mut round: f64 = 0.0;
    for _ in 0..200 {
        let a = rng.random_range(0.005..1.0);
        let s0 = gaussian_vec(&mut rng, 32);
        let eps = gaussian_vec(&mut rng, 32);
        let back = ddim_x0_predict(&ddim_forward(&s0, &eps, a), &eps, a).unwrap();
        for (p, q) in back.iter().zip(&s0) {
            round = round.max((p - q).abs());
        }
    }

    let (mu, var) = (0.3, 0.8);
    let prior = GaussMixture::gaussian(mu, var);
    let sched = DdimSchedule::geometric(50, 0.999, 0.005).unwrap();
    let mut post: f64 = 0.0;
    for k in [0usize, 7, 25, 49] {
        let a = sched.at(k);
        let v = (1.0 - a) / a;
        let s_in = gaussian_vec(&mut rng, 64);
        let (got, _) = ddim_denoise(&prior.noise_predictor(), &sched, &s_in, a, DdimMode::SingleStep).unwrap();
        for (g, r) in got.iter().zip(&s_in) {
            post = post.max((g - (mu + var / (var + v) * (r - mu))).abs());
        }
    }

    let c = 0.7;
    let point = GaussMixture::point_mass(c).velocity_predictor();
    let delta = 1e-3;
    let eps = gaussian_vec(&mut rng, 16);
    let (z, _) = fm_integrate(&eps, &point, 0.0, 1.0 - delta, 100).unwrap();
    let end_err = z
        .iter()
        .zip(&eps)
        .map(|(zi, e)| (zi - (delta * e + (1.0 - delta) * c)).abs())
        .fold(0.0, f64::max);

    // Gaussian data: z_t = t·μ + (std_t/std_0)(z_0 − t_0·μ), std_t² = (1−t)² + t²σ₀².
    let (gm, gs2) = (0.4, 0.25);
    let gauss = GaussMixture::gaussian(gm, gs2).velocity_predictor();
    let (t0, t1) = (0.2, 0.9);
    let std = |t: f64| ((1.0 - t) * (1.0 - t) + t * t * gs2).sqrt();
    let start = [1.3, -0.4, 0.05];
    let exact: Vec<f64> = start.iter().map(|z| t1 * gm + std(t1) / std(t0) * (z - t0 * gm)).collect();
    let err = |steps| {
        let (z, _) = fm_integrate(&start, &gauss, t0, t1, steps).unwrap();
        norm(&sub(&z, &exact))
    };
    let ratios: Vec<f64> = [25usize, 50, 100].iter().map(|&k| err(k) / err(2 * k)).collect();
    let first_order = ratios.iter().all(|r| (1.8..2.2).contains(r));

    check(
        round < 1e-12 && post < 1e-10 && end_err < 1e-3 && first_order,
        format!(
            "round trip {round:.1e}, posterior mean {post:.1e}, FM endpoint {end_err:.1e}, halving ratios {:.3}/{:.3}/{:.3}",
            ratios[0], ratios[1], ratios[2]
        ),
    )
}

fn snr_law() -> Verdict {
    let mut grid: Vec<f64> = (0..47).map(|i| 10f64.powf(-4.0 + 7.0 * i as f64 / 46.0)).collect();
    grid.extend([0.0, 1.0, 3.0]);
    let mut worst: f64 = 0.0;
    for &v in &grid {
        worst = worst.max((snr_match(v, SnrKind::FlowMatching).unwrap() - 1.0 / (1.0 + v.sqrt())).abs());
        worst = worst.max((snr_match(v, SnrKind::Ddim).unwrap() - 1.0 / (1.0 + v)).abs());
    }
    check(worst < 1e-12 && grid.len() == 50, format!("{} points, max error {worst:.1e}", grid.len()))
}

fn pseudo_awgn() -> Verdict {
    let n = 16384;
    let m = n / 2;
    let (mu, sd) = (0.5, 0.25);
    let s = GaussMixture::gaussian(mu, sd * sd).sample(n, &mut seeded(71));
    let op = RmOperator::new(n, m, 72).unwrap();
    let ch = gen_conditioned_channel(m, 10.0, SpectrumShape::Geometric, 0.05 * 0.05, 73).unwrap();
    let y = ch.transmit(&op.forward(&s).unwrap(), 74).unwrap();
    let cfg = ReceiverConfig {
        trace_divisor: TraceDivisor::N,
        ..Default::default()
    };
    let mut prior = NlePrior::gaussian(mu, sd * sd);
    let out = run_receiver(&y, &ch, &op, &mut prior, &cfg, Some(&s)).map_err(|e| e.to_string())?;
    let (mut var_dev, mut kurt_dev, mut checked): (f64, f64, usize) = (0.0, 0.0, 0);
    for r in &out.trace.records {
        if let (Some(ev), Some(k)) = (r.input_error_var, r.input_error_kurtosis) {
            var_dev = var_dev.max((ev / r.v_orth - 1.0).abs());
            kurt_dev = kurt_dev.max((k - 3.0).abs());
            checked += 1;
        }
    }
    check(
        checked > 0 && var_dev < 0.15 && kurt_dev < 0.3,
        format!(
            "{checked} iterations, max |var/v_orth - 1| = {:.1}%, max |kurtosis - 3| = {kurt_dev:.3}",
            var_dev * 100.0
        ),
    )
}

fn convergence() -> Verdict {
    let n = 16384;
    let m = (0.4 * n as f64).round() as usize;
    let gm = GaussMixture::new(vec![0.3, 0.4, 0.3], vec![0.15, 0.5, 0.85], vec![0.0025; 3]).unwrap();
    let mut stable = 0;
    let mut worst: f64 = 0.0;
    for trial in 0..10u64 {
        let s = gm.sample(n, &mut seeded(80 + trial));
        let op = RmOperator::new(n, m, 90 + trial).unwrap();
        let ch = gen_identity_channel(m, 0.05 * 0.05).unwrap();
        let y = ch.transmit(&op.forward(&s).unwrap(), 100 + trial).unwrap();
        let cfg = ReceiverConfig {
            max_iters: 12,
            tolerance: 1e-12,
            trace_divisor: TraceDivisor::N,
            divergence_seed: 0x5eed + trial,
            ..Default::default()
        };
        let mut prior = NlePrior::mixture(gm.clone());
        let out = run_receiver(&y, &ch, &op, &mut prior, &cfg, Some(&s)).map_err(|e| e.to_string())?;
        let psnr = out.trace.psnr_series();
        if psnr.len() < 6 {
            return Err(format!("trial {trial} stopped after {} iterations", psnr.len()));
        }
        let drift = psnr[5..].iter().map(|p| (p - psnr[4]).abs()).fold(0.0, f64::max);
        worst = worst.max(drift);
        if drift < 0.1 {
            stable += 1;
        }
    }
    check(stable >= 9, format!("{stable}/10 trials stable after iteration 5, worst drift {worst:.4} dB"))
}

fn trends() -> Verdict {
    let grid = r#"{"base": {"source": {"type": "gmm", "n": 4096}, "num_trials": 3,
                            "receiver": {"trace_divisor": "n", "max_iters": 10}},
                   "sweep": {"beta": [0.1, 0.4, 0.7], "sigma": [0.05, 0.5]}}"#;
    let cfgs = expand_grid(serde_json::from_str(grid).unwrap()).map_err(|e| e.to_string())?;
    let reports = sweep(&cfgs).map_err(|e| e.to_string())?;
    let psnr = |b: f64, s: f64| {
        reports
            .iter()
            .find(|r| r.beta == b && r.sigma == s)
            .map(|r| r.psnr_mean_std().0)
            .unwrap()
    };
    let mut ok = reports.iter().all(|r| r.failures() == 0);
    for s in [0.05, 0.5] {
        ok &= psnr(0.1, s) < psnr(0.4, s) && psnr(0.4, s) < psnr(0.7, s);
    }
    for b in [0.1, 0.4, 0.7] {
        ok &= psnr(b, 0.05) > psnr(b, 0.5);
    }
    let margin = reports
        .iter()
        .map(|r| r.psnr_mean_std().0 - r.baseline_psnr_mean())
        .fold(f64::INFINITY, f64::min);
    ok &= margin > 0.0;
    let table: Vec<String> = reports
        .iter()
        .map(|r| format!("({}, {}): {:.2}", r.beta, r.sigma, r.psnr_mean_std().0))
        .collect();
    check(ok, format!("{}; min gain over LMMSE {margin:.2} dB", table.join(", ")))
}

fn fading_fit() -> Verdict {
    let out = Command::new(env!("CARGO_BIN_EXE_doamp"))
        .args(["inspect-channel", "--kind", "fading", "--dim", "64", "--samples", "100000", "--seed", "1"])
        .env_remove("DOAMP_OUTPUT_ROOT")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    let field = |name: &str| -> Option<f64> {
        text.lines()
            .find_map(|l| l.strip_prefix(name).and_then(|r| r.strip_prefix(',')))
            .and_then(|v| v.parse().ok())
    };
    let (Some(d), Some(p), Some(count)) = (field("ks_statistic"), field("ks_p_value"), field("ks_samples")) else {
        return Err(format!("missing fit statistics in:\n{text}"));
    };
    let profile = doamp::channel::FadingProfile::exponential(4, 1.0, 0.01, 8);
    let direct = rayleigh_fit(&profile, 100_000, 1).map_err(|e| e.to_string())?;
    check(
        p > 0.01 && count == 1e5 && direct.statistic == d,
        format!("KS D = {d:.5}, p = {p:.3} over {count} samples"),
    )
}

const GOLDEN_REQUEST: &[u8] = &[
    b'O', b'A', b'M', b'P', b'N', b'L', b'E', b'1', //
    0x03, 0, 0, 0, 0, 0, 0, 0, //
    0, 0, 0, 0, 0, 0, 0xE0, 0x3F, // 0.5
    0, 0, 0, 0, 0, 0, 0xD0, 0x3F, // 0.25
    0, 0, 0x80, 0x3F, // 1.0
    0, 0, 0, 0xC0, // -2.0
    0, 0, 0x40, 0x3E, // 0.1875
];

const GOLDEN_RESPONSE: &[u8] = &[
    b'O', b'A', b'M', b'P', b'N', b'L', b'E', b'2', //
    0x03, 0, 0, 0, 0, 0, 0, 0, //
    0, 0, 0x80, 0x3F, //
    0, 0, 0, 0xC0, //
    0, 0, 0x40, 0x3E,
];

fn pipe_bridge<F>(handler: F, timeout: Duration) -> BridgeHandle
where
    F: FnMut(&doamp::nle::bridge::BridgeRequest) -> Vec<f32> + Send + 'static,
{
    let (cr, sw) = io::pipe().unwrap();
    let (sr, cw) = io::pipe().unwrap();
    thread::spawn(move || {
        let _ = serve(sr, sw, handler);
    });
    BridgeHandle::from_streams(cr, cw, timeout)
}

fn bridge_protocol() -> Verdict {
    let payload = [1.0, -2.0, 0.1875];
    if encode_request(0.5, 0.25, &payload) != GOLDEN_REQUEST {
        return Err("request encoding differs from the golden frame".into());
    }
    if encode_response(&[1.0, -2.0, 0.1875]) != GOLDEN_RESPONSE {
        return Err("response encoding differs from the golden frame".into());
    }
    let req = read_request(&mut &GOLDEN_REQUEST[..]).map_err(|e| e.to_string())?.unwrap();
    if (req.t_star, req.v, req.payload.as_slice()) != (0.5, 0.25, &[1.0f32, -2.0, 0.1875][..]) {
        return Err("golden request decodes wrongly".into());
    }
    if read_response(&mut &GOLDEN_RESPONSE[..]).map_err(|e| e.to_string())? != vec![1.0f32, -2.0, 0.1875] {
        return Err("golden response decodes wrongly".into());
    }

    let bin = env!("CARGO_BIN_EXE_doamp");
    let mut child = Command::new(bin)
        .arg("bridge-echo")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    child.stdin.take().unwrap().write_all(GOLDEN_REQUEST).map_err(|e| e.to_string())?;
    let mut echoed = Vec::new();
    child.stdout.take().unwrap().read_to_end(&mut echoed).map_err(|e| e.to_string())?;
    child.wait().map_err(|e| e.to_string())?;
    if echoed != GOLDEN_RESPONSE {
        return Err("echo bridge altered the golden frame".into());
    }

    let mut handle = BridgeHandle::spawn(bin, &["bridge-echo".into()], Duration::from_secs(5)).map_err(|e| e.to_string())?;
    let x: Vec<f64> = gaussian_vec(&mut seeded(111), 1000).iter().map(|&v| v as f32 as f64).collect();
    let back = handle.denoise(&x, 0.4, 0.3).map_err(|e| e.to_string())?;
    if back.iter().zip(&x).any(|(a, b)| a.to_bits() != b.to_bits()) {
        return Err("spawned echo round trip is not bit-exact".into());
    }
    drop(handle);

    let n = 512;
    let gm = GaussMixture::new(vec![0.5, 0.5], vec![0.2, 0.8], vec![0.01, 0.01]).unwrap();
    let s = gm.sample(n, &mut seeded(112));
    let op = RmOperator::new(n, n / 2, 113).unwrap();
    let ch = gen_identity_channel(n / 2, 0.01).unwrap();
    let y = ch.transmit(&op.forward(&s).unwrap(), 114).unwrap();
    let cfg = ReceiverConfig {
        max_iters: 3,
        trace_divisor: TraceDivisor::N,
        ..Default::default()
    };
    let silent = pipe_bridge(
        |_| {
            thread::sleep(Duration::from_secs(3600));
            Vec::new()
        },
        Duration::from_millis(50),
    );
    let short = pipe_bridge(|req| req.payload[1..].to_vec(), Duration::from_secs(5));
    let mut notes = Vec::new();
    for (name, handle, needle) in [("timeout", silent, "timed out"), ("bad length", short, "length")] {
        let mut prior = NlePrior::bridge(handle);
        let out = run_receiver(&y, &ch, &op, &mut prior, &cfg, Some(&s)).map_err(|e| format!("{name}: {e}"))?;
        let faults = &out.trace.faults;
        if faults.is_empty() || !faults.iter().all(|f| f.message.contains(needle)) {
            return Err(format!("{name}: expected {needle:?} faults, got {faults:?}"));
        }
        if out.trace.records.len() != 3 || !out.estimate.iter().all(|v| v.is_finite()) {
            return Err(format!("{name}: run did not complete"));
        }
        notes.push(format!("{name}: {} faults over 3 iterations", faults.len()));
    }
    check(true, format!("golden frames exact, echo bit-exact, {}", notes.join(", ")))
}

type Criterion = (&'static str, fn() -> Verdict, f64);

fn main() {
    let criteria: [Criterion; 11] = [
        ("operator algebra", operator_algebra, 5.0),
        ("LMMSE oracle equivalence", lmmse_oracle, 10.0),
        ("orthogonalization fusion identity", fusion_identity, 1.0),
        ("SURE exactness on affine denoisers", sure_exactness, 5.0),
        ("diffusion algebra", diffusion_algebra, 10.0),
        ("SNR-matching law", snr_law, 1.0),
        ("end-to-end pseudo-AWGN", pseudo_awgn, 60.0),
        ("convergence behaviour", convergence, 120.0),
        ("trend reproduction", trends, 600.0),
        ("fading-channel sanity", fading_fit, 30.0),
        ("bridge protocol", bridge_protocol, 5.0),
    ];
    // Arguments after `--` select criteria by number.
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let idx = i + 1;
        if !only.is_empty() && !only.contains(&idx) {
            continue;
        }
        let t = Instant::now();
        let verdict = run();
        let secs = t.elapsed().as_secs_f64();
        let (ok, detail) = match verdict {
            Ok(d) if secs < *budget => (true, d),
            Ok(d) => (false, format!("{d}; over the {budget} s budget")),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "[{}] {idx:>2}. {name} ({secs:.2} s): {detail}",
            if ok { "PASS" } else { "FAIL" }
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
