use std::sync::atomic::{AtomicU64, Ordering};

use doamp::nle::ddim::{ddim_sample_from, NoisePredictor};
use doamp::nle::{
    ddim_forward, ddim_x0_predict, mc_divergence_with, snr_match, DdimMode, DdimSchedule, GaussMixture,
    SnrKind,
};
use doamp::rng::{gaussian_vec, seeded};
use doamp::vecops::mse;
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = SnrKind> {
    prop_oneof![Just(SnrKind::Ddim), Just(SnrKind::FlowMatching)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn snr_match_is_decreasing_into_unit_interval(v in 0.0f64..1e6, dv in 1e-6f64..10.0, k in kind()) {
        let a = snr_match(v, k).unwrap();
        let b = snr_match(v + dv, k).unwrap();
        prop_assert!(a > 0.0 && a <= 1.0);
        prop_assert!(b < a);
    }

    #[test]
    fn forward_then_predict_round_trips(
        alpha in 0.005f64..=1.0,
        seed in any::<u64>(),
        n in 1usize..64,
    ) {
        let mut rng = seeded(seed);
        let s0 = gaussian_vec(&mut rng, n);
        let eps = gaussian_vec(&mut rng, n);
        let back = ddim_x0_predict(&ddim_forward(&s0, &eps, alpha), &eps, alpha).unwrap();
        for (p, q) in back.iter().zip(&s0) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn affine_divergence_is_exact_at_any_eps(
        c in -3.0f64..3.0,
        b in -2.0f64..2.0,
        eps in 1e-6f64..10.0,
        seed in any::<u64>(),
    ) {
        let n = 2000;
        let s = gaussian_vec(&mut seeded(seed), n);
        let phi = |x: &[f64]| Ok(x.iter().map(|v| c * v + b).collect::<Vec<_>>());
        let base = phi(&s).unwrap();
        let d = mc_divergence_with(phi, &s, &base, eps, seed ^ 1).unwrap();
        let w = gaussian_vec(&mut seeded(seed ^ 1), n);
        let expect = c * w.iter().map(|x| x * x).sum::<f64>() / n as f64;
        prop_assert!((d - expect).abs() < 1e-9 * (1.0 + 1.0 / eps));
    }

    /// For a point-mass prior every reverse step lands on the same line, so
    /// the output does not depend on which schedule entries are visited.
    #[test]
    fn point_mass_ddim_is_schedule_independent(
        target in -2.0f64..2.0,
        short in 2usize..20,
        long in 20usize..80,
        seed in any::<u64>(),
    ) {
        let pred = GaussMixture::point_mass(target).noise_predictor();
        let a = DdimSchedule::geometric(short, 0.999, 0.01).unwrap();
        let b = DdimSchedule::geometric(long, 0.999, 0.01).unwrap();
        let s = gaussian_vec(&mut seeded(seed), 16);
        let st: Vec<f64> = s.iter().map(|v| 0.1 * v).collect();
        let (x, _) = ddim_sample_from(&pred, &a, &st, short - 1, DdimMode::FullTrajectory).unwrap();
        let (y, _) = ddim_sample_from(&pred, &b, &st, long - 1, DdimMode::FullTrajectory).unwrap();
        for (p, q) in x.iter().zip(&y) {
            prop_assert!((p - q).abs() < 1e-8);
        }
    }
}

#[test]
fn mixture_posterior_beats_wiener() {
    let gm = GaussMixture::new(vec![0.3, 0.4, 0.3], vec![0.15, 0.5, 0.85], vec![0.0025; 3]).unwrap();
    let wiener = gm.moment_matched();
    let n = 100_000;
    let mut rng = seeded(12);
    let s = gm.sample(n, &mut rng);
    for v in [0.001f64, 0.01, 0.05, 0.2] {
        let r: Vec<f64> = s
            .iter()
            .zip(gaussian_vec(&mut rng, n))
            .map(|(x, e)| x + v.sqrt() * e)
            .collect();
        let bayes = mse(&gm.posterior_mean(&r, v), &s);
        let lin = mse(&wiener.posterior_mean(&r, v), &s);
        assert!(bayes <= 1.05 * lin, "v = {v}: {bayes} vs {lin}");
    }
}

struct Counting(GaussMixture, AtomicU64);

impl NoisePredictor for Counting {
    fn predict_noise(&self, s_t: &[f64], step: usize, alpha_bar: f64) -> doamp::Result<Vec<f64>> {
        self.1.fetch_add(1, Ordering::Relaxed);
        self.0.noise_predictor().predict_noise(s_t, step, alpha_bar)
    }
}

#[test]
fn sampler_reports_every_predictor_call() {
    let gm = GaussMixture::gaussian(0.0, 1.0);
    let sched = DdimSchedule::geometric(50, 0.999, 0.005).unwrap();
    let s = gaussian_vec(&mut seeded(2), 8);
    for (start, mode) in [(0, DdimMode::FullTrajectory), (30, DdimMode::FullTrajectory), (30, DdimMode::SingleStep)] {
        let counting = Counting(gm.clone(), AtomicU64::new(0));
        let (_, calls) = ddim_sample_from(&counting, &sched, &s, start, mode).unwrap();
        assert_eq!(calls, counting.1.load(Ordering::Relaxed));
    }
}
