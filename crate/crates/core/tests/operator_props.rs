use doamp::rm::{Multiplexer, RmOperator};
use doamp::rng::{gaussian_vec, seeded};
use doamp::vecops::{norm, sub};
use proptest::prelude::*;

fn rel(a: &[f64], b: &[f64]) -> f64 {
    norm(&sub(a, b)) / norm(b).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn multiplexer_is_orthogonal(n in 1usize..1500, seed in any::<u64>(), vseed in any::<u64>()) {
        let xi = Multiplexer::from_seed(n, seed).unwrap();
        let v = gaussian_vec(&mut seeded(vseed), n);
        prop_assert!(rel(&xi.apply_transpose(&xi.apply(&v).unwrap()).unwrap(), &v) < 1e-10);
        prop_assert!((norm(&xi.apply(&v).unwrap()) - norm(&v)).abs() <= 1e-10 * norm(&v));
    }

    #[test]
    fn forward_is_linear(
        n in 2usize..1024,
        frac in 0.05f64..1.0,
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        seed in any::<u64>(),
    ) {
        let m = ((n as f64 * frac).round() as usize).clamp(1, n);
        let op = RmOperator::new(n, m, seed).unwrap();
        let mut rng = seeded(seed ^ 0xabc);
        let u = gaussian_vec(&mut rng, n);
        let w = gaussian_vec(&mut rng, n);
        let mix: Vec<f64> = u.iter().zip(&w).map(|(x, y)| a * x + b * y).collect();
        let lhs = op.forward(&mix).unwrap();
        let fu = op.forward(&u).unwrap();
        let fw = op.forward(&w).unwrap();
        for i in 0..m {
            prop_assert!((lhs[i] - (a * fu[i] + b * fw[i])).abs() < 1e-12 * (1.0 + norm(&mix)));
        }
    }

    #[test]
    fn builds_are_bit_identical(n in 1usize..2048, frac in 0.01f64..1.0, seed in any::<u64>()) {
        let m = ((n as f64 * frac).round() as usize).clamp(1, n);
        let s = gaussian_vec(&mut seeded(seed.wrapping_add(1)), n);
        let a = RmOperator::new(n, m, seed).unwrap().forward(&s).unwrap();
        let b = RmOperator::new(n, m, seed).unwrap().forward(&s).unwrap();
        prop_assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn inverse_then_forward_is_identity(n in 1usize..1024, frac in 0.01f64..1.0, seed in any::<u64>()) {
        let m = ((n as f64 * frac).round() as usize).clamp(1, n);
        let op = RmOperator::new(n, m, seed).unwrap();
        let x = gaussian_vec(&mut seeded(seed ^ 7), m);
        prop_assert!(rel(&op.forward(&op.inverse(&x).unwrap()).unwrap(), &x) < 1e-10);
    }
}

#[test]
fn whitening_at_full_rate() {
    let n = 64;
    let draws = 10_000;
    let v: f64 = 0.3;
    let op = RmOperator::new(n, n, 5).unwrap();
    let mut rng = seeded(6);
    let mut sum2 = vec![0.0; n];
    let pairs = [(0usize, 1usize), (5, 40), (17, 63), (22, 23), (8, 50)];
    let mut cross = vec![0.0; pairs.len()];
    for _ in 0..draws {
        let e: Vec<f64> = gaussian_vec(&mut rng, n).iter().map(|x| v.sqrt() * x).collect();
        let s = op.inverse(&e).unwrap();
        for (acc, x) in sum2.iter_mut().zip(&s) {
            *acc += x * x;
        }
        for (c, &(i, j)) in cross.iter_mut().zip(&pairs) {
            *c += s[i] * s[j];
        }
    }
    for acc in &sum2 {
        let var = acc / draws as f64;
        assert!((var / v - 1.0).abs() < 0.05, "per-coordinate variance {var}");
    }
    for c in &cross {
        assert!((c / draws as f64 / v).abs() < 0.05);
    }
}
