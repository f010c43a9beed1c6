use gentledp::classical::{bit_flip_neighbors, dp_epsilon, ClassicalMechanism, OutputKernel};
use gentledp::linalg;
use gentledp::measure::{
    gentle_to_dp, NoisyCountMeasurement, RandomizedResponse, MIN_OUTCOME_PROB,
};
use gentledp::quantum::{density_trace_distance, random, DensityMatrix, PureState};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn product_alpha(meas: &NoisyCountMeasurement, qubits: &[PureState]) -> f64 {
    let w = meas.weights_product_pure(qubits).unwrap();
    let dist = meas.outcome_dist_from_weights(&w).unwrap();
    dist.iter()
        .filter(|&(_, p)| p >= MIN_OUTCOME_PROB)
        .map(|(y, _)| {
            let (ov, _) = meas.overlap_from_weights(&w, y).unwrap();
            (1.0 - ov * ov).max(0.0).sqrt()
        })
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dp_and_gentleness_transfer(seed in any::<u64>(), n in 1usize..=10, s in 0usize..3) {
        let sigma = [2.0, 4.0, 8.0][s];
        let meas = NoisyCountMeasurement::lsigma(n, sigma).unwrap();
        let qubits = random::product_qubits(&mut rng(seed), n);
        prop_assert!(product_alpha(&meas, &qubits) <= 2.0 * 2f64.sqrt() * (n as f64).sqrt() / sigma);
        let kernel = ClassicalMechanism::noisy_count(n, sigma).unwrap();
        prop_assert!(dp_epsilon(&kernel, bit_flip_neighbors(n)) <= 1.0 / sigma + 1e-9);
    }

    #[test]
    fn count_is_permutation_symmetric(seed in any::<u64>(), n in 2usize..7, sigma in 0.5f64..6.0) {
        let mut r = rng(seed);
        let meas = NoisyCountMeasurement::lsigma(n, sigma).unwrap();
        let a = random::haar_state(&mut r, vec![2]);
        let b = random::haar_state(&mut r, vec![2]);
        let mut qubits: Vec<PureState> = (0..n).map(|i| if i % 3 == 0 { b.clone() } else { a.clone() }).collect();
        let before = meas.outcome_dist(&PureState::tensor_all(&qubits).unwrap().into()).unwrap();
        qubits.shuffle(&mut r);
        let after = meas.outcome_dist(&PureState::tensor_all(&qubits).unwrap().into()).unwrap();
        for ((y1, p1), (y2, p2)) in before.iter().zip(after.iter()) {
            prop_assert_eq!(y1, y2);
            prop_assert!((p1 - p2).abs() <= 1e-12);
        }
    }

    /// Σ_y p_y ρ_y keeps ρ_XY scaled by Σ_y √(k(y|w_X) k(y|w_Y)).
    #[test]
    fn conditioning_averages_to_count_dephased_state(seed in any::<u64>(), n in 1usize..4, sigma in 0.3f64..3.0) {
        let rho = random::random_density(&mut rng(seed), vec![2; n]);
        let meas = NoisyCountMeasurement::lsigma(n, sigma).unwrap();
        let kernel = ClassicalMechanism::noisy_count(n, sigma).unwrap();
        let d = 1usize << n;
        let mut avg = linalg::CMatrix::zeros(d, d);
        let dist = meas.outcome_dist(&rho.clone().into()).unwrap();
        for (y, p) in dist.iter() {
            if p < MIN_OUTCOME_PROB {
                continue;
            }
            let (post, _) = meas.condition_density(&rho, y).unwrap();
            avg += post.matrix() * linalg::re(p);
        }
        let w = |x: usize| x.count_ones() as usize;
        for row in 0..d {
            for col in 0..d {
                let bc: f64 = kernel
                    .outputs()
                    .into_iter()
                    .map(|y| (kernel.weight_prob(w(row), y).unwrap() * kernel.weight_prob(w(col), y).unwrap()).sqrt())
                    .sum();
                let want = rho.matrix()[(row, col)] * bc;
                prop_assert!((avg[(row, col)] - want).norm() <= 1e-8);
            }
        }
    }

    #[test]
    fn measured_gentleness_implies_measured_privacy(seed in any::<u64>(), beta in 0.01f64..0.12) {
        let rr = RandomizedResponse::new(beta).unwrap();
        let mut r = rng(seed);
        let states: Vec<DensityMatrix> = (0..20).map(|_| random::random_density(&mut r, vec![2])).collect();
        let alpha = states
            .iter()
            .flat_map(|s| (0..2).map(move |b| (s, b)))
            .map(|(s, b)| density_trace_distance(&rr.post(s, b).unwrap(), s).unwrap())
            .fold(0.0, f64::max);
        let mut eps: f64 = 0.0;
        for a in &states {
            for c in &states {
                for b in 0..2 {
                    eps = eps.max((rr.prob(a, b) / rr.prob(c, b)).ln());
                }
            }
        }
        prop_assert!(gentle_to_dp(alpha).unwrap() >= eps);
    }

    #[test]
    fn noisy_count_gentleness_implies_privacy(seed in any::<u64>(), n in 1usize..6, sigma in 8.0f64..30.0) {
        let meas = NoisyCountMeasurement::lsigma(n, sigma).unwrap();
        let mut r = rng(seed);
        let mut alpha: f64 = 0.0;
        let mut eps: f64 = 0.0;
        for _ in 0..10 {
            let a = random::product_qubits(&mut r, n);
            let mut b = a.clone();
            b[rand::Rng::random_range(&mut r, 0..n)] = random::haar_state(&mut r, vec![2]);
            alpha = alpha.max(product_alpha(&meas, &a)).max(product_alpha(&meas, &b));
            let da = meas.outcome_dist_from_weights(&meas.weights_product_pure(&a).unwrap()).unwrap();
            let db = meas.outcome_dist_from_weights(&meas.weights_product_pure(&b).unwrap()).unwrap();
            for ((_, pa), (_, pb)) in da.iter().zip(db.iter()) {
                if pa > 0.0 && pb > 0.0 {
                    eps = eps.max((pa / pb).ln().abs());
                }
            }
        }
        prop_assume!(alpha < 0.25);
        prop_assert!(gentle_to_dp(alpha).unwrap() >= eps);
    }
}
