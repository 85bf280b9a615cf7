use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use twosided::binning::{is_typical, TypicalityParams};
use twosided::instances::{random_binary_channel, random_binary_source, random_simplex};
use twosided::prob::{Alphabet, ConditionalKernel, DeterministicMap, JointDist};
use twosided::rate_distortion::default_lambda_grid;
use twosided::{
    feasible_range, objective, solve_capacity, solve_rd_point, sweep_rd_curve, SolverOptions,
};

fn joint3(seed: u64) -> JointDist {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axes = vec![
        Alphabet::new("a", 2).unwrap(),
        Alphabet::new("b", 3).unwrap(),
        Alphabet::new("c", 2).unwrap(),
    ];
    JointDist::new(axes, random_simplex(&mut rng, 12)).unwrap()
}

fn quick() -> SolverOptions {
    SolverOptions {
        restarts: 8,
        ..SolverOptions::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mutual_information_is_bounded(seed in any::<u64>()) {
        let j = joint3(seed);
        let i = j.mutual_information_between(&["a"], &["b", "c"]).unwrap();
        prop_assert!(i >= -1e-12);
        prop_assert!(i <= j.entropy_of(&["a"]).unwrap() + 1e-12);
        prop_assert!(i <= j.entropy_of(&["b", "c"]).unwrap() + 1e-12);
    }

    #[test]
    fn chain_rule(seed in any::<u64>()) {
        let j = joint3(seed);
        let whole = j.mutual_information_between(&["a"], &["b", "c"]).unwrap();
        let first = j.mutual_information_between(&["a"], &["c"]).unwrap();
        let rest = j.conditional_mutual_information_between(&["a"], &["b"], &["c"]).unwrap();
        prop_assert!((whole - first - rest).abs() < 1e-10);
        prop_assert!(rest >= -1e-12);
    }

    #[test]
    fn typicality_ignores_the_order_of_positions(
        seq in proptest::collection::vec((0usize..2, 0usize..3), 1..40),
        rot in 0usize..40,
        eps in 0.01f64..0.5,
    ) {
        let j = JointDist::new(
            vec![Alphabet::new("a", 2).unwrap(), Alphabet::new("b", 3).unwrap()],
            vec![0.1, 0.2, 0.2, 0.25, 0.15, 0.1],
        ).unwrap();
        let params = TypicalityParams::new(eps).unwrap();
        let (a, b): (Vec<usize>, Vec<usize>) = seq.iter().copied().unzip();
        let mut shifted = seq.clone();
        shifted.rotate_left(rot % seq.len());
        let (a2, b2): (Vec<usize>, Vec<usize>) = shifted.into_iter().unzip();
        prop_assert_eq!(
            is_typical(&[&a, &b], &j, &params).unwrap(),
            is_typical(&[&a2, &b2], &j, &params).unwrap()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn capacity_dominates_every_configuration(seed in any::<u64>(), table in proptest::collection::vec(0usize..2, 6)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prob = random_binary_channel(&mut rng, 2, 2).unwrap();
        let best = solve_capacity(&prob, 3, &quick()).unwrap();
        let u = Alphabet::new("u", 3).unwrap();
        let rows: Vec<f64> = (0..2).flat_map(|_| random_simplex(&mut rng, 3)).collect();
        let kernel = ConditionalKernel::new(vec![prob.s1_alpha().clone()], u.clone(), rows).unwrap();
        let map = DeterministicMap::new(vec![u, prob.s1_alpha().clone()], prob.x_alpha().clone(), table).unwrap();
        let v = objective(&prob, &kernel, &map).unwrap();
        prop_assert!(best.value >= v - 1e-6, "{} < {}", best.value, v);
        prop_assert!(best.value >= -1e-9 && best.value <= 1.0 + 1e-9);
    }

    #[test]
    fn rate_falls_as_distortion_grows(seed in any::<u64>(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prob = random_binary_source(&mut rng, 2, 2).unwrap();
        let (d_min, d_max) = feasible_range(&prob);
        let (lo, hi) = (a.min(b), a.max(b));
        let d1 = d_min + lo * (d_max - d_min);
        let d2 = d_min + hi * (d_max - d_min);
        let r1 = solve_rd_point(&prob, d1, 3, &quick()).unwrap();
        let r2 = solve_rd_point(&prob, d2, 3, &quick()).unwrap();
        prop_assert!(r2.rate <= r1.rate + 1e-6, "R({d1}) = {} < R({d2}) = {}", r1.rate, r2.rate);
        prop_assert!(r1.achieved_d <= d1 + 1e-9 && r1.rate >= -1e-9);
    }

    #[test]
    fn swept_curves_are_convex_and_monotone(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prob = random_binary_source(&mut rng, 2, 2).unwrap();
        let curve = sweep_rd_curve(&prob, 3, &default_lambda_grid(12), &quick()).unwrap();
        prop_assert!(curve.is_monotone(1e-6));
        prop_assert!(curve.convexity_violations(1e-4).is_empty());
        prop_assert!(curve.points.windows(2).all(|w| w[0].achieved_d <= w[1].achieved_d));
    }
}
