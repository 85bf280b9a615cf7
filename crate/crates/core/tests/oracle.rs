use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use twosided::instances::{
    binary_hamming, binary_side_information, bsc, random_binary_channel, random_binary_source,
};
use twosided::oracle::{
    deterministic_sufficiency_check, oracle_capacity, oracle_rd, GridSpec, OracleProblem,
};
use twosided::prob::{Alphabet, ConditionalKernel, DeterministicMap};
use twosided::special::{degenerate_source, AvailabilityPattern};
use twosided::{
    feasible_range, objective, rd_objective, solve_capacity, solve_rd_point, Error, SolverOptions,
};

fn grid(delta: f64) -> GridSpec {
    GridSpec::new(delta, 1 << 28).unwrap()
}

#[test]
fn grid_spec_validation() {
    assert!(GridSpec::new(0.0, 10).is_err());
    assert!(GridSpec::new(0.6, 10).is_err());
    assert!(GridSpec::new(0.03, 10).is_err());
    assert!(GridSpec::new(0.25, 10).is_ok());
    assert_eq!(GridSpec::for_alphabet(2).delta, 0.02);
    assert_eq!(GridSpec::for_alphabet(3).delta, 0.05);
}

#[test]
fn single_letter_auxiliary_carries_nothing() {
    let prob = bsc(0.2).unwrap();
    let v = oracle_capacity(&prob, 1, &grid(0.1)).unwrap();
    assert!(v.value.abs() < 1e-12);
}

#[test]
fn zero_rate_at_the_constant_reconstruction_distortion() {
    let prob = binary_hamming(0.3).unwrap();
    let (_, d_max) = feasible_range(&prob);
    let v = oracle_rd(&prob, d_max, 2, &grid(0.1)).unwrap();
    assert!(v.value.abs() < 1e-12, "{v:?}");
    assert!(matches!(
        oracle_rd(&prob, -0.1, 2, &grid(0.1)),
        Err(Error::Infeasible { .. })
    ));
}

#[test]
fn budget_is_enforced_before_any_work() {
    let prob = bsc(0.1).unwrap();
    let tiny = GridSpec::new(0.01, 50).unwrap();
    assert!(matches!(
        oracle_capacity(&prob, 3, &tiny),
        Err(Error::Budget(_))
    ));
    let src = binary_hamming(0.5).unwrap();
    assert!(matches!(
        oracle_rd(&src, 0.1, 3, &tiny),
        Err(Error::Budget(_))
    ));
}

#[test]
fn reported_optimum_evaluates_to_the_reported_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let prob = random_binary_channel(&mut rng, 2, 2).unwrap();
    let v = oracle_capacity(&prob, 2, &grid(0.05)).unwrap();
    let u = Alphabet::new("u", 2).unwrap();
    let kernel =
        ConditionalKernel::new(vec![prob.s1_alpha().clone()], u.clone(), v.kernel.clone()).unwrap();
    let map = DeterministicMap::new(
        vec![u, prob.s1_alpha().clone()],
        prob.x_alpha().clone(),
        v.map.clone(),
    )
    .unwrap();
    let direct = objective(&prob, &kernel, &map).unwrap();
    assert!((direct - v.value).abs() < 1e-9, "{direct} vs {}", v.value);

    let src = random_binary_source(&mut rng, 1, 2).unwrap();
    let (d_min, d_max) = feasible_range(&src);
    let target = 0.5 * (d_min + d_max);
    let r = oracle_rd(&src, target, 2, &grid(0.05)).unwrap();
    let u = Alphabet::new("u", 2).unwrap();
    let kernel = ConditionalKernel::new(
        vec![src.x_alpha().clone(), src.s1_alpha().clone()],
        u.clone(),
        r.kernel.clone(),
    )
    .unwrap();
    let map = DeterministicMap::new(
        vec![u, src.s2_alpha().clone()],
        src.xhat_alpha().clone(),
        r.map.clone(),
    )
    .unwrap();
    let (rate, d) = rd_objective(&src, &kernel, &map).unwrap();
    assert!((rate - r.value).abs() < 1e-9);
    assert!(d <= target + 1e-9);
}

#[test]
fn solvers_agree_with_the_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let opts = SolverOptions::default();
    for _ in 0..3 {
        let prob = random_binary_channel(&mut rng, 2, 2).unwrap();
        let v = oracle_capacity(&prob, 2, &grid(0.02)).unwrap();
        let s = solve_capacity(&prob, 2, &opts).unwrap();
        assert!(
            (s.value - v.value).abs() <= v.bound.max(1e-3),
            "solver {} oracle {v:?}",
            s.value
        );
        // The grid is a subset of the feasible set.
        assert!(s.value >= v.value - 1e-9);
    }
}

#[test]
fn deterministic_maps_suffice() {
    let prob = bsc(0.1).unwrap();
    let r =
        deterministic_sufficiency_check(OracleProblem::Channel(&prob), 2, &grid(0.05), &grid(0.1))
            .unwrap();
    assert!(r.passed, "{r:?}");
    assert!(r.stochastic >= r.deterministic - 1e-9);

    let src = degenerate_source(
        &binary_side_information(0.25).unwrap(),
        AvailabilityPattern::RECEIVER,
    )
    .unwrap();
    let r = deterministic_sufficiency_check(
        OracleProblem::Source(&src, 0.1),
        2,
        &grid(0.05),
        &grid(0.1),
    )
    .unwrap();
    assert!(r.passed, "{r:?}");
    assert!(r.stochastic <= r.deterministic + 1e-9);
    let s = solve_rd_point(&src, 0.1, 2, &SolverOptions::default()).unwrap();
    assert!(s.rate <= r.deterministic + 1e-9);
}
