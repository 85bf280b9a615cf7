use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twosided::binning::{
    build_channel_code, build_source_code, channel_decode, channel_encode, is_typical, simulate,
    source_decode, source_encode, ChannelDecoding, ChannelEncoding, Metric, SimOptions, Simulation,
    SourceDecodeStatus, TypicalityParams,
};
use twosided::instances::{binary_side_information, stuck_at};
use twosided::prob::{Alphabet, ConditionalKernel, JointDist};
use twosided::special::{degenerate_channel, degenerate_source, AvailabilityPattern};
use twosided::{
    solve_capacity, solve_rd_point, CapacityResult, ChannelProblem, Error, SolverOptions,
};

fn stuck_at_point() -> (ChannelProblem, CapacityResult) {
    let prob = degenerate_channel(&stuck_at(0.2).unwrap(), AvailabilityPattern::SENDER).unwrap();
    let point = solve_capacity(&prob, 2, &SolverOptions::default()).unwrap();
    (prob, point)
}

fn eps(e: f64) -> TypicalityParams {
    TypicalityParams::new(e).unwrap()
}

/// The code's reference kernel: entries below 1e-9 dropped.
fn cleaned(k: &ConditionalKernel) -> ConditionalKernel {
    let w = k.to_axis().size();
    let mut rows = k.rows().to_vec();
    for row in rows.chunks_mut(w) {
        row.iter_mut().filter(|x| **x < 1e-9).for_each(|x| *x = 0.0);
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= s);
    }
    ConditionalKernel::new(k.from_axes().to_vec(), k.to_axis().clone(), rows).unwrap()
}

#[test]
fn iid_draws_are_typical_with_high_frequency() {
    let a = Alphabet::new("a", 2).unwrap();
    let b = Alphabet::new("b", 2).unwrap();
    let mass = vec![0.4, 0.1, 0.2, 0.3];
    let reference = JointDist::new(vec![a, b], mass.clone()).unwrap();
    let sampler = WeightedIndex::new(&mass).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let params = eps(0.05);
    let hits = (0..1000)
        .filter(|_| {
            let pairs: Vec<usize> = (0..1000).map(|_| sampler.sample(&mut rng)).collect();
            let xs: Vec<usize> = pairs.iter().map(|p| p / 2).collect();
            let ys: Vec<usize> = pairs.iter().map(|p| p % 2).collect();
            is_typical(&[&xs, &ys], &reference, &params).unwrap()
        })
        .count();
    // Exact binomial tails put the miss probability below 0.002.
    assert!(hits >= 990, "{hits} of 1000 typical");
}

#[test]
fn typicality_is_permutation_invariant_and_rejects_bad_lengths() {
    let a = Alphabet::new("a", 2).unwrap();
    let reference = JointDist::new(vec![a], vec![0.25, 0.75]).unwrap();
    let s = [1, 0, 1, 1];
    let t = [1, 1, 0, 1];
    assert!(is_typical(&[&s], &reference, &eps(0.01)).unwrap());
    assert!(is_typical(&[&t], &reference, &eps(0.01)).unwrap());
    assert!(!is_typical(&[&[1, 1, 1, 1]], &reference, &eps(0.2)).unwrap());
    assert!(is_typical(&[&[1, 1, 1, 1]], &reference, &eps(0.25)).unwrap());
    assert!(is_typical(&[&s, &t], &reference, &eps(0.1)).is_err());
}

#[test]
fn minimal_code_puts_every_codeword_in_one_bin() {
    // Noiseless ternary channel: I(U; Y) = log2 3.
    let w = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    let prob = ChannelProblem::from_arrays(3, 3, 1, 1, vec![1.0], w).unwrap();
    let point = solve_capacity(&prob, 3, &SolverOptions::default()).unwrap();
    let code = build_channel_code(&prob, 1.45, &point, 1, &eps(0.1), 3).unwrap();
    assert_eq!((code.num_codewords, code.num_bins), (2, 2));
    let mut seen = vec![0; code.num_codewords];
    for b in 0..code.num_bins {
        for &i in code.bin(b) {
            assert_eq!(code.bin_of[i], b);
            seen[i] += 1;
        }
    }
    assert!(seen.iter().all(|&c| c == 1));
}

#[test]
fn codes_rebuild_identically_from_a_seed() {
    let (prob, point) = stuck_at_point();
    let a = build_channel_code(&prob, 0.4, &point, 8, &eps(0.1), 17).unwrap();
    let b = build_channel_code(&prob, 0.4, &point, 8, &eps(0.1), 17).unwrap();
    assert_eq!(a, b);
    let c = build_channel_code(&prob, 0.4, &point, 8, &eps(0.1), 18).unwrap();
    assert_ne!(a.codewords, c.codewords);
}

#[test]
fn stuck_at_counts_follow_the_solved_informations() {
    let (prob, point) = stuck_at_point();
    let code = build_channel_code(&prob, 0.4, &point, 8, &eps(0.1), 1).unwrap();
    let cw = (8.0 * (code.i_receiver - 0.2)).exp2().floor() as usize;
    let bins = (8.0 * (0.4 - 0.4_f64)).exp2().floor() as usize;
    assert_eq!(code.num_codewords, cw.max(1));
    assert_eq!(code.num_bins, bins.max(1));
    assert!((code.i_receiver - point.value - code.i_sender).abs() < 1e-6);
    assert_eq!(code.codewords.len(), code.num_codewords * 8);
}

#[test]
fn encoder_sends_the_first_typical_codeword_of_the_bin() {
    let (prob, point) = stuck_at_point();
    let code = build_channel_code(&prob, 0.45, &point, 12, &eps(0.1), 2).unwrap();
    let joint = prob
        .full_joint(&cleaned(&point.u_given_s1), &point.x_map)
        .unwrap();
    let reference = joint.marginalize(&["u", "s1"]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let states = WeightedIndex::new(prob.p_s1()).unwrap();
    let mut sent = 0;
    for _ in 0..40 {
        let s1: Vec<usize> = (0..12).map(|_| states.sample(&mut rng)).collect();
        let bin = rng.random_range(0..code.num_bins);
        let expected = code
            .bin(bin)
            .iter()
            .copied()
            .find(|&i| is_typical(&[code.codeword(i), &s1], &reference, &code.params).unwrap());
        match channel_encode(&code, bin, &s1).unwrap() {
            ChannelEncoding::Sent { index, x } => {
                sent += 1;
                assert_eq!(Some(index), expected);
                assert_eq!(code.bin_of[index], bin);
                let u = code.codeword(index);
                assert!((0..12).all(|t| x[t] == code.x_map.apply(&[u[t], s1[t]])));
            }
            ChannelEncoding::NoTypicalCodeword => assert_eq!(expected, None),
        }
    }
    assert!(sent > 0);
}

#[test]
fn empty_bin_is_an_encoding_failure() {
    let (prob, point) = stuck_at_point();
    // More bins than codewords.
    let code = build_channel_code(&prob, 1.2, &point, 4, &eps(0.01), 4).unwrap();
    assert!(code.num_bins > code.num_codewords);
    let empty = (0..code.num_bins)
        .find(|&b| code.bin(b).is_empty())
        .expect("an empty bin");
    let s1 = vec![0; 4];
    assert_eq!(
        channel_encode(&code, empty, &s1).unwrap(),
        ChannelEncoding::NoTypicalCodeword
    );
    assert!(channel_encode(&code, code.num_bins, &s1).is_err());
}

#[test]
fn single_codeword_decodes_to_its_bin() {
    let w = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    let prob = ChannelProblem::from_arrays(3, 3, 1, 1, vec![1.0], w).unwrap();
    let point = solve_capacity(&prob, 3, &SolverOptions::default()).unwrap();
    let code = build_channel_code(&prob, 0.1, &point, 3, &eps(0.8), 0).unwrap();
    assert_eq!(code.num_codewords, 1);
    let u = code.codeword(0);
    let y: Vec<usize> = u.iter().map(|&u| code.x_map.apply(&[u, 0])).collect();
    assert_eq!(
        channel_decode(&code, &y, &[0, 0, 0]).unwrap(),
        ChannelDecoding::Decoded { index: 0, bin: 0 }
    );
}

#[test]
fn several_typical_codewords_make_the_decoder_give_up() {
    let (prob, point) = stuck_at_point();
    let code = build_channel_code(&prob, 0.4, &point, 8, &eps(0.2), 6).unwrap();
    let joint = prob
        .full_joint(&cleaned(&point.u_given_s1), &point.x_map)
        .unwrap();
    let reference = joint.marginalize(&["u", "y", "s2"]).unwrap();
    let s2 = vec![0; 8];
    let states = WeightedIndex::new(prob.p_s1()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut ambiguous = 0;
    for _ in 0..200 {
        // The noiseless output of a random codeword under a random state.
        let u = code.codeword(rng.random_range(0..code.num_codewords));
        let y: Vec<usize> = (0..8)
            .map(|t| code.x_map.apply(&[u[t], states.sample(&mut rng)]))
            .collect();
        let typical = (0..code.num_codewords)
            .filter(|&i| {
                is_typical(&[code.codeword(i), &y, &s2], &reference, &code.params).unwrap()
            })
            .count();
        match channel_decode(&code, &y, &s2).unwrap() {
            ChannelDecoding::Ambiguous { candidates } => {
                ambiguous += 1;
                assert_eq!(candidates, typical);
                assert!(candidates >= 2);
            }
            ChannelDecoding::Decoded { .. } => assert_eq!(typical, 1),
            ChannelDecoding::NoneTypical => assert_eq!(typical, 0),
        }
    }
    assert!(ambiguous > 0);
}

#[test]
fn source_encoder_and_decoder_conventions() {
    let src = binary_side_information(0.25).unwrap();
    let prob = degenerate_source(&src, AvailabilityPattern::RECEIVER).unwrap();
    let point = solve_rd_point(&prob, 0.1, 2, &SolverOptions::default()).unwrap();
    let code = build_source_code(&prob, &point, None, 8, &eps(0.1), 5).unwrap();

    // An input with a zero-probability pair cannot be typical: index 0's bin is sent.
    let mut x = vec![0; 8];
    let s1 = vec![0; 8];
    let enc = source_encode(&code, &x, &s1).unwrap();
    if enc.index.is_none() {
        assert_eq!(enc.bin, code.bin_of[0]);
    }
    x.iter_mut().step_by(2).for_each(|v| *v = 1);
    let enc = source_encode(&code, &x, &s1).unwrap();
    if let Some(i) = enc.index {
        assert_eq!(enc.bin, code.bin_of[i]);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut unique, mut fallback) = (0, 0);
    for _ in 0..300 {
        let s2: Vec<usize> = (0..8).map(|_| rng.random_range(0..2)).collect();
        let bin = rng.random_range(0..code.num_bins);
        let out = source_decode(&code, bin, &s2).unwrap();
        match out.status {
            SourceDecodeStatus::Unique { index } => {
                unique += 1;
                assert!(!out.is_fallback());
                assert_eq!(code.bin_of[index], bin);
                let u = code.codeword(index);
                assert!((0..8).all(|t| out.xhat[t] == code.xhat_map.apply(&[u[t], s2[t]])));
            }
            SourceDecodeStatus::Ambiguous { candidates } => {
                fallback += 1;
                assert!(candidates >= 2);
                assert!(out.is_fallback());
                assert_eq!(out.xhat, vec![0; 8]);
            }
            SourceDecodeStatus::NoneTypical => assert!(out.is_fallback()),
        }
    }
    assert!(
        unique > 0 && fallback > 0,
        "unique {unique}, ambiguous {fallback}"
    );
}

#[test]
fn single_trial_report_is_complete() {
    let (prob, point) = stuck_at_point();
    let opts = SimOptions {
        trials: 1,
        ..SimOptions::default()
    };
    let sim = Simulation::Channel {
        prob: &prob,
        point: &point,
        rate: 0.4,
    };
    let r = &simulate(sim, &[1], &opts).unwrap()[0];
    assert_eq!((r.n, r.trials, r.metric), (1, 1, Metric::ErrorRate));
    assert!(r.value == 0.0 || r.value == 1.0);
    assert_eq!(r.ci_half_width, 0.0);
    assert_eq!(r.e1 + r.e2 + r.e3, r.failures);
}

#[test]
fn reports_repeat_and_partition_their_failures() {
    let (prob, point) = stuck_at_point();
    let opts = SimOptions {
        trials: 300,
        seed: 21,
        ..SimOptions::default()
    };
    let sim = Simulation::Channel {
        prob: &prob,
        point: &point,
        rate: 0.4,
    };
    let a = simulate(sim, &[4, 8], &opts).unwrap();
    assert_eq!(a, simulate(sim, &[4, 8], &opts).unwrap());
    for r in &a {
        assert_eq!(r.e1 + r.e2 + r.e3, r.failures);
        assert!((r.value - r.failure_rate()).abs() < 1e-12);
    }

    let src = binary_side_information(0.25).unwrap();
    let sprob = degenerate_source(&src, AvailabilityPattern::RECEIVER).unwrap();
    let spoint = solve_rd_point(&sprob, 0.1, 2, &SolverOptions::default()).unwrap();
    let sim = Simulation::Source {
        prob: &sprob,
        point: &spoint,
        bin_rate: None,
    };
    let s = simulate(sim, &[4, 8], &opts).unwrap();
    assert_eq!(s, simulate(sim, &[4, 8], &opts).unwrap());
    for r in &s {
        assert_eq!(r.metric, Metric::MeanDistortion);
        assert_eq!(r.e1 + r.e2 + r.e3, r.failures);
        assert!((0.0..=1.0).contains(&r.value));
    }
}

#[test]
fn stuck_at_twelve_symbols_mostly_encodes() {
    let (prob, point) = stuck_at_point();
    let sim = Simulation::Channel {
        prob: &prob,
        point: &point,
        rate: 0.5 * point.value,
    };
    let r = &simulate(sim, &[12], &SimOptions::default()).unwrap()[0];
    assert!((r.e1 as f64) / (r.trials as f64) < 0.5, "{r:?}");
}

#[test]
fn wyner_ziv_twelve_symbols() {
    let src = binary_side_information(0.25).unwrap();
    let prob = degenerate_source(&src, AvailabilityPattern::RECEIVER).unwrap();
    let point = solve_rd_point(&prob, 0.25, 2, &SolverOptions::default()).unwrap();
    let sim = Simulation::Source {
        prob: &prob,
        point: &point,
        bin_rate: None,
    };
    let r = &simulate(sim, &[12], &SimOptions::default()).unwrap()[0];
    assert!((r.e1 as f64) / (r.trials as f64) < 0.5, "{r:?}");
    assert!((r.value - point.achieved_d).abs() <= 0.15, "{r:?}");
}

#[test]
fn oversized_codebooks_hit_the_memory_guard() {
    let (prob, point) = stuck_at_point();
    let opts = SimOptions {
        trials: 1,
        max_symbols: 1000,
        ..SimOptions::default()
    };
    let sim = Simulation::Channel {
        prob: &prob,
        point: &point,
        rate: 0.4,
    };
    assert!(matches!(
        simulate(sim, &[20], &opts),
        Err(Error::Resource(_))
    ));
    let zero = SimOptions {
        trials: 0,
        ..SimOptions::default()
    };
    assert!(simulate(sim, &[4], &zero).is_err());
}
