//! Named textbook instances and seeded random suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::capacity::ChannelProblem;
use crate::error::Result;
use crate::rate_distortion::SourceProblem;
use crate::special::{StateChannel, StateSource};

/// Binary symmetric channel with crossover `eps` and no state.
pub fn bsc(eps: f64) -> Result<ChannelProblem> {
    ChannelProblem::from_arrays(2, 2, 1, 1, vec![1.0], vec![1.0 - eps, eps, eps, 1.0 - eps])
}

/// Noiseless binary channel whose output ignores states of the given sizes.
pub fn noiseless_binary(ns1: usize, ns2: usize) -> Result<ChannelProblem> {
    let n = ns1 * ns2;
    let mut w = Vec::with_capacity(2 * n * 2);
    for x in 0..2 {
        for _ in 0..n {
            w.extend_from_slice(if x == 0 { &[1.0, 0.0] } else { &[0.0, 1.0] });
        }
    }
    ChannelProblem::from_arrays(2, 2, ns1, ns2, vec![1.0 / n as f64; n], w)
}

/// Memory with stuck-at defects: state `ok`, `stuck at 0`, `stuck at 1`
/// with probabilities `(1 - p, p/2, p/2)`.
pub fn stuck_at(p_defect: f64) -> Result<StateChannel> {
    let ok_zero = [1.0, 0.0];
    let ok_one = [0.0, 1.0];
    let mut w = Vec::with_capacity(12);
    for x in 0..2 {
        w.extend_from_slice(if x == 0 { &ok_zero } else { &ok_one });
        w.extend_from_slice(&ok_zero);
        w.extend_from_slice(&ok_one);
    }
    StateChannel::new(
        2,
        2,
        vec![1.0 - p_defect, p_defect / 2.0, p_defect / 2.0],
        w,
    )
}

/// Equiprobable choice between a perfect binary channel and a useless one.
pub fn two_state_channel() -> Result<StateChannel> {
    let w = vec![1.0, 0.0, 0.5, 0.5, 0.0, 1.0, 0.5, 0.5];
    StateChannel::new(2, 2, vec![0.5, 0.5], w)
}

/// Bernoulli source with Hamming distortion and no state.
pub fn binary_hamming(p_one: f64) -> Result<SourceProblem> {
    SourceProblem::from_arrays(
        2,
        2,
        1,
        1,
        vec![1.0 - p_one, p_one],
        vec![0.0, 1.0, 1.0, 0.0],
    )
}

/// Uniform binary source whose state is the source through a binary
/// symmetric channel with crossover `eps`; Hamming distortion.
pub fn binary_side_information(eps: f64) -> Result<StateSource> {
    let pxs = vec![0.5 * (1.0 - eps), 0.5 * eps, 0.5 * eps, 0.5 * (1.0 - eps)];
    StateSource::new(2, 2, pxs, vec![0.0, 1.0, 1.0, 0.0])
}

/// A point drawn uniformly from the simplex.
pub fn random_simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// A state channel with random state law and random rows.
pub fn random_state_channel<R: Rng>(
    rng: &mut R,
    nx: usize,
    ny: usize,
    ns: usize,
) -> Result<StateChannel> {
    let ps = random_simplex(rng, ns);
    let w: Vec<f64> = (0..nx * ns).flat_map(|_| random_simplex(rng, ny)).collect();
    StateChannel::new(nx, ny, ps, w)
}

/// A state source with random joint and distortions uniform on `[0, 1)`,
/// except `d(x, x mod |X̂|) = 0`.
pub fn random_state_source<R: Rng>(
    rng: &mut R,
    nx: usize,
    nxhat: usize,
    ns: usize,
) -> Result<StateSource> {
    let pxs = random_simplex(rng, nx * ns);
    let d: Vec<f64> = (0..nx * nxhat)
        .map(|i| {
            let v = rng.random::<f64>();
            if i % nxhat == (i / nxhat) % nxhat {
                0.0
            } else {
                v
            }
        })
        .collect();
    StateSource::new(nx, nxhat, pxs, d)
}

/// `count` channels with `|X|, |Y|, |S|` drawn from {2, 3}, never with both
/// `|X| = 3` and `|S| = 3`.
pub fn channel_suite(seed: u64, count: usize) -> Result<Vec<StateChannel>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let (nx, ny, ns) = loop {
                let t = (
                    rng.random_range(2..4),
                    rng.random_range(2..4),
                    rng.random_range(2..4),
                );
                if !(t.0 == 3 && t.2 == 3) {
                    break t;
                }
            };
            random_state_channel(&mut rng, nx, ny, ns)
        })
        .collect()
}

/// `count` sources with `|X|, |X̂|, |S|` drawn from {2, 3}, never with both
/// `|X̂| = 3` and `|S| = 3`.
pub fn source_suite(seed: u64, count: usize) -> Result<Vec<StateSource>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let (nx, nh, ns) = loop {
                let t = (
                    rng.random_range(2..4),
                    rng.random_range(2..4),
                    rng.random_range(2..4),
                );
                if !(t.1 == 3 && t.2 == 3) {
                    break t;
                }
            };
            random_state_source(&mut rng, nx, nh, ns)
        })
        .collect()
}

/// A binary two-sided channel with random state joint and rows.
pub fn random_binary_channel<R: Rng>(
    rng: &mut R,
    ns1: usize,
    ns2: usize,
) -> Result<ChannelProblem> {
    let state = random_simplex(rng, ns1 * ns2);
    let w: Vec<f64> = (0..2 * ns1 * ns2)
        .flat_map(|_| random_simplex(rng, 2))
        .collect();
    ChannelProblem::from_arrays(2, 2, ns1, ns2, state, w)
}

/// A binary two-sided source with random joint and Hamming distortion.
pub fn random_binary_source<R: Rng>(rng: &mut R, ns1: usize, ns2: usize) -> Result<SourceProblem> {
    let joint = random_simplex(rng, 2 * ns1 * ns2);
    SourceProblem::from_arrays(2, 2, ns1, ns2, joint, vec![0.0, 1.0, 1.0, 0.0])
}
