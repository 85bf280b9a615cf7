//! Random binning codes for both problems, simulated at small blocklength.
//!
//! Channel side: `2^{n(I(U;Y,S2) - 2ε)}` i.i.d. codewords thrown into
//! `2^{n(R - 4ε)}` bins. The encoder looks in the message bin for a codeword
//! jointly typical with `s1^n` and sends `x_t = f(u_t, s1_t)`; the decoder
//! looks for the unique codeword typical with `(y^n, s2^n)`.
//!
//! Source side: `2^{n R1}` codewords with `R1 = I(U;X,S1) + ε` thrown into
//! `2^{n R}` bins with `R = I(U;X,S1) - I(U;S2) + 3ε`. The encoder sends the
//! bin of the first codeword typical with `(x^n, s1^n)`; the decoder picks the
//! unique codeword of that bin typical with `s2^n`.
//!
//! Typicality is the strong (L∞) kind: every empirical joint frequency lies
//! within ε of its probability, and zero-probability tuples never occur.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::capacity::{CapacityResult, ChannelProblem};
use crate::error::{Error, Result};
use crate::par;
use crate::prob::{ConditionalKernel, DeterministicMap, Dist, JointDist};
use crate::rate_distortion::{RdPoint, SourceProblem};
use crate::solver::derive_seed;

/// Kernel entries below this are treated as exact zeros when a solved point
/// is turned into a code.
pub const PRUNE: f64 = 1e-9;

/// Default cap on `codewords * n` held in memory.
pub const DEFAULT_MAX_SYMBOLS: usize = 1 << 26;

const TAG_CODEWORDS: u64 = 0x636f_6465;
const TAG_BINS: u64 = 0x6269_6e73;
const TAG_TRIALS: u64 = 0x7472_6961;

/// Strong typicality tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TypicalityParams {
    pub epsilon: f64,
}

impl TypicalityParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(TypicalityParams { epsilon })
    }
}

impl Default for TypicalityParams {
    fn default() -> Self {
        TypicalityParams { epsilon: 0.1 }
    }
}

/// True iff the aligned `sequences` (one per axis of `reference`, in axis
/// order) are strongly jointly typical.
pub fn is_typical(
    sequences: &[&[usize]],
    reference: &JointDist,
    params: &TypicalityParams,
) -> Result<bool> {
    let shape = reference.shape();
    if sequences.len() != shape.len() {
        return Err(Error::AxisMismatch(format!(
            "{} sequences for a joint with {} axes",
            sequences.len(),
            shape.len()
        )));
    }
    let n = sequences[0].len();
    if n == 0 || sequences.iter().any(|s| s.len() != n) {
        return Err(Error::InvalidArgument(
            "sequences must be nonempty and of equal length".into(),
        ));
    }
    for (k, (seq, &size)) in sequences.iter().zip(&shape).enumerate() {
        if let Some(&bad) = seq.iter().find(|&&a| a >= size) {
            return Err(Error::AxisMismatch(format!(
                "symbol {bad} out of range for axis `{}` of size {size}",
                reference.axes()[k].name()
            )));
        }
    }
    let checker = Checker::new(reference.mass().to_vec(), params.epsilon);
    let flat = (0..n).map(|t| {
        sequences
            .iter()
            .zip(&shape)
            .fold(0, |acc, (s, &size)| acc * size + s[t])
    });
    Ok(checker.check(flat, n, &mut Vec::new()))
}

/// Typicality test against a fixed flat reference.
#[derive(Debug, Clone, PartialEq)]
struct Checker {
    mass: Vec<f64>,
    eps: f64,
}

impl Checker {
    fn new(mass: Vec<f64>, eps: f64) -> Self {
        Checker { mass, eps }
    }

    fn check(&self, flat: impl Iterator<Item = usize>, n: usize, counts: &mut Vec<u32>) -> bool {
        counts.clear();
        counts.resize(self.mass.len(), 0);
        for f in flat {
            counts[f] += 1;
        }
        let inv = 1.0 / n as f64;
        self.mass.iter().zip(counts.iter()).all(|(&p, &c)| {
            if p == 0.0 {
                c == 0
            } else {
                (c as f64 * inv - p).abs() <= self.eps + 1e-12
            }
        })
    }
}

/// Rows of `k` with entries below [`PRUNE`] zeroed and renormalized.
fn pruned(k: &ConditionalKernel) -> Result<ConditionalKernel> {
    let w = k.to_axis().size();
    let mut rows = k.rows().to_vec();
    for row in rows.chunks_mut(w) {
        row.iter_mut()
            .filter(|x| **x < PRUNE)
            .for_each(|x| *x = 0.0);
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= s);
    }
    ConditionalKernel::new(k.from_axes().to_vec(), k.to_axis().clone(), rows)
}

/// `max(1, floor(2^{n e}))`, refusing counts whose codebook would exceed
/// `max_symbols` symbols.
fn code_count(n: usize, exponent: f64, what: &str, max_symbols: usize) -> Result<usize> {
    let raw = (n as f64 * exponent).exp2().floor();
    if !raw.is_finite() || raw * n as f64 > max_symbols as f64 {
        return Err(Error::Resource(format!(
            "{what} count 2^{:.2} at n = {n} exceeds the cap of {max_symbols} stored symbols",
            n as f64 * exponent
        )));
    }
    Ok((raw as usize).max(1))
}

/// Draws `count` codewords i.i.d. from `u_dist` and assigns each a uniform
/// bin. Returns the flat codebook (row `i` is codeword `i`) and the bins.
fn draw_codebook(
    u_dist: &Dist,
    count: usize,
    n: usize,
    bins: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let sampler =
        WeightedIndex::new(u_dist.mass()).map_err(|e| Error::invalid_dist("u", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_CODEWORDS));
    let words: Vec<usize> = (0..count * n).map(|_| sampler.sample(&mut rng)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_BINS));
    let bin_of: Vec<usize> = (0..count).map(|_| rng.random_range(0..bins)).collect();
    Ok((words, bin_of))
}

fn bin_members(bin_of: &[usize], bins: usize) -> Vec<Vec<usize>> {
    let mut m = vec![Vec::new(); bins];
    for (i, &b) in bin_of.iter().enumerate() {
        m[b].push(i);
    }
    m
}

fn check_len(what: &str, seq: &[usize], n: usize, size: usize) -> Result<()> {
    if seq.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{what} has length {}, expected {n}",
            seq.len()
        )));
    }
    if let Some(&bad) = seq.iter().find(|&&a| a >= size) {
        return Err(Error::AxisMismatch(format!(
            "{what} symbol {bad} out of range for size {size}"
        )));
    }
    Ok(())
}

/// A random binning code for a channel with two-sided state.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelCode {
    pub n: usize,
    pub num_codewords: usize,
    pub num_bins: usize,
    /// Flat `num_codewords x n` codebook.
    pub codewords: Vec<usize>,
    pub bin_of: Vec<usize>,
    pub u_dist: Dist,
    pub x_map: DeterministicMap,
    pub seed: u64,
    /// `I(U; Y, S2)` at the point the code was built from.
    pub i_receiver: f64,
    /// `I(U; S1)` at the same point.
    pub i_sender: f64,
    pub rate: f64,
    pub params: TypicalityParams,
    members: Vec<Vec<usize>>,
    nu: usize,
    ns1: usize,
    ny: usize,
    ns2: usize,
    /// Reference `p(u, s1)`.
    enc_ref: Checker,
    /// Reference `p(u, y, s2)`.
    dec_ref: Checker,
}

impl ChannelCode {
    pub fn codeword(&self, i: usize) -> &[usize] {
        &self.codewords[i * self.n..(i + 1) * self.n]
    }

    /// Codeword indices in bin `b`, ascending.
    pub fn bin(&self, b: usize) -> &[usize] {
        &self.members[b]
    }
}

/// Builds a channel code at rate `rate` from a solved capacity point.
pub fn build_channel_code(
    prob: &ChannelProblem,
    rate: f64,
    point: &CapacityResult,
    n: usize,
    params: &TypicalityParams,
    seed: u64,
) -> Result<ChannelCode> {
    build_channel_code_capped(prob, rate, point, n, params, seed, DEFAULT_MAX_SYMBOLS)
}

fn build_channel_code_capped(
    prob: &ChannelProblem,
    rate: f64,
    point: &CapacityResult,
    n: usize,
    params: &TypicalityParams,
    seed: u64,
    max_symbols: usize,
) -> Result<ChannelCode> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "rate must be positive, got {rate}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument(
            "blocklength must be at least 1".into(),
        ));
    }
    let eps = params.epsilon;
    let u_given_s1 = pruned(&point.u_given_s1)?;
    let joint = prob.full_joint(&u_given_s1, &point.x_map)?;
    let i_receiver = joint.mutual_information_between(&["u"], &["s2", "y"])?;
    let i_sender = joint.mutual_information_between(&["u"], &["s1"])?;
    let num_codewords = code_count(n, i_receiver - 2.0 * eps, "codeword", max_symbols)?;
    let num_bins = code_count(n, rate - 4.0 * eps, "bin", max_symbols)?;
    let u_dist = joint.marginalize(&["u"])?.to_dist()?;
    let (codewords, bin_of) = draw_codebook(&u_dist, num_codewords, n, num_bins, seed)?;
    Ok(ChannelCode {
        n,
        num_codewords,
        num_bins,
        members: bin_members(&bin_of, num_bins),
        codewords,
        bin_of,
        nu: u_dist.alphabet().size(),
        u_dist,
        x_map: point.x_map.clone(),
        seed,
        i_receiver,
        i_sender,
        rate,
        params: *params,
        ns1: prob.s1_alpha().size(),
        ny: prob.y_alpha().size(),
        ns2: prob.s2_alpha().size(),
        enc_ref: Checker::new(joint.marginalize(&["u", "s1"])?.mass().to_vec(), eps),
        dec_ref: Checker::new(joint.marginalize(&["u", "y", "s2"])?.mass().to_vec(), eps),
    })
}

/// Result of [`channel_encode`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChannelEncoding {
    Sent {
        index: usize,
        x: Vec<usize>,
    },
    /// No codeword in the bin is typical with the state (event E1).
    NoTypicalCodeword,
}

/// Result of [`channel_decode`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChannelDecoding {
    Decoded {
        index: usize,
        bin: usize,
    },
    /// No codeword is typical with the output.
    NoneTypical,
    /// More than one codeword is typical with the output.
    Ambiguous {
        candidates: usize,
    },
}

/// Sends message `bin` given the sender state sequence.
pub fn channel_encode(code: &ChannelCode, bin: usize, s1: &[usize]) -> Result<ChannelEncoding> {
    if bin >= code.num_bins {
        return Err(Error::InvalidArgument(format!(
            "bin {bin} out of range for {} bins",
            code.num_bins
        )));
    }
    check_len("s1", s1, code.n, code.ns1)?;
    let mut counts = Vec::new();
    for &i in code.bin(bin) {
        let u = code.codeword(i);
        if code.enc_ref.check(
            (0..code.n).map(|t| u[t] * code.ns1 + s1[t]),
            code.n,
            &mut counts,
        ) {
            let x = (0..code.n)
                .map(|t| code.x_map.apply(&[u[t], s1[t]]))
                .collect();
            return Ok(ChannelEncoding::Sent { index: i, x });
        }
    }
    Ok(ChannelEncoding::NoTypicalCodeword)
}

fn receiver_typical(code: &ChannelCode, i: usize, side: &[usize], counts: &mut Vec<u32>) -> bool {
    let u = code.codeword(i);
    let stride = code.ny * code.ns2;
    code.dec_ref
        .check((0..code.n).map(|t| u[t] * stride + side[t]), code.n, counts)
}

/// Looks for the unique codeword typical with `(y, s2)`.
pub fn channel_decode(code: &ChannelCode, y: &[usize], s2: &[usize]) -> Result<ChannelDecoding> {
    check_len("y", y, code.n, code.ny)?;
    check_len("s2", s2, code.n, code.ns2)?;
    let side: Vec<usize> = y.iter().zip(s2).map(|(&y, &s)| y * code.ns2 + s).collect();
    let mut counts = Vec::new();
    let mut found = None;
    let mut candidates = 0;
    for i in 0..code.num_codewords {
        if receiver_typical(code, i, &side, &mut counts) {
            candidates += 1;
            found.get_or_insert(i);
        }
    }
    Ok(match (candidates, found) {
        (1, Some(i)) => ChannelDecoding::Decoded {
            index: i,
            bin: code.bin_of[i],
        },
        (0, _) => ChannelDecoding::NoneTypical,
        _ => ChannelDecoding::Ambiguous { candidates },
    })
}

/// A random binning code for a source with two-sided state.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceCode {
    pub n: usize,
    pub num_codewords: usize,
    pub num_bins: usize,
    /// Flat `num_codewords x n` codebook.
    pub codewords: Vec<usize>,
    pub bin_of: Vec<usize>,
    pub u_dist: Dist,
    pub xhat_map: DeterministicMap,
    pub seed: u64,
    /// `I(U; X, S1)` at the point the code was built from.
    pub i_encoder: f64,
    /// `I(U; S2)` at the same point.
    pub i_decoder: f64,
    /// Codebook rate `R1`.
    pub codebook_rate: f64,
    /// Bin rate `R`.
    pub bin_rate: f64,
    pub params: TypicalityParams,
    members: Vec<Vec<usize>>,
    nx: usize,
    ns1: usize,
    ns2: usize,
    /// Reference `p(u, x, s1)`.
    enc_ref: Checker,
    /// Reference `p(u, s2)`.
    dec_ref: Checker,
}

impl SourceCode {
    pub fn codeword(&self, i: usize) -> &[usize] {
        &self.codewords[i * self.n..(i + 1) * self.n]
    }

    /// Codeword indices in bin `b`, ascending.
    pub fn bin(&self, b: usize) -> &[usize] {
        &self.members[b]
    }
}

/// Builds a source code from a solved rate-distortion point. `bin_rate`
/// overrides the default `I(U;X,S1) - I(U;S2) + 3ε`.
pub fn build_source_code(
    prob: &SourceProblem,
    point: &RdPoint,
    bin_rate: Option<f64>,
    n: usize,
    params: &TypicalityParams,
    seed: u64,
) -> Result<SourceCode> {
    build_source_code_capped(prob, point, bin_rate, n, params, seed, DEFAULT_MAX_SYMBOLS)
}

fn build_source_code_capped(
    prob: &SourceProblem,
    point: &RdPoint,
    bin_rate: Option<f64>,
    n: usize,
    params: &TypicalityParams,
    seed: u64,
    max_symbols: usize,
) -> Result<SourceCode> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "blocklength must be at least 1".into(),
        ));
    }
    if let Some(r) = bin_rate {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bin rate must be nonnegative, got {r}"
            )));
        }
    }
    let eps = params.epsilon;
    let u_given = pruned(&point.u_given_xs1)?;
    let joint = prob.full_joint(&u_given, &point.xhat_map)?;
    let i_encoder = joint.mutual_information_between(&["u"], &["x", "s1"])?;
    let i_decoder = joint.mutual_information_between(&["u"], &["s2"])?;
    let codebook_rate = i_encoder + eps;
    let bin_rate = bin_rate.unwrap_or(i_encoder - i_decoder + 3.0 * eps);
    let num_codewords = code_count(n, codebook_rate, "codeword", max_symbols)?;
    let num_bins = code_count(n, bin_rate, "bin", max_symbols)?;
    let u_dist = joint.marginalize(&["u"])?.to_dist()?;
    let (codewords, bin_of) = draw_codebook(&u_dist, num_codewords, n, num_bins, seed)?;
    Ok(SourceCode {
        n,
        num_codewords,
        num_bins,
        members: bin_members(&bin_of, num_bins),
        codewords,
        bin_of,
        u_dist,
        xhat_map: point.xhat_map.clone(),
        seed,
        i_encoder,
        i_decoder,
        codebook_rate,
        bin_rate,
        params: *params,
        nx: prob.x_alpha().size(),
        ns1: prob.s1_alpha().size(),
        ns2: prob.s2_alpha().size(),
        enc_ref: Checker::new(joint.marginalize(&["u", "x", "s1"])?.mass().to_vec(), eps),
        dec_ref: Checker::new(joint.marginalize(&["u", "s2"])?.mass().to_vec(), eps),
    })
}

/// Result of [`source_encode`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceEncoding {
    /// The typical codeword found, or `None` when index 0 was sent by default.
    pub index: Option<usize>,
    pub bin: usize,
}

/// How [`source_decode`] produced its output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceDecodeStatus {
    Unique { index: usize },
    NoneTypical,
    Ambiguous { candidates: usize },
}

/// Result of [`source_decode`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceDecoding {
    pub xhat: Vec<usize>,
    pub status: SourceDecodeStatus,
}

impl SourceDecoding {
    /// True when the fixed fallback sequence was emitted.
    pub fn is_fallback(&self) -> bool {
        !matches!(self.status, SourceDecodeStatus::Unique { .. })
    }
}

/// Bin of the first codeword typical with `(x, s1)`, or of codeword 0.
pub fn source_encode(code: &SourceCode, x: &[usize], s1: &[usize]) -> Result<SourceEncoding> {
    check_len("x", x, code.n, code.nx)?;
    check_len("s1", s1, code.n, code.ns1)?;
    let side: Vec<usize> = x.iter().zip(s1).map(|(&x, &s)| x * code.ns1 + s).collect();
    let stride = code.nx * code.ns1;
    let mut counts = Vec::new();
    for i in 0..code.num_codewords {
        let u = code.codeword(i);
        if code.enc_ref.check(
            (0..code.n).map(|t| u[t] * stride + side[t]),
            code.n,
            &mut counts,
        ) {
            return Ok(SourceEncoding {
                index: Some(i),
                bin: code.bin_of[i],
            });
        }
    }
    Ok(SourceEncoding {
        index: None,
        bin: code.bin_of[0],
    })
}

/// Reconstruction from the unique codeword of `bin` typical with `s2`, else
/// symbol 0 repeated.
pub fn source_decode(code: &SourceCode, bin: usize, s2: &[usize]) -> Result<SourceDecoding> {
    if bin >= code.num_bins {
        return Err(Error::InvalidArgument(format!(
            "bin {bin} out of range for {} bins",
            code.num_bins
        )));
    }
    check_len("s2", s2, code.n, code.ns2)?;
    let mut counts = Vec::new();
    let mut found = None;
    let mut candidates = 0;
    for &i in code.bin(bin) {
        let u = code.codeword(i);
        if code.dec_ref.check(
            (0..code.n).map(|t| u[t] * code.ns2 + s2[t]),
            code.n,
            &mut counts,
        ) {
            candidates += 1;
            found.get_or_insert(i);
        }
    }
    Ok(match (candidates, found) {
        (1, Some(i)) => {
            let u = code.codeword(i);
            SourceDecoding {
                xhat: (0..code.n)
                    .map(|t| code.xhat_map.apply(&[u[t], s2[t]]))
                    .collect(),
                status: SourceDecodeStatus::Unique { index: i },
            }
        }
        (0, _) => SourceDecoding {
            xhat: vec![0; code.n],
            status: SourceDecodeStatus::NoneTypical,
        },
        _ => SourceDecoding {
            xhat: vec![0; code.n],
            status: SourceDecodeStatus::Ambiguous { candidates },
        },
    })
}

/// What a simulation measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Fraction of trials whose message was not recovered.
    ErrorRate,
    /// Average per-symbol distortion.
    MeanDistortion,
}

/// Aggregate of one blocklength's trials.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub n: usize,
    pub trials: usize,
    pub metric: Metric,
    pub value: f64,
    /// 95% normal-approximation half-width of `value`.
    pub ci_half_width: f64,
    pub failures: usize,
    /// The encoder found no typical codeword.
    pub e1: usize,
    /// The decoder found no typical codeword (channel: the sent codeword
    /// was not typical with the output).
    pub e2: usize,
    /// The decoder found more than one typical codeword.
    pub e3: usize,
    pub num_codewords: usize,
    pub num_bins: usize,
}

impl SimulationReport {
    /// Failed trials as a fraction of all trials.
    pub fn failure_rate(&self) -> f64 {
        self.failures as f64 / self.trials as f64
    }
}

/// Knobs shared by both simulators.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub trials: usize,
    pub params: TypicalityParams,
    pub seed: u64,
    /// Cap on `codewords * n` per code.
    pub max_symbols: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            trials: 2000,
            params: TypicalityParams::default(),
            seed: 0,
            max_symbols: DEFAULT_MAX_SYMBOLS,
        }
    }
}

/// What to simulate.
#[derive(Debug, Clone, Copy)]
pub enum Simulation<'a> {
    /// A channel code at `rate` built from a solved capacity point.
    Channel {
        prob: &'a ChannelProblem,
        point: &'a CapacityResult,
        rate: f64,
    },
    /// A source code built from a solved rate-distortion point, optionally
    /// with an explicit bin rate.
    Source {
        prob: &'a SourceProblem,
        point: &'a RdPoint,
        bin_rate: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, Default)]
struct Trial {
    failed: bool,
    e1: bool,
    e2: bool,
    e3: bool,
    /// Error indicator (channel) or mean distortion (source).
    value: f64,
}

/// Runs `opts.trials` trials at every blocklength in `n_list`. Each
/// blocklength gets a fresh code; every random draw is derived from
/// `opts.seed`, the blocklength and the trial index.
pub fn simulate(
    sim: Simulation<'_>,
    n_list: &[usize],
    opts: &SimOptions,
) -> Result<Vec<SimulationReport>> {
    if opts.trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    n_list
        .iter()
        .map(|&n| {
            let code_seed = derive_seed(opts.seed, n as u64);
            let trial_seed = |t: usize| derive_seed(derive_seed(code_seed, TAG_TRIALS), t as u64);
            let (metric, trials, sizes) = match sim {
                Simulation::Channel { prob, point, rate } => {
                    let code = build_channel_code_capped(
                        prob,
                        rate,
                        point,
                        n,
                        &opts.params,
                        code_seed,
                        opts.max_symbols,
                    )?;
                    let model = ChannelSampler::new(prob)?;
                    let trials = par::map_range(opts.trials, |t| {
                        channel_trial(&code, &model, trial_seed(t))
                    });
                    (
                        Metric::ErrorRate,
                        trials,
                        (code.num_codewords, code.num_bins),
                    )
                }
                Simulation::Source {
                    prob,
                    point,
                    bin_rate,
                } => {
                    let code = build_source_code_capped(
                        prob,
                        point,
                        bin_rate,
                        n,
                        &opts.params,
                        code_seed,
                        opts.max_symbols,
                    )?;
                    let model = SourceSampler::new(prob)?;
                    let trials = par::map_range(opts.trials, |t| {
                        source_trial(&code, &model, prob, trial_seed(t))
                    });
                    (
                        Metric::MeanDistortion,
                        trials,
                        (code.num_codewords, code.num_bins),
                    )
                }
            };
            let trials = trials.into_iter().collect::<Result<Vec<Trial>>>()?;
            Ok(aggregate(n, metric, &trials, sizes))
        })
        .collect()
}

fn aggregate(
    n: usize,
    metric: Metric,
    trials: &[Trial],
    (num_codewords, num_bins): (usize, usize),
) -> SimulationReport {
    let count = trials.len();
    let k = count as f64;
    let mean = trials.iter().map(|t| t.value).sum::<f64>() / k;
    let var = if count > 1 {
        trials.iter().map(|t| (t.value - mean).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    SimulationReport {
        n,
        trials: count,
        metric,
        value: mean,
        ci_half_width: 1.96 * (var / k).sqrt(),
        failures: trials.iter().filter(|t| t.failed).count(),
        e1: trials.iter().filter(|t| t.e1).count(),
        e2: trials.iter().filter(|t| t.e2).count(),
        e3: trials.iter().filter(|t| t.e3).count(),
        num_codewords,
        num_bins,
    }
}

/// Samplers for `(s1, s2)` and for each channel row.
struct ChannelSampler {
    state: WeightedIndex<f64>,
    rows: Vec<WeightedIndex<f64>>,
    ns2: usize,
}

impl ChannelSampler {
    fn new(prob: &ChannelProblem) -> Result<Self> {
        let bad = |e: rand::distr::weighted::Error| Error::invalid_dist("sampler", e.to_string());
        let state = WeightedIndex::new(prob.state_joint().mass()).map_err(bad)?;
        let ny = prob.y_alpha().size();
        let rows = prob
            .channel()
            .rows()
            .chunks(ny)
            .map(|r| WeightedIndex::new(r).map_err(bad))
            .collect::<Result<_>>()?;
        Ok(ChannelSampler {
            state,
            rows,
            ns2: prob.s2_alpha().size(),
        })
    }
}

fn channel_trial(code: &ChannelCode, model: &ChannelSampler, seed: u64) -> Result<Trial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = code.n;
    let message = rng.random_range(0..code.num_bins);
    let (mut s1, mut s2) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let s = model.state.sample(&mut rng);
        s1.push(s / model.ns2);
        s2.push(s % model.ns2);
    }
    let (sent, x) = match channel_encode(code, message, &s1)? {
        ChannelEncoding::Sent { index, x } => (index, x),
        ChannelEncoding::NoTypicalCodeword => {
            return Ok(Trial {
                failed: true,
                e1: true,
                value: 1.0,
                ..Trial::default()
            })
        }
    };
    let y: Vec<usize> = (0..n)
        .map(|t| model.rows[(x[t] * code.ns1 + s1[t]) * code.ns2 + s2[t]].sample(&mut rng))
        .collect();
    if let ChannelDecoding::Decoded { bin, .. } = channel_decode(code, &y, &s2)? {
        if bin == message {
            return Ok(Trial::default());
        }
    }
    let side: Vec<usize> = y.iter().zip(&s2).map(|(&y, &s)| y * code.ns2 + s).collect();
    let sent_typical = receiver_typical(code, sent, &side, &mut Vec::new());
    Ok(Trial {
        failed: true,
        e2: !sent_typical,
        e3: sent_typical,
        value: 1.0,
        ..Trial::default()
    })
}

/// Sampler for `(x, s1, s2)`.
struct SourceSampler {
    joint: WeightedIndex<f64>,
    ns1: usize,
    ns2: usize,
}

impl SourceSampler {
    fn new(prob: &SourceProblem) -> Result<Self> {
        let joint = WeightedIndex::new(prob.source_joint().mass())
            .map_err(|e| Error::invalid_dist("sampler", e.to_string()))?;
        Ok(SourceSampler {
            joint,
            ns1: prob.s1_alpha().size(),
            ns2: prob.s2_alpha().size(),
        })
    }
}

fn source_trial(
    code: &SourceCode,
    model: &SourceSampler,
    prob: &SourceProblem,
    seed: u64,
) -> Result<Trial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = code.n;
    let (mut x, mut s1, mut s2) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for _ in 0..n {
        let a = model.joint.sample(&mut rng);
        x.push(a / (model.ns1 * model.ns2));
        s1.push((a / model.ns2) % model.ns1);
        s2.push(a % model.ns2);
    }
    let enc = source_encode(code, &x, &s1)?;
    let dec = source_decode(code, enc.bin, &s2)?;
    let dist = x
        .iter()
        .zip(&dec.xhat)
        .map(|(&a, &b)| prob.d(a, b))
        .sum::<f64>()
        / n as f64;
    let e1 = enc.index.is_none();
    let (e2, e3) = match dec.status {
        SourceDecodeStatus::Unique { .. } => (false, false),
        SourceDecodeStatus::NoneTypical => (!e1, false),
        SourceDecodeStatus::Ambiguous { .. } => (false, !e1),
    };
    Ok(Trial {
        failed: e1 || e2 || e3,
        e1,
        e2,
        e3,
        value: dist,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::Alphabet;

    fn bern(p: f64) -> JointDist {
        JointDist::new(vec![Alphabet::new("a", 2).unwrap()], vec![1.0 - p, p]).unwrap()
    }

    #[test]
    fn exact_type_is_typical() {
        let seq = [0, 0, 1, 0];
        assert!(is_typical(&[&seq], &bern(0.25), &TypicalityParams::default()).unwrap());
    }

    #[test]
    fn zero_probability_symbol_is_atypical() {
        let seq = [0, 0, 0, 1];
        let tight = TypicalityParams::new(0.5).unwrap();
        assert!(!is_typical(&[&seq], &bern(0.0), &tight).unwrap());
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let j = JointDist::new(
            vec![
                Alphabet::new("a", 2).unwrap(),
                Alphabet::new("b", 2).unwrap(),
            ],
            vec![0.25; 4],
        )
        .unwrap();
        assert!(is_typical(&[&[0, 1], &[0]], &j, &TypicalityParams::default()).is_err());
    }

    #[test]
    fn epsilon_must_be_positive() {
        assert!(TypicalityParams::new(0.0).is_err());
        assert!(TypicalityParams::new(f64::NAN).is_err());
    }

    #[test]
    fn counts_floor_with_minimum_one() {
        assert_eq!(code_count(1, 1.0, "c", 100).unwrap(), 2);
        assert_eq!(code_count(4, -1.0, "c", 100).unwrap(), 1);
        assert_eq!(code_count(8, 0.5, "c", 1000).unwrap(), 16);
        assert!(matches!(
            code_count(20, 1.0, "c", 1000),
            Err(Error::Resource(_))
        ));
    }
}
