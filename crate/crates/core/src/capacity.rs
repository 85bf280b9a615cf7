//! Capacity of a channel with state known noncausally at both ends:
//! `C = max I(U; S2, Y) - I(U; S1)` over `p(u|s1)` and `x = f(u, s1)`.
//!
//! For a fixed map the objective is concave in `p(u|s1)` (it is the
//! supremum over backward kernels `r(u|s2,y)` of a jointly concave
//! functional), so the inner ascent converges to the optimum of that map.
//! The outer search runs over sets of distinct strategies `s1 -> x` (see
//! [`crate::solver`]).

use std::f64::consts::LOG2_E;

use crate::error::{Error, Result};
use crate::par;
use crate::prob::{
    compose_joint, neg_plogp, Alphabet, ConditionalKernel, DeterministicMap, Dist, JointDist,
};
use crate::solver::{
    batches, derive_seed, multi_start, normalize_exp2_rows, plan_search, strategy_count,
    strategy_map, top_strategies, Diagnostics, Landscape, SearchMode, SolverOptions, STRATEGY_CAP,
};

/// A discrete memoryless channel `p(y | x, s1, s2)` with i.i.d. state pairs
/// `p(s1, s2)`; the sender sees `S1`, the receiver sees `S2`.
///
/// Axes are named `x`, `y`, `s1`, `s2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelProblem {
    x_alpha: Alphabet,
    y_alpha: Alphabet,
    s1_alpha: Alphabet,
    s2_alpha: Alphabet,
    state_joint: JointDist,
    channel: ConditionalKernel,
}

impl ChannelProblem {
    /// `state_joint` must have axes `s1`, `s2` and `channel` must map
    /// `x`, `s1`, `s2` to `y`, in any order.
    pub fn new(state_joint: JointDist, channel: ConditionalKernel) -> Result<Self> {
        if state_joint.axes().len() != 2 {
            return Err(Error::AxisMismatch(
                "state_joint must have exactly the axes s1, s2".into(),
            ));
        }
        let state_joint = state_joint.marginalize(&["s1", "s2"])?;
        if channel.to_axis().name() != "y" {
            return Err(Error::AxisMismatch(format!(
                "channel output axis must be `y`, got `{}`",
                channel.to_axis().name()
            )));
        }
        let channel = channel.reorder(&["x", "s1", "s2"])?;
        let from = channel.from_axes();
        for (k, name) in [(1, "s1"), (2, "s2")] {
            let want = state_joint.axis(name)?.size();
            if from[k].size() != want {
                return Err(Error::AxisMismatch(format!(
                    "channel axis `{name}` has size {} but state_joint has {want}",
                    from[k].size()
                )));
            }
        }
        Ok(ChannelProblem {
            x_alpha: from[0].clone(),
            y_alpha: channel.to_axis().clone(),
            s1_alpha: from[1].clone(),
            s2_alpha: from[2].clone(),
            state_joint,
            channel,
        })
    }

    /// Builds a problem from flat row-major arrays: `state[s1][s2]` and
    /// `channel[x][s1][s2][y]`.
    pub fn from_arrays(
        nx: usize,
        ny: usize,
        ns1: usize,
        ns2: usize,
        state: Vec<f64>,
        channel: Vec<f64>,
    ) -> Result<Self> {
        let s1 = Alphabet::new("s1", ns1)?;
        let s2 = Alphabet::new("s2", ns2)?;
        let joint = JointDist::new(vec![s1.clone(), s2.clone()], state)?;
        let kernel = ConditionalKernel::new(
            vec![Alphabet::new("x", nx)?, s1, s2],
            Alphabet::new("y", ny)?,
            channel,
        )?;
        ChannelProblem::new(joint, kernel)
    }

    pub fn x_alpha(&self) -> &Alphabet {
        &self.x_alpha
    }

    pub fn y_alpha(&self) -> &Alphabet {
        &self.y_alpha
    }

    pub fn s1_alpha(&self) -> &Alphabet {
        &self.s1_alpha
    }

    pub fn s2_alpha(&self) -> &Alphabet {
        &self.s2_alpha
    }

    /// `p(s1, s2)` with axes in that order.
    pub fn state_joint(&self) -> &JointDist {
        &self.state_joint
    }

    /// `p(y | x, s1, s2)` with conditioning axes in that order.
    pub fn channel(&self) -> &ConditionalKernel {
        &self.channel
    }

    pub fn p_state(&self, s1: usize, s2: usize) -> f64 {
        self.state_joint.mass()[s1 * self.s2_alpha.size() + s2]
    }

    pub fn p_y(&self, x: usize, s1: usize, s2: usize, y: usize) -> f64 {
        let (n1, n2) = (self.s1_alpha.size(), self.s2_alpha.size());
        self.channel.row((x * n1 + s1) * n2 + s2)[y]
    }

    /// `|X| |S1| + 1`.
    pub fn default_u_size(&self) -> usize {
        self.x_alpha.size() * self.s1_alpha.size() + 1
    }

    /// Marginal `p(s1)`.
    pub fn p_s1(&self) -> Vec<f64> {
        let n2 = self.s2_alpha.size();
        self.state_joint
            .mass()
            .chunks(n2)
            .map(|r| r.iter().sum())
            .collect()
    }

    /// The full joint `p(s1, s2, u, x, y)` induced by a configuration.
    pub fn full_joint(
        &self,
        u_given_s1: &ConditionalKernel,
        x_map: &DeterministicMap,
    ) -> Result<JointDist> {
        self.check_config(u_given_s1, x_map)?;
        let j = compose_joint(&self.state_joint, u_given_s1)?;
        let j = compose_joint(&j, &x_map.to_kernel())?;
        compose_joint(&j, &self.channel)
    }

    /// `(I(U; S2, Y), I(U; S1))` at a configuration.
    pub fn information_terms(
        &self,
        u_given_s1: &ConditionalKernel,
        x_map: &DeterministicMap,
    ) -> Result<(f64, f64)> {
        let j = self.full_joint(u_given_s1, x_map)?;
        Ok((
            j.mutual_information_between(&["u"], &["s2", "y"])?,
            j.mutual_information_between(&["u"], &["s1"])?,
        ))
    }

    fn check_config(&self, u_given_s1: &ConditionalKernel, x_map: &DeterministicMap) -> Result<()> {
        let uf = u_given_s1.from_axes();
        if uf.len() != 1 || uf[0] != self.s1_alpha || u_given_s1.to_axis().name() != "u" {
            return Err(Error::AxisMismatch(format!(
                "u_given_s1 must map s1 (size {}) to u",
                self.s1_alpha.size()
            )));
        }
        let mf = x_map.from_axes();
        if mf.len() != 2
            || mf[0] != *u_given_s1.to_axis()
            || mf[1] != self.s1_alpha
            || *x_map.to_axis() != self.x_alpha
        {
            return Err(Error::AxisMismatch(format!(
                "x_map must map (u, s1) of sizes ({}, {}) to x (size {})",
                u_given_s1.to_axis().size(),
                self.s1_alpha.size(),
                self.x_alpha.size()
            )));
        }
        Ok(())
    }
}

/// The best configuration found by [`solve_capacity`].
#[derive(Debug, Clone)]
pub struct CapacityResult {
    /// `I(U; S2, Y) - I(U; S1)` at the returned configuration, in bits.
    pub value: f64,
    pub u_size: usize,
    pub u_given_s1: ConditionalKernel,
    pub x_map: DeterministicMap,
    pub diagnostics: Diagnostics,
}

impl CapacityResult {
    /// Marginal `p(u) = sum_s1 p(s1) p(u | s1)`.
    pub fn u_dist(&self, prob: &ChannelProblem) -> Result<Dist> {
        let ps1 = prob.p_s1();
        let nu = self.u_size;
        let mut pu = vec![0.0; nu];
        for (s1, &p) in ps1.iter().enumerate() {
            for (u, acc) in pu.iter_mut().enumerate() {
                *acc += p * self.u_given_s1.row(s1)[u];
            }
        }
        let total: f64 = pu.iter().sum();
        pu.iter_mut().for_each(|x| *x /= total);
        Dist::new(self.u_given_s1.to_axis().clone(), pu)
    }
}

/// `I(U; S2, Y) - I(U; S1)` for the joint built from `prob`, `p(u|s1)` and
/// `x = f(u, s1)`. The kernel must map `s1` to an axis named `u`.
pub fn objective(
    prob: &ChannelProblem,
    u_given_s1: &ConditionalKernel,
    x_map: &DeterministicMap,
) -> Result<f64> {
    let (pos, neg) = prob.information_terms(u_given_s1, x_map)?;
    Ok(pos - neg)
}

/// The capacity objective for one map, with `Z = (S2, Y)` flattened.
#[derive(Debug, Clone)]
pub(crate) struct CapLandscape {
    ns1: usize,
    nu: usize,
    nz: usize,
    ps1: Vec<f64>,
    /// `a[s1][u][z] = p(s1, s2) p(y | f(u, s1), s1, s2)`.
    a: Vec<f64>,
}

impl CapLandscape {
    pub(crate) fn new(prob: &ChannelProblem, nu: usize, table: &[usize]) -> Self {
        let (ns1, ns2, ny) = (
            prob.s1_alpha.size(),
            prob.s2_alpha.size(),
            prob.y_alpha.size(),
        );
        let nz = ns2 * ny;
        let mut a = vec![0.0; ns1 * nu * nz];
        for s1 in 0..ns1 {
            for u in 0..nu {
                let x = table[u * ns1 + s1];
                for s2 in 0..ns2 {
                    let ps = prob.p_state(s1, s2);
                    for y in 0..ny {
                        a[(s1 * nu + u) * nz + s2 * ny + y] = ps * prob.p_y(x, s1, s2, y);
                    }
                }
            }
        }
        CapLandscape {
            ns1,
            nu,
            nz,
            ps1: prob.p_s1(),
            a,
        }
    }

    /// `P(u, z)` and `log2 P(u | z)`.
    fn posterior(&self, q: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (nu, nz) = (self.nu, self.nz);
        let mut puz = vec![0.0; nu * nz];
        for s1 in 0..self.ns1 {
            for u in 0..nu {
                let w = q[s1 * nu + u];
                let row = &self.a[(s1 * nu + u) * nz..(s1 * nu + u + 1) * nz];
                for (acc, &av) in puz[u * nz..(u + 1) * nz].iter_mut().zip(row) {
                    *acc += w * av;
                }
            }
        }
        let mut pz = vec![0.0; nz];
        for u in 0..nu {
            for z in 0..nz {
                pz[z] += puz[u * nz + z];
            }
        }
        let log_post = (0..nu * nz)
            .map(|i| {
                let p = puz[i];
                if p > 0.0 {
                    (p / pz[i % nz]).log2()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        (puz, log_post)
    }

    /// `sum_z a[s1][u][z] log2 P(u | z)`, skipping zero weights.
    fn score(&self, log_post: &[f64], s1: usize, u: usize) -> f64 {
        let nz = self.nz;
        let row = &self.a[(s1 * self.nu + u) * nz..(s1 * self.nu + u + 1) * nz];
        row.iter()
            .zip(&log_post[u * nz..(u + 1) * nz])
            .filter(|(&av, _)| av > 0.0)
            .map(|(&av, &l)| av * l)
            .sum()
    }
}

impl Landscape for CapLandscape {
    fn rows(&self) -> usize {
        self.ns1
    }

    fn width(&self) -> usize {
        self.nu
    }

    fn value(&self, q: &[f64]) -> f64 {
        let (puz, log_post) = self.posterior(q);
        let mut v = 0.0;
        for s1 in 0..self.ns1 {
            for u in 0..self.nu {
                v += self.ps1[s1] * neg_plogp(q[s1 * self.nu + u]);
            }
        }
        for (p, l) in puz.iter().zip(&log_post) {
            if *p > 0.0 {
                v += p * l;
            }
        }
        v
    }

    fn gradient(&self, q: &[f64], grad: &mut [f64]) {
        let (_, log_post) = self.posterior(q);
        for s1 in 0..self.ns1 {
            let p = self.ps1[s1];
            for u in 0..self.nu {
                let i = s1 * self.nu + u;
                grad[i] = if p > 0.0 {
                    self.score(&log_post, s1, u) - p * (q[i].log2() + LOG2_E)
                } else {
                    0.0
                };
            }
        }
    }

    fn entropic_step(&self, q: &[f64], out: &mut [f64]) {
        let (_, log_post) = self.posterior(q);
        for s1 in 0..self.ns1 {
            let p = self.ps1[s1];
            for u in 0..self.nu {
                out[s1 * self.nu + u] = if p > 0.0 {
                    self.score(&log_post, s1, u) / p
                } else {
                    0.0
                };
            }
        }
        normalize_exp2_rows(out, self.nu);
    }
}

/// Result of [`inner_ascent`].
#[derive(Debug, Clone)]
pub struct InnerAscent {
    pub u_given_s1: ConditionalKernel,
    pub value: f64,
    pub iterations: usize,
    /// Restarts from a perturbed point after a non-finite value or gradient.
    pub perturbations: usize,
}

fn u_alphabet(size: usize) -> Result<Alphabet> {
    if size == 0 {
        return Err(Error::InvalidArgument("u_size must be at least 1".into()));
    }
    Alphabet::new("u", size)
}

/// Improves `p(u|s1)` for a fixed map from `start`, never decreasing the
/// objective.
pub fn inner_ascent(
    prob: &ChannelProblem,
    x_map: &DeterministicMap,
    start: &ConditionalKernel,
    opts: &SolverOptions,
) -> Result<InnerAscent> {
    opts.validate()?;
    prob.check_config(start, x_map)?;
    let nu = start.to_axis().size();
    let land = CapLandscape::new(prob, nu, x_map.table());
    let out = crate::solver::ascend(&land, start.rows(), opts);
    let kernel =
        ConditionalKernel::new(vec![prob.s1_alpha.clone()], start.to_axis().clone(), out.q)?;
    Ok(InnerAscent {
        u_given_s1: kernel,
        value: out.value,
        iterations: out.iterations,
        perturbations: out.perturbations,
    })
}

struct MapSolve {
    q: Vec<f64>,
    value: f64,
    per_start: Vec<f64>,
    diagnostics: Diagnostics,
}

fn solve_map(
    prob: &ChannelProblem,
    nu: usize,
    table: &[usize],
    opts: &SolverOptions,
    seed: u64,
) -> MapSolve {
    let land = CapLandscape::new(prob, nu, table);
    let out = multi_start(&land, opts, seed);
    MapSolve {
        q: out.q,
        value: out.value,
        per_start: out.per_start,
        diagnostics: out.diagnostics,
    }
}

/// Maximizes the capacity objective with `|U| = u_size`.
///
/// The returned configuration is feasible, so `value` is a lower bound on
/// the capacity at this cardinality; it is exact up to solver tolerance
/// whenever the search mode is not [`SearchMode::Sampled`].
pub fn solve_capacity(
    prob: &ChannelProblem,
    u_size: usize,
    opts: &SolverOptions,
) -> Result<CapacityResult> {
    opts.validate()?;
    let u_alpha = u_alphabet(u_size)?;
    let (nx, ns1) = (prob.x_alpha.size(), prob.s1_alpha.size());
    let mut diag = Diagnostics {
        raw_map_count: (nx as f64).powf((u_size * ns1) as f64),
        ..Diagnostics::default()
    };
    let strategies = strategy_count(nx, ns1).unwrap_or(u64::MAX);

    // The all-strategy problem bounds every candidate from above and seeds
    // the search with its heaviest strategies.
    let mut first: Vec<Vec<u64>> = Vec::new();
    let mut bound = None;
    if strategies <= STRATEGY_CAP && (u_size as u64) < strategies {
        let k = strategies as usize;
        let all: Vec<u64> = (0..strategies).collect();
        let table = strategy_map(&Alphabet::new("u", k)?, &prob.s1_alpha, &prob.x_alpha, &all);
        let full = solve_map(
            prob,
            k,
            table.table(),
            opts,
            derive_seed(opts.seed, u64::MAX),
        );
        diag.absorb(&full.diagnostics);
        let ps1 = prob.p_s1();
        let weights: Vec<f64> = (0..k)
            .map(|t| (0..ns1).map(|s| ps1[s] * full.q[s * k + t]).sum())
            .collect();
        first.push(top_strategies(&weights, u_size));
        bound = Some(full.value);
        diag.all_strategy_value = Some(full.value);
    }
    let plan = plan_search(strategies, u_size, opts)?;
    diag.search = plan.mode;
    diag.candidate_count = plan.candidate_count;
    let mut sets = first.clone();
    sets.extend(plan.sets.into_iter().filter(|s| !first.contains(s)));

    let mut best: Option<(usize, MapSolve, DeterministicMap)> = None;
    let mut ties = 0;
    let mut evaluated = 0;
    for range in batches(sets.len(), first.len()) {
        let start = range.start;
        let maps: Vec<DeterministicMap> = sets[range]
            .iter()
            .map(|s| strategy_map(&u_alpha, &prob.s1_alpha, &prob.x_alpha, s))
            .collect();
        let solved = par::map_range(maps.len(), |i| {
            solve_map(
                prob,
                u_size,
                maps[i].table(),
                opts,
                derive_seed(opts.seed, (start + i) as u64),
            )
        });
        for (i, (s, m)) in solved.into_iter().zip(maps).enumerate() {
            evaluated += 1;
            diag.absorb(&s.diagnostics);
            match &best {
                Some((_, b, _)) if s.value > b.value + 1e-12 => {
                    ties = 0;
                    best = Some((start + i, s, m));
                }
                Some((_, b, _)) => {
                    if (s.value - b.value).abs() <= 1e-12 {
                        ties += 1;
                    }
                }
                None => best = Some((start + i, s, m)),
            }
        }
        if let (Some(ub), Some((_, b, _))) = (bound, &best) {
            if b.value >= ub - opts.tol_bits {
                break;
            }
        }
    }
    let (idx, b, x_map) = best.expect("at least one candidate map");
    diag.maps_evaluated = evaluated;
    diag.best_candidate = idx;
    diag.ties = ties;
    diag.best_per_restart = b.per_start.clone();
    if diag.search == SearchMode::Dominant {
        diag.all_strategy_value = Some(b.value);
    }
    let u_given_s1 = ConditionalKernel::new(vec![prob.s1_alpha.clone()], u_alpha, b.q)?;
    let value = objective(prob, &u_given_s1, &x_map)?;
    if let Some(ub) = diag.all_strategy_value {
        if ub - value > 1e-4 {
            diag.flags.push(format!(
                "cardinality gap: u_size = {u_size} reaches {value:.6} bits but a larger U reaches {ub:.6}"
            ));
        }
    }
    Ok(CapacityResult {
        value,
        u_size,
        u_given_s1,
        x_map,
        diagnostics: diag,
    })
}
