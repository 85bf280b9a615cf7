//! Rate-distortion with state known at both ends:
//! `R(D) = min I(U; S1, X) - I(U; S2)` over `p(u|x,s1)` and `x̂ = g(u, s2)`
//! subject to `E d(X, X̂) <= D`.
//!
//! Because `U - (X, S1) - S2` is a Markov chain the rate equals
//! `I(U; X, S1 | S2)`, which is convex in `p(u|x,s1)` for a fixed map. Each
//! map is therefore solved exactly by a Lagrangian ascent with bisection on
//! the multiplier, closed by mixing the two bracketing solutions.

use std::f64::consts::LOG2_E;

use crate::error::{Error, Result};
use crate::par;
use crate::prob::{
    compose_joint, neg_plogp, Alphabet, ConditionalKernel, DeterministicMap, JointDist,
};
use crate::solver::{
    ascend, batches, derive_seed, multi_start, normalize_exp2_rows, plan_search, strategy_count,
    strategy_map, top_strategies, Diagnostics, Landscape, SearchMode, SolverOptions, STRATEGY_CAP,
};

/// Distortion above the target tolerated as rounding.
const FEAS_SLACK: f64 = 1e-10;

/// Largest multiplier tried while bracketing a target distortion.
const LAMBDA_MAX: f64 = 1e12;

/// An i.i.d. source `p(x, s1, s2)` with a bounded distortion measure; the
/// encoder sees `S1`, the decoder sees `S2`.
///
/// Axes are named `x`, `s1`, `s2` and the reconstruction alphabet `xhat`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceProblem {
    x_alpha: Alphabet,
    xhat_alpha: Alphabet,
    s1_alpha: Alphabet,
    s2_alpha: Alphabet,
    source_joint: JointDist,
    /// Row-major `d[x][xhat]`.
    distortion: Vec<f64>,
}

impl SourceProblem {
    /// `source_joint` must carry the axes `x`, `s1`, `s2` in any order;
    /// `distortion` is row-major `d[x][xhat]`.
    pub fn new(source_joint: JointDist, xhat_size: usize, distortion: Vec<f64>) -> Result<Self> {
        if source_joint.axes().len() != 3 {
            return Err(Error::AxisMismatch(
                "source_joint must have exactly the axes x, s1, s2".into(),
            ));
        }
        let source_joint = source_joint.marginalize(&["x", "s1", "s2"])?;
        let axes = source_joint.axes();
        let xhat_alpha = Alphabet::new("xhat", xhat_size)?;
        if distortion.len() != axes[0].size() * xhat_size {
            return Err(Error::AxisMismatch(format!(
                "distortion has {} entries, expected {} x {}",
                distortion.len(),
                axes[0].size(),
                xhat_size
            )));
        }
        if let Some(i) = distortion
            .iter()
            .position(|d| !(d.is_finite() && *d >= 0.0))
        {
            return Err(Error::InvalidArgument(format!(
                "distortion entry {i} must be finite and nonnegative"
            )));
        }
        Ok(SourceProblem {
            x_alpha: axes[0].clone(),
            s1_alpha: axes[1].clone(),
            s2_alpha: axes[2].clone(),
            xhat_alpha,
            source_joint,
            distortion,
        })
    }

    /// Builds a problem from flat row-major arrays `joint[x][s1][s2]` and
    /// `distortion[x][xhat]`.
    pub fn from_arrays(
        nx: usize,
        nxhat: usize,
        ns1: usize,
        ns2: usize,
        joint: Vec<f64>,
        distortion: Vec<f64>,
    ) -> Result<Self> {
        let axes = vec![
            Alphabet::new("x", nx)?,
            Alphabet::new("s1", ns1)?,
            Alphabet::new("s2", ns2)?,
        ];
        SourceProblem::new(JointDist::new(axes, joint)?, nxhat, distortion)
    }

    pub fn x_alpha(&self) -> &Alphabet {
        &self.x_alpha
    }

    pub fn xhat_alpha(&self) -> &Alphabet {
        &self.xhat_alpha
    }

    pub fn s1_alpha(&self) -> &Alphabet {
        &self.s1_alpha
    }

    pub fn s2_alpha(&self) -> &Alphabet {
        &self.s2_alpha
    }

    /// `p(x, s1, s2)` with axes in that order.
    pub fn source_joint(&self) -> &JointDist {
        &self.source_joint
    }

    /// Row-major `d[x][xhat]`.
    pub fn distortion(&self) -> &[f64] {
        &self.distortion
    }

    pub fn d(&self, x: usize, xhat: usize) -> f64 {
        self.distortion[x * self.xhat_alpha.size() + xhat]
    }

    pub fn p(&self, x: usize, s1: usize, s2: usize) -> f64 {
        let (n1, n2) = (self.s1_alpha.size(), self.s2_alpha.size());
        self.source_joint.mass()[(x * n1 + s1) * n2 + s2]
    }

    /// Marginal `p(x)`.
    pub fn p_x(&self) -> Vec<f64> {
        let per_x = self.s1_alpha.size() * self.s2_alpha.size();
        self.source_joint
            .mass()
            .chunks(per_x)
            .map(|c| c.iter().sum())
            .collect()
    }

    /// `|X| + 1` when only the decoder has state, else `|X| |S1| + 2`.
    pub fn default_u_size(&self) -> usize {
        if self.s1_alpha.size() == 1 && self.s2_alpha.size() > 1 {
            self.x_alpha.size() + 1
        } else {
            self.x_alpha.size() * self.s1_alpha.size() + 2
        }
    }

    /// Smallest distortion a zero-rate code reaches: `U` constant and
    /// `x̂` chosen from `s2` alone.
    pub fn zero_rate_distortion(&self) -> (f64, Vec<usize>) {
        let (nx, n1, n2, nh) = (
            self.x_alpha.size(),
            self.s1_alpha.size(),
            self.s2_alpha.size(),
            self.xhat_alpha.size(),
        );
        let mut total = 0.0;
        let mut choice = Vec::with_capacity(n2);
        for s2 in 0..n2 {
            let mut best = (f64::INFINITY, 0);
            for xh in 0..nh {
                let mut c = 0.0;
                for x in 0..nx {
                    for s1 in 0..n1 {
                        c += self.p(x, s1, s2) * self.d(x, xh);
                    }
                }
                if c < best.0 {
                    best = (c, xh);
                }
            }
            total += best.0;
            choice.push(best.1);
        }
        (total, choice)
    }

    /// The joint `p(x, s1, s2, u, xhat)` induced by a configuration.
    pub fn full_joint(
        &self,
        u_given_xs1: &ConditionalKernel,
        xhat_map: &DeterministicMap,
    ) -> Result<JointDist> {
        self.check_config(u_given_xs1, xhat_map)?;
        let j = compose_joint(&self.source_joint, u_given_xs1)?;
        compose_joint(&j, &xhat_map.to_kernel())
    }

    /// `(I(U; X, S1), I(U; S2))` at a configuration.
    pub fn information_terms(
        &self,
        u_given_xs1: &ConditionalKernel,
        xhat_map: &DeterministicMap,
    ) -> Result<(f64, f64)> {
        let j = self.full_joint(u_given_xs1, xhat_map)?;
        Ok((
            j.mutual_information_between(&["u"], &["x", "s1"])?,
            j.mutual_information_between(&["u"], &["s2"])?,
        ))
    }

    fn check_config(
        &self,
        u_given_xs1: &ConditionalKernel,
        xhat_map: &DeterministicMap,
    ) -> Result<()> {
        let uf = u_given_xs1.from_axes();
        if uf.len() != 2
            || uf[0] != self.x_alpha
            || uf[1] != self.s1_alpha
            || u_given_xs1.to_axis().name() != "u"
        {
            return Err(Error::AxisMismatch(format!(
                "u_given_xs1 must map (x, s1) of sizes ({}, {}) to u",
                self.x_alpha.size(),
                self.s1_alpha.size()
            )));
        }
        let mf = xhat_map.from_axes();
        if mf.len() != 2
            || mf[0] != *u_given_xs1.to_axis()
            || mf[1] != self.s2_alpha
            || *xhat_map.to_axis() != self.xhat_alpha
        {
            return Err(Error::AxisMismatch(format!(
                "xhat_map must map (u, s2) of sizes ({}, {}) to xhat (size {})",
                u_given_xs1.to_axis().size(),
                self.s2_alpha.size(),
                self.xhat_alpha.size()
            )));
        }
        Ok(())
    }
}

/// `(I(U; S1, X) - I(U; S2), E d(X, X̂))` at a configuration.
pub fn rd_objective(
    prob: &SourceProblem,
    u_given_xs1: &ConditionalKernel,
    xhat_map: &DeterministicMap,
) -> Result<(f64, f64)> {
    let j = prob.full_joint(u_given_xs1, xhat_map)?;
    let rate = j.mutual_information_between(&["u"], &["x", "s1"])?
        - j.mutual_information_between(&["u"], &["s2"])?;
    let shape = j.shape();
    let mut dist = 0.0;
    let mut idx = vec![0; shape.len()];
    for &m in j.mass() {
        if m > 0.0 {
            dist += m * prob.d(idx[0], idx[4]);
        }
        crate::prob::advance(&shape, &mut idx);
    }
    Ok((rate, dist))
}

/// `(d_min, d_max)`: the least distortion any code reaches and the least
/// distortion of a constant reconstruction.
pub fn feasible_range(prob: &SourceProblem) -> (f64, f64) {
    let px = prob.p_x();
    let nh = prob.xhat_alpha.size();
    let d_min = px
        .iter()
        .enumerate()
        .map(|(x, &p)| p * (0..nh).map(|h| prob.d(x, h)).fold(f64::INFINITY, f64::min))
        .sum();
    let d_max = (0..nh)
        .map(|h| {
            px.iter()
                .enumerate()
                .map(|(x, &p)| p * prob.d(x, h))
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    (d_min, d_max)
}

/// One point of the rate-distortion function.
#[derive(Debug, Clone)]
pub struct RdPoint {
    pub target_d: f64,
    pub rate: f64,
    pub achieved_d: f64,
    pub u_given_xs1: ConditionalKernel,
    pub xhat_map: DeterministicMap,
    /// Multiplier of the bracketing solve; `None` for the exact zero-rate code.
    pub lambda: Option<f64>,
    pub diagnostics: Diagnostics,
}

/// Nondominated points sorted by distortion.
#[derive(Debug, Clone)]
pub struct RdCurve {
    pub points: Vec<RdPoint>,
    pub d_min: f64,
    pub d_max: f64,
}

impl RdCurve {
    /// True when rates never rise with distortion by more than `slack`.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.points
            .windows(2)
            .all(|w| w[1].rate <= w[0].rate + slack)
    }

    /// Triples `(i, j, k)` whose middle point lies above the chord through
    /// the outer two by more than `slack`, with the excess.
    pub fn convexity_violations(&self, slack: f64) -> Vec<(usize, usize, usize, f64)> {
        let p = &self.points;
        let mut out = Vec::new();
        for i in 0..p.len() {
            for k in i + 2..p.len() {
                let (d1, r1, d3, r3) = (p[i].achieved_d, p[i].rate, p[k].achieved_d, p[k].rate);
                if d3 - d1 <= 1e-12 {
                    continue;
                }
                for j in i + 1..k {
                    let t = (p[j].achieved_d - d1) / (d3 - d1);
                    let chord = r1 + t * (r3 - r1);
                    if p[j].rate > chord + slack {
                        out.push((i, j, k, p[j].rate - chord));
                    }
                }
            }
        }
        out
    }

    /// Rate of the lower convex envelope of the curve at distortion `d`, or
    /// `None` outside the swept range.
    pub fn interpolate(&self, d: f64) -> Option<f64> {
        let p = &self.points;
        let first = p.first()?;
        if d < first.achieved_d - 1e-12 {
            return None;
        }
        for w in p.windows(2) {
            if d <= w[1].achieved_d {
                let span = w[1].achieved_d - w[0].achieved_d;
                if span <= 0.0 {
                    return Some(w[1].rate.min(w[0].rate));
                }
                let t = (d - w[0].achieved_d) / span;
                return Some(w[0].rate + t * (w[1].rate - w[0].rate));
            }
        }
        Some(p.last()?.rate)
    }
}

/// The Lagrangian `-(J + λ D)` for one map; rows `r = (x, s1)`.
#[derive(Debug, Clone)]
pub(crate) struct RdLandscape {
    nr: usize,
    nu: usize,
    ns2: usize,
    pr: Vec<f64>,
    /// `b[r][s2] = p(x, s1, s2)`.
    b: Vec<f64>,
    /// `c[r][u] = sum_s2 b[r][s2] d(x, g(u, s2))`.
    c: Vec<f64>,
    lambda: f64,
}

impl RdLandscape {
    pub(crate) fn new(prob: &SourceProblem, nu: usize, table: &[usize], lambda: f64) -> Self {
        let (nx, n1, n2) = (
            prob.x_alpha.size(),
            prob.s1_alpha.size(),
            prob.s2_alpha.size(),
        );
        let nr = nx * n1;
        let mut b = vec![0.0; nr * n2];
        let mut c = vec![0.0; nr * nu];
        for x in 0..nx {
            for s1 in 0..n1 {
                let r = x * n1 + s1;
                for s2 in 0..n2 {
                    b[r * n2 + s2] = prob.p(x, s1, s2);
                }
                for u in 0..nu {
                    c[r * nu + u] = (0..n2)
                        .map(|s2| b[r * n2 + s2] * prob.d(x, table[u * n2 + s2]))
                        .sum();
                }
            }
        }
        let pr = b.chunks(n2).map(|row| row.iter().sum()).collect();
        RdLandscape {
            nr,
            nu,
            ns2: n2,
            pr,
            b,
            c,
            lambda,
        }
    }

    fn with_lambda(&self, lambda: f64) -> Self {
        RdLandscape {
            lambda,
            ..self.clone()
        }
    }

    /// Least distortion this map reaches.
    fn min_distortion(&self) -> f64 {
        self.c
            .chunks(self.nu)
            .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
            .sum()
    }

    /// `log2 P(u | s2)`.
    fn log_posterior(&self, q: &[f64]) -> Vec<f64> {
        let (nu, n2) = (self.nu, self.ns2);
        let mut pus = vec![0.0; nu * n2];
        for r in 0..self.nr {
            for u in 0..nu {
                let w = q[r * nu + u];
                for s2 in 0..n2 {
                    pus[u * n2 + s2] += w * self.b[r * n2 + s2];
                }
            }
        }
        let mut ps = vec![0.0; n2];
        for u in 0..nu {
            for s2 in 0..n2 {
                ps[s2] += pus[u * n2 + s2];
            }
        }
        (0..nu * n2)
            .map(|i| {
                if pus[i] > 0.0 {
                    (pus[i] / ps[i % n2]).log2()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect()
    }

    fn score(&self, lp: &[f64], r: usize, u: usize) -> f64 {
        let n2 = self.ns2;
        (0..n2)
            .filter(|&s2| self.b[r * n2 + s2] > 0.0)
            .map(|s2| self.b[r * n2 + s2] * lp[u * n2 + s2])
            .sum()
    }

    /// `(J, D)` at `q`.
    pub(crate) fn rate_distortion(&self, q: &[f64]) -> (f64, f64) {
        let (nu, n2) = (self.nu, self.ns2);
        let lp = self.log_posterior(q);
        let mut rate = 0.0;
        let mut dist = 0.0;
        for r in 0..self.nr {
            for u in 0..nu {
                let w = q[r * nu + u];
                rate -= self.pr[r] * neg_plogp(w);
                dist += w * self.c[r * nu + u];
                if w > 0.0 {
                    for s2 in 0..n2 {
                        let bv = self.b[r * n2 + s2];
                        if bv > 0.0 {
                            rate -= w * bv * lp[u * n2 + s2];
                        }
                    }
                }
            }
        }
        (rate, dist)
    }
}

impl Landscape for RdLandscape {
    fn rows(&self) -> usize {
        self.nr
    }

    fn width(&self) -> usize {
        self.nu
    }

    fn value(&self, q: &[f64]) -> f64 {
        let (r, d) = self.rate_distortion(q);
        -(r + self.lambda * d)
    }

    fn gradient(&self, q: &[f64], grad: &mut [f64]) {
        let lp = self.log_posterior(q);
        for r in 0..self.nr {
            let p = self.pr[r];
            for u in 0..self.nu {
                let i = r * self.nu + u;
                grad[i] = if p > 0.0 {
                    self.score(&lp, r, u) - p * (q[i].log2() + LOG2_E) - self.lambda * self.c[i]
                } else {
                    0.0
                };
            }
        }
    }

    fn entropic_step(&self, q: &[f64], out: &mut [f64]) {
        let lp = self.log_posterior(q);
        for r in 0..self.nr {
            let p = self.pr[r];
            for u in 0..self.nu {
                let i = r * self.nu + u;
                out[i] = if p > 0.0 {
                    (self.score(&lp, r, u) - self.lambda * self.c[i]) / p
                } else {
                    0.0
                };
            }
        }
        normalize_exp2_rows(out, self.nu);
    }
}

/// A feasible solution for one map at one target.
#[derive(Debug, Clone)]
struct MapPoint {
    q: Vec<f64>,
    rate: f64,
    lambda: f64,
    per_start: Vec<f64>,
    diagnostics: Diagnostics,
}

/// Solves `min J + λ D` from several starts, or from `warm` alone.
fn lagrangian(
    land: &RdLandscape,
    warm: Option<&[f64]>,
    opts: &SolverOptions,
    seed: u64,
    diag: &mut Diagnostics,
) -> (Vec<f64>, Vec<f64>) {
    match warm {
        Some(q) => {
            let out = ascend(land, q, opts);
            diag.iterations += out.iterations;
            diag.perturbations += out.perturbations;
            diag.restarts += 1;
            (out.q, vec![out.value])
        }
        None => {
            let out = multi_start(land, opts, seed);
            diag.absorb(&out.diagnostics);
            (out.q, out.per_start)
        }
    }
}

/// Minimum rate of one map subject to `D <= target`, or `None` when the map
/// cannot reach the target.
fn solve_map_at(
    base: &RdLandscape,
    target: f64,
    opts: &SolverOptions,
    seed: u64,
) -> Option<MapPoint> {
    if base.min_distortion() > target + FEAS_SLACK {
        return None;
    }
    let mut diag = Diagnostics::default();
    let eval = |land: &RdLandscape, warm: Option<&[f64]>, diag: &mut Diagnostics| {
        let (q, per) = lagrangian(land, warm, opts, seed, diag);
        let (r, d) = base.rate_distortion(&q);
        (q, r, d, per)
    };

    let mut lambda = 1.0;
    let (q0, r0, d0, per_start) = eval(&base.with_lambda(lambda), None, &mut diag);
    let feasible = |d: f64| d <= target + FEAS_SLACK;
    // (lambda, q, rate, distortion) at the feasible and infeasible ends.
    let mut hi;
    let mut lo;
    if feasible(d0) {
        hi = (lambda, q0, r0, d0);
        lo = None;
        while lambda > 1e-9 {
            lambda *= 0.25;
            let warm = hi.1.clone();
            let (q, r, d, _) = eval(&base.with_lambda(lambda), Some(&warm), &mut diag);
            if feasible(d) {
                hi = (lambda, q, r, d);
            } else {
                lo = Some((lambda, q, r, d));
                break;
            }
        }
    } else {
        lo = Some((lambda, q0, r0, d0));
        loop {
            lambda *= 4.0;
            if lambda > LAMBDA_MAX {
                return None;
            }
            let warm = lo.as_ref().expect("set above").1.clone();
            let (q, r, d, _) = eval(&base.with_lambda(lambda), Some(&warm), &mut diag);
            if feasible(d) {
                hi = (lambda, q, r, d);
                break;
            }
            lo = Some((lambda, q, r, d));
        }
    }

    if let Some(mut l) = lo {
        for _ in 0..60 {
            if (hi.0 - l.0) <= 1e-12 * hi.0 || target - hi.3 <= 1e-12 {
                break;
            }
            let mid = if l.0 > 0.0 && hi.0 / l.0 > 2.0 {
                (l.0 * hi.0).sqrt()
            } else {
                0.5 * (l.0 + hi.0)
            };
            let (q, r, d, _) = eval(&base.with_lambda(mid), Some(&hi.1.clone()), &mut diag);
            if feasible(d) {
                hi = (mid, q, r, d);
            } else {
                l = (mid, q, r, d);
            }
        }
        // Mix toward the infeasible end until the constraint is tight. The
        // distortion is linear and the rate convex along the segment.
        if l.3 > hi.3 && hi.3 < target {
            let theta = ((target - hi.3) / (l.3 - hi.3)).clamp(0.0, 1.0);
            let q: Vec<f64> =
                hi.1.iter()
                    .zip(&l.1)
                    .map(|(a, b)| (1.0 - theta) * a + theta * b)
                    .collect();
            let (r, d) = base.rate_distortion(&q);
            if feasible(d) && r < hi.2 {
                hi = (hi.0, q, r, d);
            }
        }
    }
    Some(MapPoint {
        q: hi.1,
        rate: hi.2,
        lambda: hi.0,
        per_start,
        diagnostics: diag,
    })
}

fn u_alphabet(size: usize) -> Result<Alphabet> {
    if size == 0 {
        return Err(Error::InvalidArgument("u_size must be at least 1".into()));
    }
    Alphabet::new("u", size)
}

fn xhat_map_for(prob: &SourceProblem, u_alpha: &Alphabet, set: &[u64]) -> DeterministicMap {
    strategy_map(u_alpha, &prob.s2_alpha, &prob.xhat_alpha, set)
}

/// The exact zero-rate code: `U` constant, `x̂` the best function of `s2`.
fn zero_rate_point(prob: &SourceProblem, target: f64, u_alpha: &Alphabet) -> Result<RdPoint> {
    let (_, choice) = prob.zero_rate_distortion();
    let nh = prob.xhat_alpha.size() as u64;
    let t: u64 = choice.iter().rev().fold(0, |acc, &c| acc * nh + c as u64);
    let xhat_map = xhat_map_for(prob, u_alpha, &[t]);
    let nr = prob.x_alpha.size() * prob.s1_alpha.size();
    let nu = u_alpha.size();
    let mut rows = vec![0.0; nr * nu];
    for r in 0..nr {
        rows[r * nu] = 1.0;
    }
    let u_given_xs1 = ConditionalKernel::new(
        vec![prob.x_alpha.clone(), prob.s1_alpha.clone()],
        u_alpha.clone(),
        rows,
    )?;
    let (rate, achieved_d) = rd_objective(prob, &u_given_xs1, &xhat_map)?;
    Ok(RdPoint {
        target_d: target,
        rate,
        achieved_d,
        u_given_xs1,
        xhat_map,
        lambda: None,
        diagnostics: Diagnostics {
            search: SearchMode::Dominant,
            candidate_count: 1,
            ..Diagnostics::default()
        },
    })
}

/// Minimizes the rate subject to `E d <= target_d` with `|U| = u_size`.
///
/// The returned configuration is feasible, so `rate` is an upper bound on
/// `R(target_d)` at this cardinality.
pub fn solve_rd_point(
    prob: &SourceProblem,
    target_d: f64,
    u_size: usize,
    opts: &SolverOptions,
) -> Result<RdPoint> {
    opts.validate()?;
    let u_alpha = u_alphabet(u_size)?;
    if !target_d.is_finite() {
        return Err(Error::InvalidArgument(
            "target distortion must be finite".into(),
        ));
    }
    let (d_min, _) = feasible_range(prob);
    if target_d < d_min - FEAS_SLACK {
        return Err(Error::Infeasible {
            target: target_d,
            d_min,
        });
    }
    let (d_zero, _) = prob.zero_rate_distortion();
    if d_zero <= target_d {
        return zero_rate_point(prob, target_d, &u_alpha);
    }

    let (nh, n2) = (prob.xhat_alpha.size(), prob.s2_alpha.size());
    let nr = prob.x_alpha.size() * prob.s1_alpha.size();
    let mut diag = Diagnostics {
        raw_map_count: (nh as f64).powf((u_size * n2) as f64),
        ..Diagnostics::default()
    };
    let strategies = strategy_count(nh, n2).unwrap_or(u64::MAX);

    // With every strategy available the rate can only be lower, so that
    // solve bounds the search from below and seeds it.
    let mut first: Vec<Vec<u64>> = Vec::new();
    let mut bound = None;
    if strategies <= STRATEGY_CAP && (u_size as u64) < strategies {
        let k = strategies as usize;
        let all: Vec<u64> = (0..strategies).collect();
        let map = strategy_map(
            &Alphabet::new("u", k)?,
            &prob.s2_alpha,
            &prob.xhat_alpha,
            &all,
        );
        let land = RdLandscape::new(prob, k, map.table(), 1.0);
        if let Some(full) = solve_map_at(&land, target_d, opts, derive_seed(opts.seed, u64::MAX)) {
            diag.absorb(&full.diagnostics);
            let weights: Vec<f64> = (0..k)
                .map(|t| (0..nr).map(|r| land.pr[r] * full.q[r * k + t]).sum())
                .collect();
            first.push(top_strategies(&weights, u_size));
            bound = Some(full.rate);
            diag.all_strategy_value = Some(full.rate);
        }
    }
    let plan = plan_search(strategies, u_size, opts)?;
    diag.search = plan.mode;
    diag.candidate_count = plan.candidate_count;
    let mut sets = first.clone();
    sets.extend(plan.sets.into_iter().filter(|s| !first.contains(s)));

    let mut best: Option<(usize, MapPoint, DeterministicMap)> = None;
    let mut ties = 0;
    let mut evaluated = 0;
    for range in batches(sets.len(), first.len()) {
        let start = range.start;
        let maps: Vec<DeterministicMap> = sets[range]
            .iter()
            .map(|s| xhat_map_for(prob, &u_alpha, s))
            .collect();
        let incumbent = best.as_ref().map(|(_, b, _)| (b.rate, b.lambda));
        let solved = par::map_range(maps.len(), |i| {
            let seed = derive_seed(opts.seed, (start + i) as u64);
            let land = RdLandscape::new(prob, u_size, maps[i].table(), 1.0);
            if let Some((rate, lambda)) = incumbent {
                // Lagrangian dual bound at the incumbent's multiplier.
                let mut scratch = Diagnostics::default();
                let at = land.with_lambda(lambda);
                let (q, _) = lagrangian(&at, None, opts, seed, &mut scratch);
                let (r, d) = land.rate_distortion(&q);
                if r + lambda * (d - target_d) >= rate - opts.tol_bits {
                    return (None, scratch);
                }
            }
            match solve_map_at(&land, target_d, opts, seed) {
                Some(p) => {
                    let d = p.diagnostics.clone();
                    (Some(p), d)
                }
                None => (None, Diagnostics::default()),
            }
        });
        for (i, ((p, d), m)) in solved.into_iter().zip(maps).enumerate() {
            evaluated += 1;
            diag.absorb(&d);
            let Some(p) = p else { continue };
            match &best {
                Some((_, b, _)) if p.rate < b.rate - 1e-12 => {
                    ties = 0;
                    best = Some((start + i, p, m));
                }
                Some((_, b, _)) => {
                    if (p.rate - b.rate).abs() <= 1e-12 {
                        ties += 1;
                    }
                }
                None => best = Some((start + i, p, m)),
            }
        }
        if let Some((_, b, _)) = &best {
            if b.rate <= 1e-12 || bound.is_some_and(|lb| b.rate <= lb + opts.tol_bits) {
                break;
            }
        }
    }
    let Some((idx, b, xhat_map)) = best else {
        return Err(Error::Infeasible {
            target: target_d,
            d_min: least_distortion(prob, &sets, &u_alpha),
        });
    };
    diag.maps_evaluated = evaluated;
    diag.best_candidate = idx;
    diag.ties = ties;
    diag.best_per_restart = b.per_start.clone();
    if diag.search == SearchMode::Dominant {
        diag.all_strategy_value = Some(b.rate);
    }
    let u_given_xs1 = ConditionalKernel::new(
        vec![prob.x_alpha.clone(), prob.s1_alpha.clone()],
        u_alpha,
        b.q,
    )?;
    let (rate, achieved_d) = rd_objective(prob, &u_given_xs1, &xhat_map)?;
    if let Some(lb) = diag.all_strategy_value {
        if rate - lb > 1e-4 {
            diag.flags.push(format!(
                "cardinality gap: u_size = {u_size} reaches {rate:.6} bits but a larger U reaches {lb:.6}"
            ));
        }
    }
    Ok(RdPoint {
        target_d,
        rate,
        achieved_d,
        u_given_xs1,
        xhat_map,
        lambda: Some(b.lambda),
        diagnostics: diag,
    })
}

/// Least distortion over the candidate maps (for error reporting).
fn least_distortion(prob: &SourceProblem, sets: &[Vec<u64>], u_alpha: &Alphabet) -> f64 {
    sets.iter()
        .map(|s| {
            RdLandscape::new(
                prob,
                u_alpha.size(),
                xhat_map_for(prob, u_alpha, s).table(),
                0.0,
            )
            .min_distortion()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Traces the curve by minimizing `rate + λ distortion` for each `λ` in
/// `lambda_grid`, keeping the nondominated points.
pub fn sweep_rd_curve(
    prob: &SourceProblem,
    u_size: usize,
    lambda_grid: &[f64],
    opts: &SolverOptions,
) -> Result<RdCurve> {
    opts.validate()?;
    let u_alpha = u_alphabet(u_size)?;
    if lambda_grid.is_empty() {
        return Err(Error::InvalidArgument("lambda grid is empty".into()));
    }
    if let Some(l) = lambda_grid.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "lambda {l} must be finite and nonnegative"
        )));
    }
    let (nh, n2) = (prob.xhat_alpha.size(), prob.s2_alpha.size());
    let strategies = strategy_count(nh, n2).unwrap_or(u64::MAX);
    let plan = plan_search(strategies, u_size, opts)?;
    let maps: Vec<DeterministicMap> = plan
        .sets
        .iter()
        .map(|s| xhat_map_for(prob, &u_alpha, s))
        .collect();
    let (d_zero, _) = prob.zero_rate_distortion();

    let solved: Vec<Result<RdPoint>> = par::map_slice(lambda_grid, |&lambda| {
        let mut diag = Diagnostics {
            search: plan.mode,
            candidate_count: plan.candidate_count,
            ..Diagnostics::default()
        };
        // (lagrangian, index, q)
        let mut best: Option<(f64, usize, Vec<f64>, Vec<f64>)> = None;
        if lambda > 0.0 {
            for (i, m) in maps.iter().enumerate() {
                let land = RdLandscape::new(prob, u_size, m.table(), lambda);
                let out = multi_start(&land, opts, derive_seed(opts.seed, i as u64));
                diag.absorb(&out.diagnostics);
                diag.maps_evaluated += 1;
                let (r, d) = land.rate_distortion(&out.q);
                let l = r + lambda * d;
                if best.as_ref().is_none_or(|b| l < b.0 - 1e-12) {
                    best = Some((l, i, out.q, out.per_start));
                }
            }
        }
        match best {
            Some((l, i, q, per)) if l < lambda * d_zero => {
                diag.best_candidate = i;
                diag.best_per_restart = per;
                let u_given_xs1 = ConditionalKernel::new(
                    vec![prob.x_alpha.clone(), prob.s1_alpha.clone()],
                    u_alpha.clone(),
                    q,
                )?;
                let (rate, achieved_d) = rd_objective(prob, &u_given_xs1, &maps[i])?;
                Ok(RdPoint {
                    target_d: achieved_d,
                    rate,
                    achieved_d,
                    u_given_xs1,
                    xhat_map: maps[i].clone(),
                    lambda: Some(lambda),
                    diagnostics: diag,
                })
            }
            _ => {
                let mut p = zero_rate_point(prob, d_zero, &u_alpha)?;
                p.lambda = Some(lambda);
                p.diagnostics.absorb(&diag);
                Ok(p)
            }
        }
    });
    let mut points = solved.into_iter().collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| {
        a.achieved_d
            .total_cmp(&b.achieved_d)
            .then(a.rate.total_cmp(&b.rate))
    });
    let mut kept: Vec<RdPoint> = Vec::new();
    for p in points {
        // Sorted by distortion, so `p` is dominated iff some kept point has
        // rate at most p's.
        if kept.iter().all(|k| p.rate < k.rate - 1e-12) {
            kept.push(p);
        }
    }
    let (d_min, d_max) = feasible_range(prob);
    Ok(RdCurve {
        points: kept,
        d_min,
        d_max,
    })
}

/// Default multiplier grid: `n` values log-spaced over `[1e-2, 1e3]`.
pub fn default_lambda_grid(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 10f64.powf(-2.0 + 5.0 * i as f64 / (n - 1) as f64))
        .collect()
}
