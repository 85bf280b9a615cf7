//! Exhaustive grid search on tiny instances.
//!
//! Every row of the auxiliary kernel ranges over the exact lattice of
//! compositions with step `δ`, and every deterministic map is enumerated.
//! Objectives are evaluated by direct summation, independent of the
//! information functionals in [`crate::prob`], so the results serve as ground
//! truth for the main solvers.
//!
//! Each value comes with a resolution bound: a Lipschitz estimate taken from
//! the largest one-step finite difference around the best grid point,
//! multiplied by the number of steps needed to round an arbitrary kernel onto
//! the lattice. It is an estimate, not a certificate.

use crate::capacity::ChannelProblem;
use crate::error::{Error, Result};
use crate::par;
use crate::rate_distortion::SourceProblem;

/// Default cap on `grid points x maps` per search.
pub const DEFAULT_MAX_POINTS: u64 = 1 << 28;

/// Distortion tolerance for grid feasibility (floating-point rounding only).
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Simplex lattice resolution and an enumeration guard.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub delta: f64,
    pub max_points: u64,
}

impl GridSpec {
    /// `1 / delta` must be an integer and `delta` must lie in `(0, 0.5]`.
    pub fn new(delta: f64, max_points: u64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 0.5) {
            return Err(Error::InvalidArgument(format!(
                "grid step must be in (0, 0.5], got {delta}"
            )));
        }
        let m = (1.0 / delta).round();
        if ((1.0 / delta) - m).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "1 / delta must be an integer, got {}",
                1.0 / delta
            )));
        }
        Ok(GridSpec { delta, max_points })
    }

    /// Default step for rows over an alphabet of `size` symbols.
    pub fn for_alphabet(size: usize) -> Self {
        let delta = if size <= 2 { 0.02 } else { 0.05 };
        GridSpec {
            delta,
            max_points: DEFAULT_MAX_POINTS,
        }
    }

    fn steps(&self) -> usize {
        (1.0 / self.delta).round() as usize
    }
}

/// A grid optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleValue {
    pub value: f64,
    /// Estimated distance to the grid-free optimum at the same `u_size`.
    pub bound: f64,
    /// Kernel-map pairs evaluated.
    pub points: u64,
    /// Best kernel, row-major.
    pub kernel: Vec<f64>,
    /// Best map table, row-major over `(u, side)`.
    pub map: Vec<usize>,
}

/// All compositions of `m` into `k` nonnegative parts, as probability rows,
/// in lexicographic order.
fn compositions(m: usize, k: usize) -> Vec<Vec<f64>> {
    fn rec(m: usize, k: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 1 {
            prefix.push(m);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for a in 0..=m {
            prefix.push(a);
            rec(m - a, k - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut raw = Vec::new();
    rec(m, k, &mut Vec::with_capacity(k), &mut raw);
    raw.into_iter()
        .map(|c| c.into_iter().map(|a| a as f64 / m as f64).collect())
        .collect()
}

/// Number of points in `rows` independent copies of the `(m, k)` lattice,
/// saturating.
fn lattice_size(m: usize, k: usize, rows: usize) -> u64 {
    let mut per_row: u64 = 1;
    for i in 1..k as u64 {
        per_row = per_row.saturating_mul(m as u64 + i) / i;
    }
    (0..rows).fold(1u64, |acc, _| acc.saturating_mul(per_row))
}

fn pow_sat(base: usize, exp: usize) -> u64 {
    (0..exp).fold(1u64, |acc, _| acc.saturating_mul(base as u64))
}

fn check_budget(points: u64, grid: &GridSpec, what: &str) -> Result<()> {
    if points > grid.max_points {
        return Err(Error::Budget(format!(
            "{what} needs {points} evaluations, over the cap of {}",
            grid.max_points
        )));
    }
    Ok(())
}

/// Writes lattice point `index` (mixed radix over rows) into `q`.
fn lattice_point(comps: &[Vec<f64>], rows: usize, mut index: u64, q: &mut [f64]) {
    let k = comps[0].len();
    let base = comps.len() as u64;
    for r in (0..rows).rev() {
        let c = &comps[(index % base) as usize];
        q[r * k..(r + 1) * k].copy_from_slice(c);
        index /= base;
    }
}

/// Advances a mixed-radix counter with every digit below `base`.
fn next_table(table: &mut [usize], base: usize) -> bool {
    for d in table.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

fn xlogx_ratio(p: f64, num: f64, den: f64) -> f64 {
    if p > 0.0 {
        p * (num / den).log2()
    } else {
        0.0
    }
}

/// Lattice neighbours of `q`: one step of mass moved between two entries of
/// one row.
fn neighbours(q: &[f64], k: usize, delta: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for r in 0..q.len() / k {
        for a in 0..k {
            if q[r * k + a] < delta - 1e-12 {
                continue;
            }
            for b in 0..k {
                if a != b {
                    let mut n = q.to_vec();
                    n[r * k + a] -= delta;
                    n[r * k + b] += delta;
                    if n[r * k + a] < 0.0 {
                        n[r * k + a] = 0.0;
                    }
                    out.push(n);
                }
            }
        }
    }
    out
}

/// Half-steps needed to round one row of width `k` onto the lattice.
fn rounding_steps(rows: usize, k: usize) -> f64 {
    rows as f64 * (k as f64 - 1.0) / 2.0
}

/// Direct evaluator for `I(U; S2, Y) - I(U; S1)`.
struct CapEval {
    ns1: usize,
    nx: usize,
    nz: usize,
    nu: usize,
    p_s1: Vec<f64>,
    /// `t[s1][x][z] = p(s1, s2) W(y | x, s1, s2)` with `z = (s2, y)`.
    t: Vec<f64>,
}

impl CapEval {
    fn new(prob: &ChannelProblem, nu: usize) -> Self {
        let (nx, ny) = (prob.x_alpha().size(), prob.y_alpha().size());
        let (ns1, ns2) = (prob.s1_alpha().size(), prob.s2_alpha().size());
        let nz = ns2 * ny;
        let mut t = vec![0.0; ns1 * nx * nz];
        for s1 in 0..ns1 {
            for x in 0..nx {
                for s2 in 0..ns2 {
                    for y in 0..ny {
                        t[(s1 * nx + x) * nz + s2 * ny + y] =
                            prob.p_state(s1, s2) * prob.p_y(x, s1, s2, y);
                    }
                }
            }
        }
        let p_s1 = (0..ns1)
            .map(|s1| (0..ns2).map(|s2| prob.p_state(s1, s2)).sum())
            .collect();
        CapEval {
            ns1,
            nx,
            nz,
            nu,
            p_s1,
            t,
        }
    }

    fn p_u(&self, q: &[f64]) -> Vec<f64> {
        let mut pu = vec![0.0; self.nu];
        for s1 in 0..self.ns1 {
            for u in 0..self.nu {
                pu[u] += self.p_s1[s1] * q[s1 * self.nu + u];
            }
        }
        pu
    }

    /// `I(U; S1)` for rows `q[s1][u]`.
    fn sender_term(&self, q: &[f64], pu: &[f64]) -> f64 {
        let mut v = 0.0;
        for s1 in 0..self.ns1 {
            for u in 0..self.nu {
                let c = q[s1 * self.nu + u];
                v += self.p_s1[s1] * xlogx_ratio(c, c, pu[u]);
            }
        }
        v
    }

    /// `I(U; S2, Y)` where `enc(u, s1, x)` gives the input distribution.
    /// `joint` needs room for `|U| |Z| + |Z|` entries.
    fn receiver_term(
        &self,
        q: &[f64],
        pu: &[f64],
        enc: impl Fn(usize, usize, usize) -> f64,
        joint: &mut [f64],
    ) -> f64 {
        joint.iter_mut().for_each(|x| *x = 0.0);
        let (joint, pz) = joint.split_at_mut(self.nu * self.nz);
        for u in 0..self.nu {
            for s1 in 0..self.ns1 {
                let w = q[s1 * self.nu + u];
                if w == 0.0 {
                    continue;
                }
                for x in 0..self.nx {
                    let e = enc(u, s1, x);
                    if e == 0.0 {
                        continue;
                    }
                    let row =
                        &self.t[(s1 * self.nx + x) * self.nz..(s1 * self.nx + x + 1) * self.nz];
                    for z in 0..self.nz {
                        joint[u * self.nz + z] += w * e * row[z];
                    }
                }
            }
        }
        for u in 0..self.nu {
            for z in 0..self.nz {
                pz[z] += joint[u * self.nz + z];
            }
        }
        let mut v = 0.0;
        for u in 0..self.nu {
            for z in 0..self.nz {
                let p = joint[u * self.nz + z];
                v += xlogx_ratio(p, p, pu[u] * pz[z]);
            }
        }
        v
    }

    /// Objective for a deterministic map, given `p(u)` and `I(U; S1)`.
    fn value_det(
        &self,
        q: &[f64],
        pu: &[f64],
        sender: f64,
        map: &[usize],
        joint: &mut [f64],
    ) -> f64 {
        let ns1 = self.ns1;
        let r = self.receiver_term(
            q,
            pu,
            |u, s1, x| if map[u * ns1 + s1] == x { 1.0 } else { 0.0 },
            joint,
        );
        r - sender
    }

    fn scratch(&self) -> Vec<f64> {
        vec![0.0; (self.nu + 1) * self.nz]
    }

    fn value_stoch(
        &self,
        q: &[f64],
        pu: &[f64],
        sender: f64,
        kernel: &[f64],
        joint: &mut [f64],
    ) -> f64 {
        let (ns1, nx) = (self.ns1, self.nx);
        let r = self.receiver_term(q, pu, |u, s1, x| kernel[(u * ns1 + s1) * nx + x], joint);
        r - sender
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Best {
    value: f64,
    index: u64,
    sub: Vec<usize>,
}

/// Keeps the larger value; on equal values the smaller index wins, so the
/// result does not depend on how the grid is split across workers.
fn merge_max(a: Option<Best>, b: Option<Best>) -> Option<Best> {
    match (a, b) {
        (Some(a), Some(b)) => {
            if b.value > a.value || (b.value == a.value && b.index < a.index) {
                Some(b)
            } else {
                Some(a)
            }
        }
        (a, None) => a,
        (None, b) => b,
    }
}

/// Grid maximum of the capacity objective over `p(u|s1)` and `x = f(u, s1)`.
pub fn oracle_capacity(
    prob: &ChannelProblem,
    u_size: usize,
    grid: &GridSpec,
) -> Result<OracleValue> {
    if u_size == 0 {
        return Err(Error::InvalidArgument("u_size must be at least 1".into()));
    }
    let (nx, ns1) = (prob.x_alpha().size(), prob.s1_alpha().size());
    let m = grid.steps();
    let q_points = lattice_size(m, u_size, ns1);
    let maps = pow_sat(nx, u_size * ns1);
    let points = q_points.saturating_mul(maps);
    check_budget(points, grid, "capacity grid")?;
    let comps = compositions(m, u_size);
    let eval = CapEval::new(prob, u_size);
    let cells = u_size * ns1;

    let best = par::fold_range(
        q_points,
        None,
        |acc: &mut Option<Best>, i| {
            let mut q = vec![0.0; cells];
            lattice_point(&comps, ns1, i, &mut q);
            let pu = eval.p_u(&q);
            let sender = eval.sender_term(&q, &pu);
            let mut joint = eval.scratch();
            let mut map = vec![0; cells];
            let mut j = 0u64;
            loop {
                let v = eval.value_det(&q, &pu, sender, &map, &mut joint);
                let index = i * maps + j;
                if acc
                    .as_ref()
                    .is_none_or(|b| v > b.value || (v == b.value && index < b.index))
                {
                    *acc = Some(Best {
                        value: v,
                        index,
                        sub: map.clone(),
                    });
                }
                j += 1;
                if !next_table(&mut map, nx) {
                    break;
                }
            }
        },
        merge_max,
    )
    .expect("nonempty grid");

    let mut q = vec![0.0; cells];
    lattice_point(&comps, ns1, best.index / maps, &mut q);
    let mut joint = eval.scratch();
    let step = neighbours(&q, u_size, grid.delta)
        .iter()
        .map(|n| {
            let pu = eval.p_u(n);
            let v = eval.value_det(n, &pu, eval.sender_term(n, &pu), &best.sub, &mut joint);
            (v - best.value).abs()
        })
        .fold(0.0, f64::max);
    Ok(OracleValue {
        value: best.value,
        bound: step * rounding_steps(ns1, u_size),
        points,
        kernel: q,
        map: best.sub,
    })
}

/// Direct evaluator for the rate `I(U; X, S1) - I(U; S2)` and the per-cell
/// distortion table.
struct RdEval {
    nr: usize,
    ns2: usize,
    nh: usize,
    nu: usize,
    /// `p(x, s1)` per row `r = (x, s1)`.
    p_r: Vec<f64>,
    /// `p(x, s1, s2)` indexed `[r][s2]`.
    p_rs: Vec<f64>,
    p_s2: Vec<f64>,
    /// `d(x, xhat)` indexed `[r][xhat]`.
    d_r: Vec<f64>,
}

impl RdEval {
    fn new(prob: &SourceProblem, nu: usize) -> Self {
        let (nx, ns1, ns2, nh) = (
            prob.x_alpha().size(),
            prob.s1_alpha().size(),
            prob.s2_alpha().size(),
            prob.xhat_alpha().size(),
        );
        let nr = nx * ns1;
        let mut p_rs = vec![0.0; nr * ns2];
        let mut d_r = vec![0.0; nr * nh];
        for x in 0..nx {
            for s1 in 0..ns1 {
                let r = x * ns1 + s1;
                for s2 in 0..ns2 {
                    p_rs[r * ns2 + s2] = prob.p(x, s1, s2);
                }
                for h in 0..nh {
                    d_r[r * nh + h] = prob.d(x, h);
                }
            }
        }
        let p_r = (0..nr)
            .map(|r| p_rs[r * ns2..(r + 1) * ns2].iter().sum())
            .collect();
        let p_s2 = (0..ns2)
            .map(|s| (0..nr).map(|r| p_rs[r * ns2 + s]).sum())
            .collect();
        RdEval {
            nr,
            ns2,
            nh,
            nu,
            p_r,
            p_rs,
            p_s2,
            d_r,
        }
    }

    fn rate(&self, q: &[f64]) -> f64 {
        let nu = self.nu;
        let mut pu = vec![0.0; nu];
        let mut pus = vec![0.0; nu * self.ns2];
        for r in 0..self.nr {
            for u in 0..nu {
                let c = q[r * nu + u];
                pu[u] += self.p_r[r] * c;
                for s in 0..self.ns2 {
                    pus[u * self.ns2 + s] += self.p_rs[r * self.ns2 + s] * c;
                }
            }
        }
        let mut v = 0.0;
        for r in 0..self.nr {
            for u in 0..nu {
                let c = q[r * nu + u];
                v += self.p_r[r] * xlogx_ratio(c, c, pu[u]);
            }
        }
        for u in 0..nu {
            for s in 0..self.ns2 {
                let p = pus[u * self.ns2 + s];
                v -= xlogx_ratio(p, p, pu[u] * self.p_s2[s]);
            }
        }
        v
    }

    /// `c[u][s2][xhat] = sum_r p(r, s2) q(u | r) d(x_r, xhat)`.
    fn cost_table(&self, q: &[f64], c: &mut [f64]) {
        c.iter_mut().for_each(|x| *x = 0.0);
        let (nu, ns2, nh) = (self.nu, self.ns2, self.nh);
        for r in 0..self.nr {
            for u in 0..nu {
                let w = q[r * nu + u];
                if w == 0.0 {
                    continue;
                }
                for s in 0..ns2 {
                    let a = w * self.p_rs[r * ns2 + s];
                    for h in 0..nh {
                        c[(u * ns2 + s) * nh + h] += a * self.d_r[r * nh + h];
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct RdBest {
    /// Least rate with distortion within the target, and its index and map.
    strict: Option<Best>,
    /// Least rate with distortion within the target plus the rounding slack.
    slack: Option<f64>,
}

fn merge_min(a: Option<Best>, b: Option<Best>) -> Option<Best> {
    let neg = |x: Option<Best>| {
        x.map(|b| Best {
            value: -b.value,
            ..b
        })
    };
    neg(merge_max(neg(a), neg(b)))
}

fn merge_rd(a: RdBest, b: RdBest) -> RdBest {
    RdBest {
        strict: merge_min(a.strict, b.strict),
        slack: match (a.slack, b.slack) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, None) => x,
            (None, y) => y,
        },
    }
}

fn rd_setup(prob: &SourceProblem, target_d: f64, u_size: usize) -> Result<(f64, f64)> {
    if u_size == 0 {
        return Err(Error::InvalidArgument("u_size must be at least 1".into()));
    }
    if !target_d.is_finite() {
        return Err(Error::InvalidArgument(
            "target distortion must be finite".into(),
        ));
    }
    let (nx, nh) = (prob.x_alpha().size(), prob.xhat_alpha().size());
    let px = prob.p_x();
    let d_min: f64 = (0..nx)
        .map(|x| px[x] * (0..nh).map(|h| prob.d(x, h)).fold(f64::INFINITY, f64::min))
        .sum();
    if target_d < d_min - 1e-12 {
        return Err(Error::Infeasible {
            target: target_d,
            d_min,
        });
    }
    let d = prob.distortion();
    let span = d.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - d.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((d_min, span))
}

/// Grid minimum of the rate over `p(u|x,s1)` and `x̂ = g(u, s2)`, subject to
/// a distortion within `target_d` (plus [`FEASIBILITY_TOL`]).
///
/// Every grid point is a genuine configuration, so the value bounds the rate
/// from above. The bound adds the Lipschitz rounding term to the rate gained
/// by relaxing the target by the rounding slack `δ (|U| / 2) (max d - min d)`,
/// which is how far rounding an optimal kernel onto the lattice can move its
/// distortion.
pub fn oracle_rd(
    prob: &SourceProblem,
    target_d: f64,
    u_size: usize,
    grid: &GridSpec,
) -> Result<OracleValue> {
    let (_, span) = rd_setup(prob, target_d, u_size)?;
    let (nh, ns2) = (prob.xhat_alpha().size(), prob.s2_alpha().size());
    let eval = RdEval::new(prob, u_size);
    let m = grid.steps();
    let q_points = lattice_size(m, u_size, eval.nr);
    let maps = pow_sat(nh, u_size * ns2);
    let points = q_points.saturating_mul(maps);
    check_budget(points, grid, "rate-distortion grid")?;
    let comps = compositions(m, u_size);
    let slack = grid.delta * u_size as f64 / 2.0 * span;
    let cells = u_size * eval.nr;

    let best = par::fold_range(
        q_points,
        RdBest {
            strict: None,
            slack: None,
        },
        |acc: &mut RdBest, i| {
            let mut q = vec![0.0; cells];
            lattice_point(&comps, eval.nr, i, &mut q);
            let mut c = vec![0.0; u_size * ns2 * nh];
            eval.cost_table(&q, &mut c);
            // The rate does not depend on the map; only the least distortion
            // over all maps decides feasibility.
            let mut map = vec![0; u_size * ns2];
            let mut least = (f64::INFINITY, 0u64, map.clone());
            let mut j = 0u64;
            loop {
                let d: f64 = map
                    .iter()
                    .enumerate()
                    .map(|(cell, &h)| c[cell * nh + h])
                    .sum();
                if d < least.0 {
                    least = (d, j, map.clone());
                }
                j += 1;
                if !next_table(&mut map, nh) {
                    break;
                }
            }
            if least.0 > target_d + slack {
                return;
            }
            let rate = eval.rate(&q);
            let here = RdBest {
                strict: (least.0 <= target_d + FEASIBILITY_TOL).then(|| Best {
                    value: rate,
                    index: i * maps + least.1,
                    sub: least.2,
                }),
                slack: Some(rate),
            };
            *acc = merge_rd(
                std::mem::replace(
                    acc,
                    RdBest {
                        strict: None,
                        slack: None,
                    },
                ),
                here,
            );
        },
        merge_rd,
    );
    let Some(b) = best.strict else {
        return Err(Error::Infeasible {
            target: target_d,
            d_min: rd_setup(prob, target_d, u_size)?.0,
        });
    };
    let mut q = vec![0.0; cells];
    lattice_point(&comps, eval.nr, b.index / maps, &mut q);
    let step = neighbours(&q, u_size, grid.delta)
        .iter()
        .map(|n| (eval.rate(n) - b.value).abs())
        .fold(0.0, f64::max);
    let rounding = step * rounding_steps(eval.nr, u_size);
    let relaxed = best.slack.map_or(0.0, |s| b.value - s);
    Ok(OracleValue {
        value: b.value,
        bound: rounding + relaxed,
        points,
        kernel: q,
        map: b.sub,
    })
}

/// Which problem a sufficiency check runs on.
#[derive(Debug, Clone, Copy)]
pub enum OracleProblem<'a> {
    Channel(&'a ChannelProblem),
    /// A source with its target distortion.
    Source(&'a SourceProblem, f64),
}

/// Deterministic-map optimum against the optimum over stochastic kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficiencyReport {
    pub deterministic: f64,
    pub stochastic: f64,
    pub bound: f64,
    /// Lattice step used for the stochastic kernel rows.
    pub kernel_delta: f64,
    pub points: u64,
    pub passed: bool,
}

/// Compares the grid optimum over deterministic maps with the grid optimum
/// over stochastic kernels `p(x|u,s1)` (channel) or `p(x̂|u,s2)` (source)
/// whose rows lie on the `kernel_grid` lattice. Passes when the stochastic
/// optimum improves on the deterministic one by no more than the
/// deterministic grid bound.
pub fn deterministic_sufficiency_check(
    problem: OracleProblem<'_>,
    u_size: usize,
    grid: &GridSpec,
    kernel_grid: &GridSpec,
) -> Result<SufficiencyReport> {
    match problem {
        OracleProblem::Channel(prob) => {
            let det = oracle_capacity(prob, u_size, grid)?;
            let (nx, ns1) = (prob.x_alpha().size(), prob.s1_alpha().size());
            let q_points = lattice_size(grid.steps(), u_size, ns1);
            let k_points = lattice_size(kernel_grid.steps(), nx, u_size * ns1);
            let points = q_points.saturating_mul(k_points);
            check_budget(points, grid, "stochastic capacity grid")?;
            let q_comps = compositions(grid.steps(), u_size);
            let k_comps = compositions(kernel_grid.steps(), nx);
            let eval = CapEval::new(prob, u_size);
            let stochastic = par::fold_range(
                q_points,
                f64::NEG_INFINITY,
                |acc: &mut f64, i| {
                    let mut q = vec![0.0; u_size * ns1];
                    lattice_point(&q_comps, ns1, i, &mut q);
                    let mut kernel = vec![0.0; u_size * ns1 * nx];
                    let mut joint = eval.scratch();
                    let pu = eval.p_u(&q);
                    let sender = eval.sender_term(&q, &pu);
                    for j in 0..k_points {
                        lattice_point(&k_comps, u_size * ns1, j, &mut kernel);
                        *acc = acc.max(eval.value_stoch(&q, &pu, sender, &kernel, &mut joint));
                    }
                },
                f64::max,
            );
            Ok(SufficiencyReport {
                deterministic: det.value,
                stochastic,
                bound: det.bound,
                kernel_delta: kernel_grid.delta,
                points: det.points.saturating_add(points),
                passed: stochastic - det.value <= det.bound + 1e-9,
            })
        }
        OracleProblem::Source(prob, target_d) => {
            let det = oracle_rd(prob, target_d, u_size, grid)?;
            rd_setup(prob, target_d, u_size)?;
            let (nh, ns2) = (prob.xhat_alpha().size(), prob.s2_alpha().size());
            let eval = RdEval::new(prob, u_size);
            let q_points = lattice_size(grid.steps(), u_size, eval.nr);
            let k_points = lattice_size(kernel_grid.steps(), nh, u_size * ns2);
            let points = q_points.saturating_mul(k_points);
            check_budget(points, grid, "stochastic rate-distortion grid")?;
            let q_comps = compositions(grid.steps(), u_size);
            let k_comps = compositions(kernel_grid.steps(), nh);
            let stochastic = par::fold_range(
                q_points,
                f64::INFINITY,
                |acc: &mut f64, i| {
                    let mut q = vec![0.0; u_size * eval.nr];
                    lattice_point(&q_comps, eval.nr, i, &mut q);
                    let mut c = vec![0.0; u_size * ns2 * nh];
                    eval.cost_table(&q, &mut c);
                    let mut kernel = vec![0.0; u_size * ns2 * nh];
                    let mut least = f64::INFINITY;
                    for j in 0..k_points {
                        lattice_point(&k_comps, u_size * ns2, j, &mut kernel);
                        least = least.min(c.iter().zip(&kernel).map(|(a, b)| a * b).sum());
                    }
                    if least <= target_d + FEASIBILITY_TOL {
                        *acc = acc.min(eval.rate(&q));
                    }
                },
                f64::min,
            );
            Ok(SufficiencyReport {
                deterministic: det.value,
                stochastic,
                bound: det.bound,
                kernel_delta: kernel_grid.delta,
                points: det.points.saturating_add(points),
                passed: det.value - stochastic <= det.bound + 1e-9,
            })
        }
    }
}
