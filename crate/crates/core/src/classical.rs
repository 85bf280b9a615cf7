//! Classical alternating iterations: Blahut–Arimoto for channel capacity,
//! Blahut's iteration for rate-distortion, and the same idea lifted to
//! encoder strategies (state at the sender) and decoder strategies (state at
//! the decoder).
//!
//! Everything here works on plain row-major arrays and is independent of the
//! general solvers, so the two routes can check each other.

use crate::error::{Error, Result};
use crate::prob::neg_plogp;

/// Iteration cap shared by every loop in this module.
pub const MAX_ITERS: usize = 100_000;

/// Stop once the objective changes by less than this, relative to its size.
pub const REL_TOL: f64 = 1e-12;

/// Bracketing steps used by the constrained rate-distortion solves.
const BISECTIONS: usize = 100;

/// Capacity and optimal input of a channel.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityEstimate {
    /// Mutual information at `input`, a lower bound on capacity.
    pub value: f64,
    /// Upper bound `max_x D(W(.|x) || q)` at the final iterate.
    pub upper: f64,
    pub input: Vec<f64>,
    pub iterations: usize,
}

/// Blahut–Arimoto on a channel `w[x][y]` (row-major, `nx` rows).
///
/// Stops when the upper and lower capacity bounds are within `1e-9` bits or
/// after [`MAX_ITERS`] iterations.
pub fn channel_capacity(w: &[f64], nx: usize) -> Result<CapacityEstimate> {
    if nx == 0 || w.is_empty() || !w.len().is_multiple_of(nx) {
        return Err(Error::InvalidArgument(
            "channel matrix shape mismatch".into(),
        ));
    }
    let ny = w.len() / nx;
    let mut p = vec![1.0 / nx as f64; nx];
    let mut iterations = 0;
    loop {
        let mut q = vec![0.0; ny];
        for x in 0..nx {
            for y in 0..ny {
                q[y] += p[x] * w[x * ny + y];
            }
        }
        // c[x] = D(W(.|x) || q) in bits.
        let c: Vec<f64> = (0..nx)
            .map(|x| {
                (0..ny)
                    .filter(|&y| w[x * ny + y] > 0.0)
                    .map(|y| w[x * ny + y] * (w[x * ny + y] / q[y]).log2())
                    .sum()
            })
            .collect();
        let lower: f64 = p.iter().zip(&c).map(|(a, b)| a * b).sum();
        let upper = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        iterations += 1;
        if upper - lower <= 1e-9 || iterations >= MAX_ITERS {
            return Ok(CapacityEstimate {
                value: lower.max(0.0),
                upper,
                input: p,
                iterations,
            });
        }
        let mut z = 0.0;
        for x in 0..nx {
            p[x] *= c[x].exp2();
            z += p[x];
        }
        p.iter_mut().for_each(|v| *v /= z);
    }
}

/// A convex rate-distortion family parametrized by a slope `λ`.
///
/// `solve(λ)` minimizes `R + λ D`; `mix` forms the convex combination of
/// two conditionals, along which `D` is linear and `R` convex.
trait SlopeFamily {
    type State: Clone;
    fn solve(&self, lambda: f64) -> Self::State;
    /// The minimum-rate state among those with least distortion.
    fn solve_min_distortion(&self) -> Self::State;
    fn rate_distortion(&self, s: &Self::State) -> (f64, f64);
    fn mix(&self, a: &Self::State, b: &Self::State, theta: f64) -> Self::State;
}

/// A point `(rate, distortion)` from one of the dedicated iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdEstimate {
    pub rate: f64,
    pub distortion: f64,
}

fn constrained<F: SlopeFamily>(
    fam: &F,
    target: f64,
    d_min: f64,
    d_zero: f64,
) -> Result<RdEstimate> {
    if target < d_min - 1e-12 {
        return Err(Error::Infeasible { target, d_min });
    }
    if target >= d_zero {
        return Ok(RdEstimate {
            rate: 0.0,
            distortion: d_zero,
        });
    }
    if target <= d_min + 1e-12 {
        let (rate, distortion) = fam.rate_distortion(&fam.solve_min_distortion());
        return Ok(RdEstimate {
            rate: rate.max(0.0),
            distortion,
        });
    }
    // Distortion falls as λ grows; find λ_hi feasible and λ_lo infeasible.
    let mut lo = (0.0, None::<F::State>);
    let mut lambda = 1.0;
    let mut hi = loop {
        let s = fam.solve(lambda);
        let (_, d) = fam.rate_distortion(&s);
        if d <= target {
            break (lambda, s);
        }
        lo = (lambda, Some(s));
        lambda *= 2.0;
        if lambda > 1e9 {
            let s = fam.solve_min_distortion();
            break (f64::INFINITY, s);
        }
    };
    for _ in 0..BISECTIONS {
        if !hi.0.is_finite() || hi.0 - lo.0 <= 1e-13 * hi.0 {
            break;
        }
        let mid = 0.5 * (lo.0 + hi.0);
        let s = fam.solve(mid);
        let (_, d) = fam.rate_distortion(&s);
        if d <= target {
            hi = (mid, s);
        } else {
            lo = (mid, Some(s));
        }
    }
    let (mut rate, mut distortion) = fam.rate_distortion(&hi.1);
    if let Some(lo_state) = &lo.1 {
        let (_, d_lo) = fam.rate_distortion(lo_state);
        if d_lo > distortion && distortion < target {
            let theta = ((target - distortion) / (d_lo - distortion)).clamp(0.0, 1.0);
            let m = fam.mix(&hi.1, lo_state, theta);
            let (r, d) = fam.rate_distortion(&m);
            if d <= target + 1e-12 && r < rate {
                rate = r;
                distortion = d;
            }
        }
    }
    Ok(RdEstimate {
        rate: rate.max(0.0),
        distortion,
    })
}

/// Shared body of the alternating minimizations: rows `r` with mass `pr`,
/// columns `t`, per-row costs `cost[r][t]` (already weighted by `pr`), and
/// a side variable `s` with `b[r][s] = p(r, s)` seen by the reconstruction.
///
/// Minimizes `I(T; R | S) + λ sum cost` over `q(t|r)`. Entries with
/// `allowed = false` are held at zero.
#[derive(Debug, Clone)]
struct Alternating {
    nr: usize,
    nt: usize,
    ns: usize,
    pr: Vec<f64>,
    b: Vec<f64>,
    cost: Vec<f64>,
}

impl Alternating {
    fn rate_distortion(&self, q: &[f64]) -> (f64, f64) {
        let (nt, ns) = (self.nt, self.ns);
        let mut pts = vec![0.0; nt * ns];
        for r in 0..self.nr {
            for t in 0..nt {
                let w = q[r * nt + t];
                if w > 0.0 {
                    for s in 0..ns {
                        pts[t * ns + s] += w * self.b[r * ns + s];
                    }
                }
            }
        }
        let mut ps = vec![0.0; ns];
        for t in 0..nt {
            for s in 0..ns {
                ps[s] += pts[t * ns + s];
            }
        }
        // I(T; R | S) = H(T|S) - H(T|R).
        let mut h_ts = 0.0;
        for t in 0..nt {
            for s in 0..ns {
                let p = pts[t * ns + s];
                if p > 0.0 {
                    h_ts -= p * (p / ps[s]).log2();
                }
            }
        }
        let mut h_tr = 0.0;
        let mut dist = 0.0;
        for r in 0..self.nr {
            for t in 0..nt {
                let w = q[r * nt + t];
                h_tr += self.pr[r] * neg_plogp(w);
                dist += w * self.cost[r * nt + t];
            }
        }
        ((h_ts - h_tr).max(0.0), dist)
    }

    fn run(&self, lambda: f64, allowed: Option<&[bool]>) -> Vec<f64> {
        let (nr, nt, ns) = (self.nr, self.nt, self.ns);
        let ok = |i: usize| allowed.is_none_or(|a| a[i]);
        let mut q = vec![0.0; nr * nt];
        for r in 0..nr {
            let n = (0..nt).filter(|&t| ok(r * nt + t)).count().max(1) as f64;
            for t in 0..nt {
                if ok(r * nt + t) {
                    q[r * nt + t] = 1.0 / n;
                }
            }
        }
        let lagrangian = |q: &[f64]| {
            let (r, d) = self.rate_distortion(q);
            r + lambda * d
        };
        let mut prev = lagrangian(&q);
        for _ in 0..MAX_ITERS {
            let mut pts = vec![0.0; nt * ns];
            let mut ps = vec![0.0; ns];
            for r in 0..nr {
                for t in 0..nt {
                    let w = q[r * nt + t];
                    for s in 0..ns {
                        pts[t * ns + s] += w * self.b[r * ns + s];
                    }
                }
            }
            for t in 0..nt {
                for s in 0..ns {
                    ps[s] += pts[t * ns + s];
                }
            }
            let mut next = vec![0.0; nr * nt];
            for r in 0..nr {
                let row = &mut next[r * nt..(r + 1) * nt];
                if self.pr[r] <= 0.0 {
                    row.copy_from_slice(&q[r * nt..(r + 1) * nt]);
                    continue;
                }
                let mut m = f64::NEG_INFINITY;
                for t in 0..nt {
                    if !ok(r * nt + t) {
                        row[t] = f64::NEG_INFINITY;
                        continue;
                    }
                    let mut e = 0.0;
                    for s in 0..ns {
                        let bv = self.b[r * ns + s];
                        if bv > 0.0 {
                            e += bv * (pts[t * ns + s] / ps[s]).log2();
                        }
                    }
                    row[t] = (e - lambda * self.cost[r * nt + t]) / self.pr[r];
                    m = m.max(row[t]);
                }
                let mut z = 0.0;
                for v in row.iter_mut() {
                    *v = if v.is_finite() { (*v - m).exp2() } else { 0.0 };
                    z += *v;
                }
                row.iter_mut().for_each(|v| *v /= z);
            }
            let cur = lagrangian(&next);
            q = next;
            if (prev - cur).abs() <= REL_TOL * cur.abs().max(1.0) {
                break;
            }
            prev = cur;
        }
        q
    }

    /// Entries whose cost equals the row minimum.
    fn least_cost_mask(&self) -> Vec<bool> {
        let nt = self.nt;
        let mut mask = vec![false; self.nr * nt];
        for r in 0..self.nr {
            let row = &self.cost[r * nt..(r + 1) * nt];
            let m = row.iter().copied().fold(f64::INFINITY, f64::min);
            for t in 0..nt {
                mask[r * nt + t] = row[t] <= m + 1e-15 * m.abs().max(1.0);
            }
        }
        mask
    }

    fn least_distortion(&self) -> f64 {
        self.cost
            .chunks(self.nt)
            .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
            .sum()
    }
}

fn mix_rows(a: &[f64], b: &[f64], theta: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(x, y)| (1.0 - theta) * x + theta * y)
        .collect()
}

impl SlopeFamily for Alternating {
    type State = Vec<f64>;

    fn solve(&self, lambda: f64) -> Vec<f64> {
        self.run(lambda, None)
    }

    fn solve_min_distortion(&self) -> Vec<f64> {
        self.run(0.0, Some(&self.least_cost_mask()))
    }

    fn rate_distortion(&self, s: &Vec<f64>) -> (f64, f64) {
        Alternating::rate_distortion(self, s)
    }

    fn mix(&self, a: &Vec<f64>, b: &Vec<f64>, theta: f64) -> Vec<f64> {
        mix_rows(a, b, theta)
    }
}

fn check_source(px: &[f64], d: &[f64]) -> Result<usize> {
    if px.is_empty() || d.is_empty() || !d.len().is_multiple_of(px.len()) {
        return Err(Error::InvalidArgument(
            "distortion matrix shape mismatch".into(),
        ));
    }
    Ok(d.len() / px.len())
}

fn plain_rd(px: &[f64], d: &[f64]) -> Result<Alternating> {
    let nh = check_source(px, d)?;
    let nx = px.len();
    Ok(Alternating {
        nr: nx,
        nt: nh,
        ns: 1,
        pr: px.to_vec(),
        b: px.to_vec(),
        cost: (0..nx * nh).map(|i| px[i / nh] * d[i]).collect(),
    })
}

/// Best constant-reconstruction distortion `min_x̂ sum_x p(x) d(x, x̂)`.
fn constant_distortion(px: &[f64], d: &[f64], nh: usize) -> f64 {
    (0..nh)
        .map(|h| {
            px.iter()
                .enumerate()
                .map(|(x, p)| p * d[x * nh + h])
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Rate-distortion function of a memoryless source `px` with distortion
/// `d[x][x̂]`, by Blahut's iteration with bisection on the slope.
pub fn rate_distortion(px: &[f64], d: &[f64], target: f64) -> Result<RdEstimate> {
    let fam = plain_rd(px, d)?;
    let nh = fam.nt;
    constrained(
        &fam,
        target,
        fam.least_distortion(),
        constant_distortion(px, d, nh),
    )
}

/// Capacity of a channel `w[x][s][y]` whose state `p(s)` is known
/// noncausally at the sender only, by alternating maximization over the
/// encoder strategies `s -> x`.
pub fn sender_state_capacity(
    ps: &[f64],
    w: &[f64],
    nx: usize,
    ny: usize,
) -> Result<CapacityEstimate> {
    let ns = ps.len();
    if ns == 0 || w.len() != nx * ns * ny {
        return Err(Error::InvalidArgument(
            "channel/state shape mismatch".into(),
        ));
    }
    let k = u32::try_from(ns)
        .ok()
        .and_then(|e| nx.checked_pow(e))
        .filter(|&k| k <= 1 << 16)
        .ok_or_else(|| Error::Budget(format!("{nx}^{ns} encoder strategies")))?;
    // a[s][t][y] = p(y | t(s), s).
    let mut a = vec![0.0; ns * k * ny];
    for s in 0..ns {
        for t in 0..k {
            let x = (t / nx.pow(s as u32)) % nx;
            for y in 0..ny {
                a[(s * k + t) * ny + y] = w[(x * ns + s) * ny + y];
            }
        }
    }
    let value = |q: &[f64]| -> f64 {
        // I(T; Y) - I(T; S) = H(T|S) - H(T|Y).
        let mut pty = vec![0.0; k * ny];
        let mut h_ts = 0.0;
        for s in 0..ns {
            for t in 0..k {
                let w = ps[s] * q[s * k + t];
                h_ts += ps[s] * neg_plogp(q[s * k + t]);
                for y in 0..ny {
                    pty[t * ny + y] += w * a[(s * k + t) * ny + y];
                }
            }
        }
        let mut py = vec![0.0; ny];
        for t in 0..k {
            for y in 0..ny {
                py[y] += pty[t * ny + y];
            }
        }
        let mut h_ty = 0.0;
        for t in 0..k {
            for y in 0..ny {
                let p = pty[t * ny + y];
                if p > 0.0 {
                    h_ty -= p * (p / py[y]).log2();
                }
            }
        }
        h_ts - h_ty
    };
    let mut q = vec![1.0 / k as f64; ns * k];
    let mut prev = value(&q);
    let mut iterations = 0;
    while iterations < MAX_ITERS {
        iterations += 1;
        let mut pty = vec![0.0; k * ny];
        for s in 0..ns {
            for t in 0..k {
                let w = ps[s] * q[s * k + t];
                for y in 0..ny {
                    pty[t * ny + y] += w * a[(s * k + t) * ny + y];
                }
            }
        }
        let mut py = vec![0.0; ny];
        for t in 0..k {
            for y in 0..ny {
                py[y] += pty[t * ny + y];
            }
        }
        for s in 0..ns {
            if ps[s] <= 0.0 {
                continue;
            }
            let row = &mut q[s * k..(s + 1) * k];
            let mut m = f64::NEG_INFINITY;
            for (t, v) in row.iter_mut().enumerate() {
                let mut e = 0.0;
                for y in 0..ny {
                    let av = a[(s * k + t) * ny + y];
                    if av > 0.0 {
                        e += av * (pty[t * ny + y] / py[y]).log2();
                    }
                }
                *v = e;
                m = m.max(e);
            }
            let mut z = 0.0;
            for v in row.iter_mut() {
                *v = (*v - m).exp2();
                z += *v;
            }
            row.iter_mut().for_each(|v| *v /= z);
        }
        let cur = value(&q);
        if (cur - prev).abs() <= REL_TOL * cur.abs().max(1.0) {
            prev = cur;
            break;
        }
        prev = cur;
    }
    let mut input = vec![0.0; k];
    for s in 0..ns {
        for t in 0..k {
            input[t] += ps[s] * q[s * k + t];
        }
    }
    Ok(CapacityEstimate {
        value: prev.max(0.0),
        upper: f64::NAN,
        input,
        iterations,
    })
}

/// Rate-distortion function of a source `p(x, s)` (row-major) whose state
/// is known at the decoder only, by alternating minimization over decoder
/// strategies `s -> x̂`.
pub fn decoder_state_rate_distortion(
    pxs: &[f64],
    nx: usize,
    d: &[f64],
    target: f64,
) -> Result<RdEstimate> {
    if nx == 0 || pxs.is_empty() || !pxs.len().is_multiple_of(nx) {
        return Err(Error::InvalidArgument("source shape mismatch".into()));
    }
    let ns = pxs.len() / nx;
    let px: Vec<f64> = pxs.chunks(ns).map(|c| c.iter().sum()).collect();
    let nh = check_source(&px, d)?;
    let k = u32::try_from(ns)
        .ok()
        .and_then(|e| nh.checked_pow(e))
        .filter(|&k| k <= 1 << 16)
        .ok_or_else(|| Error::Budget(format!("{nh}^{ns} decoder strategies")))?;
    let mut cost = vec![0.0; nx * k];
    for x in 0..nx {
        for t in 0..k {
            cost[x * k + t] = (0..ns)
                .map(|s| pxs[x * ns + s] * d[x * nh + (t / nh.pow(s as u32)) % nh])
                .sum();
        }
    }
    let fam = Alternating {
        nr: nx,
        nt: k,
        ns,
        pr: px.clone(),
        b: pxs.to_vec(),
        cost,
    };
    // Zero rate: a constant strategy picks x̂ from s alone.
    let d_zero: f64 = (0..ns)
        .map(|s| {
            (0..nh)
                .map(|h| {
                    (0..nx)
                        .map(|x| pxs[x * ns + s] * d[x * nh + h])
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    constrained(&fam, target, fam.least_distortion(), d_zero)
}

/// Per-state rate-distortion families sharing one slope.
struct PerState {
    ps: Vec<f64>,
    fams: Vec<Alternating>,
}

impl SlopeFamily for PerState {
    type State = Vec<Vec<f64>>;

    fn solve(&self, lambda: f64) -> Self::State {
        self.fams.iter().map(|f| f.run(lambda, None)).collect()
    }

    fn solve_min_distortion(&self) -> Self::State {
        self.fams
            .iter()
            .map(|f| f.run(0.0, Some(&f.least_cost_mask())))
            .collect()
    }

    fn rate_distortion(&self, s: &Self::State) -> (f64, f64) {
        let mut rate = 0.0;
        let mut dist = 0.0;
        for ((p, f), q) in self.ps.iter().zip(&self.fams).zip(s) {
            let (r, d) = f.rate_distortion(q);
            rate += p * r;
            dist += p * d;
        }
        (rate, dist)
    }

    fn mix(&self, a: &Self::State, b: &Self::State, theta: f64) -> Self::State {
        a.iter()
            .zip(b)
            .map(|(x, y)| mix_rows(x, y, theta))
            .collect()
    }
}

/// Rate-distortion function of a source `p(x, s)` whose state is known at
/// both ends: `sum_s p(s) R_s(D_s)` minimized over budgets with
/// `sum_s p(s) D_s <= D`. The budgets are allocated at a common slope of the
/// per-state curves.
pub fn both_state_rate_distortion(
    pxs: &[f64],
    nx: usize,
    d: &[f64],
    target: f64,
) -> Result<RdEstimate> {
    if nx == 0 || pxs.is_empty() || !pxs.len().is_multiple_of(nx) {
        return Err(Error::InvalidArgument("source shape mismatch".into()));
    }
    let ns = pxs.len() / nx;
    let mut ps = Vec::new();
    let mut fams = Vec::new();
    let mut d_min = 0.0;
    let mut d_zero = 0.0;
    for s in 0..ns {
        let p: f64 = (0..nx).map(|x| pxs[x * ns + s]).sum();
        if p <= 0.0 {
            continue;
        }
        let px: Vec<f64> = (0..nx).map(|x| pxs[x * ns + s] / p).collect();
        let fam = plain_rd(&px, d)?;
        d_min += p * fam.least_distortion();
        d_zero += p * constant_distortion(&px, d, fam.nt);
        ps.push(p);
        fams.push(fam);
    }
    constrained(&PerState { ps, fams }, target, d_min, d_zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const ONE_MINUS_H2_01: f64 = 0.531_004_406_410_718_8;

    #[test]
    fn bsc_capacity() {
        let c = channel_capacity(&[0.9, 0.1, 0.1, 0.9], 2).unwrap();
        assert_abs_diff_eq!(c.value, ONE_MINUS_H2_01, epsilon = 1e-9);
        assert!(c.upper >= c.value);
    }

    #[test]
    fn binary_hamming_rd() {
        let r = rate_distortion(&[0.5, 0.5], &[0.0, 1.0, 1.0, 0.0], 0.1).unwrap();
        assert_abs_diff_eq!(r.rate, ONE_MINUS_H2_01, epsilon = 1e-7);
        assert!(r.distortion <= 0.1 + 1e-12);
        let z = rate_distortion(&[0.5, 0.5], &[0.0, 1.0, 1.0, 0.0], 0.5).unwrap();
        assert_eq!(z.rate, 0.0);
        let lossless = rate_distortion(&[0.5, 0.5], &[0.0, 1.0, 1.0, 0.0], 0.0).unwrap();
        assert_abs_diff_eq!(lossless.rate, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn stuck_at_sender_capacity() {
        // s = ok, stuck0, stuck1; w[x][s][y]
        let w = [1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0];
        let c = sender_state_capacity(&[0.8, 0.1, 0.1], &w, 2, 2).unwrap();
        assert_abs_diff_eq!(c.value, 0.8, epsilon = 1e-6);
    }

    #[test]
    fn wyner_ziv_lossless_limit() {
        let pxs = [0.375, 0.125, 0.125, 0.375];
        let r = decoder_state_rate_distortion(&pxs, 2, &[0.0, 1.0, 1.0, 0.0], 0.0).unwrap();
        assert_abs_diff_eq!(r.rate, 0.811_278_124_459_132_8, epsilon = 1e-6);
        let z = decoder_state_rate_distortion(&pxs, 2, &[0.0, 1.0, 1.0, 0.0], 0.25).unwrap();
        assert_eq!(z.rate, 0.0);
    }

    #[test]
    fn infeasible_target() {
        assert!(matches!(
            rate_distortion(&[0.5, 0.5], &[0.1, 1.0, 1.0, 0.1], 0.05),
            Err(Error::Infeasible { .. })
        ));
    }
}
