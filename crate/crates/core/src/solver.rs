//! Machinery shared by the capacity and rate-distortion solvers: options,
//! diagnostics, the per-row simplex ascent, and the outer search over
//! deterministic maps.
//!
//! The auxiliary alphabet `U` enters both problems through a deterministic
//! map `f(u, side)`. Reading each `u` as the function `f(u, .)` of the side
//! variable (a "strategy"), every map is a choice of `|U|` strategies out of
//! `|out|^|side|`. Replacing `U` by its strategy never lowers the capacity
//! functional nor raises the rate functional, so the map carrying every
//! strategy dominates all others and maps with repeated strategies are
//! dominated by ones with distinct strategies. The outer search therefore
//! runs over sets of distinct strategies.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::par;
use crate::prob::{Alphabet, DeterministicMap};

/// Entries of iterates never drop below this, keeping every log finite.
pub(crate) const FLOOR: f64 = 1e-12;

/// Largest strategy alphabet for which the all-strategy map is solved.
pub(crate) const STRATEGY_CAP: u64 = 512;

/// Candidate maps evaluated between early-stop checks.
pub(crate) const CHUNK: usize = 16;

/// Splits `0..n` into a leading batch of `lead` items followed by batches of
/// `CHUNK`. Early stops are checked between batches.
pub(crate) fn batches(n: usize, lead: usize) -> Vec<std::ops::Range<usize>> {
    let lead = lead.min(n);
    let mut out = Vec::new();
    if lead > 0 {
        out.push(0..lead);
    }
    let mut a = lead;
    while a < n {
        let b = (a + CHUNK).min(n);
        out.push(a..b);
        a = b;
    }
    out
}

/// Knobs shared by every optimizer in the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Starting points per inner solve.
    pub restarts: usize,
    /// Stop once one iteration gains less than this many bits.
    pub tol_bits: f64,
    /// Iteration cap per start.
    pub max_iters: usize,
    /// Largest number of candidate maps searched exhaustively.
    pub enum_cap: u64,
    /// Maps drawn when the candidate set exceeds `enum_cap`.
    pub map_samples: usize,
    /// Allow random map sampling beyond `enum_cap`; otherwise fail.
    pub allow_sampling: bool,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            restarts: 16,
            tol_bits: 1e-7,
            max_iters: 5000,
            enum_cap: 4096,
            map_samples: 512,
            allow_sampling: true,
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be at least 1".into()));
        }
        if !(self.tol_bits > 0.0 && self.tol_bits.is_finite()) {
            return Err(Error::InvalidArgument("tol_bits must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument(
                "max_iters must be at least 1".into(),
            ));
        }
        if self.allow_sampling && self.map_samples == 0 {
            return Err(Error::InvalidArgument(
                "map_samples must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// How the candidate maps were chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchMode {
    /// `|U|` covers every strategy; the all-strategy map dominates.
    #[default]
    Dominant,
    /// Every set of `|U|` distinct strategies was a candidate.
    Exhaustive,
    /// A seeded random sample of strategy sets.
    Sampled,
}

/// Solver bookkeeping reported alongside every result.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// Ascent iterations summed over all starts and maps.
    pub iterations: usize,
    /// Starting points run, summed over maps.
    pub restarts: usize,
    /// Restarts from a perturbed point after a non-finite value or gradient.
    pub perturbations: usize,
    /// Value reached from each start on the winning map.
    pub best_per_restart: Vec<f64>,
    /// `|out|^(|U| |side|)`: every deterministic map, before reduction.
    pub raw_map_count: f64,
    /// Distinct-strategy candidate sets in the search space.
    pub candidate_count: u128,
    /// Candidates actually solved.
    pub maps_evaluated: usize,
    pub search: SearchMode,
    /// Index of the winning candidate in evaluation order.
    pub best_candidate: usize,
    /// Candidates whose value tied the winner's within 1e-12 bits.
    pub ties: usize,
    /// Value with every strategy available, when computed.
    pub all_strategy_value: Option<f64>,
    /// Human-readable warnings, e.g. a suspected cardinality shortfall.
    pub flags: Vec<String>,
}

impl Diagnostics {
    pub(crate) fn absorb(&mut self, other: &Diagnostics) {
        self.iterations += other.iterations;
        self.restarts += other.restarts;
        self.perturbations += other.perturbations;
    }
}

/// An objective over row-stochastic matrices (`rows` x `width`) to maximize.
pub(crate) trait Landscape: Sync {
    fn rows(&self) -> usize;
    fn width(&self) -> usize;
    fn value(&self, q: &[f64]) -> f64;
    /// Gradient with respect to every entry of `q`.
    fn gradient(&self, q: &[f64], grad: &mut [f64]);
    /// Closed-form coordinate step (multiplicative update); rows need not be
    /// floored on return.
    fn entropic_step(&self, q: &[f64], out: &mut [f64]);
}

/// Euclidean projection of `v` onto `{x >= 0, sum x = total}`.
pub(crate) fn project_simplex(v: &mut [f64], total: f64) {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - total) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

/// Projects every row onto `{x >= FLOOR, sum x = 1}`.
pub(crate) fn project_rows(q: &mut [f64], width: usize) {
    let total = 1.0 - FLOOR * width as f64;
    for row in q.chunks_mut(width) {
        for x in row.iter_mut() {
            *x -= FLOOR;
        }
        project_simplex(row, total);
        for x in row.iter_mut() {
            *x += FLOOR;
        }
    }
}

/// Raises every entry to at least `FLOOR` and renormalizes each row.
pub(crate) fn floor_rows(q: &mut [f64], width: usize) {
    for row in q.chunks_mut(width) {
        let mut s = 0.0;
        for x in row.iter_mut() {
            if !(*x >= FLOOR) {
                *x = FLOOR;
            }
            s += *x;
        }
        for x in row.iter_mut() {
            *x /= s;
        }
    }
}

/// Normalizes `2^e` per row in place, with the usual max shift.
pub(crate) fn normalize_exp2_rows(e: &mut [f64], width: usize) {
    for row in e.chunks_mut(width) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            let w = 1.0 / row.len() as f64;
            row.iter_mut().for_each(|x| *x = w);
            continue;
        }
        let mut s = 0.0;
        for x in row.iter_mut() {
            *x = (*x - m).exp2();
            s += *x;
        }
        for x in row.iter_mut() {
            *x /= s;
        }
    }
}

/// `q * (base / q)^t`, renormalized per row.
fn extrapolated(q: &[f64], base: &[f64], t: f64, width: usize, out: &mut [f64]) {
    for i in 0..q.len() {
        out[i] = q[i].log2() + t * (base[i].log2() - q[i].log2());
    }
    normalize_exp2_rows(out, width);
    floor_rows(out, width);
}

/// Searches step multipliers `t >= 2` along the multiplicative direction
/// from `q` to `base` (which has value `v_base`), starting near `tau`.
/// Returns the multiplier to start from next time and the best value found;
/// the best point is left in `out` when it beats `v_base`.
fn extrapolate<L: Landscape>(
    land: &L,
    q: &[f64],
    base: &[f64],
    v_base: f64,
    tau: f64,
    out: &mut [f64],
) -> (f64, f64) {
    let width = land.width();
    let mut scratch = vec![0.0; q.len()];
    let mut best = (1.0, v_base);
    let mut t = tau.max(2.0);
    extrapolated(q, base, t, width, &mut scratch);
    let mut v = land.value(&scratch);
    if v.is_finite() && v > best.1 {
        best = (t, v);
        out.copy_from_slice(&scratch);
        while t < 1e6 {
            t *= 2.0;
            extrapolated(q, base, t, width, &mut scratch);
            v = land.value(&scratch);
            if !(v.is_finite() && v > best.1) {
                break;
            }
            best = (t, v);
            out.copy_from_slice(&scratch);
        }
    } else {
        while t > 2.0 {
            t *= 0.5;
            extrapolated(q, base, t, width, &mut scratch);
            v = land.value(&scratch);
            if v.is_finite() && v > best.1 {
                best = (t, v);
                out.copy_from_slice(&scratch);
                break;
            }
        }
    }
    (best.0.max(2.0), best.1)
}

#[derive(Debug, Clone)]
pub(crate) struct AscentOutcome {
    pub q: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub perturbations: usize,
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Pulls `q` toward the uniform point by `weight` (kept away from zero).
fn perturb(q: &mut [f64], width: usize, weight: f64) {
    let u = 1.0 / width as f64;
    for x in q.iter_mut() {
        let base = if x.is_finite() { x.max(0.0) } else { u };
        *x = (1.0 - weight) * base + weight * u;
    }
    floor_rows(q, width);
}

/// Frank-Wolfe gap `sum over rows of max_j g_j - <g, q>`. Bounds the
/// distance to the optimum when the landscape is concave.
fn dual_gap(q: &[f64], grad: &[f64], width: usize) -> f64 {
    q.chunks(width)
        .zip(grad.chunks(width))
        .map(|(qr, gr)| {
            let m = gr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            m - qr.iter().zip(gr).map(|(a, b)| a * b).sum::<f64>()
        })
        .sum()
}

/// Monotone ascent on `land` from `start`.
///
/// Each iteration computes the gradient once and tries two steps from it: a
/// Euclidean step projected back onto the row simplices with Armijo
/// backtracking, and the multiplicative step that is exact for the entropic
/// geometry. The better one is kept if it improves the value. Stops when an
/// iteration gains less than `tol_bits` and the Frank-Wolfe gap is below
/// `tol_bits` too, when no step improves, or after `max_iters` iterations.
pub(crate) fn ascend<L: Landscape>(land: &L, start: &[f64], opts: &SolverOptions) -> AscentOutcome {
    let width = land.width();
    let n = land.rows() * width;
    debug_assert_eq!(start.len(), n);
    let mut q = start.to_vec();
    let mut grad = vec![0.0; n];
    let mut perturbations = 0;

    let mut value = land.value(&q);
    land.gradient(&q, &mut grad);
    let mut weight = 1e-6;
    while !(value.is_finite() && all_finite(&grad)) {
        perturbations += 1;
        perturb(&mut q, width, weight);
        weight = (weight * 100.0).min(1.0);
        value = land.value(&q);
        land.gradient(&q, &mut grad);
        if perturbations > 8 {
            break;
        }
    }

    let mut cand_e = vec![0.0; n];
    let mut cand_g = vec![0.0; n];
    let mut step = 1.0;
    let mut tau = 2.0;
    let mut cand_x = vec![0.0; n];
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;

        land.entropic_step(&q, &mut cand_e);
        floor_rows(&mut cand_e, width);
        let mut v_e = land.value(&cand_e);
        if v_e.is_finite() {
            // The multiplicative step is an exponentiated-gradient step of a
            // fixed length; in flat valleys longer steps along the same
            // direction gain much more per iteration.
            let (t, v) = extrapolate(land, &q, &cand_e, v_e, tau, &mut cand_x);
            if v > v_e {
                cand_e.copy_from_slice(&cand_x);
                v_e = v;
            }
            tau = t;
        }

        let mut v_g = f64::NEG_INFINITY;
        let mut t = step;
        while t > 1e-14 {
            for i in 0..n {
                cand_g[i] = q[i] + t * grad[i];
            }
            project_rows(&mut cand_g, width);
            let v = land.value(&cand_g);
            let dir: f64 = (0..n).map(|i| grad[i] * (cand_g[i] - q[i])).sum();
            if v.is_finite() && v >= value + 1e-4 * dir && v > value {
                v_g = v;
                break;
            }
            t *= 0.5;
        }
        if v_g > f64::NEG_INFINITY {
            step = (2.0 * t).min(1e6);
        }

        let (best, v_best) = if v_e.is_finite() && v_e >= v_g {
            (&cand_e, v_e)
        } else {
            (&cand_g, v_g)
        };
        if !(v_best > value) {
            break;
        }
        let gain = v_best - value;
        q.copy_from_slice(best);
        value = v_best;
        land.gradient(&q, &mut grad);
        if !all_finite(&grad) {
            perturbations += 1;
            let keep = q.clone();
            perturb(&mut q, width, 1e-6);
            let v = land.value(&q);
            land.gradient(&q, &mut grad);
            if !(v.is_finite() && all_finite(&grad)) {
                q = keep;
                break;
            }
            value = v;
        }
        if gain < opts.tol_bits && dual_gap(&q, &grad, width) < opts.tol_bits {
            break;
        }
    }
    AscentOutcome {
        q,
        value,
        iterations,
        perturbations,
    }
}

/// Deterministic starting points: uniform, then vertex-biased patterns, then
/// seeded random interior points.
pub(crate) fn starting_points(rows: usize, width: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut starts = Vec::with_capacity(count);
    starts.push(vec![1.0 / width as f64; rows * width]);
    if width > 1 {
        for k in 0..width {
            if starts.len() >= count {
                break;
            }
            let lo = 0.1 / (width - 1) as f64;
            let mut q = vec![lo; rows * width];
            for r in 0..rows {
                q[r * width + (k + r) % width] = 0.9;
            }
            starts.push(q);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while starts.len() < count {
        let mut q: Vec<f64> = (0..rows * width)
            .map(|_| rng.sample::<f64, _>(Exp1) + 1e-3)
            .collect();
        floor_rows(&mut q, width);
        starts.push(q);
    }
    starts.truncate(count);
    starts
}

#[derive(Debug, Clone)]
pub(crate) struct MultiStartOutcome {
    pub q: Vec<f64>,
    pub value: f64,
    pub per_start: Vec<f64>,
    pub diagnostics: Diagnostics,
}

/// Runs [`ascend`] from every starting point and keeps the best (earliest on ties).
pub(crate) fn multi_start<L: Landscape>(
    land: &L,
    opts: &SolverOptions,
    seed: u64,
) -> MultiStartOutcome {
    let starts = starting_points(land.rows(), land.width(), opts.restarts, seed);
    let outcomes = par::map_slice(&starts, |s| ascend(land, s, opts));
    let mut best = 0;
    for (i, o) in outcomes.iter().enumerate() {
        if o.value > outcomes[best].value || !outcomes[best].value.is_finite() {
            best = i;
        }
    }
    let mut diagnostics = Diagnostics {
        restarts: outcomes.len(),
        ..Diagnostics::default()
    };
    for o in &outcomes {
        diagnostics.iterations += o.iterations;
        diagnostics.perturbations += o.perturbations;
    }
    MultiStartOutcome {
        q: outcomes[best].q.clone(),
        value: outcomes[best].value,
        per_start: outcomes.iter().map(|o| o.value).collect(),
        diagnostics,
    }
}

/// Mixes two seeds into a derived one (splitmix64 finalizer).
pub(crate) fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// All `|out|^(|u| |side|)` maps `(u, side) -> out`, in lexicographic order
/// of their tables.
pub fn enumerate_maps(u_alpha: &Alphabet, side_alpha: &Alphabet, out_alpha: &Alphabet) -> MapIter {
    MapIter {
        from: vec![u_alpha.clone(), side_alpha.clone()],
        to: out_alpha.clone(),
        table: vec![0; u_alpha.size() * side_alpha.size()],
        done: false,
    }
}

/// Iterator returned by [`enumerate_maps`].
#[derive(Debug, Clone)]
pub struct MapIter {
    from: Vec<Alphabet>,
    to: Alphabet,
    table: Vec<usize>,
    done: bool,
}

impl Iterator for MapIter {
    type Item = DeterministicMap;

    fn next(&mut self) -> Option<DeterministicMap> {
        if self.done {
            return None;
        }
        let map = DeterministicMap::new(self.from.clone(), self.to.clone(), self.table.clone())
            .expect("enumerated table is in range");
        let base = self.to.size();
        self.done = true;
        for k in (0..self.table.len()).rev() {
            self.table[k] += 1;
            if self.table[k] < base {
                self.done = false;
                break;
            }
            self.table[k] = 0;
        }
        Some(map)
    }
}

/// Number of strategies `side -> out`, if it fits in a u64.
pub(crate) fn strategy_count(out_size: usize, side_size: usize) -> Option<u64> {
    (out_size as u64).checked_pow(u32::try_from(side_size).ok()?)
}

/// Output of strategy `t` on side symbol `s`.
#[inline]
pub(crate) fn strategy_output(t: u64, s: usize, out_size: usize) -> usize {
    ((t / (out_size as u64).pow(s as u32)) % out_size as u64) as usize
}

/// The map sending `u` to strategy `strategies[u]`; symbols past the end reuse
/// the last strategy.
pub(crate) fn strategy_map(
    u_alpha: &Alphabet,
    side_alpha: &Alphabet,
    out_alpha: &Alphabet,
    strategies: &[u64],
) -> DeterministicMap {
    let (nu, ns) = (u_alpha.size(), side_alpha.size());
    let mut table = Vec::with_capacity(nu * ns);
    for u in 0..nu {
        let t = strategies[u.min(strategies.len() - 1)];
        for s in 0..ns {
            table.push(strategy_output(t, s, out_alpha.size()));
        }
    }
    DeterministicMap::new(
        vec![u_alpha.clone(), side_alpha.clone()],
        out_alpha.clone(),
        table,
    )
    .expect("strategy outputs are in range")
}

/// `n choose k` saturating at `u128::MAX`.
pub(crate) fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// The candidate strategy sets for a search.
#[derive(Debug, Clone)]
pub(crate) struct SearchPlan {
    pub mode: SearchMode,
    pub candidate_count: u128,
    pub sets: Vec<Vec<u64>>,
}

/// Plans the outer search: a single all-strategy set when `u_size` covers
/// every strategy, else all `u_size`-subsets up to `enum_cap`, else a seeded
/// sample.
pub(crate) fn plan_search(
    strategies: u64,
    u_size: usize,
    opts: &SolverOptions,
) -> Result<SearchPlan> {
    if u_size as u64 >= strategies {
        return Ok(SearchPlan {
            mode: SearchMode::Dominant,
            candidate_count: 1,
            sets: vec![(0..strategies).collect()],
        });
    }
    let k = u_size as u64;
    let count = binomial(strategies, k);
    if count <= opts.enum_cap as u128 {
        let mut sets = Vec::with_capacity(count as usize);
        let mut comb: Vec<u64> = (0..k).collect();
        loop {
            sets.push(comb.clone());
            let mut i = k as usize;
            let mut moved = false;
            while i > 0 {
                i -= 1;
                if comb[i] < strategies - k + i as u64 {
                    comb[i] += 1;
                    for j in i + 1..k as usize {
                        comb[j] = comb[j - 1] + 1;
                    }
                    moved = true;
                    break;
                }
            }
            if !moved {
                break;
            }
        }
        return Ok(SearchPlan {
            mode: SearchMode::Exhaustive,
            candidate_count: count,
            sets,
        });
    }
    if !opts.allow_sampling {
        return Err(Error::Budget(format!(
            "{count} candidate maps exceed enum_cap = {} and sampling is disabled",
            opts.enum_cap
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, 0x5EA2C4));
    let mut sets: Vec<Vec<u64>> = Vec::with_capacity(opts.map_samples);
    let mut seen = std::collections::HashSet::new();
    let mut attempts = 0;
    while sets.len() < opts.map_samples && attempts < opts.map_samples * 20 {
        attempts += 1;
        let mut set: Vec<u64> = if strategies <= usize::MAX as u64 && strategies <= 1 << 40 {
            sample(&mut rng, strategies as usize, u_size)
                .into_iter()
                .map(|i| i as u64)
                .collect()
        } else {
            let mut s = std::collections::BTreeSet::new();
            while s.len() < u_size {
                s.insert(rng.random_range(0..strategies));
            }
            s.into_iter().collect()
        };
        set.sort_unstable();
        if seen.insert(set.clone()) {
            sets.push(set);
        }
    }
    Ok(SearchPlan {
        mode: SearchMode::Sampled,
        candidate_count: count,
        sets,
    })
}

/// Indices of the `k` heaviest strategies, sorted ascending.
pub(crate) fn top_strategies(weights: &[f64], k: usize) -> Vec<u64> {
    let mut idx: Vec<usize> = (0..weights.len()).collect();
    idx.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let mut top: Vec<u64> = idx.into_iter().take(k).map(|i| i as u64).collect();
    top.sort_unstable();
    top
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn a(name: &str, n: usize) -> Alphabet {
        Alphabet::new(name, n).unwrap()
    }

    #[test]
    fn enumerate_counts() {
        assert_eq!(
            enumerate_maps(&a("u", 1), &a("s1", 1), &a("x", 2)).count(),
            2
        );
        let maps: Vec<_> = enumerate_maps(&a("u", 2), &a("s1", 1), &a("x", 2)).collect();
        assert_eq!(maps.len(), 4);
        let all: Vec<_> = enumerate_maps(&a("u", 2), &a("s1", 2), &a("x", 2)).collect();
        assert_eq!(all.len(), 16);
        let distinct: HashSet<Vec<usize>> = all.iter().map(|m| m.table().to_vec()).collect();
        assert_eq!(distinct.len(), 16);
        assert_eq!(all[0].table(), &[0, 0, 0, 0]);
        assert_eq!(all[1].table(), &[0, 0, 0, 1]);
    }

    #[test]
    fn simplex_projection() {
        let mut v = vec![0.5, 0.5, 0.5];
        project_simplex(&mut v, 1.0);
        for x in &v {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let mut v = vec![2.0, 0.0, -1.0];
        project_simplex(&mut v, 1.0);
        assert_eq!(v, vec![1.0, 0.0, 0.0]);
        let mut v = vec![0.7, 0.6];
        project_simplex(&mut v, 1.0);
        assert!((v[0] - 0.55).abs() < 1e-15 && (v[1] - 0.45).abs() < 1e-15);
    }

    #[test]
    fn projected_rows_respect_floor() {
        let mut q = vec![3.0, -2.0, 0.0, 0.2, 0.2, 0.2];
        project_rows(&mut q, 3);
        for row in q.chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&x| x >= FLOOR * 0.999));
        }
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(8, 3), 56);
        assert_eq!(binomial(27, 10), 8_436_285);
        assert_eq!(binomial(4, 5), 0);
    }

    #[test]
    fn exhaustive_plan_lists_subsets() {
        let plan = plan_search(5, 2, &SolverOptions::default()).unwrap();
        assert_eq!(plan.mode, SearchMode::Exhaustive);
        assert_eq!(plan.sets.len(), 10);
        assert_eq!(plan.sets[0], vec![0, 1]);
        assert_eq!(plan.sets[9], vec![3, 4]);
        let dom = plan_search(4, 5, &SolverOptions::default()).unwrap();
        assert_eq!(dom.mode, SearchMode::Dominant);
        assert_eq!(dom.sets, vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn sampled_plan_and_budget() {
        let opts = SolverOptions {
            map_samples: 20,
            ..SolverOptions::default()
        };
        let plan = plan_search(27, 10, &opts).unwrap();
        assert_eq!(plan.mode, SearchMode::Sampled);
        assert_eq!(plan.sets.len(), 20);
        assert!(plan
            .sets
            .iter()
            .all(|s| s.len() == 10 && s.windows(2).all(|w| w[0] < w[1])));
        let again = plan_search(27, 10, &opts).unwrap();
        assert_eq!(plan.sets, again.sets);
        let strict = SolverOptions {
            allow_sampling: false,
            ..SolverOptions::default()
        };
        assert!(matches!(
            plan_search(27, 10, &strict),
            Err(Error::Budget(_))
        ));
    }

    #[test]
    fn strategy_tables() {
        let m = strategy_map(&a("u", 3), &a("s1", 2), &a("x", 2), &[1, 2]);
        // strategy 1: s=0 -> 1, s=1 -> 0; strategy 2: s=0 -> 0, s=1 -> 1
        assert_eq!(m.table(), &[1, 0, 0, 1, 0, 1]);
    }
}
