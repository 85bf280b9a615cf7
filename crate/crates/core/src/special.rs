//! The four availability patterns on each side and how they reduce to the
//! general problems.
//!
//! A single state `S` is either hidden or shown to each end. Hiding it
//! replaces the corresponding state alphabet by one symbol, so the general
//! solvers run unchanged; the classical formulas are evaluated by the
//! dedicated iterations in [`crate::classical`].

use std::fmt;
use std::str::FromStr;

use crate::capacity::{solve_capacity, ChannelProblem};
use crate::classical;
use crate::error::{Error, Result};
use crate::rate_distortion::{solve_rd_point, SourceProblem};
use crate::solver::SolverOptions;

/// Which ends observe the state: the sender (encoder) and the receiver
/// (decoder).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AvailabilityPattern {
    pub sender_knows: bool,
    pub receiver_knows: bool,
}

impl AvailabilityPattern {
    pub const NONE: Self = Self::new(false, false);
    pub const RECEIVER: Self = Self::new(false, true);
    pub const SENDER: Self = Self::new(true, false);
    pub const BOTH: Self = Self::new(true, true);
    pub const ALL: [Self; 4] = [Self::NONE, Self::RECEIVER, Self::SENDER, Self::BOTH];

    pub const fn new(sender_knows: bool, receiver_knows: bool) -> Self {
        AvailabilityPattern {
            sender_knows,
            receiver_knows,
        }
    }

    /// Subscript such as `"10"`: sender digit first.
    pub fn code(&self) -> &'static str {
        match (self.sender_knows, self.receiver_knows) {
            (false, false) => "00",
            (false, true) => "01",
            (true, false) => "10",
            (true, true) => "11",
        }
    }

    /// The pattern with the two ends exchanged.
    pub fn swapped(&self) -> Self {
        Self::new(self.receiver_knows, self.sender_knows)
    }
}

impl fmt::Display for AvailabilityPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for AvailabilityPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "00" => Ok(Self::NONE),
            "01" => Ok(Self::RECEIVER),
            "10" => Ok(Self::SENDER),
            "11" => Ok(Self::BOTH),
            other => Err(Error::InvalidArgument(format!(
                "pattern must be one of 00, 01, 10, 11; got `{other}`"
            ))),
        }
    }
}

/// A channel `p(y | x, s)` driven by one i.i.d. state `p(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateChannel {
    pub nx: usize,
    pub ny: usize,
    /// `p(s)`.
    pub ps: Vec<f64>,
    /// Row-major `w[x][s][y]`.
    pub w: Vec<f64>,
}

impl StateChannel {
    pub fn new(nx: usize, ny: usize, ps: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        let ns = ps.len();
        // Validation only: the general problem checks every row.
        ChannelProblem::from_arrays(nx, ny, 1, ns, ps.clone(), w.clone())?;
        Ok(StateChannel { nx, ny, ps, w })
    }

    /// Treats the pair `(S1, S2)` of a two-sided problem as one state.
    pub fn from_two_sided(prob: &ChannelProblem) -> Self {
        let (nx, ny) = (prob.x_alpha().size(), prob.y_alpha().size());
        StateChannel {
            nx,
            ny,
            ps: prob.state_joint().mass().to_vec(),
            w: prob.channel().rows().to_vec(),
        }
    }

    pub fn ns(&self) -> usize {
        self.ps.len()
    }

    fn row(&self, x: usize, s: usize) -> &[f64] {
        let start = (x * self.ns() + s) * self.ny;
        &self.w[start..start + self.ny]
    }

    /// `p(y | x) = sum_s p(s) p(y | x, s)`.
    pub fn averaged(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.nx * self.ny];
        for x in 0..self.nx {
            for (s, p) in self.ps.iter().enumerate() {
                for (y, v) in self.row(x, s).iter().enumerate() {
                    out[x * self.ny + y] += p * v;
                }
            }
        }
        out
    }
}

/// A source `p(x, s)` with distortion `d[x][x̂]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSource {
    pub nx: usize,
    pub nxhat: usize,
    /// Row-major `p[x][s]`.
    pub pxs: Vec<f64>,
    /// Row-major `d[x][x̂]`.
    pub d: Vec<f64>,
}

impl StateSource {
    pub fn new(nx: usize, nxhat: usize, pxs: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        if nx == 0 || !pxs.len().is_multiple_of(nx) {
            return Err(Error::AxisMismatch(format!(
                "{} source entries for |X| = {nx}",
                pxs.len()
            )));
        }
        SourceProblem::from_arrays(nx, nxhat, 1, pxs.len() / nx, pxs.clone(), d.clone())?;
        Ok(StateSource { nx, nxhat, pxs, d })
    }

    /// Treats the pair `(S1, S2)` of a two-sided problem as one state.
    pub fn from_two_sided(prob: &SourceProblem) -> Self {
        StateSource {
            nx: prob.x_alpha().size(),
            nxhat: prob.xhat_alpha().size(),
            pxs: prob.source_joint().mass().to_vec(),
            d: prob.distortion().to_vec(),
        }
    }

    pub fn ns(&self) -> usize {
        self.pxs.len() / self.nx
    }

    pub fn p_x(&self) -> Vec<f64> {
        self.pxs.chunks(self.ns()).map(|c| c.iter().sum()).collect()
    }

    /// `(d_min, d_max)` as in [`crate::rate_distortion::feasible_range`].
    pub fn feasible_range(&self) -> (f64, f64) {
        let px = self.p_x();
        let nh = self.nxhat;
        let d_min = px
            .iter()
            .enumerate()
            .map(|(x, p)| {
                p * self.d[x * nh..(x + 1) * nh]
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        let d_max = (0..nh)
            .map(|h| {
                px.iter()
                    .enumerate()
                    .map(|(x, p)| p * self.d[x * nh + h])
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        (d_min, d_max)
    }
}

/// The two-sided channel in which each end sees `S` or nothing.
pub fn degenerate_channel(
    ch: &StateChannel,
    pattern: AvailabilityPattern,
) -> Result<ChannelProblem> {
    let ns = ch.ns();
    let (nx, ny) = (ch.nx, ch.ny);
    match (pattern.sender_knows, pattern.receiver_knows) {
        (false, false) => ChannelProblem::from_arrays(nx, ny, 1, 1, vec![1.0], ch.averaged()),
        (false, true) => ChannelProblem::from_arrays(nx, ny, 1, ns, ch.ps.clone(), ch.w.clone()),
        (true, false) => ChannelProblem::from_arrays(nx, ny, ns, 1, ch.ps.clone(), ch.w.clone()),
        (true, true) => {
            let mut state = vec![0.0; ns * ns];
            for s in 0..ns {
                state[s * ns + s] = ch.ps[s];
            }
            // Off-diagonal rows carry no mass; any valid row will do.
            let mut w = Vec::with_capacity(nx * ns * ns * ny);
            for x in 0..nx {
                for s1 in 0..ns {
                    for _s2 in 0..ns {
                        w.extend_from_slice(ch.row(x, s1));
                    }
                }
            }
            ChannelProblem::from_arrays(nx, ny, ns, ns, state, w)
        }
    }
}

/// The two-sided source in which each end sees `S` or nothing.
pub fn degenerate_source(src: &StateSource, pattern: AvailabilityPattern) -> Result<SourceProblem> {
    let (nx, nh, ns) = (src.nx, src.nxhat, src.ns());
    match (pattern.sender_knows, pattern.receiver_knows) {
        (false, false) => SourceProblem::from_arrays(nx, nh, 1, 1, src.p_x(), src.d.clone()),
        (false, true) => SourceProblem::from_arrays(nx, nh, 1, ns, src.pxs.clone(), src.d.clone()),
        (true, false) => SourceProblem::from_arrays(nx, nh, ns, 1, src.pxs.clone(), src.d.clone()),
        (true, true) => {
            let mut joint = vec![0.0; nx * ns * ns];
            for x in 0..nx {
                for s in 0..ns {
                    joint[(x * ns + s) * ns + s] = src.pxs[x * ns + s];
                }
            }
            SourceProblem::from_arrays(nx, nh, ns, ns, joint, src.d.clone())
        }
    }
}

/// The classical capacity formula for `pattern`.
///
/// * `00`: Blahut–Arimoto on the state-averaged channel.
/// * `01`: Blahut–Arimoto on the channel `x -> (s, y)`.
/// * `10`: alternating maximization over encoder strategies.
/// * `11`: `sum_s p(s) C_s` with per-state Blahut–Arimoto.
pub fn dedicated_capacity(ch: &StateChannel, pattern: AvailabilityPattern) -> Result<f64> {
    let (nx, ny, ns) = (ch.nx, ch.ny, ch.ns());
    match (pattern.sender_knows, pattern.receiver_knows) {
        (false, false) => Ok(classical::channel_capacity(&ch.averaged(), nx)?.value),
        (false, true) => {
            let mut lifted = vec![0.0; nx * ns * ny];
            for x in 0..nx {
                for s in 0..ns {
                    for (y, v) in ch.row(x, s).iter().enumerate() {
                        lifted[x * ns * ny + s * ny + y] = ch.ps[s] * v;
                    }
                }
            }
            Ok(classical::channel_capacity(&lifted, nx)?.value)
        }
        (true, false) => Ok(classical::sender_state_capacity(&ch.ps, &ch.w, nx, ny)?.value),
        (true, true) => {
            let mut total = 0.0;
            for s in 0..ns {
                if ch.ps[s] <= 0.0 {
                    continue;
                }
                let ws: Vec<f64> = (0..nx).flat_map(|x| ch.row(x, s).to_vec()).collect();
                total += ch.ps[s] * classical::channel_capacity(&ws, nx)?.value;
            }
            Ok(total)
        }
    }
}

/// The classical rate-distortion formula for `pattern` at `target_d`.
///
/// * `00` and `10`: Blahut's iteration on `p(x)`; encoder-only state does
///   not lower the rate, and both patterns run the same code.
/// * `01`: alternating minimization over decoder strategies.
/// * `11`: per-state Blahut at a common slope.
pub fn dedicated_rd(src: &StateSource, pattern: AvailabilityPattern, target_d: f64) -> Result<f64> {
    let est = match (pattern.sender_knows, pattern.receiver_knows) {
        (_, false) => classical::rate_distortion(&src.p_x(), &src.d, target_d)?,
        (false, true) => {
            classical::decoder_state_rate_distortion(&src.pxs, src.nx, &src.d, target_d)?
        }
        (true, true) => classical::both_state_rate_distortion(&src.pxs, src.nx, &src.d, target_d)?,
    };
    Ok(est.rate)
}

/// General-versus-dedicated comparison for one pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionReport {
    pub pattern: AvailabilityPattern,
    pub target_d: Option<f64>,
    pub general: f64,
    pub dedicated: f64,
    pub diff: f64,
    pub passed: bool,
}

/// Largest general/dedicated gap accepted by [`verify_channel_reduction`] and
/// [`verify_source_reduction`].
pub const REDUCTION_TOL: f64 = 1e-3;

fn report(
    pattern: AvailabilityPattern,
    target_d: Option<f64>,
    general: f64,
    dedicated: f64,
) -> ReductionReport {
    let diff = (general - dedicated).abs();
    ReductionReport {
        pattern,
        target_d,
        general,
        dedicated,
        diff,
        passed: diff <= REDUCTION_TOL,
    }
}

/// Solves the general capacity problem on the degenerated channel (default
/// `|U|`) and compares it with [`dedicated_capacity`].
pub fn verify_channel_reduction(
    ch: &StateChannel,
    pattern: AvailabilityPattern,
    opts: &SolverOptions,
) -> Result<ReductionReport> {
    let prob = degenerate_channel(ch, pattern)?;
    let general = solve_capacity(&prob, prob.default_u_size(), opts)
        .map_err(|e| e.on_side("general"))?
        .value;
    let dedicated = dedicated_capacity(ch, pattern).map_err(|e| e.on_side("dedicated"))?;
    Ok(report(pattern, None, general, dedicated))
}

/// Solves the general rate-distortion problem on the degenerated source
/// (default `|U|`) and compares it with [`dedicated_rd`].
pub fn verify_source_reduction(
    src: &StateSource,
    pattern: AvailabilityPattern,
    target_d: f64,
    opts: &SolverOptions,
) -> Result<ReductionReport> {
    let prob = degenerate_source(src, pattern)?;
    let general = solve_rd_point(&prob, target_d, prob.default_u_size(), opts)
        .map_err(|e| e.on_side("general"))?
        .rate;
    let dedicated = dedicated_rd(src, pattern, target_d).map_err(|e| e.on_side("dedicated"))?;
    Ok(report(pattern, Some(target_d), general, dedicated))
}

/// Channel or source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    Channel,
    Source,
}

impl ProblemKind {
    pub fn dual(self) -> Self {
        match self {
            ProblemKind::Channel => ProblemKind::Source,
            ProblemKind::Source => ProblemKind::Channel,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Channel => "channel",
            ProblemKind::Source => "source",
        }
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "channel" => Ok(ProblemKind::Channel),
            "source" => Ok(ProblemKind::Source),
            other => Err(Error::InvalidArgument(format!(
                "kind must be channel or source; got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Max,
    Min,
}

/// The shape of the single-letter formula: `direction [I(U; positive) -
/// I(U; negative)]`, plus the variable correspondence to the dual problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualTemplate {
    pub kind: ProblemKind,
    pub direction: Direction,
    pub positive: [&'static str; 2],
    pub negative: &'static str,
    /// `(variable here, variable in the dual problem)`.
    pub role_map: Vec<(&'static str, &'static str)>,
}

const CHANNEL_ROLES: [(&str, &str); 5] = [
    ("Y", "X"),
    ("X", "Xhat"),
    ("S1", "S2"),
    ("S2", "S1"),
    ("U", "U"),
];

pub fn dual_template_of(kind: ProblemKind) -> DualTemplate {
    match kind {
        ProblemKind::Channel => DualTemplate {
            kind,
            direction: Direction::Max,
            positive: ["S2", "Y"],
            negative: "S1",
            role_map: CHANNEL_ROLES.to_vec(),
        },
        ProblemKind::Source => DualTemplate {
            kind,
            direction: Direction::Min,
            positive: ["S1", "X"],
            negative: "S2",
            role_map: CHANNEL_ROLES.iter().map(|&(a, b)| (b, a)).collect(),
        },
    }
}

impl DualTemplate {
    /// Image of a variable under the role map.
    pub fn image(&self, var: &str) -> Result<&'static str> {
        self.role_map
            .iter()
            .find(|(a, _)| *a == var)
            .map(|(_, b)| *b)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "no variable `{var}` in the {} template",
                    self.kind.name()
                ))
            })
    }

    /// Rewrites the template through its role map, flipping the direction.
    pub fn mapped(&self) -> Result<DualTemplate> {
        let dual = dual_template_of(self.kind.dual());
        Ok(DualTemplate {
            kind: self.kind.dual(),
            direction: match self.direction {
                Direction::Max => Direction::Min,
                Direction::Min => Direction::Max,
            },
            positive: [self.image(self.positive[0])?, self.image(self.positive[1])?],
            negative: self.image(self.negative)?,
            role_map: dual.role_map,
        })
    }

    /// The availability pattern of the dual problem: the sender-side state
    /// becomes decoder-side state and vice versa.
    pub fn dual_pattern(&self, pattern: AvailabilityPattern) -> AvailabilityPattern {
        pattern.swapped()
    }

    /// True when mapping twice returns this template and mapping once gives
    /// the dual template.
    pub fn round_trips(&self) -> bool {
        match self.mapped() {
            Ok(once) => {
                once == dual_template_of(self.kind.dual())
                    && once.mapped().ok().as_ref() == Some(self)
            }
            Err(_) => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_codes_round_trip() {
        for p in AvailabilityPattern::ALL {
            assert_eq!(p.code().parse::<AvailabilityPattern>().unwrap(), p);
        }
        assert!("12".parse::<AvailabilityPattern>().is_err());
        assert_eq!(
            AvailabilityPattern::SENDER.swapped(),
            AvailabilityPattern::RECEIVER
        );
    }

    #[test]
    fn templates_are_dual() {
        let ch = dual_template_of(ProblemKind::Channel);
        let src = dual_template_of(ProblemKind::Source);
        assert_eq!(ch.mapped().unwrap(), src);
        assert_eq!(src.mapped().unwrap(), ch);
        assert!(ch.round_trips() && src.round_trips());
        assert_eq!(ch.dual_pattern(AvailabilityPattern::SENDER).code(), "01");
    }
}
