//! Capacity and rate-distortion computations for finite-alphabet channels and
//! sources with state information available at either end.
//!
//! * [`prob`]: distributions, kernels and information functionals.
//! * [`capacity`]: `max I(U; S2, Y) - I(U; S1)` over `p(u|s1)` and `x = f(u, s1)`.
//! * [`rate_distortion`]: `min I(U; S1, X) - I(U; S2)` under a distortion budget.
//! * [`special`]: the four availability patterns on each side, their classical
//!   formulas, and the channel/source correspondence.
//! * [`binning`]: random binning codes simulated at small blocklength.
//! * [`oracle`]: exhaustive grid search used as ground truth on tiny instances.
//!
//! Everything is reported in bits. With the default `parallel` feature the
//! solvers fan out over rayon; results do not depend on the thread count.

pub mod binning;
pub mod capacity;
pub mod classical;
pub mod error;
pub mod instances;
pub mod oracle;
pub mod par;
pub mod prob;
pub mod rate_distortion;
pub mod solver;
pub mod special;

pub use capacity::{objective, solve_capacity, CapacityResult, ChannelProblem};
pub use error::{Error, Result};
pub use rate_distortion::{
    feasible_range, rd_objective, solve_rd_point, sweep_rd_curve, RdCurve, RdPoint, SourceProblem,
};
pub use solver::{enumerate_maps, Diagnostics, SearchMode, SolverOptions};
