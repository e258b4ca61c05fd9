//! Smooth partial lotteries.
//!
//! Given per-candidate review scores and a budget `k`, this crate computes
//! marginal selection probabilities for several randomized selection rules,
//! draws size-`k` outcomes that realise those marginals, and measures the
//! tradeoff between smoothness (how far probabilities move when a review
//! changes) and regret (utility lost relative to deterministic top-`k`).
//!
//! - [`clipped`]: the clipped linear lottery, `p_i = clip(α·u_i + b)`, with an
//!   exact breakpoint search for the intercept.
//! - [`softmax`]: top-`k` softmax via Gumbel-top-`k`, Monte Carlo and exact.
//! - [`sampler`]: systematic sampling from any marginal vector.
//! - [`baselines`]: three-tier threshold lotteries and a randomized-response rule.
//! - [`expost`]: interval dominance, ex post validity and Frank–Wolfe projection.
//! - [`analysis`]: regret, closed-form bounds and perturbation experiments.

pub mod analysis;
pub mod baselines;
pub mod clipped;
mod error;
pub mod expost;
pub mod io;
pub mod marginals;
pub mod mechanism;
pub mod review;
pub mod rng;
pub mod sampler;
pub mod softmax;
pub mod utility;

pub use error::{Error, Result};
pub use marginals::{MarginalVector, SetDistribution};
pub use mechanism::Mechanism;
pub use review::{IntervalVector, ReviewMatrix, Scale};
pub use utility::{UtilityKind, UtilitySpec, UtilityVector};
