use serde::Serialize;

use crate::error::{ensure_positive, Error, Result};
use crate::marginals::{top_k_sum, MarginalVector};

/// Tolerance for the pairwise individual-fairness check.
pub const FAIRNESS_TOL: f64 = 1e-9;

/// Sum of the `k` largest utilities.
pub fn opt_value(u: &[f64], k: usize) -> f64 {
    top_k_sum(u, k)
}

/// `OPT − p·u`: expected utility lost relative to deterministic top-`k`.
pub fn regret(p: &MarginalVector, u: &[f64]) -> Result<f64> {
    if p.n() != u.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} marginals for {} utilities",
            p.n(),
            u.len()
        )));
    }
    let expected: f64 = p.iter().zip(u).map(|(a, b)| a * b).sum();
    Ok(opt_value(u, p.k()) - expected)
}

fn check_budget(k: usize, n: usize) -> Result<()> {
    if n == 0 || k > n {
        return Err(Error::BudgetOutOfRange { k, n });
    }
    Ok(())
}

/// Worst-case regret of the clipped linear lottery: `k(1 − k/n)·λ/(2L)`.
pub fn regret_upper_bound_linear(k: usize, n: usize, lipschitz: f64, smoothness: f64) -> Result<f64> {
    check_budget(k, n)?;
    let lambda = ensure_positive("Lipschitz constant", lipschitz)?;
    let l = ensure_positive("smoothness", smoothness)?;
    let (k, n) = (k as f64, n as f64);
    Ok(k * (1.0 - k / n) * lambda / (2.0 * l))
}

/// Regret every `L`-smooth rule incurs on some input, for a utility with
/// lower-Lipschitz constant `c`:
/// `k·c(1 − k/n)²/(2L)` when `L ≥ c(1 − k/n)`, otherwise `k(1 − k/n − L/(2c))`.
pub fn regret_lower_bound(k: usize, n: usize, lower_lipschitz: f64, smoothness: f64) -> Result<f64> {
    check_budget(k, n)?;
    let c = ensure_positive("lower Lipschitz constant", lower_lipschitz)?;
    let l = ensure_positive("smoothness", smoothness)?;
    let (k, n) = (k as f64, n as f64);
    let rest = 1.0 - k / n;
    Ok(if l >= c * rest {
        k * c * rest * rest / (2.0 * l)
    } else {
        k * (rest - l / (2.0 * c))
    })
}

/// [`regret_lower_bound`] for the mean of `m` reviews (`c = 1/m`).
pub fn regret_lower_bound_mean(k: usize, n: usize, m: usize, smoothness: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidInput("review count must be >= 1".into()));
    }
    regret_lower_bound(k, n, 1.0 / m as f64, smoothness)
}

/// Worst-case regret of top-`k` softmax at temperature `τ`: `k·τ·ln n`.
pub fn softmax_regret_bound(k: usize, n: usize, tau: f64) -> Result<f64> {
    check_budget(k, n)?;
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::InvalidInput(format!("temperature must be >= 0, got {tau}")));
    }
    Ok(k as f64 * tau * (n as f64).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricDpBound {
    /// `2k·tanh(εd/2)`.
    pub bound: f64,
    /// `εkd`.
    pub linearized: f64,
}

/// Marginal movement allowed by ε-metric DP at input distance `d`.
pub fn metric_dp_marginal_bound(epsilon: f64, k: usize, distance: f64) -> Result<MetricDpBound> {
    if !(epsilon >= 0.0 && distance >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "epsilon and distance must be >= 0, got {epsilon} and {distance}"
        )));
    }
    let k = k as f64;
    Ok(MetricDpBound {
        bound: 2.0 * k * (epsilon * distance / 2.0).tanh(),
        linearized: epsilon * k * distance,
    })
}

/// `|p_i − p_j| ≤ α|u_i − u_j|` for every pair, within [`FAIRNESS_TOL`].
pub fn check_individual_fairness(p: &[f64], u: &[f64], slope: f64) -> bool {
    if p.len() != u.len() {
        return false;
    }
    (0..p.len()).all(|i| {
        (i + 1..p.len()).all(|j| (p[i] - p[j]).abs() <= slope * (u[i] - u[j]).abs() + FAIRNESS_TOL)
    })
}
