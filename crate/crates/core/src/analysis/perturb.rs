use serde::Serialize;

use crate::error::{Error, Result};
use crate::mechanism::Mechanism;
use crate::review::ReviewMatrix;

/// The single-entry perturbation that moved the marginals the most.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationReport {
    pub candidate: usize,
    pub review: usize,
    /// `+1` or `−1`.
    pub direction: i8,
    /// `‖ΔX‖₁,₁` after clamping to `[0, 1]`.
    pub delta_x: f64,
    /// `‖Δp‖₁`.
    pub l1: f64,
    /// `max_i |Δp_i|`.
    pub max_coord: f64,
    /// `‖Δp‖₁ / ‖ΔX‖₁,₁`.
    pub ratio: f64,
    /// Monte Carlo standard error of `ratio`, for sampled mechanisms.
    pub mc_stderr: Option<f64>,
    /// Number of perturbations evaluated.
    pub evaluated: usize,
}

struct Probe {
    candidate: usize,
    review: usize,
    direction: i8,
    delta_x: f64,
}

/// Tries `±tick` on every entry (clamped to `[0, 1]`, skipping entries that
/// cannot move) and reports the largest `‖Δp‖₁`.
///
/// All perturbed matrices are evaluated in one batch, so Monte Carlo
/// mechanisms compare them on shared random draws.
pub fn perturbation_search(mechanism: &dyn Mechanism, x: &ReviewMatrix, tick: f64) -> Result<PerturbationReport> {
    if !(tick.is_finite() && tick > 0.0) {
        return Err(Error::NonPositive {
            name: "tick",
            value: tick,
        });
    }
    let mut probes = Vec::new();
    let mut xs = vec![x.clone()];
    for (i, row) in x.rows().iter().enumerate() {
        for (r, &s) in row.iter().enumerate() {
            for direction in [1i8, -1] {
                let moved = (s + f64::from(direction) * tick).clamp(0.0, 1.0);
                if moved == s {
                    continue;
                }
                xs.push(x.with_entry(i, r, moved)?);
                probes.push(Probe {
                    candidate: i,
                    review: r,
                    direction,
                    delta_x: (moved - s).abs(),
                });
            }
        }
    }
    if probes.is_empty() {
        return Err(Error::InvalidInput("no entry can be perturbed".into()));
    }
    let pairs: Vec<(usize, usize)> = (1..xs.len()).map(|j| (0, j)).collect();
    let out = mechanism.evaluate(&xs, &pairs)?;
    let l1s = out.pair_l1(&pairs);

    let mut best = 0;
    for (j, &v) in l1s.iter().enumerate() {
        if v > l1s[best] {
            best = j;
        }
    }
    let probe = &probes[best];
    let base = &out.marginals[0];
    let moved = &out.marginals[best + 1];
    let max_coord = base
        .iter()
        .zip(moved.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(PerturbationReport {
        candidate: probe.candidate,
        review: probe.review,
        direction: probe.direction,
        delta_x: probe.delta_x,
        l1: l1s[best],
        max_coord,
        ratio: l1s[best] / probe.delta_x,
        mc_stderr: out.pair_l1_stderr.map(|se| se[best] / probe.delta_x),
        evaluated: probes.len(),
    })
}

/// Utilities `(1, …, 1, B, 0, …, 0)` with `k − 1` ones, as single-review
/// rows.
pub fn tightness_profile(n: usize, k: usize, b: f64, tick: f64) -> Result<ReviewMatrix> {
    if k == 0 || k > n {
        return Err(Error::BudgetOutOfRange { k, n });
    }
    let scores: Vec<f64> = (0..n)
        .map(|i| match i.cmp(&(k - 1)) {
            std::cmp::Ordering::Less => 1.0,
            std::cmp::Ordering::Equal => b,
            std::cmp::Ordering::Greater => 0.0,
        })
        .collect();
    ReviewMatrix::single_review(&scores, tick)
}

/// One (B, ε, candidate, direction) probe of a tightness search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessRow {
    pub b: f64,
    pub epsilon: f64,
    pub candidate: usize,
    pub direction: i8,
    pub l1: f64,
    pub ratio: f64,
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessReport {
    pub n: usize,
    pub k: usize,
    pub rows: Vec<TightnessRow>,
    pub worst: TightnessRow,
}

/// Searches near-worst-case profiles for the largest `‖Δp‖₁/‖ΔX‖₁,₁`.
///
/// For each `B` and `ε`, the candidate at the top of the ones block, the
/// candidate holding `B`, and the first zero are each moved by `±ε`. Every
/// profile and perturbation goes into a single batch.
pub fn tightness_search(
    mechanism: &dyn Mechanism,
    n: usize,
    k: usize,
    b_grid: &[f64],
    eps_grid: &[f64],
) -> Result<TightnessReport> {
    if b_grid.is_empty() || eps_grid.is_empty() {
        return Err(Error::InvalidInput("tightness grids must be nonempty".into()));
    }
    if let Some(&e) = eps_grid.iter().find(|&&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::NonPositive {
            name: "perturbation size",
            value: e,
        });
    }
    let tick = eps_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let mut candidates = vec![k - 1];
    if k >= 2 {
        candidates.insert(0, 0);
    }
    if k < n {
        candidates.push(k);
    }

    let mut xs = Vec::new();
    let mut pairs = Vec::new();
    let mut meta = Vec::new();
    for &b in b_grid {
        let base = tightness_profile(n, k, b, tick)?;
        let base_idx = xs.len();
        xs.push(base.clone());
        for &eps in eps_grid {
            for &c in &candidates {
                for direction in [1i8, -1] {
                    let s = base.get(c, 0);
                    let moved = (s + f64::from(direction) * eps).clamp(0.0, 1.0);
                    if moved == s {
                        continue;
                    }
                    pairs.push((base_idx, xs.len()));
                    xs.push(base.with_entry(c, 0, moved)?);
                    meta.push((b, eps, c, direction, (moved - s).abs()));
                }
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no perturbation changes the profile".into()));
    }
    let out = mechanism.evaluate(&xs, &pairs)?;
    let l1s = out.pair_l1(&pairs);
    let rows: Vec<TightnessRow> = meta
        .iter()
        .enumerate()
        .map(|(q, &(b, epsilon, candidate, direction, dx))| TightnessRow {
            b,
            epsilon,
            candidate,
            direction,
            l1: l1s[q],
            ratio: l1s[q] / dx,
            stderr: out.pair_l1_stderr.as_ref().map(|se| se[q] / dx),
        })
        .collect();
    let worst = rows
        .iter()
        .fold(None::<&TightnessRow>, |best, r| match best {
            Some(b) if b.ratio >= r.ratio => Some(b),
            _ => Some(r),
        })
        .cloned()
        .expect("rows is nonempty");
    Ok(TightnessReport { n, k, rows, worst })
}
