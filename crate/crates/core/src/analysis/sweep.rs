use rayon::prelude::*;
use serde::Serialize;

use crate::clipped::{clipped_linear_marginals, slope_from_smoothness};
use crate::error::{Error, Result};
use crate::review::ReviewMatrix;
use crate::softmax::{temperature_from_smoothness, SoftmaxBatch};
use crate::utility::{utility, UtilityKind, UtilitySpec};

use super::regret::{opt_value, regret};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub l: f64,
    pub mechanism: String,
    pub regret: f64,
    pub regret_per_k: f64,
    /// Monte Carlo standard error of `regret`; zero for exact rows.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub n: usize,
    pub k: usize,
    pub lipschitz: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn mechanism_rows<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a SweepRow> + 'a {
        self.rows.iter().filter(move |r| r.mechanism == name)
    }
}

/// `points` values spaced evenly in log scale over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || points == 0 {
        return Err(Error::InvalidInput(format!(
            "log grid needs 0 < lo <= hi and points >= 1, got [{lo}, {hi}] with {points}"
        )));
    }
    if points == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect())
}

/// Log grid over `[0.1/m, 10/m]`, centred on the mean's own constant `1/m`.
pub fn default_smoothness_grid(m: usize, points: usize) -> Result<Vec<f64>> {
    let anchor = 1.0 / m.max(1) as f64;
    log_grid(0.1 * anchor, 10.0 * anchor, points)
}

/// Regret of the clipped linear lottery (exact) and top-`k` softmax (Monte
/// Carlo with `draws` draws) at each smoothness level.
pub fn regret_smoothness_sweep(
    x: &ReviewMatrix,
    kind: UtilityKind,
    k: usize,
    grid: &[f64],
    draws: usize,
    seed: u64,
) -> Result<SweepTable> {
    let spec = UtilitySpec::for_reviews(kind, x);
    let u = utility(x, kind).into_inner();
    let opt = opt_value(&u, k);
    let kf = k as f64;
    let rows: Vec<[SweepRow; 2]> = grid
        .par_iter()
        .enumerate()
        .map(|(g, &l)| -> Result<[SweepRow; 2]> {
            let alpha = slope_from_smoothness(l, spec.lipschitz)?;
            let linear = regret(&clipped_linear_marginals(&u, alpha, k)?.marginals, &u)?;
            let tau = temperature_from_smoothness(l, spec.lipschitz)?;
            let batch = SoftmaxBatch {
                tau,
                k,
                draws,
                seed: seed.wrapping_add(g as u64),
            };
            let est = &batch.run(std::slice::from_ref(&u), &[])?.vectors[0];
            let soft = opt - est.selected_utility;
            Ok([
                SweepRow {
                    l,
                    mechanism: "clipped_linear".into(),
                    regret: linear,
                    regret_per_k: linear / kf,
                    stderr: 0.0,
                },
                SweepRow {
                    l,
                    mechanism: "softmax".into(),
                    regret: soft,
                    regret_per_k: soft / kf,
                    stderr: est.selected_utility_stderr,
                },
            ])
        })
        .collect::<Result<_>>()?;
    Ok(SweepTable {
        n: x.n(),
        k,
        lipschitz: spec.lipschitz,
        rows: rows.into_iter().flatten().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::synthetic_beta_reviews;

    #[test]
    fn grid_shape() {
        let g = default_smoothness_grid(5, 10).unwrap();
        assert_eq!(g.len(), 10);
        assert!((g[0] - 0.02).abs() < 1e-15 && (g[9] - 2.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(log_grid(0.0, 1.0, 3).is_err());
    }

    #[test]
    fn large_smoothness_drives_regret_to_zero() {
        let x = synthetic_beta_reviews(40, 3, 2.0, 10, 1).unwrap();
        let t = regret_smoothness_sweep(&x, UtilityKind::Mean, 5, &[1e4], 2000, 2).unwrap();
        for r in &t.rows {
            assert!(r.regret.abs() < 1e-3, "{r:?}");
        }
    }
}
