//! Row-wise utility aggregators and their Lipschitz constants.

use serde::{Deserialize, Serialize};
use std::ops::Deref;

use crate::error::{Error, Result};
use crate::review::ReviewMatrix;

/// How a candidate's reviews are aggregated into one utility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UtilityKind {
    Mean,
    /// Lower median for even review counts.
    Median,
    Min,
    Max,
}

impl UtilityKind {
    pub fn aggregate(self, row: &[f64]) -> f64 {
        match self {
            UtilityKind::Mean => row.iter().sum::<f64>() / row.len() as f64,
            UtilityKind::Min => row.iter().copied().fold(f64::INFINITY, f64::min),
            UtilityKind::Max => row.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            UtilityKind::Median => {
                let mut sorted = row.to_vec();
                sorted.sort_by(f64::total_cmp);
                sorted[(sorted.len() - 1) / 2]
            }
        }
    }
}

impl std::fmt::Display for UtilityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            UtilityKind::Mean => "mean",
            UtilityKind::Median => "median",
            UtilityKind::Min => "min",
            UtilityKind::Max => "max",
        };
        f.write_str(s)
    }
}

/// An aggregator together with its ℓ1 Lipschitz constant `λ` and its
/// lower-Lipschitz constant `c` (the slope it is guaranteed to realise,
/// which drives the generic regret lower bound).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilitySpec {
    pub kind: UtilityKind,
    pub lipschitz: f64,
    pub lower_lipschitz: f64,
}

impl UtilitySpec {
    pub fn for_counts(kind: UtilityKind, counts: &[usize]) -> Result<Self> {
        let (lipschitz, lower_lipschitz) = lipschitz_constant(kind, counts)?;
        Ok(Self {
            kind,
            lipschitz,
            lower_lipschitz,
        })
    }

    pub fn for_reviews(kind: UtilityKind, x: &ReviewMatrix) -> Self {
        // ReviewMatrix guarantees at least one candidate and m_i >= 1.
        Self::for_counts(kind, &x.review_counts()).expect("valid review matrix")
    }
}

/// `(λ, c)` for an aggregator given per-candidate review counts.
///
/// The mean moves by at most `δ/m_i` when row `i` moves by `δ` in ℓ1, so
/// `λ = c = 1/m_min`. Median, min and max are 1-Lipschitz and each has a
/// witness pair realising slope 1.
pub fn lipschitz_constant(kind: UtilityKind, counts: &[usize]) -> Result<(f64, f64)> {
    let m_min = counts.iter().copied().min().ok_or(Error::NoCandidates)?;
    if m_min == 0 {
        return Err(Error::InvalidInput("review counts must be >= 1".into()));
    }
    Ok(match kind {
        UtilityKind::Mean => {
            let l = 1.0 / m_min as f64;
            (l, l)
        }
        UtilityKind::Median | UtilityKind::Min | UtilityKind::Max => (1.0, 1.0),
    })
}

/// Per-candidate utilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityVector(Vec<f64>);

impl UtilityVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "utility {i} is not finite: {}",
                values[i]
            )));
        }
        Ok(Self(values))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for UtilityVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Aggregates every row of `x` with `kind`.
pub fn utility(x: &ReviewMatrix, kind: UtilityKind) -> UtilityVector {
    UtilityVector(x.rows().iter().map(|r| kind.aggregate(r)).collect())
}
