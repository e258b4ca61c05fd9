//! Marginal selection probabilities and explicit distributions over sets.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::ops::Deref;

use crate::error::{Error, Result};

/// Tolerance on `Σp = k` and on the `[0, 1]` range of each coordinate.
pub const BUDGET_TOL: f64 = 1e-9;

/// A point of the capped simplex: `p ∈ [0, 1]^n` with `Σp = k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalVector {
    p: Vec<f64>,
    k: usize,
}

impl MarginalVector {
    /// Validates range and budget within [`BUDGET_TOL`].
    pub fn new(p: Vec<f64>, k: usize) -> Result<Self> {
        if k > p.len() {
            return Err(Error::BudgetOutOfRange { k, n: p.len() });
        }
        if let Some(index) = p
            .iter()
            .position(|&v| !(-BUDGET_TOL..=1.0 + BUDGET_TOL).contains(&v))
        {
            return Err(Error::ProbabilityOutOfRange {
                index,
                value: p[index],
            });
        }
        let sum: f64 = p.iter().sum();
        if (sum - k as f64).abs() > BUDGET_TOL {
            return Err(Error::BudgetViolation { sum, k });
        }
        Ok(Self { p, k })
    }

    /// Indicator vector of `set` over `n` candidates.
    pub fn indicator(n: usize, set: &[usize]) -> Result<Self> {
        let mut p = vec![0.0; n];
        for &i in set {
            if i >= n || p[i] == 1.0 {
                return Err(Error::InvalidInput(format!(
                    "set index {i} is out of range or repeated"
                )));
            }
            p[i] = 1.0;
        }
        Self::new(p, set.len())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.p
    }

    /// `‖p − q‖₁`.
    pub fn l1_distance(&self, other: &Self) -> f64 {
        l1(&self.p, &other.p)
    }
}

impl Deref for MarginalVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.p
    }
}

pub(crate) fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Indices of the `k` largest values, ranked by value descending with ties
/// broken by the smaller index.
pub fn top_k_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// Sum of the `k` largest values.
pub fn top_k_sum(values: &[f64], k: usize) -> f64 {
    top_k_indices(values, k).iter().map(|&i| values[i]).sum()
}

/// A probability distribution over size-`k` subsets, keyed by sorted index
/// lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetDistribution {
    n: usize,
    k: usize,
    sets: BTreeMap<Vec<usize>, f64>,
}

impl SetDistribution {
    /// Builds a distribution, merging duplicate sets and dropping zero mass.
    pub fn new(n: usize, k: usize, entries: impl IntoIterator<Item = (Vec<usize>, f64)>) -> Result<Self> {
        let mut sets = BTreeMap::new();
        for (mut set, w) in entries {
            set.sort_unstable();
            if set.len() != k || set.windows(2).any(|w| w[0] == w[1]) || set.iter().any(|&i| i >= n) {
                return Err(Error::InvalidInput(format!(
                    "{set:?} is not a size-{k} subset of 0..{n}"
                )));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidInput(format!("set weight {w} is negative")));
            }
            if w > 0.0 {
                *sets.entry(set).or_insert(0.0) += w;
            }
        }
        let total: f64 = sets.values().sum();
        if (total - 1.0).abs() > BUDGET_TOL {
            return Err(Error::InvalidInput(format!(
                "set probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self { n, k, sets })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn probability(&self, set: &[usize]) -> f64 {
        let mut key = set.to_vec();
        key.sort_unstable();
        self.sets.get(&key).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], f64)> {
        self.sets.iter().map(|(s, &w)| (s.as_slice(), w))
    }

    /// Inclusion probability of every candidate.
    pub fn marginals(&self) -> MarginalVector {
        let mut p = vec![0.0; self.n];
        for (set, &w) in &self.sets {
            for &i in set {
                p[i] += w;
            }
        }
        for v in &mut p {
            *v = v.clamp(0.0, 1.0);
        }
        // Construction guarantees total mass 1 and size-k sets.
        MarginalVector::new(p, self.k).expect("set distribution has valid marginals")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marginal_vector_validation() {
        assert!(MarginalVector::new(vec![0.5, 0.5], 1).is_ok());
        assert!(matches!(
            MarginalVector::new(vec![0.5, 0.6], 1),
            Err(Error::BudgetViolation { .. })
        ));
        assert!(matches!(
            MarginalVector::new(vec![1.5, -0.5], 1),
            Err(Error::ProbabilityOutOfRange { index: 0, .. })
        ));
        assert!(matches!(
            MarginalVector::new(vec![1.0], 2),
            Err(Error::BudgetOutOfRange { .. })
        ));
        let ind = MarginalVector::indicator(4, &[3, 1]).unwrap();
        assert_eq!(ind.as_slice(), &[0.0, 1.0, 0.0, 1.0]);
        assert!(MarginalVector::indicator(4, &[1, 1]).is_err());
    }

    #[test]
    fn top_k_breaks_ties_by_index() {
        assert_eq!(top_k_indices(&[0.5, 0.9, 0.5, 0.1], 2), vec![1, 0]);
        assert_eq!(top_k_indices(&[0.5, 0.5, 0.5], 2), vec![0, 1]);
        assert!((top_k_sum(&[0.1, 0.4, 0.7, 1.0], 2) - 1.7).abs() < 1e-15);
    }

    #[test]
    fn set_distribution_marginals() {
        let d = SetDistribution::new(
            4,
            2,
            vec![(vec![1, 0], 0.25), (vec![0, 2], 0.5), (vec![0, 1], 0.25)],
        )
        .unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.probability(&[1, 0]), 0.5);
        assert_eq!(d.marginals().as_slice(), &[1.0, 0.5, 0.5, 0.0]);
        assert!(SetDistribution::new(3, 2, vec![(vec![0, 1], 0.7)]).is_err());
        assert!(SetDistribution::new(3, 2, vec![(vec![0], 1.0)]).is_err());
    }
}
