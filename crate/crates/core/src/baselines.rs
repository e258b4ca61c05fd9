//! Reference mechanisms.
//!
//! - Three-tier lotteries: a top tier is accepted, a bottom tier rejected, and
//!   the remaining budget is split uniformly over the middle tier. Tiers come
//!   either from explicit utility thresholds or from quality intervals
//!   compared against a funding line.
//! - A randomized-response rule that is ε-differentially private yet jumps by
//!   a constant amount when one score crosses 1/2, so no finite smoothness
//!   constant holds for it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginals::{top_k_indices, MarginalVector, SetDistribution};
use crate::mechanism::Mechanism;
use crate::review::{leave_one_out_intervals, IntervalVector, ReviewMatrix};
use crate::utility::{utility, UtilityKind};

/// How the three tiers are formed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ThresholdPolicy {
    /// Accept `u > hi`, reject `u < lo`, randomize the rest.
    Explicit { lo: f64, hi: f64 },
    /// Compare intervals with the funding line, the utility of the rank-`k`
    /// candidate: accept `lb > line`, reject `ub < line`, randomize the rest.
    Interval,
}

/// Accept, pool and reject index sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Tiers {
    pub accept: Vec<usize>,
    pub pool: Vec<usize>,
    pub reject: Vec<usize>,
}

impl Tiers {
    /// `1` on the accept tier, `(k − |accept|)/|pool|` on the pool, `0`
    /// elsewhere.
    pub fn marginals(&self, k: usize) -> Result<MarginalVector> {
        let (a, m) = (self.accept.len(), self.pool.len());
        if a > k || k > a + m {
            return Err(Error::InfeasibleTiers {
                accept: a,
                pool: m,
                k,
            });
        }
        let n = a + m + self.reject.len();
        let mut p = vec![0.0; n];
        for &i in &self.accept {
            p[i] = 1.0;
        }
        if m > 0 {
            let share = (k - a) as f64 / m as f64;
            for &i in &self.pool {
                p[i] = share;
            }
        }
        MarginalVector::new(p, k)
    }
}

/// Funding line: the utility of the rank-`k` candidate, ranking by utility
/// descending and index ascending.
pub fn funding_line(u: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k > u.len() {
        return Err(Error::BudgetOutOfRange { k, n: u.len() });
    }
    Ok(u[top_k_indices(u, k)[k - 1]])
}

pub fn explicit_tiers(u: &[f64], lo: f64, hi: f64) -> Result<Tiers> {
    if !(lo <= hi) {
        return Err(Error::InvalidInput(format!(
            "low threshold {lo} exceeds high threshold {hi}"
        )));
    }
    let mut t = Tiers {
        accept: vec![],
        pool: vec![],
        reject: vec![],
    };
    for (i, &ui) in u.iter().enumerate() {
        if ui > hi {
            t.accept.push(i);
        } else if ui < lo {
            t.reject.push(i);
        } else {
            t.pool.push(i);
        }
    }
    Ok(t)
}

pub fn interval_tiers(u: &[f64], intervals: &IntervalVector, k: usize) -> Result<Tiers> {
    if intervals.len() != u.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} intervals for {} utilities",
            intervals.len(),
            u.len()
        )));
    }
    let line = funding_line(u, k)?;
    let mut t = Tiers {
        accept: vec![],
        pool: vec![],
        reject: vec![],
    };
    for i in 0..u.len() {
        if intervals.lb()[i] > line {
            t.accept.push(i);
        } else if intervals.ub()[i] < line {
            t.reject.push(i);
        } else {
            t.pool.push(i);
        }
    }
    Ok(t)
}

/// Three-tier lottery marginals. Interval mode needs `intervals`.
pub fn thresholded_lottery_marginals(
    u: &[f64],
    policy: &ThresholdPolicy,
    intervals: Option<&IntervalVector>,
    k: usize,
) -> Result<MarginalVector> {
    let tiers = match *policy {
        ThresholdPolicy::Explicit { lo, hi } => explicit_tiers(u, lo, hi)?,
        ThresholdPolicy::Interval => {
            let iv = intervals.ok_or_else(|| {
                Error::InvalidInput("interval mode needs per-candidate intervals".into())
            })?;
            interval_tiers(u, iv, k)?
        }
    };
    tiers.marginals(k)
}

/// Which second set the randomized-response rule uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseSets {
    /// `S₁ = {1..k}`, `S₂ = {k+1..2k}`; needs `n ≥ 2k`.
    #[default]
    Disjoint,
    /// `S₁ = {1..k}`, `S₂ = {2..k+1}`; needs `n ≥ k + 1`.
    Shifted,
}

/// `e^ε / (1 + e^ε)`.
pub fn response_weight(epsilon: f64) -> f64 {
    1.0 / (1.0 + (-epsilon).exp())
}

/// Picks the favoured set with probability `e^ε/(1+e^ε)`: `S₁` when the first
/// candidate's first score is below 1/2, `S₂` otherwise.
pub fn randomized_response_rule(
    x: &ReviewMatrix,
    epsilon: f64,
    k: usize,
    sets: ResponseSets,
) -> Result<(SetDistribution, MarginalVector)> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "epsilon must be finite and non-negative, got {epsilon}"
        )));
    }
    let n = x.n();
    if k == 0 {
        return Err(Error::BudgetOutOfRange { k, n });
    }
    let (first, second): (Vec<usize>, Vec<usize>) = match sets {
        ResponseSets::Disjoint => ((0..k).collect(), (k..2 * k).collect()),
        ResponseSets::Shifted => ((0..k).collect(), (1..k + 1).collect()),
    };
    let needed = second[k - 1] + 1;
    if n < needed {
        return Err(Error::InvalidInput(format!(
            "randomized response with budget {k} needs at least {needed} candidates, got {n}"
        )));
    }
    let a = response_weight(epsilon);
    let (w1, w2) = if x.get(0, 0) < 0.5 { (a, 1.0 - a) } else { (1.0 - a, a) };
    let dist = SetDistribution::new(n, k, vec![(first, w1), (second, w2)])?;
    let p = dist.marginals();
    Ok((dist, p))
}

/// Mean utility with leave-one-out intervals in interval mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalLottery {
    pub k: usize,
}

impl Mechanism for IntervalLottery {
    fn name(&self) -> String {
        "interval_lottery".into()
    }

    fn marginals(&self, x: &ReviewMatrix) -> Result<MarginalVector> {
        let u = utility(x, UtilityKind::Mean);
        let iv = leave_one_out_intervals(x)?;
        thresholded_lottery_marginals(&u, &ThresholdPolicy::Interval, Some(&iv), self.k)
    }
}

/// Explicit utility thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdLottery {
    pub utility: UtilityKind,
    pub k: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Mechanism for ThresholdLottery {
    fn name(&self) -> String {
        "threshold_lottery".into()
    }

    fn marginals(&self, x: &ReviewMatrix) -> Result<MarginalVector> {
        let u = utility(x, self.utility);
        let policy = ThresholdPolicy::Explicit {
            lo: self.lo,
            hi: self.hi,
        };
        thresholded_lottery_marginals(&u, &policy, None, self.k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomizedResponse {
    pub epsilon: f64,
    pub k: usize,
    pub sets: ResponseSets,
}

impl Mechanism for RandomizedResponse {
    fn name(&self) -> String {
        "randomized_response".into()
    }

    fn marginals(&self, x: &ReviewMatrix) -> Result<MarginalVector> {
        Ok(randomized_response_rule(x, self.epsilon, self.k, self.sets)?.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TOY: [f64; 8] = [0.18, 0.26, 0.34, 0.42, 0.47, 0.56, 0.68, 0.84];

    fn interval_lottery(u: &[f64], half: f64, k: usize) -> Result<MarginalVector> {
        let iv = IntervalVector::symmetric(u, half).unwrap();
        thresholded_lottery_marginals(u, &ThresholdPolicy::Interval, Some(&iv), k)
    }

    fn assert_close(p: &[f64], q: &[f64]) {
        for (a, b) in p.iter().zip(q) {
            assert!((a - b).abs() <= 1e-12, "{p:?} vs {q:?}");
        }
    }

    #[test]
    fn toy_before_and_after() {
        let p = interval_lottery(&TOY, 0.15, 2).unwrap();
        assert_close(&p, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.5, 1.0]);
        let mut raised = TOY;
        raised[4] = 0.53;
        let p = interval_lottery(&raised, 0.15, 2).unwrap();
        let third = 1.0 / 3.0;
        assert_close(&p, &[0.0, 0.0, 0.0, 0.0, third, third, third, 1.0]);
    }

    #[test]
    fn disjoint_intervals_give_top_k() {
        let u = [0.1, 0.5, 0.9, 0.3];
        let p = interval_lottery(&u, 0.01, 2).unwrap();
        assert_eq!(p.as_slice(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn explicit_thresholds_and_infeasible_tiers() {
        let u = [0.1, 0.5, 0.9, 0.55];
        let p = thresholded_lottery_marginals(&u, &ThresholdPolicy::Explicit { lo: 0.4, hi: 0.8 }, None, 2)
            .unwrap();
        assert_close(&p, &[0.0, 0.5, 1.0, 0.5]);
        match thresholded_lottery_marginals(&u, &ThresholdPolicy::Explicit { lo: 0.4, hi: 0.8 }, None, 4) {
            Err(Error::InfeasibleTiers { accept: 1, pool: 2, k: 4 }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(thresholded_lottery_marginals(&u, &ThresholdPolicy::Interval, None, 2).is_err());
    }

    #[test]
    fn funding_line_ties_by_index() {
        assert_eq!(funding_line(&[0.5, 0.7, 0.5, 0.2], 2).unwrap(), 0.5);
        assert!(funding_line(&[0.5], 2).is_err());
    }

    #[test]
    fn tier_boundary_discontinuity() {
        let mut u = TOY;
        u[4] = 0.53 - 1e-9;
        let before = interval_lottery(&u, 0.15, 2).unwrap();
        u[4] = 0.53;
        let after = interval_lottery(&u, 0.15, 2).unwrap();
        let jump = before.l1_distance(&after);
        assert!(jump > 0.6, "{jump}");
    }

    fn rr(x11: f64, eps: f64, k: usize, sets: ResponseSets) -> (SetDistribution, MarginalVector) {
        let n = 2 * k + 1;
        let rows = (0..n).map(|i| vec![if i == 0 { x11 } else { 0.3 }, 0.6]).collect();
        let x = ReviewMatrix::new(rows, 0.1).unwrap();
        randomized_response_rule(&x, eps, k, sets).unwrap()
    }

    #[test]
    fn randomized_response_examples() {
        let (d, p) = rr(0.9, 0.0, 2, ResponseSets::Disjoint);
        assert_eq!(d.probability(&[0, 1]), 0.5);
        assert_eq!(d.probability(&[2, 3]), 0.5);
        assert_eq!(p.as_slice(), &[0.5, 0.5, 0.5, 0.5, 0.0]);

        let (_, p) = rr(0.4, 3f64.ln(), 1, ResponseSets::Disjoint);
        assert_close(&p, &[0.75, 0.25, 0.0]);

        for delta in [1e-1, 1e-2, 1e-3] {
            let (_, lo) = rr(0.5 - delta, 3f64.ln(), 1, ResponseSets::Disjoint);
            let (_, hi) = rr(0.5 + delta, 3f64.ln(), 1, ResponseSets::Disjoint);
            assert!((lo.l1_distance(&hi) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shifted_sets_overlap() {
        let (d, p) = rr(0.2, 3f64.ln(), 2, ResponseSets::Shifted);
        assert!((d.probability(&[0, 1]) - 0.75).abs() < 1e-12);
        assert_close(&p, &[0.75, 1.0, 0.25, 0.0, 0.0]);
        let x = ReviewMatrix::new(vec![vec![0.2]; 3], 0.1).unwrap();
        assert!(randomized_response_rule(&x, 1.0, 2, ResponseSets::Disjoint).is_err());
        assert!(randomized_response_rule(&x, 1.0, 2, ResponseSets::Shifted).is_ok());
    }

    proptest! {
        #[test]
        fn randomized_response_likelihood_ratio(
            a in 0.0f64..=1.0,
            b in 0.0f64..=1.0,
            eps in 0.0f64..5.0,
            k in 1usize..4,
            shifted in any::<bool>(),
        ) {
            let sets = if shifted { ResponseSets::Shifted } else { ResponseSets::Disjoint };
            let (d1, _) = rr(a, eps, k, sets);
            let (d2, _) = rr(b, eps, k, sets);
            let bound = eps.exp() * (1.0 + 1e-12);
            for (set, w) in d1.iter() {
                let w2 = d2.probability(set);
                prop_assert!(w <= bound * w2 && w2 <= bound * w);
            }
        }
    }
}
