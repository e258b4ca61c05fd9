//! Review matrices, score normalization and the `‖·‖₁,₁` distance.
//!
//! Candidates may receive different numbers of reviews, so a
//! [`ReviewMatrix`] is ragged: row `i` holds the `m_i` normalized scores of
//! candidate `i`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Range slack allowed when validating normalized scores and probabilities.
pub const RANGE_TOL: f64 = 1e-9;

/// A declared raw review scale, e.g. `1..=10` in steps of `1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scale {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Scale {
    pub fn new(min: f64, max: f64, step: f64) -> Result<Self> {
        let scale = Self { min, max, step };
        scale.validate()?;
        Ok(scale)
    }

    /// The unit scale `[0, 1]` with the given step.
    pub fn unit(step: f64) -> Self {
        Self {
            min: 0.0,
            max: 1.0,
            step,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite()) || self.max <= self.min {
            return Err(Error::InvalidScale(format!(
                "need finite min < max, got [{}, {}]",
                self.min, self.max
            )));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::InvalidScale(format!(
                "step must be positive, got {}",
                self.step
            )));
        }
        Ok(())
    }

    /// Normalized size of one scale step.
    pub fn tick(&self) -> f64 {
        self.step / (self.max - self.min)
    }

    pub fn normalize(&self, raw: f64) -> f64 {
        (raw - self.min) / (self.max - self.min)
    }
}

/// Ragged per-candidate review scores in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReviewMatrix {
    rows: Vec<Vec<f64>>,
    tick: f64,
}

impl ReviewMatrix {
    /// Builds a matrix from already-normalized rows.
    ///
    /// Every score must lie in `[0, 1]`, every row must be non-empty, and
    /// there must be at least one candidate.
    pub fn new(rows: Vec<Vec<f64>>, tick: f64) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::NoCandidates);
        }
        for (i, row) in rows.iter().enumerate() {
            if row.is_empty() {
                return Err(Error::EmptyRow(i));
            }
            for (j, &s) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&s) {
                    return Err(Error::ScoreOutOfRange {
                        candidate: i,
                        review: j,
                        value: s,
                        min: 0.0,
                        max: 1.0,
                    });
                }
            }
        }
        if !(tick.is_finite() && tick > 0.0) {
            return Err(Error::InvalidScale(format!("tick must be positive, got {tick}")));
        }
        Ok(Self { rows, tick })
    }

    /// One review per candidate, with the given scores.
    pub fn single_review(scores: &[f64], tick: f64) -> Result<Self> {
        Self::new(scores.iter().map(|&s| vec![s]).collect(), tick)
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn get(&self, candidate: usize, review: usize) -> f64 {
        self.rows[candidate][review]
    }

    pub fn tick(&self) -> f64 {
        self.tick
    }

    pub fn review_counts(&self) -> Vec<usize> {
        self.rows.iter().map(Vec::len).collect()
    }

    pub fn m_min(&self) -> usize {
        self.rows.iter().map(Vec::len).min().unwrap_or(0)
    }

    /// Total number of scores.
    pub fn entries(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// A copy with one entry replaced. The new score must lie in `[0, 1]`.
    pub fn with_entry(&self, candidate: usize, review: usize, value: f64) -> Result<Self> {
        if candidate >= self.n() || review >= self.rows[candidate].len() {
            return Err(Error::ShapeMismatch(format!(
                "no entry ({candidate}, {review})"
            )));
        }
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::ScoreOutOfRange {
                candidate,
                review,
                value,
                min: 0.0,
                max: 1.0,
            });
        }
        let mut out = self.clone();
        out.rows[candidate][review] = value;
        Ok(out)
    }

    /// Permutes candidates: row `i` of the result is row `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n() {
            return Err(Error::ShapeMismatch(format!(
                "permutation of length {} for {} candidates",
                perm.len(),
                self.n()
            )));
        }
        let rows = perm.iter().map(|&i| self.rows[i].clone()).collect();
        Ok(Self {
            rows,
            tick: self.tick,
        })
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n() == other.n()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.len() == b.len())
    }
}

/// Normalizes raw scores on `scale` to `[0, 1]`.
///
/// Rows may have different lengths. Scores outside `[scale.min, scale.max]`
/// are rejected with the offending candidate and review index.
pub fn normalize_reviews(raw: &[Vec<f64>], scale: &Scale) -> Result<ReviewMatrix> {
    scale.validate()?;
    if raw.is_empty() {
        return Err(Error::NoCandidates);
    }
    let mut rows = Vec::with_capacity(raw.len());
    for (i, row) in raw.iter().enumerate() {
        if row.is_empty() {
            return Err(Error::EmptyRow(i));
        }
        let mut out = Vec::with_capacity(row.len());
        for (j, &s) in row.iter().enumerate() {
            if !(s >= scale.min && s <= scale.max) {
                return Err(Error::ScoreOutOfRange {
                    candidate: i,
                    review: j,
                    value: s,
                    min: scale.min,
                    max: scale.max,
                });
            }
            out.push(scale.normalize(s).clamp(0.0, 1.0));
        }
        rows.push(out);
    }
    ReviewMatrix::new(rows, scale.tick())
}

/// `‖X − X'‖₁,₁`: the sum of absolute entrywise differences.
pub fn l11_distance(a: &ReviewMatrix, b: &ReviewMatrix) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::ShapeMismatch(
            "review matrices differ in candidate or review counts".into(),
        ));
    }
    Ok(a.rows
        .iter()
        .zip(&b.rows)
        .flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x - y).abs()))
        .sum())
}

/// Per-candidate quality intervals `[lb_i, ub_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalVector {
    lb: Vec<f64>,
    ub: Vec<f64>,
}

impl IntervalVector {
    pub fn new(lb: Vec<f64>, ub: Vec<f64>) -> Result<Self> {
        if lb.len() != ub.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} lower bounds but {} upper bounds",
                lb.len(),
                ub.len()
            )));
        }
        if let Some(i) = (0..lb.len()).find(|&i| !(lb[i] <= ub[i])) {
            return Err(Error::InvalidInput(format!(
                "interval {i} has lb {} > ub {}",
                lb[i], ub[i]
            )));
        }
        Ok(Self { lb, ub })
    }

    /// Symmetric intervals `[c_i − h, c_i + h]`.
    pub fn symmetric(centers: &[f64], half_width: f64) -> Result<Self> {
        Self::new(
            centers.iter().map(|c| c - half_width).collect(),
            centers.iter().map(|c| c + half_width).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.lb.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lb.is_empty()
    }

    pub fn lb(&self) -> &[f64] {
        &self.lb
    }

    pub fn ub(&self) -> &[f64] {
        &self.ub
    }
}

/// Leave-one-out intervals: for each candidate, the range of the row means
/// obtained by deleting one review at a time.
pub fn leave_one_out_intervals(x: &ReviewMatrix) -> Result<IntervalVector> {
    let mut lb = Vec::with_capacity(x.n());
    let mut ub = Vec::with_capacity(x.n());
    for (i, row) in x.rows().iter().enumerate() {
        let m = row.len();
        if m < 2 {
            return Err(Error::TooFewReviews {
                candidate: i,
                count: m,
            });
        }
        let total: f64 = row.iter().sum();
        let (lo, hi) = row
            .iter()
            .map(|s| (total - s) / (m - 1) as f64)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        lb.push(lo);
        ub.push(hi);
    }
    IntervalVector::new(lb, ub)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn normalize_scale_endpoints_and_midpoint() {
        let scale = Scale::new(1.0, 10.0, 1.0).unwrap();
        let x = normalize_reviews(&[vec![10.0, 1.0, 5.0]], &scale).unwrap();
        assert_eq!(x.get(0, 0), 1.0);
        assert_eq!(x.get(0, 1), 0.0);
        assert!(close(x.get(0, 2), 4.0 / 9.0));
        assert!(close(x.tick(), 1.0 / 9.0));
    }

    #[test]
    fn normalize_rejects_out_of_range_with_location() {
        let scale = Scale::new(1.0, 10.0, 1.0).unwrap();
        let err = normalize_reviews(&[vec![3.0], vec![4.0, 11.0]], &scale).unwrap_err();
        match err {
            Error::ScoreOutOfRange {
                candidate, review, ..
            } => assert_eq!((candidate, review), (1, 1)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(Scale::new(5.0, 5.0, 1.0).is_err());
        assert!(Scale::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn matrix_invariants() {
        assert!(matches!(
            ReviewMatrix::new(vec![], 0.1),
            Err(Error::NoCandidates)
        ));
        assert!(matches!(
            ReviewMatrix::new(vec![vec![0.5], vec![]], 0.1),
            Err(Error::EmptyRow(1))
        ));
        assert!(ReviewMatrix::new(vec![vec![1.2]], 0.1).is_err());
        let x = ReviewMatrix::new(vec![vec![0.1, 0.2, 0.3], vec![0.5]], 0.1).unwrap();
        assert_eq!(x.review_counts(), vec![3, 1]);
        assert_eq!(x.m_min(), 1);
        assert_eq!(x.entries(), 4);
    }

    #[test]
    fn l11_examples() {
        let x = ReviewMatrix::new(vec![vec![0.0, 0.5], vec![0.25]], 0.1).unwrap();
        assert_eq!(l11_distance(&x, &x).unwrap(), 0.0);
        let y = x.with_entry(0, 1, 0.0).unwrap();
        assert!(close(l11_distance(&x, &y).unwrap(), 0.5));
        let z = x
            .with_entry(0, 0, 0.2)
            .unwrap()
            .with_entry(1, 0, 0.55)
            .unwrap();
        assert!(close(l11_distance(&x, &z).unwrap(), 0.5));
        let other = ReviewMatrix::new(vec![vec![0.0], vec![0.25]], 0.1).unwrap();
        assert!(matches!(
            l11_distance(&x, &other),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn leave_one_out_examples() {
        let x = ReviewMatrix::new(
            vec![vec![0.2, 0.4, 0.6], vec![0.4, 0.4], vec![0.0, 1.0]],
            0.1,
        )
        .unwrap();
        let iv = leave_one_out_intervals(&x).unwrap();
        assert!(close(iv.lb()[0], 0.3) && close(iv.ub()[0], 0.5));
        assert!(close(iv.lb()[1], 0.4) && close(iv.ub()[1], 0.4));
        assert!(close(iv.lb()[2], 0.0) && close(iv.ub()[2], 1.0));

        let single = ReviewMatrix::new(vec![vec![0.2, 0.4], vec![0.3]], 0.1).unwrap();
        assert!(matches!(
            leave_one_out_intervals(&single),
            Err(Error::TooFewReviews {
                candidate: 1,
                count: 1
            })
        ));
    }

    #[test]
    fn interval_vector_rejects_inverted() {
        assert!(IntervalVector::new(vec![0.5], vec![0.4]).is_err());
        assert!(IntervalVector::new(vec![0.5], vec![0.5, 0.6]).is_err());
    }

    fn matrix_strategy() -> impl Strategy<Value = ReviewMatrix> {
        prop::collection::vec(prop::collection::vec(0.0f64..=1.0, 2..6), 1..12)
            .prop_map(|rows| ReviewMatrix::new(rows, 0.1).unwrap())
    }

    proptest! {
        #[test]
        fn loo_brackets_row_mean(x in matrix_strategy()) {
            let iv = leave_one_out_intervals(&x).unwrap();
            for (i, row) in x.rows().iter().enumerate() {
                let mean = row.iter().sum::<f64>() / row.len() as f64;
                prop_assert!(iv.lb()[i] <= mean + 1e-12);
                prop_assert!(mean <= iv.ub()[i] + 1e-12);
            }
        }

        #[test]
        fn loo_is_permutation_equivariant(x in matrix_strategy(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut perm: Vec<usize> = (0..x.n()).collect();
            perm.shuffle(&mut crate::rng::seeded(seed));
            let iv = leave_one_out_intervals(&x).unwrap();
            let ivp = leave_one_out_intervals(&x.permuted(&perm).unwrap()).unwrap();
            for (i, &src) in perm.iter().enumerate() {
                prop_assert_eq!(ivp.lb()[i], iv.lb()[src]);
                prop_assert_eq!(ivp.ub()[i], iv.ub()[src]);
            }
        }
    }
}
