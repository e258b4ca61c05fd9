//! Ex post validity under interval dominance.
//!
//! Candidate `i` dominates `j` when `lb_i > ub_j`. A selected set is valid if
//! it never contains a dominated candidate without its dominator. This
//! module checks validity, tests the core-width condition under which the
//! clipped linear lottery only ever produces valid sets, and projects
//! arbitrary marginals onto the convex hull of valid sets with Frank–Wolfe.
//!
//! The linear minimization step enumerates all `C(n, k)` subsets, so the
//! projection is limited to [`MAX_ENUMERATION_N`] candidates.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::marginals::MarginalVector;
use crate::review::IntervalVector;

/// Largest `n` for which valid subsets are enumerated.
pub const MAX_ENUMERATION_N: usize = 20;

/// The strict dominance pairs `(i, j)` with `lb_i > ub_j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DominanceRelation {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl DominanceRelation {
    /// A relation from explicit pairs. Self-pairs are rejected.
    pub fn from_pairs(n: usize, mut pairs: Vec<(usize, usize)>) -> Result<Self> {
        if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i == j || i >= n || j >= n) {
            return Err(Error::InvalidInput(format!("invalid dominance pair ({i}, {j})")));
        }
        pairs.sort_unstable();
        pairs.dedup();
        Ok(Self { n, pairs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.pairs.binary_search(&(i, j)).is_ok()
    }

    /// For each `j`, the bitmask of candidates dominating it.
    fn dominator_masks(&self) -> Vec<u64> {
        let mut masks = vec![0u64; self.n];
        for &(i, j) in &self.pairs {
            masks[j] |= 1 << i;
        }
        masks
    }
}

pub fn dominance_pairs(intervals: &IntervalVector) -> DominanceRelation {
    let (lb, ub) = (intervals.lb(), intervals.ub());
    let n = intervals.len();
    let pairs = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && lb[i] > ub[j])
        .collect();
    DominanceRelation { n, pairs }
}

/// True iff every member of `set` is accompanied by all its dominators.
pub fn check_ex_post_valid(set: &[usize], relation: &DominanceRelation) -> bool {
    relation
        .pairs
        .iter()
        .all(|&(i, j)| !set.contains(&j) || set.contains(&i))
}

/// `lb_i ≤ u_i − 1/(2α)` and `ub_i ≥ u_i + 1/(2α)` for every candidate.
pub fn core_width_satisfied(intervals: &IntervalVector, u: &[f64], slope: f64) -> Result<bool> {
    let slope = ensure_positive("slope", slope)?;
    if intervals.len() != u.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} intervals for {} utilities",
            intervals.len(),
            u.len()
        )));
    }
    let half = 1.0 / (2.0 * slope);
    Ok((0..u.len()).all(|i| intervals.lb()[i] <= u[i] - half && intervals.ub()[i] >= u[i] + half))
}

fn check_enumerable(n: usize, k: usize) -> Result<()> {
    if n > MAX_ENUMERATION_N {
        return Err(Error::TooLarge {
            n,
            max: MAX_ENUMERATION_N,
        });
    }
    if k > n {
        return Err(Error::BudgetOutOfRange { k, n });
    }
    Ok(())
}

/// All valid size-`k` sets, in lexicographic order.
pub fn valid_subsets(relation: &DominanceRelation, k: usize) -> Result<Vec<Vec<usize>>> {
    let n = relation.n;
    check_enumerable(n, k)?;
    let masks = relation.dominator_masks();
    Ok((0..n)
        .combinations(k)
        .filter(|set| is_closed(set, &masks))
        .collect())
}

fn is_closed(set: &[usize], dominators: &[u64]) -> bool {
    let mask: u64 = set.iter().map(|&i| 1u64 << i).sum();
    set.iter().all(|&j| dominators[j] & !mask == 0)
}

/// A valid size-`k` set minimizing `Σ_{i∈S} weights_i`, by enumeration.
/// Ties go to the lexicographically first set.
pub fn min_weight_valid_subset(weights: &[f64], relation: &DominanceRelation, k: usize) -> Result<Vec<usize>> {
    let n = relation.n;
    if weights.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} weights for {n} candidates",
            weights.len()
        )));
    }
    check_enumerable(n, k)?;
    let masks = relation.dominator_masks();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for set in (0..n).combinations(k) {
        if !is_closed(&set, &masks) {
            continue;
        }
        let w: f64 = set.iter().map(|&i| weights[i]).sum();
        if best.as_ref().is_none_or(|(bw, _)| w < *bw) {
            best = Some((w, set));
        }
    }
    best.map(|(_, s)| s).ok_or(Error::NoValidSubset { k })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrankWolfeVariant {
    /// Away steps and exact line search; the objective never increases.
    #[default]
    AwayStep,
    /// Step size `2/(t + 2)` with no away steps.
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrankWolfeOptions {
    pub max_iter: usize,
    /// Stop once the duality gap is at most this.
    pub tol: f64,
    pub variant: FrankWolfeVariant,
}

impl Default for FrankWolfeOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            tol: 1e-6,
            variant: FrankWolfeVariant::AwayStep,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionResult {
    pub marginals: MarginalVector,
    /// Valid sets and their weights; the marginals are their mixture.
    pub mixture: Vec<(Vec<usize>, f64)>,
    pub iterations: usize,
    pub gap: f64,
    /// `‖p − p_lin‖²` before each step and at the end.
    pub objective_trace: Vec<f64>,
}

fn indicator(n: usize, set: &[usize]) -> Vec<f64> {
    let mut v = vec![0.0; n];
    for &i in set {
        v[i] = 1.0;
    }
    v
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn objective(x: &[f64], target: &[f64]) -> f64 {
    x.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Projects `target` onto the convex hull of valid size-`k` sets in
/// Euclidean distance.
pub fn project_valid_marginals(
    target: &MarginalVector,
    relation: &DominanceRelation,
    options: &FrankWolfeOptions,
) -> Result<ProjectionResult> {
    let n = relation.n;
    let k = target.k();
    if target.n() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} marginals for a relation over {n} candidates",
            target.n()
        )));
    }
    let t: &[f64] = target;
    let neg: Vec<f64> = t.iter().map(|v| -v).collect();
    let start = min_weight_valid_subset(&neg, relation, k)?;

    let mut active: Vec<(Vec<usize>, f64)> = vec![(start.clone(), 1.0)];
    let mut x = indicator(n, &start);
    let mut trace = Vec::new();
    let mut gap = f64::INFINITY;
    let mut iterations = 0;

    while iterations < options.max_iter {
        let grad: Vec<f64> = x.iter().zip(t).map(|(a, b)| 2.0 * (a - b)).collect();
        trace.push(objective(&x, t));
        let s = min_weight_valid_subset(&grad, relation, k)?;
        let s_vec = indicator(n, &s);
        let d_fw: Vec<f64> = s_vec.iter().zip(&x).map(|(a, b)| a - b).collect();
        gap = -dot(&grad, &d_fw);
        if gap <= options.tol {
            break;
        }
        iterations += 1;

        match options.variant {
            FrankWolfeVariant::Classical => {
                let gamma = 2.0 / (iterations as f64 + 1.0);
                step_toward(&mut active, &mut x, &s, &s_vec, gamma);
            }
            FrankWolfeVariant::AwayStep => {
                let (away_idx, away_score) = active
                    .iter()
                    .enumerate()
                    .map(|(idx, (set, _))| (idx, set.iter().map(|&i| grad[i]).sum::<f64>()))
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                    .expect("active set is never empty");
                let away_gap = away_score - dot(&grad, &x);
                if gap >= away_gap {
                    let gamma = line_search(&grad, &d_fw, 1.0);
                    step_toward(&mut active, &mut x, &s, &s_vec, gamma);
                } else {
                    let w = active[away_idx].1;
                    let v_vec = indicator(n, &active[away_idx].0);
                    let d: Vec<f64> = x.iter().zip(&v_vec).map(|(a, b)| a - b).collect();
                    let gamma_max = w / (1.0 - w);
                    let gamma = line_search(&grad, &d, gamma_max);
                    step_away(&mut active, &mut x, away_idx, &v_vec, gamma, gamma >= gamma_max);
                }
            }
        }
    }

    let total: f64 = active.iter().map(|(_, w)| w).sum();
    let mut p = vec![0.0; n];
    for (set, w) in active.iter_mut() {
        *w /= total;
        for &i in set.iter() {
            p[i] += *w;
        }
    }
    for v in &mut p {
        *v = v.clamp(0.0, 1.0);
    }
    trace.push(objective(&p, t));
    active.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(ProjectionResult {
        marginals: MarginalVector::new(p, k)?,
        mixture: active,
        iterations,
        gap,
        objective_trace: trace,
    })
}

/// Minimizer of the quadratic along `d` on `[0, gamma_max]`.
fn line_search(grad: &[f64], d: &[f64], gamma_max: f64) -> f64 {
    let dd = dot(d, d);
    if dd <= 0.0 {
        return 0.0;
    }
    (-dot(grad, d) / (2.0 * dd)).clamp(0.0, gamma_max)
}

fn step_toward(active: &mut Vec<(Vec<usize>, f64)>, x: &mut [f64], s: &[usize], s_vec: &[f64], gamma: f64) {
    for (_, w) in active.iter_mut() {
        *w *= 1.0 - gamma;
    }
    match active.iter_mut().find(|(set, _)| set.as_slice() == s) {
        Some((_, w)) => *w += gamma,
        None => active.push((s.to_vec(), gamma)),
    }
    active.retain(|(_, w)| *w > 0.0);
    for (xi, si) in x.iter_mut().zip(s_vec) {
        *xi = (1.0 - gamma) * *xi + gamma * si;
    }
}

fn step_away(
    active: &mut Vec<(Vec<usize>, f64)>,
    x: &mut [f64],
    away: usize,
    v_vec: &[f64],
    gamma: f64,
    drop: bool,
) {
    for (_, w) in active.iter_mut() {
        *w *= 1.0 + gamma;
    }
    if drop {
        active.swap_remove(away);
    } else {
        active[away].1 -= gamma;
    }
    for (xi, vi) in x.iter_mut().zip(v_vec) {
        *xi = (1.0 + gamma) * *xi - gamma * vi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clipped::clipped_linear_marginals;
    use crate::sampler::systematic_outcomes;
    use rand::Rng;

    fn rel(n: usize, pairs: &[(usize, usize)]) -> DominanceRelation {
        DominanceRelation::from_pairs(n, pairs.to_vec()).unwrap()
    }

    #[test]
    fn dominance_examples() {
        let iv = IntervalVector::new(vec![0.8, 0.5, 0.1], vec![0.9, 0.7, 0.3]).unwrap();
        assert_eq!(dominance_pairs(&iv).pairs(), &[(0, 1), (0, 2), (1, 2)]);
        let same = IntervalVector::new(vec![0.2; 3], vec![0.4; 3]).unwrap();
        assert!(dominance_pairs(&same).is_empty());
        let touching = IntervalVector::new(vec![0.5, 0.2], vec![0.7, 0.5]).unwrap();
        assert!(dominance_pairs(&touching).is_empty());
    }

    #[test]
    fn validity_examples() {
        let d = rel(3, &[(1, 2)]);
        assert!(!check_ex_post_valid(&[2], &d));
        assert!(check_ex_post_valid(&[1], &d));
        assert!(check_ex_post_valid(&[0, 2], &rel(3, &[])));
    }

    #[test]
    fn core_width_examples() {
        let wide = IntervalVector::new(vec![0.25], vec![0.75]).unwrap();
        assert!(core_width_satisfied(&wide, &[0.5], 2.0).unwrap());
        let narrow = IntervalVector::new(vec![0.4], vec![0.6]).unwrap();
        assert!(!core_width_satisfied(&narrow, &[0.5], 2.0).unwrap());
    }

    #[test]
    fn min_weight_examples() {
        let w = [0.5, 0.2, 0.3];
        assert_eq!(min_weight_valid_subset(&w, &rel(3, &[(0, 2)]), 1).unwrap(), vec![1]);
        assert_eq!(min_weight_valid_subset(&[0.4, 0.1, 0.3, 0.2], &rel(4, &[]), 2).unwrap(), vec![1, 3]);
        let chain = rel(3, &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(valid_subsets(&chain, 1).unwrap(), vec![vec![0]]);
        assert_eq!(min_weight_valid_subset(&[0.9, 0.1, 0.0], &chain, 1).unwrap(), vec![0]);
        let cyclic = rel(2, &[(0, 1), (1, 0)]);
        assert!(matches!(
            min_weight_valid_subset(&[0.0, 0.0], &cyclic, 1),
            Err(Error::NoValidSubset { k: 1 })
        ));
    }

    #[test]
    fn segment_projection() {
        let p = MarginalVector::new(vec![0.5, 0.2, 0.3], 1).unwrap();
        let r = project_valid_marginals(&p, &rel(3, &[(0, 2)]), &FrankWolfeOptions::default()).unwrap();
        let expected = [0.65, 0.35, 0.0];
        for i in 0..3 {
            assert!((r.marginals[i] - expected[i]).abs() < 1e-6, "{:?}", r.marginals);
        }
        assert!(r.gap <= 1e-6);
    }

    #[test]
    fn fixed_points() {
        let d = rel(4, &[(0, 3)]);
        let p = MarginalVector::new(vec![0.9, 0.4, 0.5, 0.2], 2).unwrap();
        let r = project_valid_marginals(&p, &d, &FrankWolfeOptions::default()).unwrap();
        assert!(r.marginals.l1_distance(&p) < 1e-5, "{:?}", r.marginals);

        let p = MarginalVector::new(vec![0.3, 0.6, 0.4, 0.7], 2).unwrap();
        let r = project_valid_marginals(&p, &rel(4, &[]), &FrankWolfeOptions::default()).unwrap();
        assert!(r.marginals.l1_distance(&p) < 1e-5);
    }

    #[test]
    fn away_step_objective_is_monotone_and_certified() {
        let mut rng = crate::rng::seeded(21);
        for _ in 0..50 {
            let n = rng.random_range(3..8);
            let k = rng.random_range(1..n);
            let u: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let half = rng.random_range(0.0..0.2);
            let iv = IntervalVector::symmetric(&u, half).unwrap();
            let d = dominance_pairs(&iv);
            let p = clipped_linear_marginals(&u, rng.random_range(0.5..20.0), k).unwrap().marginals;
            let r = project_valid_marginals(&p, &d, &FrankWolfeOptions::default()).unwrap();
            for w in r.objective_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{:?}", r.objective_trace);
            }
            assert!(r.gap <= 1e-6);
            let mut q = vec![0.0; n];
            for (set, w) in &r.mixture {
                assert!(check_ex_post_valid(set, &d));
                assert_eq!(set.len(), k);
                for &i in set {
                    q[i] += w;
                }
            }
            for i in 0..n {
                assert!((q[i] - r.marginals[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn classical_variant_converges_slowly_but_stays_feasible() {
        let p = MarginalVector::new(vec![0.5, 0.2, 0.3], 1).unwrap();
        let opts = FrankWolfeOptions {
            variant: FrankWolfeVariant::Classical,
            ..FrankWolfeOptions::default()
        };
        let r = project_valid_marginals(&p, &rel(3, &[(0, 2)]), &opts).unwrap();
        assert!((r.marginals[0] - 0.65).abs() < 1e-2);
        assert_eq!(r.marginals[2], 0.0);
    }

    #[test]
    fn core_width_makes_every_systematic_outcome_valid() {
        let mut rng = crate::rng::seeded(22);
        for _ in 0..100 {
            let n = rng.random_range(2..9);
            let k = rng.random_range(1..n);
            let alpha = rng.random_range(0.5..10.0);
            let u: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let lb = u.iter().map(|x| x - 0.5 / alpha - rng.random_range(0.0..0.1)).collect();
            let ub = u.iter().map(|x| x + 0.5 / alpha + rng.random_range(0.0..0.1)).collect();
            let iv = IntervalVector::new(lb, ub).unwrap();
            assert!(core_width_satisfied(&iv, &u, alpha).unwrap());
            let d = dominance_pairs(&iv);
            let p = clipped_linear_marginals(&u, alpha, k).unwrap().marginals;
            for &(i, j) in d.pairs() {
                assert!(p[i] == 1.0 || p[j] == 0.0);
            }
            for (set, _) in systematic_outcomes(&p) {
                assert!(check_ex_post_valid(&set, &d), "{set:?} {d:?}");
            }
        }
    }
}
