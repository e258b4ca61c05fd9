//! Top-`k` softmax selection.
//!
//! A draw adds i.i.d. Gumbel(0, τ) noise to every utility and keeps the `k`
//! largest, which is the same law as drawing `k` times without replacement
//! from the renormalized softmax. Marginals are estimated by Monte Carlo, or
//! computed exactly for small `n` by summing sequence probabilities over all
//! ordered `k`-prefixes.
//!
//! [`SoftmaxBatch`] evaluates many utility vectors on one shared stream of
//! noise (common random numbers). Differences between marginals of nearby
//! vectors then carry far less Monte Carlo noise than the marginals
//! themselves.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

use crate::error::{ensure_positive, Error, Result};
use crate::marginals::{MarginalVector, SetDistribution};
use crate::mechanism::{BatchOutput, Calibration, Mechanism};
use crate::review::ReviewMatrix;
use crate::rng::{chunks, seeded, stream};
use crate::utility::{utility, UtilityKind, UtilitySpec};

/// Largest `n` accepted by [`softmax_marginals_exact`].
pub const EXACT_MAX_N: usize = 10;

/// `τ = 2λ / (e·L)`.
pub fn temperature_from_smoothness(smoothness: f64, lipschitz: f64) -> Result<f64> {
    let l = ensure_positive("smoothness", smoothness)?;
    let lambda = ensure_positive("Lipschitz constant", lipschitz)?;
    Ok(2.0 * lambda / (std::f64::consts::E * l))
}

/// One Gumbel(0, τ) variate by inversion, with the uniform kept off 0.
#[inline]
fn gumbel(rng: &mut ChaCha8Rng, tau: f64) -> f64 {
    let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    -tau * (-u.ln()).ln()
}

fn check_budget(n: usize, k: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::NoCandidates);
    }
    if k == 0 || k > n {
        return Err(Error::BudgetOutOfRange { k, n });
    }
    Ok(())
}

/// Moves the indices of the `k` largest `keys` to the front of `idx`.
#[inline]
fn select_top(keys: &[f64], idx: &mut [usize], k: usize) {
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, |&a, &b| keys[b].total_cmp(&keys[a]));
    }
}

/// One Gumbel-top-`k` draw; returns sorted indices.
pub fn gumbel_topk_sample(u: &[f64], tau: f64, k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    ensure_positive("temperature", tau)?;
    check_budget(u.len(), k)?;
    let keys: Vec<f64> = u.iter().map(|&ui| ui + gumbel(rng, tau)).collect();
    let mut idx: Vec<usize> = (0..u.len()).collect();
    select_top(&keys, &mut idx, k);
    let mut set = idx[..k].to_vec();
    set.sort_unstable();
    Ok(set)
}

/// [`gumbel_topk_sample`] with a fresh generator seeded by `seed`.
pub fn gumbel_topk_sample_seeded(u: &[f64], tau: f64, k: usize, seed: u64) -> Result<Vec<usize>> {
    gumbel_topk_sample(u, tau, k, &mut seeded(seed))
}

/// Monte Carlo marginals with per-coordinate binomial standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McMarginals {
    pub marginals: MarginalVector,
    pub stderr: Vec<f64>,
    pub draws: usize,
}

/// Per-vector Monte Carlo summary from a [`SoftmaxBatch`] run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VectorEstimate {
    pub marginals: McMarginals,
    /// Mean utility of the selected set, `p̂·u`.
    pub selected_utility: f64,
    /// Standard error of `selected_utility`.
    pub selected_utility_stderr: f64,
}

/// Estimate of `‖p_a − p_b‖₁` for one pair of vectors in a batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairEstimate {
    pub l1: f64,
    /// Standard error from the per-draw symmetric difference `|S_a Δ S_b|`.
    /// It is exact when the coupling is monotone, as for single-entry
    /// perturbations.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchEstimate {
    pub vectors: Vec<VectorEstimate>,
    pub pairs: Vec<PairEstimate>,
}

/// Gumbel-top-`k` Monte Carlo over several utility vectors with shared noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftmaxBatch {
    pub tau: f64,
    pub k: usize,
    pub draws: usize,
    pub seed: u64,
}

struct ChunkTotals {
    counts: Vec<Vec<u32>>,
    util_sum: Vec<f64>,
    util_sq: Vec<f64>,
    pair_sum: Vec<f64>,
    pair_sq: Vec<f64>,
}

impl SoftmaxBatch {
    pub fn run(&self, utilities: &[Vec<f64>], pairs: &[(usize, usize)]) -> Result<BatchEstimate> {
        ensure_positive("temperature", self.tau)?;
        if self.draws == 0 {
            return Err(Error::InvalidInput("Monte Carlo draw count must be >= 1".into()));
        }
        let n = utilities.first().map_or(0, Vec::len);
        if utilities.iter().any(|u| u.len() != n) {
            return Err(Error::ShapeMismatch("utility vectors differ in length".into()));
        }
        check_budget(n, self.k)?;
        if let Some(&(a, b)) = pairs.iter().find(|&&(a, b)| a >= utilities.len() || b >= utilities.len()) {
            return Err(Error::InvalidInput(format!("pair ({a}, {b}) is out of range")));
        }

        let parts: Vec<ChunkTotals> = chunks(self.draws)
            .into_par_iter()
            .map(|(index, len)| self.run_chunk(utilities, pairs, n, index, len))
            .collect();

        let v = utilities.len();
        let mut counts = vec![vec![0u64; n]; v];
        let mut util_sum = vec![0.0; v];
        let mut util_sq = vec![0.0; v];
        let mut pair_sum = vec![0.0; pairs.len()];
        let mut pair_sq = vec![0.0; pairs.len()];
        for part in &parts {
            for (acc, c) in counts.iter_mut().zip(&part.counts) {
                for (a, &ci) in acc.iter_mut().zip(c) {
                    *a += u64::from(ci);
                }
            }
            add_into(&mut util_sum, &part.util_sum);
            add_into(&mut util_sq, &part.util_sq);
            add_into(&mut pair_sum, &part.pair_sum);
            add_into(&mut pair_sq, &part.pair_sq);
        }

        let draws = self.draws as f64;
        let mut vectors = Vec::with_capacity(v);
        for j in 0..v {
            let p: Vec<f64> = counts[j].iter().map(|&c| c as f64 / draws).collect();
            let stderr = p.iter().map(|&pi| (pi * (1.0 - pi) / draws).sqrt()).collect();
            let (mean, se) = mean_and_stderr(util_sum[j], util_sq[j], self.draws);
            vectors.push(VectorEstimate {
                marginals: McMarginals {
                    marginals: MarginalVector::new(p, self.k)?,
                    stderr,
                    draws: self.draws,
                },
                selected_utility: mean,
                selected_utility_stderr: se,
            });
        }
        let pairs = pairs
            .iter()
            .enumerate()
            .map(|(q, &(a, b))| PairEstimate {
                l1: counts[a]
                    .iter()
                    .zip(&counts[b])
                    .map(|(&x, &y)| x.abs_diff(y) as f64)
                    .sum::<f64>()
                    / draws,
                stderr: mean_and_stderr(pair_sum[q], pair_sq[q], self.draws).1,
            })
            .collect();
        Ok(BatchEstimate { vectors, pairs })
    }

    fn run_chunk(
        &self,
        utilities: &[Vec<f64>],
        pairs: &[(usize, usize)],
        n: usize,
        index: u64,
        len: usize,
    ) -> ChunkTotals {
        let v = utilities.len();
        let k = self.k;
        let mut rng = stream(self.seed, index);
        let mut totals = ChunkTotals {
            counts: vec![vec![0u32; n]; v],
            util_sum: vec![0.0; v],
            util_sq: vec![0.0; v],
            pair_sum: vec![0.0; pairs.len()],
            pair_sq: vec![0.0; pairs.len()],
        };
        let mut noise = vec![0.0; n];
        let mut keys = vec![0.0; n];
        let mut idx: Vec<usize> = Vec::with_capacity(n);
        let mut member = vec![vec![false; n]; v];
        let mut chosen: Vec<Vec<usize>> = vec![Vec::with_capacity(k); v];

        for _ in 0..len {
            for g in noise.iter_mut() {
                *g = gumbel(&mut rng, self.tau);
            }
            for j in 0..v {
                let u = &utilities[j];
                for i in 0..n {
                    keys[i] = u[i] + noise[i];
                }
                idx.clear();
                idx.extend(0..n);
                select_top(&keys, &mut idx, k);
                for &i in &chosen[j] {
                    member[j][i] = false;
                }
                chosen[j].clear();
                let mut selected = 0.0;
                for &i in &idx[..k] {
                    member[j][i] = true;
                    chosen[j].push(i);
                    totals.counts[j][i] += 1;
                    selected += u[i];
                }
                totals.util_sum[j] += selected;
                totals.util_sq[j] += selected * selected;
            }
            for (q, &(a, b)) in pairs.iter().enumerate() {
                let shared = chosen[a].iter().filter(|&&i| member[b][i]).count();
                let w = (2 * (k - shared)) as f64;
                totals.pair_sum[q] += w;
                totals.pair_sq[q] += w * w;
            }
        }
        totals
    }
}

fn add_into(acc: &mut [f64], part: &[f64]) {
    for (a, &p) in acc.iter_mut().zip(part) {
        *a += p;
    }
}

/// Sample mean and its standard error from a sum and a sum of squares.
fn mean_and_stderr(sum: f64, sq: f64, count: usize) -> (f64, f64) {
    let n = count as f64;
    let mean = sum / n;
    if count < 2 {
        return (mean, 0.0);
    }
    let var = ((sq - n * mean * mean) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

/// Inclusion frequencies over `draws` independent Gumbel-top-`k` draws.
pub fn softmax_marginals_mc(u: &[f64], tau: f64, k: usize, draws: usize, seed: u64) -> Result<McMarginals> {
    let batch = SoftmaxBatch { tau, k, draws, seed };
    let mut est = batch.run(&[u.to_vec()], &[])?;
    Ok(est.vectors.swap_remove(0).marginals)
}

/// Exact marginals and set distribution by enumerating ordered prefixes.
pub fn softmax_marginals_exact(u: &[f64], tau: f64, k: usize) -> Result<(MarginalVector, SetDistribution)> {
    ensure_positive("temperature", tau)?;
    let n = u.len();
    if n > EXACT_MAX_N {
        return Err(Error::TooLarge {
            n,
            max: EXACT_MAX_N,
        });
    }
    check_budget(n, k)?;
    let mut mass: BTreeMap<u32, f64> = BTreeMap::new();
    prefix_mass(u, tau, k, 0, 1.0, &mut mass);
    let entries = mass.into_iter().map(|(mask, w)| {
        let set: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        (set, w)
    });
    let dist = SetDistribution::new(n, k, entries)?;
    Ok((dist.marginals(), dist))
}

/// Adds the probability of every ordered completion of the prefix `taken`.
fn prefix_mass(u: &[f64], tau: f64, remaining: usize, taken: u32, prob: f64, mass: &mut BTreeMap<u32, f64>) {
    if remaining == 0 {
        *mass.entry(taken).or_insert(0.0) += prob;
        return;
    }
    let free = || (0..u.len()).filter(move |&i| taken & (1 << i) == 0);
    let top = free().map(|i| u[i]).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<(usize, f64)> = free().map(|i| (i, ((u[i] - top) / tau).exp())).collect();
    let total: f64 = weights.iter().map(|&(_, w)| w).sum();
    for (i, w) in weights {
        if w > 0.0 {
            prefix_mass(u, tau, remaining - 1, taken | (1 << i), prob * w / total, mass);
        }
    }
}

/// Top-`k` softmax as a review-matrix mechanism, estimated by Monte Carlo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopKSoftmax {
    pub utility: UtilityKind,
    pub k: usize,
    pub calibration: Calibration,
    pub draws: usize,
    pub seed: u64,
}

impl TopKSoftmax {
    pub fn temperature_for(&self, x: &ReviewMatrix) -> Result<f64> {
        match self.calibration {
            Calibration::Smoothness(l) => {
                let spec = UtilitySpec::for_reviews(self.utility, x);
                temperature_from_smoothness(l, spec.lipschitz)
            }
            Calibration::Explicit(tau) => ensure_positive("temperature", tau),
        }
    }

    /// Runs the shared-noise estimator on every matrix in `xs`.
    pub fn estimate(&self, xs: &[ReviewMatrix], pairs: &[(usize, usize)]) -> Result<BatchEstimate> {
        let first = xs.first().ok_or(Error::NoCandidates)?;
        let tau = self.temperature_for(first)?;
        let utilities: Vec<Vec<f64>> = xs.iter().map(|x| utility(x, self.utility).into_inner()).collect();
        SoftmaxBatch {
            tau,
            k: self.k,
            draws: self.draws,
            seed: self.seed,
        }
        .run(&utilities, pairs)
    }
}

impl Mechanism for TopKSoftmax {
    fn name(&self) -> String {
        "softmax".into()
    }

    fn marginals(&self, x: &ReviewMatrix) -> Result<MarginalVector> {
        let mut est = self.estimate(std::slice::from_ref(x), &[])?;
        Ok(est.vectors.swap_remove(0).marginals.marginals)
    }

    fn evaluate(&self, xs: &[ReviewMatrix], pairs: &[(usize, usize)]) -> Result<BatchOutput> {
        let est = self.estimate(xs, pairs)?;
        Ok(BatchOutput {
            marginals: est.vectors.into_iter().map(|v| v.marginals.marginals).collect(),
            pair_l1_stderr: Some(est.pairs.iter().map(|p| p.stderr).collect()),
        })
    }
}
