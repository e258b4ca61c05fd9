//! Systematic sampling: a size-`k` set whose inclusion probabilities equal a
//! given marginal vector exactly.
//!
//! Candidates with `p_i = 1` are always selected and those with `p_i = 0`
//! never are. The remaining candidates occupy consecutive intervals of
//! length `p_i` in input order. One uniform offset `U ∈ [0, 1)` places the
//! grid points `U, U + 1, …`, and each candidate whose interval contains a
//! grid point is selected. Since `p_i ≤ 1`, no interval holds two points.
//! The joint law depends on the input order; the marginals do not.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::marginals::MarginalVector;
use crate::rng::{chunks, seeded, stream, CHUNK};

/// Intervals narrower than this are never selected, and probabilities
/// within this of 1 are always selected.
pub const MIN_WIDTH: f64 = 1e-12;

/// Splits candidates into those always selected and those left to the grid.
fn split(p: &MarginalVector) -> (Vec<usize>, Vec<usize>) {
    let mut forced = Vec::new();
    let mut open = Vec::new();
    for (i, &pi) in p.iter().enumerate() {
        if pi >= 1.0 - MIN_WIDTH {
            forced.push(i);
        } else if pi >= MIN_WIDTH {
            open.push(i);
        }
    }
    (forced, open)
}

/// Selects from `p` with the grid offset `offset ∈ [0, 1)`.
pub fn systematic_select(p: &MarginalVector, offset: f64) -> Vec<usize> {
    let k = p.k();
    let (mut out, open) = split(p);
    out.truncate(k);
    let mut next = offset;
    let mut cum = 0.0;
    for &i in &open {
        cum += p[i];
        if out.len() < k && next < cum {
            out.push(i);
            next += 1.0;
        }
    }
    // Rounding can leave the last grid point just past the final interval.
    for &i in open.iter().rev() {
        if out.len() == k {
            break;
        }
        if !out.contains(&i) {
            out.push(i);
        }
    }
    out.sort_unstable();
    out
}

/// One systematic draw using `rng` for the offset.
pub fn systematic_sample(p: &MarginalVector, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let offset: f64 = rng.random();
    systematic_select(p, offset)
}

/// One systematic draw from a generator seeded with `seed`.
pub fn systematic_sample_seeded(p: &MarginalVector, seed: u64) -> Vec<usize> {
    systematic_sample(p, &mut seeded(seed))
}

/// `draws` independent systematic draws. Chunk `c` uses stream `(seed, c)`.
pub fn systematic_samples(p: &MarginalVector, draws: usize, seed: u64) -> Vec<Vec<usize>> {
    let parts: Vec<Vec<Vec<usize>>> = chunks(draws)
        .into_par_iter()
        .map(|(index, len)| {
            let mut rng = stream(seed, index);
            (0..len).map(|_| systematic_sample(p, &mut rng)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(draws.max(CHUNK));
    for part in parts {
        out.extend(part);
    }
    out
}

/// The exact joint law of systematic sampling: every reachable set with the
/// probability of the offsets that produce it.
///
/// The selected set only changes where the offset crosses the fractional
/// part of a cumulative sum, so one probe per gap covers every outcome.
pub fn systematic_outcomes(p: &MarginalVector) -> Vec<(Vec<usize>, f64)> {
    let mut cuts = vec![0.0, 1.0];
    let mut cum = 0.0;
    for i in split(p).1 {
        cum += p[i];
        cuts.push(cum - cum.floor());
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut out: Vec<(Vec<usize>, f64)> = Vec::new();
    for w in cuts.windows(2) {
        let width = w[1] - w[0];
        if width <= 0.0 {
            continue;
        }
        let set = systematic_select(p, 0.5 * (w[0] + w[1]));
        match out.iter_mut().find(|(s, _)| *s == set) {
            Some((_, mass)) => *mass += width,
            None => out.push((set, width)),
        }
    }
    out
}

/// Empirical inclusion frequencies of `draws` systematic draws, without
/// storing the sets.
pub fn inclusion_frequencies(p: &MarginalVector, draws: usize, seed: u64) -> Result<Vec<f64>> {
    let parts: Vec<Vec<u64>> = chunks(draws)
        .into_par_iter()
        .map(|(index, len)| {
            let mut rng = stream(seed, index);
            let mut counts = vec![0u64; p.n()];
            for _ in 0..len {
                for i in systematic_sample(p, &mut rng) {
                    counts[i] += 1;
                }
            }
            counts
        })
        .collect();
    let mut counts = vec![0u64; p.n()];
    for part in parts {
        for (c, x) in counts.iter_mut().zip(part) {
            *c += x;
        }
    }
    Ok(counts.into_iter().map(|c| c as f64 / draws as f64).collect())
}
