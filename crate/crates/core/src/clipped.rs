//! The clipped linear lottery: `p_i = clip_[0,1](α·u_i + b)`.
//!
//! The slope `α` is set from a target smoothness and the utility's Lipschitz
//! constant; the intercept `b` is the unique value (up to plateaus that do
//! not affect `p`) making the probabilities sum to the budget. The output is
//! the Euclidean projection of `α·u` onto the capped simplex.
//!
//! Two intercept searches are provided. [`find_intercept_reference`] walks
//! the `2n` sorted breakpoints and evaluates the budget at both ends of each
//! interval, `O(n²)` overall. [`find_intercept`] binary-searches for the
//! same interval and evaluates the budget with the same summation, so both
//! return identical bits in `O(n log n)`.

use serde::Serialize;

use crate::error::{ensure_positive, Error, Result};
use crate::marginals::MarginalVector;
use crate::mechanism::{Calibration, Mechanism};
use crate::review::ReviewMatrix;
use crate::utility::{utility, UtilityKind, UtilitySpec};

/// Boundary tolerance used to classify coordinates as 0, 1 or interior.
pub const POOL_TOL: f64 = 1e-12;

/// `α = L / (2λ)`.
pub fn slope_from_smoothness(smoothness: f64, lipschitz: f64) -> Result<f64> {
    let l = ensure_positive("smoothness", smoothness)?;
    let lambda = ensure_positive("Lipschitz constant", lipschitz)?;
    Ok(l / (2.0 * lambda))
}

/// `Σ_i clip(z_i + b)`, summed in input order.
pub fn total_probability(z: &[f64], b: f64) -> f64 {
    z.iter().map(|&zi| (zi + b).clamp(0.0, 1.0)).sum()
}

/// The `2n` breakpoints `{−z_i} ∪ {1 − z_i}` in ascending order.
fn sorted_breakpoints(z: &[f64]) -> Vec<f64> {
    let mut bps: Vec<f64> = z.iter().map(|&zi| -zi).chain(z.iter().map(|&zi| 1.0 - zi)).collect();
    bps.sort_by(f64::total_cmp);
    bps
}

fn check_inputs(z: &[f64], k: usize) -> Result<()> {
    if z.is_empty() {
        return Err(Error::NoCandidates);
    }
    if k > z.len() {
        return Err(Error::BudgetOutOfRange { k, n: z.len() });
    }
    if let Some(i) = z.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("scaled utility {i} is not finite")));
    }
    Ok(())
}

/// Linear interpolation of the budget on `[lo, hi]`, where the total is
/// affine. A flat interval returns its left end.
fn interpolate(z: &[f64], lo: f64, hi: f64, k: f64) -> f64 {
    let t_lo = total_probability(z, lo);
    let t_hi = total_probability(z, hi);
    if t_hi == t_lo {
        return lo;
    }
    (lo + (k - t_lo) * (hi - lo) / (t_hi - t_lo)).clamp(lo, hi)
}

/// Breakpoint search for the intercept, checking every interval in order.
pub fn find_intercept_reference(z: &[f64], k: usize) -> Result<f64> {
    check_inputs(z, k)?;
    let bps = sorted_breakpoints(z);
    if k == z.len() {
        return Ok(bps[bps.len() - 1]);
    }
    let kf = k as f64;
    for j in 0..bps.len() - 1 {
        let t_lo = total_probability(z, bps[j]);
        let t_hi = total_probability(z, bps[j + 1]);
        if t_lo <= kf && kf <= t_hi {
            return Ok(interpolate(z, bps[j], bps[j + 1], kf));
        }
    }
    // The total at the last breakpoint is exactly n, so some interval brackets k.
    unreachable!("no breakpoint interval brackets the budget")
}

/// Intercept `b` with `Σ clip(z_i + b) = k`.
///
/// The total is 0 at the first breakpoint and non-decreasing in `b` (also in
/// floating point), so the first interval whose right end reaches `k` is the
/// one the reference search stops at.
pub fn find_intercept(z: &[f64], k: usize) -> Result<f64> {
    check_inputs(z, k)?;
    let bps = sorted_breakpoints(z);
    if k == z.len() {
        return Ok(bps[bps.len() - 1]);
    }
    let kf = k as f64;
    let (mut lo, mut hi) = (0, bps.len() - 2);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if total_probability(z, bps[mid + 1]) >= kf {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(interpolate(z, bps[lo], bps[lo + 1], kf))
}

/// Clipped linear marginals with their slope and intercept.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClippedLinearResult {
    pub marginals: MarginalVector,
    pub slope: f64,
    pub intercept: f64,
}

impl ClippedLinearResult {
    pub fn pool(&self) -> LotteryPool {
        lottery_pool(&self.marginals)
    }
}

/// Computes `p_i = clip(slope·u_i + b)` with `Σp = k`.
pub fn clipped_linear_marginals(u: &[f64], slope: f64, k: usize) -> Result<ClippedLinearResult> {
    let slope = ensure_positive("slope", slope)?;
    let z: Vec<f64> = u.iter().map(|&ui| slope * ui).collect();
    let intercept = find_intercept(&z, k)?;
    let p = z.iter().map(|&zi| (zi + intercept).clamp(0.0, 1.0)).collect();
    Ok(ClippedLinearResult {
        marginals: MarginalVector::new(p, k)?,
        slope,
        intercept,
    })
}

/// Partition of candidates by selection probability.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LotteryPool {
    pub accept: Vec<usize>,
    pub pool: Vec<usize>,
    pub reject: Vec<usize>,
}

/// Splits candidates into `p = 1`, `0 < p < 1` and `p = 0` within
/// [`POOL_TOL`].
pub fn lottery_pool(p: &[f64]) -> LotteryPool {
    let mut out = LotteryPool {
        accept: Vec::new(),
        pool: Vec::new(),
        reject: Vec::new(),
    };
    for (i, &v) in p.iter().enumerate() {
        if v >= 1.0 - POOL_TOL {
            out.accept.push(i);
        } else if v <= POOL_TOL {
            out.reject.push(i);
        } else {
            out.pool.push(i);
        }
    }
    out
}

/// The clipped linear lottery as a review-matrix mechanism.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClippedLinear {
    pub utility: UtilityKind,
    pub k: usize,
    pub calibration: Calibration,
}

impl ClippedLinear {
    pub fn new(utility: UtilityKind, k: usize, calibration: Calibration) -> Self {
        Self {
            utility,
            k,
            calibration,
        }
    }

    /// The slope used on matrices shaped like `x`.
    pub fn slope_for(&self, x: &ReviewMatrix) -> Result<f64> {
        match self.calibration {
            Calibration::Smoothness(l) => {
                let spec = UtilitySpec::for_reviews(self.utility, x);
                slope_from_smoothness(l, spec.lipschitz)
            }
            Calibration::Explicit(alpha) => ensure_positive("slope", alpha),
        }
    }

    pub fn run(&self, x: &ReviewMatrix) -> Result<ClippedLinearResult> {
        let u = utility(x, self.utility);
        clipped_linear_marginals(&u, self.slope_for(x)?, self.k)
    }
}

impl Mechanism for ClippedLinear {
    fn name(&self) -> String {
        "clipped_linear".into()
    }

    fn marginals(&self, x: &ReviewMatrix) -> Result<MarginalVector> {
        Ok(self.run(x)?.marginals)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginals::l1;
    use proptest::prelude::*;
    use rand::seq::index::sample;
    use rand::Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn slope_examples() {
        assert!((slope_from_smoothness(2.0 / 3.0, 1.0 / 3.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(slope_from_smoothness(4.0, 1.0).unwrap(), 2.0);
        assert_eq!(
            slope_from_smoothness(8.0, 1.0).unwrap(),
            2.0 * slope_from_smoothness(4.0, 1.0).unwrap()
        );
        assert!(slope_from_smoothness(0.0, 1.0).is_err());
        assert!(slope_from_smoothness(1.0, -1.0).is_err());
    }

    #[test]
    fn intercept_examples() {
        let b = find_intercept(&[0.2, 0.8, 1.4, 2.0], 2).unwrap();
        assert!((b + 0.6).abs() < 1e-12, "{b}");
        assert_eq!(find_intercept(&[0.0; 4], 2).unwrap(), 0.5);
        let b = find_intercept(&[0.0, 10.0], 1).unwrap();
        assert!((-9.0..=0.0).contains(&b), "{b}");
        assert!(matches!(
            find_intercept(&[0.0, 1.0], 3),
            Err(Error::BudgetOutOfRange { k: 3, n: 2 })
        ));
    }

    #[test]
    fn marginal_examples() {
        let r = clipped_linear_marginals(&[0.1, 0.4, 0.7, 1.0], 2.0, 2).unwrap();
        assert!(close(&r.marginals, &[0.0, 0.2, 0.8, 1.0], 1e-12));
        assert!((r.intercept + 0.6).abs() < 1e-12);

        let r = clipped_linear_marginals(&[0.3; 5], 7.0, 2).unwrap();
        assert!(close(&r.marginals, &[0.4; 5], 1e-12));

        let r = clipped_linear_marginals(&[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0], 100.0, 2).unwrap();
        assert!(close(&r.marginals, &[0.0, 0.0, 1.0, 1.0], 1e-12));
    }

    #[test]
    fn pool_examples() {
        let p = lottery_pool(&[0.0, 0.2, 0.8, 1.0]);
        assert_eq!(p.accept, vec![3]);
        assert_eq!(p.pool, vec![1, 2]);
        assert_eq!(p.reject, vec![0]);
        assert_eq!(lottery_pool(&[0.5; 4]).pool.len(), 4);
        assert!(lottery_pool(&[1.0, 0.0, 1.0]).pool.is_empty());
    }

    #[test]
    fn degenerate_budgets_are_exact() {
        let u = [0.3, 0.9, 0.1, 0.5];
        let r0 = clipped_linear_marginals(&u, 1.7, 0).unwrap();
        assert!(r0.marginals.iter().all(|&v| v == 0.0));
        let rn = clipped_linear_marginals(&u, 1.7, 4).unwrap();
        assert!(rn.marginals.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn tightness_witness() {
        for n in [4usize, 100, 1000] {
            let (alpha, eps, k) = (1.5, 1e-3, n / 4);
            let u0 = vec![0.0; n];
            let mut u1 = u0.clone();
            u1[0] = eps;
            let p0 = clipped_linear_marginals(&u0, alpha, k).unwrap();
            let p1 = clipped_linear_marginals(&u1, alpha, k).unwrap();
            let d = p0.marginals.l1_distance(&p1.marginals);
            let expected = 2.0 * alpha * eps * (n - 1) as f64 / n as f64;
            assert!((d - expected).abs() < 1e-9, "n={n}: {d} vs {expected}");
        }
    }

    #[test]
    fn fast_search_matches_reference_bitwise() {
        let mut rng = crate::rng::seeded(3);
        for _ in 0..20_000 {
            let n = rng.random_range(1..24);
            let k = rng.random_range(0..=n);
            let alpha = 10f64.powf(rng.random_range(-2.0..2.0));
            // Repeated values exercise coincident breakpoints.
            let z: Vec<f64> = (0..n)
                .map(|_| {
                    if rng.random_bool(0.3) {
                        alpha * 0.5
                    } else {
                        alpha * rng.random::<f64>()
                    }
                })
                .collect();
            let fast = find_intercept(&z, k).unwrap();
            let reference = find_intercept_reference(&z, k).unwrap();
            assert_eq!(fast.to_bits(), reference.to_bits(), "z={z:?} k={k}");
        }
    }

    #[test]
    fn projection_optimality_against_capped_simplex_vertices() {
        let mut rng = crate::rng::seeded(5);
        for _ in 0..200 {
            let n = rng.random_range(2..12);
            let k = rng.random_range(1..n);
            let alpha = rng.random_range(0.1..5.0);
            let u: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let p = clipped_linear_marginals(&u, alpha, k).unwrap().marginals;
            for _ in 0..50 {
                let set = sample(&mut rng, n, k);
                let mut q = vec![0.0; n];
                for i in set.iter() {
                    q[i] = 1.0;
                }
                let inner: f64 = (0..n).map(|i| (p[i] - alpha * u[i]) * (q[i] - p[i])).sum();
                assert!(inner >= -1e-8, "{inner}");
            }
        }
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, f64, usize)> {
        (1usize..30).prop_flat_map(|n| {
            (
                prop::collection::vec(0.0f64..=1.0, n),
                0.01f64..50.0,
                0..=n,
            )
        })
    }

    proptest! {
        #[test]
        fn budget_and_range((u, alpha, k) in instance()) {
            let r = clipped_linear_marginals(&u, alpha, k).unwrap();
            let sum: f64 = r.marginals.iter().sum();
            prop_assert!((sum - k as f64).abs() <= 1e-9);
            prop_assert!(r.marginals.iter().all(|&v| (0.0..=1.0).contains(&v)));
            for (i, &v) in r.marginals.iter().enumerate() {
                prop_assert_eq!(v, (alpha * u[i] + r.intercept).clamp(0.0, 1.0));
            }
        }

        #[test]
        fn utility_space_smoothness(
            (u, alpha, k) in instance(),
            noise in prop::collection::vec(-0.3f64..0.3, 30),
        ) {
            let v: Vec<f64> = u.iter().zip(&noise).map(|(a, d)| (a + d).clamp(0.0, 1.0)).collect();
            let p = clipped_linear_marginals(&u, alpha, k).unwrap().marginals;
            let q = clipped_linear_marginals(&v, alpha, k).unwrap().marginals;
            prop_assert!(l1(&p, &q) <= 2.0 * alpha * l1(&u, &v) + 1e-9);
        }

        #[test]
        fn budget_monotonicity((u, alpha, k) in instance()) {
            prop_assume!(k < u.len());
            let p = clipped_linear_marginals(&u, alpha, k).unwrap().marginals;
            let q = clipped_linear_marginals(&u, alpha, k + 1).unwrap().marginals;
            for i in 0..u.len() {
                prop_assert!(q[i] >= p[i], "i={} {} < {}", i, q[i], p[i]);
            }
        }

        #[test]
        fn pool_shrinks_with_slope((u, alpha, k) in instance(), factor in 1.0f64..10.0) {
            let wide = clipped_linear_marginals(&u, alpha, k).unwrap().pool();
            let narrow = clipped_linear_marginals(&u, alpha * factor, k).unwrap().pool();
            prop_assert!(narrow.pool.iter().all(|i| wide.pool.contains(i)));
        }

        #[test]
        fn individual_fairness((u, alpha, k) in instance()) {
            let p = clipped_linear_marginals(&u, alpha, k).unwrap().marginals;
            for i in 0..u.len() {
                for j in 0..u.len() {
                    prop_assert!((p[i] - p[j]).abs() <= alpha * (u[i] - u[j]).abs() + 1e-9);
                }
            }
        }
    }
}
