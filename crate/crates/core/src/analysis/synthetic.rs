use rand_distr::{Beta, Distribution};

use crate::error::{ensure_positive, Error, Result};
use crate::review::ReviewMatrix;
use crate::rng::seeded;

/// `n × m` i.i.d. Beta(a, a) scores rounded to the nearest of `levels`
/// equally spaced values in `[0, 1]`.
pub fn synthetic_beta_reviews(n: usize, m: usize, shape: f64, levels: usize, seed: u64) -> Result<ReviewMatrix> {
    let a = ensure_positive("Beta shape", shape)?;
    if levels < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 levels, got {levels}")));
    }
    if n == 0 || m == 0 {
        return Err(Error::InvalidInput("synthetic data needs n >= 1 and m >= 1".into()));
    }
    let beta = Beta::new(a, a).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let steps = (levels - 1) as f64;
    let mut rng = seeded(seed);
    let rows = (0..n)
        .map(|_| {
            (0..m)
                .map(|_| (beta.sample(&mut rng) * steps).round() / steps)
                .collect()
        })
        .collect();
    ReviewMatrix::new(rows, 1.0 / steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn variance(x: &ReviewMatrix) -> f64 {
        let all: Vec<f64> = x.rows().iter().flatten().copied().collect();
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / all.len() as f64
    }

    #[test]
    fn shape_levels_and_determinism() {
        let x = synthetic_beta_reviews(200, 5, 2.0, 10, 42).unwrap();
        assert_eq!(x.n(), 200);
        assert_eq!(x.review_counts(), vec![5; 200]);
        assert!((x.tick() - 1.0 / 9.0).abs() < 1e-15);
        for &s in x.rows().iter().flatten() {
            let level = s * 9.0;
            assert!((level - level.round()).abs() < 1e-9);
        }
        assert_eq!(x, synthetic_beta_reviews(200, 5, 2.0, 10, 42).unwrap());
        assert!(synthetic_beta_reviews(10, 2, 2.0, 1, 0).is_err());
    }

    #[test]
    fn variance_falls_with_shape() {
        let v: Vec<f64> = [1.0, 4.0, 40.0]
            .iter()
            .map(|&a| variance(&synthetic_beta_reviews(500, 5, a, 1000, 3).unwrap()))
            .collect();
        assert!(v[0] > v[1] && v[1] > v[2], "{v:?}");
        // Beta(a, a) has variance 1/(4(2a + 1)).
        assert!((v[1] - 1.0 / 36.0).abs() < 0.003);
    }
}
