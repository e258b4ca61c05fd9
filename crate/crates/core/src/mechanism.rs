//! The common interface for selection rules that map a review matrix to
//! marginal selection probabilities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::marginals::MarginalVector;
use crate::review::ReviewMatrix;

/// How a mechanism's scale parameter is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Calibration {
    /// Target smoothness `L`; the slope or temperature follows from the
    /// utility's Lipschitz constant.
    Smoothness(f64),
    /// The slope (clipped linear) or temperature (softmax) itself.
    Explicit(f64),
}

/// Marginals for a batch of review matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutput {
    pub marginals: Vec<MarginalVector>,
    /// Monte Carlo standard error of `‖p_a − p_b‖₁` for each requested pair,
    /// or `None` for deterministic mechanisms.
    pub pair_l1_stderr: Option<Vec<f64>>,
}

impl BatchOutput {
    /// `‖p_a − p_b‖₁` for each pair.
    pub fn pair_l1(&self, pairs: &[(usize, usize)]) -> Vec<f64> {
        pairs
            .iter()
            .map(|&(a, b)| self.marginals[a].l1_distance(&self.marginals[b]))
            .collect()
    }
}

pub trait Mechanism: Sync {
    fn name(&self) -> String;

    fn marginals(&self, x: &ReviewMatrix) -> Result<MarginalVector>;

    /// Marginals for every matrix in `xs`.
    ///
    /// Monte Carlo mechanisms override this to share random draws across the
    /// batch, which makes differences between nearby matrices far less noisy
    /// than independent estimates would be.
    fn evaluate(&self, xs: &[ReviewMatrix], pairs: &[(usize, usize)]) -> Result<BatchOutput> {
        let _ = pairs;
        let marginals = xs
            .par_iter()
            .map(|x| self.marginals(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(BatchOutput {
            marginals,
            pair_l1_stderr: None,
        })
    }
}
