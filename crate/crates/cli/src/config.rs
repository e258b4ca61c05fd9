//! Run configuration: one TOML document, overridable from the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use smoothlot::baselines::{RandomizedResponse, ResponseSets, ThresholdLottery};
use smoothlot::clipped::ClippedLinear;
use smoothlot::expost::FrankWolfeVariant;
use smoothlot::io::{load_reviews, ReviewData, ReviewFormat};
use smoothlot::mechanism::{Calibration, Mechanism};
use smoothlot::review::Scale;
use smoothlot::softmax::TopKSoftmax;
use smoothlot::{ReviewMatrix, UtilityKind};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_utility")]
    pub utility: UtilityKind,
    pub data: DataConfig,
    pub budget: BudgetConfig,
    pub mechanism: MechanismConfig,
    #[serde(default)]
    pub sample: SampleConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub perturb: PerturbConfig,
    #[serde(default)]
    pub tightness: TightnessConfig,
    #[serde(default)]
    pub expost: ExpostConfig,
    #[serde(default)]
    pub bounds: BoundsConfig,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_utility() -> UtilityKind {
    UtilityKind::Mean
}

/// Where the reviews come from. Scores in `inline` are already in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataConfig {
    File {
        path: PathBuf,
        format: ReviewFormat,
        scale: Scale,
    },
    Synthetic {
        n: usize,
        m: usize,
        #[serde(default = "default_shape")]
        shape: f64,
        #[serde(default = "default_levels")]
        levels: usize,
    },
    Inline {
        scores: Vec<Vec<f64>>,
        tick: f64,
    },
}

fn default_shape() -> f64 {
    2.0
}

fn default_levels() -> usize {
    10
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
}

impl BudgetConfig {
    /// The absolute budget for `n` candidates. Rates round half up.
    pub fn resolve(&self, n: usize) -> Result<usize, CliError> {
        let k = match (self.k, self.rate) {
            (Some(k), None) => k,
            (None, Some(rate)) => {
                if !(rate > 0.0 && rate <= 1.0) {
                    return Err(CliError::Config(format!("budget rate must be in (0, 1], got {rate}")));
                }
                (rate * n as f64 + 0.5).floor() as usize
            }
            _ => return Err(CliError::Config("budget needs exactly one of `k` and `rate`".into())),
        };
        if k == 0 || k > n {
            return Err(CliError::Config(format!("budget k = {k} is outside 1..={n}")));
        }
        Ok(k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MechanismKind {
    ClippedLinear,
    Softmax,
    IntervalLottery,
    ThresholdLottery,
    RandomizedResponse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismConfig {
    pub kind: MechanismKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smoothness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    /// Monte Carlo draws for softmax marginals.
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub sets: ResponseSets,
}

fn default_draws() -> usize {
    10_000
}

impl MechanismConfig {
    fn calibration(&self, explicit: Option<f64>, explicit_name: &str) -> Result<Calibration, CliError> {
        match (self.smoothness, explicit) {
            (Some(l), None) => Ok(Calibration::Smoothness(l)),
            (None, Some(v)) => Ok(Calibration::Explicit(v)),
            _ => Err(CliError::Config(format!(
                "{:?} needs exactly one of `smoothness` and `{explicit_name}`",
                self.kind
            ))),
        }
    }

    fn require(value: Option<f64>, name: &str, kind: MechanismKind) -> Result<f64, CliError> {
        value.ok_or_else(|| CliError::Config(format!("{kind:?} needs `{name}`")))
    }

    pub fn build(&self, utility: UtilityKind, k: usize, seed: u64) -> Result<Box<dyn Mechanism>, CliError> {
        Ok(match self.kind {
            MechanismKind::ClippedLinear => {
                if self.temperature.is_some() {
                    return Err(CliError::Config("clipped linear takes `slope`, not `temperature`".into()));
                }
                Box::new(ClippedLinear::new(utility, k, self.calibration(self.slope, "slope")?))
            }
            MechanismKind::Softmax => {
                if self.slope.is_some() {
                    return Err(CliError::Config("softmax takes `temperature`, not `slope`".into()));
                }
                Box::new(TopKSoftmax {
                    utility,
                    k,
                    calibration: self.calibration(self.temperature, "temperature")?,
                    draws: self.draws,
                    seed,
                })
            }
            MechanismKind::IntervalLottery => Box::new(smoothlot::baselines::IntervalLottery { k }),
            MechanismKind::ThresholdLottery => Box::new(ThresholdLottery {
                utility,
                k,
                lo: Self::require(self.lo, "lo", self.kind)?,
                hi: Self::require(self.hi, "hi", self.kind)?,
            }),
            MechanismKind::RandomizedResponse => Box::new(RandomizedResponse {
                epsilon: Self::require(self.epsilon, "epsilon", self.kind)?,
                k,
                sets: self.sets,
            }),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub draws: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self { draws: 1000 }
    }
}

/// Smoothness grid for `sweep` and `bounds`: explicit `levels`, or `points`
/// log-spaced values over `[lo, hi]` (default `[0.1/m, 10/m]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            levels: None,
            lo: None,
            hi: None,
            points: 10,
        }
    }
}

impl GridConfig {
    pub fn resolve(&self, m_min: usize) -> Result<Vec<f64>, CliError> {
        if let Some(levels) = &self.levels {
            if levels.is_empty() || levels.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
                return Err(CliError::Config("smoothness levels must be positive and finite".into()));
            }
            return Ok(levels.clone());
        }
        let anchor = 1.0 / m_min.max(1) as f64;
        let lo = self.lo.unwrap_or(0.1 * anchor);
        let hi = self.hi.unwrap_or(10.0 * anchor);
        Ok(smoothlot::analysis::log_grid(lo, hi, self.points)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    #[serde(flatten)]
    pub grid: GridConfig,
    pub draws: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            draws: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbConfig {
    /// Perturbation size; defaults to the data's score tick.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tick: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TightnessConfig {
    pub n: usize,
    pub levels: Vec<f64>,
    pub mechanisms: Vec<MechanismKind>,
    pub b_grid: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub draws: usize,
}

impl Default for TightnessConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            levels: vec![0.5, 1.0, 2.0, 3.0],
            mechanisms: vec![MechanismKind::ClippedLinear, MechanismKind::Softmax],
            b_grid: (0..=20).map(|i| i as f64 / 20.0).collect(),
            epsilon: vec![0.05],
            draws: 100_000,
        }
    }
}

/// Intervals for the dominance relation: leave-one-out ranges of the
/// reviews, or `utility ± half_width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpostConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    pub max_iter: usize,
    pub tol: f64,
    #[serde(default)]
    pub variant: FrankWolfeVariant,
}

impl Default for ExpostConfig {
    fn default() -> Self {
        Self {
            half_width: None,
            max_iter: 2000,
            tol: 1e-6,
            variant: FrankWolfeVariant::AwayStep,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundsConfig {
    #[serde(flatten)]
    pub grid: GridConfig,
}

/// Command-line overrides applied on top of the document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub k: Option<usize>,
    pub rate: Option<f64>,
    pub smoothness: Option<f64>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads `path`; a relative data path is taken relative to the file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        if let DataConfig::File { path: data, .. } = &mut config.data {
            if data.is_relative() {
                if let Some(dir) = path.parent() {
                    *data = dir.join(&*data);
                }
            }
        }
        Ok(config)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(k) = o.k {
            self.budget = BudgetConfig { k: Some(k), rate: None };
        }
        if let Some(rate) = o.rate {
            self.budget = BudgetConfig { k: None, rate: Some(rate) };
        }
        if let Some(l) = o.smoothness {
            self.mechanism.smoothness = Some(l);
            self.mechanism.slope = None;
            self.mechanism.temperature = None;
        }
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load_data(&self) -> Result<ReviewData, CliError> {
        Ok(match &self.data {
            DataConfig::File { path, format, scale } => load_reviews(path, *format, scale)?,
            DataConfig::Synthetic { n, m, shape, levels } => {
                let matrix = smoothlot::analysis::synthetic_beta_reviews(*n, *m, *shape, *levels, self.seed)?;
                ReviewData {
                    ids: (0..*n).map(|i| format!("c{i}")).collect(),
                    matrix,
                }
            }
            DataConfig::Inline { scores, tick } => ReviewData {
                ids: (0..scores.len()).map(|i| format!("c{i}")).collect(),
                matrix: ReviewMatrix::new(scores.clone(), *tick)?,
            },
        })
    }
}
