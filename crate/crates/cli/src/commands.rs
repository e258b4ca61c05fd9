//! The harness commands. Each reads a resolved [`RunConfig`] and writes its
//! artifacts into the configured output directory.

use std::path::PathBuf;

use serde::Serialize;
use smoothlot::analysis::{
    perturbation_search, regret_lower_bound, regret_smoothness_sweep, regret_upper_bound_linear,
    softmax_regret_bound, tightness_search, PerturbationReport,
};
use smoothlot::clipped::ClippedLinear;
use smoothlot::expost::{
    check_ex_post_valid, core_width_satisfied, dominance_pairs, project_valid_marginals, FrankWolfeOptions,
    ProjectionResult,
};
use smoothlot::mechanism::{Calibration, Mechanism};
use smoothlot::review::leave_one_out_intervals;
use smoothlot::sampler::{systematic_outcomes, systematic_samples};
use smoothlot::softmax::temperature_from_smoothness;
use smoothlot::utility::{lipschitz_constant, utility};
use smoothlot::IntervalVector;

use crate::config::{MechanismConfig, MechanismKind, RunConfig};
use crate::output::{write_atomic, Cell, Table};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    /// Marginal selection probabilities of the configured mechanism.
    Marginals,
    /// Random size-k sets drawn from those marginals.
    Sample,
    /// Regret of clipped linear and softmax over a smoothness grid.
    Sweep,
    /// Largest single-entry sensitivity of the configured mechanism.
    Perturb,
    /// Worst-case sensitivity on near-extremal profiles.
    Tightness,
    /// Ex post validity of the marginals, with projection if needed.
    Expost,
    /// Closed-form regret bounds over a smoothness grid.
    Bounds,
}

/// Runs `command` and returns the files it wrote, the echoed configuration
/// first.
pub fn run_command(config: &RunConfig, command: Command) -> Result<Vec<PathBuf>, CliError> {
    let mut written = vec![write_atomic(&config.out, "resolved_config.toml", &config.to_toml()?)?];
    written.extend(match command {
        Command::Marginals => marginals(config)?,
        Command::Sample => sample(config)?,
        Command::Sweep => sweep(config)?,
        Command::Perturb => perturb(config)?,
        Command::Tightness => tightness(config)?,
        Command::Expost => expost(config)?,
        Command::Bounds => bounds(config)?,
    });
    Ok(written)
}

struct Prepared {
    x: smoothlot::ReviewMatrix,
    u: Vec<f64>,
    k: usize,
    mechanism: Box<dyn Mechanism>,
}

fn prepare(config: &RunConfig) -> Result<Prepared, CliError> {
    let data = config.load_data()?;
    let x = data.matrix;
    let k = config.budget.resolve(x.n())?;
    let u = utility(&x, config.utility).into_inner();
    let mechanism = config.mechanism.build(config.utility, k, config.seed)?;
    Ok(Prepared { x, u, k, mechanism })
}

fn marginals(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let Prepared { x, u, mechanism, .. } = prepare(config)?;
    let p = mechanism.marginals(&x)?;
    let mut t = Table::new(&["index", "utility", "probability"]);
    for i in 0..p.n() {
        t.row(vec![i.into(), u[i].into(), p[i].into()]);
    }
    Ok(vec![write_atomic(&config.out, "marginals.csv", &t.into_string())?])
}

fn sample(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let Prepared { x, mechanism, .. } = prepare(config)?;
    let p = mechanism.marginals(&x)?;
    let mut t = Table::new(&["draw", "index"]);
    for (d, set) in systematic_samples(&p, config.sample.draws, config.seed).iter().enumerate() {
        for &i in set {
            t.row(vec![d.into(), i.into()]);
        }
    }
    Ok(vec![write_atomic(&config.out, "samples.csv", &t.into_string())?])
}

fn sweep(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let data = config.load_data()?;
    let x = data.matrix;
    let k = config.budget.resolve(x.n())?;
    let grid = config.sweep.grid.resolve(x.m_min())?;
    let table = regret_smoothness_sweep(&x, config.utility, k, &grid, config.sweep.draws, config.seed)?;
    let mut t = Table::new(&["L", "mechanism", "regret", "regret_per_k", "stderr"]);
    for r in &table.rows {
        t.row(vec![
            r.l.into(),
            r.mechanism.as_str().into(),
            r.regret.into(),
            r.regret_per_k.into(),
            r.stderr.into(),
        ]);
    }
    Ok(vec![write_atomic(&config.out, "sweep.csv", &t.into_string())?])
}

#[derive(Serialize)]
struct PerturbOutput {
    mechanism: String,
    n: usize,
    k: usize,
    tick: f64,
    #[serde(flatten)]
    report: PerturbationReport,
}

fn perturb(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let Prepared { x, k, mechanism, .. } = prepare(config)?;
    let tick = config.perturb.tick.unwrap_or(x.tick());
    let report = perturbation_search(mechanism.as_ref(), &x, tick)?;
    let out = PerturbOutput {
        mechanism: mechanism.name(),
        n: x.n(),
        k,
        tick,
        report,
    };
    Ok(vec![write_atomic(&config.out, "perturb.json", &to_json(&out)?)?])
}

fn tightness(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let tc = &config.tightness;
    let k = config.budget.resolve(tc.n)?;
    let mut t = Table::new(&[
        "L",
        "mechanism",
        "n",
        "k",
        "b",
        "epsilon",
        "candidate",
        "direction",
        "l1",
        "ratio",
        "stderr",
        "ratio_over_L",
    ]);
    for &kind in &tc.mechanisms {
        if !matches!(kind, MechanismKind::ClippedLinear | MechanismKind::Softmax) {
            return Err(CliError::Config(format!(
                "tightness applies to clipped_linear and softmax, not {kind:?}"
            )));
        }
        for &l in &tc.levels {
            let mc = MechanismConfig {
                kind,
                smoothness: Some(l),
                slope: None,
                temperature: None,
                draws: tc.draws,
                ..config.mechanism
            };
            let mechanism = mc.build(config.utility, k, config.seed)?;
            let w = tightness_search(mechanism.as_ref(), tc.n, k, &tc.b_grid, &tc.epsilon)?.worst;
            t.row(vec![
                l.into(),
                mechanism.name().into(),
                tc.n.into(),
                k.into(),
                w.b.into(),
                w.epsilon.into(),
                w.candidate.into(),
                w.direction.into(),
                w.l1.into(),
                w.ratio.into(),
                w.stderr.into(),
                (w.ratio / l).into(),
            ]);
        }
    }
    Ok(vec![write_atomic(&config.out, "tightness.csv", &t.into_string())?])
}

#[derive(Serialize)]
struct ExpostOutput {
    mechanism: String,
    n: usize,
    k: usize,
    dominance_pairs: Vec<(usize, usize)>,
    /// Probability that a systematic draw from the marginals is invalid.
    invalid_mass: f64,
    /// Whether the intervals meet the core-width condition (clipped linear only).
    core_width: Option<bool>,
    projection: Option<ProjectionResult>,
}

fn expost(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let Prepared { x, u, k, mechanism } = prepare(config)?;
    let intervals = match config.expost.half_width {
        Some(h) => IntervalVector::symmetric(&u, h)?,
        None => leave_one_out_intervals(&x)?,
    };
    let relation = dominance_pairs(&intervals);
    let p = mechanism.marginals(&x)?;
    let invalid_mass: f64 = systematic_outcomes(&p)
        .iter()
        .filter(|(set, _)| !check_ex_post_valid(set, &relation))
        .map(|(_, w)| w)
        .sum();
    let core_width = match config.mechanism.kind {
        MechanismKind::ClippedLinear => {
            let calibration = match (config.mechanism.smoothness, config.mechanism.slope) {
                (Some(l), _) => Calibration::Smoothness(l),
                (None, Some(a)) => Calibration::Explicit(a),
                (None, None) => unreachable!("mechanism built above"),
            };
            let slope = ClippedLinear::new(config.utility, k, calibration).slope_for(&x)?;
            Some(core_width_satisfied(&intervals, &u, slope)?)
        }
        _ => None,
    };
    let projection = if invalid_mass > 0.0 {
        let options = FrankWolfeOptions {
            max_iter: config.expost.max_iter,
            tol: config.expost.tol,
            variant: config.expost.variant,
        };
        Some(project_valid_marginals(&p, &relation, &options)?)
    } else {
        None
    };

    let mut t = Table::new(&["index", "utility", "probability", "projected"]);
    for i in 0..p.n() {
        let projected = projection.as_ref().map_or(p[i], |r| r.marginals[i]);
        t.row(vec![i.into(), u[i].into(), p[i].into(), projected.into()]);
    }
    let out = ExpostOutput {
        mechanism: mechanism.name(),
        n: x.n(),
        k,
        dominance_pairs: relation.pairs().to_vec(),
        invalid_mass,
        core_width,
        projection,
    };
    Ok(vec![
        write_atomic(&config.out, "expost.csv", &t.into_string())?,
        write_atomic(&config.out, "expost.json", &to_json(&out)?)?,
    ])
}

fn bounds(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let x = config.load_data()?.matrix;
    let n = x.n();
    let k = config.budget.resolve(n)?;
    let (lambda, c) = lipschitz_constant(config.utility, &x.review_counts())?;
    let grid = config.bounds.grid.resolve(x.m_min())?;
    let mut t = Table::new(&["L", "upper_linear", "lower", "softmax", "lower_over_upper"]);
    for &l in &grid {
        let upper = regret_upper_bound_linear(k, n, lambda, l)?;
        let lower = regret_lower_bound(k, n, c, l)?;
        let soft = softmax_regret_bound(k, n, temperature_from_smoothness(l, lambda)?)?;
        let ratio = if upper > 0.0 { Cell::Num(lower / upper) } else { Cell::Empty };
        t.row(vec![l.into(), upper.into(), lower.into(), soft.into(), ratio]);
    }
    Ok(vec![write_atomic(&config.out, "bounds.csv", &t.into_string())?])
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

