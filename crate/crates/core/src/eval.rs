//! Monte Carlo comparison of the estimators on simulated studies.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{assign, day_vectors, mean_vector, Estimator, MarkedDay};
use crate::pn::PnSpace;
use crate::simulator::{expected_truth, standard_library, Scenario, Simulator, TimestampMode};

/// Root mean integrated squared error with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rmise {
    pub value: f64,
    /// Delta-method standard error of `value`.
    pub se: f64,
    pub replicates: usize,
}

/// Summed squared entity errors of one replicate.
pub fn squared_error(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::param("estimate", "entity sets differ"));
    }
    Ok(estimate.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum())
}

/// RMISE from per-replicate squared-error sums, summed in replicate order.
pub fn rmise_from_errors(errors: &[f64]) -> Result<Rmise> {
    let r = errors.len();
    if r == 0 {
        return Err(Error::Data("no replicates".into()));
    }
    let mean = errors.iter().sum::<f64>() / r as f64;
    let value = mean.sqrt();
    let se = if r > 1 && value > 0.0 {
        let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (r - 1) as f64;
        (var / r as f64).sqrt() / (2.0 * value)
    } else {
        0.0
    };
    Ok(Rmise {
        value,
        se,
        replicates: r,
    })
}

/// `sqrt(mean_r Σ_e (T̂_e − T_e)²)` over aligned replicate vectors.
pub fn rmise(estimates: &[Vec<f64>], truths: &[Vec<f64>]) -> Result<Rmise> {
    if estimates.len() != truths.len() {
        return Err(Error::param("estimates", "replicate counts differ"));
    }
    let errors = estimates
        .iter()
        .zip(truths)
        .map(|(e, t)| squared_error(e, t))
        .collect::<Result<Vec<_>>>()?;
    rmise_from_errors(&errors)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub ns: Vec<usize>,
    pub ms: Vec<usize>,
    pub modes: Vec<TimestampMode>,
    pub epsilons: Vec<f64>,
    pub sigma: f64,
    pub replicates: usize,
    pub seed: u64,
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        if self.ns.is_empty() || self.ns.contains(&0) {
            return Err(Error::param("ns", "must be nonempty and positive"));
        }
        if self.ms.is_empty() || self.ms.contains(&0) {
            return Err(Error::param("ms", "must be nonempty and positive"));
        }
        if self.modes.is_empty() {
            return Err(Error::param("modes", "must be nonempty"));
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::param("epsilons", "must be nonempty and positive"));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::param("sigma", "must be positive"));
        }
        if self.replicates < 1 {
            return Err(Error::param("replicates", "must be at least 1"));
        }
        Ok(())
    }
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        Self {
            ns: vec![7, 30, 90],
            ms: vec![159, 479, 1439],
            modes: vec![TimestampMode::Even, TimestampMode::Realistic],
            epsilons: vec![0.1],
            sigma: 0.1,
            replicates: 50,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub spacing: TimestampMode,
    pub n: usize,
    pub m: usize,
    pub epsilon: f64,
    pub naive: Rmise,
    pub weighted: Rmise,
    pub adjusted: Rmise,
}

/// Mean boundary crossings per day for one entity in one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingRow {
    pub spacing: TimestampMode,
    pub n: usize,
    pub m: usize,
    pub entity_id: String,
    pub mean_crossings: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub crossings: Vec<CrossingRow>,
}

/// Per-replicate squared errors for several estimators on one simulated cell.
pub struct CellRun {
    /// `errors[k][r]` for estimator `k` and replicate `r`.
    pub errors: Vec<Vec<f64>>,
    pub mean_crossings: Vec<f64>,
}

/// Simulates `replicates` studies of `scenario` and scores each estimator
/// against the calendar-weighted expected truth.
pub fn run_cell(scenario: &Scenario, pn: &PnSpace, estimators: &[Estimator], replicates: usize) -> Result<CellRun> {
    let library = match scenario.timestamps {
        TimestampMode::Realistic => Some(standard_library(scenario)),
        TimestampMode::Even => None,
    };
    let sim = Simulator::new(scenario, pn, library.as_ref())?;
    let truth = expected_truth(scenario, pn, scenario.n_days)?;
    let per_rep = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let study = sim.study(r)?;
            let days: Vec<MarkedDay> = study
                .marked_days()?
                .into_iter()
                .map(|d| assign(d, pn))
                .collect();
            let errs = estimators
                .iter()
                .map(|&e| squared_error(&mean_vector(&day_vectors(&days, pn, e)?), &truth))
                .collect::<Result<Vec<f64>>>()?;
            let mut crossings = vec![0.0; pn.len()];
            for d in &study.days {
                for (c, &x) in crossings.iter_mut().zip(&d.truth.crossings) {
                    *c += x as f64;
                }
            }
            Ok((errs, crossings))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut errors = vec![Vec::with_capacity(replicates); estimators.len()];
    let mut mean_crossings = vec![0.0; pn.len()];
    for (errs, crossings) in &per_rep {
        for (k, e) in errs.iter().enumerate() {
            errors[k].push(*e);
        }
        for (a, c) in mean_crossings.iter_mut().zip(crossings) {
            *a += c;
        }
    }
    let denom = (replicates * scenario.n_days) as f64;
    mean_crossings.iter_mut().for_each(|a| *a /= denom);
    Ok(CellRun {
        errors,
        mean_crossings,
    })
}

/// Naive, weighted and adjusted RMISE for every grid cell.
pub fn run_comparison(base: &Scenario, grid: &ExperimentGrid) -> Result<Comparison> {
    grid.validate()?;
    let pn = base.pn_space()?;
    let mut out = Comparison::default();
    for &mode in &grid.modes {
        for &m in &grid.ms {
            for &n in &grid.ns {
                let scenario = Scenario {
                    n_days: n,
                    m,
                    sigma: grid.sigma,
                    timestamps: mode,
                    seed: grid.seed,
                    ..base.clone()
                };
                let mut estimators = vec![Estimator::Naive, Estimator::Weighted];
                estimators.extend(grid.epsilons.iter().map(|&e| Estimator::Adjusted { threshold: e }));
                let run = run_cell(&scenario, &pn, &estimators, grid.replicates)?;
                let naive = rmise_from_errors(&run.errors[0])?;
                let weighted = rmise_from_errors(&run.errors[1])?;
                for (k, &epsilon) in grid.epsilons.iter().enumerate() {
                    out.rows.push(ComparisonRow {
                        spacing: mode,
                        n,
                        m,
                        epsilon,
                        naive,
                        weighted,
                        adjusted: rmise_from_errors(&run.errors[2 + k])?,
                    });
                }
                for (ix, &c) in run.mean_crossings.iter().enumerate() {
                    out.crossings.push(CrossingRow {
                        spacing: mode,
                        n,
                        m,
                        entity_id: pn.entity(ix).id.0.clone(),
                        mean_crossings: c,
                    });
                }
            }
        }
    }
    Ok(out)
}

fn mode_name(mode: TimestampMode) -> &'static str {
    match mode {
        TimestampMode::Even => "even",
        TimestampMode::Realistic => "realistic",
    }
}

impl Comparison {
    /// Rows `spacing, n, m, epsilon, naive, weighted, adjusted, se_*, R`.
    pub fn write_results_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "spacing", "n", "m", "epsilon", "naive", "weighted", "adjusted", "se_naive", "se_weighted", "se_adjusted", "R",
        ])?;
        for r in &self.rows {
            w.write_record([
                mode_name(r.spacing).to_string(),
                r.n.to_string(),
                r.m.to_string(),
                r.epsilon.to_string(),
                r.naive.value.to_string(),
                r.weighted.value.to_string(),
                r.adjusted.value.to_string(),
                r.naive.se.to_string(),
                r.weighted.se.to_string(),
                r.adjusted.se.to_string(),
                r.naive.replicates.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_crossings_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["spacing", "n", "m", "entity_id", "mean_crossings"])?;
        for r in &self.crossings {
            w.write_record([
                mode_name(r.spacing).to_string(),
                r.n.to_string(),
                r.m.to_string(),
                r.entity_id.clone(),
                r.mean_crossings.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::param("x", "need at least three aligned points"));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::param("x", "values must be positive"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub ns: Vec<usize>,
    pub rmise: Vec<Rmise>,
    pub slope: f64,
}

/// RMISE of one estimator across study lengths, with the fitted log-log
/// slope against `n`.
pub fn convergence_check(
    base: &Scenario,
    ns: &[usize],
    estimator: Estimator,
    replicates: usize,
) -> Result<Convergence> {
    if ns.len() < 3 {
        return Err(Error::param("ns", "need at least three study lengths"));
    }
    let pn = base.pn_space()?;
    let rmise = ns
        .iter()
        .map(|&n| {
            let scenario = Scenario {
                n_days: n,
                ..base.clone()
            };
            let run = run_cell(&scenario, &pn, &[estimator], replicates)?;
            rmise_from_errors(&run.errors[0])
        })
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let y: Vec<f64> = rmise.iter().map(|r| r.value).collect();
    let slope = log_log_slope(&x, &y)?;
    Ok(Convergence {
        ns: ns.to_vec(),
        rmise,
        slope,
    })
}
