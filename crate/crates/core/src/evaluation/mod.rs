//! Scoring, bootstrap intervals, the continuous quantile regression baseline,
//! and the simulation experiment runner.

mod qr;

pub use qr::{check_objective, qr_baseline, qr_fit, QrFit};

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::ErrorLaw;
use crate::error::{DataError, Error, Result};
use crate::model::{FitConfig, Hyperparams, OrdinalDataset, Variant};
use crate::rng::SeedStream;
use crate::sampler::run_chain;
use crate::simulation::{Design, SimulationScenario, DEFAULT_N};
use crate::stats::quantile_sorted;

/// Attempts per bootstrap replicate to draw a resample covering every category.
const MAX_RESAMPLE_ATTEMPTS: usize = 100;

/// `√(Σ(θ̂_i − θ)² / n)`.
pub fn rmse(estimates: &[f64], truth: f64) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::Config("rmse of an empty estimate list".into()));
    }
    let ss: f64 = estimates.iter().map(|e| (e - truth).powi(2)).sum();
    Ok((ss / estimates.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    /// Ratios from the full-data fit.
    pub point: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub level: f64,
    /// One row of ratio estimates per replicate.
    pub replicates: Vec<Vec<f64>>,
}

impl BootstrapResult {
    /// Percentile interval at another level from the same replicates.
    pub fn interval(&self, level: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        percentile_interval(&self.replicates, level)
    }
}

/// Per-covariate type-7 percentile interval of the replicate rows.
pub fn percentile_interval(replicates: &[Vec<f64>], level: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain("level", level, "0 < level < 1"));
    }
    let Some(width) = replicates.first().map(Vec::len) else {
        return Err(Error::Config("no bootstrap replicates".into()));
    };
    if replicates.iter().any(|r| r.len() != width) {
        return Err(Error::Config("bootstrap replicates differ in length".into()));
    }
    let alpha = (1.0 - level) / 2.0;
    let mut lower = Vec::with_capacity(width);
    let mut upper = Vec::with_capacity(width);
    for j in 0..width {
        let mut col: Vec<f64> = replicates.iter().map(|r| r[j]).collect();
        col.sort_by(f64::total_cmp);
        lower.push(quantile_sorted(&col, alpha));
        upper.push(quantile_sorted(&col, 1.0 - alpha));
    }
    Ok((lower, upper))
}

/// Indices drawn with replacement, redrawn until every category appears.
fn resample_indices<R: Rng + ?Sized>(dataset: &OrdinalDataset, rng: &mut R) -> Result<Vec<usize>> {
    let n = dataset.n();
    let categories = dataset.categories();
    for _ in 0..MAX_RESAMPLE_ATTEMPTS {
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let mut seen = vec![false; categories];
        for &i in &idx {
            seen[dataset.responses()[i] - 1] = true;
        }
        if seen.iter().all(|&s| s) {
            return Ok(idx);
        }
    }
    Err(Error::Data(DataError::UnobservedCategory {
        label: format!("some category in every one of {MAX_RESAMPLE_ATTEMPTS} resamples"),
    }))
}

/// Percentile bootstrap of the ratio estimates.
///
/// The full-data fit uses `config` as given. Replicate `r` resamples rows and
/// seeds its chain from child `r` of `seed`, so the result does not depend on
/// thread scheduling.
pub fn bootstrap_ci(
    dataset: &OrdinalDataset,
    q: f64,
    hyper: &Hyperparams,
    config: &FitConfig,
    replicates: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapResult> {
    if replicates < 2 {
        return Err(Error::domain("replicates", replicates as f64, "at least 2"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain("level", level, "0 < level < 1"));
    }
    let point = run_chain(dataset, q, hyper, config)?.ratios;
    let streams = SeedStream::new(seed);
    let rows = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let stream = streams.child(r);
            let idx = resample_indices(dataset, &mut stream.child(0).rng())?;
            let resampled = dataset.select_rows(&idx)?;
            let cfg = config.clone().with_seed(stream.child(1).seed());
            Ok(run_chain(&resampled, q, hyper, &cfg)?.ratios)
        })
        .collect::<Result<Vec<_>>>()?;
    let (lower, upper) = percentile_interval(&rows, level)?;
    Ok(BootstrapResult {
        point,
        lower,
        upper,
        level,
        replicates: rows,
    })
}

/// Whether the interval for covariate `index` excludes zero.
pub fn significant(result: &BootstrapResult, index: usize) -> Result<bool> {
    match (result.lower.get(index), result.upper.get(index)) {
        (Some(&lo), Some(&hi)) => Ok(lo > 0.0 || hi < 0.0),
        _ => Err(Error::Config(format!(
            "covariate index {index} out of range for {} covariates",
            result.lower.len()
        ))),
    }
}

/// Estimation method for one experiment cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Collapsed sampler, scored on ratios.
    Borps,
    /// Uncollapsed sampler, scored on ratios.
    FullGibbs,
    /// Sampler with cutpoints held at the given values, scored on raw `β`.
    FixedCutpoints(Vec<f64>),
    /// Continuous quantile regression on the category codes, scored on raw
    /// slopes from a single run.
    Qr,
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Borps => "borps".into(),
            Method::FullGibbs => "full-gibbs".into(),
            Method::FixedCutpoints(d) => {
                let parts: Vec<String> = d.iter().map(|v| format!("{v}")).collect();
                format!("fixed({})", parts.join(","))
            }
            Method::Qr => "qr".into(),
        }
    }

    fn variant(&self) -> Option<Variant> {
        match self {
            Method::Borps => Some(Variant::Collapsed),
            Method::FullGibbs => Some(Variant::FullGibbs),
            Method::FixedCutpoints(d) => Some(Variant::FixedCutpoints(d.clone())),
            Method::Qr => None,
        }
    }

    /// Whether estimates are compared with `β / δ_{C−1}` rather than `β`.
    pub fn scores_ratios(&self) -> bool {
        matches!(self, Method::Borps | Method::FullGibbs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub design: Design,
    pub error_law: ErrorLaw,
    pub q: f64,
    pub method: Method,
    pub n: usize,
}

impl CellSpec {
    pub fn new(design: Design, error_law: ErrorLaw, q: f64, method: Method) -> Self {
        Self {
            design,
            error_law,
            q,
            method,
            n: DEFAULT_N,
        }
    }
}

/// Run settings shared by the cells of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    pub runs: usize,
    /// Chain settings; the seed is replaced per run.
    pub config: FitConfig,
    /// `(B, level)` for a bootstrap interval on the first run's dataset.
    pub bootstrap: Option<(usize, f64)>,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            runs: 15,
            config: FitConfig::default(),
            bootstrap: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientScore {
    pub truth: f64,
    pub estimates: Vec<f64>,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub lower: f64,
    pub upper: f64,
    pub contains_truth: bool,
    pub contains_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub cell: CellSpec,
    pub method_label: String,
    pub runs: usize,
    pub coefficients: Vec<CoefficientScore>,
    /// Present when the experiment requested a bootstrap.
    pub coverage: Option<Vec<Coverage>>,
}

/// Cells of one experiment, in the order they were run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub cells: Vec<CellReport>,
}

impl ExperimentReport {
    pub fn find(&self, design: Design, error_law: ErrorLaw, q: f64, method: &Method) -> Option<&CellReport> {
        self.cells.iter().find(|c| {
            c.cell.design == design && c.cell.error_law == error_law && c.cell.q == q && &c.cell.method == method
        })
    }
}

/// Estimates for one simulated dataset under `method`.
fn estimate(
    dataset: &OrdinalDataset,
    cell: &CellSpec,
    hyper: &Hyperparams,
    config: &FitConfig,
) -> Result<Vec<f64>> {
    match cell.method.variant() {
        Some(variant) => {
            let cfg = config.clone().with_variant(variant);
            let fit = run_chain(dataset, cell.q, hyper, &cfg)?;
            Ok(if cell.method.scores_ratios() { fit.ratios } else { fit.mean_beta })
        }
        None => {
            let y: Vec<f64> = dataset.responses().iter().map(|&c| c as f64).collect();
            Ok(qr_baseline(&y, dataset.covariates(), cell.q)?[1..].to_vec())
        }
    }
}

/// Simulates `options.runs` datasets for the cell (one for [`Method::Qr`]),
/// fits each, and scores the estimates against the ground truth.
///
/// Run `r` draws its data from `seed / r / 0` and its chain from `seed / r / 1`;
/// runs execute in parallel.
pub fn run_experiment(cell: &CellSpec, options: &ExperimentOptions, seed: u64) -> Result<CellReport> {
    if options.runs == 0 {
        return Err(Error::Config("an experiment needs at least one run".into()));
    }
    let runs = if cell.method == Method::Qr { 1 } else { options.runs };
    let scenario = SimulationScenario::new(cell.design, cell.error_law, cell.q, cell.n)?;
    let truth = scenario.ground_truth();
    let targets = if cell.method.scores_ratios() { truth.ratios.clone() } else { truth.beta.clone() };
    let hyper = Hyperparams::default_for(cell.design.p());
    let streams = SeedStream::new(seed);

    let per_run = (0..runs as u64)
        .into_par_iter()
        .map(|r| {
            let stream = streams.child(r);
            let (dataset, _) = scenario.generate(&mut stream.child(0).rng())?;
            let config = options.config.clone().with_seed(stream.child(1).seed());
            let est = estimate(&dataset, cell, &hyper, &config)?;
            Ok((dataset, est))
        })
        .collect::<Result<Vec<_>>>()?;

    let estimates = DMatrix::from_fn(runs, targets.len(), |r, j| per_run[r].1[j]);
    let coefficients = targets
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let col: Vec<f64> = estimates.column(j).iter().copied().collect();
            Ok(CoefficientScore {
                truth: t,
                rmse: rmse(&col, t)?,
                estimates: col,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let coverage = match (options.bootstrap, cell.method.variant()) {
        (Some((b, level)), Some(variant)) => {
            let stream = streams.child(runs as u64);
            let config = options.config.clone().with_seed(stream.child(1).seed()).with_variant(variant);
            let boot = bootstrap_ci(&per_run[0].0, cell.q, &hyper, &config, b, level, stream.child(2).seed())?;
            Some(
                targets
                    .iter()
                    .enumerate()
                    .map(|(j, &t)| {
                        let (lo, hi) = (boot.lower[j], boot.upper[j]);
                        Coverage {
                            lower: lo,
                            upper: hi,
                            contains_truth: lo <= t && t <= hi,
                            contains_zero: lo <= 0.0 && 0.0 <= hi,
                        }
                    })
                    .collect(),
            )
        }
        _ => None,
    };

    Ok(CellReport {
        cell: cell.clone(),
        method_label: cell.method.label(),
        runs,
        coefficients,
        coverage,
    })
}
