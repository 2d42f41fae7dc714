use std::path::PathBuf;

use borps::distributions::ErrorLaw;
use borps::evaluation::{run_experiment, CellReport, CellSpec, ExperimentOptions, ExperimentReport, Method};
use borps::model::FitConfig;
use borps::rng::SeedStream;
use borps::simulation::Design;
use clap::{Args, ValueEnum};
use serde::Serialize;

use crate::error::CliError;
use crate::io::{num, OutputDir, SCHEMA_VERSION};

const QUANTILES: [f64; 3] = [0.25, 0.5, 0.75];
const LAWS: [ErrorLaw; 2] = [ErrorLaw::Normal, ErrorLaw::Laplace];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    /// Single-covariate RMSE table.
    Table1,
    /// Two-covariate RMSE table.
    Table2,
    /// Sensitivity of the fixed-cutpoint sampler to the chosen cutpoints.
    Fig2,
    /// Bootstrap intervals on the null and partial-null designs.
    Fig5,
}

impl Target {
    fn name(self) -> &'static str {
        match self {
            Target::Table1 => "table1",
            Target::Table2 => "table2",
            Target::Fig2 => "fig2",
            Target::Fig5 => "fig5",
        }
    }

    fn cells(self) -> Vec<CellSpec> {
        let mut cells = Vec::new();
        match self {
            Target::Table1 | Target::Table2 => {
                let designs = if self == Target::Table1 {
                    [Design::SingleNonnull, Design::SingleNull]
                } else {
                    [Design::MultiNonnull, Design::MultiPartialnull]
                };
                for design in designs {
                    for law in LAWS {
                        for method in [Method::Borps, Method::Qr] {
                            for q in QUANTILES {
                                cells.push(CellSpec::new(design, law, q, method.clone()));
                            }
                        }
                    }
                }
            }
            Target::Fig2 => {
                for delta in [[5.0, 8.0], [4.0, 9.0], [0.0, 13.0]] {
                    for q in QUANTILES {
                        let method = Method::FixedCutpoints(delta.to_vec());
                        cells.push(CellSpec::new(Design::SingleNonnull, ErrorLaw::Normal, q, method));
                    }
                }
            }
            Target::Fig5 => {
                for design in [Design::SingleNull, Design::MultiPartialnull] {
                    for q in QUANTILES {
                        cells.push(CellSpec::new(design, ErrorLaw::Normal, q, Method::Borps));
                    }
                }
            }
        }
        cells
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ReproduceArgs {
    #[arg(value_enum)]
    pub target: Target,
    /// Simulated datasets per cell (default 15; 1 for fig5).
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    /// Use 5000 sweeps with 2500 burn-in instead of 20000 / 10000.
    #[arg(long)]
    pub fast: bool,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    /// Bootstrap replicates for fig5.
    #[arg(long, default_value_t = 100)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
}

impl ReproduceArgs {
    fn options(&self) -> ExperimentOptions {
        let mut config = if self.fast { FitConfig::fast() } else { FitConfig::default() };
        if let Some(it) = self.iterations {
            config.iterations = it;
        }
        if let Some(b) = self.burnin {
            config.burnin = b;
        }
        let default_runs = if self.target == Target::Fig5 { 1 } else { 15 };
        ExperimentOptions {
            runs: self.runs.unwrap_or(default_runs),
            config,
            bootstrap: (self.target == Target::Fig5).then_some((self.bootstrap, self.level)),
        }
    }
}

#[derive(Serialize)]
struct ReportOutput<'a> {
    schema_version: u32,
    command: &'static str,
    target: &'static str,
    options: &'a ExperimentOptions,
    report: &'a ExperimentReport,
}

/// `beta_j` or `beta_j/delta_2`, matching how the cell is scored.
fn coefficient_name(cell: &CellReport, j: usize) -> String {
    if matches!(cell.cell.method, Method::Borps | Method::FullGibbs) {
        format!("beta_{}/delta_last", j + 1)
    } else {
        format!("beta_{}", j + 1)
    }
}

/// One row per (design, law, method, coefficient), one RMSE column per quantile.
fn rmse_table(report: &ExperimentReport) -> Vec<Vec<String>> {
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut keys: Vec<(Design, ErrorLaw, String, usize)> = Vec::new();
    for c in &report.cells {
        for j in 0..c.coefficients.len() {
            let key = (c.cell.design, c.cell.error_law, c.method_label.clone(), j);
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
    }
    for (design, law, method, j) in keys {
        let matching: Vec<&CellReport> = report
            .cells
            .iter()
            .filter(|c| c.cell.design == design && c.cell.error_law == law && c.method_label == method)
            .collect();
        let mut row = vec![
            design.name().to_string(),
            law.name().to_string(),
            method.clone(),
            coefficient_name(matching[0], j),
            matching[0].runs.to_string(),
        ];
        for q in QUANTILES {
            row.push(
                matching
                    .iter()
                    .find(|c| c.cell.q == q)
                    .map(|c| num(c.coefficients[j].rmse))
                    .unwrap_or_default(),
            );
        }
        rows.push(row);
    }
    rows
}

fn coverage_table(report: &ExperimentReport) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for c in &report.cells {
        let Some(coverage) = &c.coverage else { continue };
        for (j, (cov, score)) in coverage.iter().zip(&c.coefficients).enumerate() {
            rows.push(vec![
                c.cell.design.name().to_string(),
                c.cell.error_law.name().to_string(),
                num(c.cell.q),
                coefficient_name(c, j),
                num(score.truth),
                num(score.estimates[0]),
                num(cov.lower),
                num(cov.upper),
                cov.contains_zero.to_string(),
                cov.contains_truth.to_string(),
            ]);
        }
    }
    rows
}

fn long_rows(report: &ExperimentReport) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for c in &report.cells {
        for (j, score) in c.coefficients.iter().enumerate() {
            for (r, est) in score.estimates.iter().enumerate() {
                rows.push(vec![
                    c.cell.design.name().to_string(),
                    c.cell.error_law.name().to_string(),
                    num(c.cell.q),
                    c.method_label.clone(),
                    coefficient_name(c, j),
                    (r + 1).to_string(),
                    num(*est),
                    num(score.truth),
                ]);
            }
        }
    }
    rows
}

pub fn run(args: &ReproduceArgs) -> Result<(), CliError> {
    let options = args.options();
    if options.runs == 0 {
        return Err(CliError::input("--runs must be at least 1"));
    }
    let cells = args.target.cells();
    let streams = SeedStream::new(args.seed);
    let mut report = ExperimentReport::default();
    for (k, cell) in cells.iter().enumerate() {
        eprintln!(
            "[{}/{}] {} {} q={} {}",
            k + 1,
            cells.len(),
            cell.design.name(),
            cell.error_law.name(),
            cell.q,
            cell.method.label()
        );
        let entry = run_experiment(cell, &options, streams.child(k as u64).seed()).map_err(|e| {
            CliError::from_library(&format!("{} {} q={}", cell.design.name(), cell.method.label(), cell.q), e)
        })?;
        report.cells.push(entry);
    }

    let name = args.target.name();
    let mut out = OutputDir::create(&args.out)?;
    if args.target == Target::Fig5 {
        out.write_csv(
            &format!("{name}_table.csv"),
            &[
                "design",
                "error_law",
                "quantile",
                "coefficient",
                "truth",
                "estimate",
                "lower",
                "upper",
                "contains_zero",
                "contains_truth",
            ],
            coverage_table(&report),
        )?;
    } else {
        out.write_csv(
            &format!("{name}_table.csv"),
            &["design", "error_law", "method", "coefficient", "runs", "q0.25", "q0.5", "q0.75"],
            rmse_table(&report),
        )?;
    }
    out.write_csv(
        &format!("{name}_long.csv"),
        &["design", "error_law", "quantile", "method", "coefficient", "run", "estimate", "truth"],
        long_rows(&report),
    )?;
    out.write_json(
        "report.json",
        &ReportOutput {
            schema_version: SCHEMA_VERSION,
            command: "reproduce",
            target: name,
            options: &options,
            report: &report,
        },
    )?;
    out.finish("reproduce", args.seed, args, Vec::new())
}
