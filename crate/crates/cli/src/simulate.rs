use std::path::PathBuf;

use borps::distributions::ErrorLaw;
use borps::rng::SeedStream;
use borps::simulation::{Design, SimulationScenario, DEFAULT_N};
use clap::Args;
use serde::Serialize;

use crate::error::CliError;
use crate::io::{num, OutputDir, SCHEMA_VERSION};

pub fn parse_design(s: &str) -> Result<Design, String> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = Design::ALL.iter().map(Design::name).collect();
        format!("expected one of {}", names.join(", "))
    })
}

pub fn parse_law(s: &str) -> Result<ErrorLaw, String> {
    s.parse().map_err(|_| "expected normal or laplace".to_string())
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_parser = parse_design)]
    pub design: Design,
    #[arg(long, value_parser = parse_law, default_value = "normal")]
    pub law: ErrorLaw,
    #[arg(long, default_value_t = 0.5)]
    pub quantile: f64,
    #[arg(long, default_value_t = DEFAULT_N)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for `data.csv`, `truth.json`, and the manifest.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Truth {
    schema_version: u32,
    design: &'static str,
    error_law: &'static str,
    quantile: f64,
    n: usize,
    seed: u64,
    beta: Vec<f64>,
    cutpoints: Vec<f64>,
    ratios: Vec<f64>,
    error_shift: f64,
}

pub fn run(args: &SimulateArgs) -> Result<(), CliError> {
    let scenario = SimulationScenario::new(args.design, args.law, args.quantile, args.n)?;
    let (dataset, truth) = scenario.generate(&mut SeedStream::new(args.seed).rng())?;

    let p = dataset.p();
    let mut header = vec!["y".to_string()];
    header.extend((1..=p).map(|j| format!("x{j}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let labels = dataset.decode();
    let x = dataset.covariates();
    let rows = (0..dataset.n()).map(|i| {
        let mut row = vec![labels[i].to_string()];
        row.extend((0..p).map(|j| num(x[(i, j)])));
        row
    });

    let mut out = OutputDir::create(&args.out)?;
    out.write_csv("data.csv", &header, rows)?;
    out.write_json(
        "truth.json",
        &Truth {
            schema_version: SCHEMA_VERSION,
            design: args.design.name(),
            error_law: args.law.name(),
            quantile: args.quantile,
            n: args.n,
            seed: args.seed,
            beta: truth.beta,
            cutpoints: truth.cutpoints,
            ratios: truth.ratios,
            error_shift: scenario.error_shift,
        },
    )?;
    out.finish("simulate", args.seed, args, Vec::new())
}
