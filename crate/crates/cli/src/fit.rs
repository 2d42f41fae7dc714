use std::path::PathBuf;

use borps::evaluation::{bootstrap_ci, significant};
use borps::model::{
    encode_dataset, standardize_covariates, FitConfig, Hyperparams, OrdinalDataset, Standardization, Variant,
};
use borps::rng::SeedStream;
use borps::sampler::{run_chain, PosteriorSummary, TraceSummary};
use clap::{Args, ValueEnum};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::CliError;
use crate::io::{num, parse_number_list, read_table, FileDigest, OutputDir, SCHEMA_VERSION};

const DEFAULT_QUANTILES: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantArg {
    Collapsed,
    Full,
    Fixed,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// Input CSV with a header row.
    pub input: PathBuf,
    /// Column holding the ordinal response; every other column is a covariate.
    #[arg(long, default_value = "y")]
    pub response: String,
    /// Response levels in increasing order, e.g. "low,mid,high". Defaults to
    /// the distinct numeric values sorted.
    #[arg(long)]
    pub levels: Option<String>,
    /// Quantile level; repeat or separate with commas.
    #[arg(long = "quantile", value_delimiter = ',')]
    pub quantiles: Vec<f64>,
    #[arg(long, default_value_t = 20_000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 10_000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = VariantArg::Collapsed)]
    pub variant: VariantArg,
    /// Interior cutpoints for `--variant fixed`, e.g. "5,8".
    #[arg(long, required_if_eq("variant", "fixed"), value_parser = parse_number_list)]
    pub fixed_cutpoints: Option<Vec<f64>>,
    /// Z-score every covariate column before fitting.
    #[arg(long)]
    pub standardize: bool,
    /// Independent chains per quantile.
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    /// Bootstrap replicates per quantile (0 disables the bootstrap).
    #[arg(long, default_value_t = 0)]
    pub bootstrap: usize,
    /// Bootstrap interval level.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Write every retained draw to `draws_q<q>_run<r>.csv`.
    #[arg(long)]
    pub emit_draws: bool,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

impl FitArgs {
    fn variant(&self) -> Result<Variant, CliError> {
        match (self.variant, &self.fixed_cutpoints) {
            (VariantArg::Collapsed, None) => Ok(Variant::Collapsed),
            (VariantArg::Full, None) => Ok(Variant::FullGibbs),
            (VariantArg::Fixed, Some(d)) => Ok(Variant::FixedCutpoints(d.clone())),
            (VariantArg::Fixed, None) => Err(CliError::input("--variant fixed requires --fixed-cutpoints")),
            (_, Some(_)) => Err(CliError::input("--fixed-cutpoints is only valid with --variant fixed")),
        }
    }

    fn quantiles(&self) -> Vec<f64> {
        if self.quantiles.is_empty() {
            DEFAULT_QUANTILES.to_vec()
        } else {
            self.quantiles.clone()
        }
    }
}

#[derive(Serialize)]
struct InputInfo {
    file: String,
    sha256: String,
    rows: usize,
    response: String,
    levels: Vec<String>,
    covariates: Vec<String>,
    standardization: Option<Standardization>,
}

#[derive(Serialize)]
struct RunResult {
    run: usize,
    seed: u64,
    ratios: Vec<f64>,
    mean_beta: Vec<f64>,
    mean_cutpoints: Vec<f64>,
    mean_sigma: f64,
    diagnostics: Vec<TraceSummary>,
}

#[derive(Serialize)]
struct BootstrapOutput {
    replicates: usize,
    level: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    significant: Vec<bool>,
}

#[derive(Serialize)]
struct QuantileResult {
    quantile: f64,
    /// Ratios averaged over runs.
    ratios: Vec<f64>,
    runs: Vec<RunResult>,
    bootstrap: Option<BootstrapOutput>,
}

#[derive(Serialize)]
struct FitOutput<'a> {
    schema_version: u32,
    command: &'static str,
    input: InputInfo,
    settings: &'a FitArgs,
    results: Vec<QuantileResult>,
}

/// Infers levels as distinct numeric values in increasing order.
fn infer_levels(raw: &[String]) -> Result<Vec<String>, CliError> {
    let mut levels: Vec<(f64, String)> = Vec::new();
    for (i, label) in raw.iter().enumerate() {
        let value: f64 = label.parse().map_err(|_| {
            CliError::input(format!(
                "line {}: response {label:?} is not numeric; declare the level order with --levels",
                i + 2
            ))
        })?;
        if !levels.iter().any(|(_, l)| l == label) {
            if let Some((_, other)) = levels.iter().find(|(v, _)| *v == value) {
                return Err(CliError::input(format!(
                    "responses {other:?} and {label:?} denote the same number; declare --levels"
                )));
            }
            levels.push((value, label.clone()));
        }
    }
    levels.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(levels.into_iter().map(|(_, l)| l).collect())
}

fn load_dataset(args: &FitArgs) -> Result<(OrdinalDataset, InputInfo), CliError> {
    let table = read_table(&args.input)?;
    let file = args.input.display().to_string();
    let response_col = table
        .headers
        .iter()
        .position(|h| h == &args.response)
        .ok_or_else(|| CliError::input(format!("{file}: no column named {:?}", args.response)))?;
    let covariate_cols: Vec<usize> = (0..table.headers.len()).filter(|&j| j != response_col).collect();
    if covariate_cols.is_empty() {
        return Err(CliError::input(format!("{file}: no covariate columns")));
    }
    let n = table.rows.len();
    let raw: Vec<String> = table.rows.iter().map(|r| r[response_col].clone()).collect();
    let mut values = Vec::with_capacity(n * covariate_cols.len());
    for (i, row) in table.rows.iter().enumerate() {
        for &j in &covariate_cols {
            let cell = &row[j];
            let v = cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                CliError::input(format!(
                    "{file}: line {}, column {:?}: {cell:?} is not a finite number",
                    i + 2,
                    table.headers[j]
                ))
            })?;
            values.push(v);
        }
    }
    let covariates = DMatrix::from_row_slice(n, covariate_cols.len(), &values);
    let levels = match &args.levels {
        Some(spec) => spec.split(',').map(|s| s.trim().to_string()).collect(),
        None => infer_levels(&raw)?,
    };
    let dataset = encode_dataset(&raw, covariates, &levels).map_err(|e| CliError::from_library(&file, e))?;
    let (dataset, standardization) = if args.standardize {
        let (d, s) = standardize_covariates(&dataset).map_err(|e| CliError::from_library(&file, e))?;
        (d, Some(s))
    } else {
        (dataset, None)
    };
    let info = InputInfo {
        file,
        sha256: table.digest,
        rows: n,
        response: args.response.clone(),
        levels,
        covariates: covariate_cols.iter().map(|&j| table.headers[j].clone()).collect(),
        standardization,
    };
    Ok((dataset, info))
}

fn run_result(run: usize, seed: u64, s: &PosteriorSummary) -> RunResult {
    RunResult {
        run,
        seed,
        ratios: s.ratios.clone(),
        mean_beta: s.mean_beta.clone(),
        mean_cutpoints: s.mean_cutpoints.clone(),
        mean_sigma: s.mean_sigma,
        diagnostics: s.diagnostics.clone(),
    }
}

pub fn run(args: &FitArgs) -> Result<(), CliError> {
    let variant = args.variant()?;
    let quantiles = args.quantiles();
    if args.runs == 0 {
        return Err(CliError::input("--runs must be at least 1"));
    }
    if args.bootstrap == 1 {
        return Err(CliError::input("--bootstrap needs at least 2 replicates"));
    }
    let (dataset, info) = load_dataset(args)?;
    let base = FitConfig {
        iterations: args.iterations,
        burnin: args.burnin,
        seed: args.seed,
        variant,
        thin: args.thin,
    };
    base.validate(dataset.categories())?;
    for &q in &quantiles {
        borps::distributions::QuantileSpec::new(q)?;
    }
    let hyper = Hyperparams::default_for(dataset.p());
    let streams = SeedStream::new(args.seed);

    let jobs: Vec<(usize, usize)> = (0..quantiles.len())
        .flat_map(|qi| (0..args.runs).map(move |r| (qi, r)))
        .collect();
    let fits = jobs
        .par_iter()
        .map(|&(qi, r)| {
            let seed = streams.child(0).path(&[qi as u64, r as u64]).seed();
            let config = base.clone().with_seed(seed);
            run_chain(&dataset, quantiles[qi], &hyper, &config)
                .map(|s| (seed, s))
                .map_err(|e| CliError::from_library(&format!("quantile {}, run {}", quantiles[qi], r + 1), e))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut out = OutputDir::create(&args.out)?;
    let mut results = Vec::with_capacity(quantiles.len());
    for (qi, &q) in quantiles.iter().enumerate() {
        let runs = &fits[qi * args.runs..(qi + 1) * args.runs];
        let p = dataset.p();
        let ratios = (0..p)
            .map(|j| runs.iter().map(|(_, s)| s.ratios[j]).sum::<f64>() / runs.len() as f64)
            .collect();
        let bootstrap = if args.bootstrap > 0 {
            let config = base.clone().with_seed(runs[0].0);
            let boot_seed = streams.child(1).child(qi as u64).seed();
            let b = bootstrap_ci(&dataset, q, &hyper, &config, args.bootstrap, args.level, boot_seed)
                .map_err(|e| CliError::from_library(&format!("bootstrap at quantile {q}"), e))?;
            let flags = (0..p).map(|j| significant(&b, j)).collect::<Result<Vec<_>, _>>()?;
            Some(BootstrapOutput {
                replicates: b.replicates.len(),
                level: b.level,
                lower: b.lower,
                upper: b.upper,
                significant: flags,
            })
        } else {
            None
        };
        if args.emit_draws {
            for (r, (_, s)) in runs.iter().enumerate() {
                let names = s.draws.column_names();
                let header: Vec<&str> = names.iter().map(String::as_str).collect();
                let rows = s.draws.rows().map(|row| row.iter().map(|&v| num(v)).collect::<Vec<_>>());
                out.write_csv(&format!("draws_q{q}_run{}.csv", r + 1), &header, rows)?;
            }
        }
        results.push(QuantileResult {
            quantile: q,
            ratios,
            runs: runs.iter().enumerate().map(|(r, (seed, s))| run_result(r + 1, *seed, s)).collect(),
            bootstrap,
        });
    }

    let input_digest = FileDigest {
        path: info.file.clone(),
        sha256: info.sha256.clone(),
    };
    out.write_json(
        "summary.json",
        &FitOutput {
            schema_version: SCHEMA_VERSION,
            command: "fit",
            input: info,
            settings: args,
            results,
        },
    )?;
    out.finish("fit", args.seed, args, vec![input_digest])
}
