//! Acceptance suite. Prints one `[PASS]` or `[FAIL]` line per criterion.
//! With `BORPS_ACCEPTANCE_STRICT=1` it exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use borps::distributions::{
    ald_cdf, ald_pdf, check_loss, sample_ald_mixture, sample_inverse_gaussian, AldParams, ErrorLaw,
};
use borps::evaluation::{run_experiment, CellReport, CellSpec, ExperimentOptions, Method};
use borps::model::{FitConfig, Hyperparams, Variant};
use borps::rng::SeedStream;
use borps::sampler::run_chain;
use borps::simulation::{gen_custom, shift_for_quantile, BaseRandomness, Design, SimulationScenario};
use rand::Rng;

type Outcome = Result<String, String>;

const QS: [f64; 3] = [0.25, 0.5, 0.75];

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn lib<T>(r: borps::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn ks_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

fn single_run(design: Design, q: f64, method: Method, seed: u64) -> Result<CellReport, String> {
    let options = ExperimentOptions {
        runs: 1,
        ..ExperimentOptions::default()
    };
    lib(run_experiment(&CellSpec::new(design, ErrorLaw::Normal, q, method), &options, seed))
}

fn c1_check_loss() -> Outcome {
    let mut rng = SeedStream::new(1).rng();
    let mut worst = 0.0f64;
    for _ in 0..100_000 {
        let u: f64 = rng.random_range(-50.0..50.0);
        let q: f64 = rng.random_range(1e-6..1.0 - 1e-6);
        let rho = lib(check_loss(u, q))?;
        let indicator = if u < 0.0 { 1.0 } else { 0.0 };
        let weighted = if u >= 0.0 { q * u.abs() } else { (1.0 - q) * u.abs() };
        let symmetric = 0.5 * (u.abs() + (2.0 * q - 1.0) * u);
        for other in [u * (q - indicator), weighted, symmetric] {
            worst = worst.max((rho - other).abs());
        }
    }
    ensure(worst <= 1e-12, format!("max deviation {worst:.2e} over 1e5 pairs"))
}

fn c2_pdf_normalized() -> Outcome {
    let mu = 0.7;
    let mut worst = 0.0f64;
    for sigma in [0.5, 1.0, 2.0] {
        for q in [0.1, 0.25, 0.5, 0.75, 0.9] {
            let p = lib(AldParams::new(mu, sigma, q))?;
            // exp(-45) bounds the mass outside either window.
            let left = simpson(|u| ald_pdf(u, &p), mu - 45.0 * sigma / (1.0 - q), mu, 400_000);
            let right = simpson(|u| ald_pdf(u, &p), mu, mu + 45.0 * sigma / q, 400_000);
            worst = worst.max((left + right - 1.0).abs());
            if ald_cdf(mu, &p) != q {
                return Err(format!("cdf(mu) = {} for q = {q}", ald_cdf(mu, &p)));
            }
        }
    }
    ensure(worst <= 1e-6, format!("max |integral - 1| = {worst:.2e}; cdf(mu) = q on 15 grid points"))
}

fn c3_mixture_ks() -> Outcome {
    let mut rng = SeedStream::new(3).rng();
    let mut parts = Vec::new();
    let mut ok = true;
    for q in [0.1, 0.5, 0.9] {
        let p = lib(AldParams::new(0.0, 1.0, q))?;
        let xs: Vec<f64> = (0..100_000).map(|_| sample_ald_mixture(&p, &mut rng)).collect();
        let d = ks_distance(xs, |x| ald_cdf(x, &p));
        ok &= d < 0.01;
        parts.push(format!("q={q}: D={d:.4}"));
    }
    ensure(ok, parts.join(", "))
}

fn c4_inverse_gaussian() -> Outcome {
    let mut rng = SeedStream::new(4).rng();
    let mut parts = Vec::new();
    let mut ok = true;
    for (mu, lambda) in [(2.0, 3.0), (0.5, 1.0)] {
        let n = 1_000_000;
        let xs = (0..n)
            .map(|_| sample_inverse_gaussian(mu, lambda, &mut rng))
            .collect::<borps::Result<Vec<f64>>>()
            .map_err(|e| e.to_string())?;
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let target_var = mu * mu * mu / lambda;
        let (em, ev) = ((mean - mu).abs() / mu, (var - target_var).abs() / target_var);
        ok &= em <= 0.01 && ev <= 0.02;
        parts.push(format!("({mu},{lambda}): mean err {:.3}%, var err {:.3}%", em * 100.0, ev * 100.0));
    }
    ensure(ok, parts.join("; "))
}

fn c5_single_chain() -> Outcome {
    let streams = SeedStream::new(5);
    let mut parts = Vec::new();
    let mut ok = true;
    for (k, q) in QS.into_iter().enumerate() {
        let cell = single_run(Design::SingleNonnull, q, Method::Borps, streams.child(k as u64).seed())?;
        let r = cell.coefficients[0].estimates[0];
        let tol = if q == 0.5 { 0.03 } else { 0.06 };
        ok &= (r - 0.375).abs() <= tol;
        parts.push(format!("q={q}: ratio {r:.4} (tol {tol})"));
    }
    ensure(ok, parts.join(", "))
}

fn c6_multi_chain() -> Outcome {
    let cell = single_run(Design::MultiNonnull, 0.5, Method::Borps, SeedStream::new(6).seed())?;
    let r1 = cell.coefficients[0].estimates[0];
    let r2 = cell.coefficients[1].estimates[0];
    ensure(
        (r1 - 0.375).abs() <= 0.05 && (r2 - 0.25).abs() <= 0.05,
        format!("r1 {r1:.4} (truth 0.375), r2 {r2:.4} (truth 0.25)"),
    )
}

fn c7_bootstrap() -> Outcome {
    let streams = SeedStream::new(7);
    let options = ExperimentOptions {
        runs: 1,
        config: FitConfig::default(),
        bootstrap: Some((100, 0.95)),
    };
    let mut parts = Vec::new();
    let mut ok = true;
    let mut k = 0;
    for design in [Design::SingleNull, Design::MultiPartialnull] {
        for q in QS {
            let cell = CellSpec::new(design, ErrorLaw::Normal, q, Method::Borps);
            let report = lib(run_experiment(&cell, &options, streams.child(k).seed()))?;
            k += 1;
            let coverage = report.coverage.ok_or("no bootstrap coverage")?;
            for (j, (cov, score)) in coverage.iter().zip(&report.coefficients).enumerate() {
                let good = if score.truth == 0.0 { cov.contains_zero } else { !cov.contains_zero };
                ok &= good;
                parts.push(format!(
                    "{} q={q} x{}: [{:.3}, {:.3}]{}",
                    design.name(),
                    j + 1,
                    cov.lower,
                    cov.upper,
                    if good { "" } else { " WRONG" }
                ));
            }
        }
    }
    ensure(ok, parts.join("; "))
}

fn c8_fixed_cutpoints() -> Outcome {
    let streams = SeedStream::new(8);
    let options = ExperimentOptions::default();
    let mut parts = Vec::new();
    let mut ok = true;
    for (k, q) in QS.into_iter().enumerate() {
        let mut rmse = Vec::new();
        for (d, delta) in [[5.0, 8.0], [0.0, 13.0]].into_iter().enumerate() {
            let cell = CellSpec::new(
                Design::SingleNonnull,
                ErrorLaw::Normal,
                q,
                Method::FixedCutpoints(delta.to_vec()),
            );
            let report = lib(run_experiment(&cell, &options, streams.path(&[k as u64, d as u64]).seed()))?;
            rmse.push(report.coefficients[0].rmse);
        }
        ok &= rmse[0] < 0.2 && rmse[1] > 10.0 * rmse[0];
        parts.push(format!(
            "q={q}: (5,8) {:.4}, (0,13) {:.4}, ratio {:.1}x",
            rmse[0],
            rmse[1],
            rmse[1] / rmse[0]
        ));
    }
    ensure(ok, parts.join("; "))
}

fn c9_qr_baseline() -> Outcome {
    let streams = SeedStream::new(9);
    let mut parts = Vec::new();
    let mut ok = true;
    for (k, q) in QS.into_iter().enumerate() {
        let nonnull = single_run(Design::SingleNonnull, q, Method::Qr, streams.path(&[k as u64, 0]).seed())?;
        let null = single_run(Design::SingleNull, q, Method::Qr, streams.path(&[k as u64, 1]).seed())?;
        let b = nonnull.coefficients[0].estimates[0];
        let b0 = null.coefficients[0].estimates[0];
        ok &= (2.0..=2.8).contains(&(b - 3.0).abs()) && b0.abs() <= 0.1;
        parts.push(format!("q={q}: non-null slope {b:.4}, null slope {b0:.4}"));
    }
    ensure(ok, parts.join("; "))
}

fn c10_invariance() -> Outcome {
    let streams = SeedStream::new(10);
    let mut checked = 0;
    for (k, design) in Design::ALL.iter().enumerate() {
        for law in [ErrorLaw::Normal, ErrorLaw::Laplace] {
            let shift = lib(shift_for_quantile(law, 0.25))?;
            let mut rng = streams.path(&[k as u64, law as u64]).rng();
            let base = BaseRandomness::draw(300, &design.covariate_upper(), law, shift, &mut rng);
            let beta = design.true_beta();
            let e = design.error_scale();
            let reference = lib(gen_custom(&beta, &[5.0, 8.0], 0.0, e, &base))?;
            for a in [-3.0, 2.5, 100.0] {
                let moved = lib(gen_custom(&beta, &[5.0 + a, 8.0 + a], a, e, &base))?;
                if moved.responses() != reference.responses() {
                    return Err(format!("{} {law:?}: location shift {a} changed responses", design.name()));
                }
                checked += 1;
            }
            for s in [0.5, 2.0, 3.0, 10.0] {
                let scaled_beta: Vec<f64> = beta.iter().map(|b| b * s).collect();
                let scaled = lib(gen_custom(&scaled_beta, &[5.0 * s, 8.0 * s], 0.0, e * s, &base))?;
                if scaled.responses() != reference.responses() {
                    return Err(format!("{} {law:?}: scale {s} changed responses", design.name()));
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} shifted or scaled generators reproduce the reference responses"))
}

fn c11_variants_agree() -> Outcome {
    let streams = SeedStream::new(11);
    let hyper = Hyperparams::default_for(1);
    let mut parts = Vec::new();
    let mut ok = true;
    for (k, q) in QS.into_iter().enumerate() {
        let stream = streams.child(k as u64);
        let scenario = lib(SimulationScenario::new(Design::SingleNonnull, ErrorLaw::Normal, q, 300))?;
        let (dataset, _) = lib(scenario.generate(&mut stream.child(0).rng()))?;
        let config = FitConfig::default().with_seed(stream.child(1).seed());
        let collapsed = lib(run_chain(&dataset, q, &hyper, &config))?.ratios[0];
        let full = lib(run_chain(&dataset, q, &hyper, &config.with_variant(Variant::FullGibbs)))?.ratios[0];
        ok &= (collapsed - full).abs() <= 0.02;
        parts.push(format!("q={q}: collapsed {collapsed:.4}, full {full:.4}"));
    }
    ensure(ok, parts.join("; "))
}

fn read_dir_bytes(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        files.insert(name, fs::read(&path).map_err(|e| e.to_string())?);
    }
    Ok(files)
}

fn c12_cli_determinism() -> Outcome {
    let tmp = std::env::temp_dir().join(format!("borps-acceptance-{}", std::process::id()));
    let _ = fs::remove_dir_all(&tmp);
    let run = |args: &[&str]| -> Result<(), String> {
        let out = Command::new(env!("CARGO_BIN_EXE_borps"))
            .args(args)
            .env("SOURCE_DATE_EPOCH", "1700000000")
            .output()
            .map_err(|e| e.to_string())?;
        if out.status.success() {
            Ok(())
        } else {
            Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
        }
    };
    let data = tmp.join("sim");
    let data_csv = data.join("data.csv");
    let (data_s, csv_s) = (data.to_string_lossy().into_owned(), data_csv.to_string_lossy().into_owned());
    let invocation = |name: &str, out: &str| -> Vec<String> {
        let args: Vec<&str> = match name {
            "simulate" => vec!["simulate", "--design", "multi-partialnull", "--law", "laplace", "--quantile", "0.25", "--seed", "4"],
            "fit" => vec![
                "fit", &csv_s, "--quantile", "0.25,0.75", "--runs", "2", "--bootstrap", "3", "--iterations", "2000",
                "--burnin", "1000", "--seed", "9", "--emit-draws",
            ],
            _ => vec!["reproduce", "fig5", "--iterations", "400", "--burnin", "200", "--bootstrap", "4", "--seed", "2"],
        };
        args.into_iter().chain(["--out", out]).map(String::from).collect()
    };

    run(&["simulate", "--design", "multi-partialnull", "--seed", "1", "--out", &data_s])?;
    let mut parts = Vec::new();
    for name in ["simulate", "fit", "reproduce"] {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = tmp.join(format!("{name}{rep}"));
            let argv = invocation(name, &out.to_string_lossy());
            let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
            run(&argv)?;
            outputs.push(read_dir_bytes(&out)?);
        }
        let names: Vec<&String> = outputs[0].keys().collect();
        if outputs[0] != outputs[1] {
            let differing: Vec<&String> = names
                .iter()
                .copied()
                .filter(|n| outputs[1].get(*n) != outputs[0].get(*n))
                .collect();
            let _ = fs::remove_dir_all(&tmp);
            return Err(format!("{name}: outputs differ: {differing:?}"));
        }
        parts.push(format!("{name} ({} files)", names.len()));
    }
    let _ = fs::remove_dir_all(&tmp);
    Ok(format!("byte-identical reruns: {}", parts.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome); 12] = [
        (1, "check loss forms agree", c1_check_loss),
        (2, "ALD density normalized, cdf at location", c2_pdf_normalized),
        (3, "ALD mixture matches cdf", c3_mixture_ks),
        (4, "inverse Gaussian moments", c4_inverse_gaussian),
        (5, "single-covariate ratio recovery", c5_single_chain),
        (6, "two-covariate ratio recovery", c6_multi_chain),
        (7, "bootstrap intervals on null designs", c7_bootstrap),
        (8, "fixed-cutpoint sensitivity", c8_fixed_cutpoints),
        (9, "continuous QR baseline", c9_qr_baseline),
        (10, "location and scale invariance", c10_invariance),
        (11, "collapsed and full Gibbs agree", c11_variants_agree),
        (12, "CLI determinism", c12_cli_determinism),
    ];
    let filter: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (id, name, check) in criteria {
        if filter.is_some_and(|f| f != id) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] {id}: {name}: {detail} ({secs:.1}s)");
    }
    if failed == 0 {
        return ExitCode::SUCCESS;
    }
    println!("{failed} criteria failed");
    let strict = std::env::var("BORPS_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
