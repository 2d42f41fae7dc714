//! Generators for the benchmark simulation families.
//!
//! Every family thresholds a latent response at the cutpoints `(5, 8)` into
//! three categories. Covariates are uniform on `(0, 4)` (first) and `(0, 2)`
//! (second). Non-null designs shift the error so that its `q`-quantile is
//! zero, making the true `q`-th regression coefficient the generating one.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{quantile_of, ErrorLaw};
use crate::error::{Error, Result};
use crate::model::OrdinalDataset;

/// Interior cutpoints shared by every design.
pub const TRUE_CUTPOINTS: [f64; 2] = [5.0, 8.0];
pub const DEFAULT_N: usize = 300;
/// Attempts before a design that keeps missing a category is abandoned.
const MAX_REGENERATIONS: usize = 100;
/// Multiplier on the error in the null design.
const NULL_ERROR_SCALE: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Design {
    /// `z = 3x + u`.
    SingleNonnull,
    /// `z = 12u`.
    SingleNull,
    /// `z = 3x₁ + 2x₂ + u`.
    MultiNonnull,
    /// `z = 3x₁ + u`, with an irrelevant `x₂`.
    MultiPartialnull,
}

impl Design {
    pub const ALL: [Design; 4] = [
        Design::SingleNonnull,
        Design::SingleNull,
        Design::MultiNonnull,
        Design::MultiPartialnull,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Design::SingleNonnull => "single-nonnull",
            Design::SingleNull => "single-null",
            Design::MultiNonnull => "multi-nonnull",
            Design::MultiPartialnull => "multi-partialnull",
        }
    }

    pub fn p(&self) -> usize {
        match self {
            Design::SingleNonnull | Design::SingleNull => 1,
            Design::MultiNonnull | Design::MultiPartialnull => 2,
        }
    }

    pub fn true_beta(&self) -> Vec<f64> {
        match self {
            Design::SingleNonnull => vec![3.0],
            Design::SingleNull => vec![0.0],
            Design::MultiNonnull => vec![3.0, 2.0],
            Design::MultiPartialnull => vec![3.0, 0.0],
        }
    }

    /// Multiplier applied to the shifted error.
    pub fn error_scale(&self) -> f64 {
        if *self == Design::SingleNull {
            NULL_ERROR_SCALE
        } else {
            1.0
        }
    }

    /// Upper ends of the uniform covariate laws.
    pub fn covariate_upper(&self) -> Vec<f64> {
        match self.p() {
            1 => vec![4.0],
            _ => vec![4.0, 2.0],
        }
    }

    pub fn is_single(&self) -> bool {
        self.p() == 1
    }
}

impl std::str::FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Design::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown design {s:?}")))
    }
}

/// `−quantile_of(law, q)`: added to a standard draw it moves the
/// `q`-quantile to zero.
pub fn shift_for_quantile(law: ErrorLaw, q: f64) -> Result<f64> {
    Ok(-quantile_of(law, q)?)
}

/// Category of `z` under `δ_{j−1} ≤ z < δ_j`.
pub fn threshold(z: f64, interior: &[f64]) -> usize {
    1 + interior.iter().take_while(|&&d| d <= z).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// `β / δ_{C−1}`.
    pub ratios: Vec<f64>,
    pub beta: Vec<f64>,
    pub cutpoints: Vec<f64>,
}

impl GroundTruth {
    pub fn new(beta: Vec<f64>, cutpoints: Vec<f64>) -> Self {
        let last = *cutpoints.last().expect("cutpoints");
        Self {
            ratios: beta.iter().map(|b| b / last).collect(),
            beta,
            cutpoints,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationScenario {
    pub design: Design,
    pub error_law: ErrorLaw,
    pub q: f64,
    pub n: usize,
    pub true_beta: Vec<f64>,
    pub true_cutpoints: Vec<f64>,
    /// Location added to each standard error draw. Zero for the null design,
    /// whose errors are centred draws scaled by 12.
    pub error_shift: f64,
}

impl SimulationScenario {
    pub fn new(design: Design, error_law: ErrorLaw, q: f64, n: usize) -> Result<Self> {
        let shift = shift_for_quantile(error_law, q)?;
        if n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        Ok(Self {
            design,
            error_law,
            q,
            n,
            true_beta: design.true_beta(),
            true_cutpoints: TRUE_CUTPOINTS.to_vec(),
            error_shift: if design == Design::SingleNull { 0.0 } else { shift },
        })
    }

    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth::new(self.true_beta.clone(), self.true_cutpoints.clone())
    }

    /// Draws a dataset, regenerating from the continuing stream when a
    /// category is missing.
    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(OrdinalDataset, GroundTruth)> {
        let upper = self.design.covariate_upper();
        let scale = self.design.error_scale();
        for _ in 0..MAX_REGENERATIONS {
            let base = BaseRandomness::draw(self.n, &upper, self.error_law, self.error_shift, rng);
            match gen_custom(&self.true_beta, &self.true_cutpoints, 0.0, scale, &base) {
                Ok(d) => return Ok((d, self.ground_truth())),
                Err(Error::Data(crate::error::DataError::UnobservedCategory { .. })) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::Numeric(format!(
            "{} with n = {} missed a category in {MAX_REGENERATIONS} attempts",
            self.design.name(),
            self.n
        )))
    }
}

/// Single-covariate families (`single-nonnull`, `single-null`).
pub fn gen_single<R: Rng + ?Sized>(
    design: Design,
    error_law: ErrorLaw,
    q: f64,
    n: usize,
    rng: &mut R,
) -> Result<(OrdinalDataset, GroundTruth)> {
    if !design.is_single() {
        return Err(Error::Config(format!("{} is not a single-covariate design", design.name())));
    }
    SimulationScenario::new(design, error_law, q, n)?.generate(rng)
}

/// Two-covariate families (`multi-nonnull`, `multi-partialnull`).
pub fn gen_multi<R: Rng + ?Sized>(
    design: Design,
    error_law: ErrorLaw,
    q: f64,
    n: usize,
    rng: &mut R,
) -> Result<(OrdinalDataset, GroundTruth)> {
    if design.is_single() {
        return Err(Error::Config(format!("{} is not a two-covariate design", design.name())));
    }
    SimulationScenario::new(design, error_law, q, n)?.generate(rng)
}

/// Recorded covariates and errors, reusable across generators so that
/// different parameterizations see the same randomness.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseRandomness {
    pub covariates: DMatrix<f64>,
    /// Shifted errors, before any scaling.
    pub errors: Vec<f64>,
}

impl BaseRandomness {
    /// Covariate `j` uniform on `(0, upper[j])`; errors `law + shift`.
    pub fn draw<R: Rng + ?Sized>(n: usize, upper: &[f64], law: ErrorLaw, shift: f64, rng: &mut R) -> Self {
        let mut covariates = DMatrix::zeros(n, upper.len());
        let mut errors = Vec::with_capacity(n);
        for i in 0..n {
            for (j, &u) in upper.iter().enumerate() {
                covariates[(i, j)] = open_uniform(rng) * u;
            }
            errors.push(law.sample(rng) + shift);
        }
        Self { covariates, errors }
    }

    pub fn n(&self) -> usize {
        self.errors.len()
    }
}

fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(rand::distr::Open01)
}

/// Thresholds `z_i = (x_i'β + scale·e_i) + intercept` at `cutpoints`.
///
/// The intercept is added last so that shifting it and the cutpoints by the
/// same amount preserves every comparison exactly.
pub fn gen_custom(
    beta: &[f64],
    cutpoints: &[f64],
    intercept: f64,
    error_scale: f64,
    base: &BaseRandomness,
) -> Result<OrdinalDataset> {
    if beta.len() != base.covariates.ncols() {
        return Err(Error::Config(format!(
            "{} coefficients for {} covariates",
            beta.len(),
            base.covariates.ncols()
        )));
    }
    crate::model::Cutpoints::from_interior(cutpoints)?;
    let codes = latent_responses(beta, intercept, error_scale, base)
        .into_iter()
        .map(|z| threshold(z, cutpoints))
        .collect();
    OrdinalDataset::with_numeric_labels(codes, base.covariates.clone(), cutpoints.len() + 1)
}

pub fn latent_responses(beta: &[f64], intercept: f64, error_scale: f64, base: &BaseRandomness) -> Vec<f64> {
    let x = &base.covariates;
    (0..base.n())
        .map(|i| {
            let lin: f64 = beta.iter().enumerate().map(|(j, b)| b * x[(i, j)]).sum();
            (lin + error_scale * base.errors[i]) + intercept
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::distributions::normal_cdf;
    use proptest::prelude::*;

    #[test]
    fn shift_examples() {
        assert_eq!(shift_for_quantile(ErrorLaw::Normal, 0.5).unwrap(), 0.0);
        assert!((shift_for_quantile(ErrorLaw::Laplace, 0.25).unwrap() - 0.693147).abs() < 1e-6);
        // Bisection on the normal CDF.
        let (mut lo, mut hi) = (-5.0, 5.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if normal_cdf(mid) < 0.25 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((shift_for_quantile(ErrorLaw::Normal, 0.25).unwrap() + lo).abs() < 1e-6);
        assert!((shift_for_quantile(ErrorLaw::Normal, 0.25).unwrap() - 0.674490).abs() < 1e-6);
        assert!(shift_for_quantile(ErrorLaw::Normal, 1.0).is_err());
    }

    #[test]
    fn threshold_convention() {
        let d = [5.0, 8.0];
        assert_eq!(threshold(4.9, &d), 1);
        assert_eq!(threshold(5.0, &d), 2);
        assert_eq!(threshold(7.999, &d), 2);
        assert_eq!(threshold(8.0, &d), 3);
        assert_eq!(threshold(f64::NEG_INFINITY, &d), 1);
    }

    #[test]
    fn single_designs() {
        let mut rng = rng_from_seed(1);
        let (d, truth) = gen_single(Design::SingleNonnull, ErrorLaw::Normal, 0.25, 300, &mut rng).unwrap();
        assert_eq!(truth.ratios, vec![0.375]);
        assert_eq!((d.n(), d.p(), d.categories()), (300, 1, 3));
        assert!(d.covariates().iter().all(|&x| x > 0.0 && x < 4.0));
        let (_, truth) = gen_single(Design::SingleNull, ErrorLaw::Laplace, 0.75, 300, &mut rng).unwrap();
        assert_eq!(truth.ratios, vec![0.0]);
        assert!(gen_single(Design::MultiNonnull, ErrorLaw::Normal, 0.5, 300, &mut rng).is_err());
    }

    #[test]
    fn multi_designs() {
        let mut rng = rng_from_seed(2);
        let (d, truth) = gen_multi(Design::MultiNonnull, ErrorLaw::Laplace, 0.5, 300, &mut rng).unwrap();
        assert_eq!(truth.ratios, vec![0.375, 0.25]);
        assert!(d.covariates().column(1).iter().all(|&x| x > 0.0 && x < 2.0));
        let (_, truth) = gen_multi(Design::MultiPartialnull, ErrorLaw::Normal, 0.5, 300, &mut rng).unwrap();
        assert_eq!(truth.ratios[1], 0.0);
    }

    #[test]
    fn generators_are_reproducible() {
        let a = gen_single(Design::SingleNonnull, ErrorLaw::Laplace, 0.5, 50, &mut rng_from_seed(3)).unwrap();
        let b = gen_single(Design::SingleNonnull, ErrorLaw::Laplace, 0.5, 50, &mut rng_from_seed(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn regenerates_or_fails_on_missing_categories() {
        // Five rows rarely cover all three categories on the first attempt.
        let mut rng = rng_from_seed(4);
        let (d, _) = gen_single(Design::SingleNonnull, ErrorLaw::Normal, 0.5, 5, &mut rng).unwrap();
        assert_eq!(d.categories(), 3);
        // One row can never cover three categories.
        assert!(matches!(
            gen_single(Design::SingleNonnull, ErrorLaw::Normal, 0.5, 1, &mut rng),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn custom_invariances() {
        let mut rng = rng_from_seed(5);
        let base = BaseRandomness::draw(300, &[4.0], ErrorLaw::Normal, 0.0, &mut rng);
        let y0 = gen_custom(&[3.0], &[5.0, 8.0], 0.0, 1.0, &base).unwrap();
        let shifted = gen_custom(&[3.0], &[7.5, 10.5], 2.5, 1.0, &base).unwrap();
        assert_eq!(y0.responses(), shifted.responses());
        let scaled = gen_custom(&[6.0], &[10.0, 16.0], 0.0, 2.0, &base).unwrap();
        assert_eq!(y0.responses(), scaled.responses());
        assert_eq!((y0.n(), y0.p()), (300, 1));
    }

    #[test]
    fn shifted_error_quantile_is_zero() {
        let mut rng = rng_from_seed(6);
        for law in [ErrorLaw::Normal, ErrorLaw::Laplace] {
            for q in [0.25, 0.5, 0.75] {
                let shift = shift_for_quantile(law, q).unwrap();
                let draws: Vec<f64> = (0..200_000).map(|_| law.sample(&mut rng) + shift).collect();
                let below = draws.iter().filter(|&&e| e < 0.0).count() as f64 / draws.len() as f64;
                assert!((below - q).abs() < 0.005, "{law:?} q={q}: {below}");
            }
        }
    }

    proptest! {
        #[test]
        fn threshold_monotone(a in -20f64..20.0, b in -20f64..20.0) {
            let d = [5.0, 8.0];
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(threshold(lo, &d) <= threshold(hi, &d));
        }
    }
}
