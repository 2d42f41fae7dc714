//! Ordinal datasets, priors, and chain configuration.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::distributions::QuantileSpec;
use crate::error::{DataError, Error, Result};
use crate::linalg::{cholesky, Definiteness};

/// Ordinal responses coded `1..=C` with an `n × p` covariate matrix.
///
/// There is never an intercept column; the model fixes the intercept at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalDataset {
    responses: Vec<usize>,
    covariates: DMatrix<f64>,
    labels: Vec<String>,
}

impl OrdinalDataset {
    /// Builds a dataset from codes already in `1..=labels.len()`.
    pub fn from_codes(responses: Vec<usize>, covariates: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        let categories = labels.len();
        if categories < 2 {
            return Err(DataError::TooFewCategories { min: 2, got: categories }.into());
        }
        if responses.is_empty() {
            return Err(DataError::Empty.into());
        }
        if responses.len() != covariates.nrows() {
            return Err(DataError::DimensionMismatch {
                responses: responses.len(),
                rows: covariates.nrows(),
            }
            .into());
        }
        for (row, &c) in responses.iter().enumerate() {
            if c == 0 || c > categories {
                return Err(DataError::UnknownLabel {
                    row,
                    label: c.to_string(),
                }
                .into());
            }
        }
        if let Some((row, column)) = first_non_finite(&covariates) {
            return Err(DataError::NonFinite { row, column }.into());
        }
        let mut seen = vec![false; categories];
        for &c in &responses {
            seen[c - 1] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(DataError::UnobservedCategory {
                label: labels[missing].clone(),
            }
            .into());
        }
        Ok(Self {
            responses,
            covariates,
            labels,
        })
    }

    /// Codes labelled `"1"..="C"`.
    pub fn with_numeric_labels(responses: Vec<usize>, covariates: DMatrix<f64>, categories: usize) -> Result<Self> {
        let labels = (1..=categories).map(|c| c.to_string()).collect();
        Self::from_codes(responses, covariates, labels)
    }

    pub fn n(&self) -> usize {
        self.responses.len()
    }

    pub fn p(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn categories(&self) -> usize {
        self.labels.len()
    }

    pub fn responses(&self) -> &[usize] {
        &self.responses
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.covariates
    }

    pub fn category_labels(&self) -> &[String] {
        &self.labels
    }

    /// Maps codes back to the original labels.
    pub fn decode(&self) -> Vec<&str> {
        self.responses.iter().map(|&c| self.labels[c - 1].as_str()).collect()
    }

    /// Rows `indices` (with repetition), keeping the label set. Fails if a
    /// category drops out.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let responses = indices.iter().map(|&i| self.responses[i]).collect();
        let covariates = self.covariates.select_rows(indices);
        Self::from_codes(responses, covariates, self.labels.clone())
    }
}

fn first_non_finite(m: &DMatrix<f64>) -> Option<(usize, usize)> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if !m[(i, j)].is_finite() {
                return Some((i, j));
            }
        }
    }
    None
}

/// Codes `raw_labels` by their position in `label_order` (first level → 1).
pub fn encode_dataset<S: AsRef<str>, T: AsRef<str>>(
    raw_labels: &[S],
    covariates: DMatrix<f64>,
    label_order: &[T],
) -> Result<OrdinalDataset> {
    let labels: Vec<String> = label_order.iter().map(|l| l.as_ref().to_string()).collect();
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(DataError::DuplicateLevel { label: l.clone() }.into());
        }
    }
    if raw_labels.len() != covariates.nrows() {
        return Err(DataError::DimensionMismatch {
            responses: raw_labels.len(),
            rows: covariates.nrows(),
        }
        .into());
    }
    let codes = raw_labels
        .iter()
        .enumerate()
        .map(|(row, raw)| {
            labels
                .iter()
                .position(|l| l == raw.as_ref())
                .map(|c| c + 1)
                .ok_or_else(|| {
                    Error::from(DataError::UnknownLabel {
                        row,
                        label: raw.as_ref().to_string(),
                    })
                })
        })
        .collect::<Result<Vec<_>>>()?;
    OrdinalDataset::from_codes(codes, covariates, labels)
}

/// Column means and sample standard deviations removed by
/// [`standardize_covariates`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

/// Z-scores every covariate column (sample sd, `n - 1` denominator).
pub fn standardize_covariates(dataset: &OrdinalDataset) -> Result<(OrdinalDataset, Standardization)> {
    let x = dataset.covariates();
    let n = x.nrows();
    if n < 2 {
        return Err(Error::Config("standardizing needs at least two rows".into()));
    }
    let mut out = x.clone();
    let mut means = Vec::with_capacity(x.ncols());
    let mut sds = Vec::with_capacity(x.ncols());
    for j in 0..x.ncols() {
        let col = x.column(j);
        let mean = col.sum() / n as f64;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let scale = col.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if sd <= 1e-12 * scale.max(f64::MIN_POSITIVE) || sd == 0.0 {
            return Err(DataError::ConstantColumn { column: j }.into());
        }
        for i in 0..n {
            out[(i, j)] = (x[(i, j)] - mean) / sd;
        }
        means.push(mean);
        sds.push(sd);
    }
    let standardized = OrdinalDataset {
        responses: dataset.responses.clone(),
        covariates: out,
        labels: dataset.labels.clone(),
    };
    Ok((standardized, Standardization { means, sds }))
}

pub fn mixture_constants(q: f64) -> Result<QuantileSpec> {
    QuantileSpec::new(q)
}

/// Priors: `σ⁻¹ ~ Gamma(c0, d0)` (shape, rate) and `β ~ N(b0, B0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub c0: f64,
    pub d0: f64,
    pub b0: DVector<f64>,
    pub b0_cov: DMatrix<f64>,
}

impl Hyperparams {
    pub fn new(c0: f64, d0: f64, b0: DVector<f64>, b0_cov: DMatrix<f64>) -> Result<Self> {
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(Error::domain("c0", c0, "must be positive"));
        }
        if !(d0 > 0.0 && d0.is_finite()) {
            return Err(Error::domain("d0", d0, "must be positive"));
        }
        if b0_cov.nrows() != b0.len() || b0_cov.ncols() != b0.len() {
            return Err(Error::Config(format!(
                "prior covariance is {}x{} but prior mean has length {}",
                b0_cov.nrows(),
                b0_cov.ncols(),
                b0.len()
            )));
        }
        let chol = cholesky(&b0_cov, Definiteness::Strict)
            .map_err(|e| Error::Config(format!("prior covariance is not positive definite: {e}")))?;
        if chol.jitter > 0.0 {
            return Err(Error::Config("prior covariance is not positive definite".into()));
        }
        Ok(Self { c0, d0, b0, b0_cov })
    }

    /// `c0 = d0 = 1e-3`, `b0 = 0`, `B0 = 1e6 · I`.
    pub fn default_for(p: usize) -> Self {
        Self {
            c0: 1e-3,
            d0: 1e-3,
            b0: DVector::zeros(p),
            b0_cov: DMatrix::identity(p, p) * 1e6,
        }
    }

    pub fn p(&self) -> usize {
        self.b0.len()
    }
}

/// Which Gibbs scheme drives the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Scale update with the mixture weights integrated out.
    Collapsed,
    /// Scale update conditional on the mixture weights.
    FullGibbs,
    /// Interior cutpoints held at the given values; no cutpoint update.
    FixedCutpoints(Vec<f64>),
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Collapsed => "collapsed",
            Variant::FullGibbs => "full",
            Variant::FixedCutpoints(_) => "fixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub iterations: usize,
    pub burnin: usize,
    pub seed: u64,
    pub variant: Variant,
    pub thin: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            iterations: 20_000,
            burnin: 10_000,
            seed: 0,
            variant: Variant::Collapsed,
            thin: 1,
        }
    }
}

impl FitConfig {
    /// Shortened chain (5000 sweeps, 2500 burn-in) for bootstrap smoke runs.
    pub fn fast() -> Self {
        Self {
            iterations: 5_000,
            burnin: 2_500,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn retained(&self) -> usize {
        (self.iterations - self.burnin) / self.thin
    }

    pub fn validate(&self, categories: usize) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be positive".into()));
        }
        if self.burnin >= self.iterations {
            return Err(Error::Config(format!(
                "burn-in {} must be below the iteration count {}",
                self.burnin, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be positive".into()));
        }
        if self.retained() == 0 {
            return Err(Error::Config("no draws would be retained".into()));
        }
        if let Variant::FixedCutpoints(delta) = &self.variant {
            if delta.len() != categories - 1 {
                return Err(Error::Config(format!(
                    "fixed cutpoints need {} interior values, got {}",
                    categories - 1,
                    delta.len()
                )));
            }
            Cutpoints::from_interior(delta)?;
        }
        Ok(())
    }
}

/// `δ_0 = -∞ < δ_1 < … < δ_{C-1} < δ_C = +∞`; category `c` occupies
/// `[δ_{c-1}, δ_c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cutpoints {
    delta: Vec<f64>,
}

impl Cutpoints {
    pub fn from_interior(interior: &[f64]) -> Result<Self> {
        if interior.is_empty() {
            return Err(Error::Config("need at least one interior cutpoint".into()));
        }
        if let Some(&bad) = interior.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain("cutpoint", bad, "interior cutpoints must be finite"));
        }
        if interior.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "cutpoints {interior:?} are not strictly increasing"
            )));
        }
        let mut delta = Vec::with_capacity(interior.len() + 2);
        delta.push(f64::NEG_INFINITY);
        delta.extend_from_slice(interior);
        delta.push(f64::INFINITY);
        Ok(Self { delta })
    }

    /// Full vector including the infinite ends.
    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn interior(&self) -> &[f64] {
        &self.delta[1..self.delta.len() - 1]
    }

    pub fn categories(&self) -> usize {
        self.delta.len() - 1
    }

    /// `(δ_{c-1}, δ_c)` for category `c ∈ 1..=C`.
    #[inline]
    pub fn bounds(&self, category: usize) -> (f64, f64) {
        (self.delta[category - 1], self.delta[category])
    }

    /// `δ_{C-1}`.
    pub fn last_interior(&self) -> f64 {
        self.delta[self.delta.len() - 2]
    }

    pub(crate) fn set_interior(&mut self, j: usize, value: f64) {
        debug_assert!(j >= 1 && j < self.delta.len() - 1);
        self.delta[j] = value;
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.delta.windows(2).all(|w| w[0] < w[1])
    }
}
