//! Individual Gibbs updates.
//!
//! Every step receives the fitted values `Xβ` alongside the state pieces it
//! reads, so callers control when the linear predictor is refreshed.

use nalgebra::{DMatrix, DVector};
use rand::distr::Open01;
use rand::Rng;

use crate::distributions::{gamma_unchecked, inverse_gaussian_unchecked, sample_mvn, truncated_normal_unchecked, QuantileSpec};
use crate::error::{Error, Result};
use crate::linalg::spd_inverse;
use crate::model::{Cutpoints, Hyperparams, OrdinalDataset};

/// Floor on `|z_i − x_i'β|` before it enters the inverse Gaussian mean.
pub const RESIDUAL_FLOOR: f64 = 1e-10;

/// Prior on β in precision form.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaPrior {
    /// `B0⁻¹`.
    pub precision: DMatrix<f64>,
    /// `B0⁻¹ b0`.
    pub precision_mean: DVector<f64>,
}

impl BetaPrior {
    pub fn from_hyperparams(hyper: &Hyperparams) -> Result<Self> {
        let precision = spd_inverse(&hyper.b0_cov)?;
        let precision_mean = &precision * &hyper.b0;
        Ok(Self {
            precision,
            precision_mean,
        })
    }

    /// Improper flat prior, `B0⁻¹ = 0`.
    pub fn flat(p: usize) -> Self {
        Self {
            precision: DMatrix::zeros(p, p),
            precision_mean: DVector::zeros(p),
        }
    }
}

pub fn linear_predictor(x: &DMatrix<f64>, beta: &DVector<f64>) -> Vec<f64> {
    (x * beta).as_slice().to_vec()
}

/// Collapsed scale update: `σ⁻¹ ~ Gamma(c0 + n, d0 + Σ ρ_q(z_i − x_i'β))`.
///
/// The mixture weights are integrated out, so `v` is not an argument.
pub fn step_sigma_collapsed<R: Rng + ?Sized>(
    z: &[f64],
    fitted: &[f64],
    spec: &QuantileSpec,
    hyper: &Hyperparams,
    rng: &mut R,
) -> f64 {
    let (shape, rate) = collapsed_sigma_conditional(z, fitted, spec, hyper);
    1.0 / gamma_unchecked(shape, rate, rng)
}

/// `(shape, rate)` of the collapsed `σ⁻¹` conditional.
pub fn collapsed_sigma_conditional(z: &[f64], fitted: &[f64], spec: &QuantileSpec, hyper: &Hyperparams) -> (f64, f64) {
    let s: f64 = z
        .iter()
        .zip(fitted)
        .map(|(zi, fi)| spec.check_loss(zi - fi))
        .sum();
    (hyper.c0 + z.len() as f64, hyper.d0 + s)
}

/// Non-collapsed scale update, conditional on the mixture weights.
pub fn step_sigma_full<R: Rng + ?Sized>(
    z: &[f64],
    fitted: &[f64],
    v: &[f64],
    spec: &QuantileSpec,
    hyper: &Hyperparams,
    rng: &mut R,
) -> f64 {
    let (shape, rate) = full_sigma_conditional(z, fitted, v, spec, hyper);
    1.0 / gamma_unchecked(shape, rate, rng)
}

/// `(shape, rate)` of `σ⁻¹ | β, v, z`:
/// `Gamma(c0 + 3n/2, d0 + Σ v_i + Σ (z_i − θv_i − x_i'β)² / (2τ² v_i))`.
///
/// The `3n/2` collects `n/2` from the Gaussian likelihood and `n` from the
/// exponential prior on the weights.
pub fn full_sigma_conditional(
    z: &[f64],
    fitted: &[f64],
    v: &[f64],
    spec: &QuantileSpec,
    hyper: &Hyperparams,
) -> (f64, f64) {
    let tau_sq = spec.tau_sq();
    let mut sum_v = 0.0;
    let mut quad = 0.0;
    for ((zi, fi), vi) in z.iter().zip(fitted).zip(v) {
        let r = zi - spec.theta * vi - fi;
        sum_v += vi;
        quad += r * r / vi;
    }
    let n = z.len() as f64;
    (hyper.c0 + 1.5 * n, hyper.d0 + sum_v + quad / (2.0 * tau_sq))
}

/// `(mean, shape)` of the inverse Gaussian conditional of `v_i⁻¹`.
#[inline]
pub fn v_conditional(residual: f64, sigma: f64, spec: &QuantileSpec) -> (f64, f64) {
    let w = spec.spread();
    let r = residual.abs().max(RESIDUAL_FLOOR);
    (1.0 / (w * r), 1.0 / (2.0 * sigma * w))
}

/// `v_i⁻¹ ~ IG(1 / (q(1−q)|z_i − x_i'β|), 1 / (2σq(1−q)))`.
pub fn step_v<R: Rng + ?Sized>(
    z: &[f64],
    fitted: &[f64],
    sigma: f64,
    spec: &QuantileSpec,
    v: &mut [f64],
    rng: &mut R,
) {
    for ((vi, zi), fi) in v.iter_mut().zip(z).zip(fitted) {
        let (mean, shape) = v_conditional(zi - fi, sigma, spec);
        *vi = 1.0 / inverse_gaussian_unchecked(mean, shape, rng);
    }
}

/// Mean and covariance of `β | σ, v, z`.
///
/// Precision is `X'VX / (τ²σ) + B0⁻¹` with `V = diag(1/v_i)`; the mean
/// regresses the adjusted response `z_i − θv_i`.
pub fn beta_conditional(
    dataset: &OrdinalDataset,
    z: &[f64],
    v: &[f64],
    sigma: f64,
    spec: &QuantileSpec,
    prior: &BetaPrior,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let x = dataset.covariates();
    let p = x.ncols();
    let scale = 1.0 / (spec.tau_sq() * sigma);
    let mut precision = prior.precision.clone();
    let mut rhs = prior.precision_mean.clone();
    for i in 0..x.nrows() {
        let w = scale / v[i];
        let adjusted = z[i] - spec.theta * v[i];
        for a in 0..p {
            let xa = x[(i, a)] * w;
            rhs[a] += xa * adjusted;
            for b in 0..=a {
                precision[(a, b)] += xa * x[(i, b)];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            precision[(b, a)] = precision[(a, b)];
        }
    }
    let cov = spd_inverse(&precision).map_err(|e| {
        Error::Numeric(format!(
            "coefficient update at sigma = {sigma:e}, min v = {:e}: {e}",
            v.iter().cloned().fold(f64::INFINITY, f64::min)
        ))
    })?;
    let mean = &cov * rhs;
    Ok((mean, cov))
}

pub fn step_beta<R: Rng + ?Sized>(
    dataset: &OrdinalDataset,
    z: &[f64],
    v: &[f64],
    sigma: f64,
    spec: &QuantileSpec,
    prior: &BetaPrior,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let (mean, cov) = beta_conditional(dataset, z, v, sigma, spec, prior)?;
    sample_mvn(&mean, &cov, rng)
}

/// `z_i ~ TN_(δ_{y_i−1}, δ_{y_i})(x_i'β + θv_i, τ²σv_i)`.
#[allow(clippy::too_many_arguments)]
pub fn step_z<R: Rng + ?Sized>(
    dataset: &OrdinalDataset,
    fitted: &[f64],
    v: &[f64],
    sigma: f64,
    spec: &QuantileSpec,
    cutpoints: &Cutpoints,
    z: &mut [f64],
    rng: &mut R,
) {
    let tau_sq_sigma = spec.tau_sq() * sigma;
    for (i, &y) in dataset.responses().iter().enumerate() {
        let (lo, hi) = cutpoints.bounds(y);
        let mean = fitted[i] + spec.theta * v[i];
        let sd = (tau_sq_sigma * v[i]).sqrt();
        z[i] = truncated_normal_unchecked(mean, sd, lo, hi, rng);
    }
}

/// Per-category extremes of the latent responses: `(min, max)` for each
/// category `1..=C`, stored at index `c - 1`.
pub fn category_extremes(responses: &[usize], z: &[f64], categories: usize) -> Vec<(f64, f64)> {
    let mut ext = vec![(f64::INFINITY, f64::NEG_INFINITY); categories];
    for (&y, &zi) in responses.iter().zip(z) {
        let e = &mut ext[y - 1];
        e.0 = e.0.min(zi);
        e.1 = e.1.max(zi);
    }
    ext
}

/// Support of the uniform conditional of `δ_c`:
/// `L = max(max{z_i : y_i = c}, δ_{c−1})`, `U = min(min{z_i : y_i = c+1}, δ_{c+1})`.
pub fn delta_bounds(extremes: &[(f64, f64)], cutpoints: &Cutpoints, c: usize) -> (f64, f64) {
    let delta = cutpoints.delta();
    let lower = extremes[c - 1].1.max(delta[c - 1]);
    let upper = extremes[c].0.min(delta[c + 1]);
    (lower, upper)
}

/// Updates `δ_1, …, δ_{C−1}` in order, each from its uniform conditional.
pub fn step_delta<R: Rng + ?Sized>(
    dataset: &OrdinalDataset,
    z: &[f64],
    cutpoints: &mut Cutpoints,
    rng: &mut R,
) -> Result<()> {
    let categories = dataset.categories();
    let extremes = category_extremes(dataset.responses(), z, categories);
    for c in 1..categories {
        let (lower, upper) = delta_bounds(&extremes, cutpoints, c);
        if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
            return Err(Error::Numeric(format!(
                "cutpoint {c} has empty support ({lower}, {upper}); latent responses violate the current cutpoints {:?}",
                cutpoints.interior()
            )));
        }
        let u: f64 = rng.sample(Open01);
        let mut value = lower + u * (upper - lower);
        if value <= lower || value >= upper {
            value = 0.5 * (lower + upper);
        }
        cutpoints.set_interior(c, value);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn dataset(codes: Vec<usize>, x: &[f64], categories: usize) -> OrdinalDataset {
        let m = DMatrix::from_column_slice(x.len(), 1, x);
        OrdinalDataset::with_numeric_labels(codes, m, categories).unwrap()
    }

    #[test]
    fn collapsed_sigma_rate() {
        let h = Hyperparams::default_for(1);
        let spec = QuantileSpec::new(0.5).unwrap();
        let (shape, rate) = collapsed_sigma_conditional(&[1.0, 2.0], &[0.0, 0.0], &spec, &h);
        assert_eq!(shape, 2.001);
        assert!((rate - (1.5 + 1e-3)).abs() < 1e-15);
        let (_, rate) = collapsed_sigma_conditional(&[1.0, 2.0], &[1.0, 2.0], &spec, &h);
        assert_eq!(rate, h.d0);
    }

    #[test]
    fn collapsed_sigma_gamma_mean() {
        let h = Hyperparams::default_for(1);
        let spec = QuantileSpec::new(0.3).unwrap();
        let z = [0.5, -1.0, 2.0, 0.1, -0.3];
        let fitted = [0.0, 0.2, 1.0, 0.0, 0.0];
        let (shape, rate) = collapsed_sigma_conditional(&z, &fitted, &spec, &h);
        let mut rng = rng_from_seed(1);
        let n = 100_000;
        let m = (0..n)
            .map(|_| 1.0 / step_sigma_collapsed(&z, &fitted, &spec, &h, &mut rng))
            .sum::<f64>()
            / n as f64;
        assert!((m / (shape / rate) - 1.0).abs() < 0.01);
    }

    #[test]
    fn full_sigma_rate_without_quadratic() {
        let h = Hyperparams::default_for(1);
        let spec = QuantileSpec::new(0.25).unwrap();
        let v = [0.7, 0.7, 0.7];
        // z chosen so that z − θv − fitted vanishes.
        let fitted = [1.0, -2.0, 0.5];
        let z: Vec<f64> = fitted.iter().zip(&v).map(|(f, vi)| f + spec.theta * vi).collect();
        let (shape, rate) = full_sigma_conditional(&z, &fitted, &v, &spec, &h);
        assert!((rate - (h.d0 + 2.1)).abs() < 1e-12);
        assert_eq!(shape, h.c0 + 4.5);
    }

    #[test]
    fn v_conditional_values() {
        let spec = QuantileSpec::new(0.5).unwrap();
        assert_eq!(v_conditional(2.0, 1.0, &spec), (2.0, 2.0));
        assert_eq!(v_conditional(-2.0, 1.0, &spec), (2.0, 2.0));
        let (mean, _) = v_conditional(0.0, 1.0, &spec);
        assert_eq!(mean, 1.0 / (0.25 * RESIDUAL_FLOOR));
        let mut v = vec![1.0; 3];
        let mut rng = rng_from_seed(3);
        step_v(&[1.0, 1.0, 3.0], &[1.0, 0.0, 0.0], 0.7, &spec, &mut v, &mut rng);
        assert!(v.iter().all(|&x| x > 0.0 && x.is_finite()));
    }

    #[test]
    fn beta_conditional_flat_prior_is_least_squares() {
        let spec = QuantileSpec::new(0.5).unwrap();
        let d = dataset(vec![1, 2], &[1.0, 1.0], 2);
        let (mean, cov) = beta_conditional(&d, &[2.0, 4.0], &[1.0, 1.0], 0.5, &spec, &BetaPrior::flat(1)).unwrap();
        assert!((mean[0] - 3.0).abs() < 1e-12);
        // Precision is X'X / (τ²σ) = 2 / 4.
        assert!((cov[(0, 0)] - 2.0).abs() < 1e-12);

        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.5, 2.0, -1.0, 0.3, 0.8, -1.2, 2.0]);
        let d = OrdinalDataset::with_numeric_labels(vec![1, 2, 1, 2], x.clone(), 2).unwrap();
        let z = [1.0, 2.5, -0.3, 0.7];
        let (mean, cov) = beta_conditional(&d, &z, &[1.0; 4], 0.5, &spec, &BetaPrior::flat(2)).unwrap();
        let ols = (x.transpose() * &x).try_inverse().unwrap() * x.transpose() * DVector::from_column_slice(&z);
        assert!((mean - ols).abs().max() < 1e-10);
        assert!((&cov - cov.transpose()).abs().max() == 0.0);
        assert!(cov.clone().symmetric_eigenvalues().iter().all(|&e| e > 0.0));
    }

    #[test]
    fn z_respects_categories() {
        let spec = QuantileSpec::new(0.3).unwrap();
        let d = dataset(vec![1, 2, 3, 1, 3], &[0.0; 5], 3);
        let cut = Cutpoints::from_interior(&[5.0, 8.0]).unwrap();
        let mut z = vec![0.0; 5];
        let mut rng = rng_from_seed(4);
        for _ in 0..200 {
            step_z(&d, &[6.0; 5], &[1.0; 5], 1.0, &spec, &cut, &mut z, &mut rng);
            assert!(z[0] < 5.0 && z[3] < 5.0);
            assert!(z[1] >= 5.0 && z[1] < 8.0);
            assert!(z[2] > 8.0 && z[4] > 8.0);
        }
    }

    #[test]
    fn delta_bounds_formula() {
        let cut = Cutpoints::from_interior(&[5.0, 8.0]).unwrap();
        let responses = [1, 2, 2, 3, 1];
        let z = [4.8, 5.3, 7.0, 9.0, 1.0];
        let ext = category_extremes(&responses, &z, 3);
        assert_eq!(delta_bounds(&ext, &cut, 1), (4.8, 5.3));
        assert_eq!(delta_bounds(&ext, &cut, 2), (7.0, 9.0));
    }

    #[test]
    fn delta_bounds_brute_force() {
        let mut rng = rng_from_seed(6);
        let cut = Cutpoints::from_interior(&[5.0, 8.0]).unwrap();
        for _ in 0..50 {
            let responses: Vec<usize> = (0..30).map(|i| 1 + i % 3).collect();
            let z: Vec<f64> = responses
                .iter()
                .map(|&y| {
                    let (lo, hi) = cut.bounds(y);
                    let (lo, hi) = (lo.max(0.0), hi.min(13.0));
                    lo + rng.random::<f64>() * (hi - lo)
                })
                .collect();
            // Enumerate every observation to find the tightest constraints.
            let mut lo1 = f64::NEG_INFINITY;
            let mut hi1 = f64::INFINITY;
            for (&y, &zi) in responses.iter().zip(&z) {
                if y == 1 && zi > lo1 {
                    lo1 = zi;
                }
                if y >= 2 && zi < hi1 {
                    hi1 = zi;
                }
            }
            let ext = category_extremes(&responses, &z, 3);
            let (l, u) = delta_bounds(&ext, &cut, 1);
            assert_eq!(l, lo1);
            assert_eq!(u, hi1.min(8.0));
            assert!(l < 5.0 && u >= 5.0);
        }
    }

    #[test]
    fn delta_step_preserves_order() {
        let d = dataset(vec![1, 2, 3, 4, 1, 2, 3, 4], &[0.0; 8], 4);
        let mut cut = Cutpoints::from_interior(&[1.0, 2.0, 3.0]).unwrap();
        let z = [0.5, 1.5, 2.5, 3.5, 0.9, 1.1, 2.9, 3.1];
        let mut rng = rng_from_seed(7);
        for _ in 0..500 {
            step_delta(&d, &z, &mut cut, &mut rng).unwrap();
            assert!(cut.is_strictly_increasing());
            let i = cut.interior();
            assert!(i[0] > 0.9 && i[0] < 1.1);
            assert!(i[1] > 1.5 && i[1] < 2.5);
            assert!(i[2] > 2.9 && i[2] < 3.1);
        }
    }

    #[test]
    fn delta_step_reports_violation() {
        let d = dataset(vec![1, 2], &[0.0; 2], 2);
        let mut cut = Cutpoints::from_interior(&[0.0]).unwrap();
        let mut rng = rng_from_seed(7);
        let err = step_delta(&d, &[3.0, 1.0], &mut cut, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Numeric(m) if m.contains("empty support")));
    }
}
