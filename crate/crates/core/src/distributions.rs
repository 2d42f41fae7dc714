//! Densities and samplers used by the model.
//!
//! All samplers take the rng explicitly, so a fixed seed reproduces every
//! draw. The `*_unchecked` variants skip parameter validation and are meant
//! for the sampler's inner loops, where parameters are valid by construction.

use nalgebra::{DMatrix, DVector};
use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, Definiteness};

fn check_unit_interval(name: &'static str, q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(name, q, "must lie in (0, 1)"))
    }
}

/// Target quantile and the constants of its normal-exponential mixture
/// representation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileSpec {
    pub q: f64,
    /// Mean multiplier `(1 - 2q) / (q(1 - q))`.
    pub theta: f64,
    /// Scale multiplier `sqrt(2 / (q(1 - q)))`.
    pub tau: f64,
}

impl QuantileSpec {
    pub fn new(q: f64) -> Result<Self> {
        check_unit_interval("q", q)?;
        let w = q * (1.0 - q);
        Ok(Self {
            q,
            theta: (1.0 - 2.0 * q) / w,
            tau: (2.0 / w).sqrt(),
        })
    }

    /// `q(1 - q)`.
    #[inline]
    pub fn spread(&self) -> f64 {
        self.q * (1.0 - self.q)
    }

    #[inline]
    pub fn tau_sq(&self) -> f64 {
        2.0 / self.spread()
    }

    #[inline]
    pub fn check_loss(&self, u: f64) -> f64 {
        if u < 0.0 {
            (self.q - 1.0) * u
        } else {
            self.q * u
        }
    }
}

/// Check function `ρ_q(u) = u (q − I(u < 0))`.
pub fn check_loss(u: f64, q: f64) -> Result<f64> {
    check_unit_interval("q", q)?;
    Ok(if u < 0.0 { (q - 1.0) * u } else { q * u })
}

/// Asymmetric Laplace parameters: location, scale, and skew.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AldParams {
    pub mu: f64,
    pub sigma: f64,
    pub q: f64,
}

impl AldParams {
    pub fn new(mu: f64, sigma: f64, q: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::domain("mu", mu, "must be finite"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain("sigma", sigma, "must be positive and finite"));
        }
        check_unit_interval("q", q)?;
        Ok(Self { mu, sigma, q })
    }
}

pub fn ald_pdf(u: f64, p: &AldParams) -> f64 {
    let s = (u - p.mu) / p.sigma;
    let rho = if s < 0.0 { (p.q - 1.0) * s } else { p.q * s };
    p.q * (1.0 - p.q) / p.sigma * (-rho).exp()
}

/// Closed form CDF, obtained by integrating each exponential branch of the
/// density. Equals `q` at the location.
pub fn ald_cdf(u: f64, p: &AldParams) -> f64 {
    if u == f64::NEG_INFINITY {
        return 0.0;
    }
    if u == f64::INFINITY {
        return 1.0;
    }
    let s = (u - p.mu) / p.sigma;
    if s <= 0.0 {
        p.q * ((1.0 - p.q) * s).exp()
    } else {
        1.0 - (1.0 - p.q) * (-p.q * s).exp()
    }
}

/// Maps a mixture pair `(w, u)` to `μ + σθw + στ√w·u`.
pub fn ald_from_mixture(p: &AldParams, w: f64, u: f64) -> f64 {
    let spread = p.q * (1.0 - p.q);
    let theta = (1.0 - 2.0 * p.q) / spread;
    let tau = (2.0 / spread).sqrt();
    p.mu + p.sigma * theta * w + p.sigma * tau * w.sqrt() * u
}

/// ALD draw through its normal-exponential mixture, `w ~ Exp(1)` and
/// `u ~ N(0, 1)`.
pub fn sample_ald_mixture<R: Rng + ?Sized>(p: &AldParams, rng: &mut R) -> f64 {
    let w: f64 = Exp1.sample(rng);
    let u: f64 = StandardNormal.sample(rng);
    ald_from_mixture(p, w, u)
}

/// Inverse Gaussian draw with the given mean and shape.
pub fn sample_inverse_gaussian<R: Rng + ?Sized>(mean: f64, shape: f64, rng: &mut R) -> Result<f64> {
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(Error::domain("mean", mean, "must be positive and finite"));
    }
    if !(shape > 0.0 && shape.is_finite()) {
        return Err(Error::domain("shape", shape, "must be positive and finite"));
    }
    Ok(inverse_gaussian_unchecked(mean, shape, rng))
}

/// Michael–Schucany–Haas transformation: the smaller root of the chi-square
/// transform, then a uniform choice between it and its reflection `μ²/x`.
///
/// The smaller root is computed as `μ / (1 + a + sqrt(a² + 2a))` with
/// `a = μy / (2λ)`, which stays accurate when `μ` is huge.
pub(crate) fn inverse_gaussian_unchecked<R: Rng + ?Sized>(mean: f64, shape: f64, rng: &mut R) -> f64 {
    let n: f64 = StandardNormal.sample(rng);
    let y = n * n;
    let a = mean * y / (2.0 * shape);
    let x = mean / (1.0 + a + (a * a + 2.0 * a).sqrt());
    let u: f64 = rng.random();
    let draw = if u <= mean / (mean + x) { x } else { mean * (mean / x) };
    // x underflows to 0 only for astronomically large a; keep the support.
    if draw > 0.0 {
        draw
    } else {
        f64::MIN_POSITIVE
    }
}

/// Gamma draw parameterized by shape and rate.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite()) {
        return Err(Error::domain("shape", shape, "must be positive and finite"));
    }
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::domain("rate", rate, "must be positive and finite"));
    }
    Ok(gamma_unchecked(shape, rate, rng))
}

pub(crate) fn gamma_unchecked<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0 / rate)
        .expect("validated gamma parameters")
        .sample(rng)
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile: Acklam's rational approximation followed by one
/// Newton step on the CDF.
pub fn normal_quantile(p: f64) -> Result<f64> {
    check_unit_interval("p", p)?;
    Ok(normal_quantile_unchecked(p))
}

fn normal_quantile_unchecked(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    // Newton on whichever tail keeps the CDF difference well conditioned.
    let step = if x <= 0.0 {
        (normal_cdf(x) - p) / normal_pdf(x)
    } else {
        ((1.0 - p) - normal_cdf(-x)) / normal_pdf(x)
    };
    if step.is_finite() {
        x - step
    } else {
        x
    }
}

/// Reference error laws of the simulation designs (unit scale, zero location).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorLaw {
    Normal,
    Laplace,
}

impl ErrorLaw {
    pub fn name(&self) -> &'static str {
        match self {
            ErrorLaw::Normal => "normal",
            ErrorLaw::Laplace => "laplace",
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ErrorLaw::Normal => StandardNormal.sample(rng),
            ErrorLaw::Laplace => {
                let e: f64 = Exp1.sample(rng);
                if rng.random::<bool>() {
                    e
                } else {
                    -e
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            ErrorLaw::Normal => normal_cdf(x),
            ErrorLaw::Laplace if x < 0.0 => 0.5 * x.exp(),
            ErrorLaw::Laplace => 1.0 - 0.5 * (-x).exp(),
        }
    }
}

impl std::str::FromStr for ErrorLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(ErrorLaw::Normal),
            "laplace" => Ok(ErrorLaw::Laplace),
            other => Err(Error::Config(format!("unknown error law {other:?}"))),
        }
    }
}

/// `p`-quantile of the standard normal or standard (unit scale) Laplace law.
pub fn quantile_of(law: ErrorLaw, p: f64) -> Result<f64> {
    check_unit_interval("p", p)?;
    Ok(match law {
        ErrorLaw::Normal => normal_quantile_unchecked(p),
        ErrorLaw::Laplace if p <= 0.5 => (2.0 * p).ln(),
        ErrorLaw::Laplace => -(2.0 * (1.0 - p)).ln(),
    })
}

/// Standardized bound beyond which the tail samplers replace the inverse CDF.
const TAIL_SWITCH: f64 = 4.0;

/// Normal `N(mean, variance)` restricted to the open interval `(lo, hi)`.
/// Either bound may be infinite.
pub fn sample_truncated_normal<R: Rng + ?Sized>(
    mean: f64,
    variance: f64,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<f64> {
    if !mean.is_finite() {
        return Err(Error::domain("mean", mean, "must be finite"));
    }
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::domain("variance", variance, "must be positive and finite"));
    }
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(Error::domain("lo", lo, "lower bound must be below the upper bound"));
    }
    Ok(truncated_normal_unchecked(mean, variance.sqrt(), lo, hi, rng))
}

pub(crate) fn truncated_normal_unchecked<R: Rng + ?Sized>(
    mean: f64,
    sd: f64,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> f64 {
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    let x = if a >= TAIL_SWITCH {
        tail_truncated(a, b, rng)
    } else if b <= -TAIL_SWITCH {
        -tail_truncated(-b, -a, rng)
    } else if a > 0.0 {
        // Work in the lower half, where the CDF keeps relative precision.
        -inverse_cdf_truncated(-b, -a, rng)
    } else {
        inverse_cdf_truncated(a, b, rng)
    };
    let z = mean + sd * x;
    if z <= lo {
        lo.next_up().min((lo + hi) / 2.0)
    } else if z >= hi {
        hi.next_down().max((lo + hi) / 2.0)
    } else {
        z
    }
}

/// Standard normal on `(a, b)` by inversion; requires `a <= 0` or a
/// moderate `a`.
fn inverse_cdf_truncated<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let pa = normal_cdf(a);
    let pb = normal_cdf(b);
    let u: f64 = rng.sample(Open01);
    let p = pa + u * (pb - pa);
    if p <= 0.0 || p >= 1.0 || pb <= pa {
        return if b.is_finite() && a.is_finite() { 0.5 * (a + b) } else { a.max(b.min(0.0)) };
    }
    normal_quantile_unchecked(p).clamp(a, b)
}

/// Standard normal on `(a, b)` with `a >= TAIL_SWITCH`.
///
/// Wide intervals use the translated-exponential proposal with the optimal
/// rate; narrow ones use a uniform proposal on `(a, b)`.
fn tail_truncated<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if (b - a) * a < 1.0 {
        loop {
            let u: f64 = rng.sample(Open01);
            let x = a + u * (b - a);
            let accept: f64 = rng.random();
            if accept <= (-(x * x - a * a) / 2.0).exp() {
                return x;
            }
        }
    }
    let alpha = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let e: f64 = Exp1.sample(rng);
        let x = a + e / alpha;
        if x >= b {
            continue;
        }
        let accept: f64 = rng.random();
        if accept <= (-(x - alpha) * (x - alpha) / 2.0).exp() {
            return x;
        }
    }
}

/// Multivariate normal draw. The covariance may be singular; it must be
/// symmetric positive semi-definite up to the jitter ladder.
pub fn sample_mvn<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    covariance: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let p = mean.len();
    if covariance.nrows() != p || covariance.ncols() != p {
        return Err(Error::Config(format!(
            "covariance is {}x{} but mean has length {p}",
            covariance.nrows(),
            covariance.ncols()
        )));
    }
    let chol = cholesky(covariance, Definiteness::Semi)?;
    let e = DVector::from_fn(p, |_, _| StandardNormal.sample(rng));
    Ok(mean + chol.l * e)
}
