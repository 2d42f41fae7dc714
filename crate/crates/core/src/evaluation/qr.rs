//! Continuous quantile regression baseline.
//!
//! Minimizes `Σ ρ_q(y_i − x_i'β)` by damped Newton on a smoothed check loss
//! whose kink is replaced by a quadratic of half-width `ε`, with `ε` shrunk
//! geometrically from `1e-1` to `1e-8`. The smoothed optimum is then polished
//! by testing nearby interpolating fits (vertices of the linear program).

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

use crate::distributions::QuantileSpec;
use crate::error::{Error, Result};

const EPS_START: f64 = 1e-1;
const EPS_END: f64 = 1e-8;
const EPS_FACTOR: f64 = 0.1;
const MAX_NEWTON: usize = 200;

/// Solution of the continuous quantile regression problem.
#[derive(Debug, Clone, PartialEq)]
pub struct QrFit {
    pub coefficients: Vec<f64>,
    pub objective: f64,
}

pub fn check_objective(y: &[f64], x: &DMatrix<f64>, beta: &DVector<f64>, spec: &QuantileSpec) -> f64 {
    let fitted = x * beta;
    y.iter().zip(fitted.iter()).map(|(yi, fi)| spec.check_loss(yi - fi)).sum()
}

/// Smoothed check loss and its first two derivatives.
#[inline]
fn smoothed(r: f64, q: f64, eps: f64) -> (f64, f64, f64) {
    if r >= eps {
        (q * r, q, 0.0)
    } else if r <= -eps {
        ((q - 1.0) * r, q - 1.0, 0.0)
    } else {
        (
            r * r / (4.0 * eps) + (q - 0.5) * r + eps / 4.0,
            r / (2.0 * eps) + q - 0.5,
            1.0 / (2.0 * eps),
        )
    }
}

fn smoothed_objective(y: &[f64], x: &DMatrix<f64>, beta: &DVector<f64>, q: f64, eps: f64) -> f64 {
    let fitted = x * beta;
    y.iter().zip(fitted.iter()).map(|(yi, fi)| smoothed(yi - fi, q, eps).0).sum()
}

/// Minimizes the check loss over `β` for an arbitrary design matrix.
pub fn qr_fit(y: &[f64], x: &DMatrix<f64>, q: f64) -> Result<QrFit> {
    let spec = QuantileSpec::new(q)?;
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::Config(format!("{} responses but {n} design rows", y.len())));
    }
    if n <= p {
        return Err(Error::Config(format!("need more than {p} observations, got {n}")));
    }
    if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Config("non-finite value in quantile regression input".into()));
    }

    let data_scale = y.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let mut beta = least_squares_start(y, x);
    let mut eps = EPS_START * data_scale;
    let mut grad_norm = f64::INFINITY;
    while eps >= EPS_END * data_scale * (1.0 - 1e-9) {
        grad_norm = newton(y, x, q, eps, &mut beta);
        eps *= EPS_FACTOR;
    }

    let mut best = QrFit {
        objective: check_objective(y, x, &beta, &spec),
        coefficients: beta.as_slice().to_vec(),
    };
    polish(y, x, &spec, &beta, &mut best);

    if !best.objective.is_finite() {
        return Err(Error::Optimization { gap: grad_norm });
    }
    Ok(best)
}

/// Prepends an intercept column and fits; returns `[intercept, slopes…]`.
pub fn qr_baseline(response: &[f64], covariates: &DMatrix<f64>, q: f64) -> Result<Vec<f64>> {
    let (n, p) = covariates.shape();
    let design = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { covariates[(i, j - 1)] });
    Ok(qr_fit(response, &design, q)?.coefficients)
}

fn least_squares_start(y: &[f64], x: &DMatrix<f64>) -> DVector<f64> {
    let p = x.ncols();
    let xtx = x.transpose() * x + DMatrix::identity(p, p) * 1e-10;
    let xty = x.transpose() * DVector::from_column_slice(y);
    xtx.cholesky()
        .map(|c| c.solve(&xty))
        .unwrap_or_else(|| DVector::zeros(p))
}

/// Damped Newton at fixed `ε`; returns the final gradient norm.
fn newton(y: &[f64], x: &DMatrix<f64>, q: f64, eps: f64, beta: &mut DVector<f64>) -> f64 {
    let (n, p) = x.shape();
    let mut f = smoothed_objective(y, x, beta, q, eps);
    let mut grad_norm = f64::INFINITY;
    for _ in 0..MAX_NEWTON {
        let fitted = &*x * &*beta;
        let mut grad = DVector::<f64>::zeros(p);
        let mut hess = DMatrix::<f64>::zeros(p, p);
        for i in 0..n {
            let (_, d1, d2) = smoothed(y[i] - fitted[i], q, eps);
            for a in 0..p {
                grad[a] -= d1 * x[(i, a)];
                if d2 > 0.0 {
                    for b in 0..p {
                        hess[(a, b)] += d2 * x[(i, a)] * x[(i, b)];
                    }
                }
            }
        }
        grad_norm = grad.norm();
        if grad_norm <= 1e-12 * n as f64 {
            break;
        }
        // Ridge keeps the step defined when few residuals sit in the kink.
        let ridge = 1e-8 * (hess.diagonal().max().max(1.0)) + 1e-12 / eps;
        let direction = (hess + DMatrix::identity(p, p) * ridge)
            .cholesky()
            .map(|c| -c.solve(&grad))
            .unwrap_or_else(|| -&grad);
        let slope = grad.dot(&direction);
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-12 {
            let trial = &*beta + &direction * t;
            let ft = smoothed_objective(y, x, &trial, q, eps);
            if ft <= f + 1e-4 * t * slope {
                *beta = trial;
                improved = f - ft > 1e-15 * f.abs().max(1.0);
                f = ft;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    grad_norm
}

/// Evaluates interpolating fits through subsets of the observations with the
/// smallest residuals. An exact minimizer of the check loss interpolates at
/// least `p` observations, so this recovers it once the smoothed solution is
/// close.
fn polish(y: &[f64], x: &DMatrix<f64>, spec: &QuantileSpec, beta: &DVector<f64>, best: &mut QrFit) {
    let (n, p) = x.shape();
    let fitted = x * beta;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| (y[a] - fitted[a]).abs().total_cmp(&(y[b] - fitted[b]).abs()));
    let pool = (p + 4).min(n);
    let candidates = &order[..pool];
    for subset in candidates.iter().copied().combinations(p) {
        let a = DMatrix::from_fn(p, p, |i, j| x[(subset[i], j)]);
        let b = DVector::from_fn(p, |i, _| y[subset[i]]);
        let Some(sol) = a.lu().solve(&b) else { continue };
        if sol.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let obj = check_objective(y, x, &sol, spec);
        if obj < best.objective {
            best.objective = obj;
            best.coefficients = sol.as_slice().to_vec();
        }
    }
}
