use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative diagonal jitters tried in order before a factorization is
/// declared failed.
const JITTER_LADDER: [f64; 8] = [0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Definiteness {
    /// Zero pivots are accepted and yield zero columns.
    Semi,
    Strict,
}

/// Lower-triangular `L` with `L L' = A + jitter·I`.
#[derive(Debug, Clone)]
pub(crate) struct Cholesky {
    pub l: DMatrix<f64>,
    pub jitter: f64,
}

pub(crate) fn cholesky(a: &DMatrix<f64>, kind: Definiteness) -> Result<Cholesky> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Numeric(format!(
            "matrix is {}x{}, expected square",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0_f64, f64::max);
    let asym = (0..n)
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .map(|(i, j)| (a[(i, j)] - a[(j, i)]).abs())
        .fold(0.0_f64, f64::max);
    if asym > 1e-10 * scale.max(1.0) {
        return Err(Error::Numeric(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    if scale == 0.0 {
        if kind == Definiteness::Semi && a.iter().all(|&v| v == 0.0) {
            return Ok(Cholesky {
                l: DMatrix::zeros(n, n),
                jitter: 0.0,
            });
        }
        return Err(Error::Numeric("matrix has a zero diagonal".into()));
    }

    let mut worst_pivot = f64::INFINITY;
    for rel in JITTER_LADDER {
        let jitter = rel * scale;
        match try_factor(a, jitter, scale, kind) {
            Ok(l) => return Ok(Cholesky { l, jitter }),
            Err(pivot) => worst_pivot = worst_pivot.min(pivot),
        }
    }
    Err(Error::Numeric(format!(
        "Cholesky factorization of a {n}x{n} matrix failed after jitter up to {:e}: \
         smallest pivot {worst_pivot:e}, largest diagonal {scale:e}, \
         diagonal ratio {:e}",
        JITTER_LADDER[JITTER_LADDER.len() - 1] * scale,
        diag_ratio(a),
    )))
}

fn diag_ratio(a: &DMatrix<f64>) -> f64 {
    let d: Vec<f64> = (0..a.nrows()).map(|i| a[(i, i)]).collect();
    let max = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

/// Returns the offending pivot on failure.
fn try_factor(a: &DMatrix<f64>, jitter: f64, scale: f64, kind: Definiteness) -> Result<DMatrix<f64>, f64> {
    let n = a.nrows();
    let tol = 1e-14 * scale * n as f64;
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)] + jitter;
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        let zero_pivot = match kind {
            Definiteness::Semi if d < -tol => return Err(d),
            Definiteness::Semi => d <= tol,
            Definiteness::Strict if d <= tol => return Err(d),
            Definiteness::Strict => false,
        };
        if zero_pivot {
            // The rest of the column must vanish for the matrix to be PSD.
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                if s.abs() > tol.sqrt() * scale.sqrt() {
                    return Err(d.min(-s.abs()));
                }
            }
            continue;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Inverse of a positive definite matrix through its Cholesky factor,
/// symmetrized.
pub(crate) fn spd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = cholesky(a, Definiteness::Strict)?;
    let n = a.nrows();
    let l_inv = chol
        .l
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;
    let inv = l_inv.transpose() * l_inv;
    Ok((&inv + inv.transpose()) * 0.5)
}
