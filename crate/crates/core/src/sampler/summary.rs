use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::quantile_sorted;

/// Below this magnitude the posterior mean of `δ_{C−1}` cannot scale ratios.
pub const DEGENERATE_SCALE: f64 = 1e-8;

/// Retained draws, one row per kept sweep: `β_1..β_p, δ_1..δ_{C−1}, σ`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Draws {
    p: usize,
    cutpoints: usize,
    values: Vec<f64>,
}

impl Draws {
    pub fn new(p: usize, cutpoints: usize) -> Self {
        Self {
            p,
            cutpoints,
            values: Vec::new(),
        }
    }

    pub fn with_capacity(p: usize, cutpoints: usize, rows: usize) -> Self {
        Self {
            p,
            cutpoints,
            values: Vec::with_capacity(rows * (p + cutpoints + 1)),
        }
    }

    pub fn width(&self) -> usize {
        self.p + self.cutpoints + 1
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn cutpoints(&self) -> usize {
        self.cutpoints
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.width()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn push(&mut self, beta: &[f64], interior: &[f64], sigma: f64) {
        assert_eq!(beta.len(), self.p);
        assert_eq!(interior.len(), self.cutpoints);
        self.values.extend_from_slice(beta);
        self.values.extend_from_slice(interior);
        self.values.push(sigma);
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.width())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// `beta_1.., delta_1.., sigma`.
    pub fn column_names(&self) -> Vec<String> {
        (1..=self.p)
            .map(|j| format!("beta_{j}"))
            .chain((1..=self.cutpoints).map(|j| format!("delta_{j}")))
            .chain(std::iter::once("sigma".to_string()))
            .collect()
    }
}

/// Per-parameter trace summary for convergence monitoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
    pub lag1_autocorrelation: f64,
    /// `n (1 − ρ₁) / (1 + ρ₁)`, the AR(1) effective sample size.
    pub ess_ar1: f64,
}

impl TraceSummary {
    fn from_trace(name: String, trace: &[f64]) -> Self {
        let n = trace.len() as f64;
        let mean = trace.iter().sum::<f64>() / n;
        let ss: f64 = trace.iter().map(|x| (x - mean).powi(2)).sum();
        let sd = if trace.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
        let lag1 = if ss > 0.0 {
            trace
                .windows(2)
                .map(|w| (w[0] - mean) * (w[1] - mean))
                .sum::<f64>()
                / ss
        } else {
            0.0
        };
        let mut sorted = trace.to_vec();
        sorted.sort_by(f64::total_cmp);
        let rho = lag1.clamp(-0.999_999, 0.999_999);
        Self {
            name,
            mean,
            sd,
            q025: quantile_sorted(&sorted, 0.025),
            q975: quantile_sorted(&sorted, 0.975),
            lag1_autocorrelation: lag1,
            ess_ar1: n * (1.0 - rho) / (1.0 + rho),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mean_beta: Vec<f64>,
    /// Posterior means of the interior cutpoints `δ_1..δ_{C−1}`.
    pub mean_cutpoints: Vec<f64>,
    pub mean_sigma: f64,
    /// `mean_beta / mean δ_{C−1}`, the identifiable estimates.
    pub ratios: Vec<f64>,
    pub diagnostics: Vec<TraceSummary>,
    #[serde(skip)]
    pub draws: Draws,
}

/// Posterior means and ratio estimates from retained draws.
///
/// Ratios divide posterior means; they are not means of per-draw ratios.
pub fn summarize(draws: Draws) -> Result<PosteriorSummary> {
    if draws.is_empty() {
        return Err(Error::Config("no retained draws to summarize".into()));
    }
    let n = draws.len() as f64;
    let mut means = vec![0.0; draws.width()];
    for row in draws.rows() {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    let p = draws.p();
    let mean_beta = means[..p].to_vec();
    let mean_cutpoints = means[p..p + draws.cutpoints()].to_vec();
    let mean_sigma = means[draws.width() - 1];
    let scale = *mean_cutpoints.last().expect("at least one cutpoint");
    if !(scale.abs() >= DEGENERATE_SCALE) {
        return Err(Error::DegenerateScale { mean_cutpoint: scale });
    }
    let ratios = mean_beta.iter().map(|b| b / scale).collect();
    let diagnostics = draws
        .column_names()
        .into_iter()
        .enumerate()
        .map(|(j, name)| TraceSummary::from_trace(name, &draws.column(j)))
        .collect();
    Ok(PosteriorSummary {
        mean_beta,
        mean_cutpoints,
        mean_sigma,
        ratios,
        diagnostics,
        draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_of_means() {
        let mut d = Draws::new(1, 2);
        d.push(&[2.0], &[4.0, 6.0], 1.0);
        d.push(&[4.0], &[5.0, 10.0], 3.0);
        let s = summarize(d).unwrap();
        assert_eq!(s.mean_beta, vec![3.0]);
        assert_eq!(s.mean_cutpoints, vec![4.5, 8.0]);
        assert_eq!(s.mean_sigma, 2.0);
        assert_eq!(s.ratios, vec![0.375]);
        // The mean of per-draw ratios would be (2/6 + 4/10) / 2.
        assert_ne!(s.ratios[0], (2.0 / 6.0 + 0.4) / 2.0);
    }

    #[test]
    fn two_covariates() {
        let mut d = Draws::new(2, 2);
        d.push(&[3.0, 2.0], &[5.0, 8.0], 1.0);
        let s = summarize(d).unwrap();
        assert_eq!(s.ratios, vec![0.375, 0.25]);
        assert_eq!(s.diagnostics.len(), 5);
        assert_eq!(s.diagnostics[2].name, "delta_1");
    }

    #[test]
    fn degenerate_scale() {
        let mut d = Draws::new(1, 2);
        d.push(&[3.0], &[-1.0, 0.0], 1.0);
        assert!(matches!(summarize(d), Err(Error::DegenerateScale { .. })));
        assert!(summarize(Draws::new(1, 2)).is_err());
    }
}
