//! Partially collapsed Gibbs sampler for ordinal quantile regression.
//!
//! One sweep updates, in this order:
//!
//! 1. `σ` from its conditional with the mixture weights `v` integrated out
//!    (or conditional on `v` for [`Variant::FullGibbs`]);
//! 2. each `v_i` through an inverse Gaussian draw of `v_i⁻¹`;
//! 3. `β` from its multivariate normal conditional;
//! 4. each latent `z_i` from a normal truncated to its category's interval;
//! 5. the interior cutpoints from their uniform conditionals (skipped for
//!    [`Variant::FixedCutpoints`]).
//!
//! The order matters: step 1 marginalizes `v`, so `v` must be refreshed
//! before anything else conditions on it.

mod steps;
mod summary;

pub use steps::{
    beta_conditional, category_extremes, collapsed_sigma_conditional, delta_bounds, full_sigma_conditional,
    linear_predictor, step_beta, step_delta, step_sigma_collapsed, step_sigma_full, step_v, step_z, v_conditional,
    BetaPrior, RESIDUAL_FLOOR,
};
pub use summary::{summarize, Draws, PosteriorSummary, TraceSummary, DEGENERATE_SCALE};

use nalgebra::DVector;
use rand::Rng;

use crate::distributions::QuantileSpec;
use crate::error::{Error, Result};
use crate::model::{Cutpoints, FitConfig, Hyperparams, OrdinalDataset, Variant};
use crate::rng::{rng_from_seed, BorpsRng};
use crate::stats::quantile;

/// Redraws allowed for ordered initial cutpoints before falling back to
/// sorting.
const INIT_REDRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub beta: DVector<f64>,
    pub sigma: f64,
    /// Latent mixture weights `v_i = σ w_i`.
    pub v: Vec<f64>,
    /// Latent continuous responses.
    pub z: Vec<f64>,
    pub cutpoints: Cutpoints,
}

impl ChainState {
    /// Checks the post-sweep invariants; returns a description of the first
    /// violation.
    pub fn check_invariants(&self, dataset: &OrdinalDataset) -> Result<(), String> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(format!("sigma = {}", self.sigma));
        }
        if let Some(i) = self.v.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(format!("v[{i}] = {}", self.v[i]));
        }
        if !self.cutpoints.is_strictly_increasing() {
            return Err(format!("cutpoints {:?} not increasing", self.cutpoints.interior()));
        }
        for (i, (&y, &z)) in dataset.responses().iter().zip(&self.z).enumerate() {
            let (lo, hi) = self.cutpoints.bounds(y);
            if !(lo < z && z < hi) {
                return Err(format!("z[{i}] = {z} outside ({lo}, {hi}) for category {y}"));
            }
        }
        Ok(())
    }
}

/// Starting state: `β = 0`, `z = 1`, `v = 1`, and interior cutpoints
/// `δ_j = 2 u_j R_{j/C}` where `R` is the row sum of the covariates and
/// `u_j ~ U(0, 1)`, redrawn until strictly increasing.
pub fn init_state<R: Rng + ?Sized>(dataset: &OrdinalDataset, rng: &mut R) -> ChainState {
    let n = dataset.n();
    let categories = dataset.categories();
    let row_sums: Vec<f64> = dataset.covariates().row_iter().map(|r| r.sum()).collect();
    let anchors: Vec<f64> = (1..categories)
        .map(|j| quantile(&row_sums, j as f64 / categories as f64))
        .collect();

    let mut interior = vec![0.0; categories - 1];
    let mut ordered = false;
    for _ in 0..INIT_REDRAWS {
        for (d, r) in interior.iter_mut().zip(&anchors) {
            *d = 2.0 * rng.random::<f64>() * r;
        }
        if interior.windows(2).all(|w| w[0] < w[1]) {
            ordered = true;
            break;
        }
    }
    if !ordered {
        interior.sort_by(f64::total_cmp);
        if interior.windows(2).any(|w| w[0] >= w[1]) {
            // All anchors coincide (e.g. zero row sums); fall back to a unit grid.
            interior = (1..categories).map(|j| j as f64).collect();
        }
    }

    ChainState {
        beta: DVector::zeros(dataset.p()),
        sigma: 1.0,
        v: vec![1.0; n],
        z: vec![1.0; n],
        cutpoints: Cutpoints::from_interior(&interior).expect("ordered finite cutpoints"),
    }
}

/// A single chain over a borrowed dataset.
pub struct Chain<'a> {
    dataset: &'a OrdinalDataset,
    spec: QuantileSpec,
    hyper: &'a Hyperparams,
    prior: BetaPrior,
    variant: Variant,
    state: ChainState,
    fitted: Vec<f64>,
    rng: BorpsRng,
    sweeps: usize,
}

impl<'a> Chain<'a> {
    pub fn new(
        dataset: &'a OrdinalDataset,
        q: f64,
        hyper: &'a Hyperparams,
        variant: Variant,
        seed: u64,
    ) -> Result<Self> {
        let spec = QuantileSpec::new(q)?;
        if hyper.p() != dataset.p() {
            return Err(Error::Config(format!(
                "hyperparameters are for {} covariates, dataset has {}",
                hyper.p(),
                dataset.p()
            )));
        }
        let prior = BetaPrior::from_hyperparams(hyper)?;
        let mut rng = rng_from_seed(seed);
        let mut state = init_state(dataset, &mut rng);
        if let Variant::FixedCutpoints(delta) = &variant {
            if delta.len() + 1 != dataset.categories() {
                return Err(Error::Config(format!(
                    "fixed cutpoints need {} interior values, got {}",
                    dataset.categories() - 1,
                    delta.len()
                )));
            }
            state.cutpoints = Cutpoints::from_interior(delta)?;
        }
        let fitted = linear_predictor(dataset.covariates(), &state.beta);
        Ok(Self {
            dataset,
            spec,
            hyper,
            prior,
            variant,
            state,
            fitted,
            rng,
            sweeps: 0,
        })
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn spec(&self) -> &QuantileSpec {
        &self.spec
    }

    pub fn sweep(&mut self) -> Result<()> {
        let d = self.dataset;
        let s = &mut self.state;
        s.sigma = match self.variant {
            Variant::FullGibbs => step_sigma_full(&s.z, &self.fitted, &s.v, &self.spec, self.hyper, &mut self.rng),
            _ => step_sigma_collapsed(&s.z, &self.fitted, &self.spec, self.hyper, &mut self.rng),
        };
        step_v(&s.z, &self.fitted, s.sigma, &self.spec, &mut s.v, &mut self.rng);
        match step_beta(d, &s.z, &s.v, s.sigma, &self.spec, &self.prior, &mut self.rng) {
            Ok(beta) => s.beta = beta,
            Err(e) => return Err(self.annotate(e)),
        }
        self.fitted = linear_predictor(d.covariates(), &self.state.beta);
        let s = &mut self.state;
        step_z(d, &self.fitted, &s.v, s.sigma, &self.spec, &s.cutpoints, &mut s.z, &mut self.rng);
        if !matches!(self.variant, Variant::FixedCutpoints(_)) {
            if let Err(e) = step_delta(d, &s.z, &mut s.cutpoints, &mut self.rng) {
                return Err(self.annotate(e));
            }
        }
        self.sweeps += 1;
        Ok(())
    }

    fn annotate(&self, e: Error) -> Error {
        match e {
            Error::Numeric(m) => Error::Numeric(format!(
                "sweep {} (q = {}, sigma = {:e}, cutpoints {:?}): {m}",
                self.sweeps + 1,
                self.spec.q,
                self.state.sigma,
                self.state.cutpoints.interior()
            )),
            other => other,
        }
    }
}

/// Runs `config.iterations` sweeps from [`init_state`] and summarizes the
/// draws kept after burn-in (every `thin`-th).
pub fn run_chain(dataset: &OrdinalDataset, q: f64, hyper: &Hyperparams, config: &FitConfig) -> Result<PosteriorSummary> {
    config.validate(dataset.categories())?;
    let mut chain = Chain::new(dataset, q, hyper, config.variant.clone(), config.seed)?;
    let mut draws = Draws::with_capacity(dataset.p(), dataset.categories() - 1, config.retained());
    for it in 0..config.iterations {
        chain.sweep()?;
        if it >= config.burnin && (it - config.burnin + 1) % config.thin == 0 {
            let s = chain.state();
            draws.push(s.beta.as_slice(), s.cutpoints.interior(), s.sigma);
        }
    }
    summarize(draws)
}
