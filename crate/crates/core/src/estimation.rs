//! Maximum-likelihood fitting with observed-information standard errors.
//!
//! The search runs over `(a, ln sigma)` so the scale stays positive; points
//! outside the support get the finite [`LOGLIK_FLOOR`] and are simply ranked
//! last by the simplex.

use alloc::vec;

use crate::error::{Error, Result};
use crate::math::{exp, ln, sqrt};
use crate::model::{log_likelihood, ModelParams, LOGLIK_FLOOR};
use crate::optimize::{hessian, nelder_mead, newton_polish_max, spd_inverse, NelderMeadOptions};
use crate::sample::Sample;

/// Fits closer than this to `a * max(y) / sigma = 1` are flagged as boundary fits.
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandardErrors {
    pub se_a: f64,
    pub se_sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: ModelParams,
    /// `None` when the observed information is not positive definite.
    pub se: Option<StandardErrors>,
    pub loglik: f64,
    pub n: usize,
    pub converged: bool,
    /// The optimizer ran into the support boundary `a * max(y) / sigma -> 1`.
    pub at_boundary: bool,
    /// Objective evaluations used by the simplex search.
    pub iterations: usize,
}

impl FitResult {
    /// Finite endpoint `sigma/a` of the fitted model, if any.
    pub fn endpoint(&self) -> Option<f64> {
        self.params.endpoint()
    }
}

/// Finite-difference steps for the observed information in `(a, ln sigma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InformationSteps {
    pub h_a: f64,
    pub h_log_sigma: f64,
}

impl InformationSteps {
    pub fn at(params: &ModelParams) -> Self {
        Self {
            h_a: 1e-5 * params.a().abs().max(1.0),
            h_log_sigma: 1e-5,
        }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self {
            h_a: self.h_a * factor,
            h_log_sigma: self.h_log_sigma * factor,
        }
    }
}

fn loglik_log_scale(ys: &[f64], theta: &[f64]) -> f64 {
    log_likelihood(theta[0], exp(theta[1]), ys)
}

/// Maximum-likelihood estimate of `(a, sigma)`.
///
/// Starts from `init`, or from `(0.01, mean(y))` when none is given, and never
/// returns a fit worse than the start or the exponential fit `(0, mean(y))`.
pub fn fit_mle(sample: &Sample, init: Option<ModelParams>) -> Result<FitResult> {
    fit_mle_with(sample, init, &NelderMeadOptions::default())
}

pub fn fit_mle_with(
    sample: &Sample,
    init: Option<ModelParams>,
    opts: &NelderMeadOptions,
) -> Result<FitResult> {
    if sample.len() < 3 {
        return Err(Error::Argument("fitting needs at least three margins"));
    }
    if sample.is_degenerate() {
        return Err(Error::Argument(
            "all margins are equal; the fit is not identifiable",
        ));
    }
    let ys = sample.values();
    let mean = sample.mean();
    let exponential = ModelParams::exponential(mean)?;

    let default_init = ModelParams::new(0.01, mean)?;
    let start = match init {
        Some(p) if log_likelihood(p.a(), p.sigma(), ys) > LOGLIK_FLOOR => p,
        _ if log_likelihood(default_init.a(), default_init.sigma(), ys) > LOGLIK_FLOOR => {
            default_init
        }
        _ => exponential,
    };

    let objective = |theta: &[f64]| -loglik_log_scale(ys, theta);
    let found = nelder_mead(
        objective,
        &[start.a(), ln(start.sigma())],
        &[0.1, 0.1],
        opts,
    );
    let h = [1e-5 * found.x[0].abs().max(1.0), 1e-5];
    let (theta, ll) = newton_polish_max(|t: &[f64]| loglik_log_scale(ys, t), &found.x, &h, 5);

    let mut best = (ModelParams::new(theta[0], exp(theta[1]))?, ll);
    for candidate in [start, exponential] {
        let cl = log_likelihood(candidate.a(), candidate.sigma(), ys);
        if cl > best.1 {
            best = (candidate, cl);
        }
    }
    let (params, loglik) = best;

    let at_boundary = params.a() * sample.max() / params.sigma() > 1.0 - BOUNDARY_TOL;
    let se = if at_boundary {
        None
    } else {
        observed_information_se(sample, &params)
    };
    Ok(FitResult {
        params,
        se,
        loglik,
        n: sample.len(),
        converged: found.converged && !at_boundary && loglik > LOGLIK_FLOOR,
        at_boundary,
        iterations: found.evaluations,
    })
}

/// Standard errors from the inverse observed information at `params`.
pub fn observed_information_se(sample: &Sample, params: &ModelParams) -> Option<StandardErrors> {
    observed_information_se_with(sample, params, InformationSteps::at(params))
}

pub fn observed_information_se_with(
    sample: &Sample,
    params: &ModelParams,
    steps: InformationSteps,
) -> Option<StandardErrors> {
    let ys = sample.values();
    let theta = [params.a(), ln(params.sigma())];
    let hess = hessian(
        |t: &[f64]| loglik_log_scale(ys, t),
        &theta,
        &[steps.h_a, steps.h_log_sigma],
    );
    let info = vec![
        vec![-hess[0][0], -hess[0][1]],
        vec![-hess[1][0], -hess[1][1]],
    ];
    let cov = spd_inverse(&info)?;
    // delta method for sigma = exp(ln sigma)
    let se = StandardErrors {
        se_a: sqrt(cov[0][0]),
        se_sigma: params.sigma() * sqrt(cov[1][1]),
    };
    (se.se_a.is_finite() && se.se_sigma.is_finite()).then_some(se)
}
