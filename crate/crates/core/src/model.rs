//! The two-parameter tail model for margins below a threshold.
//!
//! All power terms go through `exp((1/a) * ln_1p(-a*y/sigma))` so the family
//! stays accurate for small `|a|` and close to the upper endpoint.

use crate::error::{Error, Result};
use crate::math::{exp, exp_m1, ln, ln_1p};

/// Below this `|a|` the exponential limit `1 - exp(-y/sigma)` is used.
pub const A_EPS: f64 = 1e-8;

/// Finite stand-in for `-inf` returned by [`log_likelihood`] outside the
/// support, so derivative-free optimizers can still rank such points.
pub const LOGLIK_FLOOR: f64 = -1.0e300;

/// Shape `a` and scale `sigma` of the model.
///
/// For `a > 0` the support is `[0, sigma/a]`; for `a <= 0` it is `[0, inf)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    a: f64,
    sigma: f64,
}

impl ModelParams {
    pub fn new(a: f64, sigma: f64) -> Result<Self> {
        if !a.is_finite() || !sigma.is_finite() {
            return Err(Error::Domain("model parameters must be finite"));
        }
        if sigma <= 0.0 {
            return Err(Error::Domain("scale sigma must be positive"));
        }
        Ok(Self { a, sigma })
    }

    /// The exponential limit `a = 0`.
    pub fn exponential(sigma: f64) -> Result<Self> {
        Self::new(0.0, sigma)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    fn is_exponential(&self) -> bool {
        self.a.abs() < A_EPS
    }

    /// `y >= 0` and `a*y/sigma < 1`.
    pub fn domain_ok(&self, y: f64) -> bool {
        y.is_finite() && y >= 0.0 && self.a * y / self.sigma < 1.0
    }

    /// Upper end of the support, `sigma/a`, when `a > 0`.
    pub fn endpoint(&self) -> Option<f64> {
        (self.a > 0.0 && !self.is_exponential()).then(|| self.sigma / self.a)
    }

    /// `ln(1 - G(y))`, which is `-inf` at and beyond a finite endpoint.
    pub(crate) fn log_survival_unchecked(&self, y: f64) -> f64 {
        if self.is_exponential() {
            return -y / self.sigma;
        }
        let t = -self.a * y / self.sigma;
        if t <= -1.0 {
            f64::NEG_INFINITY
        } else {
            ln_1p(t) / self.a
        }
    }

    /// `1 - G(y)`.
    pub fn survival(&self, y: f64) -> Result<f64> {
        check_margin(y)?;
        Ok(exp(self.log_survival_unchecked(y)).clamp(0.0, 1.0))
    }

    pub fn cdf(&self, y: f64) -> Result<f64> {
        check_margin(y)?;
        Ok((-exp_m1(self.log_survival_unchecked(y))).clamp(0.0, 1.0))
    }

    /// Density on the support, zero beyond it.
    ///
    /// At the endpoint itself the density limit is returned: 0 for `a < 1`,
    /// `1/sigma` for `a = 1`, and `f64::MAX` for `a > 1` where it diverges.
    pub fn pdf(&self, y: f64) -> Result<f64> {
        check_margin(y)?;
        if self.is_exponential() {
            return Ok(exp(-y / self.sigma) / self.sigma);
        }
        let t = -self.a * y / self.sigma;
        if t < -1.0 {
            return Ok(0.0);
        }
        if t == -1.0 {
            return Ok(if self.a < 1.0 {
                0.0
            } else if self.a == 1.0 {
                1.0 / self.sigma
            } else {
                f64::MAX
            });
        }
        Ok(exp((1.0 / self.a - 1.0) * ln_1p(t)) / self.sigma)
    }

    /// Inverse of [`cdf`](Self::cdf): `(sigma/a) * (1 - (1-u)^a)`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&u) {
            return Err(Error::Domain("quantile level must lie in [0, 1)"));
        }
        let log_tail = ln_1p(-u);
        if self.is_exponential() {
            return Ok(-self.sigma * log_tail);
        }
        Ok(-(self.sigma / self.a) * exp_m1(self.a * log_tail))
    }

    /// `sum_i { -ln sigma + (1/a - 1) ln(1 - a*y_i/sigma) }`.
    ///
    /// Returns [`LOGLIK_FLOOR`] when any margin falls outside the support.
    pub fn log_likelihood(&self, ys: &[f64]) -> Result<f64> {
        if ys.is_empty() {
            return Err(Error::Argument("log-likelihood needs a nonempty sample"));
        }
        Ok(log_likelihood(self.a, self.sigma, ys))
    }
}

fn check_margin(y: f64) -> Result<()> {
    if !y.is_finite() {
        return Err(Error::Domain("margin must be finite"));
    }
    if y < 0.0 {
        return Err(Error::Domain("margin must be nonnegative"));
    }
    Ok(())
}

/// Raw log-likelihood used inside the optimizers; no parameter validation
/// beyond mapping every invalid point to [`LOGLIK_FLOOR`].
pub fn log_likelihood(a: f64, sigma: f64, ys: &[f64]) -> f64 {
    if !(sigma > 0.0) || !a.is_finite() || !sigma.is_finite() {
        return LOGLIK_FLOOR;
    }
    let n = ys.len() as f64;
    if a.abs() < A_EPS {
        let mut total = 0.0;
        for &y in ys {
            if !(y >= 0.0) || !y.is_finite() {
                return LOGLIK_FLOOR;
            }
            total += y;
        }
        return -n * ln(sigma) - total / sigma;
    }
    let mut acc = 0.0;
    for &y in ys {
        let t = -a * y / sigma;
        if !(y >= 0.0) || !(t > -1.0) {
            return LOGLIK_FLOOR;
        }
        acc += ln_1p(t);
    }
    let ll = -n * ln(sigma) + (1.0 / a - 1.0) * acc;
    if ll.is_finite() {
        ll
    } else {
        LOGLIK_FLOOR
    }
}
