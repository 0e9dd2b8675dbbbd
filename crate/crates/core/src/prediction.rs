//! Season-best record probabilities.
//!
//! With `N` sub-threshold results in a horizon, the best margin `Y*` has
//! `P(Y* <= y0) = G(y0)^N`; with `N ~ Poisson(lambda)` this becomes
//! `exp(-lambda * (1 - G(y0)))`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{exp, exp_m1, ln, ln_1p};
use crate::model::ModelParams;

/// Default expected sub-threshold volume for a season.
///
/// A judgment call rather than an estimate: recent 5000 m seasons had 19, 9,
/// 3, 18 and 14 races under 6:10, and an Olympic season draws more top efforts.
pub const DEFAULT_LAMBDA: f64 = 25.0;

/// How many sub-threshold results the horizon holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VolumeModel {
    /// `N ~ Poisson(lambda)`.
    Poisson { lambda: f64 },
    /// Exactly `n` results, e.g. one event with a known field.
    Fixed { n: u32 },
}

impl VolumeModel {
    pub fn poisson(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Argument("lambda must be positive and finite"));
        }
        Ok(Self::Poisson { lambda })
    }

    pub fn fixed(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::Argument("fixed volume must be at least one"));
        }
        Ok(Self::Fixed { n })
    }

    /// `P(Y* > y)` given the single-result log survival `ln(1 - G(y))`.
    fn break_prob_from_log_survival(&self, log_surv: f64) -> f64 {
        let surv = exp(log_surv);
        let p = match *self {
            Self::Poisson { lambda } => -exp_m1(-lambda * surv),
            Self::Fixed { n } => -exp_m1(n as f64 * ln_1p(-surv)),
        };
        p.clamp(0.0, 1.0)
    }

    /// Single-result survival `1 - G(y0)` that yields break probability `p`,
    /// or `None` when no such survival in `(0, 1)` exists.
    pub fn survival_for_break_prob(&self, p: f64) -> Option<f64> {
        if !(p > 0.0 && p < 1.0) {
            return None;
        }
        let s = match *self {
            Self::Poisson { lambda } => -ln_1p(-p) / lambda,
            Self::Fixed { n } => -exp_m1(ln_1p(-p) / n as f64),
        };
        (s > 0.0 && s < 1.0).then_some(s)
    }
}

/// `P(Y* <= y0)`: the best margin of the horizon does not exceed `y0`.
pub fn best_of_season_cdf(params: &ModelParams, volume: &VolumeModel, y0: f64) -> Result<f64> {
    params.survival(y0)?;
    let surv = exp(params.log_survival_unchecked(y0));
    let cdf = match *volume {
        VolumeModel::Poisson { lambda } => exp(-lambda * surv),
        VolumeModel::Fixed { n } => exp(n as f64 * ln_1p(-surv)),
    };
    Ok(cdf.clamp(0.0, 1.0))
}

/// Probability that some result in the horizon beats `target_s`.
pub fn prob_break(
    params: &ModelParams,
    volume: &VolumeModel,
    target_s: f64,
    threshold_s: f64,
) -> Result<f64> {
    if !target_s.is_finite() || !threshold_s.is_finite() {
        return Err(Error::Argument("times must be finite"));
    }
    if target_s >= threshold_s {
        return Err(Error::Argument("target time must beat the threshold"));
    }
    let y0 = threshold_s - target_s;
    params.survival(y0)?;
    Ok(volume.break_prob_from_log_survival(params.log_survival_unchecked(y0)))
}

/// Margin `y` with `P(Y* <= y) = u`, for `u` in `(0, 1)`.
///
/// Returns 0 when even a zero margin has probability at least `u` (the
/// horizon may hold no result at all).
pub fn best_margin_quantile(params: &ModelParams, volume: &VolumeModel, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain("probability level must lie in (0, 1)"));
    }
    let surv = match *volume {
        VolumeModel::Poisson { lambda } => -ln(u) / lambda,
        VolumeModel::Fixed { n } => -exp_m1(ln(u) / n as f64),
    };
    if surv >= 1.0 {
        return Ok(0.0);
    }
    params.quantile(1.0 - surv)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub race_time_s: f64,
    pub p_break: f64,
}

/// Break probabilities over a grid of target times, sorted by time.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionCurve {
    pub points: Vec<CurvePoint>,
    pub params: ModelParams,
    pub volume: VolumeModel,
    pub threshold_s: f64,
}

pub fn prediction_curve(
    params: &ModelParams,
    volume: &VolumeModel,
    threshold_s: f64,
    time_grid: &[f64],
) -> Result<PredictionCurve> {
    if time_grid.is_empty() {
        return Err(Error::Argument("time grid is empty"));
    }
    let mut points = time_grid
        .iter()
        .map(|&t| {
            prob_break(params, volume, t, threshold_s).map(|p| CurvePoint {
                race_time_s: t,
                p_break: p,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|l, r| l.race_time_s.total_cmp(&r.race_time_s));
    Ok(PredictionCurve {
        points,
        params: *params,
        volume: *volume,
        threshold_s,
    })
}

/// Target times from the endpoint time (or `threshold - 15 s` without a
/// finite endpoint) up to one centisecond below the threshold, in 0.01 s steps.
pub fn default_time_grid(params: &ModelParams, threshold_s: f64) -> Vec<f64> {
    let top = libm::round(threshold_s * 100.0) as i64 - 1;
    let span = params.endpoint().map_or(15.0, |g| g.min(threshold_s));
    let bottom = (libm::ceil((threshold_s - span) * 100.0) as i64).max(1);
    (bottom..=top).map(|c| c as f64 / 100.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;
    use rand_distr::{Distribution, Poisson};

    const THRESHOLD: f64 = 370.0;

    fn fitted() -> ModelParams {
        ModelParams::new(0.208, 2.609).unwrap()
    }

    fn season() -> VolumeModel {
        VolumeModel::poisson(25.0).unwrap()
    }

    #[test]
    fn best_of_season_cdf_examples() {
        let p = fitted();
        let v = season();
        assert_eq!(
            best_of_season_cdf(&p, &v, p.endpoint().unwrap()).unwrap(),
            1.0
        );
        let at_zero = best_of_season_cdf(&p, &v, 0.0).unwrap();
        assert!((at_zero - (-25.0f64).exp()).abs() < 1e-20);
        let one = VolumeModel::fixed(1).unwrap();
        assert!((best_of_season_cdf(&p, &one, 5.0).unwrap() - p.cdf(5.0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn record_probabilities() {
        // 40-digit evaluations of 1 - exp(-25 (1 - a y/sigma)^(1/a)).
        let wr = prob_break(&fitted(), &season(), 361.56, THRESHOLD).unwrap();
        assert!((wr - 0.109_620_330_840_801_6).abs() < 1e-12);
        assert!((wr - 0.109).abs() < 0.001);
        let six = prob_break(&fitted(), &season(), 360.0, THRESHOLD).unwrap();
        assert!((six - 0.011_576_962_516_171_43).abs() < 1e-12);
        assert!((six - 0.012).abs() < 0.001);
        assert_eq!(
            prob_break(&fitted(), &season(), 355.0, THRESHOLD).unwrap(),
            0.0
        );
        assert!(prob_break(&fitted(), &season(), 370.0, THRESHOLD).is_err());
    }

    #[test]
    fn six_oh_four_is_roughly_even_odds() {
        // The curve gives 0.665 at 6:04; the season-best median sits at 6:03.41.
        let p = prob_break(&fitted(), &season(), 364.0, THRESHOLD).unwrap();
        assert!((p - 0.665_287_763_174_600_5).abs() < 1e-12);
        let median = THRESHOLD - best_margin_quantile(&fitted(), &season(), 0.5).unwrap();
        assert!((median - 363.406_921_926_906).abs() < 1e-9);
        assert!((median - 364.0).abs() < 1.0);
    }

    #[test]
    fn curve_examples() {
        let curve = prediction_curve(&fitted(), &season(), THRESHOLD, &[361.56, 360.0]).unwrap();
        assert_eq!(curve.points[0].race_time_s, 360.0);
        assert!((curve.points[0].p_break - 0.012).abs() < 0.001);
        assert!((curve.points[1].p_break - 0.109).abs() < 0.001);

        let near = prediction_curve(&fitted(), &season(), THRESHOLD, &[THRESHOLD - 1e-9]).unwrap();
        assert!((near.points[0].p_break - (1.0 - (-25.0f64).exp())).abs() < 1e-6);
        assert!(prediction_curve(&fitted(), &season(), THRESHOLD, &[]).is_err());
    }

    #[test]
    fn default_grid_is_monotone() {
        let grid = default_time_grid(&fitted(), THRESHOLD);
        assert_eq!(*grid.last().unwrap(), 369.99);
        assert_eq!(grid[0], 357.46);
        let curve = prediction_curve(&fitted(), &season(), THRESHOLD, &grid).unwrap();
        for w in curve.points.windows(2) {
            assert!(w[0].p_break <= w[1].p_break);
        }
        assert!(curve.points.iter().all(|c| c.p_break > 0.0));
        let expo = ModelParams::exponential(2.0).unwrap();
        assert_eq!(default_time_grid(&expo, THRESHOLD)[0], 355.0);
    }

    #[test]
    fn survival_inversion() {
        let v = season();
        let s = v.survival_for_break_prob(0.1).unwrap();
        assert!((v.break_prob_from_log_survival(s.ln()) - 0.1).abs() < 1e-14);
        let f = VolumeModel::fixed(7).unwrap();
        let s = f.survival_for_break_prob(0.3).unwrap();
        assert!((f.break_prob_from_log_survival(s.ln()) - 0.3).abs() < 1e-14);
        assert!(v.survival_for_break_prob(0.0).is_none());
        assert!(v.survival_for_break_prob(1.0).is_none());
    }

    #[test]
    fn monte_carlo_agrees_with_closed_form() {
        let params = fitted();
        let target = 361.56;
        let exact = prob_break(&params, &season(), target, THRESHOLD).unwrap();
        let pois = Poisson::new(25.0).unwrap();
        let mut rng = stream_rng(2024, 0);
        let reps = 100_000;
        let mut hits = 0u32;
        for _ in 0..reps {
            let n = pois.sample(&mut rng) as u64;
            let beat = (0..n).any(|_| {
                let u: f64 = rng.random();
                params.quantile(u).unwrap() > THRESHOLD - target
            });
            hits += beat as u32;
        }
        let freq = hits as f64 / reps as f64;
        let se = (exact * (1.0 - exact) / reps as f64).sqrt();
        assert!((freq - exact).abs() < 3.0 * se, "{freq} vs {exact}");
    }

    #[test]
    fn poisson_and_fixed_volume_agree_for_large_counts() {
        let params = fitted();
        let pois = prob_break(
            &params,
            &VolumeModel::poisson(2000.0).unwrap(),
            364.0,
            THRESHOLD,
        )
        .unwrap();
        let fixed = prob_break(
            &params,
            &VolumeModel::fixed(2000).unwrap(),
            364.0,
            THRESHOLD,
        )
        .unwrap();
        assert!(((pois - fixed) / fixed).abs() < 0.02);
        let pois = prob_break(
            &params,
            &VolumeModel::poisson(2000.0).unwrap(),
            359.0,
            THRESHOLD,
        )
        .unwrap();
        let fixed = prob_break(
            &params,
            &VolumeModel::fixed(2000).unwrap(),
            359.0,
            THRESHOLD,
        )
        .unwrap();
        assert!(((pois - fixed) / fixed).abs() < 0.02);
    }
}
