//! Model-adequacy checks: the monitoring process with a simulated envelope,
//! and a log-linear trend in the scale across seasons.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimation::fit_mle;
use crate::math::{exp, ln, sqrt};
use crate::model::{log_likelihood, ModelParams, LOGLIK_FLOOR};
use crate::optimize::{hessian, nelder_mead, newton_polish_max, spd_inverse, NelderMeadOptions};
use crate::rng::{simulate_sample, stream_rng};
use crate::sample::Sample;

/// Default monitoring range `[0, 10]` in margin units.
pub const DEFAULT_Y_MAX: f64 = 10.0;
pub const DEFAULT_GRID_POINTS: usize = 501;
pub const DEFAULT_SIM: usize = 25;

/// `Z_n(y) = sqrt(n) * (G(y; params) - G_n(y))` on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorCurve {
    pub grid: Vec<f64>,
    pub z: Vec<f64>,
    /// Exact supremum of `|Z_n|` over `[0, y_max]`, including both sides of
    /// every jump of the empirical CDF (not just the grid points).
    pub sup_abs: f64,
}

pub fn uniform_grid(y_max: f64, points: usize) -> Result<Vec<f64>> {
    if !(y_max > 0.0) || !y_max.is_finite() || points < 2 {
        return Err(Error::Argument(
            "grid needs a positive range and at least two points",
        ));
    }
    Ok((0..points)
        .map(|i| y_max * i as f64 / (points - 1) as f64)
        .collect())
}

/// Monitoring process of `sample` against `params` on `grid`.
pub fn monitor_process(
    sample: &Sample,
    params: &ModelParams,
    grid: &[f64],
) -> Result<MonitorCurve> {
    if grid.is_empty() {
        return Err(Error::Argument("monitoring grid is empty"));
    }
    let sorted = sample.sorted();
    let n = sorted.len() as f64;
    let root_n = sqrt(n);
    // right-continuous empirical CDF
    let ecdf = |y: f64| sorted.partition_point(|&v| v <= y) as f64 / n;
    let ecdf_left = |y: f64| sorted.partition_point(|&v| v < y) as f64 / n;

    let z = grid
        .iter()
        .map(|&y| Ok(root_n * (params.cdf(y)? - ecdf(y))))
        .collect::<Result<Vec<_>>>()?;

    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    let mut sup = 0.0f64;
    for y in [lo, hi] {
        sup = sup.max((params.cdf(y)? - ecdf(y)).abs());
    }
    for &t in sorted.iter().filter(|&&t| t >= lo && t <= hi) {
        let g = params.cdf(t)?;
        sup = sup.max((g - ecdf(t)).abs());
        if t > lo {
            sup = sup.max((g - ecdf_left(t)).abs());
        }
    }
    Ok(MonitorCurve {
        grid: grid.to_vec(),
        z,
        sup_abs: root_n * sup,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorOptions {
    pub sim: usize,
    pub seed: u64,
    /// Refit the model on every simulated dataset (parametric bootstrap);
    /// `false` plugs the original estimates into each simulated curve.
    pub refit: bool,
    pub y_max: f64,
    pub grid_points: usize,
}

impl Default for MonitorOptions {
    fn default() -> Self {
        Self {
            sim: DEFAULT_SIM,
            seed: 0,
            refit: true,
            y_max: DEFAULT_Y_MAX,
            grid_points: DEFAULT_GRID_POINTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorResult {
    pub grid: Vec<f64>,
    pub observed: MonitorCurve,
    /// One simulated curve per kept replicate, each on `grid`.
    pub envelope: Vec<Vec<f64>>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub sim: usize,
    /// Replicates whose refit failed; they are left out of the envelope.
    pub dropped: usize,
    /// Share of grid points where the observed curve leaves the pointwise band.
    pub exceed_fraction: f64,
}

/// Observed monitoring curve placed among `sim` curves simulated from `params`.
pub fn monitor_envelope(
    sample: &Sample,
    params: &ModelParams,
    opts: &MonitorOptions,
) -> Result<MonitorResult> {
    if opts.sim == 0 {
        return Err(Error::Argument("sim must be at least one"));
    }
    let grid = uniform_grid(opts.y_max, opts.grid_points)?;
    let observed = monitor_process(sample, params, &grid)?;

    let mut envelope = Vec::with_capacity(opts.sim);
    let mut dropped = 0;
    for k in 0..opts.sim {
        let mut rng = stream_rng(opts.seed, k as u64);
        let replicate = simulate_sample(params, sample.len(), &mut rng);
        let model = if opts.refit {
            match fit_mle(&replicate, Some(*params)) {
                Ok(fit) if fit.converged => fit.params,
                _ => {
                    dropped += 1;
                    continue;
                }
            }
        } else {
            *params
        };
        envelope.push(monitor_process(&replicate, &model, &grid)?.z);
    }
    if envelope.is_empty() {
        return Err(Error::Argument("every simulated replicate failed to refit"));
    }

    let mut lower = vec![f64::INFINITY; grid.len()];
    let mut upper = vec![f64::NEG_INFINITY; grid.len()];
    for curve in &envelope {
        for (i, &z) in curve.iter().enumerate() {
            lower[i] = lower[i].min(z);
            upper[i] = upper[i].max(z);
        }
    }
    const BAND_SLACK: f64 = 1e-12;
    let outside = observed
        .z
        .iter()
        .zip(lower.iter().zip(&upper))
        .filter(|(&z, (&lo, &hi))| z < lo - BAND_SLACK || z > hi + BAND_SLACK)
        .count();
    Ok(MonitorResult {
        exceed_fraction: outside as f64 / grid.len() as f64,
        grid,
        observed,
        envelope,
        lower,
        upper,
        sim: opts.sim,
        dropped,
    })
}

/// Fit of `(a_j, sigma_j) = (a, sigma0 * exp(trend * x_j))` with `x_j` the
/// centred season year.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendFit {
    pub a: f64,
    pub sigma0: f64,
    /// Log-scale slope per season.
    pub trend_gamma: f64,
    pub se_trend: Option<f64>,
    /// `(season year, x_j, race count)` per season, in input order.
    pub seasons: Vec<(i32, f64, usize)>,
    pub loglik: f64,
    pub converged: bool,
}

impl TrendFit {
    pub fn x_values(&self) -> Vec<f64> {
        self.seasons.iter().map(|s| s.1).collect()
    }

    /// Wald statistic `trend_gamma / se_trend`.
    pub fn wald_z(&self) -> Option<f64> {
        self.se_trend.map(|se| self.trend_gamma / se)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrendOptions {
    /// Hold the slope at zero, which reduces to the pooled two-parameter fit.
    pub freeze_trend: bool,
}

pub fn fit_trend(samples_by_season: &[(i32, Vec<f64>)]) -> Result<TrendFit> {
    fit_trend_with(samples_by_season, TrendOptions::default())
}

pub fn fit_trend_with(
    samples_by_season: &[(i32, Vec<f64>)],
    opts: TrendOptions,
) -> Result<TrendFit> {
    let mut years: Vec<i32> = samples_by_season.iter().map(|s| s.0).collect();
    years.sort_unstable();
    years.dedup();
    if years.len() < 2 || years.len() != samples_by_season.len() {
        return Err(Error::Argument(
            "trend needs at least two distinct seasons, each listed once",
        ));
    }
    if samples_by_season.iter().any(|s| s.1.is_empty()) {
        return Err(Error::Argument("every season needs at least one margin"));
    }
    let mean_year = years.iter().map(|&y| y as f64).sum::<f64>() / years.len() as f64;
    let seasons: Vec<(i32, f64, usize)> = samples_by_season
        .iter()
        .map(|(year, ys)| (*year, *year as f64 - mean_year, ys.len()))
        .collect();

    let pooled = Sample::new(
        samples_by_season
            .iter()
            .flat_map(|s| s.1.iter().copied())
            .collect(),
    )?;
    let start = fit_mle(&pooled, None)?;

    let loglik = |a: f64, log_sigma0: f64, slope: f64| -> f64 {
        let mut total = 0.0;
        for ((_, x, _), (_, ys)) in seasons.iter().zip(samples_by_season) {
            let ll = log_likelihood(a, exp(log_sigma0 + slope * x), ys);
            if ll <= LOGLIK_FLOOR {
                return LOGLIK_FLOOR;
            }
            total += ll;
        }
        total
    };
    let objective = |t: &[f64]| loglik(t[0], t[1], if opts.freeze_trend { 0.0 } else { t[2] });

    let mut theta = vec![start.params.a(), ln(start.params.sigma())];
    let mut steps = vec![0.1, 0.1];
    if !opts.freeze_trend {
        theta.push(0.0);
        steps.push(0.02);
    }
    let found = nelder_mead(
        |t: &[f64]| -objective(t),
        &theta,
        &steps,
        &NelderMeadOptions::default(),
    );
    let h: Vec<f64> = found
        .x
        .iter()
        .enumerate()
        .map(|(i, v)| {
            if i == 0 {
                1e-5 * v.abs().max(1.0)
            } else {
                1e-5
            }
        })
        .collect();
    let (theta, best) = newton_polish_max(objective, &found.x, &h, 5);

    let se_trend = if opts.freeze_trend {
        None
    } else {
        let hess = hessian(objective, &theta, &h);
        let info: Vec<Vec<f64>> = hess
            .iter()
            .map(|r| r.iter().map(|v| -v).collect())
            .collect();
        spd_inverse(&info)
            .map(|cov| sqrt(cov[2][2]))
            .filter(|se| se.is_finite())
    };
    Ok(TrendFit {
        a: theta[0],
        sigma0: exp(theta[1]),
        trend_gamma: if opts.freeze_trend { 0.0 } else { theta[2] },
        se_trend,
        seasons,
        loglik: best,
        converged: found.converged && best > LOGLIK_FLOOR,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::simulate_margins;

    fn truth() -> ModelParams {
        ModelParams::new(0.208, 2.609).unwrap()
    }

    /// Kolmogorov-Smirnov distance from the textbook order-statistic formula.
    fn ks_distance(sample: &Sample, params: &ModelParams) -> f64 {
        let sorted = sample.sorted();
        let n = sorted.len() as f64;
        sorted
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                let f = params.cdf(y).unwrap();
                ((i + 1) as f64 / n - f).max(f - i as f64 / n)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn single_point_jump() {
        let params = ModelParams::exponential(1.0).unwrap();
        let y1 = core::f64::consts::LN_2; // cdf = 0.5
        let sample = Sample::new(vec![y1]).unwrap();
        let curve = monitor_process(&sample, &params, &[y1 - 1e-9, y1 + 1e-9]).unwrap();
        assert!((curve.z[0] - 0.5).abs() < 1e-8);
        assert!((curve.z[1] + 0.5).abs() < 1e-8);
    }

    #[test]
    fn starts_at_zero_and_fits_medians() {
        let params = truth();
        let n = 126;
        let ys: Vec<f64> = (0..n)
            .map(|i| params.quantile((i as f64 + 0.5) / n as f64).unwrap())
            .collect();
        let sample = Sample::new(ys).unwrap();
        let grid = uniform_grid(10.0, 501).unwrap();
        let curve = monitor_process(&sample, &params, &grid).unwrap();
        assert_eq!(curve.z[0], 0.0);
        let bound = 0.5 / (n as f64).sqrt() + 1e-12;
        assert!(curve.z.iter().all(|z| z.abs() <= bound));
    }

    #[test]
    fn supremum_equals_scaled_ks_statistic() {
        for seed in 0..5 {
            let sample = simulate_sample(&truth(), 126, &mut stream_rng(seed, 0));
            let fit = fit_mle(&sample, None).unwrap();
            let grid = uniform_grid(sample.max().max(10.0), 501).unwrap();
            let curve = monitor_process(&sample, &fit.params, &grid).unwrap();
            let ks = (126f64).sqrt() * ks_distance(&sample, &fit.params);
            assert!((curve.sup_abs - ks).abs() < 1e-10);
            assert!(curve.z.iter().all(|z| z.abs() <= curve.sup_abs + 1e-12));
        }
    }

    #[test]
    fn envelope_is_reproducible() {
        let sample = simulate_sample(&truth(), 60, &mut stream_rng(3, 9));
        let fit = fit_mle(&sample, None).unwrap();
        let opts = MonitorOptions {
            sim: 5,
            seed: 42,
            ..Default::default()
        };
        let a = monitor_envelope(&sample, &fit.params, &opts).unwrap();
        let b = monitor_envelope(&sample, &fit.params, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.envelope.len() + a.dropped, 5);
        assert!(a.envelope.iter().all(|c| c.len() == a.grid.len()));
        assert!((0.0..=1.0).contains(&a.exceed_fraction));
    }

    #[test]
    fn single_replicate_band_is_that_curve() {
        let sample = simulate_sample(&truth(), 60, &mut stream_rng(4, 9));
        let fit = fit_mle(&sample, None).unwrap();
        let opts = MonitorOptions {
            sim: 1,
            seed: 1,
            refit: false,
            ..Default::default()
        };
        let res = monitor_envelope(&sample, &fit.params, &opts).unwrap();
        assert_eq!(res.lower, res.envelope[0]);
        assert_eq!(res.upper, res.envelope[0]);
        assert!(
            monitor_envelope(&sample, &fit.params, &MonitorOptions { sim: 0, ..opts }).is_err()
        );
    }

    #[test]
    fn inflated_scale_is_detected() {
        // Fit model is the truth; data come from a 50% larger scale.
        let mut base = 0.0;
        let mut shifted = 0.0;
        let wide = ModelParams::new(0.208, 2.609 * 1.5).unwrap();
        for seed in 0..10 {
            let opts = MonitorOptions {
                sim: 50,
                seed,
                refit: false,
                ..Default::default()
            };
            let s = simulate_sample(&truth(), 126, &mut stream_rng(seed, 1000));
            base += monitor_envelope(&s, &truth(), &opts)
                .unwrap()
                .exceed_fraction;
            let s = simulate_sample(&wide, 126, &mut stream_rng(seed, 1000));
            shifted += monitor_envelope(&s, &truth(), &opts)
                .unwrap()
                .exceed_fraction;
        }
        assert!(shifted > base + 2.0, "{base} vs {shifted}");
    }

    fn seasons(slope: f64, seed: u64) -> Vec<(i32, Vec<f64>)> {
        (0..19)
            .map(|j| {
                let year = 2005 + j;
                let x = year as f64 - 2014.0;
                let p = ModelParams::new(0.208, 2.609 * (slope * x).exp()).unwrap();
                (
                    year,
                    simulate_margins(&p, 7, &mut stream_rng(seed, j as u64)),
                )
            })
            .collect()
    }

    #[test]
    fn trend_argument_errors() {
        assert!(fit_trend(&[(2010, vec![1.0, 2.0, 3.0])]).is_err());
        assert!(fit_trend(&[(2010, vec![1.0, 2.0]), (2010, vec![3.0])]).is_err());
        assert!(fit_trend(&[(2010, vec![1.0, 2.0]), (2011, vec![])]).is_err());
    }

    #[test]
    fn trend_centres_covariates() {
        let fit = fit_trend(&seasons(0.0, 1)).unwrap();
        let sum: f64 = fit.x_values().iter().sum();
        assert!(sum.abs() < 1e-12);
        assert_eq!(fit.seasons[0], (2005, -9.0, 7));
        assert!(fit.se_trend.unwrap() > 0.0);
    }

    #[test]
    fn frozen_trend_matches_pooled_fit() {
        let data = seasons(0.0, 2);
        let frozen = fit_trend_with(&data, TrendOptions { freeze_trend: true }).unwrap();
        let pooled = Sample::new(data.iter().flat_map(|s| s.1.clone()).collect()).unwrap();
        let fit = fit_mle(&pooled, None).unwrap();
        assert!((frozen.loglik - fit.loglik).abs() < 1e-8);
        assert_eq!(frozen.trend_gamma, 0.0);
    }

    #[test]
    fn duplicated_season_gives_no_trend() {
        let ys = simulate_margins(&truth(), 40, &mut stream_rng(8, 0));
        let fit = fit_trend(&[(2010, ys.clone()), (2012, ys.clone())]).unwrap();
        assert!(fit.trend_gamma.abs() < 1e-4);
        let pooled = fit_mle(&Sample::new([ys.clone(), ys].concat()).unwrap(), None).unwrap();
        assert!((fit.loglik - pooled.loglik).abs() < 1e-6);
    }

    #[test]
    fn null_and_trended_simulations() {
        let mut inside = 0;
        let mut right_sign = 0;
        for seed in 0..100 {
            let null = fit_trend(&seasons(0.0, seed)).unwrap();
            if null.wald_z().unwrap().abs() < 2.0 {
                inside += 1;
            }
            let up = fit_trend(&seasons(0.05, 1000 + seed)).unwrap();
            if up.trend_gamma > 0.0 {
                right_sign += 1;
            }
        }
        assert!(inside >= 90, "{inside}");
        assert!(right_sign >= 95, "{right_sign}");
    }
}
