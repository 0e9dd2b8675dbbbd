//! Profile-likelihood confidence curves.
//!
//! For a focus parameter `psi` the profile log-likelihood is the maximum of
//! the log-likelihood over all `(a, sigma)` with `psi(a, sigma) = psi`. Its
//! deviance `D(psi) = 2 (max l - l_prof(psi))` is mapped to a confidence curve
//! `cc(psi) = F_chi2_1(D(psi))`, whose level sets are confidence intervals.
//!
//! Two foci are provided: the probability of beating a target margin in the
//! next horizon ([`ProbProfile`]) and the finite endpoint `sigma/a`
//! ([`EndpointProfile`]).

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimation::FitResult;
use crate::math::{erf, exp_m1, ln, ln_1p, sqrt};
use crate::model::{log_likelihood, A_EPS, LOGLIK_FLOOR};
use crate::optimize::scan_golden_max;
use crate::prediction::{prob_break, VolumeModel};
use crate::racetime::RaceTime;
use crate::sample::Sample;

/// CDF of the chi-squared distribution with one degree of freedom,
/// `erf(sqrt(d/2))`.
pub fn chi2_1_cdf(d: f64) -> Result<f64> {
    if d.is_nan() || d < 0.0 {
        return Err(Error::Argument("deviance must be nonnegative"));
    }
    Ok(erf(sqrt(d / 2.0)))
}

/// Deviance at which [`chi2_1_cdf`] reaches `level`.
pub fn chi2_1_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Argument("confidence level must lie in (0, 1)"));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while erf(sqrt(hi / 2.0)) < level {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if erf(sqrt(mid / 2.0)) < level {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// A profiled focus parameter.
pub trait Profile {
    fn focus_name(&self) -> &'static str;

    /// Focus value at the unconstrained maximum, if it is attained.
    fn mle_focus(&self) -> Option<f64>;

    /// Unconstrained maximum of the log-likelihood.
    fn max_loglik(&self) -> f64;

    /// Profile log-likelihood, or `None` where the constraint cannot be met.
    fn profile_loglik(&self, focus: f64) -> Option<f64>;

    /// Range the focus can take, e.g. `(0, 1)` for probabilities.
    fn natural_bounds(&self) -> (f64, f64);

    fn deviance(&self, focus: f64) -> Option<f64> {
        let ll = self.profile_loglik(focus)?;
        (ll > LOGLIK_FLOOR).then(|| (2.0 * (self.max_loglik() - ll)).max(0.0))
    }
}

/// Constrained optimum found while profiling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub a: f64,
    pub sigma: f64,
    pub loglik: f64,
}

/// Profile for `p = P(some result in the horizon beats margin y0)`.
///
/// For fixed `p` and shape `a` the constraint has the closed-form solution
/// `sigma(a) = a*y0 / (1 - s^a)` with `s` the single-result survival implied
/// by `p`, so each profile point is a one-dimensional search over `a`.
#[derive(Debug, Clone)]
pub struct ProbProfile<'a> {
    sample: &'a Sample,
    y0: f64,
    volume: VolumeModel,
    max_loglik: f64,
    p_hat: f64,
    a_hat: f64,
}

/// Shape search range for the probability profile: `[-0.5, 1]`, widened below
/// when the fitted shape is more negative.
const PROFILE_A_MIN: f64 = -0.5;
const PROFILE_A_MAX: f64 = 1.0;
const SCAN_POINTS: usize = 41;

impl<'a> ProbProfile<'a> {
    pub fn new(sample: &'a Sample, fit: &FitResult, y0: f64, volume: VolumeModel) -> Result<Self> {
        if !(y0 > 0.0) || !y0.is_finite() {
            return Err(Error::Argument("target margin must be positive"));
        }
        let p_hat = volume_prob(fit, &volume, y0);
        Ok(Self {
            sample,
            y0,
            volume,
            max_loglik: fit.loglik,
            p_hat,
            a_hat: fit.params.a(),
        })
    }

    /// Scale satisfying the constraint for shape `a`, given `ln s`.
    fn sigma_for(&self, a: f64, ln_s: f64) -> f64 {
        if a.abs() < A_EPS {
            -self.y0 / ln_s
        } else {
            a * self.y0 / -exp_m1(a * ln_s)
        }
    }

    /// Maximizer of the log-likelihood subject to `prob_break = p`.
    pub fn constrained_optimum(&self, p: f64) -> Option<ProfilePoint> {
        let s = self.volume.survival_for_break_prob(p)?;
        let ln_s = ln(s);
        let ymax = self.sample.max();
        // a * ymax / sigma(a) < 1  <=>  s^a > 1 - y0/ymax
        let a_domain = if ymax <= self.y0 {
            f64::INFINITY
        } else {
            ln_1p(-self.y0 / ymax) / ln_s
        };
        let lo = PROFILE_A_MIN.min(self.a_hat - 0.5);
        let hi = PROFILE_A_MAX.min(a_domain);
        if !(hi > lo) {
            return None;
        }
        let ys = self.sample.values();
        let (a, loglik) = scan_golden_max(
            |a| log_likelihood(a, self.sigma_for(a, ln_s), ys),
            lo,
            hi,
            SCAN_POINTS,
            1e-10,
        );
        (loglik > LOGLIK_FLOOR).then(|| ProfilePoint {
            a,
            sigma: self.sigma_for(a, ln_s),
            loglik,
        })
    }

    pub fn target_margin(&self) -> f64 {
        self.y0
    }

    pub fn volume(&self) -> VolumeModel {
        self.volume
    }
}

fn volume_prob(fit: &FitResult, volume: &VolumeModel, y0: f64) -> f64 {
    // threshold-free form of prob_break
    prob_break(&fit.params, volume, 0.0, y0).unwrap_or(0.0)
}

impl Profile for ProbProfile<'_> {
    fn focus_name(&self) -> &'static str {
        "p_break"
    }

    fn mle_focus(&self) -> Option<f64> {
        Some(self.p_hat)
    }

    fn max_loglik(&self) -> f64 {
        self.max_loglik
    }

    fn profile_loglik(&self, focus: f64) -> Option<f64> {
        self.constrained_optimum(focus).map(|pt| pt.loglik)
    }

    fn natural_bounds(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
}

/// Profile for the finite endpoint `gamma = sigma/a` of the margins.
///
/// With `sigma = a*gamma` the log-likelihood is
/// `-n ln(a gamma) + (1/a - 1) S(gamma)`, `S(gamma) = sum ln(1 - y_i/gamma)`,
/// which is maximized over `a > 0` at `a = -S(gamma)/n`.
#[derive(Debug, Clone)]
pub struct EndpointProfile<'a> {
    sample: &'a Sample,
    max_loglik: f64,
    gamma_hat: Option<f64>,
}

impl<'a> EndpointProfile<'a> {
    pub fn new(sample: &'a Sample, fit: &FitResult) -> Self {
        Self {
            sample,
            max_loglik: fit.loglik,
            gamma_hat: fit.params.endpoint(),
        }
    }

    /// Maximizer of the log-likelihood subject to `sigma/a = gamma`.
    pub fn constrained_optimum(&self, gamma: f64) -> Option<ProfilePoint> {
        let ys = self.sample.values();
        if !(gamma > self.sample.max()) || !gamma.is_finite() {
            return None;
        }
        let n = ys.len() as f64;
        let s: f64 = ys.iter().map(|&y| ln_1p(-y / gamma)).sum();
        let a = -s / n;
        if !(a >= A_EPS) {
            // gamma so large that the constrained fit is the exponential one
            let sigma = self.sample.mean();
            return Some(ProfilePoint {
                a: 0.0,
                sigma,
                loglik: log_likelihood(0.0, sigma, ys),
            });
        }
        let sigma = a * gamma;
        let loglik = -n * ln(sigma) + (1.0 / a - 1.0) * s;
        Some(ProfilePoint { a, sigma, loglik })
    }

    pub fn gamma_hat(&self) -> Option<f64> {
        self.gamma_hat
    }
}

impl Profile for EndpointProfile<'_> {
    fn focus_name(&self) -> &'static str {
        "endpoint"
    }

    fn mle_focus(&self) -> Option<f64> {
        self.gamma_hat
    }

    fn max_loglik(&self) -> f64 {
        self.max_loglik
    }

    fn profile_loglik(&self, focus: f64) -> Option<f64> {
        self.constrained_optimum(focus).map(|pt| pt.loglik)
    }

    fn natural_bounds(&self) -> (f64, f64) {
        (self.sample.max(), f64::INFINITY)
    }
}

/// One evaluated focus value; `deviance` and `confidence` are `None` where
/// the constraint is infeasible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub focus: f64,
    pub deviance: Option<f64>,
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceCurve {
    pub focus_name: &'static str,
    /// Sorted by focus; includes the MLE focus when it exists.
    pub points: Vec<CurvePoint>,
    pub mle_focus: Option<f64>,
    pub natural_bounds: (f64, f64),
    /// Grid points where the deviance fails to grow away from the MLE.
    pub non_monotone: usize,
}

/// Evaluates `profile` on `grid` (plus the MLE focus).
pub fn confidence_curve<P: Profile>(profile: &P, grid: &[f64]) -> Result<ConfidenceCurve> {
    if grid.is_empty() {
        return Err(Error::Argument("focus grid is empty"));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::Argument("focus grid must be finite"));
    }
    let mle = profile.mle_focus();
    let mut foci: Vec<f64> = grid.to_vec();
    if let Some(m) = mle {
        foci.push(m);
    }
    foci.sort_by(f64::total_cmp);
    foci.dedup();

    let points: Vec<CurvePoint> = foci
        .into_iter()
        .map(|focus| {
            let deviance = if Some(focus) == mle {
                Some(0.0)
            } else {
                profile.deviance(focus)
            };
            CurvePoint {
                focus,
                deviance,
                confidence: deviance.map(|d| erf(sqrt(d / 2.0))),
            }
        })
        .collect();
    let non_monotone = count_non_monotone(&points, mle);
    Ok(ConfidenceCurve {
        focus_name: profile.focus_name(),
        points,
        mle_focus: mle,
        natural_bounds: profile.natural_bounds(),
        non_monotone,
    })
}

fn count_non_monotone(points: &[CurvePoint], mle: Option<f64>) -> usize {
    const SLACK: f64 = 1e-9;
    let feasible: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| p.deviance.map(|d| (p.focus, d)))
        .collect();
    if feasible.is_empty() {
        return 0;
    }
    let centre = match mle {
        Some(m) => feasible.iter().position(|&(x, _)| x == m).unwrap_or(0),
        None => feasible
            .iter()
            .enumerate()
            .min_by(|l, r| l.1 .1.total_cmp(&r.1 .1))
            .map_or(0, |(i, _)| i),
    };
    let right = feasible[centre..]
        .windows(2)
        .filter(|w| w[1].1 < w[0].1 - SLACK)
        .count();
    let left = feasible[..=centre]
        .windows(2)
        .filter(|w| w[0].1 < w[1].1 - SLACK)
        .count();
    left + right
}

/// One end of a confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalEnd {
    pub value: f64,
    /// The level set reaches the focus range's natural bound (e.g. `p = 0`).
    pub at_natural_bound: bool,
    /// The level set runs past the evaluated range; `value` is only the last
    /// point examined.
    pub open: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub level: f64,
    pub lo: IntervalEnd,
    pub hi: IntervalEnd,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        let above = x >= self.lo.value || (self.lo.open && !self.lo.at_natural_bound);
        let below = x <= self.hi.value || (self.hi.open && !self.hi.at_natural_bound);
        above && below
    }
}

#[derive(Debug, Clone, Copy)]
enum Side {
    /// Deviance crosses the critical value between `inside` and `outside`.
    Crossing {
        inside: (f64, f64),
        outside: (f64, f64),
    },
    Natural(f64),
    Open(f64),
}

fn near_bound(x: f64, bound: f64) -> bool {
    bound.is_finite() && (x - bound).abs() <= 1e-4 * bound.abs().max(1.0)
}

fn sides(curve: &ConfidenceCurve, crit: f64) -> Result<(Side, Side)> {
    let pts = &curve.points;
    let centre = match curve.mle_focus {
        Some(m) => pts.iter().position(|p| p.focus == m),
        None => pts
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.deviance.map(|d| (i, d)))
            .min_by(|l, r| l.1.total_cmp(&r.1))
            .map(|(i, _)| i),
    }
    .ok_or(Error::Argument("curve has no feasible points"))?;
    let centre_dev = pts[centre].deviance.unwrap_or(f64::INFINITY);
    if centre_dev >= crit {
        return Err(Error::Argument(
            "curve minimum lies above the requested level",
        ));
    }
    let walk = |indices: &mut dyn Iterator<Item = usize>, bound: f64| -> Side {
        let mut last = (pts[centre].focus, centre_dev);
        for i in indices {
            match pts[i].deviance {
                Some(d) if d >= crit => {
                    return Side::Crossing {
                        inside: last,
                        outside: (pts[i].focus, d),
                    }
                }
                Some(d) => last = (pts[i].focus, d),
                None => return Side::Open(last.0),
            }
        }
        if near_bound(last.0, bound) {
            Side::Natural(bound)
        } else {
            Side::Open(last.0)
        }
    };
    let (lo_bound, hi_bound) = curve.natural_bounds;
    let left = walk(&mut (0..centre).rev(), lo_bound);
    let right = walk(&mut (centre + 1..pts.len()), hi_bound);
    Ok((left, right))
}

fn end_from_side(side: Side, locate: &mut dyn FnMut(f64, f64) -> f64) -> IntervalEnd {
    match side {
        Side::Crossing { inside, outside } => IntervalEnd {
            value: locate(inside.0, outside.0),
            at_natural_bound: false,
            open: false,
        },
        Side::Natural(b) => IntervalEnd {
            value: b,
            at_natural_bound: true,
            open: false,
        },
        Side::Open(x) => IntervalEnd {
            value: x,
            at_natural_bound: false,
            open: true,
        },
    }
}

/// Level-`level` interval read off the curve by linear interpolation of the
/// deviance between neighbouring grid points.
pub fn interval_from_curve(curve: &ConfidenceCurve, level: f64) -> Result<Interval> {
    let crit = chi2_1_quantile(level)?;
    let (left, right) = sides(curve, crit)?;
    let lookup = |x: f64| {
        curve
            .points
            .iter()
            .find(|p| p.focus == x)
            .and_then(|p| p.deviance)
            .unwrap_or(f64::INFINITY)
    };
    let mut interpolate = |inside: f64, outside: f64| {
        let (di, dout) = (lookup(inside), lookup(outside));
        if !dout.is_finite() || dout <= di {
            return outside;
        }
        inside + (crit - di) / (dout - di) * (outside - inside)
    };
    Ok(Interval {
        level,
        lo: end_from_side(left, &mut interpolate),
        hi: end_from_side(right, &mut interpolate),
    })
}

/// Like [`interval_from_curve`], but crossings are located by bisection on
/// the profile itself.
pub fn refine_interval<P: Profile>(
    profile: &P,
    curve: &ConfidenceCurve,
    level: f64,
) -> Result<Interval> {
    let crit = chi2_1_quantile(level)?;
    let (left, right) = sides(curve, crit)?;
    let mut bisect = |inside: f64, outside: f64| bisect_crossing(profile, inside, outside, crit);
    Ok(Interval {
        level,
        lo: end_from_side(left, &mut bisect),
        hi: end_from_side(right, &mut bisect),
    })
}

/// Bisects between a focus inside the level set and one outside it; an
/// infeasible focus counts as outside.
fn bisect_crossing<P: Profile>(profile: &P, mut inside: f64, mut outside: f64, crit: f64) -> f64 {
    for _ in 0..200 {
        if (outside - inside).abs() <= 1e-11 * inside.abs().max(1e-3) {
            break;
        }
        let mid = 0.5 * (inside + outside);
        match profile.deviance(mid) {
            Some(d) if d < crit => inside = mid,
            _ => outside = mid,
        }
    }
    0.5 * (inside + outside)
}

/// Level-`level` interval found without a grid: steps outward from the MLE
/// focus until the deviance passes the critical value, then bisects.
pub fn profile_interval<P: Profile>(profile: &P, level: f64) -> Result<Interval> {
    let crit = chi2_1_quantile(level)?;
    let (lo_bound, hi_bound) = profile.natural_bounds();
    let centre = match profile.mle_focus() {
        Some(m) => m,
        None => {
            return Err(Error::Argument(
                "the focus has no finite maximum-likelihood value",
            ))
        }
    };
    let search = |bound: f64| -> IntervalEnd {
        let mut inside = centre;
        for k in 1..=60 {
            let x = if bound.is_finite() {
                centre + (bound - centre) * (1.0 - libm::ldexp(1.0, -k))
            } else {
                let step = 0.05 * centre.abs().max(1e-3);
                centre + libm::copysign(step * libm::ldexp(1.0, k - 1), bound)
            };
            match profile.deviance(x) {
                Some(d) if d < crit => inside = x,
                _ => {
                    return IntervalEnd {
                        value: bisect_crossing(profile, inside, x, crit),
                        at_natural_bound: false,
                        open: false,
                    }
                }
            }
        }
        if bound.is_finite() {
            IntervalEnd {
                value: bound,
                at_natural_bound: true,
                open: false,
            }
        } else {
            IntervalEnd {
                value: bound,
                at_natural_bound: false,
                open: true,
            }
        }
    };
    Ok(Interval {
        level,
        lo: search(lo_bound),
        hi: search(hi_bound),
    })
}

/// Probabilities from `1e-6` to `0.9975`: a few decades near zero, then steps of 0.0025.
pub fn default_prob_grid() -> Vec<f64> {
    let mut grid = alloc::vec![1e-6, 1e-5, 1e-4, 1e-3];
    grid.extend((1..=399).map(|i| i as f64 * 0.0025));
    grid
}

/// 201 endpoint values spanning `[max(y) + 0.01, max(y) + 30]`.
pub fn default_gamma_grid(sample: &Sample) -> Vec<f64> {
    let start = sample.max() + 0.01;
    let end = sample.max() + 30.0;
    (0..201)
        .map(|i| start + (end - start) * i as f64 / 200.0)
        .collect()
}

/// Profile curve for the probability of beating margin `y0` in the horizon.
pub fn profile_prob(
    sample: &Sample,
    fit: &FitResult,
    y0: f64,
    volume: VolumeModel,
    p_grid: &[f64],
) -> Result<ConfidenceCurve> {
    if p_grid.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
        return Err(Error::Argument("probability grid must lie inside (0, 1)"));
    }
    confidence_curve(&ProbProfile::new(sample, fit, y0, volume)?, p_grid)
}

/// Endpoint estimate with its confidence curve.
#[derive(Debug, Clone, PartialEq)]
pub struct EndpointEstimate {
    /// `sigma/a` at the MLE; `None` when the fitted shape is not positive.
    pub gamma_hat: Option<f64>,
    pub threshold_s: f64,
    pub curve: ConfidenceCurve,
}

impl EndpointEstimate {
    /// Best attainable time `threshold - gamma_hat`, in seconds.
    pub fn r0_seconds(&self) -> Option<f64> {
        self.gamma_hat.map(|g| self.threshold_s - g)
    }

    pub fn r0(&self) -> Option<RaceTime> {
        self.r0_seconds()
            .and_then(|s| RaceTime::from_seconds(s).ok())
    }
}

/// Profile curve for the endpoint over `gamma_grid`; grid values not above
/// `max(y)` are reported infeasible.
pub fn profile_endpoint(
    sample: &Sample,
    fit: &FitResult,
    threshold_s: f64,
    gamma_grid: &[f64],
) -> Result<EndpointEstimate> {
    let profile = EndpointProfile::new(sample, fit);
    Ok(EndpointEstimate {
        gamma_hat: profile.gamma_hat(),
        threshold_s,
        curve: confidence_curve(&profile, gamma_grid)?,
    })
}
