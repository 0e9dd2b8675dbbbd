//! Small derivative-free optimizers and finite-difference helpers.
//!
//! Problems here have at most three parameters, so plain `Vec<f64>` storage
//! and dense `n x n` matrices are sufficient.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::sqrt;

/// Outcome of a minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadOptions {
    /// Budget of objective evaluations across the run and its restart.
    pub max_evaluations: usize,
    /// Converged once the simplex objective spread drops below this.
    pub f_tol: f64,
    /// Restart once from the best vertex after the first convergence.
    pub restart: bool,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evaluations: 2000,
            f_tol: 1e-10,
            restart: true,
        }
    }
}

/// Objective values at or above this are treated as rejected points.
const REJECTED: f64 = 1e299;

/// Nelder-Mead simplex minimization of `f` from `x0`, using `steps` to build
/// the initial simplex (one axis-aligned vertex per coordinate).
pub fn nelder_mead<F>(mut f: F, x0: &[f64], steps: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(x0.len(), steps.len(), "one step per coordinate");
    let mut evaluations = 0;
    let mut run = simplex_run(
        &mut f,
        x0,
        steps,
        opts.max_evaluations,
        opts.f_tol,
        &mut evaluations,
    );
    if opts.restart && evaluations < opts.max_evaluations {
        let again = simplex_run(
            &mut f,
            &run.x,
            steps,
            opts.max_evaluations,
            opts.f_tol,
            &mut evaluations,
        );
        if again.value <= run.value {
            run = Minimum {
                converged: again.converged,
                ..again
            };
        } else {
            run.converged &= again.converged;
        }
    }
    run.evaluations = evaluations;
    run
}

fn simplex_run<F>(
    f: &mut F,
    x0: &[f64],
    steps: &[f64],
    max_evaluations: usize,
    f_tol: f64,
    evaluations: &mut usize,
) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    let mut eval = |x: &[f64], count: &mut usize| {
        *count += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let v0 = eval(x0, evaluations);
    simplex.push((x0.to_vec(), v0));
    for i in 0..dim {
        let mut x = x0.to_vec();
        x[i] += steps[i];
        let v = eval(&x, evaluations);
        simplex.push((x, v));
    }

    let mut converged = false;
    while *evaluations < max_evaluations {
        simplex.sort_by(|l, r| l.1.total_cmp(&r.1));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        if best < REJECTED && worst - best < f_tol {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; dim];
        for (x, _) in &simplex[..dim] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / dim as f64;
            }
        }
        let toward = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[dim].0)
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };

        let reflected = toward(1.0);
        let fr = eval(&reflected, evaluations);
        if fr < simplex[0].1 {
            let expanded = toward(2.0);
            let fe = eval(&expanded, evaluations);
            simplex[dim] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
            continue;
        }
        if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < simplex[dim].1 {
            let x = toward(0.5);
            let v = eval(&x, evaluations);
            (x, v)
        } else {
            let x = toward(-0.5);
            let v = eval(&x, evaluations);
            (x, v)
        };
        if fc < simplex[dim].1.min(fr) {
            simplex[dim] = (contracted, fc);
            continue;
        }
        // shrink toward the best vertex
        let anchor = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = anchor
                .iter()
                .zip(&vertex.0)
                .map(|(b, xi)| b + 0.5 * (xi - b))
                .collect();
            let v = eval(&x, evaluations);
            *vertex = (x, v);
        }
    }
    simplex.sort_by(|l, r| l.1.total_cmp(&r.1));
    let (x, value) = simplex.swap_remove(0);
    Minimum {
        x,
        value,
        evaluations: *evaluations,
        converged,
    }
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
pub fn golden_section_max<F>(mut f: F, mut lo: f64, mut hi: f64, x_tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > x_tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Maximizes `f` on `[lo, hi]` by a uniform scan followed by golden-section
/// refinement between the neighbours of the best scanned point. Endpoints are
/// included in the scan, so boundary maxima are found too.
pub fn scan_golden_max<F>(mut f: F, lo: f64, hi: f64, scan_points: usize, x_tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let n = scan_points.max(3);
    let step = (hi - lo) / (n - 1) as f64;
    let mut best = (lo, f(lo));
    let mut best_i = 0;
    for i in 1..n {
        let x = if i == n - 1 { hi } else { lo + step * i as f64 };
        let v = f(x);
        if v > best.1 {
            best = (x, v);
            best_i = i;
        }
    }
    let left = if best_i == 0 {
        lo
    } else {
        lo + step * (best_i - 1) as f64
    };
    let right = if best_i + 1 >= n {
        hi
    } else {
        lo + step * (best_i + 1) as f64
    };
    let refined = golden_section_max(&mut f, left, right, x_tol);
    if refined.1 >= best.1 {
        refined
    } else {
        best
    }
}

/// Central-difference gradient.
pub fn gradient<F>(mut f: F, x: &[f64], h: &[f64]) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h[i];
            let up = f(&probe);
            probe[i] = x[i] - h[i];
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h[i])
        })
        .collect()
}

/// Central-difference Hessian, returned row-major as `n x n`.
pub fn hessian<F>(mut f: F, x: &[f64], h: &[f64]) -> Vec<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x.len();
    let f0 = f(x);
    let mut out = vec![vec![0.0; n]; n];
    let mut probe = x.to_vec();
    for i in 0..n {
        probe[i] = x[i] + h[i];
        let up = f(&probe);
        probe[i] = x[i] - h[i];
        let down = f(&probe);
        probe[i] = x[i];
        out[i][i] = (up - 2.0 * f0 + down) / (h[i] * h[i]);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| {
                probe[i] = x[i] + si * h[i];
                probe[j] = x[j] + sj * h[j];
                let v = f(&probe);
                probe[i] = x[i];
                probe[j] = x[j];
                v
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                / (4.0 * h[i] * h[j]);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

/// Inverse of a symmetric positive-definite matrix via Cholesky, or `None`
/// when the matrix is not positive definite.
pub fn spd_inverse(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = m[i][i] - s;
                if !(d > 0.0) || !d.is_finite() {
                    return None;
                }
                l[i][i] = sqrt(d);
            } else {
                l[i][j] = (m[i][j] - s) / l[j][j];
            }
        }
    }
    // columns of the inverse from L L^T x = e_k
    let mut inv = vec![vec![0.0; n]; n];
    for k in 0..n {
        let mut z = vec![0.0; n];
        for i in 0..n {
            let rhs = if i == k { 1.0 } else { 0.0 };
            let s: f64 = (0..i).map(|j| l[i][j] * z[j]).sum();
            z[i] = (rhs - s) / l[i][i];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| l[j][i] * x[j]).sum();
            x[i] = (z[i] - s) / l[i][i];
        }
        for (row, xi) in inv.iter_mut().zip(&x) {
            row[k] = *xi;
        }
    }
    Some(inv)
}

/// A few damped Newton steps towards a local maximum of `f`, using
/// finite-difference derivatives. Steps that do not increase `f` are halved
/// and eventually dropped, so the returned point is never worse than `x`.
pub fn newton_polish_max<F>(mut f: F, x: &[f64], h: &[f64], max_steps: usize) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let mut x = x.to_vec();
    let mut fx = f(&x);
    for _ in 0..max_steps {
        let g = gradient(&mut f, &x, h);
        let hess = hessian(&mut f, &x, h);
        let neg: Vec<Vec<f64>> = hess
            .iter()
            .map(|row| row.iter().map(|v| -v).collect())
            .collect();
        let Some(inv) = spd_inverse(&neg) else { break };
        let delta: Vec<f64> = inv
            .iter()
            .map(|row| row.iter().zip(&g).map(|(a, b)| a * b).sum())
            .collect();
        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..8 {
            let cand: Vec<f64> = x.iter().zip(&delta).map(|(xi, d)| xi + scale * d).collect();
            let fc = f(&cand);
            if fc > fx {
                x = cand;
                fx = fc;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (x, fx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nelder_mead_finds_rosenbrock_minimum() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = NelderMeadOptions {
            max_evaluations: 5000,
            f_tol: 1e-14,
            restart: true,
        };
        let m = nelder_mead(rosen, &[-1.2, 1.0], &[0.1, 0.1], &opts);
        assert!(m.converged);
        assert!(
            (m.x[0] - 1.0).abs() < 1e-3 && (m.x[1] - 1.0).abs() < 1e-3,
            "{:?}",
            m.x
        );
    }

    #[test]
    fn nelder_mead_respects_budget() {
        let opts = NelderMeadOptions {
            max_evaluations: 20,
            f_tol: 0.0,
            restart: true,
        };
        let m = nelder_mead(
            |x: &[f64]| x[0] * x[0] + x[1] * x[1],
            &[3.0, 3.0],
            &[1.0, 1.0],
            &opts,
        );
        assert!(!m.converged);
        assert!(m.evaluations <= 22);
    }

    #[test]
    fn golden_section_on_parabola() {
        let (x, v) = golden_section_max(|x| -(x - 0.3) * (x - 0.3), -1.0, 2.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
        assert!(v <= 0.0 && v > -1e-15);
        let (x, _) = scan_golden_max(|x| x, 0.0, 1.0, 11, 1e-10);
        assert!((x - 1.0).abs() < 1e-9);
    }

    #[test]
    fn spd_inverse_of_known_matrix() {
        let m = vec![vec![4.0, 2.0], vec![2.0, 3.0]];
        let inv = spd_inverse(&m).unwrap();
        // det = 8
        assert!((inv[0][0] - 3.0 / 8.0).abs() < 1e-14);
        assert!((inv[0][1] + 2.0 / 8.0).abs() < 1e-14);
        assert!((inv[1][1] - 4.0 / 8.0).abs() < 1e-14);
        assert!(spd_inverse(&[vec![1.0, 2.0], vec![2.0, 1.0]]).is_none());
    }

    #[test]
    fn hessian_of_quadratic() {
        let f = |x: &[f64]| 3.0 * x[0] * x[0] + x[0] * x[1] - 2.0 * x[1] * x[1];
        let h = hessian(f, &[0.4, -0.7], &[1e-4, 1e-4]);
        assert!((h[0][0] - 6.0).abs() < 1e-5);
        assert!((h[0][1] - 1.0).abs() < 1e-5);
        assert!((h[1][1] + 4.0).abs() < 1e-5);
    }

    #[test]
    fn newton_polish_never_worsens() {
        let f = |x: &[f64]| -(x[0] - 1.0).powi(2) - 2.0 * (x[1] + 0.5).powi(2);
        let (x, v) = newton_polish_max(f, &[0.9, -0.4], &[1e-5, 1e-5], 5);
        assert!((x[0] - 1.0).abs() < 1e-8 && (x[1] + 0.5).abs() < 1e-8);
        assert!(v > -1e-14);
    }
}
