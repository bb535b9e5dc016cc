//! Derivative-free minimization, monotone root finding and nonnegative
//! least squares.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerOpts {
    pub max_iter: usize,
    pub tol_x: f64,
    pub tol_f: f64,
    /// Absolute step used to build each initial simplex edge.
    pub initial_step: f64,
    /// Fresh simplices built around the incumbent after convergence.
    pub restarts: usize,
}

impl Default for OptimizerOpts {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            tol_x: 1e-7,
            tol_f: 1e-9,
            initial_step: 0.1,
            restarts: 2,
        }
    }
}

impl OptimizerOpts {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_x > 0.0 && self.tol_f > 0.0 && self.initial_step > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidParameter(
                "optimizer tolerances, step and iteration cap must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Nelder–Mead with the dimension-adaptive coefficients of Gao and Han.
///
/// Non-finite objective values are treated as +∞, so infeasible regions can be
/// signalled by returning `f64::INFINITY` or NaN.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut objective: F,
    x0: &[f64],
    opts: &OptimizerOpts,
) -> Result<MinimizeResult> {
    opts.validate()?;
    let d = x0.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = objective(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let f0 = eval(x0);
    if !f0.is_finite() {
        return Err(Error::NonFinite("objective at the starting point".into()));
    }
    if d == 0 {
        return Ok(MinimizeResult {
            x: Vec::new(),
            f: f0,
            iterations: 0,
            evaluations: 1,
            converged: true,
        });
    }

    let df = d as f64;
    let (rho, chi, gamma, sigma) = if d >= 2 {
        (1.0, 1.0 + 2.0 / df, 0.75 - 1.0 / (2.0 * df), 1.0 - 1.0 / df)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };

    let mut best_x = x0.to_vec();
    let mut best_f = f0;
    let mut iterations = 0usize;
    let mut converged = false;

    for round in 0..=opts.restarts {
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
        simplex.push((best_x.clone(), best_f));
        for i in 0..d {
            let mut x = best_x.clone();
            x[i] += opts.initial_step;
            let f = eval(&x);
            simplex.push((x, f));
        }
        let start_f = best_f;
        let mut round_converged = false;
        let mut centroid = vec![0.0; d];
        let mut trial = vec![0.0; d];

        while iterations < opts.max_iter {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let fspread = simplex[d].1 - simplex[0].1;
            let diameter = simplex[1..]
                .iter()
                .map(|(x, _)| {
                    x.iter()
                        .zip(&simplex[0].0)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            if (fspread <= opts.tol_f || (fspread.is_nan() && simplex[0].1 == simplex[d].1))
                && diameter <= opts.tol_x
            {
                round_converged = true;
                break;
            }
            iterations += 1;

            centroid.iter_mut().for_each(|c| *c = 0.0);
            for (x, _) in &simplex[..d] {
                for (c, v) in centroid.iter_mut().zip(x) {
                    *c += v / df;
                }
            }
            let worst = simplex[d].0.clone();
            let f_worst = simplex[d].1;
            let point = |coef: f64, out: &mut Vec<f64>| {
                for ((o, c), w) in out.iter_mut().zip(&centroid).zip(&worst) {
                    *o = c + coef * (c - w);
                }
            };

            point(rho, &mut trial);
            let fr = eval(&trial);
            if fr < simplex[0].1 {
                let xr = trial.clone();
                point(rho * chi, &mut trial);
                let fe = eval(&trial);
                simplex[d] = if fe < fr { (trial.clone(), fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[d - 1].1 {
                simplex[d] = (trial.clone(), fr);
                continue;
            }
            let (coef, bound) = if fr < f_worst {
                (rho * gamma, fr)
            } else {
                (-gamma, f_worst)
            };
            point(coef, &mut trial);
            let fc = eval(&trial);
            if fc < bound || (fr < f_worst && fc <= bound) {
                simplex[d] = (trial.clone(), fc);
                continue;
            }
            let x_best = simplex[0].0.clone();
            for (x, f) in simplex[1..].iter_mut() {
                for (xi, bi) in x.iter_mut().zip(&x_best) {
                    *xi = bi + sigma * (*xi - bi);
                }
                *f = eval(x);
            }
        }

        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[0].1 <= best_f {
            best_f = simplex[0].1;
            best_x = simplex[0].0.clone();
        }
        converged = round_converged;
        if !round_converged || (round > 0 && start_f - best_f <= opts.tol_f) {
            break;
        }
    }

    Ok(MinimizeResult {
        x: best_x,
        f: best_f,
        iterations,
        evaluations,
        converged,
    })
}

const MAX_DOUBLINGS: usize = 200;

/// Finds `z` with `f(z) = target` for a strictly increasing `f`.
///
/// The bracket grows geometrically from `[-1, 1]`, then a safeguarded secant
/// (Illinois) iteration closes it. Iteration stops once `|f(z) - target| ≤ tol`
/// and the bracket has stopped shrinking, or the bracket reaches machine
/// resolution.
pub fn find_root_increasing<F: FnMut(f64) -> f64>(f: F, target: f64, tol: f64) -> Result<f64> {
    find_root_increasing_from(f, target, 0.0, tol)
}

pub fn find_root_increasing_from<F: FnMut(f64) -> f64>(
    mut f: F,
    target: f64,
    guess: f64,
    tol: f64,
) -> Result<f64> {
    let mut g = |z: f64| f(z) - target;
    let (mut lo, mut hi) = bracket(&mut g, guess)?;
    let (mut flo, mut fhi) = (g(lo), g(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    let mut side = 0i8;
    for _ in 0..500 {
        let width = hi - lo;
        let mut z = if flo.is_finite() && fhi.is_finite() {
            hi - fhi * width / (fhi - flo)
        } else {
            0.5 * (lo + hi)
        };
        if !(z > lo && z < hi) {
            z = 0.5 * (lo + hi);
        }
        let fz = g(z);
        if fz == 0.0 || (fz.abs() <= tol && width <= 1e-12 * z.abs().max(1.0)) {
            return Ok(z);
        }
        if fz < 0.0 || fz.is_nan() {
            lo = z;
            flo = fz;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = z;
            fhi = fz;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
        if hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(if flo.abs() < fhi.abs() { lo } else { hi })
}

fn bracket<G: FnMut(f64) -> f64>(g: &mut G, guess: f64) -> Result<(f64, f64)> {
    let mut step = 1.0f64.max(guess.abs() * 1e-3);
    let mut lo = guess - step;
    let mut hi = guess + step;
    let mut doublings = 0;
    while !(g(lo) <= 0.0) {
        if doublings == MAX_DOUBLINGS {
            return Err(Error::BracketFailure(MAX_DOUBLINGS));
        }
        hi = lo;
        step *= 2.0;
        lo = guess - step;
        doublings += 1;
    }
    while !(g(hi) >= 0.0) {
        if doublings == MAX_DOUBLINGS {
            return Err(Error::BracketFailure(MAX_DOUBLINGS));
        }
        lo = hi.max(lo);
        step *= 2.0;
        hi = guess + step;
        doublings += 1;
    }
    Ok((lo, hi))
}

/// Newton iteration safeguarded by a bracket, for increasing `f` with known
/// derivative `df`. Converges quadratically near the root, falls back to
/// bisection whenever a Newton step would leave the bracket.
pub fn newton_increasing<F, D>(mut f: F, mut df: D, target: f64, guess: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
    D: FnMut(f64) -> f64,
{
    let mut g = |z: f64| f(z) - target;
    let (mut lo, mut hi) = bracket(&mut g, guess)?;
    let mut z = guess.clamp(lo, hi);
    for _ in 0..200 {
        let gz = g(z);
        if gz == 0.0 {
            return Ok(z);
        }
        if gz < 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        let slope = df(z);
        let mut next = z - gz / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let step = (next - z).abs();
        z = next;
        if step <= 1e-14 * z.abs().max(1.0) || hi - lo <= 4.0 * f64::EPSILON * z.abs().max(1.0) {
            let gz = g(z);
            if gz.abs() <= tol || step == 0.0 || hi - lo <= 4.0 * f64::EPSILON * z.abs().max(1.0) {
                return Ok(z);
            }
        }
    }
    Ok(z)
}

/// Lawson–Hanson nonnegative least squares: `argmin ‖A x − b‖` subject to
/// `x ≥ 0`, with `A` given as rows.
pub fn nnls(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let m = a.len();
    if m == 0 || b.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: b.len(),
        });
    }
    let n = a[0].len();
    if a.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidParameter("ragged NNLS design".into()));
    }
    let col = |j: usize| -> Vec<f64> { a.iter().map(|r| r[j]).collect() };
    let cols: Vec<Vec<f64>> = (0..n).map(col).collect();
    let scale = cols
        .iter()
        .flat_map(|c| c.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1e-300);
    let tol = 10.0 * f64::EPSILON * scale * (m.max(n) as f64);

    let mut x = vec![0.0; n];
    let mut passive = vec![false; n];
    let residual = |x: &[f64]| -> Vec<f64> {
        (0..m)
            .map(|i| b[i] - a[i].iter().zip(x).map(|(aij, xj)| aij * xj).sum::<f64>())
            .collect()
    };
    let max_outer = 3 * n + 10;
    for _ in 0..max_outer {
        let r = residual(&x);
        let w: Vec<f64> = cols.iter().map(|c| crate::linalg::dot(c, &r)).collect();
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(t) = candidate else {
            return Ok(x);
        };
        passive[t] = true;
        for _ in 0..(3 * n + 10) {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let sub: Vec<&Vec<f64>> = idx.iter().map(|&j| &cols[j]).collect();
            let z_sub = lstsq(&sub, b)?;
            if z_sub.iter().all(|&v| v > 0.0) {
                x.iter_mut().for_each(|v| *v = 0.0);
                for (&j, &v) in idx.iter().zip(&z_sub) {
                    x[j] = v;
                }
                break;
            }
            let mut step = f64::INFINITY;
            for (&j, &zj) in idx.iter().zip(&z_sub) {
                if zj <= 0.0 {
                    let s = x[j] / (x[j] - zj);
                    if s < step {
                        step = s;
                    }
                }
            }
            for (&j, &zj) in idx.iter().zip(&z_sub) {
                x[j] += step * (zj - x[j]);
                if x[j] <= tol {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }
    Ok(x)
}

/// Least squares on the columns `cols` by modified Gram–Schmidt QR.
fn lstsq(cols: &[&Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let k = cols.len();
    let m = b.len();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut r = vec![vec![0.0; k]; k];
    for (j, c) in cols.iter().enumerate() {
        let mut v = (*c).clone();
        for _ in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let proj = crate::linalg::dot(qi, &v);
                r[i][j] += proj;
                for (vv, qq) in v.iter_mut().zip(qi) {
                    *vv -= proj * qq;
                }
            }
        }
        let nv = crate::linalg::norm(&v);
        if nv <= 1e-13 * crate::linalg::norm(c).max(1e-300) {
            return Err(Error::Estimation("rank-deficient least squares".into()));
        }
        r[j][j] = nv;
        q.push(v.iter().map(|x| x / nv).collect());
    }
    let qtb: Vec<f64> = q.iter().map(|qi| crate::linalg::dot(qi, &b[..m])).collect();
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = qtb[i];
        for j in i + 1..k {
            s -= r[i][j] * x[j];
        }
        x[i] = s / r[i][i];
    }
    Ok(x)
}

/// Unconstrained least squares `argmin ‖A x − b‖` with `A` given as rows.
pub fn least_squares(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let n = a[0].len();
    let cols: Vec<Vec<f64>> = (0..n).map(|j| a.iter().map(|r| r[j]).collect()).collect();
    let refs: Vec<&Vec<f64>> = cols.iter().collect();
    lstsq(&refs, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let r = nelder_mead(
            |x| (x[0] - 1.0).powi(2) + (x[1] - 2.0).powi(2),
            &[0.0, 0.0],
            &OptimizerOpts::default(),
        )
        .unwrap();
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 2.0).abs() < 1e-5);
    }

    #[test]
    fn rosenbrock() {
        let opts = OptimizerOpts {
            max_iter: 10_000,
            initial_step: 0.5,
            ..Default::default()
        };
        let r = nelder_mead(
            |x| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2),
            &[-1.2, 1.0],
            &opts,
        )
        .unwrap();
        assert!(r.iterations <= 10_000);
        assert!((r.x[0] - 1.0).abs() < 1e-3 && (r.x[1] - 1.0).abs() < 1e-3, "{:?}", r.x);
    }

    #[test]
    fn constant_objective() {
        let r = nelder_mead(|_| 3.0, &[0.5, 0.5, 0.5], &OptimizerOpts::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.f, 3.0);
        assert!(r.iterations < 200);
    }

    #[test]
    fn never_worse_than_start_and_rejects_bad_start() {
        let f = |x: &[f64]| (x[0] * 3.0).sin() + 0.1 * x[0] * x[0];
        let start = [2.0];
        let r = nelder_mead(f, &start, &OptimizerOpts::default()).unwrap();
        assert!(r.f <= f(&start));
        assert!(nelder_mead(|_| f64::NAN, &[0.0], &OptimizerOpts::default()).is_err());
    }

    #[test]
    fn infeasible_region() {
        let r = nelder_mead(
            |x| if x[0] < 0.0 { f64::INFINITY } else { (x[0] - 0.01).powi(2) },
            &[1.0],
            &OptimizerOpts::default(),
        )
        .unwrap();
        assert!((r.x[0] - 0.01).abs() < 1e-5);
    }

    #[test]
    fn roots() {
        assert!((find_root_increasing(|z| z, 3.0, 1e-10).unwrap() - 3.0).abs() < 1e-12);
        assert!(find_root_increasing(f64::exp, 1.0, 1e-10).unwrap().abs() < 1e-10);
        let r = find_root_increasing(|z| z.powi(3) + 1e5, 0.0, 1e-10).unwrap();
        assert!((r + 1e5f64.cbrt()).abs() < 1e-9);
        assert!(matches!(
            find_root_increasing(|z| z.atan(), 2.0, 1e-10),
            Err(Error::BracketFailure(200))
        ));
        let r = newton_increasing(|z| z + z.powi(3), |z| 1.0 + 3.0 * z * z, 10.0, 0.0, 1e-12).unwrap();
        assert!((r - 2.0).abs() < 1e-13);
    }

    #[test]
    fn nnls_matches_known_solution() {
        // unconstrained optimum has a negative coordinate, so it gets clamped
        let a = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let b = vec![2.0, -1.0, 1.0];
        let x = nnls(&a, &b).unwrap();
        // with x1 = 0 the problem is min (x0-2)² + 1 + (x0-1)² → x0 = 1.5
        assert!((x[0] - 1.5).abs() < 1e-12 && x[1] == 0.0);

        let a = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 7.0]];
        let truth = [0.5, 2.0];
        let b: Vec<f64> = a.iter().map(|r| r[0] * truth[0] + r[1] * truth[1]).collect();
        let x = nnls(&a, &b).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-10 && (x[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn nnls_kkt_conditions() {
        let mut s = crate::rng::SeedSpec::new(3).stream();
        for _ in 0..20 {
            let a: Vec<Vec<f64>> = (0..12).map(|_| s.std_normals(6)).collect();
            let b = s.std_normals(12);
            let x = nnls(&a, &b).unwrap();
            let r: Vec<f64> = (0..12)
                .map(|i| b[i] - crate::linalg::dot(&a[i], &x))
                .collect();
            for j in 0..6 {
                let w: f64 = (0..12).map(|i| a[i][j] * r[i]).sum();
                assert!(x[j] >= 0.0);
                if x[j] > 0.0 {
                    assert!(w.abs() < 1e-9, "gradient {w} on active coordinate");
                } else {
                    assert!(w < 1e-9);
                }
            }
        }
    }
}
