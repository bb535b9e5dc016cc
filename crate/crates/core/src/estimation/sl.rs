//! EM for the skew-Laplace law, viewed as a Gamma((p+1)/2, 2) variance–mean
//! mixture, and a direct-likelihood profile fit with α* held fixed.

use super::sn::{direction_angles, fit_opts, unit_from_angles};
use super::{pack_factor, regularize, require_n, tri_len, unpack_scatter, FitResult};
use crate::distributions::{FamilySpec, SlDensity, SlParams};
use crate::error::{Error, Result};
use crate::linalg::{self, SpdMatrix, SqMatrix};
use crate::optim::nelder_mead;
use crate::sample::Sample;

const MAX_EM_ITER: usize = 5000;
const EM_TOL: f64 = 1e-8;

/// Log-likelihood after each EM iteration; entry 0 is the starting value.
#[derive(Debug, Clone, PartialEq)]
pub struct SlTrace {
    pub loglik: Vec<f64>,
}

pub fn fit_sl(x: &Sample) -> Result<FitResult> {
    fit_sl_traced(x).map(|(f, _)| f)
}

/// Floor on the Mahalanobis distance in the E-step. The MLE of ξ often sits
/// on an observation (the density has a cusp there), where `E[1/W | x]` is
/// unbounded.
const Q_FLOOR: f64 = 1e-12;

/// One EM update. `None` when the M-step scatter cannot be repaired.
fn em_step(x: &Sample, dens: &SlDensity, notes: &mut Vec<String>) -> Option<SlParams> {
    let p = x.p();
    let n = x.n() as f64;
    let xbar = x.mean();
    let mut a = Vec::with_capacity(x.n());
    let mut b = Vec::with_capacity(x.n());
    for r in x.rows() {
        let (ai, bi) = dens.posterior_moments_floored(r, Q_FLOOR);
        a.push(ai);
        b.push(bi);
    }
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    let mut bx = vec![0.0; p];
    for (r, bi) in x.rows().zip(&b) {
        for (v, xv) in bx.iter_mut().zip(r) {
            *v += bi * xv;
        }
    }
    let den = n * n - sa * sb;
    let xi: Vec<f64> = (0..p).map(|j| (n * n * xbar[j] - sa * bx[j]) / den).collect();
    let alpha: Vec<f64> = (0..p).map(|j| n * (xbar[j] - xi[j]) / sa).collect();
    let mut om = SqMatrix::zeros(p);
    for ((r, ai), bi) in x.rows().zip(&a).zip(&b) {
        for j in 0..p {
            let dj = r[j] - xi[j];
            for k in 0..=j {
                let dk = r[k] - xi[k];
                om[(j, k)] += bi * dj * dk - alpha[j] * dk - dj * alpha[k] + ai * alpha[j] * alpha[k];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            om[(k, j)] = om[(j, k)];
        }
    }
    match regularize(om.scale(1.0 / n), notes) {
        Ok(omega) => Some(SlParams { xi, omega, alpha }),
        Err(e) => {
            notes.push(format!("EM stopped: {e}"));
            None
        }
    }
}

fn flatten(s: &SlParams) -> Vec<f64> {
    let mut v = s.xi.clone();
    v.extend(&s.alpha);
    v.extend(s.omega.as_slice());
    v
}

fn unflatten(v: &[f64], p: usize) -> Option<SlParams> {
    let omega = SqMatrix::from_row_major(p, v[2 * p..].to_vec()).ok()?.symmetrized();
    Some(SlParams {
        xi: v[..p].to_vec(),
        alpha: v[p..2 * p].to_vec(),
        omega: SpdMatrix::new(omega).ok()?,
    })
}

/// Squared-extrapolation point from three successive EM iterates, with the
/// steplength `−‖r‖/‖v‖` capped at −1 from above.
fn extrapolate(t0: &SlParams, t1: &SlParams, t2: &SlParams) -> Option<SlParams> {
    let (v0, v1, v2) = (flatten(t0), flatten(t1), flatten(t2));
    let r: Vec<f64> = v1.iter().zip(&v0).map(|(a, b)| a - b).collect();
    let v: Vec<f64> = (0..v0.len()).map(|i| v2[i] - 2.0 * v1[i] + v0[i]).collect();
    let (nr, nv) = (linalg::norm(&r), linalg::norm(&v));
    if nv == 0.0 || !nr.is_finite() {
        return None;
    }
    let step = (-nr / nv).min(-1.0);
    let w: Vec<f64> = (0..v0.len()).map(|i| v0[i] - 2.0 * step * r[i] + step * step * v[i]).collect();
    unflatten(&w, t0.xi.len())
}

/// Evaluates a candidate; `None` unless it is valid with a finite likelihood.
fn scored(x: &Sample, s: SlParams) -> Option<(SlParams, SlDensity, f64)> {
    let d = SlDensity::new(&s).ok()?;
    let ll = d.loglik(x);
    ll.is_finite().then_some((s, d, ll))
}

/// EM from `ξ = x̄`, `α = 0`, `Ω = S/(p+1)`, accelerated by squared
/// extrapolation. An extrapolated point is kept only when it does at least
/// as well as the plain EM step, and a step that lowers the likelihood is
/// never taken, so the trace is non-decreasing. Stops when a cycle gains at
/// most 1e−8.
pub fn fit_sl_traced(x: &Sample) -> Result<(FitResult, SlTrace)> {
    let p = x.p();
    require_n(x, p + 3)?;
    let mut notes = Vec::new();
    let params = SlParams {
        xi: x.mean(),
        omega: regularize(x.covariance().scale(1.0 / (p as f64 + 1.0)), &mut notes)?,
        alpha: vec![0.0; p],
    };
    let dens = SlDensity::new(&params)?;
    let ll = dens.loglik(x);
    let mut cur = (params, dens, ll);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    'outer: while iterations < MAX_EM_ITER {
        let ll0 = cur.2;
        let mut chain = Vec::with_capacity(2);
        for _ in 0..2 {
            iterations += 1;
            let next = em_step(x, &cur.1, &mut notes).and_then(|s| scored(x, s));
            match next {
                Some(nx) if nx.2 >= cur.2 => {
                    trace.push(nx.2);
                    let prev = std::mem::replace(&mut cur, nx);
                    chain.push(prev.0);
                }
                Some(nx) => {
                    // rounding-level decrease at a fixed point
                    converged = cur.2 - nx.2 <= EM_TOL;
                    if !converged {
                        notes.push("EM step decreased the log-likelihood; previous iterate kept".into());
                    }
                    break 'outer;
                }
                None => {
                    notes.push("EM produced an invalid iterate; previous iterate kept".into());
                    break 'outer;
                }
            }
        }
        let candidate = extrapolate(&chain[0], &chain[1], &cur.0)
            .and_then(|s| scored(x, s))
            .and_then(|c| em_step(x, &c.1, &mut notes))
            .and_then(|s| scored(x, s));
        if let Some(c) = candidate {
            if c.2 > cur.2 {
                iterations += 1;
                trace.push(c.2);
                cur = c;
            }
        }
        if cur.2 - ll0 <= EM_TOL {
            converged = true;
            break;
        }
    }
    notes.dedup();
    let (params, _, ll) = cur;
    Ok((
        FitResult {
            params: FamilySpec::Sl(params),
            objective: ll,
            converged,
            iterations,
            notes,
        },
        SlTrace { loglik: trace },
    ))
}

/// SL fit with `‖Ω^{−1/2}α‖ = alpha_star`; the direction of α, ξ and Ω are
/// free. Starts from the EM estimate.
pub fn fit_sl_profile(x: &Sample, alpha_star: f64) -> Result<FitResult> {
    let p = x.p();
    let start = fit_sl(x)?;
    let FamilySpec::Sl(s) = &start.params else { unreachable!() };
    let dir = if linalg::norm(&s.alpha) > 0.0 {
        s.alpha.clone()
    } else {
        let mut e = vec![0.0; p];
        e[0] = 1.0;
        e
    };
    let (ang, sign) = direction_angles(&dir);
    let mut theta0 = s.xi.clone();
    theta0.extend(pack_factor(&s.omega)?);
    theta0.extend(ang);
    let t = tri_len(p);
    let build = |th: &[f64]| -> Option<SlParams> {
        let (omega, chol) = unpack_scatter(&th[p..p + t], p)?;
        let u: Vec<f64> = unit_from_angles(&th[p + t..]).iter().map(|v| sign * v).collect();
        let alpha = if alpha_star == 0.0 {
            vec![0.0; p]
        } else {
            let q = chol.inv_quad_form(&u);
            u.iter().map(|v| alpha_star * v / q.sqrt()).collect()
        };
        Some(SlParams {
            xi: th[..p].to_vec(),
            omega,
            alpha,
        })
    };
    let res = nelder_mead(
        |th| match build(th).and_then(|s| SlDensity::new(&s).ok()) {
            Some(d) => -d.loglik(x),
            None => f64::INFINITY,
        },
        &theta0,
        &fit_opts(),
    )?;
    let params = build(&res.x).ok_or_else(|| Error::Estimation("degenerate scatter at optimum".into()))?;
    Ok(FitResult {
        params: FamilySpec::Sl(SlParams::new(params.xi, SpdMatrix::new(params.omega.into_inner())?, params.alpha)?),
        objective: -res.f,
        converged: res.converged,
        iterations: res.iterations + start.iterations,
        notes: start.notes,
    })
}
