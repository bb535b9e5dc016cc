//! Maximum likelihood for the Tukey g-and-h family.
//!
//! With `Y = Ω τ(Z) + ξ` the log-likelihood is
//! `−n ln|Ω| + Σ_i Σ_j [ln φ(u_ij) − ln τ'(u_ij)]`, `u_i = τ⁻¹(Ω⁻¹(Y_i − ξ))`.

use super::sn::fit_opts;
use super::{median, pack_factor, quantile_sorted, require_n, tri_len, unpack_scatter, FitResult};
use crate::distributions::{tau_gh_inv_from, tau_gh_prime, FamilySpec, GhParams};
use crate::error::{Error, Result};
use crate::linalg::{self, Cholesky, SpdMatrix, SqMatrix};
use crate::optim::nelder_mead;
use crate::sample::Sample;
use crate::special::{norm_logpdf, norm_quantile};

/// Rows whose inversion fails contribute as if `|u|` were this large.
const U_CLAMP: f64 = 38.0;
const H_FLOOR: f64 = 1e-3;
const HOAGLIN_LEVELS: [f64; 6] = [0.25, 0.1, 0.05, 0.025, 0.01, 0.005];

/// Log-likelihood evaluator that remembers the last inverse of every entry
/// and uses it to warm-start the next inversion.
#[derive(Debug, Clone)]
pub struct GhLikelihood<'a> {
    x: &'a Sample,
    guess: Vec<f64>,
    failures: usize,
}

impl<'a> GhLikelihood<'a> {
    pub fn new(x: &'a Sample) -> Self {
        Self {
            x,
            guess: vec![0.0; x.as_slice().len()],
            failures: 0,
        }
    }

    /// Entries whose inversion failed in the most recent evaluation.
    pub fn failures(&self) -> usize {
        self.failures
    }

    pub fn eval(&mut self, params: &GhParams) -> Result<f64> {
        let chol = Cholesky::new(&params.omega)?;
        Ok(self.eval_with(params, &chol))
    }

    /// Returns −∞ when a row falls outside the support (only possible when
    /// some h = 0).
    fn eval_with(&mut self, params: &GhParams, chol: &Cholesky) -> f64 {
        let p = params.dim();
        let n = self.x.n();
        self.failures = 0;
        let mut total = -(n as f64) * chol.log_det();
        let mut r = vec![0.0; p];
        for (i, row) in self.x.rows().enumerate() {
            for j in 0..p {
                r[j] = row[j] - params.xi[j];
            }
            let y = chol.solve(&r);
            for j in 0..p {
                let (g, h) = (params.g[j], params.h[j]);
                let slot = &mut self.guess[i * p + j];
                let u = match tau_gh_inv_from(g, h, y[j], *slot) {
                    Ok(u) => u,
                    Err(Error::BracketFailure(_)) if h == 0.0 => return f64::NEG_INFINITY,
                    Err(_) => {
                        self.failures += 1;
                        U_CLAMP.copysign(y[j])
                    }
                };
                *slot = u;
                total += norm_logpdf(u) - tau_gh_prime(g, h, u).ln();
            }
        }
        total
    }
}

pub fn gh_loglik(params: &GhParams, x: &Sample) -> Result<f64> {
    params.validate()?;
    if x.p() != params.dim() {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            got: x.p(),
        });
    }
    GhLikelihood::new(x).eval(params)
}

/// Per-coordinate quantile estimates of `(g, h, scale)`: g is the median of
/// `−ln((x_{1−q} − m)/(m − x_q))/z_q`; h and the scale come from regressing
/// the log half-spread corrected for g on `z_q²/2`.
fn hoaglin(col: &[f64]) -> (f64, f64, f64) {
    let mut v = col.to_vec();
    v.sort_by(f64::total_cmp);
    let m = quantile_sorted(&v, 0.5);
    let mut gs = Vec::new();
    for q in HOAGLIN_LEVELS {
        let z = norm_quantile(q);
        let (lo, hi) = (m - quantile_sorted(&v, q), quantile_sorted(&v, 1.0 - q) - m);
        if lo > 0.0 && hi > 0.0 {
            gs.push(-(hi / lo).ln() / z);
        }
    }
    let g = if gs.is_empty() { 0.0 } else { median(&gs) };
    let mut pts = Vec::new();
    for q in HOAGLIN_LEVELS {
        let z = norm_quantile(q);
        let spread = quantile_sorted(&v, 1.0 - q) - quantile_sorted(&v, q);
        let core = if g.abs() < 1e-6 { -2.0 * z } else { ((-g * z).exp() - (g * z).exp()) / g };
        if spread > 0.0 && core > 0.0 {
            pts.push((0.5 * z * z, (spread / core).ln()));
        }
    }
    if pts.len() < 2 {
        let s = (v[v.len() - 1] - v[0]).max(1e-8);
        return (g, H_FLOOR, s);
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let h = (sxy / sxx).max(H_FLOOR);
    (g, h, (my - h * mx).exp())
}

/// Pearson correlation of the normal scores `Φ⁻¹(rank/(n+1))`.
fn normal_scores_correlation(x: &Sample) -> SqMatrix {
    let n = x.n();
    let p = x.p();
    let scores: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            let c = x.column(j);
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|a, b| c[*a].total_cmp(&c[*b]));
            let mut s = vec![0.0; n];
            for (rank, i) in idx.into_iter().enumerate() {
                s[i] = norm_quantile((rank + 1) as f64 / (n + 1) as f64);
            }
            s
        })
        .collect();
    let mut r = SqMatrix::identity(p);
    for a in 0..p {
        for b in 0..a {
            let num = linalg::dot(&scores[a], &scores[b]);
            let v = num / (linalg::norm(&scores[a]) * linalg::norm(&scores[b]));
            r[(a, b)] = v;
            r[(b, a)] = v;
        }
    }
    r
}

struct Start {
    xi: Vec<f64>,
    omega: SqMatrix,
    g: Vec<f64>,
    h: Vec<f64>,
}

fn start_values(x: &Sample) -> Result<Start> {
    let p = x.p();
    let mut xi = Vec::with_capacity(p);
    let mut g = Vec::with_capacity(p);
    let mut h = Vec::with_capacity(p);
    let mut d = Vec::with_capacity(p);
    for j in 0..p {
        let c = x.column(j);
        xi.push(median(&c));
        let (gj, hj, bj) = hoaglin(&c);
        g.push(gj);
        h.push(hj);
        d.push(bj);
    }
    let dm = SqMatrix::from_diag(&d);
    let cov = dm.matmul(&normal_scores_correlation(x)).matmul(&dm);
    let omega = linalg::spd_sqrt(&cov.symmetrized())?;
    Ok(Start { xi, omega, g, h })
}

fn failure_note(lik: &GhLikelihood) -> Vec<String> {
    match lik.failures() {
        0 => Vec::new(),
        k => vec![format!("τ inversion failed for {k} entries at the optimum; they were down-weighted")],
    }
}

pub fn fit_gh(x: &Sample) -> Result<FitResult> {
    let p = x.p();
    let t = tri_len(p);
    require_n(x, 2 * p + t + 1)?;
    let s = start_values(x)?;
    let mut theta0 = s.xi.clone();
    theta0.extend(pack_factor(&s.omega)?);
    theta0.extend(&s.g);
    theta0.extend(s.h.iter().map(|h| h.ln()));
    let build = |th: &[f64]| -> Option<(GhParams, Cholesky)> {
        let (omega, chol) = unpack_scatter(&th[p..p + t], p)?;
        let g = th[p + t..2 * p + t].to_vec();
        let h: Vec<f64> = th[2 * p + t..].iter().map(|v| v.exp()).collect();
        if h.iter().chain(&g).any(|v| !v.is_finite()) {
            return None;
        }
        Some((GhParams { xi: th[..p].to_vec(), omega, g, h }, chol))
    };
    let mut lik = GhLikelihood::new(x);
    let res = nelder_mead(
        |th| build(th).map_or(f64::INFINITY, |(gp, c)| -lik.eval_with(&gp, &c)),
        &theta0,
        &fit_opts(),
    )?;
    let (params, chol) = build(&res.x).ok_or_else(|| Error::Estimation("degenerate scatter at optimum".into()))?;
    let ll = lik.eval_with(&params, &chol);
    Ok(FitResult {
        notes: failure_note(&lik),
        params: FamilySpec::Gh(GhParams::new(params.xi, params.omega, params.g, params.h)?),
        objective: ll,
        converged: res.converged,
        iterations: res.iterations,
    })
}

/// GH fit with `g` and `h` held fixed; only ξ and Ω are estimated.
pub fn fit_gh_profile(x: &Sample, g: &[f64], h: &[f64]) -> Result<FitResult> {
    let p = x.p();
    let t = tri_len(p);
    require_n(x, p + t + 1)?;
    GhParams::new(vec![0.0; p], SpdMatrix::identity(p), g.to_vec(), h.to_vec())?;
    let s = start_values(x)?;
    let mut theta0 = s.xi.clone();
    theta0.extend(pack_factor(&s.omega)?);
    let build = |th: &[f64]| -> Option<(GhParams, Cholesky)> {
        let (omega, chol) = unpack_scatter(&th[p..], p)?;
        Some((
            GhParams {
                xi: th[..p].to_vec(),
                omega,
                g: g.to_vec(),
                h: h.to_vec(),
            },
            chol,
        ))
    };
    let mut lik = GhLikelihood::new(x);
    let res = nelder_mead(
        |th| build(th).map_or(f64::INFINITY, |(gp, c)| -lik.eval_with(&gp, &c)),
        &theta0,
        &fit_opts(),
    )?;
    let (params, chol) = build(&res.x).ok_or_else(|| Error::Estimation("degenerate scatter at optimum".into()))?;
    let ll = lik.eval_with(&params, &chol);
    if !ll.is_finite() {
        return Err(Error::Estimation("no finite likelihood under the fixed shape".into()));
    }
    Ok(FitResult {
        notes: failure_note(&lik),
        params: FamilySpec::Gh(params),
        objective: ll,
        converged: res.converged,
        iterations: res.iterations,
    })
}
