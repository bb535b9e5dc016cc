//! Maximum likelihood for the skew-normal and skew-t families, over
//! `(ξ, log-Cholesky factor of Ω, α)` and `log ν`.

use std::f64::consts::{LN_2, PI};

use statrs::function::gamma::ln_gamma;

use super::{pack_factor, require_n, tri_len, unpack_scatter, FitResult};
use crate::distributions::{FamilySpec, SnParams, StParams};
use crate::error::{Error, Result};
use crate::linalg::{self, Cholesky, SpdMatrix, SqMatrix};
use crate::optim::{nelder_mead, OptimizerOpts};
use crate::sample::Sample;
use crate::special::{log_norm_cdf, log_t_cdf, LN_SQRT_2PI};

const NU_START: f64 = 10.0;
const NU_CAP: f64 = 1e6;
const DELTA_CLIP: f64 = 0.95;

pub(crate) fn fit_opts() -> OptimizerOpts {
    OptimizerOpts {
        max_iter: 20_000,
        tol_x: 1e-6,
        tol_f: 1e-8,
        initial_step: 0.1,
        restarts: 1,
    }
}

/// Moment estimator: marginal skewness gives δ, clipped so that
/// `δᵀΩ̄⁻¹δ ≤ 0.95²`, then mean and covariance give ξ and Ω.
fn moment_start(x: &Sample) -> Result<SnParams> {
    let p = x.p();
    let n = x.n() as f64;
    let mean = x.mean();
    let cov = x.covariance();
    let b = (2.0 / PI).sqrt();
    let mut delta = vec![0.0; p];
    for j in 0..p {
        let c = x.column(j);
        let s2 = cov[(j, j)];
        let m3 = c.iter().map(|v| (v - mean[j]).powi(3)).sum::<f64>() / n;
        let g1 = (m3 / s2.powf(1.5)).clamp(-0.99, 0.99);
        let r = (2.0 * g1 / (4.0 - PI)).cbrt();
        let mu_z = r / (1.0 + r * r).sqrt();
        delta[j] = (mu_z / b).clamp(-DELTA_CLIP, DELTA_CLIP);
    }
    let build = |delta: &[f64]| -> Result<(SqMatrix, Vec<f64>)> {
        let w: Vec<f64> = (0..p)
            .map(|j| (cov[(j, j)] / (1.0 - b * b * delta[j] * delta[j])).sqrt())
            .collect();
        let mz: Vec<f64> = (0..p).map(|j| w[j] * b * delta[j]).collect();
        let omega = cov.add(&SqMatrix::outer(&mz, &mz));
        Ok((omega, mz))
    };
    let (mut omega, mut mz) = build(&delta)?;
    let mut obar = SpdMatrix::new(omega.symmetrized())?.correlation();
    let mut q = Cholesky::new(&obar)?.inv_quad_form(&delta);
    if q > DELTA_CLIP * DELTA_CLIP {
        let s = DELTA_CLIP / q.sqrt();
        delta.iter_mut().for_each(|d| *d *= s);
        (omega, mz) = build(&delta)?;
        obar = SpdMatrix::new(omega.symmetrized())?.correlation();
        q = Cholesky::new(&obar)?.inv_quad_form(&delta);
    }
    let od = Cholesky::new(&obar)?.solve(&delta);
    let alpha: Vec<f64> = od.iter().map(|v| v / (1.0 - q).max(1e-6).sqrt()).collect();
    let xi: Vec<f64> = mean.iter().zip(&mz).map(|(m, z)| m - z).collect();
    SnParams::new(xi, SpdMatrix::new(omega.symmetrized())?, alpha)
}

/// Shared pieces of the SN and ST log-likelihoods for one parameter vector.
struct Core {
    xi: Vec<f64>,
    chol: Cholesky,
    omega: SpdMatrix,
    /// α/ω, the linear form inside the CDF factor.
    eta: Vec<f64>,
    alpha: Vec<f64>,
}

fn core_from(xi: &[f64], fac: &[f64], alpha: Vec<f64>, p: usize) -> Option<Core> {
    let (omega, chol) = unpack_scatter(fac, p)?;
    let eta = alpha.iter().zip(omega.scales()).map(|(a, w)| a / w).collect();
    Some(Core {
        xi: xi.to_vec(),
        chol,
        omega,
        eta,
        alpha,
    })
}

/// `(‖L⁻¹d‖², ηᵀd)` over the rows, written into `out`.
fn row_terms(c: &Core, x: &Sample, out: &mut Vec<(f64, f64)>) {
    let p = x.p();
    let l = c.chol.factor();
    let mut z = vec![0.0; p];
    out.clear();
    for r in x.rows() {
        let mut lin = 0.0;
        for i in 0..p {
            let d = r[i] - c.xi[i];
            lin += c.eta[i] * d;
            let row = l.row(i);
            let mut s = d;
            for k in 0..i {
                s -= row[k] * z[k];
            }
            z[i] = s / row[i];
        }
        out.push((z.iter().map(|v| v * v).sum(), lin));
    }
}

fn sn_loglik(c: &Core, x: &Sample, buf: &mut Vec<(f64, f64)>) -> f64 {
    row_terms(c, x, buf);
    let p = x.p() as f64;
    let k = LN_2 - p * LN_SQRT_2PI - 0.5 * c.chol.log_det();
    buf.iter().map(|(q, lin)| k - 0.5 * q + log_norm_cdf(*lin)).sum()
}

fn st_loglik(c: &Core, nu: f64, x: &Sample, buf: &mut Vec<(f64, f64)>) -> f64 {
    row_terms(c, x, buf);
    let p = x.p() as f64;
    let k = LN_2 + ln_gamma(0.5 * (nu + p)) - ln_gamma(0.5 * nu) - 0.5 * p * (nu * PI).ln() - 0.5 * c.chol.log_det();
    buf.iter()
        .map(|(q, lin)| {
            k - 0.5 * (nu + p) * (q / nu).ln_1p() + log_t_cdf(lin * ((nu + p) / (q + nu)).sqrt(), nu + p)
        })
        .sum()
}

/// Unit vector from p − 1 hyperspherical angles.
pub(crate) fn unit_from_angles(ang: &[f64]) -> Vec<f64> {
    let mut u = Vec::with_capacity(ang.len() + 1);
    let mut s = 1.0;
    for a in ang {
        u.push(s * a.cos());
        s *= a.sin();
    }
    u.push(s);
    u
}

fn angles_from_unit(u: &[f64]) -> Vec<f64> {
    let p = u.len();
    let mut ang = Vec::with_capacity(p.saturating_sub(1));
    for i in 0..p.saturating_sub(1) {
        let tail = u[i + 1..].iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut a = tail.atan2(u[i]);
        if i == p - 2 && u[p - 1] < 0.0 {
            a = -a;
        }
        ang.push(a);
    }
    ang
}

/// Angles of `dir/‖dir‖`, plus the sign that the angles cannot carry when
/// p = 1.
pub(crate) fn direction_angles(dir: &[f64]) -> (Vec<f64>, f64) {
    let nd = linalg::norm(dir);
    let u: Vec<f64> = dir.iter().map(|v| v / nd).collect();
    if u.len() == 1 {
        return (Vec::new(), u[0].signum());
    }
    (angles_from_unit(&u), 1.0)
}

/// α with direction `u` scaled so that `√(αᵀΩ̄α) = α*`.
fn alpha_with_star(u: &[f64], omega: &SpdMatrix, alpha_star: f64) -> Option<Vec<f64>> {
    if alpha_star == 0.0 {
        return Some(vec![0.0; u.len()]);
    }
    let q = omega.correlation().quad_form(u);
    if !(q > 0.0) {
        return None;
    }
    Some(u.iter().map(|v| alpha_star * v / q.sqrt()).collect())
}

fn pack(xi: &[f64], omega: &SqMatrix, tail: &[f64]) -> Result<Vec<f64>> {
    let mut v = xi.to_vec();
    v.extend(pack_factor(omega)?);
    v.extend_from_slice(tail);
    Ok(v)
}

fn finish_sn(xi: Vec<f64>, omega: SpdMatrix, alpha: Vec<f64>) -> Result<FamilySpec> {
    Ok(FamilySpec::Sn(SnParams::new(xi, omega, alpha)?))
}

pub fn fit_sn(x: &Sample) -> Result<FitResult> {
    let p = x.p();
    require_n(x, p + 3)?;
    let start = moment_start(x)?;
    let theta0 = pack(&start.xi, &start.omega, &start.alpha)?;
    let t = tri_len(p);
    let mut buf = Vec::with_capacity(x.n());
    let res = nelder_mead(
        |th| match core_from(&th[..p], &th[p..p + t], th[p + t..].to_vec(), p) {
            Some(c) => -sn_loglik(&c, x, &mut buf),
            None => f64::INFINITY,
        },
        &theta0,
        &fit_opts(),
    )?;
    let th = &res.x;
    let c = core_from(&th[..p], &th[p..p + t], th[p + t..].to_vec(), p)
        .ok_or_else(|| Error::Estimation("degenerate scatter at optimum".into()))?;
    Ok(FitResult {
        params: finish_sn(c.xi, c.omega, c.alpha)?,
        objective: -res.f,
        converged: res.converged,
        iterations: res.iterations,
        notes: Vec::new(),
    })
}

/// SN fit with the canonical skewness held at `alpha_star`; the direction of
/// α, ξ and Ω are free.
pub fn fit_sn_profile(x: &Sample, alpha_star: f64) -> Result<FitResult> {
    let p = x.p();
    require_n(x, p + 3)?;
    let start = fit_sn(x)?;
    let FamilySpec::Sn(s) = &start.params else { unreachable!() };
    let dir = if linalg::norm(&s.alpha) > 0.0 {
        s.alpha.clone()
    } else {
        let mut e = vec![0.0; p];
        e[0] = 1.0;
        e
    };
    let (ang, sign) = direction_angles(&dir);
    let theta0 = pack(&s.xi, &s.omega, &ang)?;
    let t = tri_len(p);
    let mut buf = Vec::with_capacity(x.n());
    let build = |th: &[f64]| -> Option<Core> {
        let (omega, _) = unpack_scatter(&th[p..p + t], p)?;
        let u: Vec<f64> = unit_from_angles(&th[p + t..]).iter().map(|v| sign * v).collect();
        let alpha = alpha_with_star(&u, &omega, alpha_star)?;
        core_from(&th[..p], &th[p..p + t], alpha, p)
    };
    let res = nelder_mead(
        |th| build(th).map_or(f64::INFINITY, |c| -sn_loglik(&c, x, &mut buf)),
        &theta0,
        &fit_opts(),
    )?;
    let c = build(&res.x).ok_or_else(|| Error::Estimation("degenerate scatter at optimum".into()))?;
    Ok(FitResult {
        params: finish_sn(c.xi, c.omega, c.alpha)?,
        objective: -res.f,
        converged: res.converged,
        iterations: res.iterations + start.iterations,
        notes: Vec::new(),
    })
}

fn nu_of(log_nu: f64) -> f64 {
    log_nu.exp().min(NU_CAP)
}

pub fn fit_st(x: &Sample) -> Result<FitResult> {
    let p = x.p();
    require_n(x, p + 3)?;
    let start = moment_start(x)?;
    let mut tail = start.alpha.clone();
    tail.push(NU_START.ln());
    let theta0 = pack(&start.xi, &start.omega, &tail)?;
    let t = tri_len(p);
    let mut buf = Vec::with_capacity(x.n());
    let res = nelder_mead(
        |th| match core_from(&th[..p], &th[p..p + t], th[p + t..p + t + p].to_vec(), p) {
            Some(c) => -st_loglik(&c, nu_of(th[2 * p + t]), x, &mut buf),
            None => f64::INFINITY,
        },
        &theta0,
        &fit_opts(),
    )?;
    let th = &res.x;
    let nu = nu_of(th[2 * p + t]);
    let c = core_from(&th[..p], &th[p..p + t], th[p + t..p + t + p].to_vec(), p)
        .ok_or_else(|| Error::Estimation("degenerate scatter at optimum".into()))?;
    let mut notes = Vec::new();
    if nu >= NU_CAP {
        notes.push(format!("degrees of freedom reached the cap {NU_CAP:e}"));
    }
    Ok(FitResult {
        params: FamilySpec::St(StParams::new(c.xi, c.omega, c.alpha, nu)?),
        objective: -res.f,
        converged: res.converged,
        iterations: res.iterations,
        notes,
    })
}

/// ST fit with canonical skewness `alpha_star` and degrees of freedom `nu`
/// held fixed.
pub fn fit_st_profile(x: &Sample, alpha_star: f64, nu: f64) -> Result<FitResult> {
    let p = x.p();
    require_n(x, p + 3)?;
    if !(nu > 0.0) {
        return Err(Error::InvalidParameter(format!("degrees of freedom must be positive, got {nu}")));
    }
    let start = moment_start(x)?;
    let dir = if linalg::norm(&start.alpha) > 0.0 {
        start.alpha.clone()
    } else {
        let mut e = vec![0.0; p];
        e[0] = 1.0;
        e
    };
    let (ang, sign) = direction_angles(&dir);
    let theta0 = pack(&start.xi, &start.omega, &ang)?;
    let t = tri_len(p);
    let mut buf = Vec::with_capacity(x.n());
    let build = |th: &[f64]| -> Option<Core> {
        let (omega, _) = unpack_scatter(&th[p..p + t], p)?;
        let u: Vec<f64> = unit_from_angles(&th[p + t..]).iter().map(|v| sign * v).collect();
        let alpha = alpha_with_star(&u, &omega, alpha_star)?;
        core_from(&th[..p], &th[p..p + t], alpha, p)
    };
    let nu_eval = nu.min(NU_CAP);
    let res = nelder_mead(
        |th| {
            build(th).map_or(f64::INFINITY, |c| {
                if nu.is_infinite() {
                    -sn_loglik(&c, x, &mut buf)
                } else {
                    -st_loglik(&c, nu_eval, x, &mut buf)
                }
            })
        },
        &theta0,
        &fit_opts(),
    )?;
    let c = build(&res.x).ok_or_else(|| Error::Estimation("degenerate scatter at optimum".into()))?;
    Ok(FitResult {
        params: FamilySpec::St(StParams::new(c.xi, c.omega, c.alpha, nu)?),
        objective: -res.f,
        converged: res.converged,
        iterations: res.iterations,
        notes: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{sample_sn, sample_st, SnDensity, StDensity};
    use crate::rng::SeedSpec;

    fn sn_of(f: &FitResult) -> SnParams {
        match &f.params {
            FamilySpec::Sn(s) => s.clone(),
            _ => panic!("not SN"),
        }
    }

    #[test]
    fn angles_round_trip() {
        for u in [vec![0.6, 0.8], vec![0.6, -0.8], vec![-1.0, 0.0], vec![0.2, -0.4, 0.8944271909999159]] {
            let back = unit_from_angles(&angles_from_unit(&u));
            for (a, b) in u.iter().zip(&back) {
                assert!((a - b).abs() < 1e-12, "{u:?} {back:?}");
            }
        }
    }

    #[test]
    fn recovers_canonical_skewness() {
        let truth = SnParams::canonical(2, 3.0);
        let mut stars = Vec::new();
        let mut small = Vec::new();
        for r in 0..20 {
            let x = sample_sn(&truth, 2000, &mut SeedSpec::new(r).stream()).unwrap();
            let f = fit_sn(&x).unwrap();
            let est = sn_of(&f);
            stars.push(est.alpha_star());
            let ll_true = SnDensity::new(&truth).unwrap().loglik(&x);
            assert!(f.objective >= ll_true - 1e-6 * 2000.0, "{} {}", f.objective, ll_true);
            if r < 5 {
                let z = sample_sn(&SnParams::canonical(2, 0.0), 2000, &mut SeedSpec::new(100 + r).stream()).unwrap();
                small.push(linalg::norm(&sn_of(&fit_sn(&z).unwrap()).alpha));
            }
        }
        stars.sort_by(f64::total_cmp);
        let med = 0.5 * (stars[9] + stars[10]);
        assert!((med - 3.0).abs() <= 0.75, "{med}");
        // At α = 0 the information is singular and ‖α̂‖ shrinks like n^{−1/6}:
        // a sample skewness of order √(6/n) ≈ 0.055 maps to δ ≈ 0.57, i.e.
        // ‖α̂‖ ≈ 0.7 at n = 2000.
        small.sort_by(f64::total_cmp);
        assert!(small[2] <= 1.0, "{small:?}");
    }

    #[test]
    fn shift_equivariance_and_determinism() {
        let truth = SnParams::new(vec![0.5, 1.0], SpdMatrix::new(SqMatrix::from_rows(&[vec![2.0, 0.4], vec![0.4, 1.0]]).unwrap()).unwrap(), vec![2.0, -1.0]).unwrap();
        let x = sample_sn(&truth, 300, &mut SeedSpec::new(7).stream()).unwrap();
        let a = fit_sn(&x).unwrap();
        assert_eq!(a, fit_sn(&x).unwrap());
        let shifted = x.translate(&[10.0, -5.0]).unwrap();
        let b = fit_sn(&shifted).unwrap();
        let (sa, sb) = (sn_of(&a), sn_of(&b));
        assert!((sb.xi[0] - sa.xi[0] - 10.0).abs() < 1e-3 && (sb.xi[1] - sa.xi[1] + 5.0).abs() < 1e-3);
        assert!((a.objective - b.objective).abs() < 1e-4);
    }

    #[test]
    fn profile_holds_alpha_star() {
        let x = sample_sn(&SnParams::canonical(2, 2.0), 400, &mut SeedSpec::new(8).stream()).unwrap();
        let f = fit_sn_profile(&x, 3.0).unwrap();
        assert!((sn_of(&f).alpha_star() - 3.0).abs() < 1e-10);
        let free = fit_sn(&x).unwrap();
        assert!(free.objective >= f.objective - 1e-6);
        let z = fit_sn_profile(&x, 0.0).unwrap();
        assert_eq!(sn_of(&z).alpha, vec![0.0, 0.0]);
    }

    #[test]
    fn st_fit_beats_truth_and_profile_fixes_shape() {
        let truth = StParams::canonical(2, 3.0, 5.0);
        let x = sample_st(&truth, 1000, &mut SeedSpec::new(9).stream()).unwrap();
        let f = fit_st(&x).unwrap();
        let ll_true = StDensity::new(&truth).unwrap().loglik(&x);
        assert!(f.objective >= ll_true - 1e-6 * 1000.0);
        let FamilySpec::St(st) = &f.params else { panic!() };
        assert!(st.nu > 2.0 && st.nu < 20.0, "{}", st.nu);
        let g = fit_st_profile(&x, 3.0, 5.0).unwrap();
        let FamilySpec::St(sg) = &g.params else { panic!() };
        assert_eq!(sg.nu, 5.0);
        assert!((sg.sn().alpha_star() - 3.0).abs() < 1e-10);
        // the ST likelihood is checked against the density module
        let ll = StDensity::new(sg).unwrap().loglik(&x);
        assert!((ll - g.objective).abs() < 1e-8 * ll.abs());
    }

    #[test]
    fn too_few_observations() {
        let x = sample_sn(&SnParams::canonical(3, 1.0), 5, &mut SeedSpec::new(1).stream()).unwrap();
        assert!(fit_sn(&x).is_err());
    }
}
