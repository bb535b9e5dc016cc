//! Estimators for the five families: maximum likelihood for SN, ST and GH,
//! EM for SL, and the projection method for the planar stable law. Each
//! family also has a profile fit with its shape parameter held fixed, used
//! by the simple-null procedure.

mod gh;
mod sl;
mod sn;
mod stable;

use serde::{Deserialize, Serialize};

pub use crate::optim::{find_root_increasing, nelder_mead, MinimizeResult, OptimizerOpts};
pub use gh::{fit_gh, fit_gh_profile, gh_loglik, GhLikelihood};
pub use sl::{fit_sl, fit_sl_profile, fit_sl_traced, SlTrace};
pub use sn::{fit_sn, fit_sn_profile, fit_st, fit_st_profile};
pub use stable::{fit_as, fit_as_profile, project_stable, UnivariateStable, DEFAULT_GRID_SIZE};

use crate::distributions::{Family, FamilySpec};
use crate::error::{Error, Result};
use crate::linalg::{self, Cholesky, SpdMatrix, SqMatrix};
use crate::sample::Sample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: FamilySpec,
    /// Log-likelihood at the estimate (SN, ST, SL, GH) or the negated
    /// residual sum of squares of the projection fit (AS).
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub notes: Vec<String>,
}

/// Unconstrained fit of `family` to `x`.
pub fn fit(family: Family, x: &Sample) -> Result<FitResult> {
    match family {
        Family::Sn => fit_sn(x),
        Family::St => fit_st(x),
        Family::Sl => fit_sl(x),
        Family::Gh => fit_gh(x),
        Family::As => fit_as(x, DEFAULT_GRID_SIZE),
        Family::Sas => Err(Error::Unsupported("no estimator for the sinh-arcsinh family".into())),
    }
}

pub(crate) fn require_n(x: &Sample, min: usize) -> Result<()> {
    if x.n() < min {
        return Err(Error::Estimation(format!(
            "need more than {} observations in dimension {}, got {}",
            min - 1,
            x.p(),
            x.n()
        )));
    }
    Ok(())
}

/// Number of free entries in a lower-triangular p×p factor.
pub(crate) fn tri_len(p: usize) -> usize {
    p * (p + 1) / 2
}

/// Packs the Cholesky factor of `a` row by row, storing log-diagonals.
pub(crate) fn pack_factor(a: &SqMatrix) -> Result<Vec<f64>> {
    let l = linalg::cholesky(a)?;
    let p = a.dim();
    let mut out = Vec::with_capacity(tri_len(p));
    for i in 0..p {
        for j in 0..=i {
            out.push(if i == j { l[(i, j)].ln() } else { l[(i, j)] });
        }
    }
    Ok(out)
}

pub(crate) fn unpack_factor(v: &[f64], p: usize) -> SqMatrix {
    let mut l = SqMatrix::zeros(p);
    let mut k = 0;
    for i in 0..p {
        for j in 0..=i {
            l[(i, j)] = if i == j { v[k].exp() } else { v[k] };
            k += 1;
        }
    }
    l
}

/// `L Lᵀ`, exactly symmetric.
pub(crate) fn factor_product(l: &SqMatrix) -> SqMatrix {
    let p = l.dim();
    let mut m = SqMatrix::zeros(p);
    for i in 0..p {
        for j in 0..=i {
            let v: f64 = (0..=j).map(|k| l[(i, k)] * l[(j, k)]).sum();
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Scatter matrix and factor from a packed vector, or `None` when the factor
/// is numerically degenerate.
pub(crate) fn unpack_scatter(v: &[f64], p: usize) -> Option<(SpdMatrix, Cholesky)> {
    let l = unpack_factor(v, p);
    if l.diag().iter().any(|d| !(d.is_finite() && *d > 1e-150)) || l.as_slice().iter().any(|x| !x.is_finite()) {
        return None;
    }
    let omega = SpdMatrix::new(factor_product(&l)).ok()?;
    Some((omega, Cholesky::from_factor(l)))
}

/// Ridge adjustment `Ω + 1e−8·tr(Ω)/p·I` for condition numbers above 1e12.
pub(crate) fn regularize(omega: SqMatrix, notes: &mut Vec<String>) -> Result<SpdMatrix> {
    let omega = omega.symmetrized();
    let eig = linalg::sym_eigen(&omega)?;
    let lo = eig.values[0];
    let hi = *eig.values.last().unwrap();
    if lo > 0.0 && hi / lo <= 1e12 {
        return SpdMatrix::new(omega);
    }
    let p = omega.dim();
    let ridge = 1e-8 * omega.trace() / p as f64;
    notes.push(format!("scatter condition number {:.3e} exceeds 1e12; ridge {ridge:.3e} added", hi / lo));
    SpdMatrix::new(omega.add(&SqMatrix::identity(p).scale(ridge)))
}

/// Componentwise median of the sample.
pub(crate) fn median(x: &[f64]) -> f64 {
    quantile(x, 0.5)
}

/// Linear-interpolation quantile (type 7).
pub(crate) fn quantile(x: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = x.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, q)
}

pub(crate) fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_round_trip() {
        let a = SqMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 5.0]]).unwrap();
        let v = pack_factor(&a).unwrap();
        assert_eq!(v.len(), 3);
        assert!((v[0] - 2f64.ln()).abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15);
        let (om, chol) = unpack_scatter(&v, 2).unwrap();
        assert!(om.sub(&a).frobenius_norm() < 1e-14);
        assert!((chol.log_det() - 16f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn ridge_only_when_ill_conditioned() {
        let mut notes = Vec::new();
        regularize(SqMatrix::identity(2), &mut notes).unwrap();
        assert!(notes.is_empty());
        let bad = SqMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0 + 1e-14]]).unwrap();
        let fixed = regularize(bad, &mut notes).unwrap();
        assert_eq!(notes.len(), 1);
        let e = linalg::sym_eigen(&fixed).unwrap();
        assert!(e.values[0] > 0.0);
    }

    #[test]
    fn quantile_rule() {
        let x = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(median(&x), 2.5);
        assert_eq!(quantile(&x, 0.0), 1.0);
        assert_eq!(quantile(&x, 1.0), 4.0);
    }
}
