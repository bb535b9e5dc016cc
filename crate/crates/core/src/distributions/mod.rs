//! Samplers, characteristic functions, densities and canonical forms for the
//! skew-normal, skew-t, skew-Laplace, Tukey g-and-h, asymmetric stable and
//! sinh-arcsinh families.

mod gh;
mod sas;
mod sl;
mod sn;
mod st;
mod stable;

use serde::{Deserialize, Serialize};

pub use gh::{sample_gh, tau_gh, tau_gh_inv, tau_gh_inv_from, tau_gh_prime, GhParams};
pub use sas::{sample_sas, sas_transform, SasParams};
pub use sl::{canonical_sl, cf_sl, sample_sl, sl_logpdf, sl_posterior_moments, SlDensity, SlParams};
pub use sn::{canonical_sn, cf_sn, sample_sn, sn_logpdf, sn_mean, SnDensity, SnParams, SnSampler, CF_SN_MAX_NORM};
pub use st::{canonical_st, sample_st, st_logpdf, StDensity, StParams};
pub use stable::{cf_as, psi_alpha, sample_as, AsParams, Atom};

use crate::error::{Error, Result};
use crate::linalg::SqMatrix;
use crate::rng::RandomStream;
use crate::sample::Sample;

/// Family tag, without parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Sn,
    St,
    Sl,
    Gh,
    As,
    Sas,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Sn => "sn",
            Family::St => "st",
            Family::Sl => "sl",
            Family::Gh => "gh",
            Family::As => "as",
            Family::Sas => "sas",
        }
    }

    /// Families that can serve as a null hypothesis.
    pub fn is_testable(self) -> bool {
        self != Family::Sas
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "sn" => Family::Sn,
            "st" => Family::St,
            "sl" => Family::Sl,
            "gh" => Family::Gh,
            "as" => Family::As,
            "sas" => Family::Sas,
            other => return Err(Error::InvalidParameter(format!("unknown family '{other}'"))),
        })
    }
}

/// A fully specified member of one of the supported families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum FamilySpec {
    Sn(SnParams),
    St(StParams),
    Sl(SlParams),
    Gh(GhParams),
    As(AsParams),
    Sas(SasParams),
}

impl FamilySpec {
    pub fn family(&self) -> Family {
        match self {
            FamilySpec::Sn(_) => Family::Sn,
            FamilySpec::St(_) => Family::St,
            FamilySpec::Sl(_) => Family::Sl,
            FamilySpec::Gh(_) => Family::Gh,
            FamilySpec::As(_) => Family::As,
            FamilySpec::Sas(_) => Family::Sas,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FamilySpec::Sn(p) => p.dim(),
            FamilySpec::St(p) => p.dim(),
            FamilySpec::Sl(p) => p.dim(),
            FamilySpec::Gh(p) => p.dim(),
            FamilySpec::As(p) => p.dim(),
            FamilySpec::Sas(p) => p.dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FamilySpec::Sn(p) => p.validate(),
            FamilySpec::St(p) => p.validate(),
            FamilySpec::Sl(p) => p.validate(),
            FamilySpec::Gh(p) => p.validate(),
            FamilySpec::As(p) => p.validate(),
            FamilySpec::Sas(p) => p.validate(),
        }
    }

    pub fn sample(&self, n: usize, stream: &mut RandomStream) -> Result<Sample> {
        match self {
            FamilySpec::Sn(p) => sample_sn(p, n, stream),
            FamilySpec::St(p) => sample_st(p, n, stream),
            FamilySpec::Sl(p) => sample_sl(p, n, stream),
            FamilySpec::Gh(p) => sample_gh(p, n, stream),
            FamilySpec::As(p) => sample_as(p, n, stream),
            FamilySpec::Sas(p) => sample_sas(p, n, stream),
        }
    }
}

/// Result of reducing an SN, ST or SL law to canonical form: `Hᵀ(X − ξ)`
/// has location 0, scatter I and skewness `(α*, 0, ..., 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalInfo {
    pub h: SqMatrix,
    pub alpha_star: f64,
    /// Degrees of freedom, for the skew-t only.
    pub nu: Option<f64>,
}

pub(crate) fn check_len(name: &str, v: &[f64], p: usize) -> Result<()> {
    if v.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(name.to_string()));
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod test_support {
    use crate::linalg::{SpdMatrix, SqMatrix};
    use crate::rng::SeedSpec;
    use crate::sample::Sample;

    pub use crate::validation::{max_cf_error, t_grid};

    use super::SnParams;

    pub fn spd<const N: usize>(rows: &[[f64; N]; N]) -> SpdMatrix {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        SpdMatrix::new(SqMatrix::from_rows(&rows).unwrap()).unwrap()
    }

    pub fn random_spd(p: usize, seed: u64) -> SpdMatrix {
        let mut s = SeedSpec::new(seed).child(1).stream();
        let a = SqMatrix::from_row_major(p, s.std_normals(p * p)).unwrap();
        let m = a.matmul(&a.transpose()).add(&SqMatrix::identity(p).scale(0.5));
        SpdMatrix::new(m.symmetrized()).unwrap()
    }

    pub fn random_sn(p: usize, seed: u64) -> SnParams {
        let mut s = SeedSpec::new(seed).child(2).stream();
        let xi = s.std_normals(p);
        let alpha = s.std_normals(p).iter().map(|v| 2.0 * v).collect();
        SnParams::new(xi, random_spd(p, seed), alpha).unwrap()
    }

    /// Mardia's multivariate skewness and kurtosis `(b₁, b₂)`.
    pub fn mardia(x: &Sample) -> (f64, f64) {
        let n = x.n();
        let mean = x.mean();
        let chol = crate::linalg::Cholesky::new(&x.covariance()).unwrap();
        let z: Vec<Vec<f64>> = x
            .rows()
            .map(|r| {
                let d: Vec<f64> = r.iter().zip(&mean).map(|(a, b)| a - b).collect();
                chol.solve_lower(&d)
            })
            .collect();
        let mut b2 = 0.0;
        for zi in &z {
            b2 += crate::linalg::dot(zi, zi).powi(2);
        }
        // b₁ = n⁻² ΣΣ (z_iᵀz_j)³ = n⁻² ‖Σ_i z_i⊗z_i⊗z_i‖², computed via the third-moment tensor
        let p = x.p();
        let mut t = vec![0.0; p * p * p];
        for zi in &z {
            for a in 0..p {
                for b in 0..p {
                    for c in 0..p {
                        t[(a * p + b) * p + c] += zi[a] * zi[b] * zi[c];
                    }
                }
            }
        }
        let b1 = t.iter().map(|v| v * v).sum::<f64>() / (n * n) as f64;
        (b1, b2 / n as f64)
    }
}
