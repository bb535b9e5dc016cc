use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{check_len, CanonicalInfo};
use crate::error::{Error, Result};
use crate::linalg::{self, Cholesky, SpdMatrix, SqMatrix};
use crate::rng::RandomStream;
use crate::sample::Sample;
use crate::special::{self, LN_SQRT_2PI};

/// Skew-normal SN_p(ξ, Ω, α).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnParams {
    pub xi: Vec<f64>,
    pub omega: SpdMatrix,
    pub alpha: Vec<f64>,
}

impl SnParams {
    pub fn new(xi: Vec<f64>, omega: SpdMatrix, alpha: Vec<f64>) -> Result<Self> {
        let s = Self { xi, omega, alpha };
        s.validate()?;
        Ok(s)
    }

    /// SN_p(0, I, (α*, 0, ..., 0)).
    pub fn canonical(p: usize, alpha_star: f64) -> Self {
        let mut alpha = vec![0.0; p];
        alpha[0] = alpha_star;
        Self {
            xi: vec![0.0; p],
            omega: SpdMatrix::identity(p),
            alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.omega.dim();
        check_len("xi", &self.xi, p)?;
        check_len("alpha", &self.alpha, p)
    }

    pub fn dim(&self) -> usize {
        self.omega.dim()
    }

    /// δ = Ω̄α / √(1 + αᵀΩ̄α).
    pub fn delta(&self) -> Vec<f64> {
        let obar = self.omega.correlation();
        let oa = obar.matvec(&self.alpha);
        let q = linalg::dot(&self.alpha, &oa);
        oa.iter().map(|v| v / (1.0 + q).sqrt()).collect()
    }

    /// α* = √(αᵀΩ̄α).
    pub fn alpha_star(&self) -> f64 {
        self.omega.correlation().quad_form(&self.alpha).max(0.0).sqrt()
    }
}

/// Additive-representation sampler `X = ξ + ω(δ|Z₀| + V)`, `V ~ N(0, Ω̄ − δδᵀ)`.
pub struct SnSampler {
    xi: Vec<f64>,
    scales: Vec<f64>,
    delta: Vec<f64>,
    l: SqMatrix,
}

impl SnSampler {
    pub fn new(params: &SnParams) -> Result<Self> {
        params.validate()?;
        let delta = params.delta();
        let cov = params
            .omega
            .correlation()
            .sub(&SqMatrix::outer(&delta, &delta))
            .symmetrized();
        Ok(Self {
            xi: params.xi.clone(),
            scales: params.omega.scales(),
            delta,
            l: psd_factor(&cov)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }

    /// One draw of `ω(δ|Z₀| + V)` (location not added) into `out`.
    pub(crate) fn draw_centred(&self, s: &mut RandomStream, z: &mut [f64], out: &mut [f64]) {
        let p = self.dim();
        let z0 = s.std_normal().abs();
        for v in z.iter_mut() {
            *v = s.std_normal();
        }
        for i in 0..p {
            let row = self.l.row(i);
            let mut v = 0.0;
            for (r, zk) in row.iter().zip(z.iter()) {
                v += r * zk;
            }
            out[i] = self.scales[i] * (self.delta[i] * z0 + v);
        }
    }

    pub fn sample(&self, n: usize, s: &mut RandomStream) -> Result<Sample> {
        let p = self.dim();
        let mut z = vec![0.0; p];
        Sample::from_fn(n, p, |row| {
            self.draw_centred(s, &mut z, row);
            for (r, x) in row.iter_mut().zip(&self.xi) {
                *r += x;
            }
        })
    }
}

/// A factor `L` with `L Lᵀ = A` for a positive semidefinite `A`: the Cholesky
/// factor when it exists, otherwise `V diag(√max(λ, 0))` from the eigen
/// decomposition. The second case arises when `‖δ‖` reaches 1 in floating
/// point, i.e. for extremely large α*.
fn psd_factor(a: &SqMatrix) -> Result<SqMatrix> {
    if let Ok(l) = linalg::cholesky(a) {
        return Ok(l);
    }
    let e = linalg::sym_eigen(a)?;
    let p = a.dim();
    let scale = e.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if e.values[0] < -1e-10 * scale.max(1.0) {
        return Err(Error::NotPositiveDefinite(format!("smallest eigenvalue {:e}", e.values[0])));
    }
    let mut l = SqMatrix::zeros(p);
    for i in 0..p {
        for k in 0..p {
            l[(i, k)] = e.vectors[(i, k)] * e.values[k].max(0.0).sqrt();
        }
    }
    Ok(l)
}

pub fn sample_sn(params: &SnParams, n: usize, stream: &mut RandomStream) -> Result<Sample> {
    SnSampler::new(params)?.sample(n, stream)
}

/// Largest ‖t‖ at which the SN characteristic function is evaluated.
pub const CF_SN_MAX_NORM: f64 = 6.0;

/// `e^{itᵀξ − tᵀΩt/2} (1 + iτ(δᵀωt))`.
pub fn cf_sn(params: &SnParams, t: &[f64]) -> Result<Complex64> {
    params.validate()?;
    check_len("t", t, params.dim())?;
    if linalg::norm(t) > CF_SN_MAX_NORM {
        return Err(Error::InvalidParameter(format!(
            "skew-normal CF evaluated only for ‖t‖ ≤ {CF_SN_MAX_NORM}"
        )));
    }
    let delta = params.delta();
    let w = params.omega.scales();
    let u: f64 = delta.iter().zip(&w).zip(t).map(|((d, w), t)| d * w * t).sum();
    let phase = linalg::dot(t, &params.xi);
    let damp = (-0.5 * params.omega.quad_form(t)).exp();
    Ok(Complex64::from_polar(damp, phase) * Complex64::new(1.0, special::tau(u)))
}

/// Precomputed pieces of the SN log-density.
pub struct SnDensity {
    xi: Vec<f64>,
    chol: Cholesky,
    /// αᵀω⁻¹, the linear form inside Φ.
    eta: Vec<f64>,
    norm_const: f64,
}

impl SnDensity {
    pub fn new(params: &SnParams) -> Result<Self> {
        params.validate()?;
        let chol = Cholesky::new(&params.omega)?;
        let p = params.dim() as f64;
        let eta = params
            .alpha
            .iter()
            .zip(params.omega.scales())
            .map(|(a, w)| a / w)
            .collect();
        Ok(Self {
            xi: params.xi.clone(),
            norm_const: LN_2 - p * LN_SQRT_2PI - 0.5 * chol.log_det(),
            chol,
            eta,
        })
    }

    pub fn logpdf(&self, x: &[f64]) -> f64 {
        let d: Vec<f64> = x.iter().zip(&self.xi).map(|(a, b)| a - b).collect();
        self.norm_const - 0.5 * self.chol.inv_quad_form(&d) + special::log_norm_cdf(linalg::dot(&self.eta, &d))
    }

    pub fn loglik(&self, s: &Sample) -> f64 {
        s.rows().map(|r| self.logpdf(r)).sum()
    }
}

/// `ln f(x)` for SN_p(ξ, Ω, α): `ln 2 + ln φ_p(x; ξ, Ω) + ln Φ(αᵀω⁻¹(x − ξ))`.
pub fn sn_logpdf(params: &SnParams, x: &[f64]) -> Result<f64> {
    check_len("x", x, params.dim())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("density argument".into()));
    }
    Ok(SnDensity::new(params)?.logpdf(x))
}

/// H = Ω^{-1/2} Q with Q completing the direction Ω^{-1/2}ωδ.
pub fn canonical_sn(params: &SnParams) -> Result<CanonicalInfo> {
    params.validate()?;
    let p = params.dim();
    let root_inv = linalg::spd_sqrt_inv(&params.omega)?;
    let w = params.omega.scales();
    let wd: Vec<f64> = params.delta().iter().zip(&w).map(|(d, w)| d * w).collect();
    let dir = root_inv.matvec(&wd);
    let q = if linalg::norm(&dir) > 0.0 {
        linalg::orthonormal_basis_from(&dir)?
    } else {
        SqMatrix::identity(p)
    };
    Ok(CanonicalInfo {
        h: root_inv.matmul(&q),
        alpha_star: params.alpha_star(),
        nu: None,
    })
}

/// Mean of SN_p(ξ, Ω, α): ξ + √(2/π) ωδ.
pub fn sn_mean(params: &SnParams) -> Vec<f64> {
    let c = (2.0 / PI).sqrt();
    params
        .xi
        .iter()
        .zip(params.omega.scales())
        .zip(params.delta())
        .map(|((x, w), d)| x + c * w * d)
        .collect()
}
