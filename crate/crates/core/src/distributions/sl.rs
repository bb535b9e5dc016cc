use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::{check_len, CanonicalInfo};
use crate::error::{Error, Result};
use crate::linalg::{self, Cholesky, SpdMatrix, SqMatrix};
use crate::rng::{Gamma, RandomStream};
use crate::sample::Sample;

/// Skew-Laplace SL_p(ξ, Ω, α), the law with characteristic function
/// `e^{itᵀξ} (1 + tᵀΩt − 2i tᵀα)^{−(p+1)/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlParams {
    pub xi: Vec<f64>,
    pub omega: SpdMatrix,
    pub alpha: Vec<f64>,
}

impl SlParams {
    pub fn new(xi: Vec<f64>, omega: SpdMatrix, alpha: Vec<f64>) -> Result<Self> {
        let s = Self { xi, omega, alpha };
        s.validate()?;
        Ok(s)
    }

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
}

/// Variance–mean mixture `X = ξ + Wα + √W L z`, `W ~ Gamma((p+1)/2, scale 2)`.
pub fn sample_sl(params: &SlParams, n: usize, stream: &mut RandomStream) -> Result<Sample> {
    params.validate()?;
    let p = params.dim();
    let l = linalg::cholesky(&params.omega)?;
    let mix = Gamma::new(0.5 * (p as f64 + 1.0), 2.0)?;
    let mut z = vec![0.0; p];
    Sample::from_fn(n, p, |row| {
        let w = mix.sample(stream);
        for v in z.iter_mut() {
            *v = stream.std_normal();
        }
        let sw = w.sqrt();
        for i in 0..p {
            let li = l.row(i);
            let mut v = 0.0;
            for k in 0..=i {
                v += li[k] * z[k];
            }
            row[i] = params.xi[i] + w * params.alpha[i] + sw * v;
        }
    })
}

pub fn cf_sl(params: &SlParams, t: &[f64]) -> Result<Complex64> {
    params.validate()?;
    check_len("t", t, params.dim())?;
    let p = params.dim() as f64;
    let base = Complex64::new(1.0 + params.omega.quad_form(t), -2.0 * linalg::dot(t, &params.alpha));
    let phase = Complex64::from_polar(1.0, linalg::dot(t, &params.xi));
    Ok(phase / base.powf(0.5 * (p + 1.0)))
}

/// Precomputed pieces of the SL log-density
/// `−½ln|Ω| − p ln 2 − ((p−1)/2) ln π − lnΓ((p+1)/2) − ½ln b + αᵀΩ⁻¹d − √(Qb)`
/// with `d = x − ξ`, `Q = dᵀΩ⁻¹d`, `b = 1 + αᵀΩ⁻¹α`.
pub struct SlDensity {
    xi: Vec<f64>,
    chol: Cholesky,
    /// Ω⁻¹α
    oa: Vec<f64>,
    b: f64,
    norm_const: f64,
}

impl SlDensity {
    pub fn new(params: &SlParams) -> Result<Self> {
        params.validate()?;
        let chol = Cholesky::new(&params.omega)?;
        let p = params.dim() as f64;
        let oa = chol.solve(&params.alpha);
        let b = 1.0 + linalg::dot(&params.alpha, &oa);
        let norm_const = -0.5 * chol.log_det()
            - p * std::f64::consts::LN_2
            - 0.5 * (p - 1.0) * std::f64::consts::PI.ln()
            - ln_gamma(0.5 * (p + 1.0))
            - 0.5 * b.ln();
        Ok(Self {
            xi: params.xi.clone(),
            chol,
            oa,
            b,
            norm_const,
        })
    }

    /// `(Q, αᵀΩ⁻¹d)` for one observation.
    fn pieces(&self, x: &[f64]) -> (f64, f64) {
        let d: Vec<f64> = x.iter().zip(&self.xi).map(|(a, b)| a - b).collect();
        (self.chol.inv_quad_form(&d), linalg::dot(&self.oa, &d))
    }

    pub fn logpdf(&self, x: &[f64]) -> f64 {
        let (q, lin) = self.pieces(x);
        self.norm_const + lin - (q * self.b).sqrt()
    }

    pub fn loglik(&self, s: &Sample) -> f64 {
        s.rows().map(|r| self.logpdf(r)).sum()
    }

    /// Posterior moments `(E[W | x], E[1/W | x])` of the mixing variable.
    /// The posterior is generalized inverse Gaussian with index ½, for which
    /// the Bessel ratios are elementary.
    pub fn posterior_moments(&self, x: &[f64]) -> (f64, f64) {
        self.posterior_moments_floored(x, 1e-300)
    }

    /// As [`Self::posterior_moments`] with `Q` floored at `q_min`, which caps
    /// the weight of an observation sitting on ξ.
    pub(crate) fn posterior_moments_floored(&self, x: &[f64], q_min: f64) -> (f64, f64) {
        let (q, _) = self.pieces(x);
        let q = q.max(q_min);
        let r = (q / self.b).sqrt();
        (r + 1.0 / self.b, 1.0 / r)
    }
}

pub fn sl_logpdf(params: &SlParams, x: &[f64]) -> Result<f64> {
    check_len("x", x, params.dim())?;
    Ok(SlDensity::new(params)?.logpdf(x))
}

pub fn sl_posterior_moments(params: &SlParams, x: &[f64]) -> Result<(f64, f64)> {
    check_len("x", x, params.dim())?;
    Ok(SlDensity::new(params)?.posterior_moments(x))
}

/// H = Ω^{−1/2} Q with Q completing the direction Ω^{−1/2}α; α* = ‖Ω^{−1/2}α‖.
/// For α ≈ 0 the symmetric limit H = Ω^{−1/2}, α* = 0 is returned.
pub fn canonical_sl(params: &SlParams) -> Result<CanonicalInfo> {
    params.validate()?;
    let root_inv = linalg::spd_sqrt_inv(&params.omega)?;
    if linalg::norm(&params.alpha) < 1e-10 {
        return Ok(CanonicalInfo {
            h: root_inv,
            alpha_star: 0.0,
            nu: None,
        });
    }
    let v = root_inv.matvec(&params.alpha);
    let q: SqMatrix = linalg::orthonormal_basis_from(&v).map_err(|_| {
        Error::InvalidParameter("skewness direction vanished after whitening".into())
    })?;
    Ok(CanonicalInfo {
        h: root_inv.matmul(&q),
        alpha_star: linalg::norm(&v),
        nu: None,
    })
}
