use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::sn::{canonical_sn, SnParams, SnSampler};
use super::{check_len, CanonicalInfo};
use crate::error::{Error, Result};
use crate::linalg::{self, Cholesky, SpdMatrix};
use crate::rng::{InverseGamma, RandomStream};
use crate::sample::Sample;
use crate::special;

/// Skew-t ST_p(ξ, Ω, α, ν): `Y = ξ + √η X`, `X ~ SN_p(0, Ω, α)`, `η ~ IG(ν/2, ν/2)`.
///
/// `ν = ∞` is accepted and gives the skew-normal limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StParams {
    pub xi: Vec<f64>,
    pub omega: SpdMatrix,
    pub alpha: Vec<f64>,
    pub nu: f64,
}

impl StParams {
    pub fn new(xi: Vec<f64>, omega: SpdMatrix, alpha: Vec<f64>, nu: f64) -> Result<Self> {
        let s = Self { xi, omega, alpha, nu };
        s.validate()?;
        Ok(s)
    }

    pub fn canonical(p: usize, alpha_star: f64, nu: f64) -> Self {
        let sn = SnParams::canonical(p, alpha_star);
        Self {
            xi: sn.xi,
            omega: sn.omega,
            alpha: sn.alpha,
            nu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.omega.dim();
        check_len("xi", &self.xi, p)?;
        check_len("alpha", &self.alpha, p)?;
        if !(self.nu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "degrees of freedom must be positive, got {}",
                self.nu
            )));
        }
        if self.nu.is_infinite() {
            return Err(Error::InvalidParameter(
                "infinite degrees of freedom: use the SN family for the limit".into(),
            ));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.omega.dim()
    }

    /// The skew-normal component, SN_p(ξ, Ω, α).
    pub fn sn(&self) -> SnParams {
        SnParams {
            xi: self.xi.clone(),
            omega: self.omega.clone(),
            alpha: self.alpha.clone(),
        }
    }
}

pub fn sample_st(params: &StParams, n: usize, stream: &mut RandomStream) -> Result<Sample> {
    params.validate()?;
    let sn = SnSampler::new(&params.sn())?;
    let p = params.dim();
    if params.nu.is_infinite() {
        return sn.sample(n, stream);
    }
    let ig = InverseGamma::new(0.5 * params.nu, 0.5 * params.nu)?;
    let mut z = vec![0.0; p];
    Sample::from_fn(n, p, |row| {
        sn.draw_centred(stream, &mut z, row);
        let r = ig.sample(stream).sqrt();
        for (v, x) in row.iter_mut().zip(&params.xi) {
            *v = x + r * *v;
        }
    })
}

/// Precomputed pieces of the ST log-density
/// `2 t_p(y; ξ, Ω, ν) T₁(αᵀω⁻¹(y − ξ) √((ν + p)/(Q + ν)); ν + p)`.
pub struct StDensity {
    xi: Vec<f64>,
    chol: Cholesky,
    eta: Vec<f64>,
    nu: f64,
    p: f64,
    norm_const: f64,
    sn: Option<super::sn::SnDensity>,
}

impl StDensity {
    pub fn new(params: &StParams) -> Result<Self> {
        params.validate()?;
        let chol = Cholesky::new(&params.omega)?;
        let p = params.dim() as f64;
        let nu = params.nu;
        let eta = params
            .alpha
            .iter()
            .zip(params.omega.scales())
            .map(|(a, w)| a / w)
            .collect();
        let sn = if nu.is_infinite() {
            Some(super::sn::SnDensity::new(&params.sn())?)
        } else {
            None
        };
        let norm_const = if nu.is_finite() {
            std::f64::consts::LN_2 + ln_gamma(0.5 * (nu + p))
                - ln_gamma(0.5 * nu)
                - 0.5 * p * (nu * std::f64::consts::PI).ln()
                - 0.5 * chol.log_det()
        } else {
            0.0
        };
        Ok(Self {
            xi: params.xi.clone(),
            chol,
            eta,
            nu,
            p,
            norm_const,
            sn,
        })
    }

    pub fn logpdf(&self, y: &[f64]) -> f64 {
        if let Some(sn) = &self.sn {
            return sn.logpdf(y);
        }
        let d: Vec<f64> = y.iter().zip(&self.xi).map(|(a, b)| a - b).collect();
        let q = self.chol.inv_quad_form(&d);
        let arg = linalg::dot(&self.eta, &d) * ((self.nu + self.p) / (q + self.nu)).sqrt();
        self.norm_const - 0.5 * (self.nu + self.p) * (q / self.nu).ln_1p()
            + special::log_t_cdf(arg, self.nu + self.p)
    }

    pub fn loglik(&self, s: &Sample) -> f64 {
        s.rows().map(|r| self.logpdf(r)).sum()
    }
}

pub fn st_logpdf(params: &StParams, y: &[f64]) -> Result<f64> {
    check_len("y", y, params.dim())?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("density argument".into()));
    }
    Ok(StDensity::new(params)?.logpdf(y))
}

/// Same H as the skew-normal component; ν is carried through unchanged.
pub fn canonical_st(params: &StParams) -> Result<CanonicalInfo> {
    params.validate()?;
    let mut c = canonical_sn(&params.sn())?;
    c.nu = Some(params.nu);
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::test_support::*;
    use crate::linalg::SqMatrix;
    use crate::rng::SeedSpec;

    fn skew_kurt(x: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
        let m3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
        let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
        (m3 / m2.powf(1.5), m4 / (m2 * m2))
    }

    #[test]
    fn symmetric_case_has_t_marginals() {
        let params = StParams::canonical(2, 0.0, 5.0);
        let x = sample_st(&params, 100_000, &mut SeedSpec::new(1).stream()).unwrap();
        let mut col = x.column(0);
        col.sort_by(f64::total_cmp);
        let n = col.len() as f64;
        let mut ks = 0.0f64;
        for (i, v) in col.iter().enumerate() {
            let f = special::log_t_cdf(*v, 5.0).exp();
            ks = ks.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
        }
        assert!(ks <= 0.01, "KS distance {ks}");
    }

    #[test]
    fn heavy_tails_raise_kurtosis() {
        let x = sample_st(&StParams::canonical(2, 3.0, 5.0), 200_000, &mut SeedSpec::new(2).stream()).unwrap();
        let z = super::super::sn::sample_sn(&SnParams::canonical(2, 3.0), 200_000, &mut SeedSpec::new(2).stream()).unwrap();
        let (_, kx) = skew_kurt(&x.column(0));
        let (_, kz) = skew_kurt(&z.column(0));
        assert!(kx > kz && kx > 3.0);
    }

    #[test]
    fn large_nu_matches_sn() {
        let st = sample_st(&StParams::canonical(2, 3.0, 1e6), 200_000, &mut SeedSpec::new(3).stream()).unwrap();
        let sn = SnParams::canonical(2, 3.0);
        let err = max_cf_error(&st, |t| super::super::sn::cf_sn(&sn, t).unwrap(), &t_grid(2, 2.0));
        assert!(err < 5.0 / (200_000f64).sqrt(), "{err}");
    }

    #[test]
    fn density_normalizes_in_1d() {
        for nu in [1.0, 3.5, 30.0] {
            let params = StParams::new(vec![0.3], spd(&[[1.7]]), vec![2.0], nu).unwrap();
            let d = StDensity::new(&params).unwrap();
            let h = std::f64::consts::FRAC_PI_2;
            let (v, _) = crate::quad::integrate(
                |th: f64| {
                    let c = th.cos();
                    if c <= 0.0 { 0.0 } else { d.logpdf(&[th.tan()]).exp() / (c * c) }
                },
                -h,
                h,
                1e-13,
                1e-12,
            );
            assert!((v - 1.0).abs() < 1e-8, "nu {nu}: {v}");
        }
    }

    #[test]
    fn density_tends_to_sn() {
        let st = StParams::new(vec![0.1, 0.2], spd(&[[1.0, 0.2], [0.2, 2.0]]), vec![1.0, -2.0], 1e8).unwrap();
        let a = StDensity::new(&st).unwrap().logpdf(&[0.5, -0.4]);
        let b = super::super::sn::sn_logpdf(&st.sn(), &[0.5, -0.4]).unwrap();
        assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn canonical_direction_carries_skewness() {
        for seed in 0..3 {
            let sn = random_sn(2, 40 + seed);
            let params = StParams::new(sn.xi.clone(), sn.omega.clone(), sn.alpha.clone(), 5.0).unwrap();
            let c = canonical_st(&params).unwrap();
            assert_eq!(c.nu, Some(5.0));
            let hoh = c.h.transpose().matmul(&params.omega).matmul(&c.h);
            assert!(hoh.sub(&SqMatrix::identity(2)).frobenius_norm() < 1e-8);
            let x = sample_st(&params, 50_000, &mut SeedSpec::new(seed).stream()).unwrap();
            let y = x.affine(&c.h.transpose(), &params.xi).unwrap();
            let (s0, _) = skew_kurt(&y.column(0));
            assert!(s0 > 0.0 && c.alpha_star > 0.0);
        }
        let c = canonical_st(&StParams::canonical(3, 1.5, 4.0)).unwrap();
        assert_eq!(c.h, SqMatrix::identity(3));
    }
}
