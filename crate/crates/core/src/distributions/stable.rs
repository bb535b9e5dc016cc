use std::f64::consts::{FRAC_2_PI, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::check_len;
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{RandomStream, Stable};
use crate::sample::Sample;

/// One point mass `γ·1_{s}` of a discrete spectral measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub s: Vec<f64>,
    pub gamma: f64,
}

/// Multivariate stable law AS_p(ξ, Γ, α) with discrete spectral measure
/// `Γ = Σ γ_i 1_{s_i}`, in the S⁰ parameterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsParams {
    pub xi: Vec<f64>,
    pub atoms: Vec<Atom>,
    pub alpha: f64,
}

impl AsParams {
    pub fn new(xi: Vec<f64>, atoms: Vec<Atom>, alpha: f64) -> Result<Self> {
        let s = Self { xi, atoms, alpha };
        s.validate()?;
        Ok(s)
    }

    /// Planar measure with `q` equal masses `1/q` at `(cos 2πk/q, sin 2πk/q)`,
    /// `k = 1..q`.
    pub fn uniform_circle(q: usize, alpha: f64, xi: Vec<f64>) -> Result<Self> {
        let atoms = (1..=q)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / q as f64;
                Atom {
                    s: vec![a.cos(), a.sin()],
                    gamma: 1.0 / q as f64,
                }
            })
            .collect();
        Self::new(xi, atoms, alpha)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.xi.len();
        if p == 0 {
            return Err(Error::InvalidParameter("empty location vector".into()));
        }
        check_len("xi", &self.xi, p)?;
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(Error::InvalidParameter(format!(
                "stability index must lie in (0, 2], got {}",
                self.alpha
            )));
        }
        if self.atoms.is_empty() {
            return Err(Error::InvalidParameter("spectral measure has no atoms".into()));
        }
        for a in &self.atoms {
            check_len("atom", &a.s, p)?;
            if (linalg::norm(&a.s) - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("atom {:?} is not a unit vector", a.s)));
            }
            if !(a.gamma > 0.0 && a.gamma.is_finite()) {
                return Err(Error::InvalidParameter(format!("atom weight must be positive, got {}", a.gamma)));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.gamma).sum()
    }
}

/// ψ_α(u) of the S⁰ parameterization.
pub fn psi_alpha(alpha: f64, u: f64) -> Complex64 {
    if u == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let au = u.abs();
    let sg = u.signum();
    if alpha == 1.0 {
        Complex64::new(au, au * FRAC_2_PI * sg * au.ln())
    } else {
        let ua = au.powf(alpha);
        Complex64::new(ua, sg * (PI * alpha / 2.0).tan() * (au - ua))
    }
}

pub fn cf_as(params: &AsParams, t: &[f64]) -> Result<Complex64> {
    params.validate()?;
    check_len("t", t, params.dim())?;
    let mut e = Complex64::new(0.0, linalg::dot(t, &params.xi));
    for a in &params.atoms {
        e -= a.gamma * psi_alpha(params.alpha, linalg::dot(t, &a.s));
    }
    Ok(e.exp())
}

/// `X = Σ γ_i^{1/α} Z_i s_i + ξ − tan(πα/2) Σ γ_i s_i` for α ≠ 1 and
/// `X = Σ γ_i (Z_i + (2/π) ln γ_i) s_i + ξ` for α = 1, with `Z_i` totally
/// skewed unit-scale stable in the 1-parameterization.
pub fn sample_as(params: &AsParams, n: usize, stream: &mut RandomStream) -> Result<Sample> {
    params.validate()?;
    let p = params.dim();
    let alpha = params.alpha;
    let z = Stable::new(alpha, 1.0, 1.0, 0.0)?;
    let mut shift = params.xi.clone();
    let coef: Vec<(f64, f64)> = if alpha == 1.0 {
        params
            .atoms
            .iter()
            .map(|a| (a.gamma, a.gamma * FRAC_2_PI * a.gamma.ln()))
            .collect()
    } else {
        let t = (PI * alpha / 2.0).tan();
        for a in &params.atoms {
            for (v, s) in shift.iter_mut().zip(&a.s) {
                *v -= t * a.gamma * s;
            }
        }
        params.atoms.iter().map(|a| (a.gamma.powf(1.0 / alpha), 0.0)).collect()
    };
    Sample::from_fn(n, p, |row| {
        row.copy_from_slice(&shift);
        for (a, (c, off)) in params.atoms.iter().zip(&coef) {
            let w = c * z.sample(stream) + off;
            for (v, s) in row.iter_mut().zip(&a.s) {
                *v += w * s;
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::test_support::*;
    use crate::rng::SeedSpec;

    #[test]
    fn cf_plug_in() {
        let p = AsParams::new(vec![0.7, 0.0], vec![Atom { s: vec![1.0, 0.0], gamma: 1.0 }], 2.0).unwrap();
        let cf = cf_as(&p, &[1.0, 0.0]).unwrap();
        assert!((cf - Complex64::from_polar((-1.0f64).exp(), 0.7)).norm() < 1e-15);
        let g3 = AsParams::uniform_circle(3, 1.5, vec![0.0; 2]).unwrap();
        assert_eq!(cf_as(&g3, &[0.0, 0.0]).unwrap(), Complex64::new(1.0, 0.0));
        let mut s = SeedSpec::new(1).stream();
        for _ in 0..50 {
            assert!(cf_as(&g3, &s.std_normals(2)).unwrap().norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn alpha_two_is_gaussian() {
        let p = AsParams::uniform_circle(3, 2.0, vec![0.5, -0.5]).unwrap();
        let x = sample_as(&p, 100_000, &mut SeedSpec::new(2).stream()).unwrap();
        // ψ₂(u) = u², so the CF is exp(itᵀξ − Σγ(tᵀs)²)
        let gauss = |t: &[f64]| {
            let q: f64 = p.atoms.iter().map(|a| a.gamma * linalg::dot(t, &a.s).powi(2)).sum();
            Complex64::from_polar((-q).exp(), linalg::dot(t, &p.xi))
        };
        let err = max_cf_error(&x, gauss, &t_grid(2, 1.0));
        assert!(err < 0.02, "{err}");
    }

    #[test]
    fn ecf_matches_cf() {
        for alpha in [1.5, 1.0, 0.8] {
            let p = AsParams::uniform_circle(3, alpha, vec![0.2, 0.1]).unwrap();
            let x = sample_as(&p, 100_000, &mut SeedSpec::new(3).stream()).unwrap();
            let err = max_cf_error(&x, |t| cf_as(&p, t).unwrap(), &t_grid(2, 1.0));
            assert!(err < 0.02, "alpha {alpha}: {err}");
        }
        let skew = AsParams::new(
            vec![0.0, 0.0],
            vec![Atom { s: vec![1.0, 0.0], gamma: 0.3 }, Atom { s: vec![0.6, 0.8], gamma: 2.0 }],
            1.0,
        )
        .unwrap();
        let x = sample_as(&skew, 100_000, &mut SeedSpec::new(4).stream()).unwrap();
        let err = max_cf_error(&x, |t| cf_as(&skew, t).unwrap(), &t_grid(2, 1.0));
        assert!(err < 0.02, "{err}");
    }

    #[test]
    fn symmetric_measure_gives_symmetric_sample() {
        let p = AsParams::uniform_circle(4, 1.3, vec![0.0; 2]).unwrap();
        let x = sample_as(&p, 200_000, &mut SeedSpec::new(5).stream()).unwrap();
        for j in 0..2 {
            let c: Vec<f64> = x.column(j).into_iter().map(|v| v.clamp(-3.0, 3.0)).collect();
            let m1 = c.iter().sum::<f64>() / c.len() as f64;
            let m3 = c.iter().map(|v| v.powi(3)).sum::<f64>() / c.len() as f64;
            assert!(m1.abs() < 0.02 && m3.abs() < 0.1, "{m1} {m3}");
        }
    }

    #[test]
    fn weight_scaling_scales_gaussian_covariance() {
        let base = AsParams::uniform_circle(3, 2.0, vec![0.0; 2]).unwrap();
        let mut scaled = base.clone();
        for a in scaled.atoms.iter_mut() {
            a.gamma *= 3.0;
        }
        let c0 = sample_as(&base, 200_000, &mut SeedSpec::new(6).stream()).unwrap().covariance();
        let c1 = sample_as(&scaled, 200_000, &mut SeedSpec::new(7).stream()).unwrap().covariance();
        assert!(c1.sub(&c0.scale(3.0)).frobenius_norm() < 0.05 * c1.frobenius_norm());
    }

    #[test]
    fn rejects_invalid_measures() {
        assert!(AsParams::new(vec![0.0; 2], vec![], 1.5).is_err());
        assert!(AsParams::new(vec![0.0; 2], vec![Atom { s: vec![1.0, 1.0], gamma: 1.0 }], 1.5).is_err());
        assert!(AsParams::new(vec![0.0; 2], vec![Atom { s: vec![1.0, 0.0], gamma: 0.0 }], 1.5).is_err());
        assert!(AsParams::uniform_circle(3, 2.5, vec![0.0; 2]).is_err());
    }
}
