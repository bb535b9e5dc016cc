use serde::{Deserialize, Serialize};

use super::check_len;
use crate::error::{Error, Result};
use crate::linalg::SpdMatrix;
use crate::optim::newton_increasing;
use crate::rng::RandomStream;
use crate::sample::Sample;

/// Below this |g| the g = 0 branch of τ is used.
const G_ZERO: f64 = 1e-8;

/// Tukey g-and-h GH_p(ξ, Ω, g, h): `Y = Ω τ_{g,h}(Z) + ξ`, `Z ~ N_p(0, I)`,
/// τ applied componentwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhParams {
    pub xi: Vec<f64>,
    pub omega: SpdMatrix,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

impl GhParams {
    pub fn new(xi: Vec<f64>, omega: SpdMatrix, g: Vec<f64>, h: Vec<f64>) -> Result<Self> {
        let s = Self { xi, omega, g, h };
        s.validate()?;
        Ok(s)
    }

    /// GH_p(0, I, g·1, h·1).
    pub fn standard(p: usize, g: f64, h: f64) -> Self {
        Self {
            xi: vec![0.0; p],
            omega: SpdMatrix::identity(p),
            g: vec![g; p],
            h: vec![h; p],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.omega.dim();
        check_len("xi", &self.xi, p)?;
        check_len("g", &self.g, p)?;
        check_len("h", &self.h, p)?;
        if let Some(h) = self.h.iter().find(|h| **h < 0.0) {
            return Err(Error::InvalidParameter(format!("h must be nonnegative, got {h}")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.omega.dim()
    }
}

/// `(e^{gz} − 1)/g · e^{hz²/2}`, or `z e^{hz²/2}` when g = 0.
#[inline]
pub fn tau_gh(g: f64, h: f64, z: f64) -> f64 {
    let core = if g.abs() < G_ZERO { z } else { (g * z).exp_m1() / g };
    if h == 0.0 {
        core
    } else {
        core * (0.5 * h * z * z).exp()
    }
}

#[inline]
pub fn tau_gh_prime(g: f64, h: f64, z: f64) -> f64 {
    let e = (0.5 * h * z * z).exp();
    if g.abs() < G_ZERO {
        e * (1.0 + h * z * z)
    } else {
        e * ((g * z).exp() + (g * z).exp_m1() / g * h * z)
    }
}

/// Starting point for the inverse: exact when h = 0, the g = 0 inverse of
/// the skew part otherwise.
fn inverse_guess(g: f64, h: f64, y: f64) -> f64 {
    if g.abs() >= G_ZERO {
        let a = 1.0 + g * y;
        if a > 0.0 {
            let z = a.ln() / g;
            if h == 0.0 {
                return z;
            }
            return z.signum() * (z.abs().min(8.0));
        }
        return if y < 0.0 { -8.0 } else { 8.0 };
    }
    y.clamp(-8.0, 8.0)
}

pub fn tau_gh_inv(g: f64, h: f64, y: f64) -> Result<f64> {
    tau_gh_inv_from(g, h, y, inverse_guess(g, h, y))
}

/// Inverse of τ starting the safeguarded Newton iteration at `guess`.
pub fn tau_gh_inv_from(g: f64, h: f64, y: f64, guess: f64) -> Result<f64> {
    if !y.is_finite() || h < 0.0 {
        return Err(Error::InvalidParameter(format!("cannot invert τ at y = {y}, h = {h}")));
    }
    if h == 0.0 {
        if g.abs() < G_ZERO {
            return Ok(y);
        }
        if 1.0 + g * y <= 0.0 {
            return Err(Error::BracketFailure(0));
        }
        return Ok((g * y).ln_1p() / g);
    }
    newton_increasing(|z| tau_gh(g, h, z), |z| tau_gh_prime(g, h, z), y, guess, 1e-12)
}

pub fn sample_gh(params: &GhParams, n: usize, stream: &mut RandomStream) -> Result<Sample> {
    params.validate()?;
    let p = params.dim();
    let mut t = vec![0.0; p];
    Sample::from_fn(n, p, |row| {
        for j in 0..p {
            t[j] = tau_gh(params.g[j], params.h[j], stream.std_normal());
        }
        for i in 0..p {
            let oi = params.omega.row(i);
            row[i] = params.xi[i] + oi.iter().zip(&t).map(|(a, b)| a * b).sum::<f64>();
        }
    })
}
