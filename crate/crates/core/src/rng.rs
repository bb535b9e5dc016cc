//! Reproducible random streams and the base univariate samplers.
//!
//! A [`SeedSpec`] is a master seed plus a path of indices (study, cell,
//! replication, stage, ...). The path is hashed into a ChaCha12 key, so any
//! replication can be addressed directly without drawing through the ones
//! before it, and results do not depend on which worker ran what.

use std::f64::consts::{FRAC_PI_2, PI};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of the generator and seed derivation, recorded in reports.
pub const GENERATOR_ID: &str = "chacha12 (rand_chacha 0.3) keyed by splitmix64(master_seed, path)";

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Master seed plus a hierarchical path addressing one random stream.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    #[serde(default)]
    pub path: Vec<u64>,
}

impl SeedSpec {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            path: Vec::new(),
        }
    }

    /// The spec one level further down the path.
    pub fn child(&self, index: u64) -> Self {
        let mut path = self.path.clone();
        path.push(index);
        Self {
            master_seed: self.master_seed,
            path,
        }
    }

    pub fn children(&self, indices: &[u64]) -> Self {
        indices.iter().fold(self.clone(), |s, &i| s.child(i))
    }

    fn key(&self) -> [u8; 32] {
        let mut h = splitmix64(self.master_seed ^ 0x5EED_0F_C0FFEE);
        for (depth, &idx) in self.path.iter().enumerate() {
            // Mixing the depth in keeps [a, b] and [a ^ x, ...] style collisions apart.
            h = splitmix64(h ^ splitmix64(idx.wrapping_add((depth as u64 + 1) << 56)));
        }
        let mut key = [0u8; 32];
        let mut s = h;
        for chunk in key.chunks_exact_mut(8) {
            s = splitmix64(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        key
    }

    pub fn stream(&self) -> RandomStream {
        RandomStream {
            rng: ChaCha12Rng::from_seed(self.key()),
            spare_normal: None,
        }
    }
}

/// Deterministic random stream; single owner, movable between threads.
#[derive(Debug, Clone)]
pub struct RandomStream {
    rng: ChaCha12Rng,
    spare_normal: Option<f64>,
}

impl RandomStream {
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw on the open interval (0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw by the Marsaglia polar method.
    pub fn std_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare_normal = Some(v * f);
                return u * f;
            }
        }
    }

    pub fn std_normals(&mut self, count: usize) -> Vec<f64> {
        (0..count).map(|_| self.std_normal()).collect()
    }

    /// Unit exponential draw.
    #[inline]
    pub fn exponential(&mut self) -> f64 {
        -self.uniform().ln()
    }

    pub fn gamma(&mut self, shape: f64, scale: f64) -> Result<f64> {
        Ok(Gamma::new(shape, scale)?.sample(self))
    }

    pub fn inverse_gamma(&mut self, shape: f64, scale: f64) -> Result<f64> {
        Ok(InverseGamma::new(shape, scale)?.sample(self))
    }

    pub fn stable(&mut self, alpha: f64, beta: f64, scale: f64, location: f64) -> Result<f64> {
        Ok(Stable::new(alpha, beta, scale, location)?.sample(self))
    }
}

/// `count` i.i.d. standard normal draws.
pub fn std_normal(stream: &mut RandomStream, count: usize) -> Vec<f64> {
    stream.std_normals(count)
}

/// Gamma(shape k, scale θ), sampled by Marsaglia–Tsang (with the
/// `U^{1/k}` boost when k < 1).
#[derive(Debug, Clone, Copy)]
pub struct Gamma {
    shape: f64,
    scale: f64,
}

impl Gamma {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) || !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma needs shape > 0 and scale > 0, got ({shape}, {scale})"
            )));
        }
        Ok(Self { shape, scale })
    }

    pub fn mean(&self) -> f64 {
        self.shape * self.scale
    }

    pub fn sample(&self, s: &mut RandomStream) -> f64 {
        if self.shape < 1.0 {
            let boosted = marsaglia_tsang(self.shape + 1.0, s);
            return boosted * s.uniform().powf(1.0 / self.shape) * self.scale;
        }
        marsaglia_tsang(self.shape, s) * self.scale
    }
}

fn marsaglia_tsang(shape: f64, s: &mut RandomStream) -> f64 {
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = s.std_normal();
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = s.uniform();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Inverse-gamma with shape `a` and scale `b`: the reciprocal of a
/// Gamma(a, 1/b) draw.
#[derive(Debug, Clone, Copy)]
pub struct InverseGamma {
    gamma: Gamma,
    shape: f64,
    scale: f64,
}

impl InverseGamma {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "inverse gamma needs scale > 0, got {scale}"
            )));
        }
        Ok(Self {
            gamma: Gamma::new(shape, 1.0 / scale)?,
            shape,
            scale,
        })
    }

    /// `b/(a-1)`, or `None` when the mean does not exist (a ≤ 1, heavy tail).
    pub fn mean(&self) -> Option<f64> {
        (self.shape > 1.0).then(|| self.scale / (self.shape - 1.0))
    }

    pub fn is_heavy_tailed(&self) -> bool {
        self.mean().is_none()
    }

    pub fn sample(&self, s: &mut RandomStream) -> f64 {
        1.0 / self.gamma.sample(s)
    }
}

/// Univariate stable law in the 1-parameterization, with characteristic
/// function `exp(-σ^α|t|^α (1 - iβ sign(t) tan(πα/2)) + iμt)` for α ≠ 1 and
/// `exp(-σ|t| (1 + iβ (2/π) sign(t) ln|t|) + iμt)` for α = 1.
///
/// Sampling is Chambers–Mallows–Stuck. At α = 2 the law is N(μ, 2σ²).
#[derive(Debug, Clone, Copy)]
pub struct Stable {
    alpha: f64,
    beta: f64,
    scale: f64,
    location: f64,
}

impl Stable {
    pub fn new(alpha: f64, beta: f64, scale: f64, location: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::InvalidParameter(format!(
                "stability index must lie in (0, 2], got {alpha}"
            )));
        }
        if !(-1.0..=1.0).contains(&beta) {
            return Err(Error::InvalidParameter(format!(
                "skewness must lie in [-1, 1], got {beta}"
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) || !location.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "stable scale must be > 0 and location finite, got ({scale}, {location})"
            )));
        }
        Ok(Self {
            alpha,
            beta,
            scale,
            location,
        })
    }

    pub fn sample(&self, s: &mut RandomStream) -> f64 {
        let z = standard_stable(self.alpha, self.beta, s);
        if self.alpha == 1.0 {
            self.scale * z + FRAC_2_PI * self.beta * self.scale * self.scale.ln() + self.location
        } else {
            self.scale * z + self.location
        }
    }
}

const FRAC_2_PI: f64 = 2.0 / PI;

/// S_α(1, β, 0) draw.
fn standard_stable(alpha: f64, beta: f64, s: &mut RandomStream) -> f64 {
    let v = PI * (s.uniform() - 0.5);
    let w = s.exponential();
    if alpha == 2.0 {
        // sin(2v)/sqrt(cos v) * (cos(v)/w)^{-1/2} = 2 sqrt(w) sin v, i.e. N(0, 2)
        return 2.0 * w.sqrt() * v.sin();
    }
    if alpha == 1.0 {
        let a = FRAC_PI_2 + beta * v;
        return FRAC_2_PI * (a * v.tan() - beta * ((FRAC_PI_2 * w * v.cos()) / a).ln());
    }
    let t = beta * (PI * alpha / 2.0).tan();
    let b = t.atan() / alpha;
    let sfac = (1.0 + t * t).powf(1.0 / (2.0 * alpha));
    let av = alpha * (v + b);
    sfac * av.sin() / v.cos().powf(1.0 / alpha) * ((v - av).cos() / w).powf((1.0 - alpha) / alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn normal_moments() {
        let mut s = SeedSpec::new(1).stream();
        let xs = std_normal(&mut s, 1_000_000);
        let (m, v) = mean_var(&xs);
        assert!(m.abs() < 5e-3, "mean {m}");
        assert!((v - 1.0).abs() < 1e-2, "var {v}");
    }

    #[test]
    fn streams_are_deterministic() {
        let spec = SeedSpec::new(42).children(&[3, 7, 1]);
        let a = spec.stream().std_normals(100);
        let b = spec.stream().std_normals(100);
        assert_eq!(a, b);
        let c = SeedSpec::new(42).children(&[3, 7, 2]).stream().std_normals(100);
        assert_ne!(a, c);
    }

    #[test]
    fn sibling_streams_are_uncorrelated() {
        let base = SeedSpec::new(9);
        let a = base.child(0).stream().std_normals(100_000);
        let b = base.child(1).stream().std_normals(100_000);
        let r = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / 100_000.0;
        assert!(r.abs() <= 5e-3, "correlation {r}");
    }

    #[test]
    fn path_collisions_are_avoided() {
        let a = SeedSpec::new(1).children(&[0, 1]).stream().next_u64();
        let b = SeedSpec::new(1).children(&[1, 0]).stream().next_u64();
        let c = SeedSpec::new(1).children(&[0, 1, 0]).stream().next_u64();
        assert!(a != b && a != c && b != c);
    }

    #[test]
    fn gamma_means() {
        let mut s = SeedSpec::new(2).stream();
        let g = Gamma::new(1.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..1_000_000).map(|_| g.sample(&mut s)).collect();
        assert!((mean_var(&xs).0 - 1.0).abs() < 5e-3);
        let g = Gamma::new(1.5, 2.0).unwrap();
        let xs: Vec<f64> = (0..1_000_000).map(|_| g.sample(&mut s)).collect();
        assert!((mean_var(&xs).0 - 3.0).abs() < 2e-2);
        let g = Gamma::new(0.4, 1.0).unwrap();
        let xs: Vec<f64> = (0..1_000_000).map(|_| g.sample(&mut s)).collect();
        assert!((mean_var(&xs).0 - 0.4).abs() < 5e-3);
        assert!(Gamma::new(2.0, 0.0).is_err());
        assert!(s.gamma(-1.0, 1.0).is_err());
    }

    #[test]
    fn inverse_gamma_mean_and_flag() {
        let ig = InverseGamma::new(2.5, 2.5).unwrap();
        assert_eq!(ig.mean(), Some(5.0 / 3.0));
        let mut s = SeedSpec::new(3).stream();
        let xs: Vec<f64> = (0..1_000_000).map(|_| ig.sample(&mut s)).collect();
        assert!((mean_var(&xs).0 - 5.0 / 3.0).abs() < 2e-2);

        let heavy = InverseGamma::new(1.0, 1.0).unwrap();
        assert!(heavy.is_heavy_tailed());
        assert!(heavy.sample(&mut s) > 0.0);

        let a = InverseGamma::new(3.0, 1.0).unwrap().sample(&mut SeedSpec::new(5).stream());
        let b = InverseGamma::new(3.0, 1.0).unwrap().sample(&mut SeedSpec::new(5).stream());
        assert_eq!(a, b);
        assert!(InverseGamma::new(0.0, 1.0).is_err());
    }

    #[test]
    fn stable_gaussian_limit() {
        let st = Stable::new(2.0, 0.0, 1.0, 0.0).unwrap();
        let mut s = SeedSpec::new(4).stream();
        let xs: Vec<f64> = (0..1_000_000).map(|_| st.sample(&mut s)).collect();
        let (m, v) = mean_var(&xs);
        assert!(m.abs() < 1e-2);
        assert!((v - 2.0).abs() < 3e-2, "var {v}");
    }

    fn ecf(xs: &[f64], t: f64) -> (f64, f64) {
        let n = xs.len() as f64;
        let re = xs.iter().map(|x| (t * x).cos()).sum::<f64>() / n;
        let im = xs.iter().map(|x| (t * x).sin()).sum::<f64>() / n;
        (re, im)
    }

    #[test]
    fn stable_symmetric_cf() {
        let st = Stable::new(1.5, 0.0, 1.0, 0.0).unwrap();
        let mut s = SeedSpec::new(5).stream();
        let xs: Vec<f64> = (0..1_000_000).map(|_| st.sample(&mut s)).collect();
        let (re, im) = ecf(&xs, 1.0);
        assert!(((re * re + im * im).sqrt() - (-1.0f64).exp()).abs() < 5e-3);

        // (X1 + X2)/2^{1/α} has the same law as X1
        let sums: Vec<f64> = xs
            .chunks_exact(2)
            .map(|c| (c[0] + c[1]) / 2f64.powf(1.0 / 1.5))
            .collect();
        let single = &xs[..sums.len()];
        for t in [0.5, 1.0] {
            let (a, b) = ecf(&sums, t);
            let (c, d) = ecf(single, t);
            assert!(((a - c).powi(2) + (b - d).powi(2)).sqrt() < 1e-2);
        }
    }

    #[test]
    fn stable_skewed_cf_matches_parameterization() {
        // α = 1.5, β = 1: imaginary part of log CF is +|t|^α tan(πα/2) sign(t)
        for (alpha, beta) in [(1.5, 1.0), (0.8, -0.5), (1.0, 1.0)] {
            let st = Stable::new(alpha, beta, 1.0, 0.0).unwrap();
            let mut s = SeedSpec::new(6).stream();
            let xs: Vec<f64> = (0..400_000).map(|_| st.sample(&mut s)).collect();
            for t in [0.3f64, 0.7] {
                let (re, im) = ecf(&xs, t);
                let (er, ei) = if alpha == 1.0 {
                    let arg = -beta * FRAC_2_PI * t * t.ln();
                    let m = (-t).exp();
                    (m * arg.cos(), m * arg.sin())
                } else {
                    let m = (-t.powf(alpha)).exp();
                    let arg = t.powf(alpha) * beta * (PI * alpha / 2.0).tan();
                    (m * arg.cos(), m * arg.sin())
                };
                assert!((re - er).abs() < 6e-3 && (im - ei).abs() < 6e-3, "{alpha} {beta} {t}");
            }
        }
    }

    #[test]
    fn stable_rejects_bad_params() {
        assert!(Stable::new(2.1, 0.0, 1.0, 0.0).is_err());
        assert!(Stable::new(1.5, 1.1, 1.0, 0.0).is_err());
        assert!(Stable::new(1.5, 0.0, 0.0, 0.0).is_err());
    }
}
