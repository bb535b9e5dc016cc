//! Goodness-of-fit procedures: standardization to canonical form, the
//! simple-null Monte Carlo test, the composite parametric bootstrap and the
//! warp-speed Monte Carlo study.

mod procedures;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use procedures::{
    composite_test, nested_study, simple_null_critical, simple_null_power, simple_null_study, simple_test,
    warp_speed_study,
};

use crate::distributions::{
    canonical_sl, canonical_sn, canonical_st, AsParams, Atom, Family, FamilySpec, GhParams, SlParams, SnParams,
    StParams,
};
use crate::error::{Error, Result};
use crate::estimation::{self, FitResult};
use crate::kernels::KernelSpec;
use crate::linalg::{Cholesky, SpdMatrix};
use crate::rng::GENERATOR_ID;
use crate::VERSION;
use crate::sample::Sample;
use crate::statistic::StatValue;

/// Shape parameters λ that survive standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Shape {
    Sn {
        alpha_star: f64,
    },
    St {
        alpha_star: f64,
        nu: f64,
    },
    Sl {
        alpha_star: f64,
    },
    Gh {
        g: Vec<f64>,
        h: Vec<f64>,
    },
    As {
        atoms: Vec<Atom>,
        alpha: f64,
    },
}

impl Shape {
    pub fn family(&self) -> Family {
        match self {
            Shape::Sn { .. } => Family::Sn,
            Shape::St { .. } => Family::St,
            Shape::Sl { .. } => Family::Sl,
            Shape::Gh { .. } => Family::Gh,
            Shape::As { .. } => Family::As,
        }
    }

    /// Dimension fixed by the shape itself (GH and AS), if any.
    pub fn intrinsic_dim(&self) -> Option<usize> {
        match self {
            Shape::Gh { g, .. } => Some(g.len()),
            Shape::As { atoms, .. } => atoms.first().map(|a| a.s.len()),
            _ => None,
        }
    }

    /// The null law at the standard nuisance value θ₀: canonical SN/ST/SL,
    /// GH_p(0, I, g, h), AS_p(0, Γ, α).
    pub fn null_spec(&self, p: usize) -> Result<FamilySpec> {
        if let Some(d) = self.intrinsic_dim() {
            if d != p {
                return Err(Error::DimensionMismatch { expected: p, got: d });
            }
        }
        let spec = match self {
            Shape::Sn { alpha_star } => FamilySpec::Sn(SnParams::canonical(p, *alpha_star)),
            Shape::St { alpha_star, nu } => FamilySpec::St(StParams::canonical(p, *alpha_star, *nu)),
            Shape::Sl { alpha_star } => FamilySpec::Sl(SlParams::canonical(p, *alpha_star)),
            Shape::Gh { g, h } => FamilySpec::Gh(GhParams::new(vec![0.0; p], SpdMatrix::identity(p), g.clone(), h.clone())?),
            Shape::As { atoms, alpha } => FamilySpec::As(AsParams::new(vec![0.0; p], atoms.clone(), *alpha)?),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Fit of the nuisance parameters with this shape held fixed.
    pub fn profile_fit(&self, x: &Sample) -> Result<FitResult> {
        match self {
            Shape::Sn { alpha_star } => estimation::fit_sn_profile(x, *alpha_star),
            Shape::St { alpha_star, nu } => estimation::fit_st_profile(x, *alpha_star, *nu),
            Shape::Sl { alpha_star } => estimation::fit_sl_profile(x, *alpha_star),
            Shape::Gh { g, h } => estimation::fit_gh_profile(x, g, h),
            Shape::As { atoms, alpha } => estimation::fit_as_profile(x, atoms, *alpha),
        }
    }
}

/// Maps the sample to the standard nuisance value using the fitted law and
/// returns the shape of the standardized law: `Hᵀ(x − ξ)` for SN, ST and SL,
/// `Ω⁻¹(x − ξ)` for GH and `x − ξ` for AS.
pub fn standardize(x: &Sample, fit: &FamilySpec) -> Result<(Sample, Shape)> {
    fit.validate()?;
    if x.p() != fit.dim() {
        return Err(Error::DimensionMismatch {
            expected: fit.dim(),
            got: x.p(),
        });
    }
    match fit {
        FamilySpec::Sn(s) => {
            let c = canonical_sn(s)?;
            Ok((x.affine(&c.h.transpose(), &s.xi)?, Shape::Sn { alpha_star: c.alpha_star }))
        }
        FamilySpec::St(s) => {
            let c = canonical_st(s)?;
            let shape = Shape::St {
                alpha_star: c.alpha_star,
                nu: s.nu,
            };
            Ok((x.affine(&c.h.transpose(), &s.xi)?, shape))
        }
        FamilySpec::Sl(s) => {
            let c = canonical_sl(s)?;
            Ok((x.affine(&c.h.transpose(), &s.xi)?, Shape::Sl { alpha_star: c.alpha_star }))
        }
        FamilySpec::Gh(s) => {
            let inv = Cholesky::new(&s.omega)?.inverse().symmetrized();
            let shape = Shape::Gh {
                g: s.g.clone(),
                h: s.h.clone(),
            };
            Ok((x.affine(&inv, &s.xi)?, shape))
        }
        FamilySpec::As(s) => {
            let neg: Vec<f64> = s.xi.iter().map(|v| -v).collect();
            let shape = Shape::As {
                atoms: s.atoms.clone(),
                alpha: s.alpha,
            };
            Ok((x.translate(&neg)?, shape))
        }
        FamilySpec::Sas(_) => Err(Error::Unsupported("the sinh-arcsinh family has no null procedure".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Simple,
    #[default]
    Composite,
}

/// Settings shared by every procedure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub family: Family,
    #[serde(default)]
    pub mode: Mode,
    /// Fixed shape λ₀ of the simple null.
    #[serde(default)]
    pub lambda0: Option<Shape>,
    /// Sample size n of the (simulated) data.
    pub n: usize,
    /// Size m of the null samples.
    pub m: usize,
    /// Monte Carlo replications M (also L for power runs).
    #[serde(default = "default_replications")]
    pub replications: usize,
    /// Bootstrap replications B of a single-dataset composite test.
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default)]
    pub seed: u64,
}

fn default_replications() -> usize {
    1000
}

fn default_bootstrap() -> usize {
    1000
}

fn default_delta() -> f64 {
    0.05
}

impl TestConfig {
    /// Composite configuration with m = n and the default M, B and δ.
    pub fn composite(family: Family, n: usize) -> Self {
        Self {
            family,
            mode: Mode::Composite,
            lambda0: None,
            n,
            m: n,
            replications: default_replications(),
            bootstrap: default_bootstrap(),
            delta: default_delta(),
            kernel: KernelSpec::Gaussian,
            seed: 0,
        }
    }

    /// Simple-null configuration with shape `lambda0`.
    pub fn simple(lambda0: Shape, n: usize) -> Self {
        Self {
            family: lambda0.family(),
            mode: Mode::Simple,
            lambda0: Some(lambda0),
            ..Self::composite(Family::Sn, n)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.family.is_testable() {
            return Err(Error::Unsupported(format!("no test procedure for family {}", self.family)));
        }
        if self.n == 0 || self.m == 0 || self.replications == 0 || self.bootstrap == 0 {
            return Err(Error::InvalidParameter("n, m, M and B must be positive".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        self.kernel.validate()?;
        match (&self.mode, &self.lambda0) {
            (Mode::Simple, None) => Err(Error::InvalidParameter("simple mode needs lambda0".into())),
            (Mode::Simple, Some(s)) if s.family() != self.family => Err(Error::InvalidParameter(format!(
                "lambda0 is a {} shape but the family is {}",
                s.family(),
                self.family
            ))),
            _ => Ok(()),
        }
    }

    pub(crate) fn shape0(&self) -> Result<&Shape> {
        self.lambda0
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("simple mode needs lambda0".into()))
    }
}

/// Reproducibility record attached to every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub seed: u64,
    pub generator: String,
    pub threads: usize,
    pub wall_time_s: f64,
    pub version: String,
}

impl RunInfo {
    /// Record for a run with master seed `seed` that began at `started`.
    pub fn finish(seed: u64, started: Instant) -> Self {
        Self {
            seed,
            generator: GENERATOR_ID.to_string(),
            threads: rayon::current_num_threads(),
            wall_time_s: started.elapsed().as_secs_f64(),
            version: VERSION.to_string(),
        }
    }
}

/// Result of a test on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub mode: Mode,
    pub statistic: StatValue,
    /// Bootstrap p-value (composite mode).
    pub p_value: Option<f64>,
    /// Monte Carlo critical value (simple mode).
    pub critical_value: Option<f64>,
    pub reject: bool,
    pub delta: f64,
    pub estimates: FitResult,
    pub shape: Shape,
    /// Bootstrap or Monte Carlo replications that produced a statistic.
    pub replications: usize,
    pub failures: usize,
    pub failure_log: Vec<String>,
    pub run: RunInfo,
}

/// One Monte Carlo replication of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub index: usize,
    pub statistic: f64,
    /// Warp-speed bootstrap statistic, or the p-value for nested studies.
    pub bootstrap: Option<f64>,
    pub reject: bool,
}

/// Rejection rate of one study cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: TestConfig,
    pub truth: FamilySpec,
    pub protocol: String,
    /// Absent for nested studies, which reject on p-values.
    pub critical_value: Option<f64>,
    pub rejections: usize,
    /// Replications that produced a statistic; the rate is rejections over this.
    pub effective_replications: usize,
    pub rejection_rate: f64,
    pub failures: usize,
    pub failure_log: Vec<String>,
    pub records: Vec<ReplicationRecord>,
    pub run: RunInfo,
}

/// The ⌈(1−δ)M⌉-th order statistic (1-based) of `values`.
pub fn upper_quantile(values: &[f64], delta: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = ((1.0 - delta) * v.len() as f64 - 1e-9).ceil().max(1.0) as usize;
    Ok(v[k.min(v.len()) - 1])
}

/// `(1 + #{T*_b ≥ T})/(B + 1)`.
pub fn bootstrap_p_value(t: f64, boot: &[f64]) -> f64 {
    let count = boot.iter().filter(|b| **b >= t).count();
    (1 + count) as f64 / (boot.len() + 1) as f64
}

/// Draws a null sample of size `m` at `shape` and evaluates T against the
/// standardized data `z`.
pub(crate) fn statistic_for(
    z: &Sample,
    shape: &Shape,
    m: usize,
    kernel: KernelSpec,
    stream: &mut crate::rng::RandomStream,
) -> Result<StatValue> {
    let x0 = shape.null_spec(z.p())?.sample(m, stream)?;
    crate::statistic::t_stat(z, &x0, kernel)
}
