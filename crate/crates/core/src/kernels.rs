//! Kernels Ψ(ξ) of the weighted L2 distance, evaluated at squared distances.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", content = "b", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `e^{-ξ/2}`, the kernel of a standard normal weight.
    #[default]
    Gaussian,
    /// `e^{-ξ^{b/2}}`, b ∈ (0, 2).
    StableIndex(f64),
    /// `(1 + ξ)^{-b}`, b > 0.
    GenLaplace(f64),
}

impl KernelSpec {
    pub fn validate(self) -> Result<Self> {
        match self {
            KernelSpec::Gaussian => Ok(self),
            KernelSpec::StableIndex(b) if b > 0.0 && b < 2.0 => Ok(self),
            KernelSpec::GenLaplace(b) if b > 0.0 && b.is_finite() => Ok(self),
            other => Err(Error::InvalidParameter(format!("kernel parameter out of range: {other}"))),
        }
    }

    pub fn eval(self, xi: f64) -> Result<f64> {
        if !(xi >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kernel argument must be >= 0, got {xi}"
            )));
        }
        Ok(self.validate()?.eval_unchecked(xi))
    }

    #[inline]
    pub fn eval_unchecked(self, xi: f64) -> f64 {
        match self {
            KernelSpec::Gaussian => (-0.5 * xi).exp(),
            KernelSpec::StableIndex(b) => (-xi.powf(0.5 * b)).exp(),
            KernelSpec::GenLaplace(b) => (1.0 + xi).powf(-b),
        }
    }
}

/// Convenience wrapper for [`KernelSpec::eval`].
pub fn kernel_eval(spec: KernelSpec, xi: f64) -> Result<f64> {
    spec.eval(xi)
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Gaussian => write!(f, "gaussian"),
            KernelSpec::StableIndex(b) => write!(f, "stable:{b}"),
            KernelSpec::GenLaplace(b) => write!(f, "genlaplace:{b}"),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    /// Parses `gaussian`, `stable:<b>` or `genlaplace:<b>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s.as_str(), None),
        };
        let param = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(|| Error::InvalidParameter(format!("kernel '{name}' needs a parameter")))?
                .parse::<f64>()
                .map_err(|e| Error::InvalidParameter(format!("kernel parameter: {e}")))
        };
        let spec = match name {
            "gaussian" | "normal" if arg.is_none() => KernelSpec::Gaussian,
            "stable" => KernelSpec::StableIndex(param(arg)?),
            "genlaplace" => KernelSpec::GenLaplace(param(arg)?),
            _ => return Err(Error::InvalidParameter(format!("unknown kernel '{s}'"))),
        };
        spec.validate()
    }
}
