//! Normal and Student-t distribution functions in log space, and the
//! imaginary-argument normal integral τ.

use std::f64::consts::{PI, SQRT_2};

use statrs::function::beta::{beta_reg, ln_beta};
use libm::erfc;
use statrs::function::erf::erfc_inv;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

#[inline]
pub fn norm_logpdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// `ln Φ(x)`, accurate far into the lower tail.
pub fn log_norm_cdf(x: f64) -> f64 {
    if x < -30.0 {
        let z2 = 1.0 / (x * x);
        let series = 1.0 - z2 * (1.0 - z2 * (3.0 - z2 * (15.0 - 105.0 * z2)));
        -0.5 * x * x - (-x).ln() - LN_SQRT_2PI + series.ln()
    } else if x > 5.0 {
        (-0.5 * erfc(x / SQRT_2)).ln_1p()
    } else {
        norm_cdf(x).ln()
    }
}

/// Standard normal quantile.
pub fn norm_quantile(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

/// `ln T(x; ν)`, the log CDF of Student's t with `ν` degrees of freedom.
pub fn log_t_cdf(x: f64, nu: f64) -> f64 {
    let lower_tail = |y: f64| -> f64 {
        // T(-|y|) = ½ I_z(ν/2, 1/2), z = ν/(ν + y²)
        let z = nu / (nu + y * y);
        let (a, b) = (0.5 * nu, 0.5);
        if z < 1e-8 {
            // leading terms of the incomplete beta series near z = 0
            a * z.ln() + b * (1.0 - z).ln() - a.ln() - ln_beta(a, b)
                + ((a + b) / (a + 1.0) * z).ln_1p()
                - std::f64::consts::LN_2
        } else {
            (0.5 * beta_reg(a, b, z)).ln()
        }
    };
    if x <= 0.0 {
        lower_tail(x)
    } else {
        let upper = lower_tail(-x).exp();
        (-upper).ln_1p()
    }
}

/// τ(x) = ∫₀ˣ √(2/π) e^{u²/2} du, so that 2Φ(ix) = 1 + iτ(x).
pub fn tau(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let c = (2.0 / PI).sqrt();
    let (v, _) = crate::quad::integrate(|u| c * (0.5 * u * u).exp(), 0.0, x.abs(), 0.0, 1e-14);
    v.copysign(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
        let err = norm_cdf(1.959_963_984_540_054) - 0.975;
        assert!(err.abs() < 1e-14, "{err:e}");
        assert!((norm_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
    }

    #[test]
    fn log_cdf_is_continuous_across_branches() {
        for &x in &[-30.0f64, 5.0] {
            let a = log_norm_cdf(x - 1e-9);
            let b = log_norm_cdf(x + 1e-9);
            assert!((a - b).abs() < 1e-6 * a.abs().max(1e-12), "{x}: {a} {b}");
        }
        let direct = norm_cdf(-30.0).ln();
        let series = {
            let x = -30.0f64;
            let z2 = 1.0 / (x * x);
            -0.5 * x * x - (-x).ln() - LN_SQRT_2PI
                + (1.0 - z2 * (1.0 - z2 * (3.0 - z2 * (15.0 - 105.0 * z2)))).ln()
        };
        assert!((direct - series).abs() < 1e-10);
        assert!(log_norm_cdf(-200.0).is_finite());
    }

    #[test]
    fn t_cdf_matches_cauchy() {
        for x in [-50.0f64, -3.0, -0.5, 0.0, 0.7, 4.0] {
            let exact = 0.5 + x.atan() / PI;
            assert!((log_t_cdf(x, 1.0).exp() - exact).abs() < 1e-12, "{x}");
        }
        // deep tail of Cauchy: T(x) ≈ 1/(π|x|)
        let x = -1e6;
        assert!((log_t_cdf(x, 1.0) - (1.0 / (PI * 1e6)).ln()).abs() < 1e-6);
    }

    #[test]
    fn tau_matches_power_series() {
        for x in [-2.5f64, -0.3, 0.0, 0.4, 1.0, 3.0] {
            let mut term = x;
            let mut sum = 0.0;
            for k in 0..200 {
                sum += term / (2 * k + 1) as f64;
                term *= x * x / (2.0 * (k + 1) as f64);
            }
            let series = (2.0 / PI).sqrt() * sum;
            assert!((tau(x) - series).abs() <= 1e-12 * series.abs().max(1.0), "{x}");
        }
    }
}
