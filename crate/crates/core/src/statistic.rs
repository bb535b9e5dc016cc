//! The two-sample ECF statistic
//!
//! ```text
//! T = (1/n²) ΣΣ Ψ(‖Xj − Xk‖²) + (1/m²) ΣΣ Ψ(‖X0j − X0k‖²) − (2/nm) ΣΣ Ψ(‖Xj − X0k‖²)
//! ```
//!
//! evaluated by streaming over fixed-size row blocks. Each block is summed
//! sequentially with compensation and the block partials are folded by a fixed
//! binary tree, so the result does not depend on the number of worker threads.
//! Rows are sorted before summation, which makes the value invariant to row
//! order bit for bit.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::rng::{RandomStream, SeedSpec};
pub use crate::sample::Sample;

const BLOCK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatValue {
    pub value: f64,
    pub n: usize,
    pub m: usize,
    pub kernel: KernelSpec,
}

/// Empirical characteristic function `(1/n) Σ e^{i tᵀXj}`.
pub fn ecf(x: &Sample, t: &[f64]) -> Result<Complex64> {
    if t.len() != x.p() {
        return Err(Error::DimensionMismatch {
            expected: x.p(),
            got: t.len(),
        });
    }
    Ok(ecf_unchecked(x.as_slice(), x.p(), t))
}

fn ecf_unchecked(data: &[f64], p: usize, t: &[f64]) -> Complex64 {
    let mut re = Neumaier::default();
    let mut im = Neumaier::default();
    for row in data.chunks_exact(p) {
        let a: f64 = row.iter().zip(t).map(|(x, t)| x * t).sum();
        let (s, c) = a.sin_cos();
        re.add(c);
        im.add(s);
    }
    let n = (data.len() / p) as f64;
    Complex64::new(re.total() / n, im.total() / n)
}

#[derive(Debug, Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    #[inline]
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn merge(mut self, other: Neumaier) -> Neumaier {
        self.add(other.sum);
        self.add(other.comp);
        self
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Folds block partials pairwise: (0,1), (2,3), ... then recurses.
fn tree_reduce(mut parts: Vec<Neumaier>) -> Neumaier {
    if parts.is_empty() {
        return Neumaier::default();
    }
    while parts.len() > 1 {
        parts = parts
            .chunks(2)
            .map(|c| if c.len() == 2 { c[0].merge(c[1]) } else { c[0] })
            .collect();
    }
    parts[0]
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn sorted_rows(s: &Sample) -> Vec<f64> {
    let p = s.p();
    let mut rows: Vec<&[f64]> = s.rows().collect();
    rows.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out = Vec::with_capacity(s.n() * p);
    for r in rows {
        out.extend_from_slice(r);
    }
    out
}

/// Σ_{j<k} Ψ(‖xj − xk‖²).
fn within_sum<K: Fn(f64) -> f64 + Sync>(data: &[f64], p: usize, psi: &K) -> f64 {
    let n = data.len() / p;
    let blocks = n.div_ceil(BLOCK);
    let parts: Vec<Neumaier> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = Neumaier::default();
            for j in b * BLOCK..((b + 1) * BLOCK).min(n) {
                let xj = &data[j * p..(j + 1) * p];
                for k in (j + 1)..n {
                    acc.add(psi(sq_dist(xj, &data[k * p..(k + 1) * p])));
                }
            }
            acc
        })
        .collect();
    tree_reduce(parts).total()
}

/// Σ_j Σ_k Ψ(‖xj − yk‖²).
fn cross_sum<K: Fn(f64) -> f64 + Sync>(x: &[f64], y: &[f64], p: usize, psi: &K) -> f64 {
    let n = x.len() / p;
    let m = y.len() / p;
    let blocks = n.div_ceil(BLOCK);
    let parts: Vec<Neumaier> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = Neumaier::default();
            for j in b * BLOCK..((b + 1) * BLOCK).min(n) {
                let xj = &x[j * p..(j + 1) * p];
                for k in 0..m {
                    acc.add(psi(sq_dist(xj, &y[k * p..(k + 1) * p])));
                }
            }
            acc
        })
        .collect();
    tree_reduce(parts).total()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.len().cmp(&b.len()).then_with(|| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    })
}

fn t_stat_with<K: Fn(f64) -> f64 + Sync>(x: &Sample, x0: &Sample, psi: K) -> f64 {
    let p = x.p();
    let xs = sorted_rows(x);
    let ys = sorted_rows(x0);
    let n = x.n() as f64;
    let m = x0.n() as f64;
    let sxx = 2.0 * within_sum(&xs, p, &psi) + n;
    let syy = 2.0 * within_sum(&ys, p, &psi) + m;
    // Canonical orientation keeps T(X, X0) == T(X0, X) exactly.
    let sxy = if lex_cmp(&xs, &ys).is_le() {
        cross_sum(&xs, &ys, p, &psi)
    } else {
        cross_sum(&ys, &xs, p, &psi)
    };
    sxx / (n * n) + syy / (m * m) - 2.0 * sxy / (n * m)
}

/// The ECF statistic between the (standardized) data `x` and the null sample `x0`.
pub fn t_stat(x: &Sample, x0: &Sample, kernel: KernelSpec) -> Result<StatValue> {
    if x.p() != x0.p() {
        return Err(Error::DimensionMismatch {
            expected: x.p(),
            got: x0.p(),
        });
    }
    let kernel = kernel.validate()?;
    let value = match kernel {
        KernelSpec::Gaussian => t_stat_with(x, x0, |d| (-0.5 * d).exp()),
        k => t_stat_with(x, x0, move |d| k.eval_unchecked(d)),
    };
    if !value.is_finite() {
        return Err(Error::NonFinite("statistic".into()));
    }
    Ok(StatValue {
        value,
        n: x.n(),
        m: x0.n(),
        kernel,
    })
}

/// Monte Carlo estimate of `∫ |φ_X(t) − φ_X0(t)|² w(t) dt` with `w` the
/// standard normal density, returned as `(estimate, standard error)`.
///
/// This is the integral the Gaussian-kernel statistic evaluates in closed
/// form, estimated directly by drawing `t ~ N(0, I)`.
pub fn mc_oracle(
    x: &Sample,
    x0: &Sample,
    kernel: KernelSpec,
    draws: usize,
    stream: &mut RandomStream,
) -> Result<(f64, f64)> {
    if kernel != KernelSpec::Gaussian {
        return Err(Error::Unsupported(format!(
            "integration oracle is defined for the Gaussian kernel only, got {kernel}"
        )));
    }
    if x.p() != x0.p() {
        return Err(Error::DimensionMismatch {
            expected: x.p(),
            got: x0.p(),
        });
    }
    if draws < 2 {
        return Err(Error::InvalidParameter("oracle needs at least 2 draws".into()));
    }
    let p = x.p();
    let base = SeedSpec::new(stream.next_u64());
    const CHUNK: usize = 4096;
    let chunks = draws.div_ceil(CHUNK);
    let parts: Vec<(Neumaier, Neumaier)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut s = base.child(c as u64).stream();
            let mut sum = Neumaier::default();
            let mut sum2 = Neumaier::default();
            let mut t = vec![0.0; p];
            for _ in c * CHUNK..((c + 1) * CHUNK).min(draws) {
                t.iter_mut().for_each(|v| *v = s.std_normal());
                let d = ecf_unchecked(x.as_slice(), p, &t) - ecf_unchecked(x0.as_slice(), p, &t);
                let v = d.norm_sqr();
                sum.add(v);
                sum2.add(v * v);
            }
            (sum, sum2)
        })
        .collect();
    let (s1, s2): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
    let k = draws as f64;
    let mean = tree_reduce(s1).total() / k;
    let var = ((tree_reduce(s2).total() / k - mean * mean) * k / (k - 1.0)).max(0.0);
    Ok((mean, (var / k).sqrt()))
}
