//! Monte Carlo drivers. Every replication draws from streams keyed by
//! `[procedure, replication, stage]`, and replications are collected in index
//! order, so results do not depend on the thread count.

use std::time::Instant;

use rayon::prelude::*;

use super::{
    bootstrap_p_value, standardize, statistic_for, upper_quantile, Mode, ReplicationRecord, RunInfo, Shape,
    StudyReport, TestConfig, TestOutcome,
};
use crate::distributions::FamilySpec;
use crate::error::{Error, Result};
use crate::estimation;
use crate::rng::{RandomStream, SeedSpec};
use crate::sample::Sample;

const TAG_CRITICAL: u64 = 0;
const TAG_POWER: u64 = 1;
const TAG_WARP: u64 = 2;
const TAG_BOOT: u64 = 3;
const TAG_NESTED: u64 = 4;

const DATA: u64 = 0;
const NULL: u64 = 1;
const BOOT_DATA: u64 = 2;
const BOOT_NULL: u64 = 3;
/// A retried replication uses stages shifted by this much.
const STAGES: u64 = 4;
const ATTEMPTS: u64 = 2;
/// Bootstrap failure share at which a procedure aborts.
const MAX_FAILURE_SHARE: f64 = 0.05;

fn stream(root: &SeedSpec, rep: usize, attempt: u64, stage: u64) -> RandomStream {
    root.children(&[rep as u64, stage + STAGES * attempt]).stream()
}

/// Runs `f` for attempt 0 and, if it fails, once more for attempt 1.
fn with_retry<T>(rep: usize, f: impl Fn(u64) -> Result<T>) -> std::result::Result<T, String> {
    let mut last = String::new();
    for attempt in 0..ATTEMPTS {
        match f(attempt) {
            Ok(v) => return Ok(v),
            Err(e) => last = e.to_string(),
        }
    }
    Err(format!("replication {rep}: {last}"))
}

fn split<T>(results: Vec<std::result::Result<T, String>>) -> (Vec<(usize, T)>, Vec<String>) {
    let mut ok = Vec::with_capacity(results.len());
    let mut log = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => ok.push((i, v)),
            Err(e) => log.push(e),
        }
    }
    (ok, log)
}

fn check_failures(failed: usize, total: usize) -> Result<()> {
    if failed as f64 >= MAX_FAILURE_SHARE * total as f64 && failed > 0 {
        return Err(Error::TooManyFailures { failed, total });
    }
    Ok(())
}

/// Full fit, standardization and statistic for one dataset.
fn composite_statistic(cfg: &TestConfig, x: &Sample, s: &mut RandomStream) -> Result<(f64, Shape)> {
    let fit = estimation::fit(cfg.family, x)?;
    let (z, shape) = standardize(x, &fit.params)?;
    let t = statistic_for(&z, &shape, cfg.m, cfg.kernel, s)?;
    Ok((t.value, shape))
}

/// Profile fit under λ₀, standardization and statistic for one dataset.
fn simple_statistic(cfg: &TestConfig, shape0: &Shape, x: &Sample, s: &mut RandomStream) -> Result<f64> {
    let fit = shape0.profile_fit(x)?;
    let (z, _) = standardize(x, &fit.params)?;
    Ok(statistic_for(&z, shape0, cfg.m, cfg.kernel, s)?.value)
}

fn simple_statistics(
    cfg: &TestConfig,
    generator: &FamilySpec,
    tag: u64,
) -> Result<(Vec<(usize, f64)>, Vec<String>)> {
    cfg.validate()?;
    if cfg.mode != Mode::Simple {
        return Err(Error::InvalidParameter("simple-null procedures need mode = simple".into()));
    }
    let shape0 = cfg.shape0()?;
    let root = SeedSpec::new(cfg.seed).child(tag);
    let results: Vec<_> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            with_retry(rep, |a| {
                let x = generator.sample(cfg.n, &mut stream(&root, rep, a, DATA))?;
                simple_statistic(cfg, shape0, &x, &mut stream(&root, rep, a, NULL))
            })
        })
        .collect();
    Ok(split(results))
}

/// Monte Carlo critical value of the simple-null test: M datasets from the
/// null at λ₀, each profile-fitted, standardized and compared with a fresh
/// null sample; the result is the ⌈(1−δ)M⌉-th order statistic. Failed
/// replications are retried once and then skipped.
pub fn simple_null_critical(cfg: &TestConfig, p: usize) -> Result<(f64, Vec<String>)> {
    let null = cfg.shape0()?.null_spec(p)?;
    let (stats, log) = simple_statistics(cfg, &null, TAG_CRITICAL)?;
    let values: Vec<f64> = stats.into_iter().map(|(_, t)| t).collect();
    Ok((upper_quantile(&values, cfg.delta)?, log))
}

/// Rejection rate against `alternative` for a given critical value, over
/// L = `cfg.replications` datasets.
pub fn simple_null_power(cfg: &TestConfig, critical: f64, alternative: &FamilySpec) -> Result<StudyReport> {
    let started = Instant::now();
    let (stats, log) = simple_statistics(cfg, alternative, TAG_POWER)?;
    let records: Vec<ReplicationRecord> = stats
        .into_iter()
        .map(|(index, t)| ReplicationRecord {
            index,
            statistic: t,
            bootstrap: None,
            reject: t > critical,
        })
        .collect();
    Ok(report(cfg, alternative, "simple", Some(critical), records, log, started))
}

/// Critical value followed by the power run.
pub fn simple_null_study(cfg: &TestConfig, alternative: &FamilySpec) -> Result<StudyReport> {
    let started = Instant::now();
    let (critical, mut log) = simple_null_critical(cfg, alternative.dim())?;
    let mut rep = simple_null_power(cfg, critical, alternative)?;
    log.append(&mut rep.failure_log);
    rep.failures = log.len();
    rep.failure_log = log;
    rep.run = RunInfo::finish(cfg.seed, started);
    Ok(rep)
}

fn report(
    cfg: &TestConfig,
    truth: &FamilySpec,
    protocol: &str,
    critical: Option<f64>,
    records: Vec<ReplicationRecord>,
    log: Vec<String>,
    started: Instant,
) -> StudyReport {
    let rejections = records.iter().filter(|r| r.reject).count();
    let effective = records.len();
    StudyReport {
        config: cfg.clone(),
        truth: truth.clone(),
        protocol: protocol.to_string(),
        critical_value: critical,
        rejections,
        effective_replications: effective,
        rejection_rate: rejections as f64 / effective.max(1) as f64,
        failures: log.len(),
        failure_log: log,
        records,
        run: RunInfo::finish(cfg.seed, started),
    }
}

/// Warp-speed study: each of M datasets from `truth` yields its statistic T
/// and a single bootstrap statistic T*; the critical value is the
/// ⌈(1−δ)M⌉-th order statistic of the T* and the rate is `#{T > c}/M`.
pub fn warp_speed_study(cfg: &TestConfig, truth: &FamilySpec) -> Result<StudyReport> {
    let started = Instant::now();
    cfg.validate()?;
    truth.validate()?;
    let p = truth.dim();
    let root = SeedSpec::new(cfg.seed).child(TAG_WARP);
    let results: Vec<_> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            with_retry(rep, |a| {
                let x = truth.sample(cfg.n, &mut stream(&root, rep, a, DATA))?;
                let (t, shape) = composite_statistic(cfg, &x, &mut stream(&root, rep, a, NULL))?;
                let xs = shape.null_spec(p)?.sample(cfg.n, &mut stream(&root, rep, a, BOOT_DATA))?;
                let (ts, _) = composite_statistic(cfg, &xs, &mut stream(&root, rep, a, BOOT_NULL))?;
                Ok((t, ts))
            })
        })
        .collect();
    let (pairs, log) = split(results);
    check_failures(log.len(), cfg.replications)?;
    let boot: Vec<f64> = pairs.iter().map(|(_, (_, ts))| *ts).collect();
    let critical = upper_quantile(&boot, cfg.delta)?;
    let records = pairs
        .into_iter()
        .map(|(index, (t, ts))| ReplicationRecord {
            index,
            statistic: t,
            bootstrap: Some(ts),
            reject: t > critical,
        })
        .collect();
    Ok(report(cfg, truth, "warp-speed", Some(critical), records, log, started))
}

fn composite_at(x: &Sample, cfg: &TestConfig, root: &SeedSpec) -> Result<TestOutcome> {
    let started = Instant::now();
    cfg.validate()?;
    let fit = estimation::fit(cfg.family, x)?;
    let (z, shape) = standardize(x, &fit.params)?;
    let statistic = statistic_for(&z, &shape, cfg.m, cfg.kernel, &mut stream(root, 0, 0, NULL))?;
    let null = shape.null_spec(x.p())?;
    let results: Vec<_> = (1..=cfg.bootstrap)
        .into_par_iter()
        .map(|b| {
            with_retry(b, |a| {
                let xs = null.sample(x.n(), &mut stream(root, b, a, BOOT_DATA))?;
                Ok(composite_statistic(cfg, &xs, &mut stream(root, b, a, BOOT_NULL))?.0)
            })
        })
        .collect();
    let (boot, log) = split(results);
    check_failures(log.len(), cfg.bootstrap)?;
    let boot: Vec<f64> = boot.into_iter().map(|(_, t)| t).collect();
    let p_value = bootstrap_p_value(statistic.value, &boot);
    Ok(TestOutcome {
        mode: Mode::Composite,
        statistic,
        p_value: Some(p_value),
        critical_value: None,
        reject: p_value <= cfg.delta,
        delta: cfg.delta,
        estimates: fit,
        shape,
        replications: boot.len(),
        failures: log.len(),
        failure_log: log,
        run: RunInfo::finish(cfg.seed, started),
    })
}

/// Parametric-bootstrap test of one dataset: fit, standardize, compare with
/// a null sample at the fitted shape, then B bootstrap cycles at that shape;
/// `p = (1 + #{T*_b ≥ T})/(B + 1)`. Bootstrap samples have the size of the
/// data. Aborts when at least 5% of the cycles fail.
pub fn composite_test(x: &Sample, cfg: &TestConfig) -> Result<TestOutcome> {
    composite_at(x, cfg, &SeedSpec::new(cfg.seed).child(TAG_BOOT))
}

/// Simple-null test of one dataset against the critical value computed for
/// its size and dimension.
pub fn simple_test(x: &Sample, cfg: &TestConfig) -> Result<TestOutcome> {
    let started = Instant::now();
    let shape0 = cfg.shape0()?.clone();
    let mut c = cfg.clone();
    c.n = x.n();
    let (critical, log) = simple_null_critical(&c, x.p())?;
    let fit = shape0.profile_fit(x)?;
    let (z, _) = standardize(x, &fit.params)?;
    let root = SeedSpec::new(cfg.seed).child(TAG_POWER);
    let statistic = statistic_for(&z, &shape0, cfg.m, cfg.kernel, &mut stream(&root, 0, 0, NULL))?;
    Ok(TestOutcome {
        mode: Mode::Simple,
        reject: statistic.value > critical,
        statistic,
        p_value: None,
        critical_value: Some(critical),
        delta: cfg.delta,
        estimates: fit,
        shape: shape0,
        replications: cfg.replications - log.len(),
        failures: log.len(),
        failure_log: log,
        run: RunInfo::finish(cfg.seed, started),
    })
}

/// Study with the full B-cycle bootstrap for each of the M datasets; a
/// dataset is rejected when its p-value is at most δ. Costs M·B fits.
pub fn nested_study(cfg: &TestConfig, truth: &FamilySpec) -> Result<StudyReport> {
    let started = Instant::now();
    cfg.validate()?;
    let root = SeedSpec::new(cfg.seed).child(TAG_NESTED);
    let results: Vec<_> = (0..cfg.replications)
        .map(|rep| {
            with_retry(rep, |a| {
                let x = truth.sample(cfg.n, &mut stream(&root, rep, a, DATA))?;
                composite_at(&x, cfg, &root.children(&[rep as u64, STAGES * ATTEMPTS + a]))
            })
        })
        .collect();
    let (outcomes, log) = split(results);
    let records = outcomes
        .into_iter()
        .map(|(index, o)| ReplicationRecord {
            index,
            statistic: o.statistic.value,
            bootstrap: o.p_value,
            reject: o.reject,
        })
        .collect();
    Ok(report(cfg, truth, "nested-bootstrap", None, records, log, started))
}
